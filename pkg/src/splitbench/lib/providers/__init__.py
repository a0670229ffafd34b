"""Name-based registries filled by the core plugins.

ProviderManager maps an engine entry point (`run_fl`, `split_client`, ...) to the plugin that
provides it; HookManager fans a notification such as `round_done` out to every observer.
Both expose registered names as awaitable attributes: `await service_manager.run_fl(...)`.
"""
import asyncio
from typing import Callable, Dict, List, NamedTuple, Optional

from loguru import logger

from ...errors import HarnessError


class Provider(NamedTuple):
    plugin: str
    implementation: Callable
    docstring: Optional[str]


async def _call(implementation, *args, **kwargs):
    result = implementation(*args, **kwargs)
    if asyncio.iscoroutine(result):
        result = await result
    return result


class ProviderManager:
    """Entry points registered by plugins; the first plugin registered for a name wins."""

    def __init__(self):
        self.providers: Dict[str, List[Provider]] = {}

    def register(self, name, plugin, implementation, docstring=None):
        entries = self.providers.setdefault(name, [])
        if any(entry.plugin == plugin for entry in entries):
            logger.debug("{plugin} already provides {name}", plugin=plugin, name=name)
            return
        entries.append(Provider(plugin, implementation, docstring))
        logger.debug("registered {name} from plugin {plugin}", name=name, plugin=plugin)

    def has(self, name):
        return name in self.providers

    def plugins_for(self, name) -> List[str]:
        return [entry.plugin for entry in self.providers.get(name, [])]

    def describe(self) -> Dict[str, Optional[str]]:
        """Docstring of the active provider of every registered name."""
        return {name: entries[0].docstring for name, entries in self.providers.items()}

    async def execute(self, name, *args, **kwargs):
        if name not in self.providers:
            raise HarnessError(f"no plugin provides '{name}'")
        return await _call(self.providers[name][0].implementation, *args, **kwargs)

    def __getattr__(self, name):
        if name.startswith('_'):
            raise AttributeError(name)

        async def method(*args, **kwargs):
            return await self.execute(name, *args, **kwargs)

        return method


class HookManager:
    """Observers per event name, awaited in registration order."""

    def __init__(self):
        self.hooks: Dict[str, List[Callable]] = {}

    def register(self, name, implementation):
        observers = self.hooks.setdefault(name, [])
        if implementation not in observers:
            observers.append(implementation)
            logger.debug("hook {name}: {count} observer(s)", name=name, count=len(observers))

    async def notify(self, name, *args, **kwargs) -> list:
        return [await _call(observer, *args, **kwargs) for observer in self.hooks.get(name, [])]

    def __getattr__(self, name):
        if name.startswith('_'):
            raise AttributeError(name)

        async def method(*args, **kwargs):
            return await self.notify(name, *args, **kwargs)

        return method
