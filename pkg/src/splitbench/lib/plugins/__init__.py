"""Core plugin discovery.

Each entry of the manifest names a package under `splitbench.coreplugins`; loading one imports its
`mod.py`, whose `@service()` and `@hook()` decorators register the engine entry points and round
observers. A run reads the packaged manifest unless the config names another one
(`plugin_manifest`), which is how a mode can be switched off.

Typical usage:
    from splitbench.lib.plugins import load
    from splitbench.lib.providers.services import service_manager

    load()
    series = await service_manager.run_fl(config, workload, endpoints)
"""

from .loader import enabled_plugins, get_plugin_import_path, load
from .manifest import (
    list_enabled,
    load_plugin_manifest,
    plugin_services,
    save_plugin_manifest,
    toggle_plugin_state,
)

__all__ = [
    'load',
    'enabled_plugins',
    'get_plugin_import_path',
    'load_plugin_manifest',
    'save_plugin_manifest',
    'toggle_plugin_state',
    'plugin_services',
    'list_enabled',
]
