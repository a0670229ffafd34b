import importlib
import termcolor
from loguru import logger

from .manifest import list_enabled, load_plugin_manifest

loaded_plugins = {}


def get_plugin_import_path(plugin_name):
    return f"splitbench.coreplugins.{plugin_name}"


def load(manifest=None, verbose=False):
    """Import every enabled plugin's mod.py so its services and hooks register.

    Returns:
        list: (plugin_name, reason) for each plugin that failed to load
    """
    if manifest is None:
        manifest = load_plugin_manifest()
    failed_plugins = []

    for plugin_name in list_enabled(manifest):
        if plugin_name in loaded_plugins:
            continue
        plugin_path = get_plugin_import_path(plugin_name)
        try:
            module = importlib.import_module(f"{plugin_path}.mod")
        except ImportError as e:
            logger.exception("Failed to load plugin {name}", name=plugin_name)
            failed_plugins.append((plugin_name, f"Failed to load plugin: {e}"))
            continue
        loaded_plugins[plugin_name] = module
        if verbose:
            print(termcolor.colored(f"Loaded plugin: {plugin_name}", 'green'))
        logger.debug("Loaded plugin {name}", name=plugin_name)

    if failed_plugins:
        for plugin_name, reason in failed_plugins:
            logger.error("{name}: {reason}", name=plugin_name, reason=reason)
    return failed_plugins


def enabled_plugins(manifest=None):
    if manifest is None:
        manifest = load_plugin_manifest()
    return list_enabled(manifest)
