import json
import os

from ...errors import ConfigError

DEFAULT_MANIFEST = os.path.join(os.path.dirname(__file__), 'default_plugin_manifest.json')


def load_plugin_manifest(path=None):
    """Load a plugin manifest; without a path the packaged default is used.

    Returns:
        dict: The manifest data structure
    """
    if path is None:
        path = DEFAULT_MANIFEST
    elif not os.path.exists(path):
        raise ConfigError(f"plugin manifest not found: {path}", key="plugin_manifest")
    try:
        with open(path, 'r') as f:
            manifest = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"cannot parse {path}: {e}", key="plugin_manifest") from None
    if not isinstance(manifest, dict) or not isinstance(manifest.get('plugins'), dict):
        raise ConfigError(f"{path} has no 'plugins' table", key="plugin_manifest")
    return manifest


def save_plugin_manifest(manifest, path):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with open(path, 'w') as f:
        json.dump(manifest, f, indent=2)


def toggle_plugin_state(manifest, plugin_name, enabled):
    """Toggle a plugin's enabled state in place.

    Returns:
        bool: True if successful, False if plugin not found
    """
    for category in manifest['plugins']:
        if plugin_name in manifest['plugins'][category]:
            manifest['plugins'][category][plugin_name]['enabled'] = enabled
            return True
    return False


def plugin_services(manifest, plugin_name):
    for plugins in manifest['plugins'].values():
        if plugin_name in plugins:
            return list(plugins[plugin_name].get('services', []))
    return []


def list_enabled(manifest):
    return [plugin_name
            for plugins in manifest['plugins'].values()
            for plugin_name, plugin_info in plugins.items()
            if plugin_info.get('enabled')]
