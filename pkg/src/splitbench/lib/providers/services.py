from . import ProviderManager

service_manager = ProviderManager()


def plugin_of(func):
    """`splitbench.coreplugins.fl.mod` -> `fl`."""
    parts = func.__module__.split('.')
    return parts[-2] if len(parts) > 1 else parts[0]


def service(name=None):
    """Register an engine entry point under its function name (or `name`) for its plugin."""
    def decorator(func):
        service_manager.register(name or func.__name__, plugin_of(func), func, func.__doc__)
        return func
    return decorator
