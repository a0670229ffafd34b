from . import HookManager

hook_manager = HookManager()


def hook(name=None):
    """Observe the event named after the decorated function, e.g. `round_done`."""
    def decorator(func):
        hook_manager.register(name or func.__name__, func)
        return func
    return decorator
