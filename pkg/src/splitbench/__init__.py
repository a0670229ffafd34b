from .errors import HarnessError

__version__ = "0.1.0"
