class HarnessError(Exception):
    """Root of every error raised by splitbench."""


class ShapeError(HarnessError):
    def __init__(self, message, layer_index=None, expected=None, actual=None):
        self.layer_index = layer_index
        self.expected = expected
        self.actual = actual
        details = []
        if layer_index is not None:
            details.append(f"layer {layer_index}")
        if expected is not None:
            details.append(f"expected {tuple(expected)}")
        if actual is not None:
            details.append(f"got {tuple(actual)}")
        if details:
            message = f"{message} ({', '.join(details)})"
        super().__init__(message)


class ConfigError(HarnessError):
    def __init__(self, message, key=None):
        self.key = key
        if key is not None:
            message = f"{key}: {message}"
        super().__init__(message)


class DatasetError(HarnessError):
    def __init__(self, message, row=None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class PartitionError(HarnessError):
    pass


class ChannelError(HarnessError):
    """Closed, refused or reset channel."""


class ProtocolError(HarnessError):
    """Unexpected, unknown or malformed frame."""


class CodecError(ProtocolError):
    pass


class EngineError(HarnessError):
    def __init__(self, message, round_index=None, client_id=None):
        self.round_index = round_index
        self.client_id = client_id
        where = []
        if round_index is not None:
            where.append(f"round {round_index}")
        if client_id is not None:
            where.append(f"client {client_id}")
        if where:
            message = f"[{', '.join(where)}] {message}"
        super().__init__(message)


class CacheError(HarnessError, RuntimeError):
    """Backward requested without a matching forward."""
