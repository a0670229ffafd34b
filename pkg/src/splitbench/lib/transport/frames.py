import struct
from enum import IntEnum
from typing import NamedTuple

from ...errors import ProtocolError

HEADER = struct.Struct('<IB')
HEADER_SIZE = HEADER.size  # 5
MAX_PAYLOAD = 64 * 1024 * 1024


class FrameType(IntEnum):
    HELLO = 1
    MODEL_DOWN = 2
    MODEL_UP = 3
    ACTIVATIONS = 4
    GRADIENTS = 5
    CLIENT_WEIGHTS = 6
    TOKEN_PASS = 7
    ROUND_DONE = 8
    METRICS = 9
    BYE = 10


class Frame(NamedTuple):
    type: FrameType
    payload: bytes = b''

    @property
    def wire_size(self):
        return HEADER_SIZE + len(self.payload)


def frame_size(payload_len) -> int:
    return HEADER_SIZE + payload_len


def encode_frame(frame: Frame, max_payload=MAX_PAYLOAD) -> bytes:
    if len(frame.payload) > max_payload:
        raise ProtocolError(f"payload of {len(frame.payload)} bytes exceeds limit {max_payload}")
    return HEADER.pack(len(frame.payload), int(frame.type)) + bytes(frame.payload)


def parse_header(header: bytes, max_payload=MAX_PAYLOAD):
    """Returns (payload length, FrameType); rejects oversize payloads and unknown tags."""
    length, tag = HEADER.unpack(header)
    if length > max_payload:
        raise ProtocolError(f"announced payload of {length} bytes exceeds limit {max_payload}")
    try:
        kind = FrameType(tag)
    except ValueError:
        raise ProtocolError(f"unknown frame tag 0x{tag:02x}") from None
    return length, kind


def expect(frame: Frame, *kinds) -> Frame:
    if frame.type not in kinds:
        wanted = ", ".join(k.name for k in kinds)
        raise ProtocolError(f"expected {wanted}, received {frame.type.name}")
    return frame
