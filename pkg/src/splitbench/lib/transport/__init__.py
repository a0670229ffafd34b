from .codec import decode_tensor, decode_tensors, encode_tensor, encode_tensors, encoded_size
from .frames import HEADER_SIZE, MAX_PAYLOAD, Frame, FrameType, expect, frame_size
from .channel import ByteCounter, Endpoint, counter_snapshot, make_loopback, recv_frame, send_frame
from .tcp import TcpEndpoint, TcpListener, parse_addr, tcp_connect, tcp_listen
from .handshake import accept_clients, read_hello, say_bye, send_hello, wait_bye

__all__ = [
    'decode_tensor', 'decode_tensors', 'encode_tensor', 'encode_tensors', 'encoded_size',
    'HEADER_SIZE', 'MAX_PAYLOAD', 'Frame', 'FrameType', 'expect', 'frame_size',
    'ByteCounter', 'Endpoint', 'counter_snapshot', 'make_loopback', 'recv_frame', 'send_frame',
    'TcpEndpoint', 'TcpListener', 'parse_addr', 'tcp_connect', 'tcp_listen',
    'accept_clients', 'read_hello', 'say_bye', 'send_hello', 'wait_bye',
]
