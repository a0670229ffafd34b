"""Tensor wire layout: u32 LE ndim, ndim x u32 LE dims, numel x f32 LE."""
import struct
import numpy as np

from ...errors import CodecError

_U32 = struct.Struct('<I')
_MAX_ELEMENTS = 2 ** 32


def encoded_size(shape) -> int:
    numel = 1
    for dim in shape:
        numel *= int(dim)
    return 4 + 4 * len(shape) + 4 * numel


def encode_tensor(t) -> bytes:
    t = np.asarray(t)
    if t.ndim == 0 or any(dim < 1 for dim in t.shape):
        raise CodecError(f"cannot encode tensor of shape {t.shape}")
    header = _U32.pack(t.ndim) + struct.pack(f'<{t.ndim}I', *t.shape)
    return header + np.ascontiguousarray(t, dtype='<f4').tobytes()


def decode_tensor_from(buffer, offset=0):
    """Decode one tensor starting at offset; returns (tensor, next offset)."""
    view = memoryview(buffer)
    if len(view) - offset < 4:
        raise CodecError("truncated tensor header")
    (ndim,) = _U32.unpack_from(view, offset)
    offset += 4
    if ndim < 1:
        raise CodecError("tensor with zero dimensions")
    if len(view) - offset < 4 * ndim:
        raise CodecError(f"truncated dims: need {4 * ndim} bytes")
    dims = struct.unpack_from(f'<{ndim}I', view, offset)
    offset += 4 * ndim
    numel = 1
    for dim in dims:
        if dim < 1:
            raise CodecError(f"invalid dimension {dim}")
        numel *= dim
        if numel >= _MAX_ELEMENTS:
            raise CodecError(f"dimension product overflows: {dims}")
    nbytes = 4 * numel
    if len(view) - offset < nbytes:
        raise CodecError(f"truncated data: need {nbytes} bytes, have {len(view) - offset}")
    data = np.frombuffer(view, dtype='<f4', count=numel, offset=offset).astype(np.float32)
    return data.reshape(dims), offset + nbytes


def decode_tensor(buffer) -> np.ndarray:
    t, end = decode_tensor_from(buffer, 0)
    if end != len(buffer):
        raise CodecError(f"{len(buffer) - end} trailing bytes after tensor")
    return t


def encode_tensors(*tensors) -> bytes:
    return b''.join(encode_tensor(t) for t in tensors)


def decode_tensors(buffer, count):
    out = []
    offset = 0
    for _ in range(count):
        t, offset = decode_tensor_from(buffer, offset)
        out.append(t)
    if offset != len(buffer):
        raise CodecError(f"{len(buffer) - offset} trailing bytes after {count} tensors")
    return out
