"""
SVT1 binary tensor container.

The one file format used across the repository for datasets, checkpoints
and dumped tensors.

Layout (all integers little-endian):
    magic    4 bytes  b'SVT1'
    version  u8       1
    records  repeated until EOF:
        u32 name length, UTF-8 name,
        u8 dtype (0 = f64, 1 = u32, 2 = u8), u8 rank,
        rank x u64 extents, row-major payload

Usage:
    from apps.core.svt1 import write_records, read_records

    write_records(path, {'ep0/proprio': np.zeros(7)})
    records = read_records(path)
"""

import logging
import math
import struct
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from apps.core.exceptions import (
    BadMagicError,
    SVT1FormatError,
    TruncatedPayloadError,
    UnsupportedVersionError,
)
from apps.core.utils import ensure_parent, format_bytes

logger = logging.getLogger(__name__)

MAGIC = b'SVT1'
VERSION = 1

DTYPE_F64 = 0
DTYPE_U32 = 1
DTYPE_U8 = 2

_NUMPY_DTYPES = {
    DTYPE_F64: np.dtype('<f8'),
    DTYPE_U32: np.dtype('<u4'),
    DTYPE_U8: np.dtype('u1'),
}


def dtype_code(array: np.ndarray) -> int:
    """Map a numpy array to its SVT1 dtype code."""
    kind = array.dtype
    if kind == np.float64:
        return DTYPE_F64
    if kind == np.uint32:
        return DTYPE_U32
    if kind == np.uint8 or kind == np.bool_:
        return DTYPE_U8
    raise SVT1FormatError(f'Unsupported array dtype {kind} for SVT1', code='UNSUPPORTED_DTYPE')


def encode_record(name: str, array: np.ndarray) -> bytes:
    """Serialize one named array as an SVT1 record."""
    array = np.asarray(array)
    code = dtype_code(array)
    payload = np.ascontiguousarray(array, dtype=_NUMPY_DTYPES[code]).tobytes()
    encoded_name = name.encode('utf-8')
    header = struct.pack('<I', len(encoded_name)) + encoded_name
    header += struct.pack('<BB', code, array.ndim)
    header += struct.pack(f'<{array.ndim}Q', *array.shape)
    return header + payload


def encode(records: Iterable[tuple[str, np.ndarray]]) -> bytes:
    """Serialize a sequence of (name, array) pairs into a complete container."""
    chunks = [MAGIC, struct.pack('<B', VERSION)]
    chunks.extend(encode_record(name, array) for name, array in records)
    return b''.join(chunks)


class _Cursor:
    """Bounds-checked reader over a bytes buffer."""

    def __init__(self, buffer: bytes):
        self.buffer = buffer
        self.offset = 0

    @property
    def exhausted(self) -> bool:
        return self.offset >= len(self.buffer)

    def take(self, size: int, what: str) -> bytes:
        end = self.offset + size
        if end > len(self.buffer):
            raise TruncatedPayloadError(
                f'truncated payload while reading {what}: need {size} bytes at offset '
                f'{self.offset}, file has {len(self.buffer)}',
                details={'offset': self.offset, 'needed': size},
            )
        chunk = self.buffer[self.offset:end]
        self.offset = end
        return chunk


def decode(buffer: bytes) -> dict[str, np.ndarray]:
    """
    Parse a complete container.

    Returns:
        Ordered mapping of record name to array

    Raises:
        BadMagicError: first four bytes are not b'SVT1'
        UnsupportedVersionError: version byte is not 1
        TruncatedPayloadError: a record ends early
        SVT1FormatError: unknown dtype code or a record name that is not UTF-8
    """
    if len(buffer) < len(MAGIC):
        raise TruncatedPayloadError('truncated payload: file shorter than the magic header')
    if buffer[:4] != MAGIC:
        raise BadMagicError(f'bad magic: expected {MAGIC!r}, found {bytes(buffer[:4])!r}')
    cursor = _Cursor(buffer)
    cursor.offset = 4
    (version,) = struct.unpack('<B', cursor.take(1, 'version'))
    if version != VERSION:
        raise UnsupportedVersionError(f'unsupported SVT1 version {version}', details={'version': version})

    records: dict[str, np.ndarray] = {}
    while not cursor.exhausted:
        (name_len,) = struct.unpack('<I', cursor.take(4, 'name length'))
        raw_name = cursor.take(name_len, 'record name')
        try:
            name = raw_name.decode('utf-8')
        except UnicodeDecodeError as exc:
            raise SVT1FormatError(
                f'record name at offset {cursor.offset - name_len} is not valid UTF-8',
                code='BAD_RECORD_NAME',
                details={'offset': cursor.offset - name_len},
            ) from exc
        code, rank = struct.unpack('<BB', cursor.take(2, f'{name} dtype/rank'))
        if code not in _NUMPY_DTYPES:
            raise SVT1FormatError(f'unknown dtype code {code} in record {name}', code='UNKNOWN_DTYPE')
        shape = struct.unpack(f'<{rank}Q', cursor.take(8 * rank, f'{name} extents'))
        dtype = _NUMPY_DTYPES[code]
        count = math.prod(shape)
        raw = cursor.take(count * dtype.itemsize, f'{name} payload')
        records[name] = np.frombuffer(raw, dtype=dtype).reshape(shape).copy()
    return records


def write_records(path, records: Mapping[str, np.ndarray] | Iterable[tuple[str, np.ndarray]]) -> Path:
    """Write records (mapping or (name, array) pairs) to `path`."""
    items = records.items() if isinstance(records, Mapping) else records
    path = ensure_parent(path)
    data = encode(items)
    path.write_bytes(data)
    logger.debug('Wrote SVT1 container', extra={'path': str(path), 'size': format_bytes(len(data))})
    return path


def read_records(path) -> dict[str, np.ndarray]:
    """Read every record of the container at `path`."""
    return decode(Path(path).read_bytes())
