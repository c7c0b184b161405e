"""
Tests for the SVT1 container, file helpers, JSON logging and metric export.
"""

import json
import logging
import struct
import sys

import numpy as np
import pytest

from apps.core.exceptions import (
    BadMagicError,
    SVT1FormatError,
    TruncatedPayloadError,
    UnsupportedVersionError,
)
from apps.core.svt1 import decode, encode, encode_record, read_records, write_records
from apps.core.utils import format_bytes, format_cell, format_duration, format_float, write_csv, write_pgm
from apps.monitoring.logging import JSONFormatter
from apps.monitoring.metrics import export_metrics, training_steps_total


# SVT1

@pytest.mark.unit
def test_record_layout_is_little_endian():
    raw = encode_record('ab', np.array([[1, 2, 3]], dtype=np.uint32))
    assert raw[:4] == struct.pack('<I', 2)
    assert raw[4:6] == b'ab'
    assert raw[6:8] == bytes([1, 2])  # dtype u32, rank 2
    assert struct.unpack('<2Q', raw[8:24]) == (1, 3)
    assert raw[24:] == struct.pack('<3I', 1, 2, 3)


@pytest.mark.unit
def test_container_header():
    data = encode([])
    assert data == b'SVT1\x01'
    assert decode(data) == {}


@pytest.mark.unit
def test_records_keep_order_dtype_and_shape(tmp_path):
    records = {
        'ep0/proprio': np.linspace(-1.0, 1.0, 7),
        'ep0/patch_types': np.arange(16, dtype=np.uint32).reshape(4, 4),
        'ep0/target_mask': np.array([0, 1, 1, 0], dtype=np.uint8),
        'scalar': np.array(2.5),
        'empty': np.zeros((0, 3)),
    }
    path = write_records(tmp_path / 'nested' / 'x.svt', records)
    loaded = read_records(path)
    assert list(loaded) == list(records)
    for name, array in records.items():
        assert loaded[name].dtype == array.dtype
        assert loaded[name].shape == array.shape
        assert np.array_equal(loaded[name], array)


@pytest.mark.unit
def test_booleans_are_stored_as_bytes():
    loaded = decode(encode([('mask', np.array([True, False]))]))
    assert loaded['mask'].dtype == np.uint8
    assert loaded['mask'].tolist() == [1, 0]


@pytest.mark.unit
def test_unsupported_dtype_is_rejected():
    with pytest.raises(SVT1FormatError):
        encode([('x', np.zeros(3, dtype=np.float32))])


@pytest.mark.unit
def test_bad_magic():
    data = bytearray(encode([('x', np.ones(2))]))
    data[0:4] = b'XXXX'
    with pytest.raises(BadMagicError, match='bad magic'):
        decode(bytes(data))


@pytest.mark.unit
def test_unsupported_version():
    data = bytearray(encode([]))
    data[4] = 2
    with pytest.raises(UnsupportedVersionError):
        decode(bytes(data))


@pytest.mark.unit
@pytest.mark.parametrize('length', [2, 8, 20, 40, 53])
def test_truncated_payload(length):
    data = encode([('x', np.ones((2, 2)))])
    with pytest.raises(TruncatedPayloadError, match='truncated payload'):
        decode(data[:length])


@pytest.mark.unit
def test_unknown_dtype_code():
    data = bytearray(encode([('x', np.ones(1))]))
    data[5 + 4 + 1] = 9
    with pytest.raises(SVT1FormatError):
        decode(bytes(data))


@pytest.mark.unit
def test_record_name_must_be_utf8():
    data = b'SVT1\x01' + struct.pack('<I', 2) + b'\xff\xfe' + struct.pack('<BB', 0, 0) + bytes(8)
    with pytest.raises(SVT1FormatError, match='not valid UTF-8') as exc:
        decode(data)
    assert exc.value.code == 'BAD_RECORD_NAME'


@pytest.mark.unit
def test_huge_extents_are_a_truncated_payload():
    data = b'SVT1\x01' + struct.pack('<I', 1) + b'x' + struct.pack('<BB2Q', 0, 2, 2**32, 2**32) + bytes(8)
    with pytest.raises(TruncatedPayloadError, match='x payload'):
        decode(data)


# File helpers

@pytest.mark.unit
def test_format_cell():
    assert format_cell(0.1) == '0.1'
    assert format_cell(np.float64(1e-5)) == '1e-05'
    assert format_cell(True) == 'true'
    assert format_cell(np.int64(4)) == '4'
    assert format_cell(None) == ''
    assert float(format_float(1 / 3)) == 1 / 3


@pytest.mark.unit
def test_write_csv_is_byte_stable(tmp_path):
    rows = [(1, 0.25, None), (2, 1e-07, True)]
    first, second = tmp_path / 'a.csv', tmp_path / 'b.csv'
    assert write_csv(first, ('step', 'value', 'flag'), rows) == 2
    write_csv(second, ('step', 'value', 'flag'), rows)
    assert first.read_bytes() == second.read_bytes()
    assert first.read_text() == 'step,value,flag\n1,0.25,\n2,1e-07,true\n'


@pytest.mark.unit
def test_write_pgm_normalizes_floats(tmp_path):
    path = tmp_path / 'img.pgm'
    write_pgm(path, np.array([[0.0, 0.5], [1.0, 1.0]]))
    data = path.read_bytes()
    assert data.startswith(b'P5\n2 2\n255\n')
    assert list(data[-4:]) == [0, 128, 255, 255]


@pytest.mark.unit
def test_write_pgm_keeps_bytes_and_rejects_vectors(tmp_path):
    path = tmp_path / 'mask.pgm'
    write_pgm(path, np.array([[0, 255, 0]], dtype=np.uint8))
    assert path.read_bytes().endswith(bytes([0, 255, 0]))
    with pytest.raises(ValueError):
        write_pgm(path, np.zeros(3))


@pytest.mark.unit
def test_human_readable_formats():
    assert format_bytes(512) == '512.0 B'
    assert format_bytes(1536) == '1.5 KB'
    assert format_duration(0.0123) == '0.012s'
    assert format_duration(90) == '1m 30.0s'
    assert format_duration(7260) == '2h 1m'


# Logging and metrics

@pytest.mark.unit
def test_json_formatter_includes_extra_fields():
    record = logging.LogRecord('apps.harness.training', logging.INFO, __file__, 1, 'Training checkpoint', (), None)
    record.step = np.int64(200)
    record.train_mse = np.float64(0.5)
    record.shape = (2, 3)
    payload = json.loads(JSONFormatter().format(record))
    assert payload['level'] == 'INFO'
    assert payload['logger'] == 'apps.harness.training'
    assert payload['message'] == 'Training checkpoint'
    assert payload['step'] == 200
    assert payload['train_mse'] == 0.5
    assert payload['shape'] == [2, 3]


@pytest.mark.unit
def test_json_formatter_serializes_exceptions():
    try:
        raise SVT1FormatError('broken')
    except SVT1FormatError:
        record = logging.LogRecord('apps', logging.ERROR, __file__, 1, 'failed', (), sys.exc_info())
    payload = json.loads(JSONFormatter().format(record))
    assert payload['exception']['type'] == 'SVT1FormatError'
    assert payload['exception']['message'] == 'broken'


@pytest.mark.unit
def test_export_metrics_disabled_without_path(settings):
    settings.METRICS_EXPORT_PATH = ''
    assert export_metrics() is None


@pytest.mark.unit
def test_export_metrics_writes_text_format(tmp_path, settings):
    settings.METRICS_EXPORT_PATH = str(tmp_path / 'metrics' / 'svla.prom')
    training_steps_total.inc()
    written = export_metrics()
    text = (tmp_path / 'metrics' / 'svla.prom').read_text()
    assert written == settings.METRICS_EXPORT_PATH
    assert 'training_steps_total' in text
