import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from causaltune import cten
from causaltune.errors import CtenIOError


def test_byte_layout():
    buf = cten.dumps({"ab": np.array([[1.0, -2.0, 0.5]])})
    expect = (b"CTEN" + struct.pack("<HI", 1, 1) + struct.pack("<I", 2) + b"ab"
              + struct.pack("<B", 2) + struct.pack("<II", 1, 3) + struct.pack("<3d", 1.0, -2.0, 0.5))
    assert buf == expect


def test_roundtrip_bit_exact(tmp_path, rng):
    tensors = {
        "scalar": np.array(np.pi),
        "vec": rng.normal(size=7),
        "empty": np.zeros((0, 3)),
        "cube": rng.normal(size=(2, 3, 4)),
        "special": np.array([np.inf, -0.0, np.nan, 5e-324]),
        "ünï": np.ones((1, 1, 1, 1)),
    }
    path = tmp_path / "x.cten"
    cten.save(path, tensors)
    back = cten.load(path)
    assert list(back) == list(tensors)
    for k, v in tensors.items():
        assert back[k].shape == v.shape
        assert back[k].tobytes() == v.tobytes()


def test_integer_input_stored_as_float64():
    back = cten.loads(cten.dumps({"i": np.arange(4)}))
    assert back["i"].dtype == np.float64 and back["i"].tolist() == [0.0, 1.0, 2.0, 3.0]


@pytest.mark.parametrize("mutate, message", [
    (lambda b: b"XTEN" + b[4:], "magic"),
    (lambda b: b[:4] + struct.pack("<H", 9) + b[6:], "version"),
    (lambda b: b[:-3], "truncated"),
    (lambda b: b + b"\x00", "trailing"),
])
def test_corrupt_files(mutate, message):
    buf = cten.dumps({"a": np.ones(3)})
    with pytest.raises(CtenIOError, match=message):
        cten.loads(mutate(buf))


def test_duplicate_names_rejected():
    one = cten.dumps({"a": np.ones(1)})
    entry = one[10:]
    buf = b"CTEN" + struct.pack("<HI", 1, 2) + entry + entry
    with pytest.raises(CtenIOError, match="duplicate"):
        cten.loads(buf)


def test_missing_file(tmp_path):
    with pytest.raises(CtenIOError):
        cten.load(tmp_path / "nope.cten")
    with pytest.raises(OSError):
        cten.load(tmp_path / "nope.cten")


@settings(max_examples=50, deadline=None)
@given(st.dictionaries(
    st.text(min_size=1, max_size=12),
    hnp.arrays(np.float64, hnp.array_shapes(min_dims=0, max_dims=4, max_side=4)),
    max_size=5,
))
def test_roundtrip_property(tensors):
    back = cten.loads(cten.dumps(tensors))
    assert list(back) == list(tensors)
    assert all(back[k].tobytes() == v.tobytes() and back[k].shape == v.shape for k, v in tensors.items())
