import numpy as np
import pytest

from ttdc import io
from ttdc.io import ModelFormatError

from conftest import random_tt, unit_grids


def test_round_trip_bit_exact(tmp_path):
    tt = random_tt((3, 4, 5), 2, seed=1)
    grids = unit_grids((3, 4, 5), 1, 1, 1)
    path = tmp_path / "m.ttcm"
    io.save(path, tt, grids, {"kind": "test", "x": [1, 2]})
    tt2, grids2, meta = io.load(path)
    assert grids2 == grids and meta == {"kind": "test", "x": [1, 2]}
    for a, b in zip(tt.cores, tt2.cores):
        assert a.tobytes() == b.tobytes()
    assert io.dumps(tt2, grids2, meta) == path.read_bytes()


def test_header_layout():
    data = io.dumps(random_tt((2, 3), 1, 0), unit_grids((2, 3)))
    assert data[:4] == b"TTCM"
    assert int.from_bytes(data[4:8], "little") == io.VERSION


@pytest.mark.parametrize("mutate", [lambda d: b"XXXX" + d[4:], lambda d: d[:-3], lambda d: d + b"\0"])
def test_corrupt_files_rejected(mutate):
    data = io.dumps(random_tt((2, 3), 1, 0), unit_grids((2, 3)))
    with pytest.raises(ModelFormatError):
        io.loads(mutate(data))


def test_shape_mismatch():
    with pytest.raises(ValueError):
        io.dumps(random_tt((2, 3), 1, 0), unit_grids((2, 4)))
