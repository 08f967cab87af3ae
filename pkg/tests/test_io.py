import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from stlspg.io import (
    MAGIC,
    convergence_to_csv,
    load_trajectory,
    read_container,
    save_trajectory,
    spectrum_to_csv,
    trajectory_to_csv,
    write_container,
)
from stlspg.time_integration import Trajectory


@given(a=hnp.arrays(np.float64, hnp.array_shapes(min_dims=2, max_dims=2, max_side=6),
                    elements=st.floats(allow_nan=False, width=64)),
       mu=st.lists(st.floats(allow_nan=False), max_size=3))
def test_container_roundtrip(tmp_path_factory, a, mu):
    p = tmp_path_factory.mktemp("c") / "x.bin"
    write_container(p, a, mu)
    b, m = read_container(p)
    np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(np.asarray(mu, dtype=float), m)


def test_container_layout(tmp_path):
    p = tmp_path / "x.bin"
    write_container(p, np.array([[1.0, 2.0], [3.0, 4.0]]), [0.5])
    raw = p.read_bytes()
    assert raw[:8] == MAGIC
    assert np.frombuffer(raw[8:32], "<i8").tolist() == [2, 2, 1]
    assert np.frombuffer(raw[32:], "<f8").tolist() == [0.5, 1.0, 3.0, 2.0, 4.0]


def test_corrupt_files(tmp_path):
    p = tmp_path / "x.bin"
    p.write_bytes(b"garbage!" + bytes(24))
    with pytest.raises(ValueError):
        read_container(p)
    write_container(p, np.ones((3, 2)))
    p.write_bytes(p.read_bytes()[:-8])
    with pytest.raises(ValueError):
        read_container(p)
    p.write_bytes(MAGIC + b"\x01")
    with pytest.raises(ValueError):
        read_container(p)
    with pytest.raises(ValueError):
        write_container(p, np.ones((2, 2, 2)))


def test_trajectory_files(tmp_path):
    tr = Trajectory(np.arange(6.0).reshape(2, 3), [1.3, 0.02], np.array([0.0, 0.1, 0.2]))
    save_trajectory(tmp_path / "t.bin", tr)
    back = load_trajectory(tmp_path / "t.bin", tr.times)
    np.testing.assert_array_equal(back.states, tr.states)
    np.testing.assert_array_equal(back.mu, tr.mu)
    trajectory_to_csv(tmp_path / "t.csv", tr)
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "t,w0,w1" and lines[2] == "0.1,1.0,4.0"


def test_convergence_and_spectrum(tmp_path):
    convergence_to_csv(tmp_path / "c.csv", [dict(iteration=0, objective=1.0, grad_norm=2.0, step=0.0)])
    assert (tmp_path / "c.csv").read_text().splitlines()[1].startswith("0,1.0000000000000000e+00,")
    spectrum_to_csv(tmp_path / "s.csv", [3.0, 4.0])
    rows = (tmp_path / "s.csv").read_text().splitlines()
    assert rows[2].endswith("1.0000000000000000e+00")
    assert float(rows[1].split(",")[2]) == pytest.approx(9 / 25)
