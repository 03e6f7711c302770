import math

import numpy as np
import pytest

from resilient_gp.errors import ConfigError
from resilient_gp.harness.data import (generate_toy_stream, load_csv, read_csv_matrix,
                                       toy_constants, toy_eta)


def test_toy_eta_values():
    assert toy_eta(0.0) == pytest.approx(0.5 * math.sin(0.5) + 4, rel=1e-15)
    want = (0.125 - 0.5) * math.sin(1.0) + 1.25 * math.sin(6.0) + 4 * math.cos(1.0)
    assert toy_eta(0.5) == pytest.approx(want, rel=1e-15)
    assert toy_eta(0.5) == pytest.approx(1.4963882314209403386, rel=1e-14)


def test_toy_constants_bound_finite_differences():
    lip, sup = toy_constants()
    z = np.linspace(0.0, 1.0, 100_001)
    v = toy_eta(z)
    assert np.max(np.abs(np.diff(v) / np.diff(z))) <= lip
    assert np.max(np.abs(v)) <= sup
    assert lip == pytest.approx(46.4076, rel=1e-5) and sup == pytest.approx(5.21582, rel=1e-5)


def test_stream_partition():
    streams = generate_toy_stream(40, 40, 0.01, 0)
    assert [len(s) for s in streams] == [1] * 40
    with pytest.raises(ValueError):
        generate_toy_stream(41, 40, 0.01, 0)


def test_stream_deterministic_and_conserving():
    a = generate_toy_stream(1000, 8, 0.01, 5)
    b = generate_toy_stream(1000, 8, 0.01, 5)
    for s, t in zip(a, b):
        assert np.array_equal(s.z, t.z) and np.array_equal(s.y, t.y)
    z = np.sort(np.concatenate([s.z[:, 0] for s in a]))
    assert len(z) == 1000 and len(np.unique(z)) == 1000
    pts = list(a[3].points())
    assert [p.t for p in pts] == list(range(1, 126))


def test_noise_variance():
    streams = generate_toy_stream(100_000, 40, 0.01, 1)
    resid = np.concatenate([s.y - toy_eta(s.z[:, 0]) for s in streams])
    se = 0.01 * math.sqrt(2 / (len(resid) - 1))
    assert abs(np.var(resid, ddof=1) - 0.01) <= 3 * se


def write(tmp_path, text, name="d.csv", raw=False):
    p = tmp_path / name
    if raw:
        p.write_bytes(text)
    else:
        p.write_text(text, encoding="utf-8", newline="")
    return p


def test_load_small_csv(tmp_path):
    p = write(tmp_path, "z1,z2,y\n1,2,3\n4,5,6\n7,8,9\n1,1,1\n")
    ds = load_csv(p, 2, "y", seed=0)
    assert [len(s) for s in ds.streams] == [2, 2]
    assert ds.n_z == 2 and ds.streams[0].z.shape == (2, 2)


def test_load_csv_crlf_bom_and_standardise(tmp_path):
    p = write(tmp_path, "﻿a,y\r\n0,1\r\n1,3\r\n2,5\r\n3,7\r\n".encode("utf-8"), raw=True)
    ds = load_csv(p, 2, "y", seed=3, n_test=0)
    y = np.concatenate([s.y for s in ds.streams])
    assert np.mean(y) == pytest.approx(0.0, abs=1e-15) and np.std(y) == pytest.approx(1.0)
    assert ds.target_mean == 4.0


def test_wide_csv_round_trips(tmp_path):
    rng = np.random.default_rng(0)
    data = rng.normal(size=(403, 22))
    head = ",".join([f"x{i}" for i in range(21)] + ["torque"])
    body = "\n".join(",".join(repr(float(v)) for v in row) for row in data)
    p = write(tmp_path, head + "\n" + body + "\n")
    X, y, names = read_csv_matrix(p, "torque")
    assert X.shape == (403, 21) and len(names) == 21
    ds = load_csv(p, 40, "torque", seed=0, n_test=3)
    assert sum(len(s) for s in ds.streams) + ds.dropped_rows + 3 == 403
    assert ds.n_z == 21


@pytest.mark.parametrize("text,needle", [
    ("a,y\n1,2\n3\n", ":3: expected 2 fields"),
    ("a,y\n1,2\n3,x\n", ":3: column 'y'"),
    ("a,b\n1,2\n", "target column"),
    ("", "empty file"),
    ("a,y\n", "no data rows"),
])
def test_csv_errors(tmp_path, text, needle):
    p = write(tmp_path, text)
    with pytest.raises(ConfigError, match=needle):
        load_csv(p, 1, "y", seed=0)


def test_csv_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_csv(tmp_path / "nope.csv", 2, "y", 0)
