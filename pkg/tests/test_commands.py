"""Tests for the sub-commands: wigner sweeps, fibrewise norm fields and
the loop-pair torus."""

import numpy as np
import pytest

from commands import (
    FIELD_COLUMNS,
    PAIR_FIELD_COLUMNS,
    TORUS_COLUMNS,
    WIGNER_COLUMNS,
    WIGNER_M2_COLUMNS,
    cmd_field,
    cmd_torus,
    cmd_wigner,
    ordered_map,
)
from config import Config, ParametersConfig, ProcessingConfig
from su2rep import RepLevel, wigner_d_exact


def _config(workers: int = 2, **parameters) -> Config:
    return Config(parameters=ParametersConfig(**parameters),
                  processing=ProcessingConfig(workers=workers))


def test_ordered_map_keeps_input_order():
    items = list(range(20))
    assert ordered_map(lambda x: x * x, items, workers=4) == [x * x for x in items]
    assert ordered_map(lambda x: -x, items, workers=1) == [-x for x in items]


# --------------------------------------------------------------------
# wigner
# --------------------------------------------------------------------

def test_wigner_beta_sweep():
    table = cmd_wigner(_config(j=5, m1=1, m2=3, beta_range="0.5:0.7:0.1"))
    assert table.columns == WIGNER_COLUMNS
    assert len(table.rows) == 3
    assert table.failures == 0
    for beta, d_exact, d_asym, abs_err, allowed, area, nu, volume in table.rows:
        assert d_exact == pytest.approx(wigner_d_exact(RepLevel(10), 3, 1, beta))
        assert abs_err == pytest.approx(abs(d_asym - d_exact))
        assert allowed == "allowed"
        assert area > 0 and 0 < nu < np.pi and volume != 0
    assert table.meta == {"j": 5.0, "m1": 1, "vary": "beta", "m2": 3}


def test_wigner_at_identity():
    table = cmd_wigner(_config(j=5, m1=1, m2=3, beta_range="0:0:0.1"))
    (row,) = table.rows
    assert row[0] == 0.0
    assert row[1] == pytest.approx(0.0, abs=1e-15)
    assert np.isnan(row[2])
    assert row[4] == "forbidden"

    same = cmd_wigner(_config(j=5, m1=1, m2=1, beta_range="0:0:0.1"))
    assert same.rows[0][1] == pytest.approx(1.0)
    assert same.rows[0][4] == "forbidden"


def test_wigner_m2_sweep_covers_all_magnetic_numbers():
    table = cmd_wigner(_config(j=5, m1=1, m2=3, beta=1.0, vary="m2"))
    assert table.columns == WIGNER_M2_COLUMNS
    assert [row[0] for row in table.rows] == [float(m) for m in range(-5, 6)]
    # a column of an orthogonal matrix has unit norm
    assert sum(row[1] ** 2 for row in table.rows) == pytest.approx(1.0)
    assert table.meta["beta"] == 1.0
    assert "m2" not in table.meta
    pole_rows = [row for row in table.rows if abs(row[0]) == 5]
    assert all(row[4] == "forbidden" for row in pole_rows)


def test_wigner_is_independent_of_worker_count():
    one = cmd_wigner(_config(workers=1, j=5, m1=1, m2=3, beta_range="0.3:1.3:0.25"))
    many = cmd_wigner(_config(workers=4, j=5, m1=1, m2=3, beta_range="0.3:1.3:0.25"))
    assert np.array_equal(np.array([r[:4] for r in one.rows], dtype=float),
                          np.array([r[:4] for r in many.rows], dtype=float), equal_nan=True)


# --------------------------------------------------------------------
# field
# --------------------------------------------------------------------

def test_field_coherent_state_peaks_at_north_pole():
    table = cmd_field(_config(k=20, m1=0, m2=0, state="coherent", grid="17x8"))
    assert table.columns == FIELD_COLUMNS
    assert len(table.rows) == 17 * 8
    theta, _, norm = max(table.rows, key=lambda r: r[2])
    assert theta == 0.0
    assert norm == pytest.approx(21 / (2 * np.pi))


def test_field_loop_state_is_invariant_in_phi():
    table = cmd_field(_config(k=10, m1=2, m2=2, grid="16x4"))
    assert table.meta == {"k": 10, "m": 2, "state": "loop"}
    norms = np.array([r[2] for r in table.rows]).reshape(16, 4)
    assert np.allclose(norms, norms[:, :1], rtol=1e-10, atol=1e-14)


# --------------------------------------------------------------------
# torus
# --------------------------------------------------------------------

def _saddles(table):
    return sorted((d["s"], d["t"]) for d in table.meta["saddles"])


def test_torus_rows_and_saddles():
    table = cmd_torus(_config(k=50, m1=11, m2=22, beta=1.4, grid="32x32"))
    assert table.columns == TORUS_COLUMNS
    assert len(table.rows) == 1024
    assert table.failures == 0
    saddles = _saddles(table)
    assert len(saddles) == 2
    assert saddles[0] == pytest.approx((-2.24, -0.43), abs=0.02)
    assert saddles[1] == pytest.approx((2.24, 0.43), abs=0.02)
    magnitudes = np.array([r[2] for r in table.rows])
    assert np.max(magnitudes) <= 51 / (2 * np.pi) + 1e-9


def test_torus_saddles_do_not_depend_on_k():
    low = _saddles(cmd_torus(_config(k=50, m1=11, m2=22, beta=1.4, grid="8x8")))
    high = _saddles(cmd_torus(_config(k=100, m1=22, m2=44, beta=1.4, grid="8x8")))
    for a, b in zip(low, high):
        assert a == pytest.approx(b, abs=1e-3)


def test_torus_coincident_loops():
    k = 20
    table = cmd_torus(_config(k=k, m1=4, m2=4, beta=0.0, grid="8x8"))
    diagonal = [r for r in table.rows if r[0] == r[1]]
    assert len(diagonal) == 8
    for row in diagonal:
        assert row[2] == pytest.approx((k + 1) / (2 * np.pi))
    # the critical set is the whole diagonal: no isolated saddles
    assert table.meta["saddles"] == []
    assert table.failures == 1


def test_torus_rows_run_along_sigma_first():
    table = cmd_torus(_config(k=50, m1=11, m2=22, beta=1.4, grid="8x4"))
    s_values = [r[0] for r in table.rows]
    t_values = [r[1] for r in table.rows]
    # s is the outer axis: each s value repeats for the 4 t samples
    assert s_values == sorted(s_values)
    assert len(set(s_values)) == 8
    assert len(set(t_values)) == 4
    assert table.meta["saddles"] == sorted(table.meta["saddles"], key=lambda d: (d["s"], d["t"]))


# --------------------------------------------------------------------
# field --state pair
# --------------------------------------------------------------------

def test_field_pair_peaks_on_both_loops():
    params = dict(k=50, m1=11, m2=22, beta=1.4)
    table = cmd_field(_config(state="pair", grid="91x180", **params))
    assert table.columns == PAIR_FIELD_COLUMNS
    assert len(table.rows) == 91 * 180
    assert table.meta == {"k": 50, "m1": 11, "m2": 22, "beta": 1.4, "state": "pair"}
    theta, phi, magnitude, phase = max(table.rows, key=lambda r: r[2])
    assert magnitude > 0
    assert -np.pi <= phase <= np.pi
    # the peak sits on both loops: height 22/50 and 44/50 about the tilted axis
    x = np.array([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)])
    tilted_axis = np.array([np.sin(1.4), 0.0, np.cos(1.4)])
    assert x[2] == pytest.approx(0.44, abs=0.05)
    assert x @ tilted_axis == pytest.approx(0.88, abs=0.05)
