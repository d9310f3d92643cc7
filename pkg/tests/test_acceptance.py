"""End-to-end numerical acceptance: loop states against closed forms, the
holonomy-area law, the d-matrix asymptotics and the torus saddles.

Most of these run for seconds to minutes and are marked slow.
"""

import numpy as np
import pytest

from asymptotics import (
    allowed_window,
    bpu_inner_product_asym,
    common_angle,
    loop_pair_integrand,
    standard_pair,
    wigner_d_asym_ly,
)
from config import Config, ProcessingConfig, VerifyConfig
from hopf import find_intersections
from stationary_phase import quadrature_oracle
from su2rep import RepLevel, wigner_d_exact
from verification import CHECKS, run_checks

pytestmark = pytest.mark.slow


def _run(*names, trials: int = 100):
    config = Config(processing=ProcessingConfig(workers=4),
                    verify=VerifyConfig(trials=trials), command="verify")
    checks = [c for c in CHECKS if c.name in names]
    assert len(checks) == len(names)
    outcomes = run_checks(config, checks)
    return {o.name: o for o in outcomes}


def _assert_all_pass(outcomes):
    failed = {name: o.to_dict() for name, o in outcomes.items() if not o.passed}
    assert not failed


# --------------------------------------------------------------------
# Invariant suites
# --------------------------------------------------------------------

def test_loop_states_match_closed_form():
    _assert_all_pass(_run("loop_state_closed_form", "rotated_loop_state", "exchange_of_integrals"))


def test_coherent_state_invariants():
    _assert_all_pass(_run("reproducing_property", "basepoint_norm", "coherent_equivariance",
                          "eigenstate_property", "act_unitarity", "act_homomorphism",
                          "evaluation_equivariance"))


def test_holonomy_area_law():
    _assert_all_pass(_run("holonomy_area_circles", "holonomy_area_star_loops",
                          "bohr_sommerfeld_heights"))


def test_warmup_asymptotics():
    _assert_all_pass(_run("warmup_error_k200", "warmup_error_decreases", "wigner_d00_legendre"))


def test_route_agreement():
    outcomes = _run("route_agreement", "phase_convention", "symmetric_cosine_vs_bpu")
    _assert_all_pass(outcomes)


def test_stationary_phase_engine():
    _assert_all_pass(_run("gaussian_leading_term", "warmup_hessian", "exact_inner_vs_oracle"))


def test_torus_saddles():
    _assert_all_pass(_run("saddle_locations", "bpu_vs_oracle"))


# --------------------------------------------------------------------
# Loop pairs against the quadrature oracle
# --------------------------------------------------------------------

# (height of gamma, height of sigma before rotation, beta)
LOOP_PAIRS = [
    (11 / 25, 22 / 25, 1.2),
    (0.0, 10 / 25, 1.0),
    (-5 / 25, 8 / 25, 1.5),
    (3 / 25, -12 / 25, 1.8),
    (15 / 25, 15 / 25, 0.8),
]


def _bpu_error(k, z_gamma, z_sigma, beta):
    m_gamma, m_sigma = round(k * z_gamma / 2), round(k * z_sigma / 2)
    gamma, sigma = standard_pair(k, m_gamma, m_sigma, beta)
    found = find_intersections(gamma.base, sigma.base, gamma, sigma)
    asym = bpu_inner_product_asym(k, found).value
    oracle = quadrature_oracle(loop_pair_integrand(gamma, sigma, k), k, workers=4)
    return abs(asym - oracle) / np.sqrt(8 / np.sin(common_angle(found)))


@pytest.mark.parametrize("z_gamma, z_sigma, beta", LOOP_PAIRS)
def test_bpu_formula_converges(z_gamma, z_sigma, beta):
    errors = {k: _bpu_error(k, z_gamma, z_sigma, beta) for k in (50, 100, 200)}
    assert errors[200] < errors[50]
    assert errors[200] < 0.1


# --------------------------------------------------------------------
# d-matrix sweep for j=25, m1=11, m2=22
# --------------------------------------------------------------------

J, M1, M2 = 25, 11, 22


def _sweep(betas):
    level = RepLevel(2 * J)
    rows = []
    for beta in betas:
        result = wigner_d_asym_ly(J, M1, M2, beta)
        if result.value is None:
            continue
        exact = wigner_d_exact(level, M2, M1, beta)
        amplitude = np.sqrt(2 / (J * np.pi * abs(result.ingredients.volume)))
        rows.append((beta, exact, result.value, amplitude))
    return np.array(rows)


def test_wigner_asymptotics_inside_window():
    lo, hi = allowed_window(J, M1, M2)
    width = hi - lo
    rows = _sweep(np.arange(lo + 0.2 * width, hi - 0.2 * width, 0.01))
    assert len(rows) > 50
    beta, exact, asym, amplitude = rows.T
    error = np.abs(asym - exact)
    assert np.all(error < 0.25 * amplitude)
    assert np.sqrt(np.mean(error ** 2)) < 0.08 * np.sqrt(np.mean(exact ** 2))


def test_wigner_asymptotics_break_down_at_window_edge():
    lo, hi = allowed_window(J, M1, M2)
    width = hi - lo
    middle = _sweep(np.arange(lo + 0.2 * width, hi - 0.2 * width, 0.01))
    edge = _sweep(lo + np.linspace(1e-4, 1e-2, 25))
    assert len(edge) >= 10
    middle_error = np.max(np.abs(middle[:, 2] - middle[:, 1]))
    edge_error = np.max(np.abs(edge[:, 2] - edge[:, 1]))
    assert edge_error > middle_error
