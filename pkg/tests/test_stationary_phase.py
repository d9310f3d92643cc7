"""Tests for the complex stationary-phase engine and the quadrature oracle."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from asymptotics import warmup_hessian, warmup_integrand, warmup_inner_product_asym
from stationary_phase import (
    CriticalPoint,
    DegenerateCriticalPointError,
    QuadratureError,
    TorusIntegrand,
    csp_leading_term,
    find_stationary_points,
    leading_term,
    phase_gradient,
    phase_hessian,
    principal_arg,
    quadrature_oracle,
    real_phase_leading_term,
    torus_field,
)


def _ones(s, t):
    return np.ones(np.broadcast(np.asarray(s), np.asarray(t)).shape, dtype=complex)


@pytest.fixture
def gaussian():
    return TorusIntegrand(
        lambda s, t: 1j * (np.asarray(s) ** 2 + np.asarray(t) ** 2),
        _ones,
        (2 * np.pi, 2 * np.pi),
        origin=(-np.pi, -np.pi),
        name="gaussian",
    )


# --------------------------------------------------------------------
# Integrands and derivatives
# --------------------------------------------------------------------

def test_principal_arg_maps_negative_axis_to_pi():
    assert float(principal_arg(-1.0)) == pytest.approx(np.pi)
    assert float(principal_arg(complex(-1.0, -0.0))) == pytest.approx(np.pi)
    assert float(principal_arg(1j)) == pytest.approx(np.pi / 2)


def test_integrand_rejects_growing_phase():
    with pytest.raises(ValueError, match="Im S"):
        TorusIntegrand(lambda s, t: -1j * _ones(s, t), _ones, (1.0, 1.0))


def test_integrand_rejects_bad_periods():
    with pytest.raises(ValueError, match="periods"):
        TorusIntegrand(lambda s, t: 0 * _ones(s, t), _ones, (0.0, 1.0))


def test_finite_difference_derivatives(gaussian):
    assert_allclose(phase_gradient(gaussian, 0.3, -0.2), [0.6j, -0.4j], atol=1e-8)
    assert_allclose(phase_hessian(gaussian, 0.3, -0.2), [[2j, 0], [0, 2j]], atol=1e-6)


def test_warmup_hessian_matches_finite_differences():
    beta = 1.0
    numeric = phase_hessian(warmup_integrand(50, beta), np.pi / 2, np.pi / 2)
    assert np.max(np.abs(numeric - warmup_hessian(beta))) < 1e-8


def test_conjugate_integrand(gaussian):
    conj = gaussian.conjugate()
    s, t = np.array([0.1, 0.5]), np.array([-0.3, 0.2])
    assert_allclose(conj.values(s, t, 7), np.conj(gaussian.values(s, t, 7)), atol=1e-14)


# --------------------------------------------------------------------
# Critical points and the leading term
# --------------------------------------------------------------------

def test_gaussian_has_one_critical_point(gaussian):
    points = find_stationary_points(gaussian, grid=64)
    assert len(points) == 1
    assert_allclose(points[0].location, (0.0, 0.0), atol=1e-8)
    assert_allclose(points[0].eigenvalues, [2j, 2j], atol=1e-6)
    assert_allclose(points[0].principal_args, [np.pi / 2, np.pi / 2], atol=1e-6)


@pytest.mark.parametrize("k", [50, 100, 200])
def test_gaussian_leading_term(gaussian, k):
    value, _ = leading_term(gaussian, k, grid=64)
    exact = np.pi / k
    assert k * abs(value - exact) / exact < 2.0


def test_warmup_saddles():
    points = find_stationary_points(warmup_integrand(50, 1.0))
    assert len(points) == 2
    assert_allclose(points[0].location, (np.pi / 2, np.pi / 2), atol=1e-8)
    assert_allclose(points[1].location, (3 * np.pi / 2, 3 * np.pi / 2), atol=1e-8)
    for point in points:
        assert abs(point.phase_value.imag) < 1e-8


def test_warmup_leading_term_against_oracle():
    k, beta = 200, 1.0
    integrand = warmup_integrand(k, beta)
    value, _ = leading_term(integrand, k)
    oracle = quadrature_oracle(integrand, k)
    envelope = 2 * np.sqrt(2 / np.sin(beta))
    assert abs(value - oracle) / envelope < 0.05
    assert abs(value.real - warmup_inner_product_asym(k, beta)) / envelope < 0.05


@pytest.mark.slow
def test_warmup_leading_term_error_shrinks_like_sqrt_k():
    beta = 1.0
    envelope = 2 * np.sqrt(2 / np.sin(beta))
    scaled = {}
    for k in (50, 100, 200, 400):
        integrand = warmup_integrand(k, beta)
        value, _ = leading_term(integrand, k)
        scaled[k] = abs(value - quadrature_oracle(integrand, k, workers=4)) * np.sqrt(k)
    assert max(scaled.values()) < 2.0 * envelope
    assert scaled[400] < max(scaled[50], scaled[100])


def _point_with_hessian(hessian):
    eigenvalues = np.diag(hessian)
    return CriticalPoint((0.0, 0.0), 0j, 1.0 + 0j, hessian, eigenvalues, principal_arg(eigenvalues))


@pytest.mark.parametrize("imag", [0.0, -0.0, 1e-12])
def test_leading_term_on_the_branch_cut(imag):
    # S = -(s^2 + t^2): both eigenvalues on the negative real axis
    k = 30
    eigenvalue = complex(-2.0, imag)
    point = _point_with_hessian(np.diag([eigenvalue, eigenvalue]))
    assert_allclose(point.principal_args, [np.pi, np.pi], atol=1e-11)
    assert csp_leading_term(k, [point]) == pytest.approx(-1j * np.pi / k, abs=1e-12)


def test_leading_term_with_mixed_eigenvalue_arguments():
    k = 30
    point = _point_with_hessian(np.diag([2j, complex(-2.0, -0.0)]))
    assert_allclose(point.principal_args, [np.pi / 2, np.pi], atol=1e-12)
    assert csp_leading_term(k, [point]) == pytest.approx(np.pi / k * np.exp(-0.25j * np.pi), abs=1e-12)


def test_leading_term_agrees_with_real_signature_rule():
    point = _point_with_hessian(np.diag([complex(-2.0, -0.0), 2.0 + 0j]))
    assert csp_leading_term(20, [point]) == pytest.approx(real_phase_leading_term(20, [point]), abs=1e-12)


def test_custom_amplitudes_override_recorded_values(gaussian):
    points = find_stationary_points(gaussian, grid=64)
    assert csp_leading_term(10, points, [2.0]) == pytest.approx(2 * csp_leading_term(10, points))
    with pytest.raises(ValueError, match="amplitude values"):
        csp_leading_term(10, points, [1.0, 2.0])


def test_degenerate_hessian_is_reported():
    quartic = TorusIntegrand(
        lambda s, t: 1j * (np.asarray(s) ** 4 + np.asarray(t) ** 2),
        _ones,
        (2 * np.pi, 2 * np.pi),
        origin=(-np.pi, -np.pi),
        gradient=lambda s, t: 1j * np.array([4 * s ** 3, 2 * t]),
        hessian=lambda s, t: 1j * np.array([[12 * s ** 2, 0.0], [0.0, 2.0]]),
    )
    with pytest.raises(DegenerateCriticalPointError):
        find_stationary_points(quartic, grid=64)


def test_real_phase_leading_term():
    saddle = TorusIntegrand(
        lambda s, t: (np.asarray(s) ** 2 - np.asarray(t) ** 2) + 0j,
        _ones,
        (2 * np.pi, 2 * np.pi),
        origin=(-np.pi, -np.pi),
        gradient=lambda s, t: np.array([2 * s, -2 * t], dtype=complex),
        hessian=lambda s, t: np.array([[2.0, 0.0], [0.0, -2.0]], dtype=complex),
    )
    points = find_stationary_points(saddle, grid=64)
    assert any(np.allclose(p.location, (0.0, 0.0), atol=1e-10) for p in points)
    origin = [p for p in points if np.allclose(p.location, (0.0, 0.0), atol=1e-10)]
    k = 40
    assert real_phase_leading_term(k, origin) == pytest.approx(np.pi / k)


def test_real_phase_leading_term_rejects_complex_phase(gaussian):
    points = find_stationary_points(gaussian, grid=64)
    with pytest.raises(ValueError, match="not real"):
        real_phase_leading_term(10, points)


# --------------------------------------------------------------------
# Quadrature oracle and field samples
# --------------------------------------------------------------------

def test_oracle_of_constant_is_torus_area():
    flat = TorusIntegrand(lambda s, t: 0 * _ones(s, t), _ones, (2.0, 3.0))
    assert quadrature_oracle(flat, 1) == pytest.approx(6.0)


def test_oracle_is_independent_of_worker_count():
    integrand = warmup_integrand(20, 0.9)
    assert quadrature_oracle(integrand, 20, workers=1) == quadrature_oracle(integrand, 20, workers=3)


def test_oracle_reports_non_convergence():
    with pytest.raises(QuadratureError):
        quadrature_oracle(warmup_integrand(200, 1.0), 200, nodes=16, max_nodes=32)


def test_torus_field_shape_and_ranges():
    field = torus_field(warmup_integrand(20, 0.9), 20, (16, 8))
    assert field.magnitude.shape == (16, 8)
    assert np.all(field.phase > -np.pi) and np.all(field.phase <= np.pi)
    assert np.max(field.magnitude) <= 21 / (4 * np.pi) + 1e-12
    assert len(list(field.rows())) == 128
