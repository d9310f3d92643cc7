"""Tests for the Hopf fibration layer: points, loops, lifts, holonomy and
intersections."""

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import integrate

from hopf import (
    ARCLENGTH_SCALE,
    GeometryError,
    HopfPoint,
    LoopKind,
    NonTransverseError,
    SpherePoint,
    circle_loop,
    connection_coefficient,
    constant_height_loop,
    discrete_holonomy,
    enclosed_area,
    find_intersections,
    holonomy,
    hopf_projection,
    is_bohr_sommerfeld,
    lune_area,
    lune_chart,
    lune_transport_defect,
    parallel_lift,
    parallelepiped_volume,
    rotate_lift,
    rotate_loop,
    section_u,
    side_of_loop,
    standard_lift,
    star_loop,
    transport_defect,
)
from su2rep import SU2Element


def _rotated(loop, beta):
    return rotate_loop(loop, SU2Element.rotation_y(beta))


# --------------------------------------------------------------------
# Points and sections
# --------------------------------------------------------------------

def test_section_u_values():
    p = section_u(0.0, 1.3)
    assert p.q1 == pytest.approx(0.0)
    assert p.q2 == pytest.approx(1.0)
    q = section_u(np.pi / 2, 0.5)
    assert q.q1 == pytest.approx(np.sqrt(0.5) * np.exp(0.5j))
    assert q.q2 == pytest.approx(np.sqrt(0.5))


def test_section_u_undefined_at_south_pole():
    with pytest.raises(GeometryError, match="south pole"):
        section_u(np.pi, 0.0)


def test_section_u_projects_back():
    x = hopf_projection(section_u(1.1, 2.4))
    assert x.theta == pytest.approx(1.1)
    assert x.phi == pytest.approx(2.4)


def test_projection_ignores_fibre_phase():
    p = section_u(0.7, -0.3)
    assert_allclose(p.rephased(1.9).project().vector, p.project().vector, atol=1e-14)


def test_connection_coefficient():
    assert connection_coefficient(0.0) == pytest.approx(0.0)
    assert connection_coefficient(np.pi / 2) == pytest.approx(0.5)
    assert connection_coefficient(np.pi) == pytest.approx(1.0)


def test_point_validation():
    with pytest.raises(GeometryError, match="colatitude"):
        SpherePoint(-0.1, 0.0)
    with pytest.raises(GeometryError, match="unit-norm"):
        HopfPoint(1.0, 1.0)


# --------------------------------------------------------------------
# Loops and holonomy
# --------------------------------------------------------------------

def test_equator_period_and_holonomy():
    equator = circle_loop(np.pi / 2)
    assert equator.period == pytest.approx(2 * np.pi * ARCLENGTH_SCALE)
    assert equator.kind is LoopKind.CONSTANT_HEIGHT
    assert enclosed_area(equator) == pytest.approx(2 * np.pi)
    assert holonomy(equator) == pytest.approx(-1.0)


def test_pole_heights_are_point_loops():
    loop = constant_height_loop(4, 2)
    assert loop.is_degenerate
    assert loop.period == 0.0
    assert holonomy(loop) == 1.0
    assert_allclose(standard_lift(loop).spinors(0.0), [0.0, 1.0])
    south = constant_height_loop(4, -2)
    assert_allclose(standard_lift(south).spinors(0.0), [1.0, 0.0])


@pytest.mark.parametrize("k, m", [(50, 11), (50, -24), (7, 1.5), (7, -3.5), (1, 0.5)])
def test_constant_height_loops_are_bohr_sommerfeld(k, m):
    assert is_bohr_sommerfeld(constant_height_loop(k, m), k)


def test_generic_circle_is_not_bohr_sommerfeld():
    assert not is_bohr_sommerfeld(circle_loop(0.3), 5)


def test_constant_height_loop_rejects_bad_m():
    with pytest.raises(GeometryError, match="magnetic number"):
        constant_height_loop(50, 11.5)
    with pytest.raises(GeometryError):
        constant_height_loop(50, 26)


def test_rotated_circle_keeps_area():
    loop = _rotated(constant_height_loop(50, 11), 1.2)
    assert loop.kind is LoopKind.ROTATED_CONSTANT_HEIGHT
    assert enclosed_area(loop) == pytest.approx(2 * np.pi * (1 - 11 / 25))


def test_star_loop_area_matches_direct_integral():
    r0, coefficients = 0.9, [(0.15, -0.05), (0.0, 0.08)]
    loop = star_loop(r0, coefficients)

    def profile(phi):
        return r0 + 0.15 * np.cos(phi) - 0.05 * np.sin(phi) + 0.08 * np.sin(2 * phi)

    expected, _ = integrate.quad(lambda p: 1.0 - np.cos(profile(p)), 0.0, 2 * np.pi,
                                 epsabs=1e-13, epsrel=1e-13)
    assert enclosed_area(loop) == pytest.approx(expected, abs=1e-8)
    assert holonomy(loop) == pytest.approx(np.exp(-0.5j * expected), abs=1e-8)


def test_star_loop_rejects_profile_reaching_pole():
    with pytest.raises(GeometryError, match="between the poles"):
        star_loop(0.1, [(0.2, 0.0)])


def test_side_of_loop():
    equator = circle_loop(np.pi / 2)
    assert side_of_loop(equator, [0.0, 0.0, 1.0]) == 1
    assert side_of_loop(equator, [0.0, 0.0, -1.0]) == -1
    star = star_loop(0.8, [(0.1, 0.05)])
    assert side_of_loop(star, [0.0, 0.0, 1.0]) == 1
    assert side_of_loop(star, [0.0, 0.0, -1.0]) == -1


# --------------------------------------------------------------------
# Lifts
# --------------------------------------------------------------------

def test_standard_lift_is_horizontal():
    lifted = standard_lift(constant_height_loop(50, 11))
    assert transport_defect(lifted) < 1e-9


def test_mutated_lift_is_not_horizontal():
    lifted = standard_lift(constant_height_loop(50, 11), sign=1.0)
    assert transport_defect(lifted) > 1e-6


def test_standard_lift_needs_a_circle():
    with pytest.raises(GeometryError, match="circle loops only"):
        standard_lift(star_loop(0.8, [(0.1, 0.0)]))


@pytest.mark.parametrize("sign, holds", [(-1.0, True), (1.0, False)])
def test_u_z_transport_identity(sign, holds):
    k, m, shift = 50, 11, 0.7
    lifted = standard_lift(constant_height_loop(k, m), sign)
    speed = lifted.base.circle.angular_speed
    t = 0.3 * lifted.base.period
    left = SU2Element.rotation_z(shift).apply(lifted.spinors(t))
    right = np.exp(-0.5j * (2 * m / k) * shift) * lifted.spinors(t + shift / speed)
    defect = float(np.max(np.abs(left - right)))
    if holds:
        assert defect < 1e-12
    else:
        assert defect > 1e-3


def test_parallel_lift_of_star_loop_closes_with_holonomy():
    star = star_loop(1.0, [(0.2, 0.1), (0.05, 0.0)])
    x0 = star.point(0.0)
    lifted = parallel_lift(star, section_u(x0.theta, x0.phi))
    assert transport_defect(lifted) < 1e-8
    assert discrete_holonomy(lifted, nodes=4096) == pytest.approx(holonomy(star), abs=1e-4)
    assert discrete_holonomy(star, nodes=4096) == pytest.approx(holonomy(star), abs=1e-4)


def test_parallel_lift_rejects_wrong_start():
    with pytest.raises(GeometryError, match="does not project"):
        parallel_lift(circle_loop(1.0), section_u(0.2, 0.0))


def test_parallel_lift_of_circle_matches_standard_lift_up_to_phase():
    loop = constant_height_loop(20, 3)
    start = standard_lift(loop).point(0.0).rephased(0.4)
    lifted = parallel_lift(loop, start)
    t = np.linspace(0.0, loop.period, 9)
    assert_allclose(lifted.spinors(t), np.exp(0.4j) * standard_lift(loop).spinors(t), atol=1e-12)


# --------------------------------------------------------------------
# Intersections and lunes
# --------------------------------------------------------------------

def test_disjoint_circles_have_no_intersections():
    gamma = constant_height_loop(50, 22)
    sigma = _rotated(constant_height_loop(50, 11), 0.2)
    assert find_intersections(gamma, sigma) == []


def test_crossing_circles_meet_twice_with_opposite_orientations():
    gamma = constant_height_loop(50, 22)
    sigma = _rotated(constant_height_loop(50, 11), 1.4)
    found = find_intersections(gamma, sigma)
    assert len(found) == 2
    assert sorted(d.orientation for d in found) == [-1, 1]
    for d in found:
        assert_allclose(gamma.points(d.s), sigma.points(d.t), atol=1e-11)
        assert found[0].angle == pytest.approx(d.angle, abs=1e-10)


def test_coincident_loops_are_rejected():
    with pytest.raises(NonTransverseError, match="coincide"):
        find_intersections(circle_loop(1.0), circle_loop(1.0))


def test_tangent_circles_are_rejected():
    with pytest.raises(NonTransverseError):
        find_intersections(circle_loop(0.5), _rotated(circle_loop(0.5), 1.0))


def test_point_loops_are_excluded():
    with pytest.raises(GeometryError, match="point loops"):
        find_intersections(constant_height_loop(4, 2), circle_loop(1.0))


@pytest.mark.parametrize("beta", [0.3, 1.0, 2.2])
def test_equator_lune_area(beta):
    gamma = circle_loop(np.pi / 2)
    sigma = _rotated(circle_loop(np.pi / 2), beta)
    found = find_intersections(gamma, sigma)
    assert lune_area(gamma, sigma, found) == pytest.approx(2 * beta, abs=1e-9)


def test_swapping_loops_negates_orientation_and_conjugates_phase():
    gamma = standard_lift(constant_height_loop(50, 11))
    sigma = rotate_lift(standard_lift(constant_height_loop(50, 22)), SU2Element.rotation_y(1.4))
    forward = find_intersections(gamma.base, sigma.base, gamma, sigma)
    backward = find_intersections(sigma.base, gamma.base, sigma, gamma)
    assert len(forward) == len(backward) == 2
    for f in forward:
        (b,) = [d for d in backward if np.linalg.norm(d.x.vector - f.x.vector) < 1e-9]
        assert b.s == pytest.approx(f.t, abs=1e-9)
        assert b.t == pytest.approx(f.s, abs=1e-9)
        assert b.angle == pytest.approx(f.angle, abs=1e-12)
        assert b.orientation == -f.orientation
        assert b.relative_phase == pytest.approx(np.conj(f.relative_phase), abs=1e-12)


def test_lune_chart_avoids_the_nearer_pole():
    assert lune_chart(np.array([-0.5, 0.2, 0.999999])) == "north"
    assert lune_chart(np.array([-0.999999, 0.3])) == "south"
    assert lune_chart(np.array([-0.9, 0.9])) == "north"
    with pytest.raises(GeometryError, match="both poles"):
        lune_chart(np.array([-1.0, 0.0, 1.0]))


@pytest.mark.parametrize("beta", [np.pi / 2, np.pi / 2 - 1e-9, 2.9])
def test_lune_area_with_boundary_near_a_pole(beta):
    # the tilted equator reaches height sin(beta)
    gamma = circle_loop(np.pi / 2)
    sigma = _rotated(circle_loop(np.pi / 2), beta)
    found = find_intersections(gamma, sigma)
    assert lune_area(gamma, sigma, found) == pytest.approx(2 * beta, abs=1e-8)


def test_lune_transport_and_law_of_sines():
    beta = 1.4
    gamma = standard_lift(constant_height_loop(50, 22))
    sigma = rotate_lift(standard_lift(constant_height_loop(50, 11)), SU2Element.rotation_y(beta))
    found = find_intersections(gamma.base, sigma.base, gamma, sigma)
    area = lune_area(gamma.base, sigma.base, found)
    assert lune_transport_defect(gamma.base, sigma.base, found, area) < 1e-8
    sines = np.sin(gamma.base.circle.theta) * np.sin(sigma.base.circle.theta)
    for d in found:
        assert abs(d.relative_phase) == pytest.approx(1.0)
        assert abs(parallelepiped_volume(beta, d.x)) == pytest.approx(sines * np.sin(d.angle), abs=1e-10)


def test_lune_transport_needs_relative_phases():
    gamma = constant_height_loop(50, 22)
    sigma = _rotated(constant_height_loop(50, 11), 1.4)
    found = find_intersections(gamma, sigma)
    with pytest.raises(GeometryError, match="relative phases"):
        lune_transport_defect(gamma, sigma, found, lune_area(gamma, sigma, found))


def test_intersections_are_rotation_equivariant():
    g = SU2Element.random(np.random.default_rng(3))
    gamma = standard_lift(constant_height_loop(40, 9))
    sigma = rotate_lift(standard_lift(constant_height_loop(40, -4)), SU2Element.rotation_y(1.3))
    before = find_intersections(gamma.base, sigma.base, gamma, sigma)
    g_gamma, g_sigma = rotate_lift(gamma, g), rotate_lift(sigma, g)
    after = find_intersections(g_gamma.base, g_sigma.base, g_gamma, g_sigma)
    assert len(before) == len(after) == 2
    for b, a in zip(before, after):
        assert a.s == pytest.approx(b.s, abs=1e-9)
        assert a.t == pytest.approx(b.t, abs=1e-9)
        assert a.orientation == b.orientation
        assert a.relative_phase == pytest.approx(b.relative_phase, abs=1e-9)
        assert_allclose(a.x.vector, g.rotation_matrix() @ b.x.vector, atol=1e-9)


def test_parallelepiped_volume():
    assert parallelepiped_volume(np.pi / 2, [0.0, 1.0, 0.0]) == pytest.approx(1.0)
    assert parallelepiped_volume(0.8, [1.0, 0.0, 0.0]) == pytest.approx(0.0, abs=1e-15)
