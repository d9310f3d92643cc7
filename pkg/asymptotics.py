"""Closed-form asymptotics for loop-state inner products and Wigner d-matrices.

Conventions: gamma is the constant-height loop at m2 and sigma is the
constant-height loop at m1 rotated by R_y(beta), both with standard lifts,
so that

    <Psi_gamma, Psi_sigma> = c_{a2} c_{a1} d^j_{m2 m1}(beta).
"""

import enum
import logging
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from coherent import constant_height_coefficient, coherent_state_norm
from hopf import (
    ARCLENGTH_SCALE,
    GeometryError,
    IntersectionDatum,
    LiftedLoop,
    NonTransverseError,
    constant_height_loop,
    find_intersections,
    lune_area,
    lune_transport_defect,
    parallelepiped_volume,
    rotate_lift,
    standard_lift,
)
from stationary_phase import TorusIntegrand
from su2rep import RepLevel, SU2Element, magnetic_index, wigner_d_exact

logger = logging.getLogger(__name__)


class AsymptoticsError(ValueError):
    """Raised for inputs outside the domain of an asymptotic formula."""


ANGLE_TOL = 1e-8
EQUAL_ANGLE_TOL = 1e-10
ROUTE_TOL = 1e-10
BOUNDARY_VOLUME = 1e-6
BISECTION_TOL = 1e-6
PHASE_CONVENTION_TOL = 1e-6


class Validity(enum.Enum):
    ALLOWED = "allowed"
    BOUNDARY = "boundary"
    FORBIDDEN = "forbidden"


@dataclass(frozen=True)
class Ingredients:
    """Geometric data behind an asymptotic value, echoed from the geometry layer."""
    area: Optional[float] = None
    nu: Optional[float] = None
    volume: Optional[float] = None
    omegas: Tuple[complex, ...] = ()
    orientations: Tuple[int, ...] = ()
    transport_defect: Optional[float] = None
    phase_defect: Optional[float] = None


@dataclass(frozen=True)
class AsymptoticResult:
    value: Optional[complex]
    ingredients: Ingredients = field(default_factory=Ingredients)
    validity: Validity = Validity.ALLOWED
    route_value: Optional[float] = None
    note: str = ""

    @property
    def reliable(self) -> bool:
        return self.validity is Validity.ALLOWED and self.value is not None

    def to_dict(self) -> Dict:
        """JSON-ready mapping; complex numbers become [re, im] pairs."""
        def plain(v):
            if isinstance(v, complex):
                return [v.real, v.imag]
            if isinstance(v, (list, tuple)):
                return [plain(x) for x in v]
            return v

        ingredients = {key: plain(val) for key, val in asdict(self.ingredients).items()}
        value = self.value
        if isinstance(value, complex) and value.imag == 0.0:
            value = value.real
        return {
            "value": plain(value),
            "validity": self.validity.value,
            "route_value": self.route_value,
            "note": self.note,
            "ingredients": ingredients,
        }


# ── BPU sums ──

def bpu_inner_product_asym(k: int, intersections: Sequence[IntersectionDatum]) -> AsymptoticResult:
    """sqrt(2) sum_x w_x^k e^{i or_x (theta_x/2 - pi/4)} / sqrt(sin theta_x)."""
    if not intersections:
        return AsymptoticResult(0.0 + 0.0j, validity=Validity.FORBIDDEN, note="no classical contribution")
    total = 0.0 + 0.0j
    for datum in intersections:
        if datum.relative_phase is None:
            raise AsymptoticsError("intersections carry no relative phases; pass lifts")
        rotation = datum.orientation * (0.5 * datum.angle - 0.25 * np.pi)
        total += datum.relative_phase ** k * np.exp(1j * rotation) / np.sqrt(np.sin(datum.angle))
    ingredients = Ingredients(
        omegas=tuple(d.relative_phase for d in intersections),
        orientations=tuple(d.orientation for d in intersections),
    )
    return AsymptoticResult(complex(np.sqrt(2.0) * total), ingredients)


def symmetric_cosine_asym(k: int, area: float, nu: float) -> float:
    """sqrt(8/sin nu) cos(kA/4 + nu/2 - pi/4)."""
    if not 0.0 < nu < np.pi:
        raise AsymptoticsError(f"intersection angle {nu} outside (0, pi)")
    return float(np.sqrt(8.0 / np.sin(nu)) * np.cos(0.25 * k * area + 0.5 * nu - 0.25 * np.pi))


def common_angle(intersections: Sequence[IntersectionDatum], tol: float = ANGLE_TOL) -> float:
    """The shared intersection angle of a symmetric pair.

    Raises:
        AsymptoticsError: unless there are two intersections with equal angles.
    """
    if len(intersections) != 2:
        raise AsymptoticsError(f"expected two intersections, got {len(intersections)}")
    first, second = intersections[0].angle, intersections[1].angle
    if abs(first - second) > tol:
        raise AsymptoticsError(f"intersection angles differ: {first:.12f} vs {second:.12f}")
    return 0.5 * (first + second)


def loop_state_norm_asym(k: int, theta: float) -> float:
    """<Psi, Psi> ~ sqrt(k/pi) T with T = 2*pi*sin(theta)/sqrt(2)."""
    if np.sin(theta) < 1e-12:
        raise AsymptoticsError("pole heights have no loop-state norm asymptotics")
    return float(np.sqrt(k / np.pi) * 2.0 * np.pi * np.sin(theta) * ARCLENGTH_SCALE)


def _check_open_angle(beta: float) -> None:
    if not 0.0 < beta < np.pi:
        raise AsymptoticsError(f"beta={beta} must lie strictly inside (0, pi)")


def wigner_d00_asym(k: int, beta: float) -> float:
    """d^{k/2}_{00}(beta) ~ 2/sqrt(pi k sin beta) cos((k+1) beta/2 - pi/4)."""
    if k <= 0 or k % 2:
        raise AsymptoticsError(f"k must be positive and even, got {k}")
    _check_open_angle(beta)
    envelope = 2.0 / np.sqrt(np.pi * k * np.sin(beta))
    return float(envelope * np.cos(0.5 * (k + 1) * beta - 0.25 * np.pi))


def wigner_d00_envelope(k: int, beta: float) -> float:
    return float(2.0 / np.sqrt(np.pi * k * np.sin(beta)))


def warmup_inner_product_asym(k: int, beta: float) -> float:
    """<Psi_gamma, Psi_sigma> ~ 2 sqrt(2/sin beta) cos((k+1) beta/2 - pi/4) for the equator pair."""
    _check_open_angle(beta)
    return float(2.0 * np.sqrt(2.0 / np.sin(beta)) * np.cos(0.5 * (k + 1) * beta - 0.25 * np.pi))


def loop_state_inner_exact(k: int, m2, m1, beta: float) -> float:
    """c_{a2} c_{a1} d^j_{m2 m1}(beta)."""
    level = RepLevel(k)
    d = wigner_d_exact(level, m2, m1, beta)
    return constant_height_coefficient(level, m2) * constant_height_coefficient(level, m1) * d


# ── torus integrands ──

def _bilinear(sigma_part: np.ndarray, gamma_part: np.ndarray) -> np.ndarray:
    return np.sum(np.conj(sigma_part) * gamma_part, axis=-1)


def loop_pair_integrand(
    gamma_lift: LiftedLoop,
    sigma_lift: LiftedLoop,
    k: int,
    analytic: bool = True,
) -> TorusIntegrand:
    """(k+1)/(2*pi) <sigma(t), gamma(s)>^k over [0, T_gamma) x [0, T_sigma).

    The phase is S = -i Log w with w = <sigma(t), gamma(s)>; with
    ``analytic`` its gradient and Hessian come from the lift derivatives.
    """
    amplitude = coherent_state_norm(RepLevel(k))

    def overlap(s, t):
        s, t = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(t, dtype=float))
        return _bilinear(sigma_lift.spinors(t), gamma_lift.spinors(s))

    def phase(s, t):
        w = overlap(s, t)
        w = np.where(w == 0, 1e-300, w)
        return -1j * np.log(w)

    def amp(s, t):
        return np.full(np.broadcast(np.asarray(s), np.asarray(t)).shape, amplitude, dtype=complex)

    gradient = hessian = None
    if analytic:
        def gradient(s, t):
            g, sg = gamma_lift.spinors(s), sigma_lift.spinors(t)
            w = _bilinear(sg, g)
            ws = _bilinear(sg, gamma_lift.spinor_derivative(s, 1))
            wt = _bilinear(sigma_lift.spinor_derivative(t, 1), g)
            return -1j * np.array([ws / w, wt / w])

        def hessian(s, t):
            g, sg = gamma_lift.spinors(s), sigma_lift.spinors(t)
            dg, dsg = gamma_lift.spinor_derivative(s, 1), sigma_lift.spinor_derivative(t, 1)
            w = _bilinear(sg, g)
            ws, wt = _bilinear(sg, dg), _bilinear(dsg, g)
            wss = _bilinear(sg, gamma_lift.spinor_derivative(s, 2))
            wtt = _bilinear(sigma_lift.spinor_derivative(t, 2), g)
            wst = _bilinear(dsg, dg)
            ss = wss / w - (ws / w) ** 2
            tt = wtt / w - (wt / w) ** 2
            st = wst / w - ws * wt / w ** 2
            return -1j * np.array([[ss, st], [st, tt]])

    periods = (gamma_lift.base.period, sigma_lift.base.period)
    return TorusIntegrand(phase, amp, periods, analytic=analytic,
                          gradient=gradient, hessian=hessian, name=f"loop-pair k={k}")


def warmup_integrand(k: int, beta: float) -> TorusIntegrand:
    """Equator pair in angular coordinates, f = (k+1)/(4*pi), finite-difference derivatives.

    w(s, t) = cos(beta/2) cos((s - t)/2) + i sin(beta/2) sin((s + t)/2).
    """
    if k % 2:
        raise AsymptoticsError(f"the equator is Bohr-Sommerfeld only for even k, got {k}")
    c, sn = np.cos(0.5 * beta), np.sin(0.5 * beta)
    amplitude = (k + 1) / (4.0 * np.pi)

    def phase(s, t):
        w = c * np.cos(0.5 * (s - t)) + 1j * sn * np.sin(0.5 * (s + t))
        w = np.where(w == 0, 1e-300, w)
        return -1j * np.log(w)

    def amp(s, t):
        return np.full(np.broadcast(np.asarray(s), np.asarray(t)).shape, amplitude, dtype=complex)

    return TorusIntegrand(phase, amp, (2.0 * np.pi, 2.0 * np.pi), analytic=True,
                          name=f"warm-up k={k} beta={beta}")


def warmup_hessian(beta: float) -> np.ndarray:
    """(i/4) [[1, -e^{-i beta}], [-e^{-i beta}, 1]] at (pi/2, pi/2)."""
    off = -np.exp(-1j * beta)
    return 0.25j * np.array([[1.0, off], [off, 1.0]])


# ── Wigner d-matrix via loops ──

@lru_cache(maxsize=256)
def _standard_loops(k: int, twice_m: int):
    loop = constant_height_loop(k, twice_m / 2.0)
    return loop, standard_lift(loop)


def standard_pair(k: int, m2, m1, beta: float) -> Tuple[LiftedLoop, LiftedLoop]:
    """(gamma, sigma) lifts: height m2 unrotated, height m1 rotated by U_y(beta)."""
    level = RepLevel(k)
    twice_m2 = k - 2 * magnetic_index(level, m2)
    twice_m1 = k - 2 * magnetic_index(level, m1)
    _, gamma_lift = _standard_loops(k, twice_m2)
    _, rho_lift = _standard_loops(k, twice_m1)
    return gamma_lift, rotate_lift(rho_lift, SU2Element.rotation_y(beta))


def torus_angles(gamma: LiftedLoop, sigma: LiftedLoop, s, t) -> Tuple[np.ndarray, np.ndarray]:
    """Integrand parameters (s on gamma, t on sigma) as the displayed pair
    (angle on sigma, angle on gamma), each about its loop's own axis."""
    return (np.asarray(t) * sigma.base.circle.angular_speed,
            np.asarray(s) * gamma.base.circle.angular_speed)


def _intersections(gamma: LiftedLoop, sigma: LiftedLoop) -> List[IntersectionDatum]:
    return find_intersections(gamma.base, sigma.base, gamma, sigma)


def classically_allowed(j: float, m1, m2, beta: float) -> Tuple[bool, float]:
    """(allowed, margin): transverse intersection exists; margin is the least |V|."""
    k = int(round(2 * j))
    try:
        gamma, sigma = standard_pair(k, m2, m1, beta)
        intersections = _intersections(gamma, sigma)
    except (NonTransverseError, GeometryError):
        return False, 0.0
    if not intersections:
        return False, 0.0
    margin = min(abs(parallelepiped_volume(beta, d.x)) for d in intersections)
    return True, float(margin)


def allowed_window(j: float, m1, m2) -> Tuple[float, float]:
    """Open beta interval (|theta1 - theta2|, min(theta1 + theta2, 2*pi - theta1 - theta2))."""
    theta1 = float(np.arccos(np.clip(m1 / j, -1.0, 1.0)))
    theta2 = float(np.arccos(np.clip(m2 / j, -1.0, 1.0)))
    return abs(theta1 - theta2), min(theta1 + theta2, 2.0 * np.pi - theta1 - theta2)


def locate_allowed_boundary(j: float, m1, m2, lo: float, hi: float, tol: float = BISECTION_TOL) -> float:
    """Bisect on classically_allowed between lo and hi.

    Raises:
        AsymptoticsError: if lo and hi are on the same side.
    """
    lo_allowed = classically_allowed(j, m1, m2, lo)[0]
    if lo_allowed == classically_allowed(j, m1, m2, hi)[0]:
        raise AsymptoticsError(f"beta={lo} and beta={hi} do not bracket the allowed boundary")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if classically_allowed(j, m1, m2, mid)[0] == lo_allowed:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def phase_convention_defect(
    k: int,
    gamma: LiftedLoop,
    sigma: LiftedLoop,
    intersections: Sequence[IntersectionDatum],
    area: float,
) -> float:
    """max(|w_p^k - e^{ikA/4}|, |w_n^k - e^{-ikA/4}|) for the standard lifts.

    Powers are compared because a lift crossing its parameter origin
    between the corners shifts w by a k-th root of unity.
    """
    by_orientation = {d.orientation: d for d in intersections}
    if len(intersections) != 2 or set(by_orientation) != {1, -1}:
        raise AsymptoticsError("phase convention needs one corner of each orientation")
    p, n = by_orientation[1], by_orientation[-1]
    if p.relative_phase is None or n.relative_phase is None:
        raise AsymptoticsError("intersections carry no relative phases")
    target = np.exp(0.25j * k * area)
    return float(max(abs(p.relative_phase ** k - target), abs(n.relative_phase ** k - np.conj(target))))


def wigner_d_asym_ly(j: float, m1, m2, beta: float) -> AsymptoticResult:
    """d^j_{m2 m1}(beta) ~ sqrt(2/(j pi V)) cos(jA/2 + nu/2 - pi/4).

    Also evaluates the normalised loop-state route
    symmetric_cosine_asym(k, A, nu) / sqrt(N_gamma N_sigma) and requires it
    to agree with the closed form.

    beta = 0 is reported as forbidden for every m1, m2, including the
    coincident loops at m1 = m2 where d is 1 but no isolated corners exist.

    Raises:
        AsymptoticsError: if the two corners disagree on angle or volume,
            the routes disagree, or the corner phases break the
            e^{+-ikA/4} convention.
    """
    k = int(round(2 * j))
    level = RepLevel(k)
    for m in (m1, m2):
        a = magnetic_index(level, m)
        if a in (0, k):
            return AsymptoticResult(None, validity=Validity.FORBIDDEN, note="pole height")
    if beta == 0.0:
        return AsymptoticResult(None, validity=Validity.FORBIDDEN, note="identity rotation")
    gamma, sigma = standard_pair(k, m2, m1, beta)
    try:
        intersections = _intersections(gamma, sigma)
    except NonTransverseError:
        return AsymptoticResult(None, validity=Validity.BOUNDARY, note="tangential contact")
    if not intersections:
        return AsymptoticResult(None, validity=Validity.FORBIDDEN, note="loops do not meet")

    area = lune_area(gamma.base, sigma.base, intersections)
    nu = common_angle(intersections, EQUAL_ANGLE_TOL)
    volumes = [abs(parallelepiped_volume(beta, d.x)) for d in intersections]
    if abs(volumes[0] - volumes[1]) > EQUAL_ANGLE_TOL:
        raise AsymptoticsError(f"corner volumes differ: {volumes[0]:.12f} vs {volumes[1]:.12f}")
    volume = 0.5 * (volumes[0] + volumes[1])

    theta_gamma = gamma.base.circle.theta
    theta_sigma = sigma.base.circle.theta
    amplitude = np.sqrt(2.0 / (j * np.pi * volume))
    value = float(amplitude * np.cos(0.5 * j * area + 0.5 * nu - 0.25 * np.pi))
    route = symmetric_cosine_asym(k, area, nu) / np.sqrt(
        loop_state_norm_asym(k, theta_gamma) * loop_state_norm_asym(k, theta_sigma)
    )
    if abs(route - value) > ROUTE_TOL * max(1.0, amplitude):
        raise AsymptoticsError(f"route mismatch: closed form {value:.15g}, loop-state route {route:.15g}")

    phase_defect = phase_convention_defect(k, gamma, sigma, intersections, area)
    if phase_defect > PHASE_CONVENTION_TOL:
        raise AsymptoticsError(f"corner phases break the e^(+-ikA/4) convention (defect {phase_defect:.3e})")

    ingredients = Ingredients(
        area=area,
        nu=nu,
        volume=volume,
        omegas=tuple(d.relative_phase for d in intersections),
        orientations=tuple(d.orientation for d in intersections),
        transport_defect=lune_transport_defect(gamma.base, sigma.base, intersections, area),
        phase_defect=phase_defect,
    )
    validity = Validity.ALLOWED
    note = ""
    if volume < BOUNDARY_VOLUME:
        validity = Validity.BOUNDARY
        note = "near the allowed boundary; amplitude unreliable"
        logger.warning(f"j={j} m1={m1} m2={m2} beta={beta}: V={volume:.3e} at the allowed boundary")
    return AsymptoticResult(value, ingredients, validity, float(route), note)
