"""Classical geometry of the Hopf fibration S^3 -> S^2.

Points of S^2 are handled as unit 3-vectors (x, y, z) with z = cos(theta);
points of S^3 as unit spinors (q1, q2) projecting to

    x + i y = 2 q1 conj(q2),    z = |q2|^2 - |q1|^2.

The trivialising section u(theta, phi) = (sin(theta/2) e^{i phi}, cos(theta/2))
carries the connection form alpha = sin^2(theta/2) dphi, so the parallel lift
of a loop is e^{-i int alpha} u(gamma(t)) and the holonomy around a loop
enclosing area A (to its left) is e^{-iA/2}.

Loop parameters use lengths scaled by 1/sqrt(2) relative to the round
sphere, so a circle of colatitude theta has period 2*pi*sin(theta)/sqrt(2).
"""

import enum
import logging
from dataclasses import dataclass, field
from typing import Callable, Hashable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate

from su2rep import SU2Element, as_spinor

logger = logging.getLogger(__name__)


class GeometryError(ValueError):
    """Raised for inputs outside the domain of a geometric operation."""


class NonTransverseError(GeometryError):
    """Raised when two loops touch tangentially or coincide."""


class IntersectionError(GeometryError):
    """Raised when intersection search or the lune construction fails."""


UNIT_TOL = 1e-12
POLE_TOL = 1e-12
CLOSURE_TOL = 1e-10
PROJECTION_TOL = 1e-10
ARCLENGTH_SCALE = 1.0 / np.sqrt(2.0)

# Intersection search.
SEED_GRID = 256
NEWTON_MAX_ITER = 50
NEWTON_TOL = 1e-12
DEFAULT_ANGLE_TOL = 1e-8
DEDUPE_TOL = 1e-7

# Chart margin: a loop is lifted in the north chart when it stays this far
# above the south pole, otherwise in the south chart.
CHART_MARGIN = 1e-3
# Lune boundaries closer than this to both poles have no usable chart.
POLE_GAP = 1e-6

Z_AXIS = np.array([0.0, 0.0, 1.0])


# ── points ──

@dataclass(frozen=True, eq=False)
class SpherePoint:
    """Point of S^2 in colatitude/longitude, with its cached unit 3-vector."""
    theta: float
    phi: float
    vector: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        theta = float(self.theta)
        if not -POLE_TOL <= theta <= np.pi + POLE_TOL:
            raise GeometryError(f"colatitude {theta} outside [0, pi]")
        theta = min(max(theta, 0.0), np.pi)
        phi = float(np.mod(self.phi, 2.0 * np.pi))
        vec = np.array([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)])
        vec.setflags(write=False)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "vector", vec)

    @classmethod
    def from_vector(cls, v: Sequence[float]) -> "SpherePoint":
        v = np.asarray(v, dtype=float)
        norm = np.linalg.norm(v)
        if norm == 0.0:
            raise GeometryError("zero vector has no direction")
        v = v / norm
        return cls(float(np.arccos(np.clip(v[2], -1.0, 1.0))), float(np.arctan2(v[1], v[0])))

    @property
    def z(self) -> float:
        return float(self.vector[2])


@dataclass(frozen=True, eq=False)
class HopfPoint:
    """Unit spinor (q1, q2) in C^2."""
    q1: complex
    q2: complex

    def __post_init__(self):
        q1, q2 = complex(self.q1), complex(self.q2)
        defect = abs(abs(q1) ** 2 + abs(q2) ** 2 - 1.0)
        if defect > UNIT_TOL:
            raise GeometryError(f"spinor is not unit-norm (defect {defect:.3e})")
        object.__setattr__(self, "q1", q1)
        object.__setattr__(self, "q2", q2)

    @classmethod
    def from_array(cls, q: Sequence[complex]) -> "HopfPoint":
        q = np.asarray(q, dtype=complex)
        return cls(q[0], q[1])

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.q1, self.q2])

    def project(self) -> SpherePoint:
        return hopf_projection(self)

    def rephased(self, angle: float) -> "HopfPoint":
        phase = np.exp(1j * angle)
        return HopfPoint(phase * self.q1, phase * self.q2)


def project_array(q: np.ndarray) -> np.ndarray:
    """Hopf projection of spinors (..., 2) to unit 3-vectors (..., 3)."""
    q = as_spinor(q)
    w = 2.0 * q[..., 0] * np.conj(q[..., 1])
    z = np.abs(q[..., 1]) ** 2 - np.abs(q[..., 0]) ** 2
    return np.stack([w.real, w.imag, z], axis=-1)


def hopf_projection(p: HopfPoint) -> SpherePoint:
    return SpherePoint.from_vector(project_array(p.vector))


def section_u(theta: float, phi: float) -> HopfPoint:
    """u(theta, phi) = (sin(theta/2) e^{i phi}, cos(theta/2)).

    Raises:
        GeometryError: at the south pole, where the section is undefined.
    """
    if theta > np.pi - POLE_TOL:
        raise GeometryError("section u is undefined at the south pole")
    if theta < -POLE_TOL:
        raise GeometryError(f"colatitude {theta} outside [0, pi]")
    return HopfPoint(np.sin(theta / 2) * np.exp(1j * phi), np.cos(theta / 2))


def connection_coefficient(theta: float) -> float:
    """dphi-coefficient sin^2(theta/2) = (1 - cos theta)/2 of the connection form."""
    return float(0.5 * (1.0 - np.cos(theta)))


def sphere_point_from_vector(v: Sequence[float]) -> SpherePoint:
    return SpherePoint.from_vector(v)


def great_circle_distance(x: SpherePoint, y: SpherePoint) -> float:
    a, b = x.vector, y.vector
    return float(np.arctan2(np.linalg.norm(np.cross(a, b)), np.dot(a, b)))


def _north_section(v: np.ndarray) -> np.ndarray:
    x, y, z = v[..., 0], v[..., 1], v[..., 2]
    denom = np.sqrt(2.0 * (1.0 + z))
    return np.stack([(x + 1j * y) / denom, np.sqrt(0.5 * (1.0 + z)) + 0j], axis=-1)


def _south_section(v: np.ndarray) -> np.ndarray:
    # u_S = e^{-i phi} u, regular away from the north pole
    x, y, z = v[..., 0], v[..., 1], v[..., 2]
    denom = np.sqrt(2.0 * (1.0 - z))
    return np.stack([np.sqrt(0.5 * (1.0 - z)) + 0j, (x - 1j * y) / denom], axis=-1)


def _alpha_rate(v: np.ndarray, dv: np.ndarray, chart: str) -> np.ndarray:
    """Connection form alpha evaluated on the velocity dv at points v."""
    swirl = v[..., 0] * dv[..., 1] - v[..., 1] * dv[..., 0]
    if chart == "north":
        return swirl / (2.0 * (1.0 + v[..., 2]))
    return -swirl / (2.0 * (1.0 - v[..., 2]))


# ── loops ──

class LoopKind(enum.Enum):
    CONSTANT_HEIGHT = "constant-height"
    ROTATED_CONSTANT_HEIGHT = "rotated-constant-height"
    GENERAL_SMOOTH = "general-smooth"


@dataclass(frozen=True, eq=False)
class CircleData:
    """A circle spin.R . {colatitude theta}, traversed counter-clockwise about its axis."""
    theta: float
    spin: SU2Element

    @property
    def rotation(self) -> np.ndarray:
        return self.spin.rotation_matrix()

    @property
    def axis(self) -> np.ndarray:
        return self.rotation[:, 2]

    @property
    def height(self) -> float:
        return float(np.cos(self.theta))

    @property
    def angular_speed(self) -> float:
        """dphi/dt for the arclength parameter."""
        return 1.0 / (np.sin(self.theta) * ARCLENGTH_SCALE)


@dataclass(frozen=True, eq=False)
class Loop:
    """A closed loop on S^2.

    ``evaluator`` maps parameter arrays of any shape to unit 3-vectors of
    shape (..., 3) and must be periodic with period ``period`` when
    evaluated past [0, T). ``velocity`` is optional; finite differences
    are used without it.
    """
    evaluator: Callable[[np.ndarray], np.ndarray]
    period: float
    kind: LoopKind
    velocity: Optional[Callable[[np.ndarray], np.ndarray]] = None
    circle: Optional[CircleData] = None
    key: Optional[Hashable] = None

    def __post_init__(self):
        if self.period < 0:
            raise GeometryError(f"period must be >= 0, got {self.period}")
        if self.period > 0:
            gap = np.linalg.norm(self.points(0.0) - self.points(self.period))
            if gap > CLOSURE_TOL:
                raise GeometryError(f"loop is not closed (gap {gap:.3e})")

    @property
    def is_degenerate(self) -> bool:
        return self.period == 0.0

    def points(self, t) -> np.ndarray:
        return np.asarray(self.evaluator(np.asarray(t, dtype=float)), dtype=float)

    def point(self, t: float) -> SpherePoint:
        return SpherePoint.from_vector(self.points(t))

    def velocities(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.velocity is not None:
            return np.asarray(self.velocity(t), dtype=float)
        h = 1e-6 * max(self.period, 1.0)
        return (self.points(t + h) - self.points(t - h)) / (2.0 * h)


@dataclass(frozen=True, eq=False)
class LiftedLoop:
    """A loop with a lift to S^3.

    ``lift`` maps parameter arrays to spinors (..., 2). ``derivatives``,
    when present, maps (t, order) to the order-th parameter derivative of
    the lift for order 1 or 2. ``key`` identifies the lift for caching.
    """
    base: Loop
    lift: Callable[[np.ndarray], np.ndarray]
    derivatives: Optional[Callable[[np.ndarray, int], np.ndarray]] = None
    key: Optional[Hashable] = None

    def __post_init__(self):
        defect = np.linalg.norm(project_array(self.spinors(0.0)) - self.base.points(0.0))
        if defect > PROJECTION_TOL:
            raise GeometryError(f"lift does not project onto the loop (defect {defect:.3e})")

    def spinors(self, t) -> np.ndarray:
        return np.asarray(self.lift(np.asarray(t, dtype=float)), dtype=complex)

    def point(self, t: float) -> HopfPoint:
        return HopfPoint.from_array(self.spinors(t))

    def spinor_derivative(self, t, order: int = 1) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.derivatives is not None:
            return np.asarray(self.derivatives(t, order), dtype=complex)
        h = 1e-4 * max(self.base.period, 1.0)
        if order == 1:
            return (self.spinors(t + h) - self.spinors(t - h)) / (2.0 * h)
        if order == 2:
            return (self.spinors(t + h) - 2.0 * self.spinors(t) + self.spinors(t - h)) / h ** 2
        raise GeometryError(f"derivative order must be 1 or 2, got {order}")


def _spin_key(g: SU2Element) -> Tuple[float, ...]:
    m = g.matrix
    return tuple(np.round(np.concatenate([m.real.ravel(), m.imag.ravel()]), 12))


def circle_loop(
    theta: float,
    spin: Optional[SU2Element] = None,
    key: Optional[Hashable] = None,
) -> Loop:
    """Circle of colatitude theta about the axis spin.R . z.

    theta = 0 or pi gives a degenerate point loop with period 0.
    """
    if not 0.0 <= theta <= np.pi:
        raise GeometryError(f"colatitude {theta} outside [0, pi]")
    spin = spin if spin is not None else SU2Element.identity()
    rotated = not np.allclose(spin.matrix, np.eye(2), atol=1e-15)
    kind = LoopKind.ROTATED_CONSTANT_HEIGHT if rotated else LoopKind.CONSTANT_HEIGHT
    circle = CircleData(theta, spin)
    rot = circle.rotation

    if theta == 0.0 or theta == np.pi:
        pole = rot @ np.array([0.0, 0.0, np.cos(theta)])

        def point_evaluator(t):
            return np.broadcast_to(pole, np.shape(t) + (3,)).copy()

        def point_velocity(t):
            return np.zeros(np.shape(t) + (3,))

        return Loop(point_evaluator, 0.0, kind, point_velocity, circle, key)

    sin_t, cos_t = np.sin(theta), np.cos(theta)
    speed = circle.angular_speed

    def evaluator(t):
        phi = speed * t
        local = np.stack(
            [sin_t * np.cos(phi), sin_t * np.sin(phi), np.full_like(phi, cos_t)], axis=-1
        )
        return local @ rot.T

    def velocity(t):
        phi = speed * t
        local = np.stack(
            [-sin_t * np.sin(phi), sin_t * np.cos(phi), np.zeros_like(phi)], axis=-1
        )
        return speed * (local @ rot.T)

    period = 2.0 * np.pi * sin_t * ARCLENGTH_SCALE
    return Loop(evaluator, period, kind, velocity, circle, key)


def constant_height_loop(k: int, m: float) -> Loop:
    """Loop at the Bohr-Sommerfeld height cos(theta_m) = 2m/k.

    Raises:
        GeometryError: if m is not one of -k/2, ..., k/2.
    """
    if k < 0:
        raise GeometryError(f"k must be >= 0, got {k}")
    twice = 2.0 * float(m)
    twice_m = int(round(twice))
    if abs(twice - twice_m) > 1e-9 or (k - twice_m) % 2 or abs(twice_m) > k:
        raise GeometryError(f"m={m} is not a valid magnetic number for k={k}")
    if twice_m == k:
        theta = 0.0
    elif twice_m == -k:
        theta = np.pi
    else:
        theta = float(np.arccos(twice_m / k))
    return circle_loop(theta, key=("constant-height", k, twice_m))


def star_loop(
    r0: float,
    coefficients: Sequence[Tuple[float, float]] = (),
    spin: Optional[SU2Element] = None,
    key: Optional[Hashable] = None,
) -> Loop:
    """Star-shaped loop with colatitude profile r(phi) about the axis spin.R . z.

    r(phi) = r0 + sum_j a_j cos(j phi) + b_j sin(j phi), with (a_j, b_j)
    the j-th entry (j starting at 1) of ``coefficients``. The loop is
    traversed at constant angular speed; its period is its length.
    """
    spin = spin if spin is not None else SU2Element.identity()
    rot = spin.rotation_matrix()
    coeffs = np.asarray(coefficients, dtype=float).reshape(-1, 2)
    orders = np.arange(1, len(coeffs) + 1)

    def profile(phi):
        phi = np.asarray(phi, dtype=float)[..., None]
        r = r0 + np.sum(coeffs[:, 0] * np.cos(orders * phi) + coeffs[:, 1] * np.sin(orders * phi), axis=-1)
        dr = np.sum(orders * (-coeffs[:, 0] * np.sin(orders * phi) + coeffs[:, 1] * np.cos(orders * phi)), axis=-1)
        return r, dr

    samples = np.linspace(0.0, 2.0 * np.pi, 4096, endpoint=False)
    r_samples, dr_samples = profile(samples)
    if np.min(r_samples) <= 0.0 or np.max(r_samples) >= np.pi:
        raise GeometryError("star profile must stay strictly between the poles of its axis")
    length, _ = integrate.quad(
        lambda p: float(np.hypot(profile(p)[1], np.sin(profile(p)[0]))),
        0.0, 2.0 * np.pi, limit=400, epsabs=1e-13, epsrel=1e-13,
    )
    period = length * ARCLENGTH_SCALE
    speed = 2.0 * np.pi / period

    def evaluator(t):
        phi = speed * np.asarray(t, dtype=float)
        r, _ = profile(phi)
        local = np.stack([np.sin(r) * np.cos(phi), np.sin(r) * np.sin(phi), np.cos(r)], axis=-1)
        return local @ rot.T

    def velocity(t):
        phi = speed * np.asarray(t, dtype=float)
        r, dr = profile(phi)
        local = np.stack([
            dr * np.cos(r) * np.cos(phi) - np.sin(r) * np.sin(phi),
            dr * np.cos(r) * np.sin(phi) + np.sin(r) * np.cos(phi),
            -dr * np.sin(r),
        ], axis=-1)
        return speed * (local @ rot.T)

    logger.debug(f"star loop r0={r0} with {len(coeffs)} harmonics, period {period:.6f}")
    return Loop(evaluator, period, LoopKind.GENERAL_SMOOTH, velocity, None, key)


def rotate_loop(loop: Loop, g: SU2Element) -> Loop:
    """Push a loop forward by the rotation covered by g."""
    rot = g.rotation_matrix()
    key = (loop.key, _spin_key(g)) if loop.key is not None else None
    if loop.circle is not None:
        return circle_loop(loop.circle.theta, g @ loop.circle.spin, key)

    def evaluator(t):
        return loop.points(t) @ rot.T

    def velocity(t):
        return loop.velocities(t) @ rot.T

    return Loop(evaluator, loop.period, LoopKind.GENERAL_SMOOTH, velocity, None, key)


# ── lifts ──

def _circle_lift(circle: CircleData, sign: float):
    half = circle.theta / 2.0
    s_half, c_half = np.sin(half), np.cos(half)
    rate = sign * np.sin(half) ** 2
    speed = circle.angular_speed if 0.0 < circle.theta < np.pi else 0.0
    spin_t = circle.spin.matrix.T

    def local(t, order):
        phi = speed * np.asarray(t, dtype=float)
        common = np.exp(1j * rate * phi)
        f1 = (1j * (rate + 1.0)) ** order
        f2 = (1j * rate) ** order
        first = f1 * s_half * np.exp(1j * phi) * common
        second = f2 * c_half * common
        return (speed ** order) * np.stack([first, second], axis=-1)

    def lift(t):
        return local(t, 0) @ spin_t

    def derivatives(t, order):
        if order not in (1, 2):
            raise GeometryError(f"derivative order must be 1 or 2, got {order}")
        return local(t, order) @ spin_t

    return lift, derivatives


def standard_lift(loop: Loop, sign: float = -1.0) -> LiftedLoop:
    """Standard lift g . e^{-i sin^2(theta/2) phi} u(theta, phi) of a circle loop.

    Point loops lift to the constant spinor (0, 1) at the north pole and
    (1, 0) at the south pole (then rotated). ``sign`` = +1 gives the
    non-horizontal variant used by the mutation check.
    """
    if loop.circle is None:
        raise GeometryError("standard lift is defined for circle loops only")
    circle = loop.circle
    key = ("standard", loop.key, float(sign)) if loop.key is not None else None
    if loop.is_degenerate:
        pole = np.array([0.0, 1.0], dtype=complex) if circle.theta == 0.0 else np.array([1.0, 0.0], dtype=complex)
        value = circle.spin.apply(pole)

        def constant(t):
            return np.broadcast_to(value, np.shape(t) + (2,)).copy()

        def zero(t, order):
            return np.zeros(np.shape(t) + (2,), dtype=complex)

        return LiftedLoop(loop, constant, zero, key)
    lift, derivatives = _circle_lift(circle, sign)
    return LiftedLoop(loop, lift, derivatives, key)


def rotate_lift(lifted: LiftedLoop, g: SU2Element) -> LiftedLoop:
    """g . lifted, over the rotated base loop."""
    gt = g.matrix.T

    def lift(t):
        return lifted.spinors(t) @ gt

    def derivatives(t, order):
        return lifted.spinor_derivative(t, order) @ gt

    key = (lifted.key, _spin_key(g)) if lifted.key is not None else None
    return LiftedLoop(rotate_loop(lifted.base, g), lift, derivatives, key)


def _choose_chart(loop: Loop) -> str:
    z = loop.points(np.linspace(0.0, loop.period, 2048, endpoint=False))[..., 2]
    if np.min(z) > -1.0 + CHART_MARGIN:
        return "north"
    if np.max(z) < 1.0 - CHART_MARGIN:
        return "south"
    raise GeometryError("loop passes near both poles; no single chart covers it")


def _section(v: np.ndarray, chart: str) -> np.ndarray:
    return _north_section(v) if chart == "north" else _south_section(v)


def parallel_lift(loop: Loop, start: HopfPoint) -> LiftedLoop:
    """Horizontal lift of ``loop`` starting at ``start``.

    Circle loops use the closed form; general loops integrate the
    connection form with an adaptive Runge-Kutta solver in whichever
    chart avoids the loop.

    Raises:
        GeometryError: if ``start`` does not lie over loop(0), or the loop
            approaches both poles.
    """
    start_vec = start.vector
    defect = np.linalg.norm(project_array(start_vec) - loop.points(0.0))
    if defect > PROJECTION_TOL:
        raise GeometryError(f"start does not project onto loop(0) (defect {defect:.3e})")

    if loop.circle is not None:
        reference = standard_lift(loop)
        phase = np.vdot(reference.spinors(0.0), start_vec)
        phase /= abs(phase)

        def lift(t):
            return phase * reference.spinors(t)

        def derivatives(t, order):
            return phase * reference.spinor_derivative(t, order)

        return LiftedLoop(loop, lift, derivatives)

    chart = _choose_chart(loop)
    period = loop.period

    def rate(t, _y):
        return [_alpha_rate(loop.points(t), loop.velocities(t), chart)]

    solution = integrate.solve_ivp(
        rate, (0.0, period), [0.0], method="DOP853",
        rtol=1e-12, atol=1e-13, dense_output=True,
    )
    if not solution.success:
        raise GeometryError(f"parallel transport integration failed: {solution.message}")
    accumulated = solution.sol
    total = float(solution.y[0, -1])
    holo = np.exp(-1j * total)
    phase = np.vdot(_section(loop.points(0.0), chart), start_vec)
    phase /= abs(phase)
    logger.debug(f"parallel lift in {chart} chart, {solution.t.size} steps")

    def lift(t):
        t = np.asarray(t, dtype=float)
        turns = np.floor(t / period)
        t0 = t - turns * period
        chi = accumulated(t0.ravel())[0].reshape(t0.shape)
        factor = phase * holo ** turns * np.exp(-1j * chi)
        return factor[..., None] * _section(loop.points(t0), chart)

    return LiftedLoop(loop, lift)


def transport_defect(lifted: LiftedLoop, samples: int = 64, step: float = 1e-4) -> float:
    """max |Im <lift(t), lift(t+h)>| over sample points; O(h^3) for a horizontal lift."""
    if lifted.base.is_degenerate:
        return 0.0
    t = np.linspace(0.0, lifted.base.period, samples, endpoint=False)
    overlap = np.sum(np.conj(lifted.spinors(t)) * lifted.spinors(t + step), axis=-1)
    return float(np.max(np.abs(overlap.imag)))


# ── holonomy and areas ──

def _periodic_integral(integrand: Callable[[np.ndarray], np.ndarray], period: float,
                       nodes: int = 256, tol: float = 1e-13, max_nodes: int = 1 << 16) -> float:
    previous = None
    while nodes <= max_nodes:
        t = np.linspace(0.0, period, nodes, endpoint=False)
        value = float(np.sum(integrand(t)) * period / nodes)
        if previous is not None and abs(value - previous) < tol * max(1.0, abs(value)):
            return value
        previous = value
        nodes *= 2
    raise GeometryError(f"loop integral did not converge (last change {abs(value - previous):.3e})")


def _swirl_integral(loop: Loop, chart: str, rotation: Optional[np.ndarray] = None) -> float:
    """Line integral of 2*alpha = (1 - cos theta) dphi in the given chart."""
    rot = rotation if rotation is not None else np.eye(3)

    def integrand(t):
        return 2.0 * _alpha_rate(loop.points(t) @ rot.T, loop.velocities(t) @ rot.T, chart)

    return _periodic_integral(integrand, loop.period)


def enclosed_area(loop: Loop) -> float:
    """Area to the left of the loop, in [0, 4*pi)."""
    if loop.is_degenerate:
        return 0.0
    if loop.circle is not None:
        return float(2.0 * np.pi * (1.0 - np.cos(loop.circle.theta)))
    chart = _choose_chart(loop)
    return float(np.mod(_swirl_integral(loop, chart), 4.0 * np.pi))


def holonomy(loop: Loop) -> complex:
    """Hol = e^{-iA/2} for a simple closed loop enclosing area A to its left."""
    if loop.is_degenerate:
        return 1.0 + 0.0j
    if loop.circle is not None:
        return complex(np.exp(-0.5j * enclosed_area(loop)))
    chart = _choose_chart(loop)
    return complex(np.exp(-0.5j * _swirl_integral(loop, chart)))


def discrete_holonomy(loop, nodes: int = 2048) -> complex:
    """Holonomy from the phase of the product of consecutive fibre overlaps.

    Accepts a Loop (sampled through a chart section) or a LiftedLoop
    (sampled through its own lift); the product is gauge invariant.
    """
    base = loop.base if isinstance(loop, LiftedLoop) else loop
    if base.is_degenerate:
        return 1.0 + 0.0j
    t = np.linspace(0.0, base.period, nodes, endpoint=False)
    if isinstance(loop, LiftedLoop):
        fibres = loop.spinors(t)
    else:
        fibres = _section(base.points(t), _choose_chart(base))
    following = np.roll(fibres, -1, axis=0)
    overlaps = np.sum(np.conj(following) * fibres, axis=-1)
    return complex(np.exp(1j * np.sum(np.angle(overlaps))))


def is_bohr_sommerfeld(loop: Loop, k: int, tol: float = 1e-8) -> bool:
    if k < 1:
        raise GeometryError(f"k must be >= 1, got {k}")
    return bool(abs(holonomy(loop) ** k - 1.0) < tol)


def _frame_to_south(x: np.ndarray) -> np.ndarray:
    """Rotation taking x to the south pole."""
    e3 = -np.asarray(x, dtype=float)
    helper = np.array([1.0, 0.0, 0.0]) if abs(e3[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = np.cross(helper, e3)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(e3, e1)
    return np.vstack([e1, e2, e3])


def side_of_loop(loop: Loop, x) -> int:
    """+1 if x lies to the left of the loop, -1 if to the right."""
    v = np.asarray(getattr(x, "vector", x), dtype=float)
    if loop.is_degenerate:
        raise GeometryError("point loops have no sides")
    if loop.circle is not None:
        return 1 if float(v @ loop.circle.axis) > loop.circle.height else -1
    # With x moved to the south pole the north-chart integral is the left
    # area when x is outside it and the left area minus 4*pi otherwise.
    value = _swirl_integral(loop, "north", _frame_to_south(v))
    return 1 if value < 0.0 else -1


# ── intersections ──

@dataclass(frozen=True, eq=False)
class IntersectionDatum:
    """One transverse crossing of two loops."""
    s: float
    t: float
    x: SpherePoint
    angle: float
    orientation: int
    relative_phase: Optional[complex] = None

    def __post_init__(self):
        if not 0.0 < self.angle < np.pi:
            raise NonTransverseError(f"intersection angle {self.angle} outside (0, pi)")
        if self.orientation not in (1, -1):
            raise GeometryError(f"orientation must be +1 or -1, got {self.orientation}")
        if self.relative_phase is not None and abs(abs(self.relative_phase) - 1.0) > UNIT_TOL:
            raise GeometryError(f"relative phase is not unit-modulus: {self.relative_phase}")


def _circle_parameter(loop: Loop, v: np.ndarray) -> float:
    local = loop.circle.rotation.T @ v
    phi = np.mod(np.arctan2(local[1], local[0]), 2.0 * np.pi)
    return float(phi / loop.circle.angular_speed)


def _circle_seeds(gamma: Loop, sigma: Loop) -> List[Tuple[float, float]]:
    a, b = gamma.circle.axis, sigma.circle.axis
    h1, h2 = gamma.circle.height, sigma.circle.height
    cos_ab = float(np.clip(a @ b, -1.0, 1.0))
    sin2 = 1.0 - cos_ab ** 2
    if sin2 < 1e-14:
        if abs(h1 - cos_ab * h2) < 1e-12:
            raise NonTransverseError("loops coincide")
        return []
    ca = (h1 - h2 * cos_ab) / sin2
    cb = (h2 - h1 * cos_ab) / sin2
    normal = np.cross(a, b)
    remainder = 1.0 - (ca ** 2 + cb ** 2 + 2.0 * ca * cb * cos_ab)
    if remainder < -1e-14:
        return []
    if remainder <= 1e-14:
        raise NonTransverseError("circles touch tangentially")
    cn = np.sqrt(remainder / sin2)
    seeds = []
    for sign in (1.0, -1.0):
        v = ca * a + cb * b + sign * cn * normal
        seeds.append((_circle_parameter(gamma, v), _circle_parameter(sigma, v)))
    return seeds


def _grid_seeds(gamma: Loop, sigma: Loop, grid: int) -> List[Tuple[float, float]]:
    s = np.linspace(0.0, gamma.period, grid, endpoint=False)
    t = np.linspace(0.0, sigma.period, grid, endpoint=False)
    ps, pt = gamma.points(s), sigma.points(t)
    dist = np.linalg.norm(ps[:, None, :] - pt[None, :, :], axis=-1)
    step = (np.max(np.linalg.norm(gamma.velocities(s), axis=-1)) * gamma.period / grid
            + np.max(np.linalg.norm(sigma.velocities(t), axis=-1)) * sigma.period / grid)
    is_min = np.ones_like(dist, dtype=bool)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di or dj:
                is_min &= dist <= np.roll(np.roll(dist, di, axis=0), dj, axis=1)
    rows, cols = np.nonzero(is_min & (dist < 4.0 * step))
    return [(float(s[i]), float(t[j])) for i, j in zip(rows, cols)]


def _newton_refine(gamma: Loop, sigma: Loop, s: float, t: float) -> Optional[Tuple[float, float]]:
    for _ in range(NEWTON_MAX_ITER):
        residual = gamma.points(s) - sigma.points(t)
        if np.linalg.norm(residual) < NEWTON_TOL * 0.1:
            break
        jac = np.column_stack([gamma.velocities(s), -sigma.velocities(t)])
        step, *_ = np.linalg.lstsq(jac, -residual, rcond=None)
        s, t = s + step[0], t + step[1]
        if np.linalg.norm(step) < 1e-16:
            break
    if np.linalg.norm(gamma.points(s) - sigma.points(t)) >= NEWTON_TOL:
        return None
    return s, t


def _wrapped_distance(a: float, b: float, period: float) -> float:
    d = np.mod(a - b, period)
    return float(min(d, period - d))


def find_intersections(
    gamma: Loop,
    sigma: Loop,
    gamma_lift: Optional[LiftedLoop] = None,
    sigma_lift: Optional[LiftedLoop] = None,
    angle_tol: float = DEFAULT_ANGLE_TOL,
    grid: int = SEED_GRID,
) -> List[IntersectionDatum]:
    """All transverse intersections of two loops, ordered by s.

    Circle pairs are seeded in closed form, other pairs from a grid scan
    of the chordal distance; every seed is refined by Gauss-Newton on
    gamma(s) - sigma(t).

    Raises:
        GeometryError: for degenerate point loops.
        NonTransverseError: for tangential contact or coincident loops.
        IntersectionError: if seeds were found but none converged.
    """
    if gamma.is_degenerate or sigma.is_degenerate:
        raise GeometryError("point loops are excluded from intersection search")
    if gamma.circle is not None and sigma.circle is not None:
        seeds = _circle_seeds(gamma, sigma)
    else:
        seeds = _grid_seeds(gamma, sigma, grid)
    logger.debug(f"intersection search: {len(seeds)} seed(s)")

    found: List[Tuple[float, float]] = []
    failures = 0
    for s0, t0 in seeds:
        refined = _newton_refine(gamma, sigma, s0, t0)
        if refined is None:
            failures += 1
            continue
        s, t = np.mod(refined[0], gamma.period), np.mod(refined[1], sigma.period)
        duplicate = any(
            _wrapped_distance(s, fs, gamma.period) < DEDUPE_TOL
            and _wrapped_distance(t, ft, sigma.period) < DEDUPE_TOL
            for fs, ft in found
        )
        if not duplicate:
            found.append((float(s), float(t)))
    if seeds and not found:
        raise IntersectionError(f"Newton refinement failed from all {len(seeds)} seed(s)")
    if failures:
        logger.warning(f"{failures} intersection seed(s) did not converge")

    data = []
    for s, t in sorted(found):
        x = 0.5 * (gamma.points(s) + sigma.points(t))
        x /= np.linalg.norm(x)
        dg, ds = gamma.velocities(s), sigma.velocities(t)
        cos_angle = float(dg @ ds / (np.linalg.norm(dg) * np.linalg.norm(ds)))
        angle = float(np.arccos(np.clip(cos_angle, -1.0, 1.0)))
        if angle < angle_tol or angle > np.pi - angle_tol:
            raise NonTransverseError(f"loops meet tangentially at s={s:.6f}, t={t:.6f}")
        orientation = 1 if float(np.cross(dg, ds) @ x) > 0.0 else -1
        omega = None
        if gamma_lift is not None and sigma_lift is not None:
            overlap = np.vdot(sigma_lift.spinors(t), gamma_lift.spinors(s))
            omega = complex(overlap / abs(overlap))
        data.append(IntersectionDatum(s, t, SpherePoint.from_vector(x), angle, orientation, omega))
    return data


def _split_by_orientation(intersections: Sequence[IntersectionDatum]):
    if len(intersections) != 2:
        raise IntersectionError(f"a lune needs exactly 2 intersections, got {len(intersections)}")
    positive = [d for d in intersections if d.orientation == 1]
    negative = [d for d in intersections if d.orientation == -1]
    if len(positive) != 1 or len(negative) != 1:
        raise IntersectionError("lune corners must have opposite orientations")
    return positive[0], negative[0]


def _arc_bounds(start: float, end: float, period: float) -> Tuple[float, float, int]:
    """Forward parameter interval from start to end, and whether it wraps."""
    if end >= start:
        return start, end, 0
    return start, end + period, 1


def lune_chart(heights: np.ndarray) -> str:
    """Chart whose singular pole lies farthest from boundary samples at these heights.

    The north chart is singular at z = -1 and the south chart at z = +1.

    Raises:
        GeometryError: if the samples come within POLE_GAP of both poles.
    """
    south_gap = 1.0 + float(np.min(heights))
    north_gap = 1.0 - float(np.max(heights))
    if max(south_gap, north_gap) < POLE_GAP:
        raise GeometryError("lune boundary passes through both poles; no regular chart")
    return "north" if south_gap >= north_gap else "south"


def lune_area(gamma: Loop, sigma: Loop, intersections: Sequence[IntersectionDatum]) -> float:
    """Area of the lune to the right of gamma and to the left of sigma.

    The boundary runs forward along sigma from the negative corner n to
    the positive corner p, then backward along gamma from p to n; the
    (1 - cos theta) dphi integral over it is taken modulo 4*pi.

    Raises:
        IntersectionError: unless there are exactly two corners of
            opposite orientation.
        GeometryError: if the side test contradicts the orientations.
    """
    p, n = _split_by_orientation(intersections)
    t0, t1, _ = _arc_bounds(n.t, p.t, sigma.period)
    s0, s1, _ = _arc_bounds(n.s, p.s, gamma.period)

    mid_sigma = sigma.points(0.5 * (t0 + t1))
    mid_gamma = gamma.points(0.5 * (s0 + s1))
    if side_of_loop(gamma, mid_sigma) != -1 or side_of_loop(sigma, mid_gamma) != 1:
        raise GeometryError("lune side test disagrees with corner orientations")

    samples = np.concatenate([
        sigma.points(np.linspace(t0, t1, 257))[..., 2],
        gamma.points(np.linspace(s0, s1, 257))[..., 2],
    ])
    chart = lune_chart(samples)

    def arc_integral(loop: Loop, a: float, b: float) -> float:
        value, _ = integrate.quad(
            lambda u: float(2.0 * _alpha_rate(loop.points(u), loop.velocities(u), chart)),
            a, b, limit=200, epsabs=1e-14, epsrel=1e-13,
        )
        return value

    total = arc_integral(sigma, t0, t1) - arc_integral(gamma, s0, s1)
    area = float(np.mod(total, 4.0 * np.pi))
    logger.debug(f"lune area {area:.12f} ({chart} chart)")
    return area


def lune_transport_defect(
    gamma: Loop,
    sigma: Loop,
    intersections: Sequence[IntersectionDatum],
    area: float,
) -> float:
    """|(w_n/w_p) * seam corrections - e^{-iA/2}| around the lune boundary.

    Lifts are defined on [0, T), so an arc running across the parameter
    origin picks up that loop's holonomy.
    """
    p, n = _split_by_orientation(intersections)
    if p.relative_phase is None or n.relative_phase is None:
        raise GeometryError("relative phases are required; pass lifts to find_intersections")
    _, _, wraps_sigma = _arc_bounds(n.t, p.t, sigma.period)
    _, _, wraps_gamma = _arc_bounds(n.s, p.s, gamma.period)
    ratio = n.relative_phase / p.relative_phase
    ratio *= holonomy(sigma) ** wraps_sigma * holonomy(gamma) ** (-wraps_gamma)
    return float(abs(ratio - np.exp(-0.5j * area)))


def parallelepiped_volume(beta: float, p) -> float:
    """det[z, R_y(beta) z, p]; equals sin(beta) * y(p)."""
    v = np.asarray(getattr(p, "vector", p), dtype=float)
    z_rot = np.array([np.sin(beta), 0.0, np.cos(beta)])
    return float(np.linalg.det(np.column_stack([Z_AXIS, z_rot, v])))
