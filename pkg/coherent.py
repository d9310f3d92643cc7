"""Coherent states, the Bergman kernel, and coherent loop states on S^2."""

import logging
import threading
from dataclasses import dataclass
from typing import Dict, Hashable, Optional, Tuple

import numpy as np
from scipy.special import gammaln, xlogy

from hopf import (
    ARCLENGTH_SCALE,
    HopfPoint,
    LiftedLoop,
    SpherePoint,
    constant_height_loop,
    great_circle_distance,
    holonomy,
    standard_lift,
)
from su2rep import RepLevel, RepVector, as_spinor, magnetic_index, monomial_table

logger = logging.getLogger(__name__)


class BohrSommerfeldError(ValueError):
    """Raised when a loop's holonomy^k is not 1; carries the measured defect."""

    def __init__(self, message: str, defect: float):
        super().__init__(message)
        self.defect = defect


class LoopStateConvergenceError(RuntimeError):
    """Raised when trapezoid doubling hits the node cap before converging."""

    def __init__(self, message: str, defect: float):
        super().__init__(message)
        self.defect = defect


BOHR_SOMMERFELD_TOL = 1e-8
QUADRATURE_TOL = 1e-10
MIN_NODES = 64
MAX_NODES = 1 << 18


@dataclass(frozen=True, eq=False)
class CoherentSpec:
    level: RepLevel
    base: HopfPoint


@dataclass(frozen=True, eq=False)
class LoopStateSpec:
    """A Bohr-Sommerfeld lifted loop at level k.

    ``nodes`` is the starting node count for trapezoid doubling; the
    default is max(64, 4k).
    """
    level: RepLevel
    lifted: LiftedLoop
    nodes: Optional[int] = None
    tol: float = BOHR_SOMMERFELD_TOL

    def __post_init__(self):
        if self.nodes is not None and self.nodes < 2:
            raise ValueError(f"nodes must be >= 2, got {self.nodes}")
        defect = holonomy_defect(self.lifted, self.level.k)
        if defect >= self.tol:
            raise BohrSommerfeldError(
                f"loop is not Bohr-Sommerfeld at k={self.level.k}: "
                f"|Hol^k - 1| = {defect:.3e}",
                defect,
            )

    @property
    def start_nodes(self) -> int:
        return self.nodes if self.nodes is not None else max(MIN_NODES, 4 * self.level.k)


@dataclass(frozen=True, eq=False)
class LoopStateResult:
    vector: RepVector
    nodes: int
    pole_substitute: bool
    holonomy_defect: float


def holonomy_defect(lifted: LiftedLoop, k: int) -> float:
    """|Hol^k - 1| for the base loop of a lift."""
    return float(abs(holonomy(lifted.base) ** k - 1.0))


# ── coherent states and the Bergman kernel ──

def coherent_state(spec: CoherentSpec) -> RepVector:
    """psi_p = sum_a conj(e_a[p]) e_a."""
    coeffs = np.conj(monomial_table(spec.base, spec.level.k))
    return RepVector(spec.level, coeffs)


def coherent_state_norm(level: RepLevel) -> float:
    """<psi_p, psi_p> = (k+1)/(2*pi) for every unit p."""
    return (level.k + 1) / (2.0 * np.pi)


def normalized_coherent_state(spec: CoherentSpec) -> RepVector:
    return coherent_state(spec).scaled(1.0 / np.sqrt(coherent_state_norm(spec.level)))


def coherent_inner(level: RepLevel, p, q) -> complex:
    """<psi_p, psi_q> = (k+1)/(2*pi) <q, p>^k."""
    return complex(coherent_inner_array(level, p, q))


def coherent_inner_array(level: RepLevel, p, q) -> np.ndarray:
    """Broadcasting form of coherent_inner over spinor arrays (..., 2)."""
    overlap = np.sum(np.conj(as_spinor(q)) * as_spinor(p), axis=-1)
    return coherent_state_norm(level) * overlap ** level.k


def bergman_magnitude(level: RepLevel, x: SpherePoint, y: SpherePoint) -> float:
    """(k+1)/(2*pi) cos^k(d(x, y)/2)."""
    half = 0.5 * great_circle_distance(x, y)
    return float(coherent_state_norm(level) * np.cos(half) ** level.k)


# ── loop states ──

_cache: Dict[Tuple[int, Hashable, int], LoopStateResult] = {}
_cache_lock = threading.Lock()


def clear_loop_state_cache() -> None:
    with _cache_lock:
        _cache.clear()


def _trapezoid(lifted: LiftedLoop, k: int, nodes: int) -> np.ndarray:
    period = lifted.base.period
    t = np.linspace(0.0, period, nodes, endpoint=False)
    table = np.conj(monomial_table(lifted.spinors(t), k))
    return table.sum(axis=0) * (period / nodes)


def loop_state_details(spec: LoopStateSpec) -> LoopStateResult:
    """Psi = int_0^T psi_{lift(t)} dt by trapezoid doubling.

    Degenerate (point) loops return the coherent state at the lift's
    base vector and set ``pole_substitute``.

    Raises:
        LoopStateConvergenceError: if doubling reaches MAX_NODES first.
    """
    lifted = spec.lifted
    k = spec.level.k
    defect = holonomy_defect(lifted, k)

    cache_key = None
    if lifted.key is not None:
        cache_key = (k, lifted.key, spec.start_nodes)
        with _cache_lock:
            cached = _cache.get(cache_key)
        if cached is not None:
            logger.debug(f"loop state cache hit for k={k}")
            return cached

    if lifted.base.is_degenerate:
        logger.warning(f"point loop at k={k}: substituting the coherent state at the pole")
        base = HopfPoint.from_array(lifted.spinors(0.0))
        vector = coherent_state(CoherentSpec(spec.level, base))
        result = LoopStateResult(vector, 0, True, defect)
    else:
        nodes = spec.start_nodes
        current = _trapezoid(lifted, k, nodes)
        while True:
            if 2 * nodes > MAX_NODES:
                raise LoopStateConvergenceError(
                    f"loop state did not converge by {nodes} nodes", float("nan")
                )
            refined = _trapezoid(lifted, k, 2 * nodes)
            change = float(np.linalg.norm(refined - current))
            nodes *= 2
            current = refined
            logger.debug(f"loop state k={k}: {nodes} nodes, change {change:.3e}")
            if change < QUADRATURE_TOL * max(1.0, float(np.linalg.norm(current))):
                break
        result = LoopStateResult(RepVector(spec.level, current), nodes, False, defect)

    if cache_key is not None:
        with _cache_lock:
            _cache.setdefault(cache_key, result)
    return result


def loop_state_quadrature(spec: LoopStateSpec) -> RepVector:
    return loop_state_details(spec).vector


def constant_height_coefficient(level: RepLevel, m) -> float:
    """c_a = sqrt(pi (k+1) C(k, a)) sin^a(theta/2) cos^{k-a}(theta/2) sin(theta).

    Zero at the poles, where the loop degenerates to a point.
    """
    k = level.k
    a = magnetic_index(level, m)
    if a == 0 or a == k:
        return 0.0
    z = 1.0 - 2.0 * a / k
    sin_half_sq = 0.5 * (1.0 - z)
    cos_half_sq = 0.5 * (1.0 + z)
    log_c = 0.5 * (np.log(np.pi * (k + 1)) + gammaln(k + 1) - gammaln(a + 1) - gammaln(k - a + 1))
    log_c += 0.5 * (xlogy(a, sin_half_sq) + xlogy(k - a, cos_half_sq))
    log_c += 0.5 * np.log1p(-z * z)
    return float(np.exp(log_c))


def constant_height_state(level: RepLevel, m) -> RepVector:
    """c_a e_a for the standard lift at height 2m/k; pole heights give the coherent state."""
    a = magnetic_index(level, m)
    coeffs = np.zeros(level.dim, dtype=complex)
    if a == 0 or a == level.k:
        base = np.array([0.0, 1.0]) if a == 0 else np.array([1.0, 0.0])
        return coherent_state(CoherentSpec(level, HopfPoint.from_array(base)))
    coeffs[a] = constant_height_coefficient(level, m)
    return RepVector(level, coeffs)


def standard_loop_spec(level: RepLevel, m, nodes: Optional[int] = None) -> LoopStateSpec:
    """LoopStateSpec for the standard lift of the constant-height loop at m."""
    return LoopStateSpec(level, standard_lift(constant_height_loop(level.k, m)), nodes)


def loop_arclength(theta: float) -> float:
    return float(2.0 * np.pi * np.sin(theta) * ARCLENGTH_SCALE)


# ── fibrewise norms ──

@dataclass(frozen=True, eq=False)
class NormField:
    """|v(x)| sampled on a (theta, phi) grid; arrays have shape (n_theta, n_phi)."""
    theta: np.ndarray
    phi: np.ndarray
    norm: np.ndarray

    def rows(self):
        for th, ph, val in zip(self.theta.ravel(), self.phi.ravel(), self.norm.ravel()):
            yield float(th), float(ph), float(val)


def _field_grid(n_theta: int, n_phi: int):
    if n_theta < 2 or n_phi < 2:
        raise ValueError(f"grid must be at least 2x2, got {n_theta}x{n_phi}")
    theta = np.linspace(0.0, np.pi, n_theta)
    phi = np.linspace(0.0, 2.0 * np.pi, n_phi, endpoint=False)
    th, ph = np.meshgrid(theta, phi, indexing="ij")
    spinors = np.stack([np.sin(th / 2) * np.exp(1j * ph), np.cos(th / 2) + 0j], axis=-1)
    return th, ph, spinors


def fibrewise_norm_field(v: RepVector, n_theta: int, n_phi: int) -> NormField:
    """|evaluate_section(v, u(x))| on a grid over [0, pi] x [0, 2*pi).

    The spinor (sin(theta/2) e^{i phi}, cos(theta/2)) is used at every
    grid point, including theta = pi where it is a unit vector over the
    south pole; norms do not depend on the fibre phase.
    """
    th, ph, spinors = _field_grid(n_theta, n_phi)
    values = monomial_table(spinors, v.level.k) @ v.coeffs
    return NormField(th, ph, np.abs(values))


@dataclass(frozen=True, eq=False)
class PairField:
    """(v(x), w(x))_x sampled on a (theta, phi) grid as magnitude and phase."""
    theta: np.ndarray
    phi: np.ndarray
    magnitude: np.ndarray
    phase: np.ndarray

    def rows(self):
        for row in zip(self.theta.ravel(), self.phi.ravel(),
                       self.magnitude.ravel(), self.phase.ravel()):
            yield tuple(float(val) for val in row)


def fibrewise_pair_field(v: RepVector, w: RepVector, n_theta: int, n_phi: int) -> PairField:
    """conj(v(x)) w(x) on the same grid as fibrewise_norm_field.

    Both sections are evaluated on one unit spinor per point, so the
    fibre phase cancels. Antilinear in v, like rep_inner.
    """
    if v.level.k != w.level.k:
        raise ValueError(f"levels differ: k={v.level.k} and k={w.level.k}")
    th, ph, spinors = _field_grid(n_theta, n_phi)
    table = monomial_table(spinors, v.level.k)
    values = np.conj(table @ v.coeffs) * (table @ w.coeffs)
    return PairField(th, ph, np.abs(values), np.angle(values))
