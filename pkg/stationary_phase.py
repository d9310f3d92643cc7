"""Leading-order stationary phase for integrals over a 2-torus.

Integrals have the form

    I(k) = int int f(s, t) e^{i k S(s, t)} ds dt

over a fundamental domain [s0, s0 + T_s) x [t0, t0 + T_t). The phase may be
complex with Im S >= 0; only points where dS = 0 and Im S = 0 contribute at
leading order. Re S is only meaningful modulo 2*pi, which is all e^{ikS}
sees for integer k, so finite differences wrap it.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)


class StationaryPointError(RuntimeError):
    """Raised when the critical-point search fails."""


class DegenerateCriticalPointError(StationaryPointError):
    """Raised for a critical point with a (numerically) singular Hessian."""


class QuadratureError(RuntimeError):
    """Raised when the quadrature oracle hits its node cap; carries the last change."""

    def __init__(self, message: str, defect: float):
        super().__init__(message)
        self.defect = defect


EPS = np.finfo(float).eps
GRADIENT_TOL = 1e-10
RIDGE_TOL = 1e-8
EIGEN_TOL = 1e-10
SEED_THRESHOLD = 0.5
MAX_SEEDS = 64
NEWTON_MAX_ITER = 60
DEDUPE_RESOLUTION = 1e-6
ORACLE_TOL = 1e-9
ORACLE_MAX_NODES = 1 << 13
ORACLE_TILE_ROWS = 256
PHASE_FLOOR = -1e-12

PhaseFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


def principal_arg(z) -> np.ndarray:
    """Argument in (-pi, pi]; -pi (from a negative real with -0 imaginary part) maps to pi."""
    angle = np.angle(z)
    return np.where(angle <= -np.pi, np.pi, angle)


def _wrap_real(delta: np.ndarray) -> np.ndarray:
    """Wrap the real part of a phase difference into (-pi, pi]."""
    real = np.real(delta)
    wrapped = real - 2.0 * np.pi * np.round(real / (2.0 * np.pi))
    return wrapped + 1j * np.imag(delta)


@dataclass(frozen=True, eq=False)
class TorusIntegrand:
    """Phase S and amplitude f on a torus, both vectorised over (s, t) arrays.

    ``gradient`` and ``hessian``, when given, return complex arrays of
    shape (2,) and (2, 2) at a single point; finite differences are used
    otherwise.
    """
    phase: PhaseFn
    amplitude: PhaseFn
    periods: Tuple[float, float]
    origin: Tuple[float, float] = (0.0, 0.0)
    analytic: bool = True
    gradient: Optional[Callable[[float, float], np.ndarray]] = None
    hessian: Optional[Callable[[float, float], np.ndarray]] = None
    name: str = ""

    def __post_init__(self):
        if min(self.periods) <= 0:
            raise ValueError(f"periods must be positive, got {self.periods}")
        s, t = self.mesh(32, 32)
        floor = float(np.min(np.imag(self.phase(s, t))))
        if floor < PHASE_FLOOR:
            raise ValueError(f"phase has Im S = {floor:.3e} < 0; |e^(iS)| would exceed 1")

    def mesh(self, ns: int, nt: int) -> Tuple[np.ndarray, np.ndarray]:
        s = self.origin[0] + self.periods[0] * np.arange(ns) / ns
        t = self.origin[1] + self.periods[1] * np.arange(nt) / nt
        return np.meshgrid(s, t, indexing="ij")

    def values(self, s, t, k: int) -> np.ndarray:
        return self.amplitude(s, t) * np.exp(1j * k * self.phase(s, t))

    def wrap(self, s: float, t: float) -> Tuple[float, float]:
        (s0, t0), (ts, tt) = self.origin, self.periods
        return float(s0 + np.mod(s - s0, ts)), float(t0 + np.mod(t - t0, tt))

    def conjugate(self) -> "TorusIntegrand":
        """The integrand conj(f e^{ikS}), i.e. amplitude conj(f) and phase -conj(S)."""
        gradient = (lambda s, t: -np.conj(self.gradient(s, t))) if self.gradient else None
        hessian = (lambda s, t: -np.conj(self.hessian(s, t))) if self.hessian else None
        return TorusIntegrand(
            lambda s, t: -np.conj(self.phase(s, t)),
            lambda s, t: np.conj(self.amplitude(s, t)),
            self.periods, self.origin, self.analytic, gradient, hessian,
            f"conj({self.name})" if self.name else "",
        )


@dataclass(frozen=True, eq=False)
class CriticalPoint:
    location: Tuple[float, float]
    phase_value: complex
    amplitude_value: complex
    hessian: np.ndarray
    eigenvalues: np.ndarray
    principal_args: np.ndarray
    gradient_norm: float = field(default=0.0)

    @property
    def determinant(self) -> complex:
        return complex(np.linalg.det(self.hessian))


# ── derivatives ──

def _offset_values(integrand: TorusIntegrand, s: float, t: float,
                   offsets: np.ndarray) -> np.ndarray:
    """S at (s, t) + offsets relative to S(s, t), real parts wrapped."""
    centre = integrand.phase(np.asarray(s), np.asarray(t))
    values = integrand.phase(s + offsets[:, 0], t + offsets[:, 1])
    return _wrap_real(values - centre)


def _gradient_fd(integrand: TorusIntegrand, s: float, t: float, h: float) -> np.ndarray:
    def central(step):
        offsets = np.array([[step, 0.0], [-step, 0.0], [0.0, step], [0.0, -step]])
        d = _offset_values(integrand, s, t, offsets)
        return np.array([d[0] - d[1], d[2] - d[3]]) / (2.0 * step)

    coarse, fine = central(h), central(0.5 * h)
    return (4.0 * fine - coarse) / 3.0


def _hessian_fd(integrand: TorusIntegrand, s: float, t: float, h: float) -> np.ndarray:
    def second(step):
        offsets = np.array([
            [step, 0.0], [-step, 0.0], [0.0, step], [0.0, -step],
            [step, step], [step, -step], [-step, step], [-step, -step],
        ])
        d = _offset_values(integrand, s, t, offsets)
        ss = (d[0] + d[1]) / step ** 2
        tt = (d[2] + d[3]) / step ** 2
        st = (d[4] - d[5] - d[6] + d[7]) / (4.0 * step ** 2)
        return np.array([[ss, st], [st, tt]])

    coarse, fine = second(h), second(0.5 * h)
    return (4.0 * fine - coarse) / 3.0


def phase_gradient(integrand: TorusIntegrand, s: float, t: float) -> np.ndarray:
    """Complex gradient of S; Richardson-extrapolated central differences by default."""
    if integrand.gradient is not None:
        return np.asarray(integrand.gradient(s, t), dtype=complex)
    return _gradient_fd(integrand, s, t, EPS ** (1.0 / 3.0) * max(integrand.periods))


def phase_hessian(integrand: TorusIntegrand, s: float, t: float) -> np.ndarray:
    if integrand.hessian is not None:
        return np.asarray(integrand.hessian(s, t), dtype=complex)
    scale = max(integrand.periods) / (2.0 * np.pi)
    return _hessian_fd(integrand, s, t, EPS ** 0.2 * scale)


# ── critical points ──

def _grid_seeds(integrand: TorusIntegrand, grid: int) -> List[Tuple[float, float]]:
    s, t = integrand.mesh(grid, grid)
    phase = integrand.phase(s, t)
    ds, dt = integrand.periods[0] / grid, integrand.periods[1] / grid
    grad_s = _wrap_real(np.roll(phase, -1, axis=0) - np.roll(phase, 1, axis=0)) / (2.0 * ds)
    grad_t = _wrap_real(np.roll(phase, -1, axis=1) - np.roll(phase, 1, axis=1)) / (2.0 * dt)
    imag = np.imag(phase)
    merit = imag + np.abs(grad_s) ** 2 + np.abs(grad_t) ** 2
    is_min = imag < SEED_THRESHOLD
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di or dj:
                is_min &= merit <= np.roll(np.roll(merit, di, axis=0), dj, axis=1)
    rows, cols = np.nonzero(is_min)
    order = np.argsort(merit[rows, cols])[:MAX_SEEDS]
    return [(float(s[rows[i], cols[i]]), float(t[rows[i], cols[i]])) for i in order]


def _newton(integrand: TorusIntegrand, s: float, t: float) -> Tuple[float, float]:
    """Gauss-Newton on the complex gradient, as four real equations in (s, t)."""
    limit = 1e-14 * max(integrand.periods)
    for _ in range(NEWTON_MAX_ITER):
        grad = phase_gradient(integrand, s, t)
        hess = phase_hessian(integrand, s, t)
        jac = np.vstack([hess.real, hess.imag])
        rhs = -np.concatenate([grad.real, grad.imag])
        step, *_ = np.linalg.lstsq(jac, rhs, rcond=None)
        if not np.all(np.isfinite(step)):
            break
        s, t = s + step[0], t + step[1]
        if np.linalg.norm(step) < limit:
            break
    return s, t


def _critical_point(integrand: TorusIntegrand, s: float, t: float) -> CriticalPoint:
    hess = phase_hessian(integrand, s, t)
    eigenvalues = np.linalg.eigvals(hess)
    if np.min(np.abs(eigenvalues)) < EIGEN_TOL:
        raise DegenerateCriticalPointError(
            f"degenerate Hessian at ({s:.10f}, {t:.10f}): eigenvalues {eigenvalues}"
        )
    return CriticalPoint(
        location=(s, t),
        phase_value=complex(integrand.phase(np.asarray(s), np.asarray(t))),
        amplitude_value=complex(integrand.amplitude(np.asarray(s), np.asarray(t))),
        hessian=hess,
        eigenvalues=eigenvalues,
        principal_args=principal_arg(eigenvalues),
        gradient_norm=float(np.linalg.norm(phase_gradient(integrand, s, t))),
    )


def find_stationary_points(integrand: TorusIntegrand, grid: int = 128) -> List[CriticalPoint]:
    """Points with dS = 0 and Im S = 0, ordered by location.

    Seeds are grid local minima of Im S + |dS|^2 with Im S below 0.5; each
    is Newton-refined and kept if the gradient vanishes and the integrand
    magnitude is maximal there.

    Raises:
        DegenerateCriticalPointError: if an accepted point has a singular Hessian.
        StationaryPointError: if seeds lay on the |e^(iS)| = 1 ridge but
            none converged.
    """
    seeds = _grid_seeds(integrand, grid)
    logger.debug(f"stationary-point search: {len(seeds)} seed(s) on a {grid}x{grid} grid")
    found = {}
    ridge_seeds = 0
    for s0, t0 in seeds:
        if float(np.imag(integrand.phase(np.asarray(s0), np.asarray(t0)))) < 10.0 / grid:
            ridge_seeds += 1
        s, t = _newton(integrand, s0, t0)
        if not (np.isfinite(s) and np.isfinite(t)):
            continue
        s, t = integrand.wrap(s, t)
        grad_norm = float(np.linalg.norm(phase_gradient(integrand, s, t)))
        imag = float(np.imag(integrand.phase(np.asarray(s), np.asarray(t))))
        if grad_norm >= GRADIENT_TOL or imag >= RIDGE_TOL:
            continue
        key = (round(s / DEDUPE_RESOLUTION), round(t / DEDUPE_RESOLUTION))
        if key not in found:
            found[key] = _critical_point(integrand, s, t)
    if ridge_seeds and not found:
        raise StationaryPointError(
            f"Newton failed from all {ridge_seeds} seed(s) near the |e^(iS)| = 1 ridge"
        )
    return sorted(found.values(), key=lambda p: p.location)


def _resolve_amplitudes(points: Sequence[CriticalPoint], f_values) -> np.ndarray:
    if f_values is None:
        return np.array([p.amplitude_value for p in points], dtype=complex)
    f_values = np.asarray(f_values, dtype=complex).reshape(-1)
    if f_values.shape[0] != len(points):
        raise ValueError(f"{len(points)} points but {f_values.shape[0]} amplitude values")
    return f_values


def csp_leading_term(k: int, points: Sequence[CriticalPoint], f_values=None) -> complex:
    """(2*pi/k) sum f e^{ikS} |det H|^{-1/2} e^{i sum_j (pi/4 - alpha_j/2)}.

    ``f_values`` defaults to the amplitudes recorded on the points.
    """
    amplitudes = _resolve_amplitudes(points, f_values)
    total = 0.0 + 0.0j
    for point, f in zip(points, amplitudes):
        rotation = np.sum(np.pi / 4.0 - 0.5 * point.principal_args)
        weight = np.exp(1j * k * point.phase_value) / np.sqrt(abs(point.determinant))
        total += f * weight * np.exp(1j * rotation)
    return complex(2.0 * np.pi / k * total)


def real_phase_leading_term(k: int, points: Sequence[CriticalPoint], f_values=None) -> complex:
    """(2*pi/k) sum f e^{ikS} |det H|^{-1/2} e^{i pi sigma/4}, sigma the Hessian signature.

    Raises:
        ValueError: if a point has a non-real phase value or Hessian.
    """
    amplitudes = _resolve_amplitudes(points, f_values)
    total = 0.0 + 0.0j
    for point, f in zip(points, amplitudes):
        if abs(point.phase_value.imag) > 1e-12 or np.max(np.abs(point.hessian.imag)) > 1e-8:
            raise ValueError(f"phase is not real at {point.location}")
        eigenvalues = np.linalg.eigvalsh(point.hessian.real)
        signature = int(np.sum(eigenvalues > 0) - np.sum(eigenvalues < 0))
        weight = np.exp(1j * k * point.phase_value.real) / np.sqrt(abs(np.prod(eigenvalues)))
        total += f * weight * np.exp(1j * np.pi * signature / 4.0)
    return complex(2.0 * np.pi / k * total)


def leading_term(integrand: TorusIntegrand, k: int, grid: int = 128) -> Tuple[complex, List[CriticalPoint]]:
    points = find_stationary_points(integrand, grid)
    return csp_leading_term(k, points), points


# ── quadrature oracle and field dumps ──

def _tile_sum(integrand: TorusIntegrand, k: int, s: np.ndarray, t: np.ndarray) -> complex:
    ss, tt = np.meshgrid(s, t, indexing="ij")
    return complex(np.sum(integrand.values(ss, tt, k)))


def _trapezoid_2d(integrand: TorusIntegrand, k: int, nodes: int, workers: int) -> complex:
    (s0, t0), (ts, tt) = integrand.origin, integrand.periods
    s = s0 + ts * np.arange(nodes) / nodes
    t = t0 + tt * np.arange(nodes) / nodes
    tiles = [s[i:i + ORACLE_TILE_ROWS] for i in range(0, nodes, ORACLE_TILE_ROWS)]
    if workers > 1 and len(tiles) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            partial = list(pool.map(lambda rows: _tile_sum(integrand, k, rows, t), tiles))
    else:
        partial = [_tile_sum(integrand, k, rows, t) for rows in tiles]
    # fixed summation order keeps the result independent of the worker count
    return complex(np.sum(partial)) * ts * tt / nodes ** 2


def quadrature_oracle(
    integrand: TorusIntegrand,
    k: int,
    nodes: Optional[int] = None,
    tol: float = ORACLE_TOL,
    max_nodes: int = ORACLE_MAX_NODES,
    workers: int = 1,
) -> complex:
    """Tensor trapezoid rule with node doubling.

    Starts at max(64, 8k) nodes per axis unless ``nodes`` is given and
    returns once doubling changes the value by less than tol * max(1, |I|).

    Raises:
        QuadratureError: if ``max_nodes`` is reached first.
    """
    nodes = nodes if nodes is not None else max(64, 8 * k)
    current = _trapezoid_2d(integrand, k, nodes, workers)
    change = float("nan")
    while 2 * nodes <= max_nodes:
        refined = _trapezoid_2d(integrand, k, 2 * nodes, workers)
        change = abs(refined - current)
        nodes *= 2
        current = refined
        logger.debug(f"oracle k={k}: {nodes}^2 nodes, change {change:.3e}")
        if change < tol * max(1.0, abs(current)):
            return current
    raise QuadratureError(
        f"quadrature did not converge by {nodes} nodes per axis (last change {change:.3e})",
        float(change),
    )


@dataclass(frozen=True, eq=False)
class TorusField:
    s: np.ndarray
    t: np.ndarray
    magnitude: np.ndarray
    phase: np.ndarray

    def rows(self):
        for row in zip(self.s.ravel(), self.t.ravel(), self.magnitude.ravel(), self.phase.ravel()):
            yield tuple(float(v) for v in row)


def torus_field(integrand: TorusIntegrand, k: int, grid: Tuple[int, int]) -> TorusField:
    """Magnitude and principal phase of f e^{ikS} on an ns x nt grid."""
    ns, nt = grid
    s, t = integrand.mesh(ns, nt)
    values = integrand.values(s, t, k)
    return TorusField(s, t, np.abs(values), principal_arg(values))
