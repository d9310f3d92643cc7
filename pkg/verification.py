"""Invariant suites behind ``coherent-loops verify``.

Every check measures one defect (a non-negative number, smaller is
better) and passes when it is at most ``tolerance * tol_scale``. Checks
draw randomness from their own generator seeded by (seed, position), so
results do not depend on scheduling.
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional

import numpy as np
from scipy import integrate
from scipy.special import eval_legendre

from asymptotics import (
    allowed_window,
    bpu_inner_product_asym,
    common_angle,
    loop_pair_integrand,
    loop_state_inner_exact,
    standard_pair,
    torus_angles,
    warmup_hessian,
    warmup_integrand,
    wigner_d00_asym,
    wigner_d00_envelope,
    wigner_d_asym_ly,
)
from coherent import (
    CoherentSpec,
    LoopStateSpec,
    coherent_state,
    constant_height_coefficient,
    constant_height_state,
    loop_state_quadrature,
)
from config import Config
from hopf import (
    HopfPoint,
    Loop,
    LoopKind,
    circle_loop,
    constant_height_loop,
    find_intersections,
    holonomy,
    lune_area,
    lune_transport_defect,
    parallelepiped_volume,
    rotate_lift,
    rotate_loop,
    standard_lift,
    star_loop,
    transport_defect,
)
from stationary_phase import (
    TorusIntegrand,
    find_stationary_points,
    leading_term,
    phase_hessian,
    quadrature_oracle,
)
from su2rep import (
    RepLevel,
    SU2Element,
    act,
    evaluate_section,
    jz_apply,
    magnetic_numbers,
    random_vector,
    rep_inner,
    wigner_d_exact,
    wigner_d_matrix,
)

logger = logging.getLogger(__name__)


MAX_RANDOM_LEVEL = 60
SADDLE_TARGET = (2.24, 0.43)


@dataclass(frozen=True)
class CheckContext:
    rng: np.random.Generator
    trials: int
    lift_sign: int


@dataclass(frozen=True)
class Check:
    name: str
    tolerance: float
    measure: Callable[[CheckContext], float]


@dataclass
class CheckOutcome:
    name: str
    passed: bool
    defect: float
    tolerance: float
    seconds: float
    error: str = ""

    def to_dict(self) -> Dict[str, Any]:
        out = {
            "name": self.name,
            "passed": self.passed,
            "defect": self.defect if np.isfinite(self.defect) else None,
            "tolerance": self.tolerance,
            "seconds": round(self.seconds, 6),
        }
        if self.error:
            out["error"] = self.error
        return out


# ---------------------------------------------------------------------------
# Random inputs
# ---------------------------------------------------------------------------

def _random_level(rng: np.random.Generator, low: int = 1) -> RepLevel:
    return RepLevel(int(rng.integers(low, MAX_RANDOM_LEVEL + 1)))


def _random_point(rng: np.random.Generator) -> HopfPoint:
    q = rng.normal(size=2) + 1j * rng.normal(size=2)
    return HopfPoint.from_array(q / np.linalg.norm(q))


def _relative(a, b) -> float:
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b)) / max(1.0, float(np.max(np.abs(b)))))


def _random_allowed_config(rng: np.random.Generator):
    """(j, m1, m2, beta) with beta inside the middle of the allowed window."""
    while True:
        k = 2 * int(rng.integers(10, 41))
        j = k / 2
        m1, m2 = (float(m) for m in rng.integers(-int(j) + 1, int(j), size=2))
        lo, hi = allowed_window(j, m1, m2)
        if hi - lo > 0.05:
            return j, m1, m2, lo + (0.1 + 0.8 * rng.random()) * (hi - lo)


# ---------------------------------------------------------------------------
# Representation
# ---------------------------------------------------------------------------

def _act_unitarity(ctx: CheckContext) -> float:
    worst = 0.0
    for _ in range(ctx.trials):
        level = _random_level(ctx.rng)
        g = SU2Element.random(ctx.rng)
        v, w = random_vector(level, ctx.rng), random_vector(level, ctx.rng)
        worst = max(worst, abs(rep_inner(act(g, v), act(g, w)) - rep_inner(v, w)))
    return worst


def _act_homomorphism(ctx: CheckContext) -> float:
    worst = 0.0
    for _ in range(ctx.trials):
        level = _random_level(ctx.rng)
        g, h = SU2Element.random(ctx.rng), SU2Element.random(ctx.rng)
        v = random_vector(level, ctx.rng)
        worst = max(worst, _relative(act(g @ h, v).coeffs, act(g, act(h, v)).coeffs))
    return worst


def _evaluation_equivariance(ctx: CheckContext) -> float:
    worst = 0.0
    for _ in range(ctx.trials):
        level = _random_level(ctx.rng)
        g = SU2Element.random(ctx.rng)
        v, p = random_vector(level, ctx.rng), _random_point(ctx.rng)
        moved = HopfPoint.from_array(g.apply(p))
        worst = max(worst, _relative(evaluate_section(act(g, v), moved), evaluate_section(v, p)))
    return worst


def _wigner_unitarity(ctx: CheckContext) -> float:
    worst = 0.0
    for k in range(0, 61):
        d = wigner_d_matrix(RepLevel(k), float(ctx.rng.uniform(0.0, np.pi)))
        worst = max(worst, float(np.max(np.abs(d.T @ d - np.eye(k + 1)))))
    return worst


def _wigner_composition(ctx: CheckContext) -> float:
    worst = 0.0
    for _ in range(ctx.trials):
        level = _random_level(ctx.rng, low=0)
        b1, b2 = ctx.rng.uniform(-np.pi, np.pi, size=2)
        product = wigner_d_matrix(level, b1) @ wigner_d_matrix(level, b2)
        worst = max(worst, _relative(product, wigner_d_matrix(level, b1 + b2)))
    return worst


def _jz_generator(ctx: CheckContext) -> float:
    step = 1e-5
    worst = 0.0
    for _ in range(ctx.trials):
        level = _random_level(ctx.rng)
        v = random_vector(level, ctx.rng)
        forward = act(SU2Element.rotation_z(step), v).coeffs
        backward = act(SU2Element.rotation_z(-step), v).coeffs
        derivative = (forward - backward) / (2.0 * step)
        worst = max(worst, _relative(derivative, 1j * jz_apply(v).coeffs))
    return worst


def _legendre_d00(ctx: CheckContext) -> float:
    worst = 0.0
    for j in range(0, 31):
        beta = float(ctx.rng.uniform(0.0, np.pi))
        exact = wigner_d_exact(RepLevel(2 * j), 0, 0, beta)
        worst = max(worst, abs(exact - float(eval_legendre(j, np.cos(beta)))))
    return worst


# ---------------------------------------------------------------------------
# Coherent and loop states
# ---------------------------------------------------------------------------

def _reproducing_property(ctx: CheckContext) -> float:
    worst = 0.0
    for _ in range(ctx.trials):
        level = _random_level(ctx.rng)
        s, p = random_vector(level, ctx.rng), _random_point(ctx.rng)
        psi = coherent_state(CoherentSpec(level, p))
        worst = max(worst, _relative(rep_inner(psi, s), evaluate_section(s, p)))
    return worst


def _basepoint_norm(ctx: CheckContext) -> float:
    worst = 0.0
    for _ in range(ctx.trials):
        level = _random_level(ctx.rng)
        p = _random_point(ctx.rng)
        psi = coherent_state(CoherentSpec(level, p))
        worst = max(worst, _relative(abs(evaluate_section(psi, p)), rep_inner(psi, psi).real))
    return worst


def _coherent_equivariance(ctx: CheckContext) -> float:
    worst = 0.0
    for _ in range(ctx.trials):
        level = _random_level(ctx.rng)
        g, p = SU2Element.random(ctx.rng), _random_point(ctx.rng)
        moved = coherent_state(CoherentSpec(level, HopfPoint.from_array(g.apply(p))))
        worst = max(worst, _relative(act(g, coherent_state(CoherentSpec(level, p))).coeffs,
                                     moved.coeffs))
    return worst


def _eigenstate_property(ctx: CheckContext) -> float:
    worst = 0.0
    for _ in range(ctx.trials):
        level = _random_level(ctx.rng, low=2)
        m = float(ctx.rng.choice(magnetic_numbers(level)[1:-1]))
        angle = float(ctx.rng.uniform(-np.pi, np.pi))
        state = constant_height_state(level, m)
        rotated = act(SU2Element.rotation_z(angle), state)
        worst = max(worst, _relative(rotated.coeffs, np.exp(1j * m * angle) * state.coeffs))
    return worst


def _closed_form_loop_state(ctx: CheckContext) -> float:
    worst = 0.0
    for k in (10, 30, 50):
        level = RepLevel(k)
        for m in magnetic_numbers(level)[1:-1]:
            loop = constant_height_loop(k, float(m))
            spec = LoopStateSpec(level, standard_lift(loop, float(ctx.lift_sign)))
            quadrature = loop_state_quadrature(spec).coeffs
            closed = constant_height_state(level, float(m)).coeffs
            c = constant_height_coefficient(level, float(m))
            worst = max(worst, float(np.linalg.norm(quadrature - closed)) / c)
    return worst


def _rotated_loop_state(ctx: CheckContext) -> float:
    worst = 0.0
    for _ in range(max(1, ctx.trials // 20)):
        k = int(ctx.rng.integers(4, 31))
        level = RepLevel(k)
        m = float(ctx.rng.choice(magnetic_numbers(level)[1:-1]))
        lifted = standard_lift(constant_height_loop(k, m))
        g = SU2Element.rotation_y(float(ctx.rng.uniform(0.1, 3.0)))
        direct = loop_state_quadrature(LoopStateSpec(level, rotate_lift(lifted, g))).coeffs
        moved = act(g, loop_state_quadrature(LoopStateSpec(level, lifted))).coeffs
        worst = max(worst, _relative(direct, moved))
    return worst


def _exchange_of_integrals(ctx: CheckContext) -> float:
    k, m2, m1, beta = 20, 5.0, 3.0, 1.1
    level = RepLevel(k)
    gamma, sigma = standard_pair(k, m2, m1, beta)
    inner = rep_inner(loop_state_quadrature(LoopStateSpec(level, gamma)),
                      loop_state_quadrature(LoopStateSpec(level, sigma)))
    oracle = quadrature_oracle(loop_pair_integrand(gamma, sigma, k), k)
    return _relative(oracle, inner)


# ---------------------------------------------------------------------------
# Geometry
# ---------------------------------------------------------------------------

def _u_z_transport(ctx: CheckContext) -> float:
    worst = 0.0
    k = 50
    for _ in range(ctx.trials):
        m = float(ctx.rng.integers(-24, 25))
        lifted = standard_lift(constant_height_loop(k, m), float(ctx.lift_sign))
        speed = lifted.base.circle.angular_speed
        t = float(ctx.rng.uniform(0.0, lifted.base.period))
        shift = float(ctx.rng.uniform(-np.pi, np.pi))
        left = SU2Element.rotation_z(shift).apply(lifted.spinors(t))
        right = np.exp(-0.5j * (2.0 * m / k) * shift) * lifted.spinors(t + shift / speed)
        worst = max(worst, float(np.max(np.abs(left - right))))
    return worst


def _standard_lift_horizontal(ctx: CheckContext) -> float:
    return max(
        transport_defect(standard_lift(constant_height_loop(50, float(m)), float(ctx.lift_sign)))
        for m in range(-20, 21)
    )


def _bohr_sommerfeld_heights(ctx: CheckContext) -> float:
    worst = 0.0
    for k in range(1, 61):
        for m in magnetic_numbers(RepLevel(k))[1:-1]:
            worst = max(worst, abs(holonomy(constant_height_loop(k, float(m))) ** k - 1.0))
    return worst


def _strip_circle(loop: Loop) -> Loop:
    return Loop(loop.evaluator, loop.period, LoopKind.GENERAL_SMOOTH, loop.velocity)


def _holonomy_area_circles(ctx: CheckContext) -> float:
    worst = 0.0
    for _ in range(30):
        theta = float(ctx.rng.uniform(0.1, 1.4))
        spin = SU2Element.rotation_z(float(ctx.rng.uniform(0.0, 2.0 * np.pi))) @ \
            SU2Element.rotation_y(float(ctx.rng.uniform(0.0, 1.2)))
        loop = _strip_circle(circle_loop(theta, spin))
        area = 2.0 * np.pi * integrate.quad(np.sin, 0.0, theta, epsabs=1e-14)[0]
        worst = max(worst, abs(holonomy(loop) - np.exp(-0.5j * area)))
    return worst


def _holonomy_area_stars(ctx: CheckContext) -> float:
    worst = 0.0
    for _ in range(10):
        r0 = float(ctx.rng.uniform(0.6, 1.2))
        coefficients = ctx.rng.uniform(-0.08, 0.08, size=(3, 2))
        orders = np.arange(1, 4)

        def profile(phi, coefficients=coefficients, r0=r0):
            return r0 + float(np.sum(coefficients[:, 0] * np.cos(orders * phi)
                                     + coefficients[:, 1] * np.sin(orders * phi)))

        loop = star_loop(r0, [tuple(c) for c in coefficients])
        area, _ = integrate.dblquad(
            lambda theta, phi: np.sin(theta), 0.0, 2.0 * np.pi, 0.0, profile,
            epsabs=1e-13, epsrel=1e-13,
        )
        worst = max(worst, abs(holonomy(loop) - np.exp(-0.5j * area)))
    return worst


def _intersection_equivariance(ctx: CheckContext) -> float:
    worst = 0.0
    for _ in range(max(1, ctx.trials // 10)):
        j, m1, m2, beta = _random_allowed_config(ctx.rng)
        gamma, sigma = standard_pair(int(2 * j), m2, m1, beta)
        g = SU2Element.random(ctx.rng)
        rot = g.rotation_matrix()
        before = find_intersections(gamma.base, sigma.base)
        after = find_intersections(rotate_loop(gamma.base, g), rotate_loop(sigma.base, g))
        if len(before) != len(after):
            return float("inf")
        for d in before:
            match = min(after, key=lambda e: np.linalg.norm(e.x.vector - rot @ d.x.vector))
            if match.orientation != d.orientation:
                return float("inf")
            worst = max(worst, abs(match.angle - d.angle),
                        float(np.linalg.norm(match.x.vector - rot @ d.x.vector)))
    return worst


def _lune_transport(ctx: CheckContext) -> float:
    worst = 0.0
    for _ in range(max(1, ctx.trials // 10)):
        j, m1, m2, beta = _random_allowed_config(ctx.rng)
        gamma, sigma = standard_pair(int(2 * j), m2, m1, beta)
        found = find_intersections(gamma.base, sigma.base, gamma, sigma)
        area = lune_area(gamma.base, sigma.base, found)
        worst = max(worst, lune_transport_defect(gamma.base, sigma.base, found, area))
    return worst


def _law_of_sines(ctx: CheckContext) -> float:
    worst = 0.0
    for _ in range(max(1, ctx.trials // 10)):
        j, m1, m2, beta = _random_allowed_config(ctx.rng)
        gamma, sigma = standard_pair(int(2 * j), m2, m1, beta)
        found = find_intersections(gamma.base, sigma.base)
        sines = np.sin(gamma.base.circle.theta) * np.sin(sigma.base.circle.theta)
        for d in found:
            worst = max(worst, abs(abs(parallelepiped_volume(beta, d.x)) - sines * np.sin(d.angle)))
    return worst


# ---------------------------------------------------------------------------
# Asymptotics
# ---------------------------------------------------------------------------

def _route_agreement(ctx: CheckContext) -> float:
    worst = 0.0
    for _ in range(5 * ctx.trials):
        result = wigner_d_asym_ly(*_random_allowed_config(ctx.rng))
        if result.value is not None:
            worst = max(worst, abs(result.value - result.route_value))
    return worst


def _phase_convention(ctx: CheckContext) -> float:
    worst = 0.0
    for _ in range(max(1, ctx.trials // 10)):
        result = wigner_d_asym_ly(*_random_allowed_config(ctx.rng))
        worst = max(worst, result.ingredients.phase_defect)
    return worst


def _symmetric_cosine_vs_bpu(ctx: CheckContext) -> float:
    worst = 0.0
    for _ in range(max(1, ctx.trials // 10)):
        j, m1, m2, beta = _random_allowed_config(ctx.rng)
        k = int(2 * j)
        gamma, sigma = standard_pair(k, m2, m1, beta)
        found = find_intersections(gamma.base, sigma.base, gamma, sigma)
        area = lune_area(gamma.base, sigma.base, found)
        nu = common_angle(found)
        cosine = np.sqrt(8.0 / np.sin(nu)) * np.cos(0.25 * k * area + 0.5 * nu - 0.25 * np.pi)
        worst = max(worst, abs(bpu_inner_product_asym(k, found).value - cosine))
    return worst


def _warmup_errors(beta: float):
    def error(k: int) -> float:
        exact = wigner_d_exact(RepLevel(k), 0, 0, beta)
        return abs(wigner_d00_asym(k, beta) - exact) / wigner_d00_envelope(k, beta)
    return error(50), error(200)


def _warmup_error_k200(ctx: CheckContext) -> float:
    return max(_warmup_errors(beta)[1] for beta in (0.6, 1.0, 1.4, 2.0))


def _warmup_error_decreases(ctx: CheckContext) -> float:
    ratios = []
    for beta in (0.6, 1.0, 1.4, 2.0):
        low, high = _warmup_errors(beta)
        ratios.append(high / low)
    return max(ratios)


def _warmup_hessian_fd(ctx: CheckContext) -> float:
    beta = 1.0
    numeric = phase_hessian(warmup_integrand(50, beta), 0.5 * np.pi, 0.5 * np.pi)
    return float(np.max(np.abs(numeric - warmup_hessian(beta))))


def _gaussian_csp(ctx: CheckContext) -> float:
    """k * relative error of the leading term against the exact Gaussian integral."""
    integrand = TorusIntegrand(
        lambda s, t: 1j * (np.asarray(s) ** 2 + np.asarray(t) ** 2),
        lambda s, t: np.ones(np.broadcast(np.asarray(s), np.asarray(t)).shape, dtype=complex),
        (2.0 * np.pi, 2.0 * np.pi),
        origin=(-np.pi, -np.pi),
        analytic=True,
        name="gaussian",
    )
    worst = 0.0
    for k in (50, 100, 200):
        value, _ = leading_term(integrand, k, grid=64)
        exact = np.pi / k
        worst = max(worst, k * abs(value - exact) / exact)
    return worst


def _bpu_against_oracle(ctx: CheckContext) -> float:
    """Relative to the sqrt(8/sin nu) envelope at k=50, heights 11/25 and 22/25."""
    k, beta = 50, 1.4
    gamma, sigma = standard_pair(k, 11.0, 22.0, beta)
    found = find_intersections(gamma.base, sigma.base, gamma, sigma)
    asym = bpu_inner_product_asym(k, found).value
    oracle = quadrature_oracle(loop_pair_integrand(gamma, sigma, k), k, workers=2)
    envelope = np.sqrt(8.0 / np.sin(common_angle(found)))
    return float(abs(asym - oracle) / envelope)


def _exact_inner_against_oracle(ctx: CheckContext) -> float:
    k, m2, m1, beta = 30, 6.0, 9.0, 1.0
    gamma, sigma = standard_pair(k, m2, m1, beta)
    oracle = quadrature_oracle(loop_pair_integrand(gamma, sigma, k), k)
    return _relative(oracle, loop_state_inner_exact(k, m2, m1, beta))


def _saddle_locations(ctx: CheckContext) -> float:
    k = 50
    gamma, sigma = standard_pair(k, 11.0, 22.0, 1.4)
    points = find_stationary_points(loop_pair_integrand(gamma, sigma, k))
    if len(points) != 2:
        return float("inf")
    worst = 0.0
    for point in points:
        s, t = np.angle(np.exp(1j * np.array(torus_angles(gamma, sigma, *point.location))))
        target = np.array(SADDLE_TARGET) * (1.0 if s > 0 else -1.0)
        worst = max(worst, float(np.max(np.abs(np.array([s, t]) - target))))
    return worst


CHECKS: List[Check] = [
    Check("act_unitarity", 1e-10, _act_unitarity),
    Check("act_homomorphism", 1e-10, _act_homomorphism),
    Check("evaluation_equivariance", 1e-10, _evaluation_equivariance),
    Check("wigner_unitarity", 1e-10, _wigner_unitarity),
    Check("wigner_composition", 1e-9, _wigner_composition),
    Check("jz_generator", 1e-6, _jz_generator),
    Check("wigner_d00_legendre", 1e-10, _legendre_d00),
    Check("reproducing_property", 1e-10, _reproducing_property),
    Check("basepoint_norm", 1e-10, _basepoint_norm),
    Check("coherent_equivariance", 1e-10, _coherent_equivariance),
    Check("eigenstate_property", 1e-10, _eigenstate_property),
    Check("loop_state_closed_form", 1e-8, _closed_form_loop_state),
    Check("rotated_loop_state", 1e-9, _rotated_loop_state),
    Check("exchange_of_integrals", 1e-9, _exchange_of_integrals),
    Check("u_z_transport_identity", 1e-10, _u_z_transport),
    Check("standard_lift_horizontal", 1e-9, _standard_lift_horizontal),
    Check("bohr_sommerfeld_heights", 1e-8, _bohr_sommerfeld_heights),
    Check("holonomy_area_circles", 1e-8, _holonomy_area_circles),
    Check("holonomy_area_star_loops", 1e-8, _holonomy_area_stars),
    Check("intersection_equivariance", 1e-9, _intersection_equivariance),
    Check("lune_transport", 1e-8, _lune_transport),
    Check("law_of_sines", 1e-10, _law_of_sines),
    Check("route_agreement", 1e-10, _route_agreement),
    Check("phase_convention", 1e-8, _phase_convention),
    Check("symmetric_cosine_vs_bpu", 1e-9, _symmetric_cosine_vs_bpu),
    Check("warmup_error_k200", 0.05, _warmup_error_k200),
    Check("warmup_error_decreases", 1.0, _warmup_error_decreases),
    Check("warmup_hessian", 1e-8, _warmup_hessian_fd),
    Check("gaussian_leading_term", 2.0, _gaussian_csp),
    Check("exact_inner_vs_oracle", 1e-9, _exact_inner_against_oracle),
    Check("bpu_vs_oracle", 0.15, _bpu_against_oracle),
    Check("saddle_locations", 0.02, _saddle_locations),
]


def _run_one(check: Check, context: CheckContext, tol_scale: float) -> CheckOutcome:
    tolerance = check.tolerance * tol_scale
    start = time.perf_counter()
    try:
        defect = float(check.measure(context))
        error = ""
    except Exception as e:
        defect = float("nan")
        error = f"{type(e).__name__}: {e}"
    seconds = time.perf_counter() - start
    passed = bool(np.isfinite(defect) and defect <= tolerance)
    logger.info(f"{check.name}: {'ok' if passed else 'FAILED'} "
                f"(defect {defect:.3e}, tolerance {tolerance:.3e}, {seconds:.2f}s)")
    return CheckOutcome(check.name, passed, defect, tolerance, seconds, error)


def run_checks(config: Config, checks: Optional[List[Check]] = None) -> List[CheckOutcome]:
    """Run the invariant suites on a thread pool; outcomes keep the suite order."""
    checks = CHECKS if checks is None else checks
    verify = config.verify
    tol_scale = config.tolerances.tol_scale

    def run(indexed):
        index, check = indexed
        context = CheckContext(np.random.default_rng([verify.seed, index]),
                               verify.trials, verify.lift_sign)
        return _run_one(check, context, tol_scale)

    logger.info(f"verify: {len(checks)} checks, trials={verify.trials}, seed={verify.seed}, "
                f"lift_sign={verify.lift_sign}, tol_scale={tol_scale}")
    with ThreadPoolExecutor(max_workers=config.processing.workers) as executor:
        return list(executor.map(run, enumerate(checks)))
