"""Sub-command implementations.

Each command turns a validated Config into a Table; the pipeline owns
writing. Sweeps fan out over a thread pool and are reassembled in input
order so output never depends on the worker count.
"""

import logging
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Sequence, Tuple

import numpy as np

from asymptotics import (
    AsymptoticsError,
    Validity,
    loop_pair_integrand,
    standard_pair,
    torus_angles,
    wigner_d_asym_ly,
)
from coherent import (
    CoherentSpec,
    LoopStateSpec,
    coherent_state,
    fibrewise_norm_field,
    fibrewise_pair_field,
    loop_state_quadrature,
)
from config import Config
from hopf import GeometryError, HopfPoint, constant_height_loop, standard_lift
from stationary_phase import StationaryPointError, find_stationary_points, torus_field
from su2rep import RepLevel, RepVector, magnetic_numbers, wigner_d_exact
from verification import run_checks

logger = logging.getLogger(__name__)


WIGNER_COLUMNS = ("beta", "d_exact", "d_asym", "abs_err", "allowed", "A", "nu", "V")
WIGNER_M2_COLUMNS = ("m2",) + WIGNER_COLUMNS[1:]
FIELD_COLUMNS = ("theta", "phi", "norm")
PAIR_FIELD_COLUMNS = ("theta", "phi", "magnitude", "phase")
TORUS_COLUMNS = ("s", "t", "magnitude", "phase")
VERIFY_COLUMNS = ("name", "passed", "defect", "tolerance", "seconds")

ROW_ERROR = "error"


@dataclass
class Table:
    """Rows under a fixed header, plus JSON-only metadata."""
    columns: Tuple[str, ...]
    rows: List[Tuple[Any, ...]] = field(default_factory=list)
    meta: Dict[str, Any] = field(default_factory=dict)
    failures: int = 0


def ordered_map(fn: Callable, items: Sequence, workers: int) -> List:
    """fn over items on a thread pool, results in input order."""
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    results: List = [None] * len(items)
    with ThreadPoolExecutor(max_workers=workers) as executor:
        futures = {executor.submit(fn, item): i for i, item in enumerate(items)}
        for future in as_completed(futures):
            results[futures[future]] = future.result()
    return results


def _or_nan(value) -> float:
    return float("nan") if value is None else float(np.real(value))


# ── wigner ──

def _wigner_row(level: RepLevel, m1: float, m2: float, beta: float) -> Tuple[Tuple, bool]:
    j = level.k / 2
    d_exact = wigner_d_exact(level, m2, m1, beta)
    try:
        result = wigner_d_asym_ly(j, m1, m2, beta)
    except (AsymptoticsError, GeometryError) as e:
        logger.error(f"j={j} m1={m1} m2={m2} beta={beta}: {e}")
        nan = float("nan")
        return (d_exact, nan, nan, ROW_ERROR, nan, nan, nan), False
    d_asym = _or_nan(result.value)
    ingredients = result.ingredients
    row = (
        d_exact,
        d_asym,
        abs(d_asym - d_exact),
        result.validity.value,
        _or_nan(ingredients.area),
        _or_nan(ingredients.nu),
        _or_nan(ingredients.volume),
    )
    return row, True


def cmd_wigner(config: Config) -> Table:
    """Exact against asymptotic d^j_{m2 m1}, swept over beta or over m2."""
    p = config.parameters
    level = RepLevel(p.k)
    workers = config.processing.workers

    if p.vary == "m2":
        sweep = [float(m) for m in magnetic_numbers(level)[::-1]]
        logger.info(f"wigner: j={p.j} m1={p.m1} beta={p.beta}, m2 over {len(sweep)} values")
        results = ordered_map(lambda m2: _wigner_row(level, p.m1, m2, p.beta), sweep, workers)
        columns = WIGNER_M2_COLUMNS
    else:
        sweep = list(p.beta_values)
        logger.info(f"wigner: j={p.j} m1={p.m1} m2={p.m2}, {len(sweep)} beta values")
        results = ordered_map(lambda b: _wigner_row(level, p.m1, p.m2, b), sweep, workers)
        columns = WIGNER_COLUMNS

    table = Table(columns, meta={"j": p.j, "m1": p.m1, "vary": p.vary})
    if p.vary == "m2":
        table.meta["beta"] = p.beta
    else:
        table.meta["m2"] = p.m2
    for x, (row, ok) in zip(sweep, results):
        table.rows.append((x,) + row)
        if not ok:
            table.failures += 1
    counts = {v.value: sum(1 for r in table.rows if r[4] == v.value) for v in Validity}
    logger.info(f"wigner: {counts}")
    return table


# ── field ──

def _loop_state(config: Config, lifted) -> RepVector:
    p = config.parameters
    return loop_state_quadrature(LoopStateSpec(RepLevel(p.k), lifted, p.nodes, config.tolerances.tol))


def _pair_field(config: Config, n_theta: int, n_phi: int) -> Table:
    p = config.parameters
    gamma, sigma = standard_pair(p.k, p.m1, p.m2, p.beta)
    logger.info(f"field: pairing of the loop states k={p.k} m1={p.m1} and "
                f"R_y({p.beta}) m2={p.m2}")
    pair = fibrewise_pair_field(_loop_state(config, gamma), _loop_state(config, sigma),
                                n_theta, n_phi)
    meta = {"k": p.k, "m1": p.m1, "m2": p.m2, "beta": p.beta, "state": p.state}
    return Table(PAIR_FIELD_COLUMNS, list(pair.rows()), meta)


def cmd_field(config: Config) -> Table:
    """Fibrewise field over a theta x phi grid.

    ``loop`` and ``coherent`` give |v(x)| for the loop state at m1 or the
    north-pole coherent state; ``pair`` gives magnitude and phase of the
    pairing of the loop state at m1 with R_y(beta) of the loop state at m2.
    """
    p = config.parameters
    level = RepLevel(p.k)
    n_theta, n_phi = p.grid_shape
    if p.state == "pair":
        return _pair_field(config, n_theta, n_phi)
    if p.state == "coherent":
        vector = coherent_state(CoherentSpec(level, HopfPoint(0.0, 1.0)))
        logger.info(f"field: coherent state at the north pole, k={p.k}")
    else:
        vector = _loop_state(config, standard_lift(constant_height_loop(p.k, p.m1)))
        logger.info(f"field: loop state k={p.k} m={p.m1} (height {2 * p.m1 / p.k:.6f})")
    norm_field = fibrewise_norm_field(vector, n_theta, n_phi)
    table = Table(FIELD_COLUMNS, list(norm_field.rows()),
                  meta={"k": p.k, "m": p.m1, "state": p.state})
    return table


# ── torus ──

def _wrap_angle(a: float) -> float:
    wrapped = float(np.mod(a + np.pi, 2.0 * np.pi) - np.pi)
    return np.pi if wrapped == -np.pi else wrapped


def cmd_torus(config: Config) -> Table:
    """Magnitude and phase of (k+1)/(2pi) <sigma, gamma>^k plus the saddles.

    gamma is the loop at m1 and sigma is R_y(beta) of the loop at m2. The
    first column s is the angle along sigma and t the angle along gamma,
    each about its loop's own axis; grid NxM puts N samples on s.
    """
    p = config.parameters
    n_s, n_t = p.grid_shape
    gamma, sigma = standard_pair(p.k, p.m1, p.m2, p.beta)
    if gamma.base.is_degenerate or sigma.base.is_degenerate:
        raise GeometryError("torus needs two non-degenerate loops (m1, m2 away from +-j)")
    integrand = loop_pair_integrand(gamma, sigma, p.k)

    # the integrand runs gamma first; transpose so s (sigma) is the outer axis
    samples = torus_field(integrand, p.k, (n_t, n_s))
    s_axis, t_axis = torus_angles(gamma, sigma, samples.s.T, samples.t.T)
    rows = [
        tuple(float(v) for v in row)
        for row in zip(s_axis.ravel(), t_axis.ravel(),
                       samples.magnitude.T.ravel(), samples.phase.T.ravel())
    ]

    saddles: List[Dict[str, float]] = []
    failures = 0
    try:
        points = find_stationary_points(integrand)
    except StationaryPointError as e:
        logger.error(f"torus: {e}")
        points = []
        failures = 1
    for point in points:
        s, t = torus_angles(gamma, sigma, *point.location)
        saddle = {"s": _wrap_angle(s), "t": _wrap_angle(t)}
        saddles.append(saddle)
        logger.info(f"torus: saddle at (s, t) = ({saddle['s']:.6f}, {saddle['t']:.6f})")
    if not points:
        logger.info("torus: no contributing saddles (classically forbidden)")
    saddles.sort(key=lambda d: (d["s"], d["t"]))

    meta = {"k": p.k, "m1": p.m1, "m2": p.m2, "beta": p.beta, "saddles": saddles}
    return Table(TORUS_COLUMNS, rows, meta, failures)


# ── verify ──

def cmd_verify(config: Config) -> Table:
    """Run the invariant suites; every failed check counts as a failure."""
    outcomes = run_checks(config)
    rows = [(o.name, o.passed, o.defect, o.tolerance, o.seconds) for o in outcomes]
    failed = [o for o in outcomes if not o.passed]
    for outcome in failed:
        logger.error(f"verify: {outcome.name} failed (defect {outcome.defect:.3e}, "
                     f"tolerance {outcome.tolerance:.3e}){': ' + outcome.error if outcome.error else ''}")
    meta = {
        "passed": not failed,
        "tol_scale": config.tolerances.tol_scale,
        "lift_sign": config.verify.lift_sign,
        "checks": [o.to_dict() for o in outcomes],
    }
    return Table(VERIFY_COLUMNS, rows, meta, len(failed))


COMMANDS: Dict[str, Callable[[Config], Table]] = {
    "wigner": cmd_wigner,
    "field": cmd_field,
    "torus": cmd_torus,
    "verify": cmd_verify,
}
