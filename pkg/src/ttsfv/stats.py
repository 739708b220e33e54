"""Statistics of TT states and the study harnesses built on them."""

from __future__ import annotations

import statistics
import time
from dataclasses import dataclass, field

import numpy as np

from .cross import CrossConfig
from .dense import DenseSFV
from .engine import RunReport, SFVSolver, SolverConfig
from .mesh import StochasticMeasure
from .scenarios import Scenario
from .tt import TTTensor, contract_axes, tt_hadamard, tt_round, tt_to_dense

VAR_CLAMP = 1e-12


class NegativeVarianceError(FloatingPointError):
    """Variance below the clamp tolerance, usually from over-aggressive truncation."""


def expectation(t: TTTensor, measure: StochasticMeasure) -> np.ndarray:
    """Mean over the stochastic axes as an array on the physical grid."""
    mesh = measure.mesh
    if t.mode_sizes != mesh.shape:
        raise ValueError(f"state modes {t.mode_sizes} do not match mesh {mesh.shape}")
    if mesh.m == 0:
        return t.full()
    w = {mesh.n + j: measure.cell_measures(j) for j in range(mesh.m)}
    return contract_axes(t, w).full()


def variance(t: TTTensor, measure: StochasticMeasure, epsilon_tt: float = 1e-12) -> np.ndarray:
    """``E[u^2] - E[u]^2`` with the square formed in TT format and rounded."""
    sq = tt_round(tt_hadamard(t, t), epsilon_tt)
    v = expectation(sq, measure) - expectation(t, measure) ** 2
    scale = max(1.0, float(np.max(np.abs(expectation(sq, measure)))))
    if np.any(v < -VAR_CLAMP * scale):
        raise NegativeVarianceError(f"variance down to {v.min():.3e}")
    return np.maximum(v, 0.0)


def std(t: TTTensor, measure: StochasticMeasure, epsilon_tt: float = 1e-12) -> np.ndarray:
    return np.sqrt(variance(t, measure, epsilon_tt))


@dataclass
class StatField:
    name: str
    coords: list
    mean: np.ndarray
    std: np.ndarray
    t: float


def stat_fields(state, measure: StochasticMeasure, epsilon_tt: float = 1e-12) -> list[StatField]:
    mesh = measure.mesh
    coords = [mesh.centers(k) for k in range(mesh.n)]
    return [StatField(nm, coords, expectation(q, measure), std(q, measure, epsilon_tt), state.t)
            for nm, q in zip(state.names, state.quantities)]


# --- running scenarios ---------------------------------------------------------

def build_config(scenario: Scenario, **overrides) -> SolverConfig:
    """Scenario defaults overlaid with explicit settings (``None`` values are ignored)."""
    opts = dict(scenario.settings)
    opts.setdefault("t_final", scenario.t_final)
    opts.update({k: v for k, v in overrides.items() if v is not None})
    cross_cap = opts.pop("cross_max_rank", 64)
    if opts.get("flux_cross") is None:
        opts["flux_cross"] = CrossConfig(target_tolerance=opts.get("epsilon_tt", 1e-6), max_rank=cross_cap)
    return SolverConfig(**opts)


def make_solver(scenario: Scenario, cfg: SolverConfig | None = None, **overrides) -> SFVSolver:
    cfg = cfg or build_config(scenario, **overrides)
    return SFVSolver(scenario.model, scenario.mesh, scenario.measure, cfg)


def run_scenario(scenario: Scenario, cfg: SolverConfig | None = None, telemetry=None, **overrides):
    """Initialise and integrate; returns ``(solver, initial state, final state, report)``."""
    solver = make_solver(scenario, cfg, **overrides)
    s0 = solver.cell_average_init(scenario.u0)
    s1, report = solver.run(s0, solver.cfg.t_final, telemetry)
    return solver, s0, s1, report


# --- convergence --------------------------------------------------------------

def observed_orders(h, errors) -> list[float]:
    """Pairwise ``log(e_i / e_{i+1}) / log(h_i / h_{i+1})``."""
    h = np.asarray(h, dtype=np.float64)
    e = np.asarray(errors, dtype=np.float64)
    return list(np.log(e[:-1] / e[1:]) / np.log(h[:-1] / h[1:]))


def norm_error(diff: np.ndarray, cell_volume: float, norm: str = "L1") -> float:
    diff = np.abs(np.asarray(diff))
    if norm == "L1":
        return float(np.sum(diff) * cell_volume)
    if norm == "L2":
        return float(np.sqrt(np.sum(diff**2) * cell_volume))
    if norm == "Linf":
        return float(np.max(diff)) if diff.size else 0.0
    raise ValueError(f"unknown norm {norm!r}")


@dataclass
class ConvergenceRow:
    cells: int
    h: float
    error: float
    order: float | None
    max_rank: int
    steps: int
    seconds: float
    conservation_drift: float
    conservation_bound: float


def convergence_study(factory, grids, norm: str = "L1", refine_stochastic: bool = True,
                      **overrides) -> list[ConvergenceRow]:
    """Run ``factory(cells=N[, stochastic_cells=N])`` per grid against its exact mean."""
    rows = []
    for N in grids:
        sc = factory(cells=N, stochastic_cells=N) if refine_stochastic else factory(cells=N)
        if sc.exact_expectation is None:
            raise ValueError(f"scenario {sc.name} has no exact expectation")
        t0 = time.perf_counter()
        solver, _, s1, rep = run_scenario(sc, **overrides)
        mean = expectation(s1.quantities[0], solver.measure)
        edges = np.linspace(*sc.mesh.extents[0], N + 1)
        err = norm_error(mean - sc.exact_expectation(edges, s1.t), sc.mesh.spacing(0), norm)
        rows.append(ConvergenceRow(N, sc.mesh.spacing(0), err, None, rep.max_rank, rep.n_steps,
                                   time.perf_counter() - t0, rep.conservation_drift[0],
                                   rep.conservation_bound(solver.cfg.epsilon_tt)[0]))
    orders = observed_orders([r.h for r in rows], [r.error for r in rows]) if len(rows) > 1 else []
    for r, o in zip(rows[1:], orders):
        r.order = float(o)
    return rows


# --- scaling ------------------------------------------------------------------

@dataclass
class ScalingRow:
    m: int
    tt_seconds: float
    max_rank: int
    steps: int
    dense_seconds: float | None = None
    dense_cells: int | None = None


def scaling_study(scenarios, steps: int = 2, repeats: int = 3, dense_max_m: int = 3,
                  dense_repeats: int | None = None, **overrides) -> list[ScalingRow]:
    """Time a fixed number of steps per scenario (median over ``repeats``).

    The time loop alone is timed.  The dense oracle is timed on the same
    initial state for ``m <= dense_max_m``, ``dense_repeats`` times
    (default ``repeats``); at m = 3 one dense step already takes minutes.
    """
    rows = []
    for sc in scenarios:
        times, rep = [], None
        for _ in range(repeats):
            solver = make_solver(sc, max_steps=steps, **overrides)
            s0 = solver.cell_average_init(sc.u0)
            _, rep = solver.run(s0)
            times.append(rep.loop_seconds)
        row = ScalingRow(sc.mesh.m, statistics.median(times), rep.max_rank, rep.n_steps)
        if sc.mesh.m <= dense_max_m:
            dense = DenseSFV(sc.model, sc.mesh, sc.measure, solver.cfg.integrator, solver.cfg.cfl)
            U0 = [tt_to_dense(q) for q in s0.quantities]
            dts = [s.dt for s in rep.steps]
            dtimes = []
            for _ in range(repeats if dense_repeats is None else dense_repeats):
                _, drep = dense.run(U0, solver.cfg.t_final, dt_schedule=dts)
                dtimes.append(drep.seconds)
            row.dense_seconds = statistics.median(dtimes)
            row.dense_cells = int(np.prod(sc.mesh.shape))
        rows.append(row)
    return rows


def linear_fit_r2(x, y) -> tuple[float, float, float]:
    """Least-squares line ``y = a + b x``; returns ``(a, b, R^2)``."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    b, a = np.polyfit(x, y, 1)
    resid = y - (a + b * x)
    tot = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / tot if tot > 0 else 1.0
    return float(a), float(b), float(r2)


# --- dense oracle comparison --------------------------------------------------

@dataclass
class OracleComparison:
    initial: list
    final: list
    steps: int
    report: RunReport = field(repr=False, default=None)

    @property
    def max_discrepancy(self) -> float:
        return max(self.final)


def oracle_compare(scenario: Scenario, cfg: SolverConfig | None = None, **overrides) -> OracleComparison:
    """Run TT and dense solvers on one mesh; relative Frobenius discrepancies per quantity.

    The dense run starts from the densified TT initial state and replays the
    TT time steps, so only the representation differs.
    """
    if scenario.mesh.m > 2:
        raise ValueError("oracle comparison is limited to m <= 2")
    solver = make_solver(scenario, cfg, **overrides)
    s0 = solver.cell_average_init(scenario.u0)
    dense = DenseSFV(scenario.model, scenario.mesh, scenario.measure, solver.cfg.integrator, solver.cfg.cfl,
                     solver.cfg.nu, solver.cfg.weno_eps)
    D0 = dense.cell_average_init(scenario.u0)
    init = [_rel(tt_to_dense(q), d) for q, d in zip(s0.quantities, D0)]
    s1, rep = solver.run(s0)
    D1, _ = dense.run([tt_to_dense(q) for q in s0.quantities], solver.cfg.t_final,
                      dt_schedule=[s.dt for s in rep.steps])
    final = [_rel(tt_to_dense(q), d) for q, d in zip(s1.quantities, D1)]
    return OracleComparison(init, final, rep.n_steps, rep)


def _rel(a: np.ndarray, b: np.ndarray) -> float:
    nb = np.linalg.norm(b)
    return float(np.linalg.norm(a - b) / nb) if nb > 0 else float(np.linalg.norm(a - b))
