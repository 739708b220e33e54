"""Stochastic finite-volume solver on tensor-train states.

Every conserved quantity is a TT tensor of cell averages over the
``n + m`` axes of a :class:`~ttsfv.mesh.Mesh`.  One right-hand-side
evaluation does, for each physical axis ``s``:

1. reconstruct interface traces on axis ``s`` (WENO3 ``L``/``R``) and point
   values at Gauss nodes on every other axis (stacked ``Q``);
2. sample the Rusanov flux at the interfaces ``i + 1/2`` with a cross
   approximation, the right trace coming from the neighbouring cell;
3. average the node axes back to cells (density weighted on stochastic axes);
4. difference neighbouring interfaces and divide by the cell width.

Stages of the SSP integrators are recompressed with ``tt_round``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .cross import CrossConfig, maxvol, tt_cross, tt_cross_map
from .mesh import Mesh, StochasticMeasure, averaging_matrix
from .models import FluxModel, rusanov
from .tt import (
    TTTensor,
    apply_matrix_to_core,
    gram_environments,
    tt_dot,
    tt_norm_f,
    tt_rank1,
    tt_round,
    tt_sum,
)
from .weno import (
    WENO_EPS,
    apply_stencils_to_core,
    build_interface_operators,
    build_quadrature_operators,
    fiber_indicators,
    tt_axis_indicators,
)

INTEGRATORS = ("Euler", "SSP22", "SSP33")
DEFAULT_CFL = {"Euler": 0.4, "SSP22": 0.4, "SSP33": 0.45}
DT_SAFETY = 0.9


class BlowUpError(FloatingPointError):
    """State norm grew beyond the configured multiple of its initial value."""


@dataclass
class SolverConfig:
    """Numerical parameters of a run.

    ``max_rank`` caps the state after every stage: an int, a list with one
    entry per bond, or a dict from quantity name to either (missing names are
    uncapped).  ``None``, ``0`` or ``"none"`` disable the cap.  ``flux_cross`` controls the flux and initial-data cross
    approximations; by default it uses ``epsilon_tt`` as target and a rank cap
    of 64.  ``init_cross`` (default: the flux settings with a larger random
    enrichment and more sweeps) is used for the initial data.
    """

    epsilon_tt: float = 1e-6
    max_rank: int | Sequence[int] | dict | None = None
    cfl: float | None = None
    integrator: str = "SSP33"
    t_final: float = 0.1
    flux_cross: CrossConfig | None = None
    init_cross: CrossConfig | None = None
    nu: str | float = "pointwise"
    weights: str = "aggregate"
    weno_eps: float = WENO_EPS
    speed_samples: int = 512
    seed: int | None = 0
    blowup_factor: float = 1e6
    max_steps: int | None = None

    def __post_init__(self):
        if isinstance(self.max_rank, str) and self.max_rank.lower() in ("none", "inf"):
            self.max_rank = None
        elif self.max_rank == 0:
            self.max_rank = None
        if self.integrator not in INTEGRATORS:
            raise ValueError(f"integrator must be one of {INTEGRATORS}")
        if self.cfl is None:
            self.cfl = DEFAULT_CFL[self.integrator]
        if not 0 < self.cfl <= 1:
            raise ValueError("cfl must lie in (0, 1]")
        if not self.epsilon_tt > 0:
            raise ValueError("epsilon_tt must be positive")
        if self.t_final < 0:
            raise ValueError("t_final must be non-negative")
        if self.weights not in ("aggregate", "fiber"):
            raise ValueError("weights must be 'aggregate' or 'fiber'")
        if isinstance(self.nu, str) and self.nu not in ("pointwise", "global"):
            raise ValueError("nu must be 'pointwise', 'global' or a number")
        if self.flux_cross is None:
            self.flux_cross = CrossConfig(target_tolerance=self.epsilon_tt, max_rank=64)
        if self.init_cross is None:
            # initial data is often discontinuous: enrich harder, sweep longer
            self.init_cross = replace(self.flux_cross, kick_rank=8, max_sweeps=20)

    def cap_for(self, name: str):
        if isinstance(self.max_rank, dict):
            return self.max_rank.get(name)
        return self.max_rank


@dataclass(frozen=True)
class ConservedState:
    quantities: tuple[TTTensor, ...]
    t: float
    names: tuple[str, ...]

    def __post_init__(self):
        if len(self.quantities) != len(self.names):
            raise ValueError("one name per quantity is required")
        modes = {q.mode_sizes for q in self.quantities}
        if len(modes) > 1:
            raise ValueError("all quantities must share mode sizes")

    @property
    def max_rank(self) -> int:
        return max(q.max_rank for q in self.quantities)

    def __getitem__(self, name: str) -> TTTensor:
        return self.quantities[self.names.index(name)]


@dataclass
class StepRecord:
    step: int
    t: float
    dt: float
    ranks: dict
    stage_seconds: list
    cross_sweeps: list
    rounding_defect: list
    cross_errors: list = field(default_factory=list)
    # signed change of the global integral through domain edges and sources
    external_change: list = field(default_factory=list)


@dataclass
class RunReport:
    steps: list = field(default_factory=list)
    loop_seconds: float = 0.0
    initial_norm: list = field(default_factory=list)
    initial_integral: list = field(default_factory=list)
    final_integral: list = field(default_factory=list)
    init_cross: list = field(default_factory=list)

    @property
    def n_steps(self) -> int:
        return len(self.steps)

    @property
    def max_rank(self) -> int:
        ranks = [r for s in self.steps for r in s.ranks.values()]
        return max(ranks, default=0)

    @property
    def external_change(self) -> list:
        if not self.steps or not self.steps[0].external_change:
            return [0.0] * len(self.initial_integral)
        return list(np.sum([s.external_change for s in self.steps], axis=0))

    @property
    def conservation_drift(self) -> list:
        """Change of the global integral not explained by boundary fluxes or sources."""
        return [abs(b - a - e) for a, b, e in zip(self.initial_integral, self.final_integral,
                                                  self.external_change)]

    @property
    def rounding_drift(self) -> list:
        if not self.steps:
            return [0.0] * len(self.initial_integral)
        return list(np.sum([s.rounding_defect for s in self.steps], axis=0))

    def conservation_bound(self, epsilon_tt: float) -> list:
        return [(epsilon_tt + 1e-12) * n * max(self.n_steps, 1) for n in self.initial_norm]

    def to_dict(self) -> dict:
        return {
            "n_steps": self.n_steps,
            "loop_seconds": self.loop_seconds,
            "max_rank": self.max_rank,
            "initial_norm": self.initial_norm,
            "initial_integral": self.initial_integral,
            "final_integral": self.final_integral,
            "conservation_drift": self.conservation_drift,
            "rounding_drift": self.rounding_drift,
            "external_change": self.external_change,
            "init_cross": self.init_cross,
            "steps": [vars(s) for s in self.steps],
        }


def shift(t: TTTensor, axis: int, direction: int, boundary: str) -> TTTensor:
    """Move the fibers of core ``axis`` by one cell.

    ``direction=+1`` gives ``out[i] = in[i-1]``, ``-1`` gives ``out[i] = in[i+1]``.
    The vacated slot wraps (``periodic``) or repeats the edge entry.
    """
    if direction not in (1, -1):
        raise ValueError("direction must be +1 or -1")
    c = t.cores[axis]
    if boundary == "periodic":
        new = np.roll(c, direction, axis=1)
    elif direction == 1:
        new = np.concatenate([c[:, :1], c[:, :-1]], axis=1)
    else:
        new = np.concatenate([c[:, 1:], c[:, -1:]], axis=1)
    cores = list(t.cores)
    cores[axis] = new
    return TTTensor(cores)


def skeleton_indices(t: TTTensor, rng, extra: int = 0) -> np.ndarray:
    """Multi-indices picked by nested maxvol on left interfaces, completed randomly.

    They target the dominant entries of ``t`` cheaply; ``extra`` uniform
    random indices are appended.
    """
    d, n = t.d, t.mode_sizes
    out = []
    prefixes = np.zeros((1, 0), dtype=np.int64)
    interface = np.ones((1, 1))
    for k in range(d - 1):
        c = t.cores[k]
        rl, nk, rr = interface.shape[0], c.shape[1], c.shape[2]
        blk = np.einsum("ra,anb->rnb", interface, c).reshape(rl * nk, rr)
        q, _ = np.linalg.qr(blk)
        r = min(q.shape)
        sel = maxvol(q[:, :r]) if r > 0 else np.zeros(0, dtype=np.int64)
        parent, i = sel // nk, sel % nk
        prefixes = np.concatenate([prefixes[parent], i[:, None]], axis=1)
        interface = blk[sel]
        tail = np.stack([rng.integers(0, nn, size=len(sel)) for nn in n[k + 1:]], axis=1)
        out.append(np.concatenate([prefixes, tail], axis=1))
    last = np.repeat(prefixes, n[-1], axis=0)
    out.append(np.concatenate([last, np.tile(np.arange(n[-1]), len(prefixes))[:, None]], axis=1))
    if extra > 0:
        out.append(np.stack([rng.integers(0, nn, size=extra) for nn in n], axis=1))
    return np.concatenate(out, axis=0)


class SFVSolver:
    """TT stochastic finite-volume solver for one model on one mesh."""

    def __init__(self, model: FluxModel, mesh: Mesh, measure: StochasticMeasure | None = None,
                 cfg: SolverConfig | None = None):
        if model.dims != mesh.n:
            raise ValueError(f"model has {model.dims} space dimensions, mesh has {mesh.n}")
        self.model = model
        self.mesh = mesh
        self.measure = measure or StochasticMeasure(mesh)
        if self.measure.mesh != mesh:
            raise ValueError("measure was built for a different mesh")
        self.cfg = cfg or SolverConfig()
        self.rng = np.random.default_rng(self.cfg.seed)
        self._avg = [averaging_matrix(mesh, self.measure, k) for k in range(mesh.d)]
        self._integral_weights = self._make_integral_weights()
        self.last_cross_sweeps: list[int] = []
        self.last_cross_errors: list[float] = []
        self._rates: list[float] = []

    # -- helpers -------------------------------------------------------

    def _make_integral_weights(self) -> TTTensor:
        vecs = [np.full(N, self.mesh.spacing(k)) for k, N in enumerate(self.mesh.cells)]
        vecs += [self.measure.cell_measures(j) for j in range(self.mesh.m)]
        return tt_rank1(vecs)

    def integral(self, t: TTTensor) -> float:
        """Measure-weighted global integral ``sum dx |K_y| Ubar``."""
        return tt_dot(t, self._integral_weights)

    def weighted_norm(self, t: TTTensor) -> float:
        """L2 norm under the same weights as :meth:`integral`."""
        w = self._integral_weights.cores
        return tt_norm_f(TTTensor([c * np.sqrt(v) for c, v in zip(t.cores, w)]))

    def _edge_rate(self, g: TTTensor, s: int) -> float:
        """``-(G_last - G_first)`` integrated over the other axes.

        With edge-repeating shifts the first cell sees ``G_first`` on both
        sides, so this is the whole net inflow along axis ``s``.
        """
        cores = list(self._integral_weights.cores)
        e = np.zeros((1, g.mode_sizes[s], 1))
        e[0, -1, 0], e[0, 0, 0] = 1.0, -1.0
        cores[s] = e
        return -tt_dot(g, TTTensor(cores))

    def _round(self, t: TTTensor, name: str) -> TTTensor:
        return tt_round(t, self.cfg.epsilon_tt, self.cfg.cap_for(name))

    def _cross_cfg(self) -> CrossConfig:
        return self.cfg.flux_cross

    def node_coordinates(self, idx: np.ndarray):
        """Physical and stochastic coordinates of node multi-indices ``(B, d)``."""
        pts = [self.mesh.quad_points(k)[idx[:, k]] for k in range(self.mesh.d)]
        return pts[: self.mesh.n], pts[self.mesh.n:]

    # -- initial data --------------------------------------------------

    def cell_average_init(self, u0: Callable) -> ConservedState:
        """Cell averages of ``u0(x, y)`` (lists of coordinate arrays -> list of p arrays).

        Each quantity is cross-approximated on the Gauss-node grid and the node
        axes are averaged to cells.
        """
        mesh, p = self.mesh, self.model.p
        node_modes = tuple(N * mesh.nodes for N in mesh.shape)
        qs = []
        self.init_cross_info = []
        for ell in range(p):
            def f(idx, ell=ell):
                x, y = self.node_coordinates(idx)
                return np.asarray(u0(x, y)[ell], dtype=np.float64)

            t, info = tt_cross(f, node_modes, self.cfg.init_cross, seed=self.rng, return_info=True)
            self.init_cross_info.append(info.sweeps)
            for k in range(mesh.d):
                t = apply_matrix_to_core(t, k, self._avg[k])
            qs.append(self._round(t, self.model.names[ell]))
        return ConservedState(tuple(qs), 0.0, self.model.names)

    def state_from_dense(self, arrays, t: float = 0.0) -> ConservedState:
        from .tt import tt_svd

        qs = tuple(self._round(tt_svd(np.asarray(a), 0.0), nm) for a, nm in zip(arrays, self.model.names))
        return ConservedState(qs, t, self.model.names)

    # -- reconstruction ------------------------------------------------

    def axis_operators(self, t: TTTensor):
        """Per-axis reconstruction operators for one quantity (aggregated weights)."""
        envs = gram_environments(t)
        ops = []
        for k in range(self.mesh.d):
            bnd = self.mesh.boundary(k)
            ind = tt_axis_indicators(t, k, bnd, envs)
            entry = {"Q": build_quadrature_operators(nodes=self.mesh.nodes, boundary=bnd,
                                                     eps=self.cfg.weno_eps, indicators=ind)}
            if k < self.mesh.n:
                entry["L"], entry["R"] = build_interface_operators(boundary=bnd, eps=self.cfg.weno_eps,
                                                                   indicators=ind)
            ops.append(entry)
        return ops

    def _apply(self, t: TTTensor, k: int, kind: str, ops) -> np.ndarray:
        core = t.cores[k]
        if self.cfg.weights == "fiber":
            bnd = self.mesh.boundary(k)
            ind = fiber_indicators(core, bnd)
            if kind == "Q":
                qs = build_quadrature_operators(nodes=self.mesh.nodes, boundary=bnd,
                                                eps=self.cfg.weno_eps, indicators=ind)
                mats = np.stack([q.to_dense() for q in qs], axis=-2)  # (r0, r1, n, nq, n)
                r0, n, r1 = core.shape
                new = np.einsum("abmqn,anb->amqb", mats, core)
                return new.reshape(r0, n * len(qs), r1)
            L, R = build_interface_operators(boundary=bnd, eps=self.cfg.weno_eps, indicators=ind)
            m = (L if kind == "L" else R).to_dense()
            return np.einsum("abmn,anb->amb", m, core)
        return apply_stencils_to_core(core, ops[k][kind])

    def reconstruct_for_axis(self, state: ConservedState, s: int, ops=None):
        """Left/right interface traces on axis ``s`` with node values on all other axes."""
        if not 0 <= s < self.mesh.n:
            raise IndexError("reconstruction axis must be physical")
        ops = ops or [self.axis_operators(q) for q in state.quantities]
        recL, recR = [], []
        for q, op in zip(state.quantities, ops):
            base = list(q.cores)
            for k in range(self.mesh.d):
                if k != s:
                    base[k] = self._apply(q, k, "Q", op)
            cl, cr = list(base), list(base)
            cl[s] = self._apply(q, s, "L", op)
            cr[s] = self._apply(q, s, "R", op)
            recL.append(TTTensor(cl))
            recR.append(TTTensor(cr))
        return recL, recR

    # -- fluxes --------------------------------------------------------

    def _nu(self, state: ConservedState):
        if self.cfg.nu == "global":
            return self.sampled_max_speed(state)
        return self.cfg.nu

    def flux_divergence(self, recL, recR, s: int, nu="pointwise") -> list[TTTensor]:
        """``(Fbar_{i+1/2} - Fbar_{i-1/2}) / dx_s`` for every quantity."""
        p = self.model.p
        bnd = self.mesh.boundary(s)
        right = [shift(r, s, -1, bnd) for r in recR]
        out = []
        sweeps = []
        for c in range(p):
            def func(*args, c=c):
                return rusanov(self.model, s, args[:p], args[p:], nu)[c]

            g, info = tt_cross_map(func, recL + right, self._cross_cfg(), seed=self.rng, return_info=True)
            sweeps.append(info.sweeps)
            self.last_cross_errors.append(info.error_estimate)
            for k in range(self.mesh.d):
                if k != s:
                    g = apply_matrix_to_core(g, k, self._avg[k])
            if bnd != "periodic":
                self._rates[c] += self._edge_rate(g, s)
            gm = shift(g, s, 1, bnd)
            out.append(tt_sum([g, gm], [1.0 / self.mesh.spacing(s), -1.0 / self.mesh.spacing(s)]))
        self.last_cross_sweeps.extend(sweeps)
        return out

    def source_average(self, state: ConservedState, ops=None) -> list[TTTensor] | None:
        """Cell averages of the source evaluated on reconstructed node values."""
        src = self.model.source
        if src is None:
            return None
        mesh, p = self.mesh, self.model.p
        ops = ops or [self.axis_operators(q) for q in state.quantities]
        nodal = []
        for q, op in zip(state.quantities, ops):
            nodal.append(TTTensor([self._apply(q, k, "Q", op) for k in range(mesh.d)]))
        coords = []
        for k in range(mesh.d):
            vecs = [np.ones(N * mesh.nodes) for N in mesh.shape]
            vecs[k] = mesh.quad_points(k)
            coords.append(tt_rank1(vecs))
        out = []
        for ell in range(p):
            def func(*args, ell=ell):
                U, X = args[:p], args[p:]
                return src(U, list(X[: mesh.n]), list(X[mesh.n:]))[ell]

            g = tt_cross_map(func, nodal + coords, self._cross_cfg(), seed=self.rng)
            for k in range(mesh.d):
                g = apply_matrix_to_core(g, k, self._avg[k])
            out.append(g)
        return out

    def rhs(self, state: ConservedState) -> list[TTTensor]:
        """``-sum_s delta_s Fbar + Sbar`` per quantity (unrounded sums)."""
        ops = [self.axis_operators(q) for q in state.quantities]
        nu = self._nu(state)
        self._rates = [0.0] * self.model.p
        terms = [[] for _ in range(self.model.p)]
        for s in range(self.mesh.n):
            recL, recR = self.reconstruct_for_axis(state, s, ops)
            for ell, div in enumerate(self.flux_divergence(recL, recR, s, nu)):
                terms[ell].append((div, -1.0))
        src = self.source_average(state, ops)
        if src is not None:
            for ell, g in enumerate(src):
                terms[ell].append((g, 1.0))
                self._rates[ell] += self.integral(g)
        return [tt_sum([t for t, _ in tl], [c for _, c in tl]) for tl in terms]

    # -- time stepping -------------------------------------------------

    def sampled_max_speed(self, state: ConservedState) -> float:
        idx = skeleton_indices(state.quantities[0], self.rng, self.cfg.speed_samples)
        vals = [q.evaluate(idx) for q in state.quantities]
        sp = self.model.max_speed(vals)
        if not np.all(np.isfinite(sp)):
            raise FloatingPointError("non-finite wave speed in sampled state")
        return float(np.max(sp))

    def compute_dt(self, state: ConservedState, t_end: float | None = None) -> float:
        smax = self.sampled_max_speed(state)
        if not smax > 0:
            dt = np.inf
        else:
            hmin = min(self.mesh.spacing(s) for s in range(self.mesh.n))
            dt = DT_SAFETY * self.cfg.cfl * hmin / smax
        if t_end is not None:
            dt = min(dt, t_end - state.t)
        if not dt > 0:
            raise FloatingPointError(f"non-positive time step {dt}")
        return dt

    def _combine(self, parts, coeffs, defects) -> tuple[TTTensor, ...]:
        out = []
        for ell, name in enumerate(self.model.names):
            raw = tt_sum([p[ell] for p in parts], coeffs)
            rounded = self._round(raw, name)
            defects[ell] += abs(self.integral(rounded) - self.integral(raw))
            out.append(rounded)
        return tuple(out)

    def step(self, state: ConservedState, dt: float, record: StepRecord | None = None) -> ConservedState:
        """Advance by ``dt`` with the configured integrator, rounding after every stage."""
        U0 = state.quantities
        names = state.names
        defects = [0.0] * len(U0)
        timings = []

        rates = []

        def stage(U, t):
            t0 = time.perf_counter()
            r = self.rhs(ConservedState(U, t, names))
            rates.append(self._rates)
            timings.append(time.perf_counter() - t0)
            return r

        self.last_cross_sweeps = []
        self.last_cross_errors = []
        integ = self.cfg.integrator
        if integ == "Euler":
            U = self._combine([U0, stage(U0, state.t)], [1.0, dt], defects)
        elif integ == "SSP22":
            U1 = self._combine([U0, stage(U0, state.t)], [1.0, dt], defects)
            U = self._combine([U0, U1, stage(U1, state.t + dt)], [0.5, 0.5, 0.5 * dt], defects)
        else:
            U1 = self._combine([U0, stage(U0, state.t)], [1.0, dt], defects)
            U2 = self._combine([U0, U1, stage(U1, state.t + dt)], [0.75, 0.25, 0.25 * dt], defects)
            U = self._combine([U0, U2, stage(U2, state.t + 0.5 * dt)],
                              [1.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0 * dt], defects)
        if record is not None:
            record.stage_seconds = timings
            record.cross_sweeps = list(self.last_cross_sweeps)
            record.cross_errors = list(self.last_cross_errors)
            record.rounding_defect = defects
            # effective stage weights of the SSP schemes
            b = {"Euler": [1.0], "SSP22": [0.5, 0.5], "SSP33": [1 / 6, 1 / 6, 2 / 3]}[integ]
            record.external_change = [dt * sum(bi * r[ell] for bi, r in zip(b, rates))
                                      for ell in range(len(U0))]
        return ConservedState(U, state.t + dt, names)

    def run(self, state: ConservedState, t_final: float | None = None,
            telemetry: Callable[[StepRecord], None] | None = None) -> tuple[ConservedState, RunReport]:
        t_final = self.cfg.t_final if t_final is None else t_final
        report = RunReport()
        report.initial_norm = [self.weighted_norm(q) for q in state.quantities]
        report.initial_integral = [self.integral(q) for q in state.quantities]
        report.init_cross = list(getattr(self, "init_cross_info", []))
        size0 = float(np.sqrt(sum(tt_norm_f(q) ** 2 for q in state.quantities)))
        limit = self.cfg.blowup_factor * max(size0, 1e-300)
        t0 = time.perf_counter()
        k = 0
        while state.t < t_final - 1e-14 * max(1.0, t_final):
            if self.cfg.max_steps is not None and k >= self.cfg.max_steps:
                break
            dt = self.compute_dt(state, t_final)
            rec = StepRecord(k + 1, 0.0, dt, {}, [], [], [])
            state = self.step(state, dt, rec)
            rec.t = state.t
            rec.ranks = {nm: q.max_rank for nm, q in zip(state.names, state.quantities)}
            total = float(np.sqrt(sum(tt_norm_f(q) ** 2 for q in state.quantities)))
            if not np.isfinite(total) or total > limit:
                raise BlowUpError(f"state norm {total:.3e} exceeded guard at t={state.t:.4g}")
            report.steps.append(rec)
            if telemetry is not None:
                telemetry(rec)
            k += 1
        report.loop_seconds = time.perf_counter() - t0
        report.final_integral = [self.integral(q) for q in state.quantities]
        return state, report


def with_cfg(cfg: SolverConfig, **kw) -> SolverConfig:
    """Copy of ``cfg`` with fields replaced; a derived flux cross config is rebuilt."""
    out = replace(cfg, **kw)
    if "epsilon_tt" in kw:
        if "flux_cross" not in kw:
            out.flux_cross = replace(cfg.flux_cross, target_tolerance=out.epsilon_tt)
        if "init_cross" not in kw:
            out.init_cross = replace(cfg.init_cross, target_tolerance=out.epsilon_tt)
    return out
