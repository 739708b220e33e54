"""Full-grid reference implementations.

``DenseSFV`` runs the same stochastic finite-volume scheme as
:class:`ttsfv.engine.SFVSolver` on plain numpy arrays, so the two can be
compared entry by entry.  Node values are never stored for the whole grid:
the flux is accumulated one tuple of Gauss nodes at a time and in chunks
along the flux axis.

``weno1d_solve`` is an ordinary per-sample WENO3 solver used by the Monte
Carlo reference for scalar laws.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass

import numpy as np

from .engine import DEFAULT_CFL, DT_SAFETY, INTEGRATORS
from .mesh import Mesh, StochasticMeasure, averaging_matrix
from .models import FluxModel, rusanov
from .weno import (
    WENO_EPS,
    build_interface_operators,
    build_quadrature_operators,
    dense_axis_indicators,
    gauss_nodes,
    smoothness_indicators,
    weno3_weights,
)

MAX_DENSE_STOCHASTIC = 3
CHUNK_CELLS = 2**21


def _ssp_combine(integrator: str, U0, L, dt):
    """Generic SSP update driven by a right-hand-side callable ``L(U, t_offset)``."""
    if integrator == "Euler":
        return [u + dt * r for u, r in zip(U0, L(U0, 0.0))]
    U1 = [u + dt * r for u, r in zip(U0, L(U0, 0.0))]
    if integrator == "SSP22":
        return [0.5 * a + 0.5 * (b + dt * r) for a, b, r in zip(U0, U1, L(U1, dt))]
    U2 = [0.75 * a + 0.25 * (b + dt * r) for a, b, r in zip(U0, U1, L(U1, dt))]
    return [a / 3.0 + 2.0 / 3.0 * (b + dt * r) for a, b, r in zip(U0, U2, L(U2, 0.5 * dt))]


def _pad(u: np.ndarray, axis: int, boundary: str) -> np.ndarray:
    """One ghost cell on each side of ``axis``."""
    u = np.moveaxis(u, axis, 0)
    if boundary == "periodic":
        out = np.concatenate([u[-1:], u, u[:1]], axis=0)
    else:
        out = np.concatenate([u[:1], u, u[-1:]], axis=0)
    return np.moveaxis(out, 0, axis)


@dataclass
class DenseReport:
    dts: list
    seconds: float
    steps: int


class DenseSFV:
    """Stochastic finite volumes on the full tensor-product grid (``m <= 3``)."""

    def __init__(self, model: FluxModel, mesh: Mesh, measure: StochasticMeasure | None = None,
                 integrator: str = "SSP33", cfl: float | None = None, nu="pointwise",
                 weno_eps: float = WENO_EPS):
        if mesh.m > MAX_DENSE_STOCHASTIC:
            raise MemoryError(f"dense oracle refuses m={mesh.m} > {MAX_DENSE_STOCHASTIC} stochastic axes")
        if integrator not in INTEGRATORS:
            raise ValueError(f"integrator must be one of {INTEGRATORS}")
        self.model, self.mesh = model, mesh
        self.measure = measure or StochasticMeasure(mesh)
        self.integrator = integrator
        self.cfl = DEFAULT_CFL[integrator] if cfl is None else cfl
        self.nu = nu
        self.weno_eps = weno_eps
        nq = mesh.nodes
        # per-axis cell-wise node weights, shape (N, nq)
        self._w = []
        for k in range(mesh.d):
            a = averaging_matrix(mesh, self.measure, k)
            N = mesh.shape[k]
            self._w.append(a[np.arange(N)[:, None], np.arange(N)[:, None] * nq + np.arange(nq)[None, :]])

    # -- initial data --------------------------------------------------

    def cell_average_init(self, u0) -> list[np.ndarray]:
        """Tensor-product Gauss quadrature of ``u0`` cell by cell."""
        mesh, nq = self.mesh, self.mesh.nodes
        d = mesh.d
        out = [np.zeros(mesh.shape) for _ in range(self.model.p)]
        for tup in itertools.product(range(nq), repeat=d):
            coords = []
            weight = np.ones(mesh.shape)
            for k, b in enumerate(tup):
                pts = mesh.quad_points(k).reshape(-1, nq)[:, b]
                shape = [1] * d
                shape[k] = -1
                coords.append(np.broadcast_to(pts.reshape(shape), mesh.shape))
                weight = weight * self._w[k][:, b].reshape(shape)
            vals = u0(coords[: mesh.n], coords[mesh.n:])
            for o, v in zip(out, vals):
                o += weight * v
        return out

    # -- reconstruction ------------------------------------------------

    def _operators(self, U):
        ops = []
        for u in U:
            per_axis = []
            for k in range(self.mesh.d):
                bnd = self.mesh.boundary(k)
                ind = dense_axis_indicators(u, k, bnd)
                entry = {"Q": build_quadrature_operators(nodes=self.mesh.nodes, boundary=bnd,
                                                         eps=self.weno_eps, indicators=ind)}
                if k < self.mesh.n:
                    entry["L"], entry["R"] = build_interface_operators(boundary=bnd, eps=self.weno_eps,
                                                                       indicators=ind)
                per_axis.append(entry)
            ops.append(per_axis)
        return ops

    def _axis_flux(self, U, ops, s: int, nu) -> list[np.ndarray]:
        """Cell-averaged numerical flux at interfaces ``i + 1/2`` along axis ``s``."""
        mesh, d, p = self.mesh, self.mesh.d, self.model.p
        nq = mesh.nodes
        bnd = mesh.boundary(s)
        others = [k for k in range(d) if k != s]
        N = mesh.shape[s]
        G = [np.zeros(mesh.shape) for _ in range(p)]
        slab = int(np.prod(mesh.shape)) // N
        step = max(1, CHUNK_CELLS // max(slab, 1))

        for a in range(0, N, step):
            b = min(N, a + step)
            # cells a-1 .. b+1 along s, so both traces of every interface are available
            idx = np.arange(a - 1, b + 2)
            if bnd == "periodic":
                idx %= N
            else:
                idx = np.clip(idx, 0, N - 1)
            local = [np.take(u, idx, axis=s) for u in U]

            def recurse(level, arrays, weight):
                if level == len(others):
                    UL, UR = [], []
                    for ell in range(p):
                        L, R = ops[ell][s]["L"], ops[ell][s]["R"]
                        arr = np.moveaxis(arrays[ell], s, 0)
                        rows = slice(a, b)
                        lo, mid, hi = arr[:-2], arr[1:-1], arr[2:]
                        shape = (-1,) + (1,) * (arr.ndim - 1)
                        # trace on the left of i+1/2 from cell i
                        ul = (L.lower[rows].reshape(shape) * lo[:-1] + L.diag[rows].reshape(shape) * mid[:-1]
                              + L.upper[rows].reshape(shape) * hi[:-1])
                        # trace on the right of i+1/2 from cell i+1
                        j = np.arange(a + 1, b + 1)
                        j = j % N if bnd == "periodic" else np.minimum(j, N - 1)
                        ur = (R.lower[j].reshape(shape) * lo[1:] + R.diag[j].reshape(shape) * mid[1:]
                              + R.upper[j].reshape(shape) * hi[1:])
                        if bnd != "periodic" and b == N:
                            # interface past the last cell reuses the last cell's right trace
                            ur[-1] = (R.lower[N - 1] * lo[-2] + R.diag[N - 1] * mid[-2] + R.upper[N - 1] * hi[-2])
                        UL.append(np.moveaxis(ul, 0, s))
                        UR.append(np.moveaxis(ur, 0, s))
                    F = rusanov(self.model, s, UL, UR, nu)
                    for ell in range(p):
                        sl = [slice(None)] * d
                        sl[s] = slice(a, b)
                        G[ell][tuple(sl)] += weight * F[ell]
                    return
                k = others[level]
                shape = [1] * d
                shape[k] = -1
                for beta in range(nq):
                    nxt = [ops[ell][k]["Q"][beta].apply(arrays[ell], axis=k) for ell in range(p)]
                    recurse(level + 1, nxt, weight * self._w[k][:, beta].reshape(shape))

            recurse(0, local, np.ones([1] * d))
        return G

    def rhs(self, U, t: float = 0.0) -> list[np.ndarray]:
        ops = self._operators(U)
        nu = self.nu if self.nu != "global" else float(np.max(self.model.max_speed(U)))
        out = [np.zeros(self.mesh.shape) for _ in range(self.model.p)]
        for s in range(self.mesh.n):
            G = self._axis_flux(U, ops, s, nu)
            bnd = self.mesh.boundary(s)
            h = self.mesh.spacing(s)
            for ell in range(self.model.p):
                g = np.moveaxis(G[ell], s, 0)
                prev = np.roll(g, 1, axis=0) if bnd == "periodic" else np.concatenate([g[:1], g[:-1]], axis=0)
                out[ell] -= np.moveaxis(g - prev, 0, s) / h
        return out

    def compute_dt(self, U, t: float, t_end: float) -> float:
        smax = float(np.max(self.model.max_speed(U)))
        hmin = min(self.mesh.spacing(s) for s in range(self.mesh.n))
        dt = DT_SAFETY * self.cfl * hmin / smax if smax > 0 else np.inf
        return min(dt, t_end - t)

    def step(self, U, dt: float, t: float = 0.0):
        return _ssp_combine(self.integrator, U, lambda V, off: self.rhs(V, t + off), dt)

    def run(self, U, t_final: float, dt_schedule=None, max_steps: int | None = None):
        """Advance to ``t_final``; ``dt_schedule`` replays a fixed list of steps."""
        U = [np.array(u, dtype=np.float64) for u in U]
        t, dts = 0.0, []
        t0 = time.perf_counter()
        if dt_schedule is not None:
            for dt in dt_schedule:
                U = self.step(U, dt, t)
                t += dt
                dts.append(dt)
        else:
            while t < t_final - 1e-14 * max(1.0, t_final):
                if max_steps is not None and len(dts) >= max_steps:
                    break
                dt = self.compute_dt(U, t, t_final)
                U = self.step(U, dt, t)
                t += dt
                dts.append(dt)
        return U, DenseReport(dts, time.perf_counter() - t0, len(dts))

    def expectation(self, u: np.ndarray) -> np.ndarray:
        out = u
        for j in reversed(range(self.mesh.m)):
            out = np.tensordot(out, self.measure.cell_measures(j), axes=([self.mesh.n + j], [0]))
        return out


# --- per-sample WENO3 for Monte Carlo references ----------------------------

def weno3_rhs_1d(u: np.ndarray, h: float, model: FluxModel, boundary: str = "periodic",
                 eps: float = WENO_EPS) -> np.ndarray:
    """Semi-discrete WENO3 + Rusanov right-hand side for a batch of rows ``(S, N)``."""
    b0, b1 = smoothness_indicators(u, boundary)
    lo = np.roll(u, 1, axis=-1) if boundary == "periodic" else np.concatenate([u[:, :1], u[:, :-1]], axis=1)
    hi = np.roll(u, -1, axis=-1) if boundary == "periodic" else np.concatenate([u[:, 1:], u[:, -1:]], axis=1)
    wl0, wl1 = weno3_weights(b0, b1, "L", eps)
    wr0, wr1 = weno3_weights(b0, b1, "R", eps)
    uL = u + 0.5 * wl0 * (hi - u) + 0.5 * wl1 * (u - lo)
    uR = u - 0.5 * wr0 * (hi - u) - 0.5 * wr1 * (u - lo)
    if boundary == "periodic":
        uR_next = np.roll(uR, -1, axis=-1)
    else:
        uR_next = np.concatenate([uR[:, 1:], uR[:, -1:]], axis=1)
    F = rusanov(model, 0, [uL], [uR_next])[0]
    Fm = np.roll(F, 1, axis=-1) if boundary == "periodic" else np.concatenate([F[:, :1], F[:, :-1]], axis=1)
    return -(F - Fm) / h


def weno1d_solve(u0: np.ndarray, h: float, model: FluxModel, t_final: float, integrator: str = "SSP33",
                 cfl: float | None = None, boundary: str = "periodic") -> tuple[np.ndarray, int]:
    """Evolve a batch of independent 1-D cell-average rows to ``t_final``.

    All rows share the time step set by the fastest row.
    """
    cfl = DEFAULT_CFL[integrator] if cfl is None else cfl
    U = [np.array(u0, dtype=np.float64)]
    t, n = 0.0, 0
    while t < t_final - 1e-14 * max(1.0, t_final):
        smax = float(np.max(model.max_speed(U)))
        dt = min(DT_SAFETY * cfl * h / smax if smax > 0 else np.inf, t_final - t)
        U = _ssp_combine(integrator, U, lambda V, off: [weno3_rhs_1d(V[0], h, model, boundary)], dt)
        t += dt
        n += 1
    return U[0], n


def stratified_samples(law, count: int, rng, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
    """One draw per equal-probability stratum, mapped through the quantile function."""
    q = (np.arange(count) + rng.random(count)) / count
    return law.ppf(q, lo, hi)


def monte_carlo_expectation(u0_xy, model: FluxModel, mesh: Mesh, law, t_final: float, samples: int = 4096,
                            seed=0, integrator: str = "SSP33", cfl: float | None = None) -> np.ndarray:
    """Sample mean of per-sample WENO3 solutions on the physical grid of ``mesh`` (``n = 1``).

    ``u0_xy(x, y)`` takes a coordinate array and a scalar parameter array
    broadcast against it.
    """
    if mesh.n != 1:
        raise ValueError("Monte Carlo reference supports one physical axis")
    rng = np.random.default_rng(seed)
    ys = stratified_samples(law, samples, rng, *mesh.stochastic_extents[0])
    xi, w = gauss_nodes(mesh.nodes)
    xc, h = mesh.centers(0), mesh.spacing(0)
    u0 = sum(wq * u0_xy(xc[None, :] + h * x, ys[:, None]) for x, wq in zip(xi, w))
    uT, _ = weno1d_solve(u0, h, model, t_final, integrator, cfl, mesh.boundaries[0])
    return uT.mean(axis=0)
