"""Global WENO3 reconstruction operators along one axis.

Inside cell ``i`` two linear polynomials are blended::

    p0(xi) = ubar_i + (ubar_{i+1} - ubar_i) * xi
    p1(xi) = ubar_i + (ubar_i - ubar_{i-1}) * xi

with ``xi`` the position relative to the cell centre in units of the cell
width (``xi = +1/2`` is the right interface, ``-1/2`` the left one).  The
blend ``w0 p0 + w1 p1`` is linear in the cell averages, so for fixed weights
the whole reconstruction is a tridiagonal matrix acting on the vector of
averages.  Row ``i`` has entries ``(-w1 xi, 1 - w0 xi + w1 xi, w0 xi)`` on
columns ``(i-1, i, i+1)``, which gives the interface matrices ``L``
(``xi = 1/2``), ``R`` (``xi = -1/2``) and the quadrature-point matrices ``Q``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .tt import TTTensor, apply_matrix_to_core, gram_environments

BoundaryMode = Literal["periodic", "extrapolate", "truncated-stencil"]
BOUNDARY_MODES = ("periodic", "extrapolate", "truncated-stencil")
WENO_EPS = 1e-6

# below this |xi| the quadratic-exact linear weights leave [0, 1]
_XI_POSITIVE = (np.sqrt(4.0 / 3.0) - 1.0) / 2.0


def gauss_nodes(count: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes on (-1/2, 1/2) and weights summing to 1."""
    if count < 1:
        raise ValueError("need at least one quadrature node")
    x, w = np.polynomial.legendre.leggauss(count)
    return 0.5 * x, 0.5 * w


def linear_weights(xi: float) -> tuple[float, float]:
    """Optimal weights ``(d0, d1)`` making the blend exact for quadratics at ``xi``.

    At ``xi = 0`` both polynomials coincide and the split is arbitrary; near
    zero the exact weights leave ``[0, 1]`` and are clipped.
    """
    if abs(xi) > 0.5 + 1e-14:
        raise ValueError(f"node {xi} lies outside the reference cell")
    if xi == 0.0:
        return 0.5, 0.5
    d0 = 0.5 + (0.5 * xi * xi - 1.0 / 24.0) / xi
    d0 = min(1.0, max(0.0, d0))
    return d0, 1.0 - d0


def _side_xi(side) -> float:
    if side == "L":
        return 0.5
    if side == "R":
        return -0.5
    return float(side)


def _ghosts(u: np.ndarray, boundary: str, axis: int = -1) -> tuple[np.ndarray, np.ndarray]:
    """Arrays of left and right neighbours ``u_{i-1}``, ``u_{i+1}`` along ``axis``."""
    if boundary == "periodic":
        return np.roll(u, 1, axis=axis), np.roll(u, -1, axis=axis)
    if boundary in ("extrapolate", "truncated-stencil"):
        u = np.moveaxis(u, axis, -1)
        lo = np.concatenate([u[..., :1], u[..., :-1]], axis=-1)
        hi = np.concatenate([u[..., 1:], u[..., -1:]], axis=-1)
        return np.moveaxis(lo, -1, axis), np.moveaxis(hi, -1, axis)
    raise ValueError(f"unknown boundary mode {boundary!r}")


def smoothness_indicators(ubar, boundary: BoundaryMode = "periodic") -> tuple[np.ndarray, np.ndarray]:
    """``beta0 = (u_{i+1} - u_i)^2`` and ``beta1 = (u_i - u_{i-1})^2`` per cell.

    With ``truncated-stencil`` the stencil that would leave the domain gets an
    infinite indicator, which zeroes its weight.
    """
    u = np.asarray(ubar, dtype=np.float64)
    lo, hi = _ghosts(u, boundary)
    beta0 = (hi - u) ** 2
    beta1 = (u - lo) ** 2
    if boundary == "truncated-stencil":
        beta0[..., -1] = np.inf
        beta1[..., 0] = np.inf
    return beta0, beta1


def weno3_weights(beta0, beta1, side="L", eps: float = WENO_EPS) -> tuple[np.ndarray, np.ndarray]:
    """Nonlinear weights ``w_m = alpha_m / sum(alpha)``, ``alpha_m = d_m / (eps + beta_m)^2``.

    ``side`` is ``"L"`` (right interface of the cell), ``"R"`` (left
    interface) or a node position ``xi`` in ``[-1/2, 1/2]``.
    """
    d0, d1 = linear_weights(_side_xi(side))
    b0 = np.asarray(beta0, dtype=np.float64)
    b1 = np.asarray(beta1, dtype=np.float64)
    with np.errstate(over="ignore", divide="ignore"):
        a0 = d0 / (eps + b0) ** 2
        a1 = d1 / (eps + b1) ** 2
    tot = a0 + a1
    # both stencils flagged infinite: keep the linear weights
    safe = tot > 0
    w0 = np.where(safe, a0 / np.where(safe, tot, 1.0), d0)
    return w0, 1.0 - w0


@dataclass(frozen=True)
class StencilOperator:
    """Tridiagonal reconstruction operator with a boundary treatment.

    Row ``i`` computes ``lower[i] u_{i-1} + diag[i] u_i + upper[i] u_{i+1}``;
    out-of-range neighbours are wrapped (``periodic``) or replaced by the edge
    cell (``extrapolate``).  Coefficient arrays may carry leading batch axes
    (one operator per fiber).
    """

    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray
    boundary: str

    @property
    def size(self) -> int:
        return self.diag.shape[-1]

    def to_dense(self) -> np.ndarray:
        n = self.size
        batch = self.diag.shape[:-1]
        m = np.zeros(batch + (n, n))
        i = np.arange(n)
        m[..., i, i] = self.diag
        m[..., i[1:], i[1:] - 1] = self.lower[..., 1:]
        m[..., i[:-1], i[:-1] + 1] = self.upper[..., :-1]
        if self.boundary == "periodic":
            m[..., 0, n - 1] += self.lower[..., 0]
            m[..., n - 1, 0] += self.upper[..., -1]
        else:
            m[..., 0, 0] += self.lower[..., 0]
            m[..., n - 1, n - 1] += self.upper[..., -1]
        return m

    def apply(self, u, axis: int = -1) -> np.ndarray:
        """Apply along ``axis`` of a dense array (unbatched operators only)."""
        u = np.asarray(u, dtype=np.float64)
        lo, hi = _ghosts(u, self.boundary, axis)
        shape = [1] * u.ndim
        shape[axis] = self.size
        return (
            self.lower.reshape(shape) * lo
            + self.diag.reshape(shape) * u
            + self.upper.reshape(shape) * hi
        )


def stencil_operator(beta0, beta1, xi: float, boundary: BoundaryMode = "periodic",
                     eps: float = WENO_EPS) -> StencilOperator:
    """WENO3 point-value operator at relative node position ``xi``."""
    if boundary not in BOUNDARY_MODES:
        raise ValueError(f"unknown boundary mode {boundary!r}")
    w0, w1 = weno3_weights(beta0, beta1, xi, eps)
    lower = -w1 * xi
    upper = w0 * xi
    diag = 1.0 - lower - upper
    return StencilOperator(lower, diag, upper, boundary)


@dataclass(frozen=True)
class ReconstructionOperator:
    L: StencilOperator
    R: StencilOperator
    Q: tuple[StencilOperator, ...]
    nodes: tuple[float, ...]
    boundary: str

    @property
    def axis_length(self) -> int:
        return self.L.size

    def expansion_matrix(self) -> np.ndarray:
        """Stacked ``Q`` matrices, row ``gamma * Nq + beta`` = row ``gamma`` of ``Q[beta]``."""
        return interleave([q.to_dense() for q in self.Q])


def interleave(mats) -> np.ndarray:
    nq = len(mats)
    stacked = np.stack(mats, axis=-2)  # (..., N, nq, N)
    return stacked.reshape(stacked.shape[:-3] + (stacked.shape[-3] * nq, stacked.shape[-1]))


def _check_length(n: int, boundary: str) -> None:
    if n < 3 and boundary != "periodic":
        raise ValueError("WENO3 needs at least 3 cells without periodic ghosts")
    if n < 1:
        raise ValueError("empty axis")


def build_interface_operators(ubar=None, boundary: BoundaryMode = "periodic", eps: float = WENO_EPS,
                              indicators=None) -> tuple[StencilOperator, StencilOperator]:
    """``(L, R)``: ``L @ ubar`` gives ``u^L_{i+1/2}``, ``R @ ubar`` gives ``u^R_{i-1/2}``.

    Weights come from ``ubar`` unless explicit ``indicators = (beta0, beta1)``
    are given.
    """
    beta0, beta1 = indicators if indicators is not None else smoothness_indicators(ubar, boundary)
    _check_length(np.shape(beta0)[-1], boundary)
    return (stencil_operator(beta0, beta1, 0.5, boundary, eps),
            stencil_operator(beta0, beta1, -0.5, boundary, eps))


def build_quadrature_operators(ubar=None, nodes=3, boundary: BoundaryMode = "periodic",
                               eps: float = WENO_EPS, indicators=None) -> list[StencilOperator]:
    """One ``Q`` operator per node; ``nodes`` is a count (Gauss) or explicit positions."""
    xs = gauss_nodes(nodes)[0] if np.isscalar(nodes) else np.asarray(nodes, dtype=np.float64)
    if np.any(np.abs(xs) > 0.5):
        raise ValueError("quadrature nodes must lie in the reference cell [-1/2, 1/2]")
    beta0, beta1 = indicators if indicators is not None else smoothness_indicators(ubar, boundary)
    _check_length(np.shape(beta0)[-1], boundary)
    return [stencil_operator(beta0, beta1, float(x), boundary, eps) for x in xs]


def build_reconstruction(ubar=None, nodes=3, boundary: BoundaryMode = "periodic",
                         eps: float = WENO_EPS, indicators=None) -> ReconstructionOperator:
    ind = indicators if indicators is not None else smoothness_indicators(ubar, boundary)
    L, R = build_interface_operators(boundary=boundary, eps=eps, indicators=ind)
    xs = gauss_nodes(nodes)[0] if np.isscalar(nodes) else np.asarray(nodes, dtype=np.float64)
    Q = build_quadrature_operators(nodes=xs, boundary=boundary, eps=eps, indicators=ind)
    return ReconstructionOperator(L, R, tuple(Q), tuple(float(x) for x in xs), boundary)


# --- indicators for TT data -------------------------------------------------

def _neighbour_cores(core: np.ndarray, boundary: str) -> np.ndarray:
    """Core with fibers shifted so slot ``i`` holds slot ``i+1``."""
    if boundary == "periodic":
        return np.roll(core, -1, axis=1)
    return np.concatenate([core[:, 1:, :], core[:, -1:, :]], axis=1)


def tt_axis_indicators(t: TTTensor, axis: int, boundary: BoundaryMode = "periodic",
                       envs=None) -> tuple[np.ndarray, np.ndarray]:
    """Smoothness indicators along ``axis`` averaged over all other indices.

    ``beta0[i]`` is the mean over the remaining axes of
    ``(t[..., i+1, ...] - t[..., i, ...])^2``, evaluated exactly from the cores
    and the Gram environments, so the dense array is never formed.
    """
    left, right = envs if envs is not None else gram_environments(t)
    core = t.cores[axis]
    diff = _neighbour_cores(core, boundary) - core  # (r0, n, r1)
    sq = np.einsum("ab,anc,cd,bnd->n", left[axis], diff, right[axis + 1], diff, optimize=True)
    others = float(np.prod(t.mode_sizes)) / t.mode_sizes[axis]
    beta0 = np.maximum(sq, 0.0) / others
    if boundary == "periodic":
        beta1 = np.roll(beta0, 1)
    else:
        beta1 = np.concatenate([[0.0], beta0[:-1]])
    if boundary == "truncated-stencil":
        beta0[-1] = np.inf
        beta1[0] = np.inf
    return beta0, beta1


def dense_axis_indicators(u: np.ndarray, axis: int, boundary: BoundaryMode = "periodic"):
    """Dense counterpart of :func:`tt_axis_indicators`."""
    u = np.moveaxis(np.asarray(u, dtype=np.float64), axis, 0)
    n = u.shape[0]
    if boundary == "periodic":
        diff = np.roll(u, -1, axis=0) - u
    else:
        diff = np.concatenate([u[1:] - u[:-1], np.zeros_like(u[:1])], axis=0)
    beta0 = np.mean(diff.reshape(n, -1) ** 2, axis=1)
    if boundary == "periodic":
        beta1 = np.roll(beta0, 1)
    else:
        beta1 = np.concatenate([[0.0], beta0[:-1]])
    if boundary == "truncated-stencil":
        beta0[-1] = np.inf
        beta1[0] = np.inf
    return beta0, beta1


def fiber_indicators(core: np.ndarray, boundary: BoundaryMode = "periodic"):
    """Per-fiber indicators of a core, batch shape ``(r0, r1)``."""
    fibers = np.moveaxis(core, 1, -1)  # (r0, r1, n)
    return smoothness_indicators(fibers, boundary)


def reconstruct_axis(t: TTTensor, axis: int, kind: str, nodes=3, boundary: BoundaryMode = "periodic",
                     eps: float = WENO_EPS, indicators=None, weights: str = "aggregate") -> TTTensor:
    """Apply ``L`` (``kind="L"``), ``R`` (``"R"``) or the stacked ``Q`` (``"Q"``) to core ``axis``.

    ``weights="aggregate"`` uses one weight set per cell from
    :func:`tt_axis_indicators` (or the supplied ``indicators``);
    ``weights="fiber"`` builds a separate operator for every
    ``(alpha_{k-1}, alpha_k)`` fiber of the core.
    """
    if kind not in ("L", "R", "Q"):
        raise ValueError(f"unknown reconstruction kind {kind!r}")
    if weights == "fiber":
        return _reconstruct_fiberwise(t, axis, kind, nodes, boundary, eps)
    if weights != "aggregate":
        raise ValueError(f"unknown weight mode {weights!r}")
    if indicators is None:
        indicators = tt_axis_indicators(t, axis, boundary)
    if kind == "Q":
        qs = build_quadrature_operators(nodes=nodes, boundary=boundary, eps=eps, indicators=indicators)
        m = interleave([q.to_dense() for q in qs])
    else:
        L, R = build_interface_operators(boundary=boundary, eps=eps, indicators=indicators)
        m = (L if kind == "L" else R).to_dense()
    return apply_matrix_to_core(t, axis, m)


def _reconstruct_fiberwise(t, axis, kind, nodes, boundary, eps):
    core = t.cores[axis]
    ind = fiber_indicators(core, boundary)
    if kind == "Q":
        qs = build_quadrature_operators(nodes=nodes, boundary=boundary, eps=eps, indicators=ind)
        m = interleave([q.to_dense() for q in qs])
    else:
        L, R = build_interface_operators(boundary=boundary, eps=eps, indicators=ind)
        m = (L if kind == "L" else R).to_dense()
    # m: (r0, r1, n', n)
    new = np.einsum("abmn,anb->amb", m, core)
    cores = list(t.cores)
    cores[axis] = new
    return TTTensor(cores)


def apply_stencils_to_core(core: np.ndarray, ops) -> np.ndarray:
    """Apply one operator (or a list, interleaved cell-major) to the middle axis of a core."""
    if isinstance(ops, StencilOperator):
        return ops.apply(core, axis=1)
    parts = [op.apply(core, axis=1) for op in ops]
    r0, n, r1 = core.shape
    return np.stack(parts, axis=2).reshape(r0, n * len(parts), r1)
