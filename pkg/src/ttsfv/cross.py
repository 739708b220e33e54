"""Maxvol pivoting and TT cross approximation of black-box tensors.

The cross sweep is single-site: at each core the fiber block
``f(I_k x [n_k] x J_{k+1})`` is sampled, compressed by a truncated SVD,
enriched with a few random directions (so ranks can grow), and the next
nested index set is picked by maxvol.  ``tt_cross`` takes an arbitrary
function of multi-indices; ``tt_cross_map`` approximates an element-wise
function of existing TT tensors and samples their fiber blocks directly
through cached interface matrices, which is much cheaper.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .tt import TTTensor, _normalize_caps, tt_add, tt_norm_f, tt_round, tt_scale


class CrossWarning(UserWarning):
    pass


class MaxvolWarning(UserWarning):
    pass


class NonFiniteSampleError(FloatingPointError):
    """Raised when the sampled function returns NaN or inf."""

    def __init__(self, index):
        self.index = tuple(int(i) for i in index)
        super().__init__(f"non-finite function value at multi-index {self.index}")


@dataclass
class CrossConfig:
    target_tolerance: float = 1e-6
    max_rank: int | Sequence[int] = 16
    max_sweeps: int = 10
    maxvol_tolerance: float = 1.01
    maxvol_iters: int = 100
    init_rank: int = 2
    kick_rank: int = 2
    n_check: int = 1024

    def __post_init__(self):
        if not self.target_tolerance > 0:
            raise ValueError("target_tolerance must be positive")
        caps = [self.max_rank] if np.isscalar(self.max_rank) else list(self.max_rank)
        if min(caps) < 1:
            raise ValueError("max_rank must be >= 1")
        if self.maxvol_tolerance < 1:
            raise ValueError("maxvol_tolerance must be >= 1")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be >= 1")


@dataclass
class CrossInfo:
    sweeps: int = 0
    converged: bool = False
    error_estimate: float = float("nan")
    evaluations: int = 0
    rank_capped: bool = False
    ranks: tuple[int, ...] = field(default_factory=tuple)


def _lu_seed(a: np.ndarray) -> np.ndarray:
    p, _, _ = scipy.linalg.lu(a, p_indices=True)
    # a = l[p] @ u, so rows of ``a`` landing in the first r rows of l are the pivots
    return np.argsort(p)[: a.shape[1]]


def maxvol(a, tol: float = 1.01, max_iters: int = 100) -> np.ndarray:
    """Rows of a tall ``p x r`` matrix spanning a quasi-maximal-volume submatrix.

    On return every entry of ``a @ inv(a[I])`` has modulus at most ``tol``
    unless ``max_iters`` swaps were not enough, in which case a
    :class:`MaxvolWarning` is issued and the best set found is returned.
    """
    a = np.asarray(a, dtype=np.float64)
    p, r = a.shape
    if p < r:
        raise ValueError(f"maxvol needs p >= r, got {a.shape}")
    if tol < 1:
        raise ValueError("tol must be >= 1")
    if p == r:
        return np.arange(p)
    idx = _lu_seed(a)
    try:
        b = np.linalg.solve(a[idx].T, a.T).T
    except np.linalg.LinAlgError:
        # rank-deficient seed; fall back on column-pivoted QR of a^T
        _, _, piv = scipy.linalg.qr(a.T, pivoting=True, mode="economic")
        idx = piv[:r]
        try:
            b = np.linalg.solve(a[idx].T, a.T).T
        except np.linalg.LinAlgError as exc:
            raise np.linalg.LinAlgError("maxvol: matrix has deficient column rank") from exc
    for _ in range(max_iters):
        i, j = np.unravel_index(np.argmax(np.abs(b)), b.shape)
        bij = b[i, j]
        if abs(bij) <= tol:
            return idx
        idx[j] = i
        col = b[:, j].copy()
        row = b[i, :].copy()
        row[j] -= 1.0
        b -= np.outer(col, row) / bij
    if np.max(np.abs(b)) > tol:
        warnings.warn(f"maxvol did not converge in {max_iters} iterations", MaxvolWarning)
    return idx


class _FunctionSampler:
    """Fiber-block sampler for a function of integer multi-indices."""

    def __init__(self, f: Callable[[np.ndarray], np.ndarray], mode_sizes: Sequence[int]):
        self.f = f
        self.n = tuple(int(x) for x in mode_sizes)
        d = len(self.n)
        self.left: list[np.ndarray | None] = [None] * (d + 1)
        self.right: list[np.ndarray | None] = [None] * (d + 1)
        self.left[0] = np.zeros((1, 0), dtype=np.intp)
        self.right[d] = np.zeros((1, 0), dtype=np.intp)
        self.evaluations = 0

    def _call(self, idx: np.ndarray) -> np.ndarray:
        vals = np.asarray(self.f(idx), dtype=np.float64).reshape(-1)
        self.evaluations += idx.shape[0]
        bad = ~np.isfinite(vals)
        if bad.any():
            raise NonFiniteSampleError(idx[np.argmax(bad)])
        return vals

    def sample(self, idx: np.ndarray) -> np.ndarray:
        return self._call(idx)

    def block(self, k: int) -> np.ndarray:
        li, rj = self.left[k], self.right[k + 1]
        rl, rr, nk = li.shape[0], rj.shape[0], self.n[k]
        idx = np.empty((rl, nk, rr, len(self.n)), dtype=np.intp)
        idx[..., :k] = li[:, None, None, :]
        idx[..., k] = np.arange(nk)[None, :, None]
        idx[..., k + 1 :] = rj[None, None, :, :]
        return self._call(idx.reshape(-1, len(self.n))).reshape(rl, nk, rr)

    def set_left(self, k: int, parent: np.ndarray, i: np.ndarray) -> None:
        """Index set for the bond left of core ``k`` from rows of ``I_{k-1} x [n]``."""
        self.left[k] = np.concatenate([self.left[k - 1][parent], i[:, None]], axis=1)

    def set_right(self, k: int, i: np.ndarray, parent: np.ndarray) -> None:
        self.right[k] = np.concatenate([i[:, None], self.right[k + 1][parent]], axis=1)


class _MapSampler(_FunctionSampler):
    """Sampler for ``func(T_1[idx], ..., T_q[idx])`` with TT inputs."""

    def __init__(self, func: Callable[..., np.ndarray], tensors: Sequence[TTTensor]):
        self.func = func
        self.tensors = list(tensors)
        super().__init__(self._pointwise, tensors[0].mode_sizes)
        d = len(self.n)
        self.li = [[None] * (d + 1) for _ in self.tensors]
        self.ri = [[None] * (d + 1) for _ in self.tensors]
        for q in range(len(self.tensors)):
            self.li[q][0] = np.ones((1, 1))
            self.ri[q][d] = np.ones((1, 1))

    def _pointwise(self, idx: np.ndarray) -> np.ndarray:
        return self.func(*[t.evaluate(idx) for t in self.tensors])

    def block(self, k: int) -> np.ndarray:
        args = [
            np.einsum("ia,anb,bj->inj", self.li[q][k], t.cores[k], self.ri[q][k + 1], optimize=True)
            for q, t in enumerate(self.tensors)
        ]
        vals = np.asarray(self.func(*args), dtype=np.float64)
        self.evaluations += vals.size
        bad = ~np.isfinite(vals)
        if bad.any():
            rl = self.left[k].shape[0]
            flat = np.argmax(bad.reshape(-1))
            a, i, b = np.unravel_index(flat, vals.shape)
            idx = np.concatenate([self.left[k][a], [i], self.right[k + 1][b]])
            raise NonFiniteSampleError(idx)
        return vals

    def set_left(self, k, parent, i):
        super().set_left(k, parent, i)
        for q, t in enumerate(self.tensors):
            self.li[q][k] = np.einsum("ra,arb->rb", self.li[q][k - 1][parent], t.cores[k - 1][:, i, :])

    def set_right(self, k, i, parent):
        super().set_right(k, i, parent)
        for q, t in enumerate(self.tensors):
            self.ri[q][k] = np.einsum("arb,br->ar", t.cores[k][:, i, :], self.ri[q][k + 1][:, parent])


def _enriched_basis(a: np.ndarray, delta_rel: float, cap: int, kick: int, rng) -> tuple[np.ndarray, int]:
    u, s, _ = np.linalg.svd(a, full_matrices=False)
    nrm = np.linalg.norm(s)
    if nrm == 0.0:
        r_keep = 1
    else:
        tail = np.sqrt(np.cumsum((s**2)[::-1]))[::-1]
        above = np.nonzero(tail > delta_rel * nrm)[0]
        r_keep = int(above[-1]) + 1 if above.size else 1
    rows = a.shape[0]
    r_keep = min(r_keep, cap, rows)
    r_new = min(r_keep + kick, cap, rows)
    basis = u[:, :r_keep]
    if r_new > r_keep:
        z = rng.standard_normal((rows, r_new - r_keep))
        z -= basis @ (basis.T @ z)
        basis, _ = np.linalg.qr(np.concatenate([basis, z], axis=1))
    return basis, r_keep


def _interp_factor(q: np.ndarray, sel: np.ndarray) -> np.ndarray:
    return np.linalg.solve(q[sel].T, q.T).T


def _run_cross(sampler: _FunctionSampler, cfg: CrossConfig, rng) -> tuple[TTTensor, CrossInfo]:
    n = sampler.n
    d = len(n)
    info = CrossInfo()
    tol = cfg.target_tolerance
    if d == 1:
        vals = sampler.block(0)
        info.sweeps, info.converged, info.error_estimate = 1, True, 0.0
        info.evaluations = sampler.evaluations
        t = TTTensor([vals.reshape(1, n[0], 1)])
        info.ranks = t.ranks
        return t, info

    caps = _normalize_caps(cfg.max_rank, d)
    delta_rel = tol / np.sqrt(d - 1)

    # random nested right index sets
    for k in range(d - 1, 0, -1):
        rr = sampler.right[k + 1].shape[0]
        cand = n[k] * rr
        r = min(cfg.init_rank, caps[k - 1], cand)
        sel = rng.choice(cand, size=r, replace=False)
        sampler.set_right(k, sel // rr, sel % rr)

    # held-out entries: interpolation can agree with itself between sweeps
    # while missing structure that none of the fibers has touched yet
    if cfg.n_check > 0:
        check_idx = np.stack([rng.integers(0, nk, size=cfg.n_check) for nk in n], axis=1)
        check_val = sampler.sample(check_idx)
        check_ref = np.linalg.norm(check_val)
    else:
        check_idx = None

    def held_out_error(t: TTTensor) -> float:
        if check_idx is None:
            return 0.0
        err = np.linalg.norm(check_val - t.evaluate(check_idx))
        return float(err / check_ref) if check_ref > 0 else float(err)

    def at_caps(kept) -> bool:
        return all(caps[b] is not None and kept[b] >= caps[b] for b in range(d - 1))

    def done(t, prev, kept, kept_prev) -> bool:
        if prev is None or kept_prev is None:
            return False
        if any(a > b for a, b in zip(kept, kept_prev)) or _rel_diff(t, prev) > tol:
            return False
        return at_caps(kept) or held_out_error(t) <= 2.0 * tol

    prev = None
    result = None
    kept_prev = None
    for sweep in range(cfg.max_sweeps):
        info.sweeps = sweep + 1
        # left-to-right
        cores = []
        kept = []
        for k in range(d - 1):
            blk = sampler.block(k)
            rl, nk, rr = blk.shape
            q, rk = _enriched_basis(blk.reshape(rl * nk, rr), delta_rel, caps[k], cfg.kick_rank, rng)
            kept.append(rk)
            sel = maxvol(q, cfg.maxvol_tolerance, cfg.maxvol_iters)
            cores.append(_interp_factor(q, sel).reshape(rl, nk, -1))
            sampler.set_left(k + 1, sel // nk, sel % nk)
        cores.append(sampler.block(d - 1))
        result = TTTensor(cores)
        if done(result, prev, kept, kept_prev):
            info.converged = True
            break
        prev, kept_prev = result, kept

        # right-to-left
        cores = [None] * d
        kept = [0] * (d - 1)
        for k in range(d - 1, 0, -1):
            blk = sampler.block(k)
            rl, nk, rr = blk.shape
            q, kept[k - 1] = _enriched_basis(blk.reshape(rl, nk * rr).T, delta_rel, caps[k - 1],
                                             cfg.kick_rank, rng)
            sel = maxvol(q, cfg.maxvol_tolerance, cfg.maxvol_iters)
            cores[k] = _interp_factor(q, sel).T.reshape(-1, nk, rr)
            sampler.set_right(k, sel // rr, sel % rr)
        cores[0] = sampler.block(0)
        result = TTTensor(cores)
        if done(result, prev, kept, kept_prev):
            info.converged = True
            break
        prev, kept_prev = result, kept

    result = tt_round(result, tol, caps)
    info.ranks = result.ranks
    info.error_estimate = held_out_error(result) if check_idx is not None else float("nan")
    info.evaluations = sampler.evaluations
    info.rank_capped = any(
        caps[b] is not None and result.ranks[b + 1] >= caps[b] for b in range(d - 1)
    )
    if info.rank_capped and info.error_estimate > tol:
        warnings.warn(
            f"cross hit the rank cap with estimated error {info.error_estimate:.2e} > {tol:.2e}",
            CrossWarning,
        )
    return result, info


def _rel_diff(a: TTTensor, b: TTTensor) -> float:
    na = tt_norm_f(a)
    diff = tt_norm_f(tt_add(a, tt_scale(b, -1.0)))
    return diff / na if na > 0 else diff


def _as_rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def tt_cross(
    f: Callable[[np.ndarray], np.ndarray],
    mode_sizes: Sequence[int],
    cfg: CrossConfig | None = None,
    seed=None,
    return_info: bool = False,
):
    """Approximate the tensor ``f(idx)`` in TT format from a subset of entries.

    ``f`` receives an integer array of shape ``(B, d)`` and must return ``B``
    values.  With ``return_info`` the :class:`CrossInfo` (sweeps, held-out
    error estimate, rank-cap flag) is returned alongside.
    """
    cfg = cfg or CrossConfig()
    t, info = _run_cross(_FunctionSampler(f, mode_sizes), cfg, _as_rng(seed))
    return (t, info) if return_info else t


def tt_cross_map(
    func: Callable[..., np.ndarray],
    tensors: Sequence[TTTensor],
    cfg: CrossConfig | None = None,
    seed=None,
    return_info: bool = False,
):
    """Cross approximation of ``func(T_1, ..., T_q)`` applied entry-wise."""
    if not tensors:
        raise ValueError("need at least one input tensor")
    modes = tensors[0].mode_sizes
    for t in tensors[1:]:
        if t.mode_sizes != modes:
            raise ValueError("input tensors must share mode sizes")
    cfg = cfg or CrossConfig()
    t, info = _run_cross(_MapSampler(func, tensors), cfg, _as_rng(seed))
    return (t, info) if return_info else t
