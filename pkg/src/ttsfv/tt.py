"""Tensor-train container and the core algebra used by the solver.

A d-dimensional array is stored as a chain of 3-way cores ``G_k`` of shape
``(r_{k-1}, n_k, r_k)`` with ``r_0 = r_d = 1``.  Entry ``(i_1, ..., i_d)`` is
the product ``G_1[:, i_1, :] @ ... @ G_d[:, i_d, :]``.  Index order is
row-major throughout, so ``tt_to_dense`` and ``np.reshape`` agree.
"""

from __future__ import annotations

import json
import struct
from collections.abc import Sequence

import numpy as np

DENSE_BUDGET = 10**8


class TTTensor:
    """Immutable tensor-train tensor."""

    __slots__ = ("_cores",)

    def __init__(self, cores: Sequence[np.ndarray], copy: bool = False):
        if len(cores) == 0:
            raise ValueError("a TT tensor needs at least one core")
        out = []
        for k, c in enumerate(cores):
            c = np.array(c, dtype=np.float64, copy=copy)
            if c.ndim != 3:
                raise ValueError(f"core {k} must be 3-way, got shape {c.shape}")
            out.append(c)
        if out[0].shape[0] != 1 or out[-1].shape[2] != 1:
            raise ValueError("boundary ranks must be 1")
        for k in range(len(out) - 1):
            if out[k].shape[2] != out[k + 1].shape[0]:
                raise ValueError(
                    f"rank mismatch between cores {k} and {k + 1}: "
                    f"{out[k].shape} vs {out[k + 1].shape}"
                )
        for c in out:
            c.flags.writeable = False
        self._cores = tuple(out)

    @property
    def cores(self) -> tuple[np.ndarray, ...]:
        return self._cores

    @property
    def d(self) -> int:
        return len(self._cores)

    @property
    def mode_sizes(self) -> tuple[int, ...]:
        return tuple(c.shape[1] for c in self._cores)

    @property
    def ranks(self) -> tuple[int, ...]:
        return (1,) + tuple(c.shape[2] for c in self._cores)

    @property
    def max_rank(self) -> int:
        return max(self.ranks)

    @property
    def storage(self) -> int:
        return sum(c.size for c in self._cores)

    def __repr__(self) -> str:
        return f"TTTensor(mode_sizes={self.mode_sizes}, ranks={self.ranks})"

    def __add__(self, other: TTTensor) -> TTTensor:
        return tt_add(self, other)

    def __sub__(self, other: TTTensor) -> TTTensor:
        return tt_add(self, tt_scale(other, -1.0))

    def __neg__(self) -> TTTensor:
        return tt_scale(self, -1.0)

    def __mul__(self, c) -> TTTensor:
        if isinstance(c, TTTensor):
            return tt_hadamard(self, c)
        return tt_scale(self, float(c))

    __rmul__ = __mul__

    def full(self) -> np.ndarray:
        return tt_to_dense(self)

    def norm(self) -> float:
        return tt_norm_f(self)

    def round(self, eps: float, max_rank=None) -> TTTensor:
        return tt_round(self, eps, max_rank)

    def evaluate(self, indices) -> np.ndarray:
        """Entries at a batch of multi-indices, shape ``(B, d)``."""
        idx = np.asarray(indices, dtype=np.intp)
        if idx.ndim == 1:
            idx = idx[None, :]
        if idx.shape[1] != self.d:
            raise ValueError(f"expected {self.d} indices per row, got {idx.shape[1]}")
        v = self._cores[0][0, idx[:, 0], :]
        for k in range(1, self.d):
            v = np.einsum("br,rbs->bs", v, self._cores[k][:, idx[:, k], :])
        return v[:, 0]


def tt_ones(mode_sizes: Sequence[int]) -> TTTensor:
    return TTTensor([np.ones((1, n, 1)) for n in mode_sizes])


def tt_zeros(mode_sizes: Sequence[int]) -> TTTensor:
    return TTTensor([np.zeros((1, n, 1)) for n in mode_sizes])


def tt_rank1(vectors: Sequence[np.ndarray]) -> TTTensor:
    """Outer product of 1-D vectors."""
    return TTTensor([np.asarray(v, dtype=np.float64).reshape(1, -1, 1) for v in vectors])


def _truncation_rank(s: np.ndarray, delta: float) -> int:
    # smallest r with ||s[r:]||_2 <= delta
    tail = np.sqrt(np.cumsum((s**2)[::-1]))[::-1]
    keep = np.nonzero(tail > delta)[0]
    return max(1, int(keep[-1]) + 1 if keep.size else 1)


def _exact_rank(s: np.ndarray, shape: tuple[int, int]) -> int:
    if s.size == 0 or s[0] == 0.0:
        return 1
    tol = s[0] * max(shape) * np.finfo(np.float64).eps
    return max(1, int(np.sum(s > tol)))


def tt_svd(dense, epsilon: float) -> TTTensor:
    """TT-SVD with relative Frobenius tolerance ``epsilon``.

    Every unfolding is truncated at ``epsilon / sqrt(d-1) * ||dense||_F``,
    which guarantees ``||dense - T||_F <= epsilon * ||dense||_F``.
    ``epsilon = 0`` keeps the numerical rank of each unfolding.
    """
    a = np.asarray(dense, dtype=np.float64)
    if a.size == 0:
        raise ValueError("empty tensor")
    if not np.all(np.isfinite(a)):
        raise ValueError("tensor has non-finite entries")
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    shape = a.shape if a.ndim else (1,)
    d = len(shape)
    if d == 1:
        return TTTensor([a.reshape(1, shape[0], 1)], copy=True)
    delta = epsilon / np.sqrt(d - 1) * np.linalg.norm(a)
    cores = []
    c = a.reshape(-1)
    r = 1
    for k in range(d - 1):
        mat = c.reshape(r * shape[k], -1)
        u, s, vt = np.linalg.svd(mat, full_matrices=False)
        rk = _exact_rank(s, mat.shape) if epsilon == 0 else _truncation_rank(s, delta)
        cores.append(u[:, :rk].reshape(r, shape[k], rk))
        c = s[:rk, None] * vt[:rk]
        r = rk
    cores.append(c.reshape(r, shape[-1], 1))
    return TTTensor(cores)


def tt_to_dense(t: TTTensor, budget: int = DENSE_BUDGET) -> np.ndarray:
    size = int(np.prod(t.mode_sizes, dtype=np.float64))
    if size > budget:
        raise MemoryError(f"dense tensor with {size} entries exceeds budget {budget}")
    res = t.cores[0].reshape(t.mode_sizes[0], -1)
    for c in t.cores[1:]:
        r0, n, r1 = c.shape
        res = (res @ c.reshape(r0, n * r1)).reshape(-1, r1)
    return res.reshape(t.mode_sizes)


def _orthogonalize_right(cores: list[np.ndarray]) -> list[np.ndarray]:
    """Right-orthogonalize cores 1..d-1; the norm ends up in core 0."""
    cores = list(cores)
    for k in range(len(cores) - 1, 0, -1):
        r0, n, r1 = cores[k].shape
        q, rr = np.linalg.qr(cores[k].reshape(r0, n * r1).T)
        cores[k] = q.T.reshape(-1, n, r1)
        cores[k - 1] = np.einsum("anb,cb->anc", cores[k - 1], rr)
    return cores


def _normalize_caps(max_rank, d: int) -> list[int | None]:
    if max_rank is None:
        return [None] * (d - 1)
    if np.isscalar(max_rank):
        return [int(max_rank)] * (d - 1)
    caps = [int(r) for r in max_rank]
    if len(caps) == d + 1:  # full rank vector including r_0, r_d
        caps = caps[1:-1]
    if len(caps) != d - 1:
        raise ValueError(f"need {d - 1} bond caps, got {len(caps)}")
    return caps


def tt_round(t: TTTensor, epsilon: float, max_rank=None) -> TTTensor:
    """Recompress ``t`` to relative accuracy ``epsilon``.

    ``max_rank`` (scalar or per-bond list) hard-caps the ranks; when it binds,
    the accuracy bound no longer holds.
    """
    d = t.d
    if d == 1:
        return t
    caps = _normalize_caps(max_rank, d)
    cores = _orthogonalize_right(list(t.cores))
    nrm = np.linalg.norm(cores[0])
    delta = epsilon / np.sqrt(d - 1) * nrm
    for k in range(d - 1):
        r0, n, r1 = cores[k].shape
        mat = cores[k].reshape(r0 * n, r1)
        u, s, vt = np.linalg.svd(mat, full_matrices=False)
        if nrm == 0.0:
            rk = 1
        elif epsilon == 0:
            rk = _exact_rank(s, mat.shape)
        else:
            rk = _truncation_rank(s, delta)
        if caps[k] is not None:
            rk = min(rk, caps[k])
        cores[k] = u[:, :rk].reshape(r0, n, rk)
        cores[k + 1] = np.einsum("ab,bnc->anc", s[:rk, None] * vt[:rk], cores[k + 1])
    return TTTensor(cores)


def _check_same_modes(a: TTTensor, b: TTTensor) -> None:
    if a.mode_sizes != b.mode_sizes:
        raise ValueError(f"mode sizes differ: {a.mode_sizes} vs {b.mode_sizes}")


def tt_add(a: TTTensor, b: TTTensor) -> TTTensor:
    """Entry-wise sum; internal ranks add (block-diagonal cores)."""
    _check_same_modes(a, b)
    d = a.d
    if d == 1:
        return TTTensor([a.cores[0] + b.cores[0]])
    cores = []
    for k, (ca, cb) in enumerate(zip(a.cores, b.cores)):
        ra0, n, ra1 = ca.shape
        rb0, _, rb1 = cb.shape
        if k == 0:
            cores.append(np.concatenate([ca, cb], axis=2))
        elif k == d - 1:
            cores.append(np.concatenate([ca, cb], axis=0))
        else:
            c = np.zeros((ra0 + rb0, n, ra1 + rb1))
            c[:ra0, :, :ra1] = ca
            c[ra0:, :, ra1:] = cb
            cores.append(c)
    return TTTensor(cores)


def tt_sum(tensors: Sequence[TTTensor], coeffs: Sequence[float] | None = None) -> TTTensor:
    if coeffs is None:
        coeffs = [1.0] * len(tensors)
    out = tt_scale(tensors[0], coeffs[0])
    for t, c in zip(tensors[1:], coeffs[1:]):
        out = tt_add(out, tt_scale(t, c))
    return out


def tt_hadamard(a: TTTensor, b: TTTensor) -> TTTensor:
    """Entry-wise product; bond ranks multiply."""
    _check_same_modes(a, b)
    cores = []
    for ca, cb in zip(a.cores, b.cores):
        ra0, n, ra1 = ca.shape
        rb0, _, rb1 = cb.shape
        cores.append(np.einsum("anb,cnd->acnbd", ca, cb).reshape(ra0 * rb0, n, ra1 * rb1))
    return TTTensor(cores)


def tt_scale(a: TTTensor, c: float) -> TTTensor:
    cores = list(a.cores)
    cores[0] = cores[0] * c
    return TTTensor(cores)


def apply_matrix_to_core(t: TTTensor, axis: int, m) -> TTTensor:
    """Multiply every fiber of core ``axis`` by ``m`` (shape ``(n', n_axis)``).

    Equivalent to applying ``I x ... x m x ... x I`` to the full tensor.
    """
    if not 0 <= axis < t.d:
        raise IndexError(f"axis {axis} out of range for d={t.d}")
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[1] != t.mode_sizes[axis]:
        raise ValueError(
            f"matrix shape {m.shape} incompatible with mode size {t.mode_sizes[axis]}"
        )
    cores = list(t.cores)
    cores[axis] = np.einsum("mn,anb->amb", m, cores[axis])
    return TTTensor(cores)


def tt_norm_f(t: TTTensor) -> float:
    cores = _orthogonalize_right(list(t.cores))
    return float(np.linalg.norm(cores[0]))


def tt_dot(a: TTTensor, b: TTTensor) -> float:
    _check_same_modes(a, b)
    v = np.ones((1, 1))
    for ca, cb in zip(a.cores, b.cores):
        v = np.einsum("ab,anc,bnd->cd", v, ca, cb)
    return float(v[0, 0])


def gram_environments(t: TTTensor) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Left and right Gram environments of ``t``.

    ``left[k]`` (``r_k x r_k``) contracts cores ``0..k-1`` with themselves over
    all their indices; ``right[k]`` contracts cores ``k..d-1``.
    """
    d = t.d
    left = [np.ones((1, 1))]
    for c in t.cores:
        left.append(np.einsum("ab,anc,bnd->cd", left[-1], c, c))
    right = [np.ones((1, 1))]
    for c in reversed(t.cores):
        right.append(np.einsum("anc,bnd,cd->ab", c, c, right[-1]))
    right.reverse()
    assert len(left) == len(right) == d + 1
    return left, right


def contract_axes(t: TTTensor, weights: dict[int, np.ndarray]) -> TTTensor:
    """Sum out the given axes against weight vectors; remaining axes keep order."""
    keep = [k for k in range(t.d) if k not in weights]
    if not keep:
        raise ValueError("cannot contract every axis into a TT tensor; use tt_dot")
    cores: list[np.ndarray] = []
    carry = np.ones((1, 1))
    for k, c in enumerate(t.cores):
        if k in weights:
            carry = carry @ np.einsum("anb,n->ab", c, np.asarray(weights[k], dtype=np.float64))
        else:
            cores.append(np.einsum("ab,bnc->anc", carry, c))
            carry = np.eye(c.shape[2])
    cores[-1] = np.einsum("anb,bc->anc", cores[-1], carry)
    return TTTensor(cores)


def save_tt(path, t: TTTensor) -> None:
    """Write a JSON header (shapes, ranks) followed by little-endian float64 cores."""
    header = json.dumps(
        {"format": "ttsfv-tt", "version": 1, "mode_sizes": list(t.mode_sizes), "ranks": list(t.ranks)}
    ).encode()
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        for c in t.cores:
            fh.write(np.ascontiguousarray(c, dtype="<f8").tobytes())


def load_tt(path) -> TTTensor:
    with open(path, "rb") as fh:
        (hlen,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(hlen))
        if header.get("format") != "ttsfv-tt":
            raise ValueError("not a TT dump")
        n, r = header["mode_sizes"], header["ranks"]
        cores = []
        for k in range(len(n)):
            cnt = r[k] * n[k] * r[k + 1]
            buf = fh.read(8 * cnt)
            cores.append(np.frombuffer(buf, dtype="<f8").reshape(r[k], n[k], r[k + 1]).copy())
    return TTTensor(cores)
