"""Tensor-product meshes over physical and stochastic axes and product measures."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .tt import TTTensor, tt_rank1
from .weno import BOUNDARY_MODES, gauss_nodes


@dataclass(frozen=True)
class Distribution:
    """One-dimensional law of a stochastic axis: ``uniform`` or ``beta`` (a, b).

    Beta laws are defined on [0, 1] and mapped affinely onto the axis extent.
    """

    kind: str = "uniform"
    a: float = 1.0
    b: float = 1.0

    def __post_init__(self):
        if self.kind not in ("uniform", "beta"):
            raise ValueError(f"unknown distribution {self.kind!r}")
        if self.kind == "beta" and (self.a <= 0 or self.b <= 0):
            raise ValueError("beta parameters must be positive")

    @classmethod
    def parse(cls, value) -> "Distribution":
        """Accept ``"uniform"``, ``"beta(2,5)"``, ``("beta", 2, 5)`` or an instance."""
        if isinstance(value, Distribution):
            return value
        if isinstance(value, (tuple, list)):
            return cls(value[0], *map(float, value[1:]))
        s = str(value).strip().lower().replace(" ", "")
        if s == "uniform":
            return cls()
        if s.startswith("beta(") and s.endswith(")"):
            a, b = s[5:-1].split(",")
            return cls("beta", float(a), float(b))
        raise ValueError(f"cannot parse distribution {value!r}")

    def label(self) -> str:
        return "uniform" if self.kind == "uniform" else f"beta({self.a:g},{self.b:g})"

    def _frozen(self, lo: float, hi: float):
        if self.kind == "uniform":
            return stats.uniform(loc=lo, scale=hi - lo)
        return stats.beta(self.a, self.b, loc=lo, scale=hi - lo)

    def pdf(self, y, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
        return self._frozen(lo, hi).pdf(y)

    def ppf(self, q, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
        return self._frozen(lo, hi).ppf(q)

    def mean(self, lo: float = 0.0, hi: float = 1.0) -> float:
        return float(self._frozen(lo, hi).mean())

    def var(self, lo: float = 0.0, hi: float = 1.0) -> float:
        return float(self._frozen(lo, hi).var())


@dataclass(frozen=True)
class Mesh:
    """Uniform cells on ``n`` physical and ``m`` stochastic axes.

    Physical axes come first in the tensor layout.  Stochastic axes use
    one-sided stencils at their ends (``stochastic_boundary``) since the
    parameter box has no ghost cells.
    """

    cells: tuple[int, ...]
    extents: tuple[tuple[float, float], ...]
    stochastic_cells: tuple[int, ...] = ()
    stochastic_extents: tuple[tuple[float, float], ...] | None = None
    nodes: int = 3
    boundaries: tuple[str, ...] | None = None
    stochastic_boundary: str = "truncated-stencil"

    def __post_init__(self):
        cells = tuple(int(c) for c in self.cells)
        scells = tuple(int(c) for c in self.stochastic_cells)
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "stochastic_cells", scells)
        if not 1 <= len(cells) <= 3:
            raise ValueError("between one and three physical axes are supported")
        ext = tuple((float(a), float(b)) for a, b in self.extents)
        if len(ext) != len(cells):
            raise ValueError("one extent per physical axis is required")
        object.__setattr__(self, "extents", ext)
        sext = self.stochastic_extents
        sext = tuple((0.0, 1.0) for _ in scells) if sext is None else tuple((float(a), float(b)) for a, b in sext)
        if len(sext) != len(scells):
            raise ValueError("one extent per stochastic axis is required")
        object.__setattr__(self, "stochastic_extents", sext)
        bnd = self.boundaries
        bnd = ("periodic",) * len(cells) if bnd is None else tuple(bnd)
        if isinstance(self.boundaries, str):
            bnd = (self.boundaries,) * len(cells)
        if len(bnd) != len(cells):
            raise ValueError("one boundary mode per physical axis is required")
        object.__setattr__(self, "boundaries", bnd)
        for b in bnd + (self.stochastic_boundary,):
            if b not in BOUNDARY_MODES:
                raise ValueError(f"unknown boundary mode {b!r}")
        for a, b in ext + sext:
            if not b > a:
                raise ValueError("extents must satisfy lo < hi")
        for c, b in zip(cells, bnd):
            if c < 1 or (c < 3 and b != "periodic"):
                raise ValueError("non-periodic axes need at least 3 cells")
        for c in scells:
            if c < 3:
                raise ValueError("stochastic axes need at least 3 cells")
        if self.nodes < 1:
            raise ValueError("need at least one quadrature node per cell")

    @property
    def n(self) -> int:
        return len(self.cells)

    @property
    def m(self) -> int:
        return len(self.stochastic_cells)

    @property
    def d(self) -> int:
        return self.n + self.m

    @property
    def shape(self) -> tuple[int, ...]:
        return self.cells + self.stochastic_cells

    @property
    def all_extents(self):
        return self.extents + self.stochastic_extents

    def spacing(self, axis: int) -> float:
        lo, hi = self.all_extents[axis]
        return (hi - lo) / self.shape[axis]

    def boundary(self, axis: int) -> str:
        return self.boundaries[axis] if axis < self.n else self.stochastic_boundary

    def centers(self, axis: int) -> np.ndarray:
        lo, _ = self.all_extents[axis]
        h = self.spacing(axis)
        return lo + h * (np.arange(self.shape[axis]) + 0.5)

    def quad_points(self, axis: int) -> np.ndarray:
        """Gauss nodes of every cell along ``axis``, cell-major (``cell * nodes + q``)."""
        xi, _ = gauss_nodes(self.nodes)
        return (self.centers(axis)[:, None] + self.spacing(axis) * xi[None, :]).ravel()

    def cell_volume(self) -> float:
        return float(np.prod([self.spacing(k) for k in range(self.n)]))

    def with_cells(self, cells=None, stochastic_cells=None) -> "Mesh":
        return Mesh(
            tuple(cells) if cells is not None else self.cells,
            self.extents,
            tuple(stochastic_cells) if stochastic_cells is not None else self.stochastic_cells,
            self.stochastic_extents if stochastic_cells is None or len(stochastic_cells) == self.m else None,
            self.nodes,
            self.boundaries,
            self.stochastic_boundary,
        )


@dataclass(frozen=True)
class StochasticMeasure:
    """Product probability measure on the stochastic axes of ``mesh``."""

    mesh: Mesh
    laws: tuple[Distribution, ...] = field(default=())

    def __post_init__(self):
        laws = tuple(Distribution.parse(x) for x in self.laws) or (Distribution(),) * self.mesh.m
        if len(laws) != self.mesh.m:
            raise ValueError("one distribution per stochastic axis is required")
        object.__setattr__(self, "laws", laws)

    def _axis(self, j: int):
        k = self.mesh.n + j
        lo, hi = self.mesh.stochastic_extents[j]
        return k, lo, hi

    def node_density(self, j: int) -> np.ndarray:
        k, lo, hi = self._axis(j)
        return self.laws[j].pdf(self.mesh.quad_points(k), lo, hi)

    def cell_measures(self, j: int) -> np.ndarray:
        """Probability mass of every cell on stochastic axis ``j`` (Gauss quadrature)."""
        k, _, _ = self._axis(j)
        _, w = gauss_nodes(self.mesh.nodes)
        mu = self.node_density(j).reshape(-1, self.mesh.nodes)
        return self.mesh.spacing(k) * mu @ w

    def node_weights(self, j: int) -> np.ndarray:
        """Matrix ``(M, M*nodes)`` averaging node values against the density over each cell."""
        k, _, _ = self._axis(j)
        M, nq = self.mesh.stochastic_cells[j], self.mesh.nodes
        _, w = gauss_nodes(nq)
        mu = self.node_density(j).reshape(M, nq)
        km = self.cell_measures(j)
        vals = self.mesh.spacing(k) * w[None, :] * mu / km[:, None]
        out = np.zeros((M, M * nq))
        out[np.arange(M)[:, None], np.arange(M)[:, None] * nq + np.arange(nq)[None, :]] = vals
        return out

    def density_tt(self) -> TTTensor:
        """Rank-one tensor of the joint density at all stochastic nodes."""
        return tt_rank1([self.node_density(j) for j in range(self.mesh.m)])


def physical_node_weights(mesh: Mesh, axis: int) -> np.ndarray:
    """Matrix ``(N, N*nodes)`` mapping node values of a physical axis to cell averages."""
    N, nq = mesh.shape[axis], mesh.nodes
    _, w = gauss_nodes(nq)
    out = np.zeros((N, N * nq))
    out[np.arange(N)[:, None], np.arange(N)[:, None] * nq + np.arange(nq)[None, :]] = w[None, :]
    return out


def averaging_matrix(mesh: Mesh, measure: StochasticMeasure, axis: int) -> np.ndarray:
    if axis < mesh.n:
        return physical_node_weights(mesh, axis)
    return measure.node_weights(axis - mesh.n)
