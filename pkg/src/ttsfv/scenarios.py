"""Built-in test problems.

Each factory returns a :class:`Scenario`: model, mesh, measure, initial data
``u0(x, y)`` (lists of coordinate arrays in, list of quantity arrays out) and
default solver settings.  Stochastic parameters that a reduced variant does
not resolve are frozen at zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .mesh import Distribution, Mesh, StochasticMeasure
from .models import FluxModel, burgers as burgers_model, euler, linear_advection, total_energy

GAMMA = 1.4


@dataclass
class Scenario:
    name: str
    model: FluxModel
    mesh: Mesh
    laws: tuple
    u0: Callable
    t_final: float
    settings: dict = field(default_factory=dict)
    exact_expectation: Callable | None = None
    description: str = ""

    @property
    def measure(self) -> StochasticMeasure:
        return StochasticMeasure(self.mesh, self.laws)


def _full_params(y, active, total, like):
    """Length-``total`` list of parameter arrays, zeros where not active (1-based ids)."""
    zero = np.zeros_like(like, dtype=np.float64)
    out = [zero] * total
    for j, a in enumerate(active):
        out[a - 1] = np.asarray(y[j], dtype=np.float64)
    return out


# --- linear advection --------------------------------------------------------

def advection_expectation(x, t, velocity=1.0):
    """Mean over ``y ~ U(0,1)`` of ``sin(2 pi (x - a t + 0.1 y))``."""
    z = 2 * np.pi * (np.asarray(x) - velocity * t)
    return (np.cos(z) - np.cos(z + 0.2 * np.pi)) / (0.2 * np.pi)


def advection_cell_expectation(edges, t, velocity=1.0):
    """Cell averages of :func:`advection_expectation` between consecutive ``edges``."""
    edges = np.asarray(edges, dtype=np.float64)
    z = 2 * np.pi * (edges - velocity * t)
    prim = (np.sin(z) - np.sin(z + 0.2 * np.pi)) / (0.2 * np.pi * 2 * np.pi)
    return np.diff(prim) / np.diff(edges)


def advection(cells: int = 64, stochastic_cells: int | None = None, velocity: float = 1.0,
              t_final: float = 0.1) -> Scenario:
    """``u_t + a u_x = 0``, ``u0 = sin(2 pi (x + 0.1 y))``, periodic in x, ``y ~ U(0,1)``."""
    M = cells if stochastic_cells is None else stochastic_cells
    mesh = Mesh((cells,), ((0.0, 1.0),), (M,), boundaries=("periodic",))

    def u0(x, y):
        return [np.sin(2 * np.pi * (x[0] + 0.1 * y[0]))]

    def exact(edges, t):
        return advection_cell_expectation(edges, t, velocity)

    return Scenario("advection", linear_advection(velocity), mesh, ("uniform",), u0, t_final,
                    {"epsilon_tt": 1e-6, "integrator": "SSP33"}, exact,
                    "smooth linear transport with a random phase")


# --- Burgers -----------------------------------------------------------------

def burgers_u0(x, y):
    return np.sin(2 * np.pi * x) * np.sin(2 * np.pi * y)


def burgers(distribution="uniform", cells: int = 512, stochastic_cells: int = 32,
            t_final: float = 0.35) -> Scenario:
    """Inviscid Burgers with ``u0 = sin(2 pi x) sin(2 pi y)``; stationary shock at x = 1/2."""
    law = Distribution.parse(distribution)
    mesh = Mesh((cells,), ((0.0, 1.0),), (stochastic_cells,), boundaries=("periodic",))

    def u0(x, y):
        return [burgers_u0(x[0], y[0])]

    return Scenario(f"burgers-{law.label()}", burgers_model(), mesh, (law,), u0, t_final,
                    {"epsilon_tt": 9e-4, "integrator": "SSP33"}, None,
                    "random-amplitude Burgers shock")


# --- Sod-type shock tube -------------------------------------------------------

SOD_PARAMS = 12


def sod_primitive(x, ys):
    """``(rho, rho u, p)`` for the random shock tube; ``ys`` holds all 12 parameters."""
    y = [None] + list(ys)
    left = x < 0.5
    rho = np.where(left, 1.0 + 0.1 * y[1] - 0.05 * y[7], 0.125 - 0.05 * y[2] + 0.1 * y[8])
    mom = np.where(left, 0.05 * y[3] - 0.01 * y[9], 0.05 * y[4] - 0.01 * y[10])
    p = np.where(left, 1.0 + 0.1 * y[5] - 0.05 * y[11], 0.1 + 0.05 * y[6] - 0.01 * y[12])
    return rho, mom, p


def sod(active=tuple(range(1, SOD_PARAMS + 1)), cells: int = 64, stochastic_cells: int = 8,
        t_final: float = 0.2) -> Scenario:
    """Euler shock tube with affine random states on each side; inactive parameters are zero."""
    active = tuple(int(a) for a in active)
    if any(not 1 <= a <= SOD_PARAMS for a in active) or len(set(active)) != len(active):
        raise ValueError("active parameters must be distinct ids in 1..12")
    mesh = Mesh((cells,), ((0.0, 1.0),), (stochastic_cells,) * len(active),
                boundaries=("extrapolate",))

    def u0(x, y):
        ys = _full_params(y, active, SOD_PARAMS, x[0])
        rho, mom, p = sod_primitive(x[0], ys)
        return [rho, mom, total_energy(rho, [mom / rho], p, GAMMA)]

    return Scenario(f"sod-m{len(active)}", euler(1, GAMMA), mesh, ("uniform",) * len(active), u0, t_final,
                    {"epsilon_tt": 1e-3, "integrator": "SSP22", "max_rank": 1},
                    description="random shock tube")


def sod12(cells: int = 64, stochastic_cells: int = 8) -> Scenario:
    return sod(tuple(range(1, SOD_PARAMS + 1)), cells, stochastic_cells)


def scaling_sweep(m_values=range(1, 9), cells: int = 64, stochastic_cells: int = 64,
                  t_final: float = 0.2) -> list[Scenario]:
    """Shock-tube family using the first ``m`` parameters, for runtime studies."""
    return [sod(tuple(range(1, m + 1)), cells, stochastic_cells, t_final) for m in m_values]


# --- shock-bubble interaction -----------------------------------------------

BUBBLE_CENTER = (0.25, 0.5)


def bubble(x1, x2, ys):
    y = [None] + list(ys)
    r = np.sqrt((x1 - BUBBLE_CENTER[0]) ** 2 + (x2 - BUBBLE_CENTER[1]) ** 2)
    return np.where(r < 0.15 + 0.01 * y[1], 10.0 + 0.1 * y[6], 0.0)


def shock_bubble_primitive(x1, x2, ys):
    """``(rho, rho u, rho v, p)``; the right pressure branch is taken on ``x1 > 0.04``."""
    y = [None] + list(ys)
    left = x1 < 0.04
    b = 0.5 * bubble(x1, x2, ys)
    rho = np.where(left, 3.86859 + 0.1 * y[4] - 0.05 * y[11], 1.0 + 0.05 * y[5] - 0.01 * y[12]) + b
    mu = np.where(left, 11.2536 + y[7], 0.01 * y[8])
    mv = np.zeros_like(rho)
    p = np.where(left, 167.345 + 10.0 * y[9], 1.0 + 0.1 * y[10])
    return rho, mu, mv, p


def shock_bubble(active=(1, 6, 7, 9), cells: int = 64, stochastic_cells: int = 4,
                 t_final: float = 0.03, density_ranks=(16, 16, 16)) -> Scenario:
    """Planar shock hitting a heavy bubble of random radius and density."""
    active = tuple(int(a) for a in active)
    if any(not 1 <= a <= SOD_PARAMS for a in active):
        raise ValueError("active parameters must be ids in 1..12")
    mesh = Mesh((cells, cells), ((0.0, 1.0), (0.0, 1.0)), (stochastic_cells,) * len(active),
                boundaries=("extrapolate", "extrapolate"))
    nb = 1 + len(active)
    caps = (list(density_ranks) + [1] * nb)[:nb]

    def u0(x, y):
        ys = _full_params(y, active, SOD_PARAMS, x[0])
        rho, mu, mv, p = shock_bubble_primitive(x[0], x[1], ys)
        return [rho, mu, mv, total_energy(rho, [mu / rho, mv / rho], p, GAMMA)]

    # only density is capped; the energy of the strong left state needs a
    # tight tolerance or rounding errors swamp the ambient pressure
    return Scenario("shock-bubble", euler(2, GAMMA), mesh, ("uniform",) * len(active), u0, t_final,
                    {"epsilon_tt": 1e-4, "integrator": "SSP22", "max_rank": {"rho": caps},
                     "cross_max_rank": 32},
                    description="shock-bubble interaction with random bubble radius")


# --- manufactured source ------------------------------------------------------

def manufactured(cells: int = 32, stochastic_cells: int = 8, kappa: float = 1.0,
                 t_final: float = 0.2) -> Scenario:
    """Advection with decay ``S = -kappa y u``; exact ``u = exp(-kappa y t) sin(2 pi (x - t))``."""
    model = linear_advection(1.0)
    model = FluxModel(model.name + "-decay", model.names, model.flux, model.wave_speed, model.dims,
                      source=lambda U, x, y: [-kappa * y[0] * U[0]])
    mesh = Mesh((cells,), ((0.0, 1.0),), (stochastic_cells,), boundaries=("periodic",))

    def u0(x, y):
        return [np.sin(2 * np.pi * x[0]) + 0.0 * y[0]]

    def exact(x, y, t):
        return np.exp(-kappa * y * t) * np.sin(2 * np.pi * (x - t))

    sc = Scenario("manufactured", model, mesh, ("uniform",), u0, t_final,
                  {"epsilon_tt": 1e-8, "integrator": "SSP33"}, description="advection with a decay source")
    sc.exact_solution = exact
    return sc


REGISTRY = {
    "advection": advection,
    "burgers-uniform": lambda **kw: burgers("uniform", **kw),
    "burgers-beta": lambda **kw: burgers("beta(2,5)", **kw),
    "sod12": sod12,
    "shock-bubble": shock_bubble,
    "manufactured": manufactured,
}


def get_scenario(name: str, **kw) -> Scenario:
    try:
        factory = REGISTRY[name]
    except KeyError:
        raise KeyError(f"unknown scenario {name!r}; choose from {sorted(REGISTRY)}") from None
    return factory(**kw)


def build_scenario(name: str, cells: int | None = None, stochastic_cells: int | None = None,
                   distribution: str | None = None) -> Scenario:
    """Registry lookup with the common mesh overrides; ``distribution`` selects the Burgers law."""
    kw = {}
    if cells is not None:
        kw["cells"] = cells
    if stochastic_cells is not None:
        kw["stochastic_cells"] = stochastic_cells
    if name == "burgers" or (distribution is not None and name.startswith("burgers")):
        return burgers(distribution or "uniform", **kw)
    if distribution is not None:
        raise ValueError(f"scenario {name!r} has a fixed uniform measure")
    return get_scenario(name, **kw)
