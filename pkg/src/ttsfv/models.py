"""Flux models for scalar laws and the compressible Euler equations.

A model works on lists of equally shaped arrays, one per conserved quantity,
so the same code serves TT cross black boxes, the dense oracle and the Monte
Carlo reference.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

Arrays = Sequence[np.ndarray]


@dataclass(frozen=True)
class FluxModel:
    """Conservation law ``U_t + sum_s F_s(U)_x_s = S(U, x, y)``.

    ``flux(axis, U)`` returns the list of flux components along ``axis``;
    ``wave_speed(axis, U)`` the largest characteristic speed modulus.
    ``source`` receives ``(U, x, y)`` with ``x`` and ``y`` lists of coordinate
    arrays broadcastable against ``U``.
    """

    name: str
    names: tuple[str, ...]
    flux: Callable[[int, Arrays], list]
    wave_speed: Callable[[int, Arrays], np.ndarray]
    dims: int = 1
    source: Callable | None = None

    @property
    def p(self) -> int:
        return len(self.names)

    def max_speed(self, U: Arrays) -> np.ndarray:
        sp = self.wave_speed(0, U)
        for s in range(1, self.dims):
            sp = np.maximum(sp, self.wave_speed(s, U))
        return sp


def linear_advection(velocity=1.0) -> FluxModel:
    """``u_t + a . grad u = 0`` with constant velocity ``a`` (scalar or per axis)."""
    a = np.atleast_1d(np.asarray(velocity, dtype=np.float64))

    def flux(axis, U):
        return [a[axis] * U[0]]

    def speed(axis, U):
        return np.full(np.shape(U[0]), abs(a[axis]))

    return FluxModel("advection", ("u",), flux, speed, dims=a.size)


def burgers() -> FluxModel:
    """Inviscid Burgers ``u_t + (u^2/2)_x = 0``."""

    def flux(axis, U):
        return [0.5 * U[0] * U[0]]

    def speed(axis, U):
        return np.abs(U[0])

    return FluxModel("burgers", ("u",), flux, speed)


def euler_pressure(U: Arrays, gamma: float, dims: int) -> np.ndarray:
    rho, E = U[0], U[-1]
    kin = sum(U[1 + s] ** 2 for s in range(dims)) / rho
    return (gamma - 1.0) * (E - 0.5 * kin)


def total_energy(rho, velocity, p, gamma: float):
    """``rho e = p/(gamma-1) + rho |u|^2 / 2``; ``velocity`` is a list of components."""
    return p / (gamma - 1.0) + 0.5 * rho * sum(v * v for v in velocity)


def euler(dims: int = 1, gamma: float = 1.4) -> FluxModel:
    """Euler equations in ``dims`` space dimensions, quantities ``(rho, rho u[, rho v], rho e)``."""
    if dims not in (1, 2, 3):
        raise ValueError("Euler model supports 1 to 3 space dimensions")
    mom = ("rho_u", "rho_v", "rho_w")[:dims]
    names = ("rho",) + mom + ("rho_e",)

    def flux(axis, U):
        rho, E = U[0], U[-1]
        p = euler_pressure(U, gamma, dims)
        un = U[1 + axis] / rho
        out = [U[1 + axis]]
        for s in range(dims):
            f = U[1 + s] * un
            out.append(f + p if s == axis else f)
        out.append((E + p) * un)
        return out

    def speed(axis, U):
        rho = U[0]
        p = euler_pressure(U, gamma, dims)
        c = np.sqrt(np.maximum(gamma * p / rho, 0.0))
        return np.abs(U[1 + axis] / rho) + c

    return FluxModel(f"euler{dims}d", names, flux, speed, dims=dims)


def rusanov(model: FluxModel, axis: int, UL: Arrays, UR: Arrays, nu="pointwise") -> list:
    """Local Lax-Friedrichs flux ``(F(UL)+F(UR))/2 - nu/2 (UR-UL)`` for every component.

    ``nu`` is ``"pointwise"`` (max wave speed of the two states at each entry)
    or a number used as a fixed dissipation coefficient.
    """
    fl = model.flux(axis, UL)
    fr = model.flux(axis, UR)
    if isinstance(nu, str):
        if nu != "pointwise":
            raise ValueError(f"unsupported dissipation mode {nu!r}")
        v = np.maximum(model.wave_speed(axis, UL), model.wave_speed(axis, UR))
    else:
        v = float(nu)
    return [0.5 * (a + b) - 0.5 * v * (r - l) for a, b, l, r in zip(fl, fr, UL, UR)]
