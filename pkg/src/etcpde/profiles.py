"""Built-in spatial profiles and reaction nonlinearities for the experiments.

Every spatial shape used by the bundled benchmark configs lives here so
configs refer to profiles by name instead of re-typing formulas.  The
``unstable_reaction`` example pair describes a reaction–diffusion rod with a
linear destabilizing term; the ``road`` pair is the same geometry in a
normalized road coordinate with traffic-flow coefficients.
"""
from __future__ import annotations

from typing import Callable

import numpy as np

from .galerkin import ModalBasis

__all__ = [
    "get_profile",
    "profile_names",
    "quadratic_reaction",
    "slow_reaction",
    "PROFILES",
]

_S2P = np.sqrt(2.0 / np.pi)  # unit-norm sine amplitude on [0, pi]


def _rod_xi0(p):
    return -0.4 * (2.0 / np.pi) ** 1.5 * np.sin(p) - 0.075 * _S2P * np.cos(p)


def _rod_cbar(p):
    return _S2P * np.sin(p) + 0.75 * np.sqrt(np.pi / 2.0) * np.cos(p)


def _rod_b1(p):
    return (4.0 / np.pi) * np.sin(p) + (3.0 / 8.0) * np.pi * np.cos(p)


def _rod_b2_1(p):
    return -(9.0 / 4.0) * _S2P * np.cos(p) - (3.0 / np.pi) * _S2P * np.sin(p)


def _rod_b2_2(p):
    return -(5.0 / np.pi) * _S2P * np.sin(p)


def _road_xi0(p):
    return 0.1 - 0.1 * np.cos(p)


PROFILES: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "zero": lambda p: np.zeros_like(np.asarray(p, dtype=float)),
    "one": lambda p: np.ones_like(np.asarray(p, dtype=float)),
    "rod_xi0": _rod_xi0,
    "rod_cbar": _rod_cbar,
    "rod_b1": _rod_b1,
    "rod_b2_1": _rod_b2_1,
    "rod_b2_2": _rod_b2_2,
    "road_xi0": _road_xi0,
    # the road benchmark reuses the rod input/output shapes in the
    # normalized coordinate
    "road_cbar": _rod_cbar,
    "road_b1": _rod_b1,
    "road_b2_1": _rod_b2_1,
    "road_b2_2": _rod_b2_2,
}


def get_profile(name: str) -> Callable[[np.ndarray], np.ndarray]:
    try:
        return PROFILES[name]
    except KeyError:
        raise KeyError(
            f"unknown profile {name!r}; available: {', '.join(sorted(PROFILES))}"
        ) from None


def profile_names() -> list[str]:
    return sorted(PROFILES)


def quadratic_reaction(linear: float, quadratic: float) -> Callable[[np.ndarray], np.ndarray]:
    """Pointwise reaction ``f(s) = linear*s + quadratic*s**2`` (f(0)=0)."""

    def f(s: np.ndarray) -> np.ndarray:
        return linear * s + quadratic * s * s

    return f


def slow_reaction(basis: ModalBasis, linear: float, quadratic: float):
    """Exact slow projection of a quadratic reaction.

    Returns ``f_s(xi) = linear*xi + quadratic * <phi_i, (sum_j xi_j phi_j)^2>``
    evaluated by basis quadrature; the linear part projects to itself by
    orthonormality and is kept exact.  Accepts a single state (m,) or a
    batch (m, n).
    """
    Phi = np.stack([basis.phi_on_quad(j) for j in range(basis.m)])
    wq = basis.quad_w * basis.weight
    proj = Phi * wq[None, :]

    def f_s(xi: np.ndarray) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        field = Phi.T @ xi
        return linear * xi + quadratic * (proj @ (field * field))

    return f_s
