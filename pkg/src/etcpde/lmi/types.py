"""Shared data types for the matrix-inequality layer."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = ["SymBlockMatrix", "BlockLayout", "SynthesisParams", "ControllerCertificate"]

_SYM_TOL = 1e-12


def sym(X: np.ndarray) -> np.ndarray:
    """X + X^T (the symmetrized pair written '+ *' in block formulas)."""
    return X + X.T


class BlockLayout:
    """Named partition of a square matrix into contiguous blocks."""

    def __init__(self, names: Sequence[str], dims: Sequence[int]):
        if len(names) != len(dims) or len(names) == 0:
            raise ValueError("names and dims must be equal-length and nonempty")
        self.names = tuple(names)
        self.dims = tuple(int(d) for d in dims)
        offsets = np.concatenate([[0], np.cumsum(self.dims)])
        self._slices = {
            n: slice(int(offsets[i]), int(offsets[i + 1]))
            for i, n in enumerate(self.names)
        }
        self.dimension = int(offsets[-1])

    def slice(self, name: str) -> slice:
        return self._slices[name]

    def __contains__(self, name: str) -> bool:
        return name in self._slices

    def __repr__(self):
        parts = ", ".join(f"{n}:{d}" for n, d in zip(self.names, self.dims))
        return f"BlockLayout({parts})"


@dataclass(frozen=True)
class SymBlockMatrix:
    """Dense symmetric matrix with a named block map.

    Symmetry is a construction invariant (max asymmetry below 1e-12);
    ``block(i, j)`` returns views by block name.
    """

    data: np.ndarray
    layout: BlockLayout
    name: str = ""

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim != 2 or data.shape[0] != data.shape[1]:
            raise ValueError("matrix must be square")
        if data.shape[0] != self.layout.dimension:
            raise ValueError("matrix size does not match the block layout")
        gap = float(np.max(np.abs(data - data.T))) if data.size else 0.0
        if gap > _SYM_TOL * max(1.0, float(np.max(np.abs(data)))):
            raise ValueError(f"matrix is not symmetric (max asymmetry {gap:.3g})")
        object.__setattr__(self, "data", 0.5 * (data + data.T))

    @property
    def dimension(self) -> int:
        return self.data.shape[0]

    def block(self, row: str, col: str) -> np.ndarray:
        return self.data[self.layout.slice(row), self.layout.slice(col)]

    def eig_extremes(self) -> tuple[float, float]:
        vals = np.linalg.eigvalsh(self.data)
        return float(vals[0]), float(vals[-1])

    def max_eig(self) -> float:
        return self.eig_extremes()[1]

    def min_eig(self) -> float:
        return self.eig_extremes()[0]


class BlockBuilder:
    """Accumulates blocks and mirrors off-diagonal entries."""

    def __init__(self, layout: BlockLayout, name: str = ""):
        self.layout = layout
        self.name = name
        self.data = np.zeros((layout.dimension, layout.dimension))

    def put(self, row: str, col: str, block) -> "BlockBuilder":
        rs, cs = self.layout.slice(row), self.layout.slice(col)
        B = np.asarray(block, dtype=float)
        expect = (rs.stop - rs.start, cs.stop - cs.start)
        if B.shape != expect:
            raise ValueError(
                f"block ({row},{col}) must be {expect}, got {B.shape} [{self.name}]"
            )
        self.data[rs, cs] = B
        if row != col:
            self.data[cs, rs] = B.T
        else:
            gap = float(np.max(np.abs(B - B.T))) if B.size else 0.0
            if gap > _SYM_TOL * max(1.0, float(np.max(np.abs(B)))):
                raise ValueError(f"diagonal block ({row},{row}) not symmetric")
            self.data[rs, cs] = 0.5 * (B + B.T)
        return self

    def build(self) -> SymBlockMatrix:
        return SymBlockMatrix(self.data, self.layout, self.name)


@dataclass(frozen=True)
class SynthesisParams:
    """Everything the inequality assembly needs besides decision variables.

    Reduced model (A_s, B2s, B1s, Cs); network data (W_star, V_star, the
    approximation bound delta, sector diagonals G_min/G_max); trigger data
    (waiting time h, threshold eps, weight Lam); decay weight alpha and the
    sector relaxation scalar beta2; disturbance amplitude D1.  ``beta1``
    fixes the residual multiplier when given, otherwise synthesis treats it
    as a decision variable.
    """

    A_s: np.ndarray
    B2s: np.ndarray
    B1s: np.ndarray
    Cs: np.ndarray
    W_star: np.ndarray
    V_star: np.ndarray
    delta: float
    G_min: np.ndarray
    G_max: np.ndarray
    h: float
    eps: float
    Lam: np.ndarray
    alpha: float = 0.1
    beta2: float = 1.0
    D1: float = 1.0
    beta1: float | None = None

    def __post_init__(self):
        for fld in ("A_s", "B2s", "B1s", "Cs", "W_star", "V_star", "G_min", "G_max", "Lam"):
            object.__setattr__(self, fld, np.atleast_2d(np.asarray(getattr(self, fld), float)))
        m = self.A_s.shape[0]
        if self.A_s.shape != (m, m):
            raise ValueError("A_s must be square")
        if self.B2s.shape[0] != m or self.B1s.shape[0] != m or self.Cs.shape[1] != m:
            raise ValueError("B2s/B1s/Cs row-column counts must match A_s")
        n_h = self.W_star.shape[1]
        if self.W_star.shape != (m, n_h) or self.V_star.shape != (n_h, m):
            raise ValueError("W_star must be (m, n_h) and V_star (n_h, m)")
        if self.G_min.shape != (n_h, n_h) or self.G_max.shape != (n_h, n_h):
            raise ValueError("sector matrices must be (n_h, n_h)")
        if self.h <= 0:
            raise ValueError("waiting time h must be positive")
        if self.eps < 0:
            raise ValueError("trigger threshold eps must be nonnegative")
        if self.delta < 0:
            raise ValueError("delta must be nonnegative")
        n_y = self.Cs.shape[0]
        if self.Lam.shape != (n_y, n_y):
            raise ValueError("Lam must be (n_y, n_y)")
        if np.min(np.linalg.eigvalsh(0.5 * (self.Lam + self.Lam.T))) <= 0:
            raise ValueError("Lam must be positive definite")
        if self.beta2 <= 0:
            raise ValueError("beta2 must be positive")
        if self.beta1 is not None and self.beta1 <= 0:
            raise ValueError("beta1 must be positive when given")

    @property
    def m(self) -> int:
        return self.A_s.shape[0]

    @property
    def n_u(self) -> int:
        return self.B2s.shape[1]

    @property
    def n_d(self) -> int:
        return self.B1s.shape[1]

    @property
    def n_y(self) -> int:
        return self.Cs.shape[0]

    @property
    def n_h(self) -> int:
        return self.W_star.shape[1]

    @property
    def zeta1(self) -> np.ndarray:
        return self.G_min @ self.V_star

    @property
    def zeta2(self) -> np.ndarray:
        return self.G_max @ self.V_star

    @property
    def zeta3(self) -> np.ndarray:
        return (self.G_min + self.G_max) @ self.V_star

    @property
    def zeta4(self) -> np.ndarray:
        return (self.G_max - self.G_min) @ self.V_star


@dataclass
class ControllerCertificate:
    """Feasible point of the synthesis inequalities plus the recovered gain.

    ``P`` is the 2m x 2m functional weight; Omega and L are diagonal
    multiplier matrices; ``r`` is the N = r P11 coupling ratio; ``slack``
    maps inequality names to verified eigenvalue margins.
    """

    P: np.ndarray
    U: np.ndarray
    Q1: np.ndarray
    Q2: np.ndarray
    Omega: np.ndarray
    L: np.ndarray
    M1: np.ndarray
    M2: np.ndarray
    M3: np.ndarray
    N: np.ndarray
    beta1: float
    r: np.ndarray
    Xi1: np.ndarray
    Xi2: np.ndarray
    K: np.ndarray
    slack: dict = field(default_factory=dict)
    gamma: float | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for fld in ("P", "U", "Q1", "Q2", "Omega", "L", "M1", "M2", "M3", "N", "r", "Xi1", "Xi2", "K"):
            object.__setattr__(self, fld, np.atleast_2d(np.asarray(getattr(self, fld), float)))
        two_m = self.P.shape[0]
        if two_m % 2 != 0 or self.P.shape != (two_m, two_m):
            raise ValueError("P must be square with even size 2m")
        m = two_m // 2
        for name in ("U", "Q1", "Q2", "M1", "M2", "M3", "N", "r"):
            if getattr(self, name).shape != (m, m):
                raise ValueError(f"{name} must be ({m}, {m})")
        if np.max(np.abs(self.P - self.P.T)) > 1e-9 * max(1.0, np.max(np.abs(self.P))):
            raise ValueError("P must be symmetric")
        if self.beta1 <= 0:
            raise ValueError("beta1 must be positive")

    @property
    def m(self) -> int:
        return self.P.shape[0] // 2

    @property
    def P11(self) -> np.ndarray:
        m = self.m
        return self.P[:m, :m]

    @property
    def P12(self) -> np.ndarray:
        m = self.m
        return self.P[:m, m:]

    @property
    def P21(self) -> np.ndarray:
        m = self.m
        return self.P[m:, :m]

    @property
    def P22(self) -> np.ndarray:
        m = self.m
        return self.P[m:, m:]
