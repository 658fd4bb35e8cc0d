"""Modal analysis of 1-D diffusion–advection operators and Galerkin reduction.

Builds orthonormal eigenbases of the spatial operator
``A u = z1(p) u_p + (z2(p) u_p)_p`` under Dirichlet/Robin boundaries,
projects spatial profiles onto the modes, and assembles the
finite-dimensional slow system used by identification and synthesis.

When ``z1`` is nonzero the operator is symmetrized with the integrating
factor ``w = exp(int z1/z2)``; eigenfunctions are then orthonormal under the
w-weighted inner product (``w = 1`` whenever ``z1 = 0``).  Dynamic
projections use the weighted product; the measured-output row uses the plain
integral, matching the plant's output definition.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import (
    DegenerateSpectrumError,
    ResolutionError,
    SingularLocationsError,
    UnsupportedBoundaryError,
)

__all__ = [
    "SturmLiouvilleSpec",
    "ModalBasis",
    "SlowSystem",
    "SpectralGap",
    "analytic_dirichlet_basis",
    "eigensolve_sturm_liouville",
    "project",
    "spectral_gap",
    "reconstruct_slow_state",
    "assemble_slow_system",
    "gauss_legendre_grid",
]

Profile = Callable[[np.ndarray], np.ndarray]


def _as_profile(z) -> Profile:
    """Wrap constants as spatial profiles."""
    if callable(z):
        return z
    value = float(z)
    return lambda p: np.full_like(np.asarray(p, dtype=float), value)


@dataclass(frozen=True)
class SturmLiouvilleSpec:
    """Spatial operator data: domain, coefficients, boundary rows.

    Parameters
    ----------
    domain : (alpha1, alpha2)
        Spatial interval, ``alpha1 < alpha2``.
    z1, z2 : scalar or callable p -> values
        Advection and diffusion coefficient profiles; ``z2 > 0`` on the
        domain.
    bc_left, bc_right : (h1, h2)
        Boundary coefficients of ``h1*xi + h2*xi_p = 0`` at each endpoint;
        ``(0, 0)`` is rejected.  ``h2 = 0`` means Dirichlet.
    """

    domain: tuple[float, float]
    z1: object = 0.0
    z2: object = 1.0
    bc_left: tuple[float, float] = (1.0, 0.0)
    bc_right: tuple[float, float] = (1.0, 0.0)

    def __post_init__(self):
        a1, a2 = self.domain
        if not a1 < a2:
            raise ValueError(f"domain must satisfy alpha1 < alpha2, got {self.domain}")
        for name, (h1, h2) in ("bc_left", self.bc_left), ("bc_right", self.bc_right):
            if h1 == 0.0 and h2 == 0.0:
                raise ValueError(f"{name} must not be (0, 0)")
        probe = np.linspace(a1, a2, 33)
        z2v = _as_profile(self.z2)(probe)
        if np.any(z2v <= 0.0):
            raise ValueError("z2 must be positive on the domain")

    @property
    def length(self) -> float:
        return self.domain[1] - self.domain[0]

    @property
    def is_dirichlet(self) -> bool:
        return self.bc_left[1] == 0.0 and self.bc_right[1] == 0.0

    def z1_profile(self) -> Profile:
        return _as_profile(self.z1)

    def z2_profile(self) -> Profile:
        return _as_profile(self.z2)


@dataclass(frozen=True)
class ModalBasis:
    """Eigenvalues/eigenfunctions of the spatial operator plus quadrature.

    ``eigenvalues`` are ordered non-increasing (closest to zero first) and
    carry at least ``m + 1`` entries when a tail eigenvalue is available.
    ``phi(j, p)`` evaluates the j-th (0-based) eigenfunction.  ``weight``
    holds the symmetrizing weight on the quadrature nodes (all ones for
    ``z1 = 0``); inner products are ``sum(quad_w * weight * f * g)``.
    """

    m: int
    eigenvalues: np.ndarray
    domain: tuple[float, float]
    quad_p: np.ndarray
    quad_w: np.ndarray
    weight: np.ndarray
    flags: tuple[str, ...] = ()
    _evaluator: Callable[[int, np.ndarray], np.ndarray] = field(repr=False, default=None)
    _phi_quad: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        ev = np.asarray(self.eigenvalues, dtype=float)
        if np.any(np.diff(ev) > 1e-12):
            raise ValueError("eigenvalues must be ordered non-increasing")
        if self.m < 1 or self.m > ev.shape[0]:
            raise ValueError(f"m={self.m} outside stored spectrum of size {ev.shape[0]}")

    @property
    def n_modes(self) -> int:
        return int(self.eigenvalues.shape[0])

    @property
    def tail_eigenvalue(self) -> float:
        if self.n_modes <= self.m:
            raise DegenerateSpectrumError(
                f"basis stores {self.n_modes} modes; tail eigenvalue needs m+1={self.m + 1}"
            )
        return float(self.eigenvalues[self.m])

    def phi(self, j: int, p) -> np.ndarray:
        """Evaluate eigenfunction ``j`` (0-based) at points ``p``."""
        if not 0 <= j < self.n_modes:
            raise IndexError(f"mode {j} outside 0..{self.n_modes - 1}")
        return self._evaluator(j, np.asarray(p, dtype=float))

    def phi_on_quad(self, j: int) -> np.ndarray:
        return self._phi_quad[j]

    def inner(self, f: np.ndarray, g: np.ndarray, weighted: bool = True) -> float:
        wq = self.quad_w * self.weight if weighted else self.quad_w
        return float(np.sum(wq * f * g))


@dataclass(frozen=True)
class SpectralGap:
    epsilon: float
    separable: bool


@dataclass(frozen=True)
class SlowSystem:
    """Reduced model ``dxi_s/dt = A_s xi_s + f_s + B2s u + B1s d``, ``y = Cs xi_s``."""

    A_s: np.ndarray
    B2s: np.ndarray
    B1s: np.ndarray
    Cs: np.ndarray
    basis: ModalBasis

    def __post_init__(self):
        m = self.A_s.shape[0]
        if self.A_s.shape != (m, m):
            raise ValueError("A_s must be square")
        if self.B2s.shape[0] != m or self.B1s.shape[0] != m or self.Cs.shape[1] != m:
            raise ValueError("slow-system blocks disagree on state dimension")

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


def gauss_legendre_grid(domain: tuple[float, float], panels: int = 64, order: int = 8):
    """Composite Gauss–Legendre nodes/weights on the domain.

    64 panels x 8 nodes resolves trigonometric-by-polynomial products to
    ~1e-14, enough for projection values to serve as oracles.
    """
    a, b = domain
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, panels + 1)
    half = np.diff(edges) / 2.0
    mid = (edges[:-1] + edges[1:]) / 2.0
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def analytic_dirichlet_basis(
    diffusion: float,
    domain: tuple[float, float],
    m: int,
    quadrature_n: int = 512,
    n_modes: int | None = None,
) -> ModalBasis:
    """Closed-form sine eigenbasis for constant diffusion under Dirichlet ends.

    ``lambda_j = -diffusion * (j*pi/L)^2`` and
    ``phi_j(p) = sqrt(2/L) * sin(j*pi*(p - alpha1)/L)`` (unit L2 norm), with
    ``L`` the domain length.  For ``domain = [0, pi]`` this reduces to
    ``lambda_j = -diffusion * j^2``.

    Parameters
    ----------
    quadrature_n : int
        Total Gauss–Legendre node count (split into 8-point panels).
    n_modes : int, optional
        Stored spectrum size; defaults to ``m + 2`` so the tail eigenvalue
        and the spectral gap are available.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if diffusion <= 0:
        raise ValueError("diffusion must be positive")
    a1, a2 = domain
    if not a1 < a2:
        raise ValueError("domain must satisfy alpha1 < alpha2")
    n_modes = m + 2 if n_modes is None else max(n_modes, m)
    L = a2 - a1
    js = np.arange(1, n_modes + 1)
    lam = -diffusion * (js * np.pi / L) ** 2
    amp = np.sqrt(2.0 / L)

    def evaluator(j: int, p: np.ndarray) -> np.ndarray:
        return amp * np.sin((j + 1) * np.pi * (p - a1) / L)

    panels = max(quadrature_n // 8, 4)
    quad_p, quad_w = gauss_legendre_grid(domain, panels=panels, order=8)
    phi_quad = np.stack([evaluator(j, quad_p) for j in range(n_modes)])
    return ModalBasis(
        m=m,
        eigenvalues=lam,
        domain=(float(a1), float(a2)),
        quad_p=quad_p,
        quad_w=quad_w,
        weight=np.ones_like(quad_p),
        _evaluator=evaluator,
        _phi_quad=phi_quad,
    )


def dirichlet_basis_for(spec: SturmLiouvilleSpec, m: int, **kw) -> ModalBasis:
    """Analytic basis from a spec (Dirichlet, constant coefficients only)."""
    if not spec.is_dirichlet:
        raise UnsupportedBoundaryError("analytic basis requires Dirichlet ends (h2 = 0)")
    z1_const = None if callable(spec.z1) else float(spec.z1)
    if callable(spec.z2) or z1_const != 0.0:
        raise UnsupportedBoundaryError("analytic basis requires constant z2 and z1 = 0")
    return analytic_dirichlet_basis(float(spec.z2), spec.domain, m, **kw)


def _count_sign_changes(v: np.ndarray) -> int:
    s = np.sign(v[np.abs(v) > 1e-9 * np.max(np.abs(v))])
    return int(np.sum(s[1:] != s[:-1]))


def eigensolve_sturm_liouville(
    spec: SturmLiouvilleSpec,
    grid_n: int,
    m: int,
    n_modes: int | None = None,
) -> ModalBasis:
    """Finite-difference eigensolve of the symmetrized spatial operator.

    Assembles the self-adjoint form ``(1/w)(w z2 u')' `` with
    ``w = exp(int z1/z2)`` as a symmetric tridiagonal pencil (lumped mass =
    trapezoid weights), eliminates Robin boundaries through the flux term,
    and solves with a tridiagonal symmetric eigensolver.  Eigenpairs are
    ordered non-increasing and normalized to unit (weighted) L2 norm on the
    grid; ties are broken by eigenfunction node count.

    Raises
    ------
    ResolutionError
        If ``grid_n < 10 * m``.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if grid_n < 10 * m:
        raise ResolutionError(f"grid_n={grid_n} too coarse for m={m} (need >= {10 * m})")
    n_modes = m + 2 if n_modes is None else max(n_modes, m)
    a1, a2 = spec.domain
    nodes = np.linspace(a1, a2, grid_n + 1)
    dx = (a2 - a1) / grid_n
    z1v = spec.z1_profile()(nodes)
    z2v = spec.z2_profile()(nodes)
    if np.max(np.abs(z1v)) == 0.0:
        w = np.ones_like(nodes)
    else:
        # integrating factor on the grid: w = exp(cumulative trapezoid of z1/z2)
        ratio = z1v / z2v
        cum = np.concatenate(([0.0], np.cumsum((ratio[1:] + ratio[:-1]) * dx / 2.0)))
        w = np.exp(cum)
    wz2 = w * z2v
    wz2_half = 0.5 * (wz2[1:] + wz2[:-1])  # midpoints, length grid_n

    dirichlet_left = spec.bc_left[1] == 0.0
    dirichlet_right = spec.bc_right[1] == 0.0
    keep = slice(1 if dirichlet_left else 0, grid_n if dirichlet_right else grid_n + 1)
    idx = np.arange(grid_n + 1)[keep]
    nk = idx.shape[0]

    # stiffness K (symmetric tridiagonal) and lumped mass M over kept nodes
    K_diag = np.zeros(nk)
    K_off = np.zeros(nk - 1)
    M = np.zeros(nk)
    for local, i in enumerate(idx):
        left_half = wz2_half[i - 1] if i > 0 else 0.0
        right_half = wz2_half[i] if i < grid_n else 0.0
        K_diag[local] = (left_half + right_half) / dx
        cell = dx * (0.5 if i in (0, grid_n) else 1.0)
        M[local] = w[i] * cell
    K_off[:] = -wz2_half[idx[:-1]] / dx
    # weak-form boundary terms with u'(a) = -(h1/h2) u(a):
    #   K(u,v) = int w z2 u'v' + wz2(a2)(h1r/h2r) u v|_{a2} - wz2(a1)(h1l/h2l) u v|_{a1}
    if not dirichlet_left:
        h1, h2 = spec.bc_left
        K_diag[0] += -wz2[0] * h1 / h2
    if not dirichlet_right:
        h1, h2 = spec.bc_right
        K_diag[-1] += wz2[-1] * h1 / h2

    sqm = np.sqrt(M)
    d = K_diag / M
    e = K_off / (sqm[1:] * sqm[:-1])
    n_eig = min(n_modes, nk)
    vals, vecs = eigh_tridiagonal(d, e, select="i", select_range=(0, n_eig - 1))
    lam = -vals  # operator eigenvalues; smallest stiffness = closest to zero
    modes = vecs / sqm[:, None]

    # order non-increasing; break (numerically) equal eigenvalues by node count
    scale = max(float(np.max(np.abs(lam))), 1.0)
    order = sorted(
        range(n_eig),
        key=lambda j: (-round(lam[j] / scale * 1e10), _count_sign_changes(modes[:, j])),
    )
    lam = lam[order]
    modes = modes[:, order]

    # embed back into the full grid (zeros at Dirichlet ends) and normalize
    full = np.zeros((grid_n + 1, n_eig))
    full[keep, :] = modes
    trap_w = np.full(grid_n + 1, dx)
    trap_w[0] = trap_w[-1] = dx / 2.0
    for j in range(n_eig):
        nrm = np.sqrt(np.sum(trap_w * w * full[:, j] ** 2))
        full[:, j] /= nrm
        k0 = np.argmax(np.abs(full[:, j]) > 1e-12)
        if full[k0, j] < 0:
            full[:, j] = -full[:, j]

    flags: list[str] = []
    # consistency check against the plain (non-symmetrized) operator stencil
    interior = slice(1, grid_n)
    resid = 0.0
    for j in range(min(n_eig, m)):
        u = full[:, j]
        au = (
            z1v[interior] * (u[2:] - u[:-2]) / (2 * dx)
            + (wz2_half[1:] * (u[2:] - u[1:-1]) - wz2_half[:-1] * (u[1:-1] - u[:-2]))
            / (w[interior] * dx**2)
        )
        scale = max(np.abs(lam[j]), 1.0) * np.max(np.abs(u))
        resid = max(resid, np.max(np.abs(au - lam[j] * u[interior])) / scale)
    if resid > 5e-3:
        flags.append(f"discretization-residual:{resid:.2e}")

    def evaluator(j: int, p: np.ndarray) -> np.ndarray:
        return np.interp(p, nodes, full[:, j])

    return ModalBasis(
        m=m,
        eigenvalues=lam,
        domain=(float(a1), float(a2)),
        quad_p=nodes,
        quad_w=trap_w,
        weight=w,
        flags=tuple(flags),
        _evaluator=evaluator,
        _phi_quad=full.T.copy(),
    )


def project(
    profile,
    basis: ModalBasis,
    modes: Sequence[int] | None = None,
    *,
    weighted: bool = True,
    resample: bool = False,
) -> np.ndarray:
    """Quadrature inner products ``<phi_j, profile>`` for the selected modes.

    ``profile`` is a callable of p or an array of samples on the basis
    quadrature nodes (shape (nq,) or (nq, k); columns projected
    independently).  Mismatched tabulated grids are rejected unless
    ``resample=True`` (linear interpolation is then applied).
    """
    if modes is None:
        modes = range(basis.m)
    if callable(profile):
        vals = np.asarray(profile(basis.quad_p), dtype=float)
    else:
        vals = np.asarray(profile, dtype=float)
        if vals.shape[0] != basis.quad_p.shape[0]:
            if not resample:
                raise ValueError(
                    f"tabulated profile has {vals.shape[0]} samples, quadrature has "
                    f"{basis.quad_p.shape[0]}; pass resample=True to interpolate"
                )
            xs = np.linspace(basis.domain[0], basis.domain[1], vals.shape[0])
            if vals.ndim == 1:
                vals = np.interp(basis.quad_p, xs, vals)
            else:
                vals = np.stack(
                    [np.interp(basis.quad_p, xs, vals[:, k]) for k in range(vals.shape[1])],
                    axis=1,
                )
    wq = basis.quad_w * basis.weight if weighted else basis.quad_w
    rows = []
    for j in modes:
        phi = basis.phi_on_quad(j)
        if vals.ndim == 1:
            rows.append(np.sum(wq * phi * vals))
        else:
            rows.append(np.sum(wq[:, None] * phi[:, None] * vals, axis=0))
    return np.asarray(rows)


def spectral_gap(basis: ModalBasis, m: int | None = None) -> SpectralGap:
    """Slow/fast separation ratio ``epsilon = |lambda_L| / |lambda_{m+1}|``.

    ``lambda_L`` is the first nonzero eigenvalue in the non-increasing
    order; ``separable`` requires ``lambda_{m+1} < 0`` and ``epsilon < 1``.
    """
    m = basis.m if m is None else m
    ev = basis.eigenvalues
    if ev.shape[0] < m + 1:
        raise DegenerateSpectrumError(
            f"basis stores {ev.shape[0]} eigenvalues; spectral gap at m={m} needs m+1"
        )
    nonzero = ev[np.abs(ev) > 1e-12 * max(np.max(np.abs(ev)), 1.0)]
    if nonzero.shape[0] == 0:
        raise DegenerateSpectrumError("all eigenvalues are zero")
    lam_L = nonzero[0]
    lam_tail = ev[m]
    epsilon = float(abs(lam_L) / abs(lam_tail))
    return SpectralGap(epsilon=epsilon, separable=bool(lam_tail < 0 and epsilon < 1.0))


def reconstruct_slow_state(
    samples: np.ndarray,
    basis: ModalBasis,
    locations: np.ndarray,
) -> np.ndarray:
    """Recover slow coefficients from point measurements of the field.

    With ``k = m`` locations this solves the interpolation system directly;
    with ``k > m`` it returns the least-squares estimate.  Batched samples
    of shape (k, batch) give (m, batch).

    Raises
    ------
    SingularLocationsError
        If the eigenfunction sample matrix has condition number > 1e12
        (e.g. all locations at eigenfunction zeros).
    """
    locations = np.atleast_1d(np.asarray(locations, dtype=float))
    samples = np.asarray(samples, dtype=float)
    k, m = locations.shape[0], basis.m
    if k < m:
        raise ValueError(f"need at least m={m} measurement locations, got {k}")
    Phi = np.stack([basis.phi(j, locations) for j in range(m)], axis=1)
    cond = np.linalg.cond(Phi)
    if not np.isfinite(cond) or cond > 1e12:
        raise SingularLocationsError(
            f"measurement matrix condition {cond:.2e} exceeds 1e12; move locations off eigenfunction zeros"
        )
    if k == m:
        return np.linalg.solve(Phi, samples)
    sol, *_ = np.linalg.lstsq(Phi, samples, rcond=None)
    return sol


def assemble_slow_system(basis: ModalBasis, b2, b1, cbar) -> SlowSystem:
    """Project input/disturbance/output profiles into the reduced model.

    ``b2``/``b1`` may be a single profile or a sequence of per-channel
    profiles (columns of B2s/B1s); ``cbar`` likewise gives the rows of Cs.
    ``A_s`` reuses the basis eigenvalues verbatim.  The basis must be
    slow/fast separable.
    """
    gap = spectral_gap(basis)
    if not gap.separable:
        raise DegenerateSpectrumError(
            f"basis not slow/fast separable (epsilon={gap.epsilon:.3g}, tail={basis.tail_eigenvalue:.3g})"
        )
    A_s = np.diag(basis.eigenvalues[: basis.m])

    def columns(profiles) -> np.ndarray:
        if callable(profiles) or isinstance(profiles, np.ndarray):
            profiles = [profiles]
        cols = [project(prof, basis, weighted=True) for prof in profiles]
        return np.stack(cols, axis=1)

    B2s = columns(b2)
    B1s = columns(b1)
    crows = cbar if isinstance(cbar, (list, tuple)) else [cbar]
    Cs = np.stack([project(c, basis, weighted=False) for c in crows], axis=0)
    return SlowSystem(A_s=A_s, B2s=B2s, B1s=B1s, Cs=Cs, basis=basis)
