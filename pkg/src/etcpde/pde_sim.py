"""Method-of-lines ground-truth simulation of the 1-D parabolic plant.

Semi-implicit stepping: diffusion ``(z2 xi_p)_p`` is treated with backward
Euler (tridiagonal solve per step, factored once), while advection, the
reaction nonlinearity, and the input/disturbance forcings are explicit.
The measured output ``y(t) = int cbar(p) xi(p,t) dp`` feeds an optional
controller callback every step.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ._kernels import tridiag_factor, tridiag_solve_factored
from .errors import DivergenceError, NumericalFailureError
from .galerkin import SturmLiouvilleSpec, _as_profile

__all__ = [
    "PlantModel",
    "FieldTrace",
    "Disturbance",
    "disturbance_model",
    "simulate",
    "output",
    "spatial_l2_norm",
]

OVERFLOW_GUARD = 1e6


@dataclass(frozen=True)
class PlantModel:
    """Ground-truth PDE plant: operator data plus nonlinearity and forcings.

    ``f`` is the pointwise reaction (must satisfy f(0)=0 and be locally
    Lipschitz on the simulated range — both spot-checked on construction).
    ``b2``/``b1``/``cbar`` are single profiles or per-channel sequences;
    ``D1`` bounds every generated disturbance signal.
    """

    spec: SturmLiouvilleSpec
    f: Callable[[np.ndarray], np.ndarray]
    b2: object
    b1: object
    cbar: object
    xi0: object
    D1: float = 1.0

    def __post_init__(self):
        f0 = float(np.asarray(self.f(np.zeros(1)))[0])
        if abs(f0) > 1e-12:
            raise ValueError(f"reaction must vanish at zero state, got f(0)={f0}")
        s = np.linspace(-5.0, 5.0, 41)
        quot = (self.f(s + 1e-6) - self.f(s)) / 1e-6
        if not np.all(np.isfinite(quot)):
            raise ValueError("reaction difference quotients not finite on [-5, 5]")
        if self.D1 < 0:
            raise ValueError("D1 must be nonnegative")

    def channels(self, which: str) -> list:
        profs = getattr(self, which)
        if callable(profs) or isinstance(profs, np.ndarray):
            return [profs]
        return list(profs)


@dataclass
class FieldTrace:
    """Stored field history with outputs and spatial norms."""

    times: np.ndarray
    grid: np.ndarray
    fields: np.ndarray  # (n_t, n_p)
    outputs: np.ndarray  # (n_t, n_y)
    l2norms: np.ndarray  # (n_t,)
    u: np.ndarray | None = None  # (n_t, n_u) control record
    d: np.ndarray | None = None  # (n_t,) disturbance record
    meta: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Disturbance:
    """Named disturbance signal clipped to |d| <= D1."""

    name: str
    D1: float
    _fn: Callable[[float], float]

    def __call__(self, t: float) -> float:
        return float(np.clip(self._fn(t), -self.D1, self.D1))


def disturbance_model(name: str, D1: float, seed: int = 0, value: float | None = None) -> Disturbance:
    """Factory for the built-in disturbance signals.

    ``constant``: d = value (default D1); ``decaying``: D1 e^{-t} sin(5t);
    ``bandlimited``: seeded random sum of low-frequency sinusoids, amplitude
    normalized below D1; ``zero``: identically zero.
    """
    if name == "zero":
        return Disturbance("zero", 0.0, lambda t: 0.0)
    if name == "constant":
        amp = D1 if value is None else value
        return Disturbance(name, D1, lambda t: amp)
    if name == "decaying":
        return Disturbance(name, D1, lambda t: D1 * np.exp(-t) * np.sin(5.0 * t))
    if name == "bandlimited":
        rng = np.random.default_rng(seed)
        k = 8
        omega = rng.uniform(0.5, 5.0, size=k)
        phase = rng.uniform(0.0, 2.0 * np.pi, size=k)
        amp = rng.uniform(0.3, 1.0, size=k)
        amp *= D1 / np.sum(amp)

        def fn(t: float) -> float:
            return float(np.sum(amp * np.sin(omega * t + phase)))

        return Disturbance(name, D1, fn)
    raise ValueError(f"unknown disturbance model {name!r}")


def output(field_values: np.ndarray, cbar_values: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """Trapezoidal integral of cbar * field per output channel.

    ``cbar_values`` is (n_p,) for one channel or (n_y, n_p).
    """
    cb = np.atleast_2d(cbar_values)
    if cb.shape[1] != grid.shape[0] or field_values.shape[0] != grid.shape[0]:
        raise ValueError("field/profile/grid lengths disagree")
    return np.trapezoid(cb * field_values[None, :], grid, axis=1)


def spatial_l2_norm(field_values: np.ndarray, grid: np.ndarray) -> float:
    """sqrt of the trapezoidal integral of the squared field."""
    return float(np.sqrt(np.trapezoid(field_values**2, grid)))


def _diffusion_rows(z2v: np.ndarray, dx: float, n: int):
    """Tridiagonal rows of the interior diffusion stencil (z2 xi_p)_p."""
    z2h = 0.5 * (z2v[1:] + z2v[:-1])
    sub = np.zeros(n)
    dia = np.zeros(n)
    sup = np.zeros(n)
    for k in range(n):
        i = k + 1  # global node index of k-th interior unknown
        sub[k] = z2h[i - 1] / dx**2
        sup[k] = z2h[i] / dx**2
        dia[k] = -(z2h[i - 1] + z2h[i]) / dx**2
    return sub, dia, sup


def simulate(
    plant: PlantModel,
    controller: Callable[[float, np.ndarray], np.ndarray] | None = None,
    disturbance: Callable[[float], float] | None = None,
    grid_n: int = 256,
    dt: float = 1e-3,
    T: float = 1.0,
    stride: int = 10,
) -> FieldTrace:
    """Integrate the plant and record the field at the requested stride.

    The controller callback receives ``(t, y)`` with the freshly measured
    output and returns the control vector held over the step; pass ``None``
    for open loop.  Raises DivergenceError (with the partial trace attached)
    when the field magnitude passes 1e6 and NumericalFailureError on NaNs.
    """
    spec = plant.spec
    if not spec.is_dirichlet:
        raise NotImplementedError("simulator currently supports Dirichlet boundaries")
    if grid_n < 64:
        raise ValueError("grid_n must be >= 64")
    a1, a2 = spec.domain
    nodes = np.linspace(a1, a2, grid_n + 1)
    dx = (a2 - a1) / grid_n
    z1v = spec.z1_profile()(nodes)
    z2v = spec.z2_profile()(nodes)

    # explicit-term step-size checks (advection transport + sampled reaction slope)
    if dt * np.max(np.abs(z1v)) / dx > 1.0:
        raise ValueError(
            f"dt={dt} violates the advection bound dt*|z1|/dx <= 1 (dx={dx:.3g})"
        )
    s = np.linspace(-5.0, 5.0, 201)
    fslope = np.max(np.abs((plant.f(s + 1e-6) - plant.f(s)) / 1e-6))
    if dt * fslope > 2.0:
        raise ValueError(f"dt={dt} too large for the sampled reaction slope {fslope:.3g}")

    n_int = grid_n - 1
    sub, dia, sup = _diffusion_rows(z2v, dx, n_int)
    # backward-Euler system (I - dt*D) on interior nodes
    cp, den = tridiag_factor(-dt * sub, 1.0 - dt * dia, -dt * sup)
    msub = -dt * sub

    b2_cols = np.stack([_col(prof, nodes) for prof in plant.channels("b2")], axis=1)
    b1_cols = np.stack([_col(prof, nodes) for prof in plant.channels("b1")], axis=1)
    c_rows = np.stack([_col(prof, nodes) for prof in plant.channels("cbar")], axis=0)
    n_u = b2_cols.shape[1]

    xi_raw = _col(plant.xi0, nodes)
    xi = xi_raw.copy()
    xi[0] = xi[-1] = 0.0
    dropped = spatial_l2_norm(xi_raw - xi, nodes)
    meta = {"grid_n": grid_n, "dt": dt, "stride": stride}
    if dropped > 1e-12:
        meta["initial_projection_l2"] = dropped

    n_steps = int(round(T / dt))
    keep = [i for i in range(n_steps + 1) if i % stride == 0]
    if keep[-1] != n_steps:
        keep.append(n_steps)
    keep_set = set(keep)

    times, fields, outs, norms, u_rec, d_rec = [], [], [], [], [], []
    interior = slice(1, grid_n)

    def record(i, t, xi, u, dvec):
        times.append(t)
        fields.append(xi.copy())
        outs.append(output(xi, c_rows, nodes))
        norms.append(spatial_l2_norm(xi, nodes))
        u_rec.append(np.array(u, dtype=float))
        d_rec.append(np.array(dvec, dtype=float))

    u = np.zeros(n_u)
    for i in range(n_steps + 1):
        t = i * dt
        y = output(xi, c_rows, nodes)
        if controller is not None:
            u = np.atleast_1d(np.asarray(controller(t, y), dtype=float))
        if disturbance is not None:
            dvec = np.atleast_1d(np.asarray(disturbance(t), dtype=float))
        else:
            dvec = np.zeros(b1_cols.shape[1])
        if i in keep_set:
            record(i, t, xi, u, dvec)
        if i == n_steps:
            break
        adv = np.zeros_like(xi)
        adv[interior] = z1v[interior] * (xi[2:] - xi[:-2]) / (2.0 * dx)
        forcing = plant.f(xi) + adv + b2_cols @ u + b1_cols @ dvec
        rhs = xi[interior] + dt * forcing[interior]
        xi_next = np.zeros_like(xi)
        xi_next[interior] = tridiag_solve_factored(msub, cp, den, rhs)
        xi = xi_next
        if not np.all(np.isfinite(xi)):
            raise NumericalFailureError(f"NaN/Inf in field at t={t + dt:.4f}")
        if np.max(np.abs(xi)) > OVERFLOW_GUARD:
            partial = FieldTrace(
                times=np.array(times),
                grid=nodes,
                fields=np.array(fields),
                outputs=np.array(outs),
                l2norms=np.array(norms),
                u=np.array(u_rec),
                d=np.array(d_rec),
                meta=meta,
            )
            raise DivergenceError(
                f"field magnitude exceeded {OVERFLOW_GUARD:g} at t={t + dt:.4f}",
                partial_trace=partial,
            )

    return FieldTrace(
        times=np.array(times),
        grid=nodes,
        fields=np.array(fields),
        outputs=np.array(outs),
        l2norms=np.array(norms),
        u=np.array(u_rec),
        d=np.array(d_rec),
        meta=meta,
    )


def _col(profile, nodes: np.ndarray) -> np.ndarray:
    if callable(profile):
        return np.asarray(profile(nodes), dtype=float)
    vals = np.asarray(profile, dtype=float)
    if vals.shape[0] != nodes.shape[0]:
        raise ValueError("tabulated profile length does not match the grid")
    return vals
