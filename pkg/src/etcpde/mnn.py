"""Three-layer network model of the slow-subsystem nonlinearity.

A single hidden layer of bipolar sigmoids between two trainable weight
matrices approximates the unknown reaction term of the reduced model:
``f_nn(x) = W mu(V x)``.  The module provides forward evaluation, target
generation from sampled trajectories (full-plant or reduced-sampler),
Levenberg-Marquardt training with a plain gradient-descent baseline,
an approximation-bound estimate, and the sector bounds used by the
controller synthesis.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from ._kernels import mnn_forward_batch, mnn_jacobian_batch
from .errors import DivergenceError, TrainingStalledError
from .galerkin import ModalBasis, reconstruct_slow_state
from .pde_sim import OVERFLOW_GUARD, PlantModel, _diffusion_rows

__all__ = [
    "Mnn",
    "SectorBounds",
    "TrainingSet",
    "LmConfig",
    "TrainingResult",
    "activation",
    "activation_vec",
    "activation_integral",
    "forward",
    "generate_targets",
    "train_lm",
    "train_bp_baseline",
    "estimate_delta",
    "sector_bounds",
    "save_weights",
    "load_weights",
]


@dataclass(frozen=True)
class Mnn:
    """Network parameters: output weights W (m, n_h), input weights V
    (n_h, m), and fixed per-neuron amplitude q and slope r vectors."""

    W: np.ndarray
    V: np.ndarray
    q: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "W", np.atleast_2d(np.asarray(self.W, dtype=float)))
        object.__setattr__(self, "V", np.atleast_2d(np.asarray(self.V, dtype=float)))
        object.__setattr__(self, "q", np.atleast_1d(np.asarray(self.q, dtype=float)))
        object.__setattr__(self, "r", np.atleast_1d(np.asarray(self.r, dtype=float)))
        m, n_h = self.W.shape
        if self.V.shape != (n_h, m):
            raise ValueError(
                f"V must be {(n_h, m)} to match W {self.W.shape}, got {self.V.shape}"
            )
        if self.q.shape == (1,) and n_h > 1:
            object.__setattr__(self, "q", np.full(n_h, self.q[0]))
        if self.r.shape == (1,) and n_h > 1:
            object.__setattr__(self, "r", np.full(n_h, self.r[0]))
        if self.q.shape != (n_h,) or self.r.shape != (n_h,):
            raise ValueError("q and r must have one entry per hidden neuron")
        if np.any(self.q <= 0) or np.any(self.r <= 0):
            raise ValueError("q and r must be positive")

    @property
    def m(self) -> int:
        return self.W.shape[0]

    @property
    def n_h(self) -> int:
        return self.W.shape[1]

    @classmethod
    def initialized(cls, m: int, n_h: int, q=1.0, r=1.0, seed: int = 0) -> "Mnn":
        """Fresh network with weights uniform in [-1, 1] from the seed."""
        rng = np.random.default_rng(seed)
        return cls(
            W=rng.uniform(-1.0, 1.0, size=(m, n_h)),
            V=rng.uniform(-1.0, 1.0, size=(n_h, m)),
            q=q,
            r=r,
        )


@dataclass(frozen=True)
class SectorBounds:
    """Per-neuron slope confinement g_min <= mu(s)/s <= g_max."""

    g_min: np.ndarray
    g_max: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "g_min", np.atleast_1d(np.asarray(self.g_min, float)))
        object.__setattr__(self, "g_max", np.atleast_1d(np.asarray(self.g_max, float)))
        if self.g_min.shape != self.g_max.shape:
            raise ValueError("g_min and g_max must have equal length")
        if np.any(self.g_min < 0) or np.any(self.g_min > self.g_max):
            raise ValueError("need 0 <= g_min <= g_max per neuron")

    @property
    def G_min(self) -> np.ndarray:
        return np.diag(self.g_min)

    @property
    def G_max(self) -> np.ndarray:
        return np.diag(self.g_max)

    @property
    def G(self) -> np.ndarray:
        return np.diag(self.g_max - self.g_min)


@dataclass(frozen=True)
class TrainingSet:
    """Paired slow states and nonlinearity estimates at sampling interval
    dT_s; ``region`` records the polyhedral box the inputs were drawn from."""

    inputs: np.ndarray  # (N, m)
    targets: np.ndarray  # (N, m)
    dT_s: float
    region: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "inputs", np.atleast_2d(np.asarray(self.inputs, float)))
        object.__setattr__(self, "targets", np.atleast_2d(np.asarray(self.targets, float)))
        if self.inputs.shape != self.targets.shape:
            raise ValueError("inputs and targets must have matching shapes")
        if self.dT_s <= 0:
            raise ValueError("dT_s must be positive")
        if not (np.all(np.isfinite(self.inputs)) and np.all(np.isfinite(self.targets))):
            raise ValueError("training data must be finite")
        if self.region:
            region = tuple((float(lo), float(hi)) for lo, hi in self.region)
            object.__setattr__(self, "region", region)
            for j, (lo, hi) in enumerate(region):
                col = self.inputs[:, j]
                if np.any(col < lo - 1e-9) or np.any(col > hi + 1e-9):
                    raise ValueError(f"input coordinate {j} leaves [{lo}, {hi}]")

    @property
    def n_samples(self) -> int:
        return self.inputs.shape[0]


@dataclass(frozen=True)
class LmConfig:
    """Damped-least-squares settings: initial damping, convergence tolerance
    on the loss decrease, iteration cap, and damping update factors."""

    mu0: float = 1e-3
    eps_c: float = 1e-9
    k_max: int = 200
    damping_up: float = 10.0
    damping_down: float = 0.1

    def __post_init__(self):
        if min(self.mu0, self.eps_c, self.damping_up, self.damping_down) <= 0:
            raise ValueError("all settings must be positive")
        if self.k_max <= 0:
            raise ValueError("k_max must be positive")
        if not (self.damping_up > 1.0 > self.damping_down):
            raise ValueError("need damping_up > 1 > damping_down")


@dataclass
class TrainingResult:
    """Trained network plus the accepted-step loss history."""

    net: Mnn
    history: np.ndarray
    iterations: int
    converged: bool


# ---------------------------------------------------------------- forward


def activation(s: float, q: float, r: float) -> float:
    """Bipolar sigmoid mu(s) = q (2 / (1 + e^{-s/r}) - 1)."""
    return float(q * (2.0 / (1.0 + np.exp(-s / r)) - 1.0))


def activation_vec(s: np.ndarray, q, r) -> np.ndarray:
    """Vectorized bipolar sigmoid (q, r broadcast per neuron)."""
    s = np.asarray(s, dtype=float)
    return np.asarray(q) * (2.0 / (1.0 + np.exp(-s / np.asarray(r))) - 1.0)


def activation_integral(s: np.ndarray, q, r) -> np.ndarray:
    """Closed-form antiderivative int_0^s mu: q (2r ln((1+e^{s/r})/2) - s)."""
    s = np.asarray(s, dtype=float)
    q = np.asarray(q, dtype=float)
    r = np.asarray(r, dtype=float)
    # logaddexp keeps the log term finite for large |s|
    return q * (2.0 * r * (np.logaddexp(0.0, s / r) - np.log(2.0)) - s)


def forward(net: Mnn, xi_s: np.ndarray) -> np.ndarray:
    """Network output W mu(V xi_s); accepts one state (m,) or a batch (N, m)."""
    x = np.asarray(xi_s, dtype=float)
    single = x.ndim == 1
    out, _, _ = mnn_forward_batch(net.W, net.V, net.q, net.r, np.atleast_2d(x))
    return out[0] if single else out


def sector_bounds(net: Mnn) -> SectorBounds:
    """Bipolar-sigmoid sector: lower slope 0, upper slope q_i / (2 r_i)."""
    return SectorBounds(g_min=np.zeros(net.n_h), g_max=net.q / (2.0 * net.r))


# ---------------------------------------------------------------- targets


def _region_grid(region: Sequence, spacing: float) -> np.ndarray:
    axes = []
    for lo, hi in region:
        lo, hi = float(lo), float(hi)
        if hi < lo:
            raise ValueError("region bounds must satisfy lo <= hi")
        axes.append(np.arange(lo, hi + 0.5 * spacing, spacing))
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([ax.ravel() for ax in mesh], axis=1)


def _sample_full_plant(
    plant: PlantModel,
    basis: ModalBasis,
    starts: np.ndarray,
    dT_s: float,
    substeps: int,
    n_meas: int,
    grid_n: int,
):
    """Advance every modal start state through the plant for one sampling
    interval and reconstruct the slow state from point measurements at both
    endpoints.  Returns (xi0, xi1, keep mask)."""
    spec = plant.spec
    if not spec.is_dirichlet:
        raise NotImplementedError("full-plant sampling supports Dirichlet boundaries")
    m = starts.shape[1]
    a1, a2 = spec.domain
    nodes = np.linspace(a1, a2, grid_n + 1)
    dx = (a2 - a1) / grid_n
    z1v = spec.z1_profile()(nodes)
    z2v = spec.z2_profile()(nodes)
    phi_cols = np.stack([basis.phi(j, nodes) for j in range(m)], axis=1)

    X = phi_cols @ starts.T  # (n_nodes, N) fields at t = 0
    X[0, :] = X[-1, :] = 0.0
    X0 = X.copy()

    dt = dT_s / substeps
    n_int = grid_n - 1
    sub, dia, sup = _diffusion_rows(z2v, dx, n_int)
    ab = np.zeros((3, n_int))
    ab[0, 1:] = -dt * sup[:-1]
    ab[1, :] = 1.0 - dt * dia
    ab[2, :-1] = -dt * sub[1:]

    for _ in range(substeps):
        F = plant.f(X)
        adv = z1v[1:-1, None] * (X[2:, :] - X[:-2, :]) / (2.0 * dx)
        rhs = X[1:-1, :] + dt * (F[1:-1, :] + adv)
        with np.errstate(all="ignore"):
            X[1:-1, :] = scipy.linalg.solve_banded((1, 1), ab, rhs)
        X[0, :] = X[-1, :] = 0.0

    with np.errstate(invalid="ignore"):
        keep = np.all(np.isfinite(X), axis=0) & (
            np.nanmax(np.abs(X), axis=0) <= OVERFLOW_GUARD
        )

    idx = np.unique(np.round(np.linspace(0, grid_n, n_meas + 2)).astype(int)[1:-1])
    locs = nodes[idx]
    xi0 = reconstruct_slow_state(X0[idx, :], basis, locs)
    xi1 = reconstruct_slow_state(np.where(keep[None, :], X[idx, :], 0.0), basis, locs)
    return xi0.T, xi1.T, keep


def generate_targets(
    sampler,
    region: Sequence,
    spacing: float,
    dT_s: float,
    A_s: np.ndarray,
    basis: ModalBasis | None = None,
    n_meas: int = 16,
    substeps: int = 5,
    grid_n: int = 256,
) -> TrainingSet:
    """Build a training set over a box grid of slow states.

    ``sampler`` is either a full ``PlantModel`` (then ``basis`` is required:
    each grid state is lifted to a modal field, simulated open loop for one
    sampling interval, and read back through point measurements) or a callable
    ``sampler(xi_s, dT_s) -> xi_s`` advancing the reduced state directly.
    Each target is the drift estimate
    ``(xi_s(t+dT) - xi_s(t)) / dT - A_s xi_s(t)``; samples that diverge
    within the interval are discarded with a warning.
    """
    if spacing <= 0 or dT_s <= 0:
        raise ValueError("spacing and dT_s must be positive")
    A_s = np.atleast_2d(np.asarray(A_s, dtype=float))
    starts = _region_grid(region, spacing)
    if starts.shape[1] != A_s.shape[0]:
        raise ValueError("region dimension does not match A_s")

    if isinstance(sampler, PlantModel):
        if basis is None:
            raise ValueError("full-plant sampling requires the modal basis")
        xi0, xi1, keep = _sample_full_plant(
            sampler, basis, starts, dT_s, substeps, n_meas, grid_n
        )
    elif callable(sampler):
        xi1 = np.stack(
            [np.asarray(sampler(x, dT_s), dtype=float) for x in starts], axis=0
        )
        xi0 = starts
        keep = np.all(np.isfinite(xi1), axis=1) & (
            np.max(np.abs(np.nan_to_num(xi1)), axis=1) <= OVERFLOW_GUARD
        )
    else:
        raise TypeError("sampler must be a PlantModel or a callable")

    if not np.all(keep):
        warnings.warn(
            f"discarded {int(np.sum(~keep))} diverged samples during target generation",
            stacklevel=2,
        )
        xi0, xi1, starts = xi0[keep], xi1[keep], starts[keep]

    targets = (xi1 - xi0) / dT_s - xi0 @ A_s.T
    return TrainingSet(inputs=xi0, targets=targets, dT_s=dT_s, region=tuple())


# ---------------------------------------------------------------- training


def _loss(out: np.ndarray, targets: np.ndarray) -> float:
    n = out.shape[0]
    return float(0.5 * np.sum((out - targets) ** 2) / n)


def _init_weights(net: Mnn, seed: int | None) -> tuple[np.ndarray, np.ndarray]:
    if seed is None:
        return net.W.copy(), net.V.copy()
    rng = np.random.default_rng(seed)
    W = rng.uniform(-1.0, 1.0, size=net.W.shape)
    V = rng.uniform(-1.0, 1.0, size=net.V.shape)
    return W, V


_DAMPING_CAP = 1e12


def train_lm(
    net: Mnn,
    data: TrainingSet,
    cfg: LmConfig | None = None,
    seed: int | None = 0,
    per_channel: bool = False,
) -> TrainingResult:
    """Damped least-squares (Levenberg-Marquardt) fit of W and V.

    Weights start uniform in [-1, 1] from ``seed`` (pass ``seed=None`` to
    keep the provided weights).  Each iteration solves
    ``(J^T J + damping I) h = J^T e`` for the residual Jacobian J; the
    damping shrinks after accepted steps and grows after rejected ones, so
    the accepted-loss sequence is non-increasing.  Stops when the loss
    decrease falls below ``eps_c`` or at ``k_max`` iterations.

    ``per_channel=True`` trains one single-output network per slow
    coordinate and merges them into a block-diagonal equivalent (same
    function class; the joint fit is the default).
    """
    cfg = cfg or LmConfig()
    if data.n_samples == 0:
        raise ValueError("training set is empty")
    if data.inputs.shape[1] != net.m:
        raise ValueError("training data dimension does not match the network")

    if per_channel:
        return _train_per_channel(net, data, cfg, seed)

    W0, V0 = _init_weights(net, seed)
    W, V, history, iterations, converged = _lm_loop(
        W0, V0, net.q, net.r, data.inputs, data.targets, cfg, on_stall=lambda w, v: replace(net, W=w, V=v)
    )
    return TrainingResult(
        net=replace(net, W=W, V=V),
        history=np.array(history),
        iterations=iterations,
        converged=converged,
    )


def _lm_loop(W, V, q, r, X, T, cfg, on_stall=None):
    """Damped least-squares iteration on raw weight matrices.

    Shape-general: W (m_out, n_h), V (n_h, m_in), X (N, m_in),
    T (N, m_out)."""
    n_w = W.size
    out, _, _ = mnn_forward_batch(W, V, q, r, X)
    loss = _loss(out, T)
    history = [loss]
    damping = cfg.mu0
    iterations = 0
    converged = False
    eye = np.eye(n_w + V.size)

    for _ in range(cfg.k_max):
        out, mu, sig = mnn_forward_batch(W, V, q, r, X)
        e = (out - T).ravel()
        J = mnn_jacobian_batch(W, V, q, r, X, mu, sig)
        H = J.T @ J
        g = J.T @ e

        accepted = False
        flat = False
        while damping <= _DAMPING_CAP:
            try:
                h = scipy.linalg.solve(H + damping * eye, g, assume_a="pos")
            except scipy.linalg.LinAlgError:
                h = None
            if h is not None and np.all(np.isfinite(h)):
                W_new = W - h[:n_w].reshape(W.shape)
                V_new = V - h[n_w:].reshape(V.shape)
                out_new, _, _ = mnn_forward_batch(W_new, V_new, q, r, X)
                loss_new = _loss(out_new, T)
                if np.isfinite(loss_new) and loss_new < loss:
                    W, V = W_new, V_new
                    drop = loss - loss_new
                    loss = loss_new
                    history.append(loss)
                    damping = max(damping * cfg.damping_down, 1e-15)
                    accepted = True
                    break
                if np.isfinite(loss_new) and abs(loss_new - loss) < cfg.eps_c:
                    flat = True  # already at (numerical) optimum
                    break
            damping *= cfg.damping_up
        iterations += 1
        if flat:
            converged = True
            break
        if not accepted:
            best = on_stall(W, V) if on_stall is not None else (W, V)
            raise TrainingStalledError(
                f"no acceptable step after damping reached {damping:.3g}",
                best=best,
                history=np.array(history),
            )
        if drop < cfg.eps_c:
            converged = True
            break

    return W, V, history, iterations, converged


def _train_per_channel(net: Mnn, data: TrainingSet, cfg: LmConfig, seed):
    """Train one single-output sub-network per slow coordinate and merge
    them into a block-diagonal joint network (same function class)."""
    m, n_h = net.m, net.n_h
    outcomes = []
    for a in range(m):
        rng = np.random.default_rng(None if seed is None else seed + a)
        W0 = rng.uniform(-1.0, 1.0, size=(1, n_h))
        V0 = rng.uniform(-1.0, 1.0, size=(n_h, m))
        outcomes.append(
            _lm_loop(W0, V0, net.q, net.r, data.inputs, data.targets[:, a : a + 1], cfg)
        )

    W = np.zeros((m, m * n_h))
    V = np.zeros((m * n_h, m))
    for a, (Wa, Va, _, _, _) in enumerate(outcomes):
        W[a, a * n_h : (a + 1) * n_h] = Wa[0]
        V[a * n_h : (a + 1) * n_h, :] = Va
    merged = Mnn(W=W, V=V, q=np.tile(net.q, m), r=np.tile(net.r, m))

    length = max(len(h) for _, _, h, _, _ in outcomes)
    padded = np.stack(
        [
            np.concatenate([h, np.full(length - len(h), h[-1])])
            for _, _, h, _, _ in outcomes
        ]
    )
    return TrainingResult(
        net=merged,
        history=np.sum(padded, axis=0),
        iterations=max(it for _, _, _, it, _ in outcomes),
        converged=all(c for _, _, _, _, c in outcomes),
    )


def train_bp_baseline(
    net: Mnn,
    data: TrainingSet,
    rate: float,
    iters: int,
    seed: int | None = 0,
) -> TrainingResult:
    """Plain fixed-rate gradient descent on the same loss (comparison only)."""
    if data.n_samples == 0:
        raise ValueError("training set is empty")
    X, T = data.inputs, data.targets
    n = X.shape[0]
    W, V = _init_weights(net, seed)
    q, r = net.q, net.r
    n_w = W.size

    out, _, _ = mnn_forward_batch(W, V, q, r, X)
    loss = _loss(out, T)
    history = [loss]
    guard = max(1.0, loss) * 1e6

    for _ in range(iters):
        out, mu, sig = mnn_forward_batch(W, V, q, r, X)
        J = mnn_jacobian_batch(W, V, q, r, X, mu, sig)
        g = J.T @ (out - T).ravel() / n  # gradient of the 1/(2N)-normalized loss
        W = W - rate * g[:n_w].reshape(W.shape)
        V = V - rate * g[n_w:].reshape(V.shape)
        out, _, _ = mnn_forward_batch(W, V, q, r, X)
        loss = _loss(out, T)
        history.append(loss)
        if not np.isfinite(loss) or loss > guard:
            raise DivergenceError(
                f"gradient descent diverged at rate {rate}",
                partial_trace=np.array(history),
            )

    return TrainingResult(
        net=replace(net, W=W, V=V),
        history=np.array(history),
        iterations=iters,
        converged=False,
    )


# ---------------------------------------------------------------- bounds


def estimate_delta(
    net: Mnn,
    true_f: Callable[[np.ndarray], np.ndarray],
    region: Sequence,
    spacing: float,
    safety: float = 1.1,
) -> float:
    """Relative approximation bound: safety * max ||f(x) - f_nn(x)|| / ||x||
    over the box grid, excluding a 1e-6 ball around the origin (the ratio is
    defined for x != 0; the grid maximum under-estimates the true supremum,
    hence the safety factor)."""
    pts = _region_grid(region, spacing)
    norms = np.linalg.norm(pts, axis=1)
    pts = pts[norms > 1e-6]
    if pts.shape[0] == 0:
        raise ValueError("evaluation grid is empty after origin exclusion")
    fs = np.stack([np.asarray(true_f(x), dtype=float).ravel() for x in pts], axis=0)
    fnn = forward(net, pts)
    ratio = np.linalg.norm(fs - fnn, axis=1) / np.linalg.norm(pts, axis=1)
    return float(safety * np.max(ratio))


# ---------------------------------------------------------------- weights io


def save_weights(net: Mnn, w_path, v_path, qr_path=None) -> None:
    """Full-precision row-major CSV export of W, V (and optionally q, r)."""
    np.savetxt(w_path, net.W, delimiter=",", fmt="%.17g")
    np.savetxt(v_path, net.V, delimiter=",", fmt="%.17g")
    if qr_path is not None:
        np.savetxt(qr_path, np.stack([net.q, net.r]), delimiter=",", fmt="%.17g")


def load_weights(w_path, v_path, qr_path=None, q=1.0, r=1.0) -> Mnn:
    """Rebuild a network from CSV matrices written by :func:`save_weights`."""
    W = np.loadtxt(w_path, delimiter=",", ndmin=2)
    V = np.loadtxt(v_path, delimiter=",", ndmin=2)
    if qr_path is not None:
        qr = np.loadtxt(qr_path, delimiter=",", ndmin=2)
        q, r = qr[0], qr[1]
    return Mnn(W=W, V=V, q=q, r=r)
