"""Dense log-det barrier interior-point solver for small SDPs.

Constraints are callables mapping a dict of named variable blocks to a
symmetric matrix; each map must be affine in the packed variable vector.
The solver probes every map with unit vectors to recover its matrix
pencil, verifies affineness at a random point, runs a phase-1 slack
minimization, then (optionally) minimizes a linear objective along the
central path.  Every "feasible" verdict is re-checked by direct
eigenvalue evaluation at the returned point.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from ..errors import NumericalFailureError
from .types import SymBlockMatrix

__all__ = ["VariableLayout", "ConstraintSpec", "SdpResult", "sdp_solve"]

_COND_LIMIT = 1e14
_GAP_TOL = 1e-7
_T_FACTOR = 5.0  # barrier parameter shrinks by 0.2 per outer round
_BOX = 1e6  # soft bound on rescaled iterates; keeps the analytic center
# finite when the feasible cone is unbounded (e.g. positively homogeneous
# constraint sets, where the log-det barrier otherwise rewards pure scaling)


class VariableLayout:
    """Registry of named variable blocks packed into one flat vector."""

    def __init__(self):
        self._blocks: list[tuple[str, tuple]] = []
        self._size = 0

    def add_symmetric(self, name: str, n: int) -> "VariableLayout":
        self._blocks.append((name, ("sym", n)))
        self._size += n * (n + 1) // 2
        return self

    def add_general(self, name: str, rows: int, cols: int) -> "VariableLayout":
        self._blocks.append((name, ("full", rows, cols)))
        self._size += rows * cols
        return self

    def add_diagonal(self, name: str, n: int) -> "VariableLayout":
        self._blocks.append((name, ("diag", n)))
        self._size += n
        return self

    def add_scalar(self, name: str) -> "VariableLayout":
        self._blocks.append((name, ("scalar",)))
        self._size += 1
        return self

    @property
    def size(self) -> int:
        return self._size

    @property
    def names(self) -> list[str]:
        return [n for n, _ in self._blocks]

    def unpack(self, x: np.ndarray) -> dict:
        out = {}
        k = 0
        for name, kind in self._blocks:
            if kind[0] == "sym":
                n = kind[1]
                M = np.zeros((n, n))
                iu = np.triu_indices(n)
                vals = x[k : k + n * (n + 1) // 2]
                M[iu] = vals
                M.T[iu] = vals
                out[name] = M
                k += n * (n + 1) // 2
            elif kind[0] == "full":
                r, c = kind[1], kind[2]
                out[name] = x[k : k + r * c].reshape(r, c)
                k += r * c
            elif kind[0] == "diag":
                n = kind[1]
                out[name] = np.diag(x[k : k + n])
                k += n
            else:
                out[name] = float(x[k])
                k += 1
        return out

    def pack(self, values: dict) -> np.ndarray:
        x = np.zeros(self._size)
        k = 0
        for name, kind in self._blocks:
            V = values[name]
            if kind[0] == "sym":
                n = kind[1]
                M = np.asarray(V, float)
                x[k : k + n * (n + 1) // 2] = M[np.triu_indices(n)]
                k += n * (n + 1) // 2
            elif kind[0] == "full":
                r, c = kind[1], kind[2]
                x[k : k + r * c] = np.asarray(V, float).ravel()
                k += r * c
            elif kind[0] == "diag":
                n = kind[1]
                M = np.asarray(V, float)
                x[k : k + n] = np.diag(M) if M.ndim == 2 else M
                k += n
            else:
                x[k] = float(V)
                k += 1
        return x

    def linear_functional(self, grads: dict) -> np.ndarray:
        """Vector c with c @ x = sum_name <grads[name], block value>."""
        c = np.zeros(self._size)
        k = 0
        for name, kind in self._blocks:
            if kind[0] == "sym":
                n = kind[1]
                if name in grads:
                    C = np.asarray(grads[name], float)
                    S = C + C.T - np.diag(np.diag(C))
                    c[k : k + n * (n + 1) // 2] = S[np.triu_indices(n)]
                k += n * (n + 1) // 2
            elif kind[0] == "full":
                r, cc = kind[1], kind[2]
                if name in grads:
                    c[k : k + r * cc] = np.asarray(grads[name], float).ravel()
                k += r * cc
            elif kind[0] == "diag":
                n = kind[1]
                if name in grads:
                    C = np.asarray(grads[name], float)
                    c[k : k + n] = np.diag(C) if C.ndim == 2 else C
                k += n
            else:
                if name in grads:
                    c[k] = float(grads[name])
                k += 1
        return c


@dataclass(frozen=True)
class ConstraintSpec:
    """One matrix inequality: sense "pos" demands F(x) >= mu I, "neg" demands F(x) <= -mu I.

    The floor is mu = margin * max(mu_scale, max|F(0)|), so homogeneous
    constraints can raise their floor through ``mu_scale``.
    """

    name: str
    fn: Callable[[dict], object]
    sense: str = "pos"
    mu_scale: float = 1.0

    def __post_init__(self):
        if self.sense not in ("pos", "neg"):
            raise ValueError("sense must be 'pos' or 'neg'")
        if self.mu_scale <= 0:
            raise ValueError("mu_scale must be positive")


@dataclass
class SdpResult:
    status: str  # "optimal" | "feasible" | "infeasible" | "numerical"
    x: np.ndarray
    variables: dict
    slack: dict
    objective: float | None
    iterations: int
    best_violation: float | None = None
    log: list = field(default_factory=list)


def _as_dense(M) -> np.ndarray:
    if isinstance(M, SymBlockMatrix):
        return M.data
    return np.asarray(M, float)


def _probe_constraints(
    constraints: Sequence[ConstraintSpec], layout: VariableLayout, margin: float
):
    """Recover each affine pencil F(x) = F0 + sum_i x_i Fi and verify affineness."""
    n = layout.size
    pencils = []
    rng = np.random.default_rng(12345)
    for spec in constraints:
        sign = 1.0 if spec.sense == "pos" else -1.0
        base = sign * _as_dense(spec.fn(layout.unpack(np.zeros(n))))
        if base.ndim != 2 or base.shape[0] != base.shape[1]:
            raise ValueError(f"constraint {spec.name} must produce a square matrix")
        d = base.shape[0]
        chans = np.zeros((n, d, d))
        for i in range(n):
            e = np.zeros(n)
            e[i] = 1.0
            chans[i] = sign * _as_dense(spec.fn(layout.unpack(e))) - base
        xr = rng.standard_normal(n) * 0.37
        model = base + np.tensordot(xr, chans, axes=1)
        direct = sign * _as_dense(spec.fn(layout.unpack(xr)))
        scale = np.max(np.abs(direct)) + np.max(np.abs(base)) + 1.0
        if np.max(np.abs(direct - model)) > 1e-8 * scale:
            raise ValueError(f"constraint {spec.name} is not affine in the decision variables")
        mu = margin * max(spec.mu_scale, float(np.max(np.abs(base))))
        pencils.append({"name": spec.name, "F0": base - mu * np.eye(d), "F": chans, "mu": mu, "dim": d})
    return pencils


def _chol_or_none(S: np.ndarray):
    try:
        return np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        return None


def _barrier_value(pencils, x: np.ndarray, slack_channel: bool, box: float = _BOX) -> float:
    if x.size and np.max(np.abs(x)) >= box:
        return np.inf
    total = 0.0
    for p in pencils:
        S = p["F0"] + np.tensordot(x[:-1] if slack_channel else x, p["F"], axes=1)
        if slack_channel:
            S = S + x[-1] * np.eye(p["dim"])
        L = _chol_or_none(S)
        if L is None:
            return np.inf
        total -= 2.0 * float(np.sum(np.log(np.diag(L))))
    total -= float(np.sum(np.log(box - x) + np.log(box + x)))
    return total


def _newton_path(
    pencils,
    c_vec: np.ndarray,
    x0: np.ndarray,
    *,
    slack_channel: bool,
    t0: float,
    gap_tol: float,
    max_outer: int = 60,
    max_newton: int = 60,
    early_stop: Callable[[np.ndarray], bool] | None = None,
    stall_returns: bool = False,
    box: float = _BOX,
    log: list | None = None,
):
    """Minimize c @ x over the intersection of the pencil cones.

    Progress guards keep degenerate geometry from dying inside Newton:
    ill-conditioned systems fall back to a truncated eigen-solve confined
    to the well-conditioned curvature subspace, an inner round is
    abandoned after several accepted steps without objective progress
    (barrier-only drift), the whole path stops after four outer rounds
    without progress or once the iterate approaches the soft bound, and
    with ``stall_returns`` a fully collapsed system at a still-infeasible
    iterate returns the point for the caller's verdict instead of raising.
    """
    x = x0.copy()
    n = x.size
    m_total = float(sum(p["dim"] for p in pencils))
    t = t0
    newton_count = 0
    best_obj = float(c_vec @ x)
    outer_stalls = 0
    for outer in range(max_outer):
        outer_start_best = best_obj
        stalled_steps = 0
        round_start_norm = max(1.0, float(np.max(np.abs(x))) if n else 1.0)
        for _ in range(max_newton):
            grad = t * c_vec.copy()
            H = np.zeros((n, n))
            for p in pencils:
                S = p["F0"] + np.tensordot(x[:-1] if slack_channel else x, p["F"], axes=1)
                if slack_channel:
                    S = S + x[-1] * np.eye(p["dim"])
                L = _chol_or_none(S)
                if L is None:
                    raise NumericalFailureError("barrier iterate left the cone")
                R = scipy.linalg.solve_triangular(L, np.eye(p["dim"]), lower=True)
                F = p["F"]
                if slack_channel:
                    F = np.concatenate([F, np.eye(p["dim"])[None]], axis=0)
                T1 = np.matmul(R[None], F)
                T2 = np.matmul(T1, R.T[None])
                grad -= np.trace(T2, axis1=1, axis2=2)
                V = T2.reshape(T2.shape[0], -1)
                H += V @ V.T
            grad += 1.0 / (box - x) - 1.0 / (box + x)
            H[np.diag_indices(n)] += 1.0 / (box - x) ** 2 + 1.0 / (box + x) ** 2
            # Jacobi preconditioning: barrier curvature spans many decades
            # across channels near the boundary, which is a variable-scaling
            # artifact, not intrinsic degeneracy.  Equilibrate the diagonal
            # before judging conditioning.
            dj = np.sqrt(np.maximum(np.diag(H), 1e-300))
            Hs = H / np.outer(dj, dj)
            gs = grad / dj
            try:
                cond = np.linalg.cond(Hs)
            except np.linalg.LinAlgError:
                cond = np.inf
            if not np.isfinite(cond) or cond > _COND_LIMIT:
                # Near-flat curvature valleys (e.g. a scaling direction capped
                # by a quadratic Schur tail) degenerate the system long before
                # the good directions stop making progress.  Restrict the step
                # to the well-conditioned curvature subspace instead of giving
                # up; the flat directions stay frozen.
                ew, Uw = np.linalg.eigh(Hs)
                lam_floor = float(np.max(ew)) * 1e-13
                good = ew > lam_floor
                if not np.any(good):
                    if stall_returns and slack_channel and x[-1] > 0.0:
                        if log is not None:
                            log.append("newton: curvature collapsed while infeasible, stopping")
                        return x, newton_count, False
                    raise NumericalFailureError(
                        f"Newton system condition number {cond:.3g} exceeds {_COND_LIMIT:.0e}"
                        " and no usable curvature subspace remains"
                    )
                coef = np.where(good, (Uw.T @ gs) / np.maximum(ew, lam_floor), 0.0)
                step = (Uw @ coef) / dj
                if log is not None and newton_count % 25 == 0:
                    log.append(f"newton: truncated step in degenerate geometry (cond {cond:.3g})")
            else:
                try:
                    step = np.linalg.solve(Hs, gs) / dj
                except np.linalg.LinAlgError:
                    raise NumericalFailureError("Newton system is singular")
            decrement = float(grad @ step)
            newton_count += 1
            if decrement <= 2e-9 * (1.0 + abs(t * float(c_vec @ x))):
                break
            f0 = t * float(c_vec @ x) + _barrier_value(pencils, x, slack_channel, box)
            # Damped Newton: outside the quadratic-convergence region cap the
            # step at the Dikin-ellipsoid radius so a long flat valley cannot
            # carry the iterate far in one accepted step.
            lam_nt = np.sqrt(max(decrement, 0.0))
            alpha = 1.0 if lam_nt <= 0.25 else 1.0 / (1.0 + lam_nt)
            accepted = False
            for _ in range(60):
                xn = x - alpha * step
                fn = t * float(c_vec @ xn) + _barrier_value(pencils, xn, slack_channel, box)
                if np.isfinite(fn) and fn <= f0 - 0.01 * alpha * decrement:
                    x = xn
                    accepted = True
                    break
                alpha *= 0.5
            if not accepted:
                break
            if early_stop is not None and early_stop(x):
                return x, newton_count, True
            obj = float(c_vec @ x)
            if obj < best_obj - 1e-6 * (1.0 + abs(best_obj)):
                best_obj = obj
                stalled_steps = 0
            else:
                stalled_steps += 1
                if stalled_steps >= 5:
                    break  # barrier-only drift: push the objective weight instead
            if n and np.max(np.abs(x)) > 0.1 * box:
                if log is not None:
                    log.append("newton: iterate near the soft bound, stopping")
                return x, newton_count, False
            if n and np.max(np.abs(x)) > np.e * round_start_norm:
                # Outward scaling drift: the barrier rewards inflating the
                # homogeneous blocks.  Pace the walk to one e-fold per round
                # so the rising objective weight can reprice it.
                break
        if early_stop is not None and early_stop(x):
            return x, newton_count, True
        if best_obj > outer_start_best - 1e-6 * (1.0 + abs(outer_start_best)):
            outer_stalls += 1
            if outer_stalls >= 4:
                if log is not None:
                    log.append(f"newton: no progress over four barrier rounds (t={t:.3g})")
                break
        else:
            outer_stalls = 0
        if m_total / t < gap_tol:
            break
        t *= _T_FACTOR
    return x, newton_count, False


def _min_eigs(pencils, x: np.ndarray) -> dict:
    out = {}
    for p in pencils:
        S = p["F0"] + np.tensordot(x, p["F"], axes=1) + p["mu"] * np.eye(p["dim"])
        out[p["name"]] = float(np.linalg.eigvalsh(S)[0])
    return out


def sdp_solve(
    constraints: Sequence[ConstraintSpec],
    layout: VariableLayout,
    objective: np.ndarray | None = None,
    *,
    margin: float = 1e-6,
    x0: dict | None = None,
    gap_tol: float = _GAP_TOL,
    log: list | None = None,
) -> SdpResult:
    """Solve min objective @ x subject to the matrix inequalities.

    With no objective the solver stops once a strictly feasible point with
    comfortable slack is found.  Verdicts: "optimal"/"feasible" (re-checked
    eigenvalues with slack >= mu/2), "infeasible" (carries the smallest
    violation found), or an exception for numerical breakdown.
    """
    if log is None:
        log = []
    n = layout.size
    pencils = _probe_constraints(constraints, layout, margin)

    # Diagonal rescaling of the variable channels improves Newton conditioning.
    scale = np.ones(n)
    for i in range(n):
        mx = max(np.max(np.abs(p["F"][i])) for p in pencils)
        if mx > 0:
            scale[i] = 1.0 / max(mx, 1e-8)
    scaled = []
    for p in pencils:
        q = dict(p)
        q["F"] = p["F"] * scale[:, None, None]
        scaled.append(q)

    x = np.zeros(n) if x0 is None else layout.pack(x0) / scale
    # Soft iterate bound: tight enough that the analytic-center pull cannot
    # inflate the homogeneous blocks to extreme norms (downstream ratio
    # extraction needs moderate certificates), widened when a warm start
    # already lives further out.
    box = min(_BOX, max(1e4, 50.0 * (1.0 + (float(np.max(np.abs(x))) if n else 0.0))))
    # Phase 1: minimize the uniform slack s with every pencil shifted by s I.
    worst = max(
        -float(np.linalg.eigvalsh(p["F0"] + np.tensordot(x, p["F"], axes=1))[0])
        for p in scaled
    )
    mu_min = min(p["mu"] for p in pencils)
    if worst < -mu_min:
        # The warm start is already strictly feasible with full margins.
        it1 = 0
        s_final = worst
        log.append(f"phase-1 skipped: warm start strictly feasible (worst {worst:.3e})")
    else:
        s0 = max(50.0 * mu_min, 1.5 * worst + 10.0 * mu_min)
        # For pure feasibility calls, stop well inside the cone rather than
        # at the first sign change: downstream consumers extract ratios of
        # the variables, which are fragile at a barely-interior point.  When
        # an objective phase follows it re-centers anyway.
        if objective is None:
            s_target = -max(0.25 * mu_min, 0.02 * s0)
        else:
            s_target = -0.25 * mu_min
        xs = np.concatenate([x, [s0]])
        c_phase1 = np.zeros(n + 1)
        c_phase1[-1] = 1.0
        # Weight the slack objective well above the total barrier dimension:
        # the barrier gains roughly one unit per pencil dimension per e-fold
        # of inflation along the cone's scaling directions, so a comparable
        # weight leaves descent and drift in balance and the path wanders
        # outward before any feasibility progress happens.
        t0_phase1 = 10.0 * max(1.0, float(sum(p["dim"] for p in pencils)))
        xs, it1, _hit = _newton_path(
            scaled,
            c_phase1,
            xs,
            slack_channel=True,
            t0=t0_phase1,
            gap_tol=0.5 * min(mu_min, gap_tol if objective is None else 1.0),
            early_stop=lambda z: z[-1] < s_target,
            stall_returns=True,
            box=box,
            log=log,
        )
        x, s_final = xs[:-1], float(xs[-1])
        log.append(f"phase-1: slack {s_final:.3e} after {it1} Newton steps")
    if s_final >= 0.0:
        eigs = _min_eigs(scaled, x)
        worst_name = min(eigs, key=eigs.get)
        best_violation = max(0.0, -(eigs[worst_name] - pencils[[p["name"] for p in pencils].index(worst_name)]["mu"]))
        log.append(f"infeasible: worst constraint {worst_name} short by {best_violation:.3e}")
        return SdpResult(
            status="infeasible",
            x=x * scale,
            variables=layout.unpack(x * scale),
            slack=eigs,
            objective=None,
            iterations=it1,
            best_violation=best_violation,
            log=log,
        )

    # Retract the feasible point toward the origin along its ray.  The
    # slack-optimal face usually has outward flat directions and the barrier
    # walk returns an inflated representative; downstream consumers (warm
    # starts, ratio and gain extraction) want a moderate-norm one.  Keep an
    # adequate eigenvalue safety, not the inflated one.
    if n:
        def _worst_margin(z: np.ndarray) -> float:
            e = _min_eigs(scaled, z)
            return min(e[p["name"]] - 0.5 * p["mu"] for p in pencils)

        base_margin = _worst_margin(x)
        if base_margin > 0.0:
            need = max(10.0 * mu_min, 0.01 * base_margin)
            for rho in (0.01, 0.02, 0.03, 0.05, 0.08, 0.12, 0.18, 0.27, 0.4, 0.6, 0.8):
                if _worst_margin(rho * x) >= need:
                    if rho < 0.8:
                        log.append(f"retraction: kept feasibility at {rho:g} of the returned norm")
                    x = rho * x
                    break

    iterations = it1
    obj_val = None
    status = "feasible"
    if objective is not None:
        c_scaled = np.asarray(objective, float) * scale
        x, it2, _ = _newton_path(
            scaled,
            c_scaled,
            x,
            slack_channel=False,
            t0=max(1.0, float(sum(p["dim"] for p in pencils))),
            gap_tol=gap_tol,
            box=box,
            log=log,
        )
        iterations += it2
        obj_val = float(np.asarray(objective, float) @ (x * scale))
        status = "optimal"
        log.append(f"phase-2: objective {obj_val:.6e} after {it2} Newton steps")

    # Soundness: re-check every constraint by direct eigenvalue evaluation.
    eigs = _min_eigs(scaled, x)
    for p in pencils:
        if eigs[p["name"]] < 0.5 * p["mu"]:
            log.append(f"re-check failed on {p['name']}: min eig {eigs[p['name']]:.3e}")
            return SdpResult(
                status="infeasible",
                x=x * scale,
                variables=layout.unpack(x * scale),
                slack=eigs,
                objective=obj_val,
                iterations=iterations,
                best_violation=max(0.0, p["mu"] - eigs[p["name"]]),
                log=log,
            )
    return SdpResult(
        status=status,
        x=x * scale,
        variables=layout.unpack(x * scale),
        slack=eigs,
        objective=obj_val,
        iterations=iterations,
        log=log,
    )
