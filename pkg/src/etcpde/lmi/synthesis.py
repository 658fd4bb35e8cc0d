"""Switching output-feedback gain synthesis and certification.

The bilinear corner inequalities are linearized by the substitutions
Xi1 = N B2s K and Xi2 = P11 B2s K.  Synthesis first solves the free
relaxation (Xi1, Xi2 unconstrained), reads the implied gain
K = B2s^-1 P11^-1 Xi2 off that point, then re-solves with both
substitutions pinned to that K, which is affine in the remaining
variables.  The certified point satisfies the substitutions exactly, so
it transfers to the bilinear corners with its full margin.  Every
returned certificate is re-verified by direct eigenvalue evaluation, and
the linearized-implies-bilinear direction is hard-checked.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from ..errors import (
    CertificateRejectedError,
    HardAssertionError,
    InfeasibleError,
    NumericalFailureError,
)
from . import blocks
from .sdp import ConstraintSpec, VariableLayout, sdp_solve
from .types import ControllerCertificate, SynthesisParams

__all__ = [
    "synthesize_gain",
    "certify_gain",
    "optimize_gamma",
    "verify_certificate",
    "ultimate_bound",
    "VerificationReport",
    "VerificationEntry",
]

_RHO_INIT = 1e4


# --------------------------------------------------------------------------
# verification


@dataclass(frozen=True)
class VerificationEntry:
    name: str
    value: float
    bound: float
    sense: str  # ">=" or "<="
    ok: bool


@dataclass(frozen=True)
class VerificationReport:
    mode: str
    margin: float
    entries: tuple
    passed: bool

    def summary(self) -> str:
        lines = [f"verification ({self.mode}, margin {self.margin:.2e}):"]
        for e in self.entries:
            lines.append(
                f"  {'ok  ' if e.ok else 'FAIL'} {e.name:14s} {e.value: .6e} {e.sense} {e.bound: .3e}"
            )
        lines.append(f"  overall: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines)

    def value(self, name: str) -> float:
        for e in self.entries:
            if e.name == name:
                return e.value
        raise KeyError(name)


def _entry(name, value, bound, sense) -> VerificationEntry:
    ok = value >= bound if sense == ">=" else value <= bound
    return VerificationEntry(name, float(value), float(bound), sense, bool(ok))


def _offdiag(M: np.ndarray) -> float:
    return float(np.max(np.abs(M - np.diag(np.diag(M))))) if M.size else 0.0


def verify_certificate(
    cert: ControllerCertificate,
    params: SynthesisParams,
    mode: str = "stability",
    margin: float = 1e-6,
) -> VerificationReport:
    """Direct eigenvalue check of every inequality behind the certificate.

    ``mode``: "stability" checks the four switching corners; "no-disturbance"
    their disturbance-free variants; "hinf" the attenuation corners at the
    certificate's gamma.  The report records the extreme eigenvalue of each
    inequality, positivity of the functional weights, and the exactness of
    the gain recovery and coupling identities.
    """
    if mode not in ("stability", "no-disturbance", "hinf"):
        raise ValueError("mode must be stability, no-disturbance, or hinf")
    p = params
    entries = []
    eig = np.linalg.eigvalsh
    entries.append(_entry("pos_P", eig(cert.P)[0], margin, ">="))
    entries.append(_entry("pos_U", eig(0.5 * (cert.U + cert.U.T))[0], margin, ">="))
    entries.append(_entry("pos_L", float(np.min(np.diag(cert.L))), margin, ">="))
    entries.append(_entry("pos_Omega", float(np.min(np.diag(cert.Omega))), margin, ">="))
    scale_L = 1.0 + float(np.max(np.abs(cert.L)))
    entries.append(_entry("diag_L", _offdiag(cert.L), 1e-9 * scale_L, "<="))
    scale_O = 1.0 + float(np.max(np.abs(cert.Omega)))
    entries.append(_entry("diag_Omega", _offdiag(cert.Omega), 1e-9 * scale_O, "<="))
    entries.append(_entry("pos_beta1", cert.beta1, margin, ">="))
    xi = blocks.assemble_xi_tilde(cert.P, cert.Q1, cert.Q2, p.h)
    entries.append(_entry("xi_tilde", xi.min_eig(), margin, ">="))

    gain_gap = float(np.max(np.abs(cert.P11 @ p.B2s @ cert.K - cert.Xi2)))
    entries.append(_entry("gain_identity", gain_gap, 1e-8 * (1.0 + np.max(np.abs(cert.Xi2))), "<="))
    cn = float(np.max(np.abs(cert.N - cert.r @ cert.P11)))
    entries.append(_entry("coupling_N", cn, 1e-6 * (1.0 + np.max(np.abs(cert.N))), "<="))
    cx = float(np.max(np.abs(cert.Xi1 - cert.r @ cert.Xi2)))
    entries.append(_entry("coupling_Xi", cx, 1e-6 * (1.0 + np.max(np.abs(cert.Xi1))), "<="))

    if mode == "stability":
        corners = {f"phi{k}": blocks.assemble_bmi_phi(k, p, cert) for k in (1, 2, 3, 4)}
    elif mode == "no-disturbance":
        corners = {f"phi_hat{k}": blocks.assemble_corollary1(k, p, cert) for k in (1, 2, 3, 4)}
    else:
        if cert.gamma is None:
            raise ValueError("hinf verification needs a certificate with gamma")
        corners = {f"phi{k}": blocks.assemble_hinf(k, p, cert) for k in (5, 6, 7, 8)}
    for name, M in corners.items():
        entries.append(_entry(name, M.max_eig(), -margin, "<="))

    entries = tuple(entries)
    return VerificationReport(mode, margin, entries, all(e.ok for e in entries))


# --------------------------------------------------------------------------
# constraint assembly for the solver


def _scale_hint(p: SynthesisParams) -> float:
    return max(1.0, float(np.max(np.abs(p.A_s))))


def _make_layout(
    p: SynthesisParams,
    *,
    with_N: bool,
    with_Xi1: bool,
    with_Xi2: bool,
    free_beta1: bool,
    with_rho: bool,
) -> VariableLayout:
    lay = VariableLayout()
    lay.add_symmetric("P", 2 * p.m)
    lay.add_symmetric("U", p.m)
    # The inequalities depend on Q1, Q2 only through sym(Q1), sym(Q2) and
    # the full difference Q1 - Q2, so a shared antisymmetric shift of both
    # is a flat direction.  Fixing Q2 symmetric removes the gauge without
    # shrinking the reachable set (Q1 keeps the difference's skew part).
    lay.add_general("Q1", p.m, p.m)
    lay.add_symmetric("Q2", p.m)
    for nm in ("M1", "M2", "M3"):
        lay.add_general(nm, p.m, p.m)
    if with_N:
        lay.add_general("N", p.m, p.m)
    lay.add_diagonal("Omega", p.n_h)
    lay.add_diagonal("L", p.n_h)
    if free_beta1:
        lay.add_scalar("beta1")
    if with_Xi2:
        lay.add_general("Xi2", p.m, p.n_y)
    if with_Xi1:
        lay.add_general("Xi1", p.m, p.n_y)
    if with_rho:
        lay.add_scalar("rho")
    return lay


def _completer(p: SynthesisParams, *, r: np.ndarray | None = None, K: np.ndarray | None = None):
    """Fill in eliminated variables: fixed beta1, N = r P11, Xi from K."""
    m = p.m
    B2K = p.B2s @ K if K is not None else None
    beta1 = p.beta1

    def complete(v: dict) -> dict:
        w = dict(v)
        if beta1 is not None:
            w["beta1"] = beta1
        if r is not None:
            w["N"] = r @ w["P"][:m, :m]
        if K is not None:
            w["Xi2"] = w["P"][:m, :m] @ B2K
            w["Xi1"] = w["N"] @ B2K
        elif r is not None:
            w["Xi1"] = r @ w["Xi2"]
        return w

    return complete


def _constraint_set(
    p: SynthesisParams,
    complete,
    *,
    variant: str,
    free_beta1: bool,
    with_rho: bool,
) -> list:
    sh = _scale_hint(p)
    cons = [
        ConstraintSpec("pos_P", lambda v: complete(v)["P"], "pos", sh),
        ConstraintSpec("pos_U", lambda v: v["U"], "pos", sh),
        ConstraintSpec("pos_L", lambda v: v["L"], "pos", sh),
        ConstraintSpec("pos_Omega", lambda v: v["Omega"], "pos", sh),
        ConstraintSpec(
            "xi_tilde",
            lambda v: blocks.assemble_xi_tilde(complete(v)["P"], v["Q1"], v["Q2"], p.h),
            "pos",
            sh,
        ),
        # No separate condition on the tau-ramp weight: the functional's
        # Q-part enters with weight (h - tau), affine in tau, so positivity
        # over [0, h] already follows from xi_tilde (tau = 0 endpoint) and
        # pos_P (tau = h endpoint).  Constraining the ramp weight itself
        # needlessly cuts off certificates whose ramp is indefinite.
    ]
    if free_beta1:
        cons.append(ConstraintSpec("pos_beta1", lambda v: [[v["beta1"]]], "pos", sh))
    if with_rho:
        cons.append(ConstraintSpec("pos_rho", lambda v: [[v["rho"]]], "pos", sh))
    which = (5, 6, 7, 8) if variant == "hinf" else (1, 2, 3, 4)
    for k in which:
        cons.append(
            ConstraintSpec(
                f"corner{k}",
                lambda v, k=k: blocks.solver_corner(k, p, complete(v), variant),
                "neg",
            )
        )
    return cons


def _binding(result) -> str:
    return min(result.slack, key=result.slack.get) if result.slack else "unknown"


# --------------------------------------------------------------------------
# hard consistency check: linearized form implies bilinear form


def _schur_consistency(p: SynthesisParams, cert: ControllerCertificate, mode: str) -> None:
    """Whenever the reduced inequality holds, the bilinear one must hold."""
    if p.eps <= 0:
        return  # the reduced forms are only defined for a positive threshold
    if mode == "hinf":
        pairs = [
            (blocks.assemble_hinf_lmi(k, p, cert), blocks.assemble_hinf(k, p, cert))
            for k in (5, 6, 7, 8)
        ]
    else:
        pairs = [
            (blocks.assemble_lmi_phi_tilde(k, p, cert), blocks.assemble_bmi_phi(k, p, cert))
            for k in (1, 2, 3, 4)
        ]
    for reduced, bilinear in pairs:
        if reduced.max_eig() < 0 and not bilinear.max_eig() < 0:
            raise HardAssertionError(
                f"reduced inequality {reduced.name} holds but bilinear {bilinear.name} fails"
            )


# --------------------------------------------------------------------------
# synthesis


def _certificate_from(p, v, r, K, slack, meta) -> ControllerCertificate:
    return ControllerCertificate(
        P=v["P"], U=v["U"], Q1=v["Q1"], Q2=v["Q2"],
        Omega=v["Omega"], L=v["L"], M1=v["M1"], M2=v["M2"], M3=v["M3"],
        N=v["N"], beta1=float(v["beta1"]), r=r, Xi1=v["Xi1"], Xi2=v["Xi2"], K=K,
        slack=dict(slack), meta=dict(meta),
    )


def _check_b2s(p: SynthesisParams) -> None:
    if p.B2s.shape[0] != p.B2s.shape[1]:
        raise ValueError("gain recovery needs a square input map B2s")
    if np.linalg.cond(p.B2s) >= 1e10:
        raise ValueError("B2s is too ill-conditioned for gain recovery")


def _algorithm_core(p: SynthesisParams, variant: str, margin: float, seed: int, log: list):
    """Free relaxation, gain extraction, direct certification of the gain."""
    free_b1 = p.beta1 is None
    m = p.m
    lay2 = _make_layout(p, with_N=True, with_Xi1=True, with_Xi2=True, free_beta1=free_b1, with_rho=False)
    comp2 = _completer(p)
    cons2 = _constraint_set(p, comp2, variant=variant, free_beta1=free_b1, with_rho=False)
    res2 = sdp_solve(cons2, lay2, margin=margin, log=log)
    if res2.status == "infeasible":
        raise InfeasibleError(
            f"{variant} inequalities infeasible (binding constraint: {_binding(res2)})",
            best_violation=res2.best_violation,
        )
    v2 = comp2(res2.variables)
    # The relaxation decouples the gain-bearing blocks; the state-row block
    # pins the implied gain once P11 is known.  Certifying that gain with
    # every remaining variable free is again affine.
    K = np.linalg.solve(p.B2s, np.linalg.solve(v2["P"][:m, :m], v2["Xi2"]))

    lay3 = _make_layout(p, with_N=True, with_Xi1=False, with_Xi2=False, free_beta1=free_b1, with_rho=False)
    comp3 = _completer(p, K=K)
    cons3 = _constraint_set(p, comp3, variant=variant, free_beta1=free_b1, with_rho=False)
    x0 = {name: v2[name] for name in lay3.names}
    # Rank-one correction of N so the warm start satisfies the pinned
    # substitution Xi1 = N B2s K exactly; the relaxation point fulfils the
    # Xi2 substitution by construction but not this one.
    B2K = p.B2s @ K
    denom = float(B2K.T @ B2K)
    if denom > 0.0:
        x0["N"] = v2["N"] + (v2["Xi1"] - v2["N"] @ B2K) @ B2K.T / denom
    res3 = sdp_solve(cons3, lay3, margin=margin, x0=x0, log=log)
    if res3.status == "infeasible":
        raise InfeasibleError(
            f"gain certification infeasible (binding constraint: {_binding(res3)})",
            best_violation=res3.best_violation,
        )
    v3 = comp3(res3.variables)
    r1 = v3["N"] @ np.linalg.inv(v3["P"][:m, :m])
    meta = {
        "seed": seed,
        "iterations": res2.iterations + res3.iterations,
        "margin": margin,
        "variant": variant,
    }
    return _certificate_from(p, v3, r1, K, res3.slack, meta)


def synthesize_gain(
    params: SynthesisParams,
    *,
    variant: str = "stability",
    margin: float = 1e-6,
    adjust: bool = True,
    seed: int = 0,
) -> ControllerCertificate:
    """Synthesize a switching output-feedback gain with a feasibility certificate.

    ``variant`` selects the corner family: "stability" (bounded disturbance)
    or "no-disturbance" (decay of the unforced loop).  When the given
    (beta1, Lam) pair is infeasible and ``adjust`` is set, a logged grid of
    scalings of those parameters is attempted; the parameters actually used
    are recorded in ``meta``.  Raises InfeasibleError (with the binding
    constraint) or CertificateRejectedError (verification failure).
    """
    if variant not in ("stability", "no-disturbance"):
        raise ValueError("variant must be 'stability' or 'no-disturbance'")
    p = params
    _check_b2s(p)
    scalings = [(1.0, 1.0)]
    if adjust:
        for ls in (1.0, 0.3, 3.0, 0.1, 10.0):
            for bs in (1.0, 0.1, 10.0) if p.beta1 is not None else (1.0,):
                if (ls, bs) != (1.0, 1.0):
                    scalings.append((ls, bs))
    log: list = []
    last_exc: InfeasibleError | None = None
    for ls, bs in scalings:
        pt = replace(
            p,
            Lam=ls * p.Lam,
            beta1=None if p.beta1 is None else bs * p.beta1,
        )
        log.append(f"attempt: Lam scale {ls}, beta1 scale {bs}")
        try:
            cert = _algorithm_core(pt, variant, margin, seed, log)
        except InfeasibleError as exc:
            log.append(f"  infeasible: {exc}")
            last_exc = exc
            continue
        except NumericalFailureError as exc:
            # a broken-down solve on one scaling should not end the search
            log.append(f"  numerical failure: {exc}")
            continue
        mode = "no-disturbance" if variant == "no-disturbance" else "stability"
        report = verify_certificate(cert, pt, mode, margin=min(margin, 1e-6))
        if not report.passed:
            raise CertificateRejectedError(
                "synthesized point fails direct verification:\n" + report.summary(),
                report=report,
            )
        _schur_consistency(pt, cert, mode)
        cert.slack = {e.name: e.value for e in report.entries}
        cert.meta["adjust_log"] = list(log)
        cert.meta["lambda_scale"] = ls
        cert.meta["beta1_scale"] = bs
        if (ls, bs) != (1.0, 1.0):
            cert.meta["params"] = pt
        return cert
    raise InfeasibleError(
        "synthesis infeasible for every attempted (beta1, Lam) scaling:\n" + "\n".join(log),
        best_violation=None if last_exc is None else last_exc.best_violation,
    )


def certify_gain(
    params: SynthesisParams,
    K: np.ndarray,
    *,
    variant: str = "stability",
    margin: float = 1e-6,
    seed: int = 0,
) -> ControllerCertificate:
    """Search a certificate for a given gain K (K itself stays fixed)."""
    if variant not in ("stability", "no-disturbance"):
        raise ValueError("variant must be 'stability' or 'no-disturbance'")
    p = params
    _check_b2s(p)
    K = np.atleast_2d(np.asarray(K, float))
    if K.shape != (p.n_u, p.n_y):
        raise ValueError(f"K must be ({p.n_u}, {p.n_y})")
    free_b1 = p.beta1 is None
    lay = _make_layout(p, with_N=True, with_Xi1=False, with_Xi2=False, free_beta1=free_b1, with_rho=False)
    comp = _completer(p, K=K)
    cons = _constraint_set(p, comp, variant=variant, free_beta1=free_b1, with_rho=False)
    log: list = []
    res = sdp_solve(cons, lay, margin=margin, log=log)
    if res.status == "infeasible":
        raise InfeasibleError(
            f"no certificate for the given gain (binding constraint: {_binding(res)})",
            best_violation=res.best_violation,
        )
    v = comp(res.variables)
    m = p.m
    r = v["N"] @ np.linalg.inv(v["P"][:m, :m])
    meta = {"seed": seed, "iterations": res.iterations, "margin": margin, "variant": variant, "fixed_gain": True}
    cert = _certificate_from(p, v, r, K, res.slack, meta)
    mode = "no-disturbance" if variant == "no-disturbance" else "stability"
    report = verify_certificate(cert, p, mode, margin=min(margin, 1e-6))
    if not report.passed:
        raise CertificateRejectedError(
            "certificate for the given gain fails verification:\n" + report.summary(),
            report=report,
        )
    _schur_consistency(p, cert, mode)
    cert.slack = {e.name: e.value for e in report.entries}
    return cert


# --------------------------------------------------------------------------
# ultimate bound


def ultimate_bound(
    cert: ControllerCertificate,
    params: SynthesisParams,
    D1: float | None = None,
) -> float:
    """Radius of the ball that the slow state ultimately enters.

    Computed from the certificate's decay rates (extreme eigenvalues of the
    tau = h corners) and the functional weights; scales linearly with the
    disturbance amplitude D1 (default: params.D1).
    """
    p = params
    report = verify_certificate(cert, p, "stability")
    if not report.passed:
        raise CertificateRejectedError(
            "ultimate bound requested for a certificate that fails verification:\n"
            + report.summary(),
            report=report,
        )
    if D1 is None:
        D1 = p.D1
    if D1 < 0:
        raise ValueError("D1 must be nonnegative")
    alpha1 = 0.5 * abs(blocks.assemble_bmi_phi(2, p, cert).max_eig())
    alpha4 = 0.5 * abs(blocks.assemble_bmi_phi(4, p, cert).max_eig())
    eig = np.linalg.eigvalsh
    # The P/Q part of the functional is affine in tau with endpoint weights
    # P (tau = h) and Xi-tilde (tau = 0), so its eigenvalue sandwich comes
    # from those two positive-definite endpoints; the ramp weight itself may
    # be indefinite without breaking positivity.
    xi = blocks.assemble_xi_tilde(cert.P, cert.Q1, cert.Q2, p.h)
    xi_sym = 0.5 * (xi.data + xi.data.T)
    alpha2 = max(eig(cert.P)[-1], eig(xi_sym)[-1], eig(cert.U)[-1])
    alpha5 = min(eig(cert.P)[0], eig(xi_sym)[0], eig(cert.U)[0])
    if alpha5 <= 0:
        raise CertificateRejectedError("functional weights are not uniformly positive")
    w = np.diag(cert.Omega)
    gmax = np.diag(params.G_max)
    gmin = np.diag(params.G_min)
    vnorm2 = np.sum(params.V_star ** 2, axis=1)
    alpha3_hi = float(np.sum(w * gmax * (gmax - gmin) * vnorm2))
    alpha4_bar = min(alpha1, alpha4)
    alpha5_bar = alpha4_bar / (alpha2 + alpha3_hi)
    alpha6_bar = alpha5_bar * alpha5
    return float(np.sqrt(2.0 / alpha6_bar) * D1)


# --------------------------------------------------------------------------
# attenuation optimization


def _hinf_step(p, *, K=None, r=None, margin, x0, log):
    """One alternation step: minimize rho with either K or the ratio fixed."""
    free_b1 = p.beta1 is None
    if K is not None:
        lay = _make_layout(p, with_N=True, with_Xi1=False, with_Xi2=False, free_beta1=free_b1, with_rho=True)
        comp = _completer(p, K=K)
    else:
        lay = _make_layout(p, with_N=False, with_Xi1=False, with_Xi2=True, free_beta1=free_b1, with_rho=True)
        comp = _completer(p, r=r)
    cons = _constraint_set(p, comp, variant="hinf", free_beta1=free_b1, with_rho=True)
    objective = lay.linear_functional({"rho": 1.0})
    start = {name: x0[name] for name in lay.names}
    res = sdp_solve(cons, lay, objective, margin=margin, x0=start, log=log)
    if res.status != "optimal":
        raise InfeasibleError(
            f"attenuation step infeasible (binding constraint: {_binding(res)})",
            best_violation=res.best_violation,
        )
    return comp(res.variables), res


def optimize_gamma(
    params: SynthesisParams,
    cert0: ControllerCertificate | None = None,
    *,
    omega_rho: float = 1e-3,
    max_outer: int = 20,
    margin: float = 1e-6,
    seed: int = 0,
) -> ControllerCertificate:
    """Minimize the disturbance-attenuation level by alternating solves.

    Alternates between fixing the gain (solving for the functional weights
    and the squared level rho) and fixing the coupling ratio (recovering a
    new gain).  Steps that fail direct verification or do not decrease rho
    are rejected; the sequence of accepted rho values is non-increasing and
    the loop stops when consecutive values differ by less than
    ``omega_rho``.  The result carries gamma = sqrt(rho_final) and the rho
    history in ``meta``.
    """
    p = params
    _check_b2s(p)
    if cert0 is None:
        cert0 = synthesize_gain(p, margin=margin, seed=seed)
    log: list = []
    m = p.m
    K = cert0.K
    bag = {
        "P": cert0.P, "U": cert0.U, "Q1": cert0.Q1, "Q2": cert0.Q2,
        "M1": cert0.M1, "M2": cert0.M2, "M3": cert0.M3, "N": cert0.N,
        "Omega": cert0.Omega, "L": cert0.L, "beta1": cert0.beta1,
        "Xi1": cert0.Xi1, "Xi2": cert0.Xi2, "rho": _RHO_INIT,
    }
    history: list[float] = []
    best: tuple | None = None  # (rho, vars bag, K, r)
    rejected = False
    converged = False
    exhausted = False

    def accept(rho_c: float) -> bool:
        """Record rho_c only if it does not increase (1e-12 jitter clipped)."""
        if history and rho_c > history[-1] + 1e-12:
            return False
        history.append(min(rho_c, history[-1]) if history else rho_c)
        return True

    verify_margin = min(margin, 1e-6) * 0.5
    for outer in range(max_outer):
        # Gain held fixed: the substitutions are exact, so the step is safe.
        try:
            vA, resA = _hinf_step(p, K=K, margin=margin, x0=bag, log=log)
        except InfeasibleError:
            if best is None:
                raise
            rejected = True
            break
        rhoA = float(vA["rho"])
        rA = vA["N"] @ np.linalg.inv(vA["P"][:m, :m])
        certA = _certificate_from(p, vA, rA, K, resA.slack, {})
        certA.gamma = float(np.sqrt(rhoA))
        if not verify_certificate(certA, p, "hinf", margin=verify_margin).passed or not accept(rhoA):
            rejected = True
            break
        best = (history[-1], vA, K, rA)
        bag = dict(vA)
        if len(history) >= 2 and abs(history[-2] - history[-1]) < omega_rho:
            converged = True
            break

        # Ratio held fixed: recover a new gain, accept only a verified decrease.
        try:
            vB, resB = _hinf_step(p, r=rA, margin=margin, x0=bag, log=log)
        except InfeasibleError:
            rejected = True
            break
        rhoB = float(vB["rho"])
        K_new = np.linalg.solve(p.B2s, np.linalg.solve(vB["P"][:m, :m], vB["Xi2"]))
        certB = _certificate_from(p, vB, rA, K_new, resB.slack, {})
        certB.gamma = float(np.sqrt(rhoB))
        if not verify_certificate(certB, p, "hinf", margin=verify_margin).passed or not accept(rhoB):
            rejected = True
            break
        best = (history[-1], vB, K_new, rA)
        bag = dict(vB)
        K = K_new
        if len(history) >= 2 and abs(history[-2] - history[-1]) < omega_rho:
            converged = True
            break
    else:
        exhausted = True
    if best is None:
        raise InfeasibleError("attenuation optimization found no verified point")
    if exhausted:
        warnings.warn("attenuation alternation used its full iteration budget; returning best verified level")

    rho, v, K, r = best
    if np.any(np.diff(np.asarray(history)) > 0.0):
        raise HardAssertionError("accepted attenuation levels are not non-increasing")
    meta = {
        "seed": seed,
        "margin": margin,
        "rho_history": list(history),
        "stalled": bool((rejected or exhausted) and not converged),
        "variant": "hinf",
    }
    cert = _certificate_from(p, v, r, K, {}, meta)
    cert.gamma = float(np.sqrt(rho))
    report = verify_certificate(cert, p, "hinf", margin=min(margin, 1e-6) * 0.5)
    if not report.passed:
        raise CertificateRejectedError(
            "optimized certificate fails verification:\n" + report.summary(), report=report
        )
    _schur_consistency(p, cert, "hinf")
    cert.slack = {e.name: e.value for e in report.entries}
    return cert
