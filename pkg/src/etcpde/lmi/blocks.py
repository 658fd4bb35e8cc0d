"""Block assembly for the switching closed-loop matrix inequalities.

Naming convention for block rows/columns (state of the augmented loop):

====== ======================================= ====
name   carries                                  dim
====== ======================================= ====
state  slow state xi_s(t)                       m
deriv  slow derivative d(xi_s)/dt               m
delay  delayed state xi_s(t - tau)              m
err    held-output error e(t)                   n_y
hidden hidden-layer activation mu               n_h
resid  identification residual channel          m
dist   exogenous disturbance d(t)               n_d
nu     averaged derivative over [t-tau, t]      m
====== ======================================= ====

Corner indices ``which``: 1 = hold phase at tau=0, 2 = hold phase at
tau=h, 3 = listening phase at tau=0, 4 = listening phase at tau=h.
Indices 5..8 repeat that pattern for the disturbance-attenuation
variant, which carries the ``dist`` block explicitly instead of the
squared disturbance terms.
"""
from __future__ import annotations

import numpy as np

from .types import BlockBuilder, BlockLayout, ControllerCertificate, SymBlockMatrix, SynthesisParams, sym

__all__ = [
    "v3_matrix",
    "assemble_xi_tilde",
    "assemble_bmi_phi",
    "assemble_corollary1",
    "assemble_hinf",
    "assemble_lmi_phi_tilde",
    "assemble_hinf_lmi",
    "solver_corner",
]


def v3_matrix(Q1: np.ndarray, Q2: np.ndarray) -> np.ndarray:
    """Weight of the ramped quadratic functional on (xi_s, xi_s(t-tau))."""
    Q1 = np.asarray(Q1, float)
    Q2 = np.asarray(Q2, float)
    top = np.hstack([0.5 * sym(Q1), -Q1 + Q2])
    bot = np.hstack([(-Q1 + Q2).T, 0.5 * sym(Q1 - 2.0 * Q2)])
    return np.vstack([top, bot])


def assemble_xi_tilde(P: np.ndarray, Q1: np.ndarray, Q2: np.ndarray, h: float) -> SymBlockMatrix:
    """Positivity matrix of the combined functional: h * v3 + P."""
    P = np.asarray(P, float)
    m = P.shape[0] // 2
    layout = BlockLayout(["state", "delay"], [m, m])
    return SymBlockMatrix(float(h) * v3_matrix(Q1, Q2) + P, layout, "xi_tilde")


def _unpack_which(which: int) -> tuple[bool, bool, bool]:
    """-> (hinf, hold_phase chi=1, tau_at_h)."""
    if which not in (1, 2, 3, 4, 5, 6, 7, 8):
        raise ValueError("corner index must be in 1..8")
    hinf = which >= 5
    base = which - 4 if hinf else which
    return hinf, base in (1, 2), base in (2, 4)


def _corner_layout(p: SynthesisParams, hinf: bool, tau_h: bool) -> BlockLayout:
    names = ["state", "deriv", "delay", "err", "hidden", "resid"]
    dims = [p.m, p.m, p.m, p.n_y, p.n_h, p.m]
    if hinf:
        names.append("dist")
        dims.append(p.n_d)
    if tau_h:
        names.append("nu")
        dims.append(p.m)
    return BlockLayout(names, dims)


def _corner_base(
    which: int,
    p: SynthesisParams,
    v: dict,
    *,
    use_gain: bool,
    name: str,
) -> BlockBuilder:
    """Common skeleton of every corner.

    ``use_gain`` selects the bilinear form (products with the gain K)
    versus the linearized form (Xi1 = N B2s K, Xi2 = P11 B2s K as free
    matrices).  The (1,1) block here carries only the terms shared by all
    variants; callers add the variant-specific (1,1) content.
    """
    hinf, hold, tau_h = _unpack_which(which)
    m = p.m
    h = p.h
    P = v["P"]
    P11, P21 = P[:m, :m], P[m:, :m]
    U, Q1, Q2 = v["U"], v["Q1"], v["Q2"]
    M1, M2, M3, N = v["M1"], v["M2"], v["M3"], v["N"]
    Omega, L = v["Omega"], v["L"]
    beta1 = float(v["beta1"])

    if use_gain:
        BK = p.B2s @ v["K"]
        g11 = sym(P11 @ p.A_s - (P11 @ BK) @ p.Cs)
        g12 = ((N @ BK) @ p.Cs).T
        g1n = h * ((P11 + N) @ BK) @ p.Cs
        g14 = -(P11 @ BK)
        g24 = -(N @ BK)
    else:
        Xi1, Xi2 = v["Xi1"], v["Xi2"]
        g11 = sym(P11 @ p.A_s - Xi2 @ p.Cs)
        g12 = (Xi1 @ p.Cs).T
        g1n = h * (Xi2 + Xi1) @ p.Cs
        g14 = -Xi2
        g24 = -Xi1

    b = BlockBuilder(_corner_layout(p, hinf, tau_h), name)
    b.put("state", "state", g11 - 0.5 * sym(Q1) + sym(M1))
    blk12 = (N @ p.A_s).T - g12 + M2.T
    if not tau_h:
        blk12 = blk12 + 0.5 * h * sym(Q1)
    b.put("state", "deriv", blk12)
    b.put("state", "delay", Q1 - Q2 - M1 + M3.T)
    if not hold:
        b.put("state", "err", g14)
        b.put("deriv", "err", g24)
    b.put("state", "hidden", P11 @ p.W_star + 0.5 * p.zeta3.T @ L)
    b.put("state", "resid", P11)
    blk22 = -sym(N)
    if not tau_h:
        blk22 = blk22 + h * U
    b.put("deriv", "deriv", blk22)
    blk23 = -M2 + P21.T
    if not tau_h:
        blk23 = blk23 + h * (-Q1 + Q2)
    b.put("deriv", "delay", blk23)
    b.put("deriv", "hidden", p.zeta4.T @ Omega.T + N @ p.W_star)
    b.put("deriv", "resid", N)
    b.put("delay", "delay", sym(Q2 - 0.5 * Q1) - sym(M3))
    b.put("err", "err", -p.Lam)
    b.put("hidden", "hidden", -L)
    b.put("resid", "resid", -beta1 * np.eye(m))
    if hinf:
        b.put("state", "dist", P11 @ p.B1s)
        b.put("deriv", "dist", N @ p.B1s)
        b.put("dist", "dist", -float(v["rho"]) * np.eye(p.n_d))
    if tau_h:
        b.put("state", "nu", (g1n if hold else np.zeros((m, m))) - h * M1)
        b.put("deriv", "nu", -h * M2)
        b.put("delay", "nu", -h * M3)
        b.put("nu", "nu", -h * np.exp(-2.0 * p.alpha * h) * U)
    return b


def _sector_pair(p: SynthesisParams, L: np.ndarray) -> np.ndarray:
    return p.zeta1.T @ L @ p.zeta2 + p.zeta2.T @ L @ p.zeta1


def _cert_bag(cert: ControllerCertificate) -> dict:
    return {
        "P": cert.P, "U": cert.U, "Q1": cert.Q1, "Q2": cert.Q2,
        "M1": cert.M1, "M2": cert.M2, "M3": cert.M3, "N": cert.N,
        "Omega": cert.Omega, "L": cert.L, "beta1": cert.beta1,
        "K": cert.K, "Xi1": cert.Xi1, "Xi2": cert.Xi2,
    }


def _add_state_state(b: BlockBuilder, extra: np.ndarray) -> BlockBuilder:
    s = b.layout.slice("state")
    b.data[s, s] += 0.5 * (extra + extra.T)
    return b


def assemble_bmi_phi(which: int, p: SynthesisParams, cert: ControllerCertificate) -> SymBlockMatrix:
    """Bilinear stability corner (which in 1..4) at the certificate point."""
    if which not in (1, 2, 3, 4):
        raise ValueError("stability corners are indexed 1..4")
    v = _cert_bag(cert)
    m = p.m
    b = _corner_base(which, p, v, use_gain=True, name=f"phi{which}")
    PB1 = cert.P11 @ p.B1s
    NB1 = cert.N @ p.B1s
    extra11 = (
        cert.beta1 * p.delta ** 2 * np.eye(m)
        - _sector_pair(p, cert.L)
        + p.eps * p.Cs.T @ p.Lam @ p.Cs
        + PB1 @ PB1.T
    )
    _add_state_state(b, extra11)
    sd = b.layout.slice("deriv")
    b.data[sd, sd] += NB1 @ NB1.T
    return b.build()


def assemble_corollary1(which: int, p: SynthesisParams, cert: ControllerCertificate) -> SymBlockMatrix:
    """Disturbance-free stability corner: drops one squared disturbance term.

    Corners at tau=0 (odd ``which``) drop the P11 B1s square from the
    state block; corners at tau=h (even ``which``) drop the N B1s square
    from the derivative block.
    """
    if which not in (1, 2, 3, 4):
        raise ValueError("disturbance-free corners are indexed 1..4")
    full = assemble_bmi_phi(which, p, cert)
    data = full.data.copy()
    if which % 2 == 1:
        s = full.layout.slice("state")
        PB1 = cert.P11 @ p.B1s
        data[s, s] -= PB1 @ PB1.T
    else:
        s = full.layout.slice("deriv")
        NB1 = cert.N @ p.B1s
        data[s, s] -= NB1 @ NB1.T
    return SymBlockMatrix(data, full.layout, f"phi_hat{which}")


def assemble_hinf(
    which: int, p: SynthesisParams, cert: ControllerCertificate, gamma: float | None = None
) -> SymBlockMatrix:
    """Bilinear disturbance-attenuation corner (which in 5..8)."""
    if which not in (5, 6, 7, 8):
        raise ValueError("attenuation corners are indexed 5..8")
    if gamma is None:
        gamma = cert.gamma
    if gamma is None or gamma <= 0:
        raise ValueError("a positive attenuation level gamma is required")
    v = _cert_bag(cert)
    v["rho"] = float(gamma) ** 2
    b = _corner_base(which, p, v, use_gain=True, name=f"phi{which}")
    extra11 = (
        cert.beta1 * p.delta ** 2 * np.eye(p.m)
        - _sector_pair(p, cert.L)
        + p.Cs.T @ (p.eps * p.Lam + np.eye(p.n_y)) @ p.Cs
    )
    _add_state_state(b, extra11)
    return b.build()


def _tail_layout(base: BlockLayout, names: list[str], dims: list[int]) -> BlockLayout:
    return BlockLayout(list(base.names) + names, list(base.dims) + dims)


def _with_tail(
    corner: BlockBuilder,
    columns: list[tuple[str, str, np.ndarray, np.ndarray]],
) -> SymBlockMatrix:
    """Append Schur columns: (tail name, anchor row, column block, diagonal)."""
    names = [c[0] for c in columns]
    dims = [c[3].shape[0] for c in columns]
    layout = _tail_layout(corner.layout, names, dims)
    out = BlockBuilder(layout, corner.name)
    n0 = corner.layout.dimension
    out.data[:n0, :n0] = corner.data
    for tail_name, row, col, diag in columns:
        out.put(row, tail_name, col)
        out.put(tail_name, tail_name, diag)
    return out.build()


def assemble_lmi_phi_tilde(
    which: int,
    p: SynthesisParams,
    cert: ControllerCertificate,
    beta1_bar: np.ndarray | float | None = None,
    beta2_bar: np.ndarray | None = None,
    lam1: np.ndarray | None = None,
) -> SymBlockMatrix:
    """Linearized stability inequality (which in 1..4) in reduced form.

    The corner uses the substitutions Xi1 = N B2s K and Xi2 = P11 B2s K;
    residual, sector, trigger and disturbance terms ride on appended
    columns against -beta1_bar, -beta2_bar, -beta2 L^-1, -lam1 and -I.
    Defaults: beta1_bar = I/beta1, beta2_bar = L^-1/beta2,
    lam1 = (eps Lam)^-1.
    """
    if which not in (1, 2, 3, 4):
        raise ValueError("stability corners are indexed 1..4")
    m, n_h, n_y, n_d = p.m, p.n_h, p.n_y, p.n_d
    L = cert.L
    if beta1_bar is None:
        beta1_bar = np.eye(m) / cert.beta1
    elif np.isscalar(beta1_bar):
        beta1_bar = float(beta1_bar) * np.eye(m)
    if beta2_bar is None:
        beta2_bar = np.linalg.inv(L) / p.beta2
    if lam1 is None:
        if p.eps <= 0:
            raise ValueError("reduced form needs a positive trigger threshold")
        lam1 = np.linalg.inv(p.eps * p.Lam)
    v = _cert_bag(cert)
    b = _corner_base(which, p, v, use_gain=False, name=f"phi_tilde{which}")
    columns = [
        ("b_resid", "state", p.delta * np.eye(m), -np.asarray(beta1_bar, float)),
        ("b_sec_lo", "state", p.zeta1.T, -np.asarray(beta2_bar, float)),
        ("b_sec_hi", "state", p.zeta2.T, -p.beta2 * np.linalg.inv(L)),
        ("b_trig", "state", p.Cs.T, -np.asarray(lam1, float)),
        ("b_dist_p", "state", cert.P11 @ p.B1s, -np.eye(n_d)),
        ("b_dist_n", "deriv", cert.N @ p.B1s, -np.eye(n_d)),
    ]
    return _with_tail(b, columns)


def assemble_hinf_lmi(
    which: int,
    p: SynthesisParams,
    cert: ControllerCertificate,
    rho: float | None = None,
    beta1_bar: np.ndarray | float | None = None,
    beta2_bar: np.ndarray | None = None,
    lam1: np.ndarray | None = None,
) -> SymBlockMatrix:
    """Linearized disturbance-attenuation inequality (which in 5..8)."""
    if which not in (5, 6, 7, 8):
        raise ValueError("attenuation corners are indexed 5..8")
    if rho is None:
        if cert.gamma is None:
            raise ValueError("an attenuation level is required")
        rho = float(cert.gamma) ** 2
    m = p.m
    L = cert.L
    if beta1_bar is None:
        beta1_bar = np.eye(m) / cert.beta1
    elif np.isscalar(beta1_bar):
        beta1_bar = float(beta1_bar) * np.eye(m)
    if beta2_bar is None:
        beta2_bar = np.linalg.inv(L) / p.beta2
    if lam1 is None:
        if p.eps <= 0:
            raise ValueError("reduced form needs a positive trigger threshold")
        lam1 = np.linalg.inv(p.eps * p.Lam)
    v = _cert_bag(cert)
    v["rho"] = float(rho)
    b = _corner_base(which, p, v, use_gain=False, name=f"phi_tilde{which}")
    columns = [
        ("b_resid", "state", p.delta * np.eye(m), -np.asarray(beta1_bar, float)),
        ("b_sec_lo", "state", p.zeta1.T, -np.asarray(beta2_bar, float)),
        ("b_sec_hi", "state", p.zeta2.T, -p.beta2 * np.linalg.inv(L)),
        ("b_trig", "state", p.Cs.T, -np.asarray(lam1, float)),
        ("b_out", "state", p.Cs.T, -np.eye(p.n_y)),
    ]
    return _with_tail(b, columns)


def solver_corner(
    which: int,
    p: SynthesisParams,
    v: dict,
    variant: str = "stability",
) -> SymBlockMatrix:
    """Fully affine corner used by the interior-point solver.

    Residual, sector, and trigger columns of the reduced form are folded
    into the state block in closed form; the sector contribution keeps the
    exact cross term (affine in L), which is strictly tighter than the
    weighted-square bound the appended-column form uses.  Only the
    disturbance columns stay appended (they are the only ones affine in
    the decision variables), so negativity here matches the bilinear
    corner exactly by a Schur complement.
    ``variant``: "stability", "no-disturbance", or "hinf" (v carries rho).
    """
    if variant not in ("stability", "no-disturbance", "hinf"):
        raise ValueError("unknown corner variant")
    hinf = variant == "hinf"
    if hinf and which not in (5, 6, 7, 8):
        raise ValueError("attenuation corners are indexed 5..8")
    if not hinf and which not in (1, 2, 3, 4):
        raise ValueError("stability corners are indexed 1..4")
    m = p.m
    L = v["L"]
    beta1 = float(v["beta1"])
    b = _corner_base(which, p, v, use_gain=False, name=f"folded{which}")
    trigger = (
        p.Cs.T @ (p.eps * p.Lam + np.eye(p.n_y)) @ p.Cs
        if hinf
        else p.eps * p.Cs.T @ p.Lam @ p.Cs
    )
    _add_state_state(b, beta1 * p.delta ** 2 * np.eye(m) - _sector_pair(p, L) + trigger)
    if hinf:
        return b.build()
    P11 = v["P"][:m, :m]
    columns = []
    if not (variant == "no-disturbance" and which % 2 == 1):
        columns.append(("b_dist_p", "state", P11 @ p.B1s, -np.eye(p.n_d)))
    if not (variant == "no-disturbance" and which % 2 == 0):
        columns.append(("b_dist_n", "deriv", v["N"] @ p.B1s, -np.eye(p.n_d)))
    return _with_tail(b, columns)
