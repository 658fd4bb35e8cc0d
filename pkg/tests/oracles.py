"""Independent oracles used by the test suite.

Everything here is deliberately implemented from first principles, separate
from the package code paths it checks: adaptive quadrature for projections,
closed-form modal integrals, root-finding eigenvalue references, and (in
the matrix-inequality tests) a second, literal transcription of every block
formula.
"""
from __future__ import annotations

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq


def adaptive_inner(f, g, domain, weight=None):
    """Plain (or weighted) L2 inner product by adaptive quadrature to ~1e-12."""
    if weight is None:
        integrand = lambda p: f(p) * g(p)
    else:
        integrand = lambda p: weight(p) * f(p) * g(p)
    val, err = quad(integrand, domain[0], domain[1], epsabs=1e-12, epsrel=1e-12, limit=400)
    assert err < 1e-9
    return val


def sine_mode(j, domain):
    """Unit-L2 Dirichlet sine mode, 1-based index."""
    a, b = domain
    L = b - a
    amp = np.sqrt(2.0 / L)
    return lambda p: amp * np.sin(j * np.pi * (p - a) / L)


def robin_right_eigenvalues(n, length=np.pi, h1=1.0, h2=1.0):
    """Eigenvalues of u'' with u(0)=0 and h1*u(L)+h2*u'(L)=0.

    Modes sin(k p) need h1*sin(kL) + h2*k*cos(kL) = 0; roots found by
    bisection between consecutive poles of tan(kL).
    """
    roots = []
    g = lambda k: h1 * np.sin(k * length) + h2 * k * np.cos(k * length)
    k_lo = 1e-9
    step = np.pi / length / 400.0
    k = k_lo
    while len(roots) < n:
        k_next = k + step
        if g(k) == 0.0:
            roots.append(k)
        elif g(k) * g(k_next) < 0:
            roots.append(brentq(g, k, k_next, xtol=1e-13))
        k = k_next
        if k > 100 * n:
            raise RuntimeError("root search ran away")
    return -np.array(roots[:n]) ** 2


# closed-form modal integrals on [0, pi] (unit-norm sine basis), used by the
# quadratic-coupling oracles; each value verified by adaptive quadrature in
# the tests that consume it
INT_SIN3 = 4.0 / 3.0          # int_0^pi sin^3 p dp
INT_SIN1_SIN2SQ = 16.0 / 15.0  # int_0^pi sin p sin^2 2p dp
INT_COS1_SIN2 = 4.0 / 3.0     # int_0^pi cos p sin 2p dp


def rod_slow_nonlinearity(xi, linear=1.65, quadratic=1.5):
    """Closed-form slow projection of f(s)=linear*s+quadratic*s^2 on [0, pi], m=2.

    f_s1 = linear*xi1 + quadratic*(2/pi)^{3/2} ((4/3) xi1^2 + (16/15) xi2^2)
    f_s2 = linear*xi2 + quadratic*(2/pi)^{3/2} (32/15) xi1 xi2
    """
    c = (2.0 / np.pi) ** 1.5
    xi1, xi2 = xi
    return np.array(
        [
            linear * xi1 + quadratic * c * (INT_SIN3 * xi1**2 + INT_SIN1_SIN2SQ * xi2**2),
            linear * xi2 + quadratic * c * (2.0 * INT_SIN1_SIN2SQ * xi1 * xi2),
        ]
    )


# --------------------------------------------------------------------------
# literal transcription of the switching-loop inequality blocks
#
# These mirror the printed block formulas line by line with plain np.block
# composition, independently of the package's builder, as a second
# implementation for cross-checking.  Inputs are plain dicts:
#   par: A, B2, B1, C, W, Vt, delta, Gmin, Gmax, h, eps, Lam, alpha, beta2
#   var: P11, P12, P21, P22, U, Q1, Q2, M1, M2, M3, N, Omega, L, beta1, K


def _sp(X):
    return X + X.T


def _eta(par, var):
    """All printed sub-blocks, as a name -> matrix dict."""
    A, B2, B1, C, W = par["A"], par["B2"], par["B1"], par["C"], par["W"]
    Vt, Lam, h = par["Vt"], par["Lam"], par["h"]
    P11, P21 = var["P11"], var["P21"]
    U, Q1, Q2 = var["U"], var["Q1"], var["Q2"]
    M1, M2, M3, N = var["M1"], var["M2"], var["M3"], var["N"]
    Om, L, b1 = var["Omega"], var["L"], var["beta1"]
    K = var["K"]
    m = A.shape[0]
    I = np.eye(m)
    z1 = par["Gmin"] @ Vt
    z2 = par["Gmax"] @ Vt
    z3 = z1 + z2
    z4 = z2 - z1
    BK = B2 @ K
    PB1 = P11 @ B1
    NB1 = N @ B1
    e = {}
    e["eta1"] = (
        _sp(P11 @ A - P11 @ BK @ C)
        - 0.5 * _sp(Q1)
        + b1 * par["delta"] ** 2 * I
        - (z1.T @ L @ z2 + z2.T @ L @ z1)
        + _sp(M1)
        + par["eps"] * C.T @ Lam @ C
    )
    e["eta1_11"] = e["eta1"] + PB1 @ PB1.T
    e["eta1_12"] = 0.5 * h * _sp(Q1) + (N @ A).T - (N @ BK @ C).T + M2.T
    e["eta1_13"] = Q1 - Q2 - M1 + M3.T
    e["eta1_15"] = P11 @ W + 0.5 * z3.T @ L
    e["eta1_22"] = h * U - _sp(N) + NB1 @ NB1.T
    e["eta1_23"] = h * (-Q1 + Q2) - M2 + P21.T
    e["eta1_25"] = z4.T @ Om.T + N @ W
    e["eta1_33"] = _sp(Q2 - 0.5 * Q1) - _sp(M3)
    e["eta2_12"] = (N @ A).T - (N @ BK @ C).T + M2.T
    e["eta2_17"] = h * (P11 + N) @ BK @ C - h * M1
    e["eta2_22"] = -_sp(N) + NB1 @ NB1.T
    e["eta2_23"] = -M2 + P21.T
    e["eta2_27"] = -h * M2
    e["eta2_37"] = -h * M3
    e["eta2_77"] = -h * np.exp(-2.0 * par["alpha"] * h) * U
    e["eta3_14"] = -P11 @ BK
    e["eta3_24"] = -N @ BK
    e["eta4_17"] = -h * M1
    return e


def oracle_stability_corner(par, var, which):
    """Bilinear switching corners 1..4, printed row by printed row."""
    A, C, W = par["A"], par["C"], par["W"]
    m, ny, nh = A.shape[0], C.shape[0], W.shape[1]
    P11, N, L = var["P11"], var["N"], var["L"]
    b1 = var["beta1"]
    e = _eta(par, var)
    Zmy = np.zeros((m, ny))
    Zmh = np.zeros((m, nh))
    Zmm = np.zeros((m, m))
    Zyh = np.zeros((ny, nh))
    Zym = np.zeros((ny, m))
    Zhm = np.zeros((nh, m))
    nbI = -b1 * np.eye(m)
    if which == 1:
        return np.block([
            [e["eta1_11"], e["eta1_12"], e["eta1_13"], Zmy, e["eta1_15"], P11],
            [e["eta1_12"].T, e["eta1_22"], e["eta1_23"], Zmy, e["eta1_25"], N],
            [e["eta1_13"].T, e["eta1_23"].T, e["eta1_33"], Zmy, Zmh, Zmm],
            [Zmy.T, Zmy.T, Zmy.T, -par["Lam"], Zyh, Zym],
            [e["eta1_15"].T, e["eta1_25"].T, Zmh.T, Zyh.T, -L, Zhm],
            [P11.T, N.T, Zmm.T, Zym.T, Zhm.T, nbI],
        ])
    if which == 2:
        return np.block([
            [e["eta1_11"], e["eta2_12"], e["eta1_13"], Zmy, e["eta1_15"], P11, e["eta2_17"]],
            [e["eta2_12"].T, e["eta2_22"], e["eta2_23"], Zmy, e["eta1_25"], N, e["eta2_27"]],
            [e["eta1_13"].T, e["eta2_23"].T, e["eta1_33"], Zmy, Zmh, Zmm, e["eta2_37"]],
            [Zmy.T, Zmy.T, Zmy.T, -par["Lam"], Zyh, Zym, Zym],
            [e["eta1_15"].T, e["eta1_25"].T, Zmh.T, Zyh.T, -L, Zhm, Zhm],
            [P11.T, N.T, Zmm.T, Zym.T, Zhm.T, nbI, Zmm],
            [e["eta2_17"].T, e["eta2_27"].T, e["eta2_37"].T, Zmy, Zmh, Zmm.T, e["eta2_77"]],
        ])
    if which == 3:
        return np.block([
            [e["eta1_11"], e["eta1_12"], e["eta1_13"], e["eta3_14"], e["eta1_15"], P11],
            [e["eta1_12"].T, e["eta1_22"], e["eta1_23"], e["eta3_24"], e["eta1_25"], N],
            [e["eta1_13"].T, e["eta1_23"].T, e["eta1_33"], Zmy, Zmh, Zmm],
            [e["eta3_14"].T, e["eta3_24"].T, Zmy.T, -par["Lam"], Zyh, Zym],
            [e["eta1_15"].T, e["eta1_25"].T, Zmh.T, Zyh.T, -L, Zhm],
            [P11.T, N.T, Zmm.T, Zym.T, Zhm.T, nbI],
        ])
    if which == 4:
        return np.block([
            [e["eta1_11"], e["eta2_12"], e["eta1_13"], e["eta3_14"], e["eta1_15"], P11, e["eta4_17"]],
            [e["eta2_12"].T, e["eta2_22"], e["eta2_23"], e["eta3_24"], e["eta1_25"], N, e["eta2_27"]],
            [e["eta1_13"].T, e["eta2_23"].T, e["eta1_33"], Zmy, Zmh, Zmm, e["eta2_37"]],
            [e["eta3_14"].T, e["eta3_24"].T, Zmy.T, -par["Lam"], Zyh, Zym, Zym],
            [e["eta1_15"].T, e["eta1_25"].T, Zmh.T, Zyh.T, -L, Zhm, Zhm],
            [P11.T, N.T, Zmm.T, Zym.T, Zhm.T, nbI, Zmm],
            [e["eta4_17"].T, e["eta2_27"].T, e["eta2_37"].T, Zmy, Zmh, Zmm.T, e["eta2_77"]],
        ])
    raise ValueError(which)


def oracle_hinf_corner(par, var, which, gamma):
    """Attenuation corners 5..8: explicit disturbance channel, no squares."""
    A, C, W, B1 = par["A"], par["C"], par["W"], par["B1"]
    m, ny, nh, nd = A.shape[0], C.shape[0], W.shape[1], B1.shape[1]
    P11, N, L = var["P11"], var["N"], var["L"]
    e = _eta(par, var)
    eta5_11 = (
        e["eta1_11"]
        - (P11 @ B1) @ (P11 @ B1).T
        - par["eps"] * C.T @ par["Lam"] @ C
        + C.T @ (par["eps"] * par["Lam"] + np.eye(ny)) @ C
    )
    eta5_22 = e["eta1_22"] - (N @ B1) @ (N @ B1).T
    eta6_22 = e["eta2_22"] - (N @ B1) @ (N @ B1).T
    rhoI = -gamma**2 * np.eye(nd)
    PB1 = P11 @ B1
    NB1 = N @ B1
    Zmy = np.zeros((m, ny)); Zmh = np.zeros((m, nh)); Zmm = np.zeros((m, m))
    Zmd = np.zeros((m, nd)); Zyh = np.zeros((ny, nh)); Zym = np.zeros((ny, m))
    Zyd = np.zeros((ny, nd)); Zhm = np.zeros((nh, m)); Zhd = np.zeros((nh, nd))
    Zdm = np.zeros((nd, m))
    nbI = -var["beta1"] * np.eye(m)
    if which == 5:
        return np.block([
            [eta5_11, e["eta1_12"], e["eta1_13"], Zmy, e["eta1_15"], P11, PB1],
            [e["eta1_12"].T, eta5_22, e["eta1_23"], Zmy, e["eta1_25"], N, NB1],
            [e["eta1_13"].T, e["eta1_23"].T, e["eta1_33"], Zmy, Zmh, Zmm, Zmd],
            [Zmy.T, Zmy.T, Zmy.T, -par["Lam"], Zyh, Zym, Zyd],
            [e["eta1_15"].T, e["eta1_25"].T, Zmh.T, Zyh.T, -L, Zhm, Zhd],
            [P11.T, N.T, Zmm.T, Zym.T, Zhm.T, nbI, Zmd],
            [PB1.T, NB1.T, Zmd.T, Zyd.T, Zhd.T, Zmd.T, rhoI],
        ])
    if which == 6:
        return np.block([
            [eta5_11, e["eta2_12"], e["eta1_13"], Zmy, e["eta1_15"], P11, PB1, e["eta2_17"]],
            [e["eta2_12"].T, eta6_22, e["eta2_23"], Zmy, e["eta1_25"], N, NB1, e["eta2_27"]],
            [e["eta1_13"].T, e["eta2_23"].T, e["eta1_33"], Zmy, Zmh, Zmm, Zmd, e["eta2_37"]],
            [Zmy.T, Zmy.T, Zmy.T, -par["Lam"], Zyh, Zym, Zyd, Zym],
            [e["eta1_15"].T, e["eta1_25"].T, Zmh.T, Zyh.T, -L, Zhm, Zhd, Zhm],
            [P11.T, N.T, Zmm.T, Zym.T, Zhm.T, nbI, Zmd, Zmm],
            [PB1.T, NB1.T, Zmd.T, Zyd.T, Zhd.T, Zmd.T, rhoI, Zdm],
            [e["eta2_17"].T, e["eta2_27"].T, e["eta2_37"].T, Zmy, Zmh, Zmm.T, Zdm.T, e["eta2_77"]],
        ])
    if which == 7:
        return np.block([
            [eta5_11, e["eta1_12"], e["eta1_13"], e["eta3_14"], e["eta1_15"], P11, PB1],
            [e["eta1_12"].T, eta5_22, e["eta1_23"], e["eta3_24"], e["eta1_25"], N, NB1],
            [e["eta1_13"].T, e["eta1_23"].T, e["eta1_33"], Zmy, Zmh, Zmm, Zmd],
            [e["eta3_14"].T, e["eta3_24"].T, Zmy.T, -par["Lam"], Zyh, Zym, Zyd],
            [e["eta1_15"].T, e["eta1_25"].T, Zmh.T, Zyh.T, -L, Zhm, Zhd],
            [P11.T, N.T, Zmm.T, Zym.T, Zhm.T, nbI, Zmd],
            [PB1.T, NB1.T, Zmd.T, Zyd.T, Zhd.T, Zmd.T, rhoI],
        ])
    if which == 8:
        return np.block([
            [eta5_11, e["eta2_12"], e["eta1_13"], e["eta3_14"], e["eta1_15"], P11, PB1, e["eta4_17"]],
            [e["eta2_12"].T, eta6_22, e["eta2_23"], e["eta3_24"], e["eta1_25"], N, NB1, e["eta2_27"]],
            [e["eta1_13"].T, e["eta2_23"].T, e["eta1_33"], Zmy, Zmh, Zmm, Zmd, e["eta2_37"]],
            [e["eta3_14"].T, e["eta3_24"].T, Zmy.T, -par["Lam"], Zyh, Zym, Zyd, Zym],
            [e["eta1_15"].T, e["eta1_25"].T, Zmh.T, Zyh.T, -L, Zhm, Zhd, Zhm],
            [P11.T, N.T, Zmm.T, Zym.T, Zhm.T, nbI, Zmd, Zmm],
            [PB1.T, NB1.T, Zmd.T, Zyd.T, Zhd.T, Zmd.T, rhoI, Zdm],
            [e["eta4_17"].T, e["eta2_27"].T, e["eta2_37"].T, Zmy, Zmh, Zmm.T, Zdm.T, e["eta2_77"]],
        ])
    raise ValueError(which)


def oracle_xi_tilde(var, h):
    """Positivity matrix of the combined functional."""
    Q1, Q2 = var["Q1"], var["Q2"]
    return np.block([
        [0.5 * h * _sp(Q1) + var["P11"], h * (-Q1 + Q2) + var["P12"]],
        [h * (-Q1.T + Q2.T) + var["P21"], 0.5 * h * _sp(Q1 - 2.0 * Q2) + var["P22"]],
    ])


def _oracle_reduced_core(par, var, which, Xi1, Xi2, hinf, rho):
    """Corner of the reduced (linearized) inequality: gain products replaced.

    Built by evaluating the printed corner at gain zero and then patching
    in the Xi forms wherever the gain appeared, plus stripping the terms
    that move onto the appended elimination columns.
    """
    sub = dict(var)
    sub["K"] = np.zeros_like(var["K"])
    A, C = par["A"], par["C"]
    m, ny = A.shape[0], C.shape[0]
    h = par["h"]
    if hinf:
        M = oracle_hinf_corner(par, sub, which, np.sqrt(rho))
    else:
        M = oracle_stability_corner(par, sub, which)
        # the squared-disturbance terms move to appended columns
        PB1 = var["P11"] @ par["B1"]
        NB1 = var["N"] @ par["B1"]
        M[:m, :m] -= PB1 @ PB1.T
        M[m : 2 * m, m : 2 * m] -= NB1 @ NB1.T
    # the residual/sector/trigger terms also move to appended columns
    z1 = par["Gmin"] @ par["Vt"]
    z2 = par["Gmax"] @ par["Vt"]
    L = var["L"]
    M[:m, :m] -= var["beta1"] * par["delta"] ** 2 * np.eye(m)
    M[:m, :m] += z1.T @ L @ z2 + z2.T @ L @ z1
    if hinf:
        M[:m, :m] -= C.T @ (par["eps"] * par["Lam"] + np.eye(ny)) @ C
    else:
        M[:m, :m] -= par["eps"] * C.T @ par["Lam"] @ C
    # patch the gain-bearing blocks with their Xi forms
    M[:m, :m] += _sp(-Xi2 @ C)
    M[:m, m : 2 * m] += -(Xi1 @ C).T
    M[m : 2 * m, :m] += -(Xi1 @ C)
    base = which - 4 if hinf else which
    if base == 2:  # hold phase at tau=h: the averaged-derivative coupling
        lo = M.shape[0] - m
        M[:m, lo:] += h * (Xi2 + Xi1) @ C
        M[lo:, :m] += (h * (Xi2 + Xi1) @ C).T
    if base in (3, 4):  # listening phase: the held-error column
        c0 = 3 * m
        M[:m, c0 : c0 + ny] += -Xi2
        M[c0 : c0 + ny, :m] += (-Xi2).T
        M[m : 2 * m, c0 : c0 + ny] += -Xi1
        M[c0 : c0 + ny, m : 2 * m] += (-Xi1).T
    return M


def oracle_reduced_inequality(par, var, which, Xi1, Xi2, rho=None):
    """Printed reduced inequality with its appended elimination columns."""
    hinf = which >= 5
    C = par["C"]
    m, ny, nd = par["A"].shape[0], C.shape[0], par["B1"].shape[1]
    nh = par["W"].shape[1]
    core = _oracle_reduced_core(par, var, which, Xi1, Xi2, hinf, rho)
    n0 = core.shape[0]
    L = var["L"]
    Linv = np.linalg.inv(L)
    z1 = par["Gmin"] @ par["Vt"]
    z2 = par["Gmax"] @ par["Vt"]
    cols = []
    diags = []
    cols.append((0, par["delta"] * np.eye(m)))
    diags.append(-np.eye(m) / var["beta1"])
    cols.append((0, z1.T))
    diags.append(-Linv / par["beta2"])
    cols.append((0, z2.T))
    diags.append(-par["beta2"] * Linv)
    cols.append((0, C.T))
    diags.append(-np.linalg.inv(par["eps"] * par["Lam"]))
    if hinf:
        cols.append((0, C.T))
        diags.append(-np.eye(ny))
    else:
        cols.append((0, var["P11"] @ par["B1"]))
        diags.append(-np.eye(nd))
        cols.append((m, var["N"] @ par["B1"]))
        diags.append(-np.eye(nd))
    width = sum(d.shape[0] for d in diags)
    T = np.zeros((n0, width))
    off = 0
    for (row0, blockcol), d in zip(cols, diags):
        w = d.shape[0]
        T[row0 : row0 + blockcol.shape[0], off : off + w] = blockcol
        off += w
    D = np.zeros((width, width))
    off = 0
    for d in diags:
        w = d.shape[0]
        D[off : off + w, off : off + w] = d
        off += w
    return np.block([[core, T], [T.T, D]])
