"""Independent oracle values, written to frozen.json next to this file.

Nothing here imports slowlayer.  Everything is recomputed from the defining
formulas with mpmath at 40 digits (or brute force numpy where noted), so the
package is checked against a separate code path.

    python3 tests/oracles/generate.py
"""
import json
from pathlib import Path

import mpmath as mp
import numpy as np

mp.mp.dps = 40
OUT = Path(__file__).with_name("frozen.json")


# --- power law gas, alpha = beta = kappa_p = c_nu = 1 --------------------------
def F(u, v=1):
    return v * v / u + u * u / 2


def dFdu(u, v=1):
    return -v * v / u ** 2 + u


def dGdu(u, v=1):
    return v / u  # v nu(u)/u^2 with nu = u


def constitutive():
    o = {}
    o["F_05_1"] = float(F(mp.mpf("0.5")))
    o["dFdu_05_1"] = float(mp.diff(lambda u: F(u), mp.mpf("0.5")))
    o["dGdu_05_1"] = float(mp.diff(lambda u: mp.quad(lambda s: 1 / s, [1, u]), mp.mpf("0.5")))
    # P'(u) u^2 = v^2 with P' = kappa u^alpha, by bisection
    o["u_sonic_v8"] = float(mp.findroot(lambda u: u * u ** 2 - 64, (1, 10), solver="bisect"))
    o["u_sonic_a2_k3"] = float(mp.findroot(lambda u: 3 * u ** 2 * u ** 2 - 1, (0.1, 2),
                                           solver="bisect"))
    # conjugate states of K = 2.125 on each branch of 1/u + u^2/2
    K = mp.mpf("2.125")
    um = mp.findroot(lambda u: F(u) - K, (mp.mpf("0.2"), 1), solver="bisect")
    up = mp.findroot(lambda u: F(u) - K, (1, 3), solver="bisect")
    o["conj_u_minus"], o["conj_u_plus"] = float(um), float(up)
    # Lambda = v^2/u^2 + 2 Pi'(u), Pi'' = P'/u = 1 -> Pi' = u
    lam = lambda u: 1 / u ** 2 + 2 * u
    o["Lambda_minus"], o["Lambda_plus"] = float(lam(um)), float(lam(up))
    o["entropy_gap"] = float(lam(um) - lam(up))
    return o, float(um), float(up)


# --- Burgers -----------------------------------------------------------------
def burgers_log_h(L, eps, wbar=1):
    """log(kappa - wbar^2/2) solving sqrt(2k) tanh(L sqrt(k/2)/eps) = wbar."""
    L, eps = mp.mpf(L), mp.mpf(eps)
    g = lambda t: mp.sqrt(2 * (wbar ** 2 / 2 + mp.e ** t)) * mp.tanh(
        L / eps * mp.sqrt((wbar ** 2 / 2 + mp.e ** t) / 2)) - wbar
    t0 = mp.log(2 * wbar ** 2) - wbar * L / eps
    return mp.findroot(g, t0)


def burgers():
    o = {}
    o["gamma_05_05"] = float(mp.quad(lambda s: 1 / (mp.mpf("0.5") - s * s / 2), [0, 0.5]))
    ks = []
    xs = np.linspace(-0.9, 0.9, 50)
    for eps in (0.1, 0.05):
        for x in xs:
            lm = burgers_log_h(1 + x, eps)
            lp = burgers_log_h(1 - x, eps)
            ks.append([eps, float(x), float(lm), float(lp)])
    o["kappa_table"] = ks
    h0 = mp.e ** burgers_log_h(1, 0.1)
    o["kappa_xi0_eps01"] = float(mp.mpf("0.5") + h0)
    lm, lp = burgers_log_h(1.3, 0.1), burgers_log_h(0.7, 0.1)
    o["rhs_exact_03_01"] = float((mp.e ** lm - mp.e ** lp) / 2)
    o["rhs_asym_03_01"] = float(mp.e ** -13 - mp.e ** -7)
    return o


# --- Navier-Stokes flux levels ------------------------------------------------
US = mp.mpf(1)


def _gamma_end(log_h, u_end, K):
    """Gamma(u_end, K + e^log_h) = int_{u*}^{u_end} G_u/(kappa - F) ds.

    With s = u_end -+ e^x the nearly singular end becomes a smooth sigmoid in x
    centred where e^x ~ h/|F_u|.
    """
    h = mp.e ** log_h
    sgn = 1 if u_end > US else -1
    L = abs(u_end - US)

    def f(x):
        y = mp.e ** x
        s = u_end - sgn * y
        # kappa - F(s) = h + F(u_end) - F(s), factored to avoid cancellation
        d = -sgn * y * (1 / (u_end * s) - (s + u_end) / 2)
        return y * dGdu(s) / (h + d)

    x0 = log_h - mp.log(abs(dFdu(u_end)))
    top = mp.log(L)
    pts = [log_h - 80] + [x0 + d for d in (-12, -4, 0, 4, 12) if x0 + d < top] + [top]
    return sgn * mp.quad(f, pts)


def ns_log_h(target, u_end, K, slope_ratio):
    """Solve eps*Gamma = +-(distance): ``target`` is the signed Gamma value."""
    t0 = -abs(slope_ratio) * abs(target)
    g = lambda t: _gamma_end(t, u_end, K) - target
    lo, hi = t0 - 8, t0 + 8
    while g(lo) * g(hi) > 0:
        lo, hi = lo - 8, hi + 8
    return mp.findroot(g, (lo, hi), solver="anderson", tol=1e-30)


def navier_stokes(um, up):
    o = {}
    um, up = mp.mpf(um), mp.mpf(up)
    K = F(um)
    # composite Simpson on 1e6 points for Gamma(0.9, 2.2)
    s = np.linspace(0.9, 1.0, 1_000_001)
    f = (1 / s) / (2.2 - (1 / s + s * s / 2))
    h = s[1] - s[0]
    simpson = h / 3 * (f[0] + f[-1] + 4 * f[1:-1:2].sum() + 2 * f[2:-1:2].sum())
    o["gamma_09_22_simpson"] = -float(simpson)
    o["gamma_09_22_mp"] = float(-mp.quad(lambda s: (1 / s) / (mp.mpf("2.2") - F(s)), [0.9, 1]))
    rm = abs(dFdu(um)) / dGdu(um)
    rp = abs(dFdu(up)) / dGdu(up)

    def logs(xi, eps):
        lm = ns_log_h(-(1 + mp.mpf(xi)) / eps, um, K, rm)
        lp = ns_log_h((1 - mp.mpf(xi)) / eps, up, K, rp)
        return lm, lp

    table = []
    for eps in ("0.05", "0.1"):
        for xi in ("-0.5", "0", "0.3"):
            lm, lp = logs(xi, mp.mpf(eps))
            table.append([float(eps), float(xi), float(lm), float(lp)])
    o["ns_log_h"] = table
    for eps in ("0.05", "0.02", "0.01"):
        e = mp.mpf(eps)
        g = lambda x: (lambda p: p[1] - p[0])(logs(x, e))
        o[f"xi_star_{eps}"] = float(mp.findroot(g, (mp.mpf("0.17"), mp.mpf("0.19")),
                                                solver="secant", tol=1e-24))
    return o


# --- wave coefficients and cubic roots ----------------------------------------
def waves():
    o = {}
    u = mp.mpf("0.5")
    # F_u C^2 + 2 (v/u) C - 1 = 0
    a, b, c = dFdu(u), 2 / u, -1
    r = sorted([(-b + mp.sqrt(b * b - 4 * a * c)) / (2 * a), (-b - mp.sqrt(b * b - 4 * a * c)) / (2 * a)])
    o["C_plus"], o["C_minus"] = float(r[0]), float(r[1])
    # cubic from the first-order adjoint matrix at constant state, by companion eigenvalues
    eps, lam = mp.mpf("0.001"), mp.mpf("-0.01")
    v, Fu, Gu, nu = 1, dFdu(u), dGdu(u), u
    a13 = -(u / v) * (v * v / (u * u) + u)
    A = mp.matrix([[lam * u / v, lam, a13], [0, 0, 1], [-lam / (eps * Gu), 0, Fu / (eps * Gu)]])
    ev = mp.eig(A)[0]
    mu0 = max(ev, key=lambda z: abs(z))
    o["mu0_exact"] = float(mp.re(mu0))
    o["mu0_asym"] = float(Fu / (eps * Gu))
    return o


def main():
    o, um, up = constitutive()
    o.update(burgers())
    o.update(navier_stokes(um, up))
    o.update(waves())
    OUT.write_text(json.dumps(o, indent=1, sort_keys=True) + "\n")
    print("wrote", OUT)


if __name__ == "__main__":
    main()
