"""Approximate invariant manifold of matched steady profiles.

For a layer position ``xi`` the profile is built from two steady solutions
with momentum ``v*``, joined at ``x = xi`` at the sonic density.  Each side
carries a flux level ``kappa = K + h`` with ``K`` the shock flux level and
``h > 0`` exponentially small in ``1/epsilon``.  Every such quantity is
handled through ``log h``; ``kappa`` itself is only formed on output.

Side convention: ``side = -1`` is the left piece (end state ``u_minus``),
``side = +1`` the right piece (end state ``u_plus``).  Along a side, ``t``
is the distance ``|s - u_end|`` to the end state.
"""
from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np
from numpy.polynomial import Chebyshev
from scipy import integrate, optimize

from .constitutive import ConstitutiveLaw, ShockData
from .errors import DivergenceError, DomainError, SingularIntegrandError

TAU_CAP = 700.0
TAIL_MARGIN = 60.0


@dataclass(frozen=True)
class DomainSpec:
    ell: float = 1.0
    epsilon: float = 0.05
    n_cells: int = 512

    def __post_init__(self):
        if self.ell <= 0 or self.epsilon <= 0:
            raise DomainError("ell and epsilon must be positive")
        if self.n_cells < 16:
            raise DomainError("n_cells must be at least 16")

    @property
    def dx(self) -> float:
        return 2.0 * self.ell / self.n_cells

    def nodes(self) -> np.ndarray:
        return np.linspace(-self.ell, self.ell, self.n_cells + 1)

    def replace(self, **kw) -> "DomainSpec":
        d = dict(ell=self.ell, epsilon=self.epsilon, n_cells=self.n_cells)
        d.update(kw)
        return DomainSpec(**d)


@dataclass
class ManifoldPoint:
    xi: float
    kappa_minus: float
    kappa_plus: float
    log_h_minus: float
    log_h_plus: float
    grid: np.ndarray
    U: np.ndarray
    V: np.ndarray
    dUdx: np.ndarray
    log_dist: np.ndarray = field(repr=False)
    endpoint_mismatch: Tuple[float, float] = (0.0, 0.0)
    epsilon: float = float("nan")

    @property
    def residual_jump(self) -> float:
        return math.exp(self.log_h_plus) - math.exp(self.log_h_minus)


# ---------------------------------------------------------------------------
# side integrals in log coordinates
# ---------------------------------------------------------------------------

class _Side:
    """Cached end-state data for one half of the profile."""

    def __init__(self, side, shock: ShockData, model: ConstitutiveLaw):
        self.side = side
        self.model = model
        self.v = shock.v_star
        self.u_sonic = shock.u_sonic
        self.u_end = shock.u_minus if side < 0 else shock.u_plus
        # s = u_end + sign*t moves from the end state towards u_sonic
        self.sign = 1.0 if side < 0 else -1.0
        self.T = abs(shock.u_sonic - self.u_end)
        self.g0 = model.dG_du(self.u_end, self.v)
        self.Q0 = abs(model.dF_du(self.u_end, self.v))
        self.QT = model.flux_drop(self.u_end, self.T, self.v, self.sign) / self.T

    def s(self, t):
        return self.u_end + self.sign * t

    def Q(self, t):
        t = np.asarray(t, dtype=float)
        tt = np.where(t > 0, t, 1.0)
        q = self.model.flux_drop(self.u_end, tt, self.v, self.sign) / tt
        return np.where(t > 0, q, self.Q0)

    def log_drop(self, t):
        return math.log(t) + math.log(float(self.Q(t)))

    def integral(self, log_h, log_t_low=-math.inf):
        """``int_{t_low}^{T} dG/du / (h + D(t)) dt`` with ``D = F(u_end) - F(s)``."""
        tau0 = -math.log(self.T)
        tau_low = -log_t_low
        if tau_low <= tau0:
            return 0.0
        tau1 = min(tau_low, max(tau0, -log_h) + TAIL_MARGIN, TAU_CAP)
        v, model = self.v, self.model

        def f(tau):
            t = math.exp(-tau)
            return model.dG_du(self.s(t), v) / (math.exp(log_h + tau) + float(self.Q(t)))

        pts = [p for p in (-log_h,) if tau0 < p < tau1]
        val, _ = integrate.quad(f, tau0, tau1, points=pts or None, limit=1000,
                                epsabs=1e-13, epsrel=1e-13)
        if tau1 < tau_low:
            # beyond tau1 the density sits on the end state: constant coefficients
            a = math.log1p(self.Q0 * math.exp(-tau1 - log_h))
            b = 0.0 if math.isinf(tau_low) else math.log1p(self.Q0 * math.exp(-tau_low - log_h))
            val += self.g0 * (a - b) / self.Q0
        return val

    def asymptotic_log_h(self, target):
        return math.log(self.Q0 * self.T) - self.Q0 / self.g0 * target

    def solve_log_h(self, target):
        """Root of ``integral(log_h) = target``; integral decreases in ``log_h``."""
        if not target > 0:
            raise DivergenceError("layer position on or beyond the boundary: kappa diverges")
        f = lambda y: self.integral(y) - target
        y0 = self.asymptotic_log_h(target)
        step = 1.0
        a = b = y0
        fa = fb = f(y0)
        if fa > 0:
            while fb > 0:
                a, fa = b, fb
                b += step
                step *= 2.0
                fb = f(b)
        else:
            while fa < 0:
                b, fb = a, fa
                a -= step
                step *= 2.0
                fa = f(a)
        if fa == 0:
            return a
        if fb == 0:
            return b
        return optimize.brentq(f, a, b, xtol=1e-13, rtol=1e-15, maxiter=200)

    def log_t_from_log_drop(self, L):
        """Invert ``log D(t) = L`` for ``log t``."""
        logT = math.log(self.T)
        if L >= math.log(self.T) + math.log(self.QT):
            return logT
        qs = (self.Q0, self.QT)
        lo = L - math.log(max(qs)) - 1.0
        hi = min(logT, L - math.log(min(qs)) + 1.0)
        g = lambda s: s + math.log(float(self.Q(math.exp(s)))) - L
        if g(hi) < 0:
            return hi
        return optimize.brentq(g, lo, hi, xtol=1e-14, rtol=1e-15)


def _sides(shock, model):
    return _Side(-1, shock, model), _Side(+1, shock, model)


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------

def gamma_ns(u, kappa, shock: ShockData, model: ConstitutiveLaw) -> float:
    """``int_{u_sonic}^{u} dG/du(s) / (kappa - F(s)) ds``."""
    v = shock.v_star
    us = shock.u_sonic
    if u == us:
        return 0.0
    if not kappa > model.F(u, v):
        raise SingularIntegrandError(f"kappa={kappa} does not exceed F(u={u})={model.F(u, v)}")
    # s = u - sg*exp(-tau): the near-singular end at s = u becomes a smooth
    # exponential tail, and kappa - F(s) = h + (F(u) - F(s)) avoids cancellation
    sg = 1.0 if u > us else -1.0
    h = kappa - model.F(u, v)
    tau0 = -math.log(abs(u - us))
    tau_s = -math.log(h / max(abs(float(model.dF_du(u, v))), 1e-300))
    tau1 = max(tau0, tau_s) + TAIL_MARGIN

    def f(tau):
        t = math.exp(-tau)
        return t * model.dG_du(u - sg * t, v) / (h + float(model.flux_drop(u, t, v, -sg)))

    pts = [tau_s] if tau0 < tau_s < tau1 else None
    val, _ = integrate.quad(f, tau0, tau1, points=pts, limit=500, epsabs=1e-14, epsrel=1e-13)
    val += model.dG_du(u, v) * math.exp(-tau1) / h
    return sg * val


def gamma_ns_log(log_t, side, log_h, shock, model) -> float:
    """``Gamma`` at the density a distance ``exp(log_t)`` from the end state of ``side``."""
    sd = _Side(side, shock, model)
    return side * sd.integral(log_h, log_t)


def kappa_log_excess(xi, shock, model, domain: DomainSpec) -> Tuple[float, float]:
    """``(log h_minus, log h_plus)`` with ``h = kappa - K``."""
    ell, eps = domain.ell, domain.epsilon
    if not -ell < xi < ell:
        raise DivergenceError(f"xi={xi} outside (-{ell}, {ell})")
    left, right = _sides(shock, model)
    return left.solve_log_h((ell + xi) / eps), right.solve_log_h((ell - xi) / eps)


def kappa_pm_ns(xi, shock, model, domain) -> Tuple[float, float]:
    lm, lp = kappa_log_excess(xi, shock, model, domain)
    K = shock.flux_level
    return K + math.exp(lm), K + math.exp(lp)


def _log_diff(la, lb):
    """``(log|a - b|, sign(a - b))`` for ``a = e^la``, ``b = e^lb``."""
    if la == lb:
        return -math.inf, 0.0
    if la > lb:
        return la + math.log(-math.expm1(lb - la)), 1.0
    return lb + math.log(-math.expm1(la - lb)), -1.0


def residual_jump_log(xi, shock, model, domain) -> Tuple[float, float]:
    """``kappa_plus - kappa_minus`` as ``(log magnitude, sign)``."""
    lm, lp = kappa_log_excess(xi, shock, model, domain)
    return _log_diff(lp, lm)


def residual_jump(xi, shock, model, domain) -> float:
    """Second component of the residual weight, ``kappa_plus - kappa_minus``."""
    la, sg = residual_jump_log(xi, shock, model, domain)
    return sg * math.exp(la)


def equilibrium_xi(shock, model, domain, margin=None) -> float:
    """Unique zero of ``kappa_plus - kappa_minus`` in ``(-ell, ell)``."""
    ell, eps = domain.ell, domain.epsilon
    delta = 5.0 * eps if margin is None else margin
    delta = min(delta, 0.25 * ell)

    def g(xi):
        lm, lp = kappa_log_excess(xi, shock, model, domain)
        return lp - lm

    a, b = -ell + delta, ell - delta
    ga, gb = g(a), g(b)
    if ga > 0 or gb < 0:
        warnings.warn("equilibrium lies within the boundary margin", RuntimeWarning)
        a, b = -ell * (1 - 1e-6), ell * (1 - 1e-6)
    xs = optimize.brentq(g, a, b, xtol=1e-14, rtol=1e-15)
    if min(xs + ell, ell - xs) < delta:
        warnings.warn(f"equilibrium xi*={xs} within {delta} of the boundary", RuntimeWarning)
    return xs


class KappaTable:
    """Piecewise Chebyshev fit of ``log h`` against ``target = L/epsilon`` for both sides.

    Each side only sees its own length through ``L/epsilon``, so one table
    serves every ``epsilon``.  The fitted quantity is ``log h + rate*target``,
    which tends to a constant exponentially fast; past the last piece it is
    held fixed.  Targets below the first piece fall back to the direct solve.
    """

    EDGES = (1.0, 2.0, 6.0, 15.0, 40.0)
    DEGREE = 28

    def __init__(self, shock, model):
        self.sides = _sides(shock, model)
        self.pieces = []
        for sd in self.sides:
            rate = sd.Q0 / sd.g0
            edges = np.array(self.EDGES)
            edges[0] = min(1.0, 0.5 * rate)
            edges /= rate
            g = lambda T, sd=sd, rate=rate: np.array(
                [sd.solve_log_h(x) + rate * x for x in np.atleast_1d(T)])
            fits = [Chebyshev.interpolate(g, self.DEGREE, domain=[a, b])
                    for a, b in zip(edges[:-1], edges[1:])]
            self.pieces.append((rate, edges, fits, float(fits[-1](edges[-1]))))

    def log_h(self, side_index, target):
        rate, edges, fits, tail = self.pieces[side_index]
        if target < edges[0]:
            return self.sides[side_index].solve_log_h(target)
        if target >= edges[-1]:
            return tail - rate * target
        k = min(int(np.searchsorted(edges, target, side="right")) - 1, len(fits) - 1)
        return float(fits[k](target)) - rate * target

    def log_excess(self, xi, domain):
        ell, eps = domain.ell, domain.epsilon
        if not -ell < xi < ell:
            raise DivergenceError(f"xi={xi} outside (-{ell}, {ell})")
        return self.log_h(0, (ell + xi) / eps), self.log_h(1, (ell - xi) / eps)

    def residual_jump_log(self, xi, domain):
        lm, lp = self.log_excess(xi, domain)
        return _log_diff(lp, lm)


@functools.lru_cache(maxsize=16)
def kappa_table(shock, model) -> KappaTable:
    """Cached :class:`KappaTable` (shock and model are frozen, hence hashable)."""
    return KappaTable(shock, model)


def kappa_diff_asymptotic_log(xi, shock, model, domain) -> Tuple[float, float]:
    """Leading-order ``kappa_plus - kappa_minus`` as ``(log magnitude, sign)``."""
    ell, eps = domain.ell, domain.epsilon
    (Fm, Gm), (Fp, Gp) = shock.end_slopes(model)
    us = shock.u_sonic
    lp = math.log(Fp * (shock.u_plus - us)) - Fp / Gp * (ell - xi) / eps
    lm = math.log(-Fm * (us - shock.u_minus)) + Fm / Gm * (xi + ell) / eps
    return _log_diff(lp, lm)


def kappa_diff_asymptotic(xi, shock, model, domain) -> float:
    la, sg = kappa_diff_asymptotic_log(xi, shock, model, domain)
    return sg * math.exp(la)


def _integrate_side(sd: _Side, log_h, xi, x_targets, eps, rtol):
    """Integrate the distance ``t = |U - u_end|`` outward from ``U(xi) = u_sonic``.

    ``eps G_u(U) U' = h + D(t)``, so ``t`` decays towards the end state at a
    rate ``~|F_u|/(eps G_u)`` and reaches ``0`` at the boundary when ``h`` is
    the matching flux excess.
    """
    model, v = sd.model, sd.v
    h = math.exp(log_h)
    # t decreases away from xi on both sides
    direction = -1.0 if sd.side > 0 else 1.0

    def rhs(x, y):
        t = y[0]
        s = sd.s(t)
        return [direction * (h + t * float(sd.Q(max(t, 0.0)))) / (eps * model.dG_du(s, v))]

    x_end = x_targets[-1]
    atol = max(1e-300, 1e-10 * h / sd.Q0)
    sol = integrate.solve_ivp(rhs, (xi, x_end), [sd.T], method="DOP853", rtol=rtol,
                              atol=atol, t_eval=x_targets)
    if not sol.success:
        raise DivergenceError(f"profile integration failed: {sol.message}")
    t = np.maximum(sol.y[0], 0.0)
    U = sd.s(t)
    eta = h + t * sd.Q(t)
    dUdx = eta / (eps * model.dG_du(U, v))
    with np.errstate(divide="ignore"):
        log_t = np.log(t)
    return U, dUdx, log_t, t


def build_profile(xi, shock, model, domain: DomainSpec, log_h=None, grid=None,
                  rtol=1e-10) -> ManifoldPoint:
    """Sample ``W(.; xi)`` on the domain grid (or on ``grid``)."""
    ell, eps = domain.ell, domain.epsilon
    if log_h is None:
        log_h = kappa_log_excess(xi, shock, model, domain)
    lm, lp = log_h
    x = domain.nodes() if grid is None else np.asarray(grid, dtype=float)
    U = np.empty_like(x)
    dU = np.empty_like(x)
    log_t = np.empty_like(x)
    left, right = _sides(shock, model)
    at = x == xi
    U[at] = shock.u_sonic
    dU[at] = math.exp(np.logaddexp(lm, math.log(left.T * left.QT))) / (eps * model.dG_du(shock.u_sonic, shock.v_star))
    log_t[at] = math.log(left.T)
    mismatch = [0.0, 0.0]
    for sd, lh, mask, order in ((left, lm, x < xi, -1), (right, lp, x > xi, 1)):
        idx = np.nonzero(mask)[0][::order]
        if idx.size == 0:
            continue
        Us, dUs, lts, ys = _integrate_side(sd, lh, xi, x[idx], eps, rtol)
        U[idx], dU[idx], log_t[idx] = Us, dUs, lts
        k = 0 if sd.side < 0 else 1
        if abs(abs(x[idx[-1]]) - ell) < 1e-14 * ell:
            mismatch[k] = abs(Us[-1] - sd.u_end)
    K = shock.flux_level
    return ManifoldPoint(xi=float(xi), kappa_minus=K + math.exp(lm), kappa_plus=K + math.exp(lp),
                         log_h_minus=lm, log_h_plus=lp, grid=x, U=U,
                         V=np.full_like(x, shock.v_star), dUdx=dU, log_dist=log_t,
                         endpoint_mismatch=tuple(mismatch), epsilon=eps)


def implicit_defect(point: ManifoldPoint, shock, model) -> np.ndarray:
    """``eps*Gamma(U(x), kappa) - (x - xi)`` at each grid node."""
    eps = point.epsilon
    out = np.zeros_like(point.grid)
    left, right = _sides(shock, model)
    for i, (x, lt) in enumerate(zip(point.grid, point.log_dist)):
        if x == point.xi:
            continue
        if x < point.xi:
            g = -left.integral(point.log_h_minus, lt)
        else:
            g = right.integral(point.log_h_plus, lt)
        out[i] = eps * g - (x - point.xi)
    return out


def steady_flux(point: ManifoldPoint, model) -> np.ndarray:
    """Momentum flux ``F(U, v*) - eps nu(U) d/dx(v*/U)`` at the nodes."""
    U, v, eps = point.U, point.V, point.epsilon
    return model.F(U, v) + eps * model.dG_du(U, v) * point.dUdx
