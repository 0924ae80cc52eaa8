"""Viscous Burgers layer: closed forms used as an oracle for the general case.

    w_t + (w**2/2 - eps w_x)_x = 0,   w(-ell) = w_bar,  w(ell) = -w_bar.

The two half profiles have flux levels ``kappa = w_bar**2/2 + h`` with ``h``
exponentially small.  We solve for ``h`` through ``c = sqrt(2 kappa)/w_bar =
1 + delta`` so nothing is lost to cancellation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .errors import DivergenceError, DomainError

LOG_SWITCH = 350.0


@dataclass(frozen=True)
class BurgersSetup:
    w_bar: float = 1.0
    ell: float = 1.0
    epsilon: float = 0.1

    def __post_init__(self):
        if not (self.w_bar > 0 and self.ell > 0 and self.epsilon > 0):
            raise DomainError("w_bar, ell and epsilon must be positive")

    @classmethod
    def from_config(cls, cfg):
        return cls(w_bar=float(cfg.get("w_bar", 1.0)), ell=float(cfg.get("ell", 1.0)),
                   epsilon=float(cfg.get("epsilon", 0.1)))


def gamma_burgers(w, kappa):
    """``int_0^w ds/(kappa - s**2/2)``."""
    w = np.asarray(w, dtype=float)
    if np.any(kappa <= 0) or np.any(kappa <= 0.5 * w * w):
        raise DomainError("need kappa > w**2/2")
    r = math.sqrt(2.0 * kappa)
    out = math.sqrt(2.0 / kappa) * np.arctanh(w / r)
    return float(out) if out.ndim == 0 else out


def _solve_delta(a, tol=1e-15, maxiter=100):
    """Root of ``delta (1 - q) = 2 q`` with ``q = exp(-2 a (1 + delta))``.

    Safeguarded Newton on the bracket ``[0, 2 q0/(1 - q0)]``.
    """
    q0 = math.exp(-2.0 * a)
    lo, hi = 0.0, 2.0 * q0 / (-math.expm1(-2.0 * a))

    def g(d):
        q = math.exp(-2.0 * a * (1.0 + d))
        return d * (1.0 - q) - 2.0 * q, (1.0 - q) + 2.0 * a * q * (d + 2.0)

    d = min(2.0 * q0, 0.5 * (lo + hi))
    for _ in range(maxiter):
        f, df = g(d)
        if f > 0:
            hi = d
        else:
            lo = d
        step = f / df
        dn = d - step
        if not lo <= dn <= hi:
            dn = 0.5 * (lo + hi)
        if abs(dn - d) <= tol * max(dn, 1e-300):
            return dn
        d = dn
    return d


def log_h_side(L, setup: BurgersSetup) -> float:
    """``log(kappa - w_bar**2/2)`` for a half profile of length ``L``."""
    if not L > 0:
        raise DivergenceError("layer on or beyond the boundary")
    wb, eps = setup.w_bar, setup.epsilon
    a = L * wb / (2.0 * eps)
    if 2.0 * a > LOG_SWITCH:
        # delta = 2q/(1-q) with q ~ exp(-2a); one fixed-point pass is exact to rounding
        log_d = math.log(2.0) - 2.0 * a
        log_d = math.log(2.0) - 2.0 * a * (1.0 + math.exp(log_d))
        return math.log(0.5 * wb * wb) + log_d + math.log(2.0)
    d = _solve_delta(a)
    return math.log(0.5 * wb * wb) + math.log(d) + math.log1p(0.5 * d) + math.log(2.0)


def kappa_log_excess_burgers(xi, setup: BurgersSetup):
    """``(log h_minus, log h_plus)``; ``kappa_minus`` belongs to ``(-ell, xi)``."""
    ell = setup.ell
    if not -ell < xi < ell:
        raise DomainError(f"xi={xi} outside (-{ell}, {ell})")
    return log_h_side(ell + xi, setup), log_h_side(ell - xi, setup)


def kappa_pm_burgers(xi, setup: BurgersSetup):
    lm, lp = kappa_log_excess_burgers(xi, setup)
    k0 = 0.5 * setup.w_bar ** 2
    return k0 + math.exp(lm), k0 + math.exp(lp)


def kappa_from_gamma(L, setup: BurgersSetup) -> float:
    """Direct root of ``eps Gamma(w_bar, kappa) = L`` (slow but independent)."""
    wb, eps = setup.w_bar, setup.epsilon
    k0 = 0.5 * wb * wb
    f = lambda k: eps * gamma_burgers(wb, k) - L
    hi = 2.0 * k0
    while f(hi) > 0:
        hi *= 2.0
    lo = np.nextafter(k0, np.inf)
    with np.errstate(divide="ignore"):
        return optimize.brentq(f, lo, hi, xtol=1e-300, rtol=1e-15, maxiter=500)


def burgers_reduced_rhs_exact(xi, setup: BurgersSetup) -> float:
    """``(kappa_minus - kappa_plus)/(2 w_bar)`` from the log excesses."""
    lm, lp = kappa_log_excess_burgers(xi, setup)
    return (math.exp(lm) - math.exp(lp)) / (2.0 * setup.w_bar)


def burgers_reduced_rhs_asymptotic(xi, setup: BurgersSetup) -> float:
    wb, ell, eps = setup.w_bar, setup.ell, setup.epsilon
    return wb * (math.exp(-wb * (ell + xi) / eps) - math.exp(-wb * (ell - xi) / eps))


def burgers_profile(x, xi, setup: BurgersSetup, kappa=None):
    """Matched profile ``W(x; xi)`` and its x-derivative."""
    x = np.asarray(x, dtype=float)
    eps = setup.epsilon
    km, kp = kappa_pm_burgers(xi, setup) if kappa is None else kappa
    k = np.where(x < xi, km, kp)
    r = np.sqrt(2.0 * k)
    th = np.tanh(np.sqrt(0.5 * k) * (xi - x) / eps)
    w = r * th
    dw = (0.5 * w * w - k) / eps
    return w, dw


def burgers_equilibrium_check(setup: BurgersSetup, n=41):
    """rhs on a symmetric grid; handy for the antisymmetry/sign checks."""
    ell = setup.ell
    xs = np.linspace(-0.8 * ell, 0.8 * ell, n)
    return xs, np.array([burgers_reduced_rhs_exact(x, setup) for x in xs])
