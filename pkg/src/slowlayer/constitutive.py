"""Constitutive laws, flux functions and the admissible stationary jump.

Variables are density ``u`` and momentum ``v``.  The momentum flux of the
inviscid system is ``F(u, v) = v**2/u + P(u)`` and the viscous potential
``G(u, v) = v * int_{u_ref}^u nu(s)/s**2 ds``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy import integrate, optimize

from .errors import DegenerateJumpError, DomainError, NoJumpError

ROOT_RTOL = 1e-12
DEGENERATE_TOL = 1e-12


def _check_positive(u, name="u"):
    if np.any(np.asarray(u) <= 0):
        raise DomainError(f"{name} must be positive, got {u!r}")


class ConstitutiveLaw:
    """General smooth pressure/viscosity pair.

    Subclasses provide ``pressure``, ``dpressure``, ``d2pressure``,
    ``viscosity`` and ``dviscosity``.  Everything else has a numerical
    default here and may be overridden by closed forms.
    """

    u_ref = 1.0

    # -- primitive laws (abstract) ------------------------------------------
    def pressure(self, u):
        raise NotImplementedError

    def dpressure(self, u):
        raise NotImplementedError

    def d2pressure(self, u):
        raise NotImplementedError

    def viscosity(self, u):
        raise NotImplementedError

    def dviscosity(self, u):
        raise NotImplementedError

    # -- fluxes ---------------------------------------------------------------
    def flux_F(self, u, v):
        """Return ``(F, dF/du, d2F/du2)``."""
        _check_positive(u)
        u = np.asarray(u, dtype=float)
        v2 = np.asarray(v, dtype=float) ** 2
        F = v2 / u + self.pressure(u)
        Fu = -v2 / u**2 + self.dpressure(u)
        Fuu = 2.0 * v2 / u**3 + self.d2pressure(u)
        if F.ndim == 0:
            return float(F), float(Fu), float(Fuu)
        return F, Fu, Fuu

    def F(self, u, v):
        return v * v / u + self.pressure(u)

    def dF_du(self, u, v):
        return -v * v / (u * u) + self.dpressure(u)

    def dF_dv(self, u, v):
        return 2.0 * v / u

    def sound_speed(self, u):
        return np.sqrt(self.dpressure(u))

    def flux_drop(self, u_end, t, v, sign):
        """``F(u_end, v) - F(u_end + sign*t, v)`` for ``t >= 0``.

        The default subtracts directly; power laws override this with a
        cancellation-free form, which matters once ``t`` is tiny.
        """
        s = u_end + sign * t
        return self.F(u_end, v) - self.F(s, v)

    # -- viscous potential ------------------------------------------------------
    def dG_du(self, u, v):
        _check_positive(u)
        return v * self.viscosity(u) / (u * u)

    def d2G_du2(self, u, v):
        return v * (self.dviscosity(u) / u**2 - 2.0 * self.viscosity(u) / u**3)

    def d2G_dudv(self, u, v):
        return self.viscosity(u) / (u * u)

    def G(self, u, v):
        _check_positive(u)
        val, _ = integrate.quad(lambda s: self.viscosity(s) / s**2, self.u_ref, u,
                                epsabs=1e-13, epsrel=1e-13)
        return v * val

    # -- entropy --------------------------------------------------------------
    def Pi_prime(self, u):
        """Antiderivative of ``P'(s)/s`` vanishing at ``u_ref``."""
        val, _ = integrate.quad(lambda s: self.dpressure(s) / s, self.u_ref, u,
                                epsabs=1e-13, epsrel=1e-13)
        return val

    def entropy_lambda(self, u, v):
        return v * v / (u * u) + 2.0 * self.Pi_prime(u)

    # -- sonic state and minimum flux -----------------------------------------
    def sonic_state(self, v_star):
        """Unique root of ``P'(u) u**2 = v_star**2``."""
        if v_star <= 0:
            raise DomainError(f"v_star must be positive, got {v_star}")
        g = lambda u: self.dpressure(u) * u * u - v_star * v_star
        lo, hi = 1.0, 1.0
        while g(lo) > 0:
            lo *= 0.5
        while g(hi) < 0:
            hi *= 2.0
        return optimize.brentq(g, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps)

    def min_flux(self, v_star):
        """``f(v) = min_u F(u, v)``; equals ``P(0)`` at ``v = 0``."""
        if v_star < 0:
            raise DomainError(f"v_star must be non-negative, got {v_star}")
        if v_star == 0:
            return float(self.pressure(0.0))
        us = self.sonic_state(v_star)
        return float(self.dpressure(us) * us + self.pressure(us))


@dataclass(frozen=True)
class FluidModel(ConstitutiveLaw):
    """Power laws ``P = kappa_p u**(alpha+1)/(alpha+1)``, ``nu = c_nu u**beta``."""

    alpha: float = 1.0
    kappa_p: float = 1.0
    beta: float = 1.0
    c_nu: float = 1.0
    u_ref: float = 1.0

    def __post_init__(self):
        if self.alpha <= 0 or self.kappa_p <= 0 or self.c_nu <= 0 or self.u_ref <= 0:
            raise DomainError("alpha, kappa_p, c_nu and u_ref must be positive")
        if self.beta < 0:
            raise DomainError("beta must be non-negative")

    @classmethod
    def from_config(cls, cfg: dict) -> "FluidModel":
        return cls(alpha=float(cfg.get("alpha", 1.0)), kappa_p=float(cfg.get("kappa_p", 1.0)),
                   beta=float(cfg.get("beta", 1.0)), c_nu=float(cfg.get("c_nu", 1.0)),
                   u_ref=float(cfg.get("u_ref", 1.0)))

    def to_config(self) -> dict:
        return {"alpha": self.alpha, "kappa_p": self.kappa_p, "beta": self.beta,
                "c_nu": self.c_nu, "u_ref": self.u_ref}

    def pressure(self, u):
        return self.kappa_p * np.power(u, self.alpha + 1.0) / (self.alpha + 1.0)

    def dpressure(self, u):
        return self.kappa_p * np.power(u, self.alpha)

    def d2pressure(self, u):
        return self.kappa_p * self.alpha * np.power(u, self.alpha - 1.0)

    def viscosity(self, u):
        return self.c_nu * np.power(u, self.beta)

    def dviscosity(self, u):
        if self.beta == 0:
            return np.zeros_like(np.asarray(u, dtype=float)) + 0.0
        return self.c_nu * self.beta * np.power(u, self.beta - 1.0)

    def flux_drop(self, u_end, t, v, sign):
        t = np.asarray(t, dtype=float)
        s = u_end + sign * t
        a1 = self.alpha + 1.0
        kin = v * v * sign * t / (u_end * s)
        pres = -self.kappa_p * u_end**a1 / a1 * np.expm1(a1 * np.log1p(sign * t / u_end))
        return kin + pres

    def G(self, u, v):
        _check_positive(u)
        e = self.beta - 1.0
        if e == 0:
            return v * self.c_nu * np.log(u / self.u_ref)
        return v * self.c_nu * (np.power(u, e) - self.u_ref**e) / e

    def Pi_prime(self, u):
        _check_positive(u)
        return self.kappa_p * (np.power(u, self.alpha) - self.u_ref**self.alpha) / self.alpha

    def sonic_state(self, v_star):
        if v_star <= 0:
            raise DomainError(f"v_star must be positive, got {v_star}")
        return (v_star * v_star / self.kappa_p) ** (1.0 / (self.alpha + 2.0))

    def min_flux(self, v_star):
        if v_star < 0:
            raise DomainError(f"v_star must be non-negative, got {v_star}")
        a = self.alpha
        return (a + 2.0) / (a + 1.0) * self.kappa_p ** (1.0 / (a + 2.0)) \
            * v_star ** (2.0 * (a + 1.0) / (a + 2.0))


# ---------------------------------------------------------------------------
# module-level operations
# ---------------------------------------------------------------------------

def flux_F(u, v, model: ConstitutiveLaw):
    return model.flux_F(u, v)


def dG_du(u, v, model: ConstitutiveLaw):
    _check_positive(u)
    return model.dG_du(u, v)


def sonic_state(v_star, model: ConstitutiveLaw) -> float:
    return model.sonic_state(v_star)


def min_flux(v_star, model: ConstitutiveLaw) -> float:
    return model.min_flux(v_star)


def _branch_root(model, v, K, us, side):
    g = lambda u: model.F(u, v) - K
    if side < 0:
        lo = 0.5 * us
        while g(lo) <= 0:
            lo *= 0.5
        a, b = lo, us
    else:
        hi = 2.0 * us
        while g(hi) <= 0:
            hi *= 2.0
        a, b = us, hi
    return optimize.brentq(g, a, b, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)


def conjugate_states(v_star, K, model: ConstitutiveLaw) -> Tuple[float, float]:
    """The two densities with ``F(u, v_star) = K``, ``u_minus < u_sonic < u_plus``."""
    if v_star <= 0:
        raise DomainError(f"v_star must be positive, got {v_star}")
    f = model.min_flux(v_star)
    if abs(K - f) <= DEGENERATE_TOL * max(1.0, abs(f)):
        raise DegenerateJumpError(f"K={K} equals the minimum flux f(v*)={f}")
    if K < f:
        raise NoJumpError(f"K={K} is below the minimum flux f(v*)={f}")
    us = model.sonic_state(v_star)
    return _branch_root(model, v_star, K, us, -1), _branch_root(model, v_star, K, us, +1)


def entropy_gap(u_minus, u_plus, v_star, model: ConstitutiveLaw) -> float:
    """``Lambda(u_minus) - Lambda(u_plus)``; non-negative iff the jump is admissible."""
    _check_positive(u_minus, "u_minus")
    _check_positive(u_plus, "u_plus")
    return float(model.entropy_lambda(u_minus, v_star) - model.entropy_lambda(u_plus, v_star))


@dataclass(frozen=True)
class ShockData:
    v_star: float
    u_minus: float
    u_plus: float
    u_sonic: float
    w_minus: float
    w_plus: float
    flux_level: float

    @classmethod
    def from_left_state(cls, v_star, u_minus, model: ConstitutiveLaw) -> "ShockData":
        """Admissible stationary jump leaving ``(u_minus, v_star)``.

        The flux level is ``F(u_minus, v_star)`` exactly; ``u_plus`` is the
        conjugate root on the right branch.
        """
        if v_star <= 0:
            raise DomainError(f"v_star must be positive, got {v_star}")
        _check_positive(u_minus, "u_minus")
        us = model.sonic_state(v_star)
        if not u_minus < us * (1 - 1e-9):
            raise DomainError(f"u_minus={u_minus} must lie below the sonic state {us}")
        K = float(model.F(u_minus, v_star))
        if K - model.min_flux(v_star) <= DEGENERATE_TOL * max(1.0, K):
            raise DegenerateJumpError("u_minus too close to the sonic state")
        u_plus = _branch_root(model, v_star, K, us, +1)
        return cls(v_star=float(v_star), u_minus=float(u_minus), u_plus=float(u_plus),
                   u_sonic=float(us), w_minus=v_star / u_minus, w_plus=v_star / u_plus,
                   flux_level=K)

    @classmethod
    def from_config(cls, cfg: dict, model: ConstitutiveLaw) -> "ShockData":
        return cls.from_left_state(float(cfg["v_star"]), float(cfg["u_minus"]), model)

    def to_config(self) -> dict:
        return {"v_star": self.v_star, "u_minus": self.u_minus}

    @property
    def jump(self) -> float:
        return self.u_plus - self.u_minus

    def end_slopes(self, model: ConstitutiveLaw):
        """``(dF/du, dG/du)`` at the left and right end states."""
        v = self.v_star
        return ((model.dF_du(self.u_minus, v), model.dG_du(self.u_minus, v)),
                (model.dF_du(self.u_plus, v), model.dG_du(self.u_plus, v)))
