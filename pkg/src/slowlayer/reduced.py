"""Scalar equations for the layer position and a rescaled-time integrator.

Three right-hand sides of increasing simplification:

* ``V1``: ``-(psi/phi)(xi) (kappa_+ - kappa_-)/(u_+ - u_-)`` with the adjoint
  eigenfunction sampled at the layer,
* ``V2``: the eigenfunction ratio replaced by ``(xi + ell) lam1 / F_u(u_-)``,
* ``V3``: ``V2`` with the flux-level difference replaced by its two-exponential
  leading-order form.

Everything is carried as ``(log|rhs|, sign)`` because the speeds are
exponentially small; the integrator works on the clock ``tau = S t`` where
``S = |rhs(xi0)|``.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
from scipy import integrate

from . import burgers as bg
from .constitutive import ConstitutiveLaw, ShockData
from .errors import DegenerateEigenfunctionError, DomainError
from .manifold import DomainSpec, equilibrium_xi, kappa_table, residual_jump_log

VARIANTS = ("V1", "V2", "V3")


def _log_abs(x):
    return (math.log(abs(x)), math.copysign(1.0, x)) if x != 0 else (-math.inf, 0.0)


# ---------------------------------------------------------------------------
# spectral data along xi
# ---------------------------------------------------------------------------

@dataclass
class SpectralTable:
    """``lambda1(xi)`` and ``(psi/phi)(xi)`` sampled on a xi-grid, interpolated linearly."""
    xi: np.ndarray
    lambda1: np.ndarray
    ratio: np.ndarray
    epsilon: float = float("nan")
    n_cells: int = 0

    def lam(self, x):
        return float(np.interp(x, self.xi, self.lambda1))

    def psi_over_phi(self, x):
        return float(np.interp(x, self.xi, self.ratio))

    @classmethod
    def build(cls, xis, shock, model, domain, **kw):
        from .spectral import adjoint_spectrum
        xis = np.asarray(xis, dtype=float)
        lam, rat = [], []
        for x in xis:
            sol = adjoint_spectrum(float(x), shock, model, domain, **kw)
            lam.append(sol.lambda1_real)
            rat.append(_checked_ratio(sol, float(x)))
        return cls(xis, np.array(lam), np.array(rat), domain.epsilon, domain.n_cells)


def _checked_ratio(sol, xi):
    ph, ps = sol.sample(xi)
    if abs(ph) < 1e-12 * np.max(np.abs(np.real(sol.phi))):
        raise DegenerateEigenfunctionError(f"phi(xi) vanishes at xi={xi}")
    return float(ps / ph)


# ---------------------------------------------------------------------------
# right-hand sides
# ---------------------------------------------------------------------------

def _jump_log(xi, shock, model, domain, fast):
    if fast:
        return kappa_table(shock, model).residual_jump_log(xi, domain)
    return residual_jump_log(xi, shock, model, domain)


def rhs_v1_log(xi, spectral, shock, model, domain, fast=False):
    """``spectral`` is a SpectralSolution at this xi or a SpectralTable."""
    if isinstance(spectral, SpectralTable):
        r = spectral.psi_over_phi(xi)
    else:
        r = _checked_ratio(spectral, xi)
    lk, sk = _jump_log(xi, shock, model, domain, fast)
    lr, sr = _log_abs(r)
    return lr + lk - math.log(shock.jump), -sr * sk


def rhs_v1(xi, spectral, shock, model, domain) -> float:
    la, s = rhs_v1_log(xi, spectral, shock, model, domain)
    return s * math.exp(la) if s != 0 else 0.0


def _lambda_at(lambda1, xi):
    if callable(lambda1):
        return float(lambda1(xi))
    if isinstance(lambda1, SpectralTable):
        return lambda1.lam(xi)
    return float(lambda1)


def rhs_v2_log(xi, lambda1, shock, model, domain, fast=False):
    lam = _lambda_at(lambda1, xi)
    Fm = model.dF_du(shock.u_minus, shock.v_star)
    coef = (xi + domain.ell) * lam / Fm
    lc, sc = _log_abs(coef)
    lk, sk = _jump_log(xi, shock, model, domain, fast)
    return lc + lk - math.log(shock.jump), -sc * sk


def rhs_v2(xi, lambda1, shock, model, domain) -> float:
    la, s = rhs_v2_log(xi, lambda1, shock, model, domain)
    return s * math.exp(la) if s != 0 else 0.0


def rhs_v3_log(xi, lambda1, shock, model, domain):
    """Closed form: only end-state slopes and ``lambda1`` enter."""
    lam = _lambda_at(lambda1, xi)
    ell, eps = domain.ell, domain.epsilon
    (Fm, Gm), (Fp, Gp) = shock.end_slopes(model)
    us, um, up = shock.u_sonic, shock.u_minus, shock.u_plus
    jump = up - um
    # -{ wp e^{-Fp/Gp (ell-xi)/eps} + wm e^{Fm/Gm (xi+ell)/eps} } (xi+ell) lam
    lp = math.log(Fp / -Fm * (up - us) / jump) - Fp / Gp * (ell - xi) / eps   # this term is negative
    lm = math.log((us - um) / jump) + Fm / Gm * (xi + ell) / eps
    # bracket = -e^lp + e^lm
    if lm == lp:
        return -math.inf, 0.0
    if lm > lp:
        lb, sb = lm + math.log(-math.expm1(lp - lm)), 1.0
    else:
        lb, sb = lp + math.log(-math.expm1(lm - lp)), -1.0
    lc, sc = _log_abs((xi + ell) * lam)
    return lb + lc, -sb * sc


def rhs_v3(xi, lambda1, shock, model, domain) -> float:
    la, s = rhs_v3_log(xi, lambda1, shock, model, domain)
    return s * math.exp(la) if s != 0 else 0.0


# ---------------------------------------------------------------------------
# models and integration
# ---------------------------------------------------------------------------

@dataclass
class ReducedModel:
    variant: str
    shock: Optional[ShockData]
    model: Optional[ConstitutiveLaw]
    domain: DomainSpec
    lambda1: Union[float, SpectralTable, Callable, None] = None
    spectral: Optional[SpectralTable] = None
    fast: bool = True   # tabulated kappa (see manifold.KappaTable)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise DomainError(f"unknown variant {self.variant!r}")
        if self.variant == "V1" and self.spectral is None:
            raise DomainError("V1 needs a spectral table (eigenfunction provider)")
        if self.variant in ("V2", "V3") and self.lambda1 is None:
            if self.spectral is None:
                raise DomainError(f"{self.variant} needs lambda1 (scalar or table)")
            self.lambda1 = self.spectral

    @property
    def ell(self):
        return self.domain.ell

    def log_rhs(self, xi):
        args = (self.shock, self.model, self.domain)
        if self.variant == "V1":
            return rhs_v1_log(xi, self.spectral, *args, fast=self.fast)
        if self.variant == "V2":
            return rhs_v2_log(xi, self.lambda1, *args, fast=self.fast)
        return rhs_v3_log(xi, self.lambda1, *args)

    def rhs(self, xi):
        la, s = self.log_rhs(xi)
        return s * math.exp(la) if s != 0 else 0.0

    def equilibrium(self):
        return equilibrium_xi(self.shock, self.model, self.domain)


@dataclass
class BurgersReducedModel:
    """Burgers layer with the exact (or asymptotic) flux-level rhs."""
    setup: bg.BurgersSetup
    asymptotic: bool = False
    variant: str = "burgers"

    @property
    def ell(self):
        return self.setup.ell

    @property
    def domain(self):
        return DomainSpec(self.setup.ell, self.setup.epsilon, 16)

    def log_rhs(self, xi):
        if self.asymptotic:
            return _log_abs(bg.burgers_reduced_rhs_asymptotic(xi, self.setup))
        lm, lp = bg.kappa_log_excess_burgers(xi, self.setup)
        # (h_- - h_+)/(2 w_bar)
        if lm == lp:
            return -math.inf, 0.0
        if lm > lp:
            la, s = lm + math.log(-math.expm1(lp - lm)), 1.0
        else:
            la, s = lp + math.log(-math.expm1(lm - lp)), -1.0
        return la - math.log(2.0 * self.setup.w_bar), s

    def rhs(self, xi):
        la, s = self.log_rhs(xi)
        return s * math.exp(la) if s != 0 else 0.0

    def equilibrium(self):
        return 0.0


@dataclass
class Trajectory:
    times: np.ndarray
    xi: np.ndarray
    source: str
    tau: Optional[np.ndarray] = None
    rhs: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)
    status: str = "ok"

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.xi = np.asarray(self.xi, dtype=float)

    def crossing_time(self, level):
        """First time ``xi`` passes ``level`` (linear interpolation), or ``nan``."""
        d = self.xi - level
        idx = np.nonzero(np.sign(d[1:]) != np.sign(d[:-1]))[0]
        if idx.size == 0:
            return float("nan")
        i = idx[0]
        f = d[i] / (d[i] - d[i + 1])
        return float(self.times[i] + f * (self.times[i + 1] - self.times[i]))

    def to_rows(self):
        tau = self.tau if self.tau is not None else np.full_like(self.times, np.nan)
        rhs = self.rhs if self.rhs is not None else np.full_like(self.times, np.nan)
        return [(t, ta, x, r, self.source) for t, ta, x, r in zip(self.times, tau, self.xi, rhs)]


def integrate_layer(xi0, t_end, rm, n_out=201, rescale=True, rtol=1e-10, atol=1e-12,
                    boundary_margin=None, t_eval=None) -> Trajectory:
    """Integrate ``dxi/dt = rhs(xi)`` from ``xi0`` up to ``t_end``.

    With ``rescale`` the ODE is solved in ``tau = S t`` with ``S = |rhs(xi0)|``
    (from the log form), which keeps the step count independent of eps.
    ``t_end`` may be given as ``("tau", value)`` to prescribe the rescaled
    horizon directly when ``t`` itself would overflow.
    """
    ell = rm.ell
    if not -ell < xi0 < ell:
        raise DomainError(f"xi0={xi0} outside (-{ell}, {ell})")
    margin = (2.0 * rm.domain.epsilon if boundary_margin is None else boundary_margin)
    t0 = time.perf_counter()
    la0, s0 = rm.log_rhs(xi0)
    if s0 == 0 or not np.isfinite(la0):
        # sitting on the equilibrium
        tt = np.linspace(0.0, float(t_end if not isinstance(t_end, tuple) else t_end[1]), n_out)
        return Trajectory(tt, np.full_like(tt, xi0), rm.variant, tau=tt, rhs=np.zeros_like(tt),
                          meta={"log_S": -math.inf, "epsilon": rm.domain.epsilon})
    log_S = float(la0) if rescale else 0.0
    if isinstance(t_end, tuple):
        tau_end = float(t_end[1]) if rescale else float(t_end[1]) * math.exp(-la0)
    else:
        tau_end = float(t_end) * math.exp(log_S)

    def f(_, y):
        la, s = rm.log_rhs(float(y[0]))
        return [s * math.exp(la - log_S)] if s != 0 else [0.0]

    def hit(_, y):
        return min(y[0] + ell, ell - y[0]) - margin
    hit.terminal = True

    if t_eval is not None:
        te = np.asarray(t_eval, dtype=float) * math.exp(log_S)
    else:
        te = np.linspace(0.0, tau_end, n_out)
    sol = integrate.solve_ivp(f, (0.0, tau_end), [xi0], method="RK45", t_eval=te, rtol=rtol,
                              atol=atol, events=hit)
    status = "ok" if sol.status == 0 else ("boundary-hit" if sol.status == 1 else "failed")
    tau = sol.t
    with np.errstate(over="ignore"):
        times = tau * math.exp(-log_S)
    xi = sol.y[0]
    rhs = np.array([rm.rhs(float(x)) for x in xi])
    meta = {"log_S": log_S, "epsilon": rm.domain.epsilon, "wall_time": time.perf_counter() - t0,
            "nfev": sol.nfev}
    return Trajectory(times, xi, rm.variant, tau=tau, rhs=rhs, meta=meta, status=status)
