"""Full solver for the viscous system and for viscous Burgers, plus layer tracking.

Point values live at cell centres ``x_j = -ell + (j + 1/2) dx``; the boundaries
sit on the outer faces.  Each time step is SSP-RK3 whose stages are
forward-Euler substeps split as

* explicit conservative flux update (sixth-order central flux plus a
  fifth-difference dissipation scaled by the local wave speed, or plain
  first-order local Lax-Friedrichs),
* implicit solve of the viscous flux ``eps nu(u) w_x`` in ``w = v/u`` with
  ``u`` already advanced (band matrix, 11 diagonals).

Boundary data enter through 5 ghost cells filled by degree-4 extrapolation,
through the prescribed face value where there is one (``u`` and ``w`` on the
left, ``w`` on the right) and from the interior alone for the outflow
density.  The left mass flux is imposed exactly.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from numba import njit as _njit

from .burgers import BurgersSetup, burgers_profile
from .constitutive import FluidModel, ShockData
from .errors import (DomainError, PositivityError, ResolutionError, TrackingError)
from .manifold import DomainSpec, ManifoldPoint, build_profile
from .reduced import Trajectory

NG = 5
_C6 = np.array([1.0, -8.0, 37.0, 37.0, -8.0, 1.0]) / 60.0
_D5 = np.array([-1.0, 5.0, -10.0, 10.0, -5.0, 1.0])
_I6 = np.array([3.0, -25.0, 150.0, 150.0, -25.0, 3.0]) / 256.0
_DW = np.array([-9.0, 125.0, -2250.0, 2250.0, -125.0, 9.0]) / 1920.0
# conservative correction h - d2h/24 + 3 d4h/640
_GAM = np.array([3.0 / 640.0, -29.0 / 480.0, 1067.0 / 960.0, -29.0 / 480.0, 3.0 / 640.0])

DIRICHLET, FREE = 0, 1
FLUX_CODES = {"central": 0, "llf": 1}

# fastmath without the no-nan/no-inf assumptions, so finiteness checks survive
_FM = {"nsz", "arcp", "contract", "afn", "reassoc"}


def njit(*a, **kw):
    return _njit(*a, cache=True, fastmath=_FM, error_model="numpy", **kw)


# status codes from the kernels
OK, NONPOSITIVE, NONFINITE, MAXSTEPS = 0, 1, 2, 3


# ---------------------------------------------------------------------------
# numba kernels
# ---------------------------------------------------------------------------

def _lagrange(nodes, x):
    w = np.ones(len(nodes))
    for i, a in enumerate(nodes):
        for j, b in enumerate(nodes):
            if i != j:
                w[i] *= (x - b) / (a - b)
    return w


# ghost k (1..NG) from the face value (column 0) and the first GHOST_DEG cells
GHOST_DEG = 4
_WD = np.array([_lagrange([-0.5] + list(range(GHOST_DEG)), -k) for k in range(1, NG + 1)])
_WF = np.array([np.concatenate([[0.0], _lagrange(list(range(GHOST_DEG + 1)), -k)])
                for k in range(1, NG + 1)])


@njit
def _ghosts(q, kl, bl, kr, br):
    """Extend ``q`` by polynomial extrapolation (through the face value for DIRICHLET sides)."""
    n = q.shape[0]
    qe = np.empty(n + 2 * NG)
    for j in range(n):
        qe[j + NG] = q[j]
    for k in range(1, NG + 1):
        W = _WD if kl == DIRICHLET else _WF
        s = W[k - 1, 0] * bl
        for i in range(W.shape[1] - 1):
            s += W[k - 1, i + 1] * q[i]
        qe[NG - k] = s
        W = _WD if kr == DIRICHLET else _WF
        s = W[k - 1, 0] * br
        for i in range(W.shape[1] - 1):
            s += W[k - 1, i + 1] * q[n - 1 - i]
        qe[NG + n - 1 + k] = s
    return qe


@njit
def _conv_flux(qe, fe, speed, mode, art, out):
    """Face fluxes ``out[f]``, f = 0..n, for the conserved ``q`` with physical flux ``f``."""
    nf = out.shape[0]
    for f in range(nf):
        b = f - 3 + NG
        a = max(speed[f - 1 + NG], speed[f + NG])
        if mode == 0:
            c = 0.0
            d = 0.0
            for k in range(6):
                c += _C6[k] * fe[b + k]
                d += _D5[k] * qe[b + k]
            out[f] = c - art * a / 60.0 * d
        else:
            out[f] = 0.5 * (fe[b + 2] + fe[b + 3]) - 0.5 * a * (qe[b + 3] - qe[b + 2])


@njit
def _nu_faces(nue, n):
    """Sixth-order face values of ``nu`` at faces -2..n+2 (index g+2)."""
    out = np.empty(n + 5)
    for g in range(-2, n + 3):
        s = 0.0
        for k in range(6):
            s += _I6[k] * nue[g - 3 + k + NG]
        out[g + 2] = s
    return out


@njit
def _visc_flux(we, nut, n, eps, dx):
    """Conservative viscous flux ``eps nu w_x`` at faces 0..n."""
    hv = np.empty(n + 5)
    for g in range(-2, n + 3):
        s = 0.0
        for k in range(6):
            s += _DW[k] * we[g - 3 + k + NG]
        hv[g + 2] = eps / dx * nut[g + 2] * s
    out = np.empty(n + 1)
    for f in range(n + 1):
        s = 0.0
        for m in range(5):
            s += _GAM[m] * hv[f + m]
        out[f] = s
    return out


# row j of -(H_{j+1} - H_j) collects faces g = j + d, d = -2..3, with weight _GT[d + 2]
_GT = np.zeros(6)
for _d in range(-2, 4):
    _GT[_d + 2] = (_GAM[_d + 2] if -2 <= _d <= 2 else 0.0) - (_GAM[_d + 1] if -1 <= _d <= 3 else 0.0)


@njit
def _visc_matrix(diag, nut, n, eps, dx, dt, wl, wr):
    """Rows of ``diag_j w_j - dt/dx (H_{j+1} - H_j)`` with ghost columns folded."""
    A = np.zeros((n, 11))
    rhs = np.zeros(n)
    sc = dt * eps / (dx * dx)
    for j in range(n):
        A[j, 5] = diag[j]
        edge = j < NG or j >= n - NG
        for d in range(-2, 4):
            g = j + d
            c0 = sc * _GT[d + 2] * nut[g + 2]
            for k in range(6):
                c = g - 3 + k
                coef = c0 * _DW[k]
                if edge and c < 0:
                    k1 = -c - 1
                    rhs[j] -= _WD[k1, 0] * wl * coef
                    for i in range(_WD.shape[1] - 1):
                        A[j, i - j + 5] += _WD[k1, i + 1] * coef
                elif edge and c >= n:
                    k1 = c - n
                    rhs[j] -= _WD[k1, 0] * wr * coef
                    for i in range(_WD.shape[1] - 1):
                        A[j, n - 1 - i - j + 5] += _WD[k1, i + 1] * coef
                else:
                    A[j, c - j + 5] += coef
    return A, rhs


@njit
def _band_lu(A):
    """In-place LU without pivoting, band half-width 5, row storage.

    The diagonal is overwritten by the reciprocal pivots.
    """
    n = A.shape[0]
    for k in range(n - 5):
        r = 1.0 / A[k, 5]
        for ii in range(1, 6):
            i = k + ii
            l = A[i, 5 - ii] * r
            A[i, 5 - ii] = l
            for cc in range(1, 6):
                A[i, 5 - ii + cc] -= l * A[k, 5 + cc]
        A[k, 5] = r
    for k in range(max(n - 5, 0), n):
        r = 1.0 / A[k, 5]
        m = n - k
        for ii in range(1, m):
            i = k + ii
            l = A[i, 5 - ii] * r
            A[i, 5 - ii] = l
            for cc in range(1, m):
                A[i, 5 - ii + cc] -= l * A[k, 5 + cc]
        A[k, 5] = r


@njit
def _band_solve(LU, b):
    n = LU.shape[0]
    y = np.empty(n)
    for i in range(min(5, n)):
        t = b[i]
        for k in range(i):
            t -= LU[i, k - i + 5] * y[k]
        y[i] = t
    # interior rows: the most recent unknown last keeps the dependency chain short
    for i in range(5, n):
        t = b[i] - LU[i, 0] * y[i - 5] - LU[i, 1] * y[i - 4] - LU[i, 2] * y[i - 3] \
            - LU[i, 3] * y[i - 2]
        y[i] = t - LU[i, 4] * y[i - 1]
    for i in range(n - 1, max(n - 6, -1), -1):
        t = y[i]
        for c in range(i + 1, n):
            t -= LU[i, c - i + 5] * y[c]
        y[i] = t * LU[i, 5]
    for i in range(n - 6, -1, -1):
        t = y[i] - LU[i, 10] * y[i + 5] - LU[i, 9] * y[i + 4] - LU[i, 8] * y[i + 3] \
            - LU[i, 7] * y[i + 2]
        y[i] = (t - LU[i, 6] * y[i + 1]) * LU[i, 5]
    return y


@njit
def _pw(x, a):
    """``x**a`` with the common small integer exponents done by multiplication."""
    if a == 1.0:
        return x
    if a == 2.0:
        return x * x
    if a == 0.0:
        return 1.0
    if a == 3.0:
        return x * x * x
    return x ** a


@njit
def _ns_rates(u, v, p, mode, art, dx):
    """Explicit face fluxes (mass, momentum) and the ghosted fields."""
    n = u.shape[0]
    alpha, kp, beta, cnu, eps, uL, wL, wR = p[0], p[1], p[2], p[3], p[4], p[5], p[6], p[7]
    w = v / u
    ue = _ghosts(u, DIRICHLET, uL, FREE, 0.0)
    we = _ghosts(w, DIRICHLET, wL, DIRICHLET, wR)
    ve = ue * we
    Fe = np.empty_like(ue)
    sp = np.empty_like(ue)
    for i in range(ue.shape[0]):
        uu = ue[i]
        if uu <= 0.0:
            uu = 1e-300
        Fe[i] = ve[i] * we[i] + kp * _pw(uu, alpha + 1.0) / (alpha + 1.0)
        sp[i] = abs(we[i]) + math.sqrt(kp * _pw(uu, alpha))
    fm = np.empty(n + 1)
    fq = np.empty(n + 1)
    _conv_flux(ue, ve, sp, mode, art, fm)
    _conv_flux(ve, Fe, sp, mode, art, fq)
    fm[0] = uL * wL
    return fm, fq


@njit
def _ns_substep(u, v, dt, dx, p, mode, art):
    """One forward-Euler IMEX substep; returns (u1, v1, mass_in, mass_out, status)."""
    n = u.shape[0]
    alpha, kp, beta, cnu, eps, uL, wL, wR = p[0], p[1], p[2], p[3], p[4], p[5], p[6], p[7]
    fm, fq = _ns_rates(u, v, p, mode, art, dx)
    u1 = np.empty(n)
    vs = np.empty(n)
    for j in range(n):
        u1[j] = u[j] - dt / dx * (fm[j + 1] - fm[j])
        vs[j] = v[j] - dt / dx * (fq[j + 1] - fq[j])
    for j in range(n):
        if not u1[j] > 0.0:
            return u1, vs, fm[0], fm[n], NONPOSITIVE
    ue = _ghosts(u1, DIRICHLET, uL, FREE, 0.0)
    nue = np.empty_like(ue)
    for i in range(ue.shape[0]):
        nue[i] = cnu * _pw(ue[i], beta)
    nut = _nu_faces(nue, n)
    A, r = _visc_matrix(u1, nut, n, eps, dx, dt, wL, wR)
    _band_lu(A)
    w1 = _band_solve(A, vs + r)
    v1 = u1 * w1
    for j in range(n):
        if not math.isfinite(v1[j]):
            return u1, v1, fm[0], fm[n], NONFINITE
    return u1, v1, fm[0], fm[n], OK


@njit
def _ns_step(u, v, dt, dx, p, mode, art):
    a1, b1, i1, o1, s = _ns_substep(u, v, dt, dx, p, mode, art)
    if s != OK:
        return a1, b1, 0.0, s
    a2, b2, i2, o2, s = _ns_substep(a1, b1, dt, dx, p, mode, art)
    if s != OK:
        return a2, b2, 0.0, s
    a2 = 0.75 * u + 0.25 * a2
    b2 = 0.75 * v + 0.25 * b2
    a3, b3, i3, o3, s = _ns_substep(a2, b2, dt, dx, p, mode, art)
    if s != OK:
        return a3, b3, 0.0, s
    un = u / 3.0 + 2.0 / 3.0 * a3
    vn = v / 3.0 + 2.0 / 3.0 * b3
    # net outflow of mass over the step, RK-weighted
    net = (o1 - i1) / 6.0 + (o2 - i2) / 6.0 + 2.0 * (o3 - i3) / 3.0
    return un, vn, net, OK


@njit
def _ns_speed(u, v, p):
    alpha, kp = p[0], p[1]
    s = 0.0
    for j in range(u.shape[0]):
        c = abs(v[j] / u[j]) + math.sqrt(kp * _pw(u[j], alpha))
        if c > s:
            s = c
    return s


@njit
def _ns_advance(u, v, t, t_end, cfl, dx, p, mode, art, max_steps):
    steps = 0
    outflow = 0.0
    while t < t_end * (1.0 - 1e-15) and steps < max_steps:
        dt = cfl * dx / _ns_speed(u, v, p)
        if t + dt > t_end:
            dt = t_end - t
        un, vn, net, s = _ns_step(u, v, dt, dx, p, mode, art)
        if s != OK:
            return u, v, t, steps, outflow, s
        u, v = un, vn
        outflow += dt * net
        t += dt
        steps += 1
    return u, v, t, steps, outflow, OK if steps < max_steps else MAXSTEPS


# -- Burgers -----------------------------------------------------------------

@njit
def _b_rates(w, wb, mode, art):
    n = w.shape[0]
    we = _ghosts(w, DIRICHLET, wb, DIRICHLET, -wb)
    fe = 0.5 * we * we
    sp = np.abs(we)
    fl = np.empty(n + 1)
    _conv_flux(we, fe, sp, mode, art, fl)
    return fl


@njit
def _b_matrix(n, eps, dx, dt, wb):
    nut = np.ones(n + 5)
    A, r = _visc_matrix(np.ones(n), nut, n, eps, dx, dt, wb, -wb)
    _band_lu(A)
    return A, r


@njit
def _edge_visc(w, wl, wr, eps, dx):
    """Viscous flux ``eps w_x`` at the two boundary faces (same stencil as the matrix)."""
    n = w.shape[0]
    we = _ghosts(w, DIRICHLET, wl, DIRICHLET, wr)
    out = np.zeros(2)
    for e in range(2):
        f = 0 if e == 0 else n
        s = 0.0
        for m in range(5):
            g = f + m - 2
            d = 0.0
            for k in range(6):
                d += _DW[k] * we[g - 3 + k + NG]
            s += _GAM[m] * d
        out[e] = eps / dx * s
    return out


@njit
def _b_substep(w, dt, dx, wb, mode, art, LU, r, eps):
    fl = _b_rates(w, wb, mode, art)
    n = w.shape[0]
    ws = np.empty(n)
    for j in range(n):
        ws[j] = w[j] - dt / dx * (fl[j + 1] - fl[j])
    w1 = _band_solve(LU, ws + r)
    h = _edge_visc(w1, wb, -wb, eps, dx)
    return w1, fl[0] - h[0], fl[n] - h[1]


@njit
def _b_step(w, dt, dx, wb, mode, art, LU, r, eps):
    a1, i1, o1 = _b_substep(w, dt, dx, wb, mode, art, LU, r, eps)
    a2, i2, o2 = _b_substep(a1, dt, dx, wb, mode, art, LU, r, eps)
    a2 = 0.75 * w + 0.25 * a2
    a3, i3, o3 = _b_substep(a2, dt, dx, wb, mode, art, LU, r, eps)
    net = (o1 - i1) / 6.0 + (o2 - i2) / 6.0 + 2.0 * (o3 - i3) / 3.0
    return w / 3.0 + 2.0 / 3.0 * a3, net


@njit
def _b_advance(w, t, t_end, dt0, dx, eps, wb, mode, art, max_steps):
    """Fixed step ``dt0`` (the last step is shortened to land on ``t_end``)."""
    n = w.shape[0]
    LU, r = _b_matrix(n, eps, dx, dt0, wb)
    steps = 0
    outflow = 0.0
    while t < t_end * (1.0 - 1e-15) and steps < max_steps:
        dt = dt0
        if t + dt > t_end:
            dt = t_end - t
            LU, r = _b_matrix(n, eps, dx, dt, wb)
        w, net = _b_step(w, dt, dx, wb, mode, art, LU, r, eps)
        for j in range(n):
            if not math.isfinite(w[j]):
                return w, t, steps, outflow, NONFINITE
        outflow += dt * net
        t += dt
        steps += 1
    return w, t, steps, outflow, OK if steps < max_steps else MAXSTEPS


# ---------------------------------------------------------------------------
# Python-facing types
# ---------------------------------------------------------------------------

@dataclass
class SchemeConfig:
    cfl: float = 0.8
    flux: str = "central"       # "central" (with dissipation `artificial`) or "llf"
    artificial: float = 1.0     # scales the fifth-difference dissipation
    viscous: str = "implicit"
    cadence: float = 1.0
    max_steps: int = 50_000_000

    def __post_init__(self):
        if not 0.0 < self.cfl < 1.0:
            raise DomainError(f"cfl must lie in (0, 1), got {self.cfl}")
        if self.flux not in FLUX_CODES:
            raise DomainError(f"unknown flux scheme {self.flux!r}")
        if self.viscous != "implicit":
            raise DomainError("only the implicit viscous solve is available")
        if self.artificial < 0 or self.cadence <= 0:
            raise DomainError("artificial must be >= 0 and cadence > 0")

    @classmethod
    def from_config(cls, cfg):
        kw = {}
        for k, conv in (("cfl", float), ("flux", str), ("artificial", float),
                        ("viscous", str), ("cadence", float), ("max_steps", int)):
            if k in cfg:
                kw[k] = conv(cfg[k])
        return cls(**kw)


@dataclass
class NSProblem:
    shock: ShockData
    model: FluidModel
    domain: DomainSpec
    kind: str = "ns"

    def params(self):
        m, s = self.model, self.shock
        if not isinstance(m, FluidModel):
            raise DomainError("the PDE solver needs a power-law FluidModel")
        return np.array([m.alpha, m.kappa_p, m.beta, m.c_nu, self.domain.epsilon,
                         s.u_minus, s.w_minus, s.w_plus])

    @property
    def level(self):
        return self.shock.u_sonic


@dataclass
class BurgersProblem:
    setup: BurgersSetup
    n_cells: int
    kind: str = "burgers"

    @property
    def domain(self):
        return DomainSpec(self.setup.ell, self.setup.epsilon, self.n_cells)

    @property
    def level(self):
        return 0.0


@dataclass
class FieldState:
    t: float
    x: np.ndarray
    u: np.ndarray
    v: Optional[np.ndarray] = None   # None for Burgers (u holds w)
    outflow: float = 0.0             # time-integrated net boundary mass outflow
    steps: int = 0

    @property
    def n_cells(self):
        return self.x.shape[0]

    @property
    def dx(self):
        return self.x[1] - self.x[0]

    def mass(self):
        return float(np.sum(self.u) * self.dx)

    def copy(self):
        return replace(self, x=self.x.copy(), u=self.u.copy(),
                       v=None if self.v is None else self.v.copy())


def cell_centres(ell, n):
    dx = 2.0 * ell / n
    return -ell + (np.arange(n) + 0.5) * dx


def _mollify(q, width, dx):
    if width <= 0:
        return q
    from scipy.ndimage import gaussian_filter1d
    return gaussian_filter1d(q, width / dx, mode="nearest")


def init_from_manifold(point: ManifoldPoint, shock, model, domain: DomainSpec,
                       mollify_width=0.0) -> FieldState:
    """Sample ``W(.; xi)`` at the cell centres (re-using ``point``'s flux levels)."""
    x = cell_centres(domain.ell, domain.n_cells)
    if point.grid.shape == x.shape and np.allclose(point.grid, x, rtol=0, atol=1e-14):
        U = point.U.copy()
    else:
        U = build_profile(point.xi, shock, model, domain, grid=x, rtol=1e-13,
                          log_h=(point.log_h_minus, point.log_h_plus)).U
    U = _mollify(U, mollify_width, x[1] - x[0])
    return FieldState(0.0, x, U, np.full_like(U, shock.v_star))


def profile_state(xi, shock, model, domain, mollify_width=0.0) -> FieldState:
    x = cell_centres(domain.ell, domain.n_cells)
    p = build_profile(xi, shock, model, domain, grid=x, rtol=1e-13)
    return init_from_manifold(p, shock, model, domain, mollify_width)


def init_burgers(xi, setup: BurgersSetup, n_cells, mollify_width=0.0) -> FieldState:
    x = cell_centres(setup.ell, n_cells)
    w, _ = burgers_profile(x, xi, setup)
    return FieldState(0.0, x, _mollify(w, mollify_width, x[1] - x[0]))


def check_resolution(problem, scheme: SchemeConfig):
    """Layer must have >= 8 cells per eps and scheme dissipation <= 0.2 eps nu_min."""
    d = problem.domain
    dx = 2.0 * d.ell / d.n_cells
    if problem.kind == "ns":
        m, s = problem.model, problem.shock
        nu_min = float(min(m.viscosity(s.u_minus), m.viscosity(s.u_plus)))
        amax = s.w_minus + float(m.sound_speed(s.u_plus))
    else:
        nu_min, amax = 1.0, problem.setup.w_bar
    eps = d.epsilon
    if eps / dx < 8.0:
        raise ResolutionError(f"eps/dx = {eps / dx:.2f} < 8 cells per layer width")
    if scheme.flux == "llf":
        num = 0.5 * amax * dx
    else:
        # hyperviscosity seen at the layer wavenumber 1/eps
        num = scheme.artificial * amax * dx / 60.0 * (dx / eps) ** 4
    if num > 0.2 * eps * nu_min:
        raise ResolutionError(f"numerical viscosity {num:.3g} exceeds 0.2*eps*nu_min "
                              f"= {0.2 * eps * nu_min:.3g}")
    return num


def _raise_status(status, state):
    if status == NONPOSITIVE:
        raise PositivityError(f"density became non-positive near t={state.t:.6g}")
    if status == NONFINITE:
        raise PositivityError(f"non-finite values near t={state.t:.6g}")
    if status == MAXSTEPS:
        raise DomainError("step budget exhausted")


def step(state: FieldState, dt, scheme: SchemeConfig, problem) -> FieldState:
    """One SSP-RK3 step of size ``dt`` (caller is responsible for the CFL bound)."""
    mode = FLUX_CODES[scheme.flux]
    dx = state.dx
    if problem.kind == "ns":
        p = problem.params()
        un, vn, net, s = _ns_step(state.u, state.v, dt, dx, p, mode, scheme.artificial)
        new = FieldState(state.t + dt, state.x, un, vn, state.outflow + dt * net, state.steps + 1)
    else:
        st = problem.setup
        LU, r = _b_matrix(state.n_cells, st.epsilon, dx, dt, st.w_bar)
        wn, net = _b_step(state.u, dt, dx, st.w_bar, mode, scheme.artificial, LU, r, st.epsilon)
        s = OK if np.all(np.isfinite(wn)) else NONFINITE
        new = FieldState(state.t + dt, state.x, wn, None, state.outflow + dt * net, state.steps + 1)
    _raise_status(s, new)
    return new


def stable_dt(state: FieldState, scheme: SchemeConfig, problem) -> float:
    if problem.kind == "ns":
        return scheme.cfl * state.dx / _ns_speed(state.u, state.v, problem.params())
    return scheme.cfl * state.dx / max(problem.setup.w_bar, float(np.max(np.abs(state.u))))


def advance(state: FieldState, t_end, scheme: SchemeConfig, problem) -> FieldState:
    """Step from ``state.t`` to ``t_end`` with the CFL-limited step."""
    mode = FLUX_CODES[scheme.flux]
    if problem.kind == "ns":
        u, v, t, n, out, s = _ns_advance(state.u, state.v, state.t, float(t_end), scheme.cfl,
                                         state.dx, problem.params(), mode, scheme.artificial,
                                         scheme.max_steps)
        new = FieldState(t, state.x, u, v, state.outflow + out, state.steps + n)
    else:
        st = problem.setup
        dt0 = stable_dt(state, scheme, problem)
        w, t, n, out, s = _b_advance(state.u, state.t, float(t_end), dt0, state.dx, st.epsilon,
                                     st.w_bar, mode, scheme.artificial, scheme.max_steps)
        new = FieldState(t, state.x, w, None, state.outflow + out, state.steps + n)
    _raise_status(s, new)
    return new


def spatial_residual(state: FieldState, problem, scheme: Optional[SchemeConfig] = None):
    """Semi-discrete time derivative of the scheme; ``(du/dt, dv/dt)`` or ``dw/dt``."""
    scheme = scheme or SchemeConfig()
    mode = FLUX_CODES[scheme.flux]
    dx = state.dx
    n = state.n_cells
    if problem.kind == "ns":
        p = problem.params()
        fm, fq = _ns_rates(state.u, state.v, p, mode, scheme.artificial, dx)
        ue = _ghosts(state.u, DIRICHLET, p[5], FREE, 0.0)
        we = _ghosts(state.v / state.u, DIRICHLET, p[6], DIRICHLET, p[7])
        nut = _nu_faces(p[3] * ue ** p[2], n)
        H = _visc_flux(we, nut, n, p[4], dx)
        return -np.diff(fm) / dx, -np.diff(fq - H) / dx
    st = problem.setup
    fl = _b_rates(state.u, st.w_bar, mode, scheme.artificial)
    we = _ghosts(state.u, DIRICHLET, st.w_bar, DIRICHLET, -st.w_bar)
    H = _visc_flux(we, np.ones(n + 5), n, st.epsilon, dx)
    return -np.diff(fl - H) / dx


def boundary_residuals(state: FieldState, problem):
    """Face values of the boundary relations (zero up to rounding by construction)."""
    if problem.kind != "ns":
        st = problem.setup
        we = _ghosts(state.u, DIRICHLET, st.w_bar, DIRICHLET, -st.w_bar)
        n = state.n_cells
        wl = float(_I6 @ we[NG - 3:NG + 3])
        wr = float(_I6 @ we[NG + n - 3:NG + n + 3])
        return {"w_left": wl - st.w_bar, "w_right": wr + st.w_bar}
    p = problem.params()
    n = state.n_cells
    ue = _ghosts(state.u, DIRICHLET, p[5], FREE, 0.0)
    we = _ghosts(state.v / state.u, DIRICHLET, p[6], DIRICHLET, p[7])
    ve = ue * we
    face = lambda q, f: float(_I6 @ q[f - 3 + NG:f + 3 + NG])
    uL, vL, uR, vR = face(ue, 0), face(ve, 0), face(ue, n), face(ve, n)
    s = problem.shock
    return {"left_w": s.w_minus * uL - vL, "right_w": s.w_plus * uR - vR,
            "left_v": vL - s.u_minus * s.w_minus}


# ---------------------------------------------------------------------------
# tracking and runs
# ---------------------------------------------------------------------------

def track_layer(state: FieldState, level) -> float:
    """Unique crossing of ``level`` by the first field, linearly interpolated."""
    q = state.u - level
    sgn = np.sign(q)
    nz = np.nonzero(sgn)[0]
    if nz.size == 0:
        raise TrackingError("field identically at the tracking level")
    s = sgn[nz]
    flips = np.nonzero(s[1:] != s[:-1])[0]
    if flips.size != 1:
        raise TrackingError(f"expected one crossing of {level}, found {flips.size}")
    i, k = nz[flips[0]], nz[flips[0] + 1]
    x = state.x
    return float(x[i] + q[i] / (q[i] - q[k]) * (x[k] - x[i]))


@dataclass
class RunResult:
    trajectory: Trajectory
    state: FieldState
    snapshots: list = field(default_factory=list)
    mass_defect: float = 0.0


def run(state0: FieldState, t_end, scheme: SchemeConfig, problem, sampler=None,
        snapshot_times=(), stop=None) -> RunResult:
    """Integrate to ``t_end`` recording ``xi`` every ``scheme.cadence``.

    ``sampler(state) -> float`` defaults to ``track_layer``; ``stop(t, xi)``
    may end the run early (e.g. once the layer has passed a level).
    """
    check_resolution(problem, scheme)
    sampler = sampler or (lambda s: track_layer(s, problem.level))
    t0 = time.perf_counter()
    st = state0.copy()
    m0 = st.mass()
    times, xis = [st.t], [sampler(st)]
    snaps = []
    pending = sorted(float(s) for s in snapshot_times)
    n_out = int(math.floor((t_end - st.t) / scheme.cadence + 1e-9))
    targets = [st.t + scheme.cadence * (k + 1) for k in range(n_out)]
    if not targets or targets[-1] < t_end - 1e-12:
        targets.append(float(t_end))
    for tt in targets:
        while pending and pending[0] <= tt:
            st = advance(st, pending.pop(0), scheme, problem)
            snaps.append(st.copy())
        st = advance(st, tt, scheme, problem)
        times.append(st.t)
        xis.append(sampler(st))
        if stop is not None and stop(st.t, xis[-1]):
            break
    traj = Trajectory(np.array(times), np.array(xis), "pde",
                      meta={"epsilon": problem.domain.epsilon, "n_cells": st.n_cells,
                            "wall_time": time.perf_counter() - t0, "steps": st.steps,
                            "flux": scheme.flux, "cfl": scheme.cfl})
    # mass balance: change in mass plus integrated outflow
    defect = (st.mass() - m0) + (st.outflow - state0.outflow)
    return RunResult(traj, st, snaps, defect)


def ns_problem(shock, model, domain) -> NSProblem:
    return NSProblem(shock, model, domain)


def burgers_problem(setup, n_cells) -> BurgersProblem:
    return BurgersProblem(setup, n_cells)


def manifold_distance(state: FieldState, problem, bracket=None):
    """Best-fit ``xi`` and the sup-distance of the state to ``W(.; xi)``."""
    from scipy import optimize
    x = state.x
    if problem.kind == "burgers":
        st = problem.setup
        prof = lambda xi: burgers_profile(x, xi, st)[0]
    else:
        prof = lambda xi: build_profile(xi, problem.shock, problem.model, problem.domain,
                                        grid=x, rtol=1e-10).U
    xi0 = track_layer(state, problem.level)
    ell = problem.domain.ell
    lo, hi = bracket or (max(-ell + 0.05, xi0 - 0.1), min(ell - 0.05, xi0 + 0.1))
    obj = lambda xi: float(np.sum((state.u - prof(xi)) ** 2))
    res = optimize.minimize_scalar(obj, bounds=(lo, hi), method="bounded",
                                   options={"xatol": 1e-8})
    return float(res.x), float(np.max(np.abs(state.u - prof(res.x))))
