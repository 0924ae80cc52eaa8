"""Linearization about a manifold profile and its leading adjoint eigenpair.

Perturbations ``(u, v)`` of ``(U(x), v*)`` obey

    u_t = -v_x
    v_t = (a1 u + a2 v + b1 u_x + b2 v_x)_x

with ``v(-ell) = 0`` and ``U v - v* u = 0`` at both ends.  Both fields sit
on the grid nodes.  The mass equation is box-averaged over each cell and
the momentum flux is evaluated compactly at cell centres, which gives the
pencil ``A z = lam B z`` with ``B`` invertible, i.e. ``L = B^-1 A``.  A
plain centred scheme (or a staggered one) cannot see grid-scale density
oscillations through the viscous term and produces spurious modes.

The adjoint is ``L* = W^-1 L^T W`` under the trapezoid inner product, so the
pairing identity and equality of spectra hold to rounding.  ``psi = 0`` at
both ends is built in; ``phi(ell) = 0`` is only the natural condition of
the transposed rows.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
from scipy import integrate
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigs, splu

from .constitutive import ConstitutiveLaw, ShockData
from .errors import DomainError, ResolutionError, SlowLayerError
from .manifold import DomainSpec, ManifoldPoint, build_profile

MIN_POINTS_PER_EPS = 8
DENSE_MAX = 400


# ---------------------------------------------------------------------------
# coefficients and assembly
# ---------------------------------------------------------------------------

@dataclass
class LinearizedCoefficients:
    x: np.ndarray          # cell centres
    U: np.ndarray
    rho: np.ndarray
    a1: np.ndarray
    a2: np.ndarray
    b1: np.ndarray
    b2: np.ndarray
    epsilon: float
    dx: float
    w_right: float         # v*/U(ell), right boundary relation v = w_right*u


@dataclass
class DiscreteOperator:
    """``L = B^-1 A`` on unknowns ``(u_1..u_N, v_1..v_{N-1})``."""
    A: sp.csr_matrix
    B: sp.csr_matrix
    coeffs: LinearizedCoefficients
    adjoint: bool = False
    _luB: object = field(default=None, repr=False)

    @property
    def n_cells(self):
        return self.coeffs.x.size

    @property
    def size(self):
        return self.A.shape[0]

    @property
    def nodes(self):
        c = self.coeffs
        return np.concatenate([c.x - 0.5 * c.dx, [c.x[-1] + 0.5 * c.dx]])

    @property
    def weights(self):
        n, dx = self.n_cells, self.coeffs.dx
        w = np.full(self.size, dx)
        w[n - 1] = 0.5 * dx
        return w

    def _solve_B(self, y, transpose=False):
        if self._luB is None:
            self._luB = splu(self.B.tocsc())
        return self._luB.solve(y, trans="T" if transpose else "N")

    def apply_L(self, z):
        return self._solve_B(self.A @ z)

    def apply_Lstar(self, w):
        W = self.weights
        return (self.A.T @ self._solve_B(W * w, transpose=True)) / W

    def apply(self, z):
        return self.apply_Lstar(z) if self.adjoint else self.apply_L(z)

    def dense(self):
        L = la.solve(self.B.toarray(), self.A.toarray())
        if self.adjoint:
            W = self.weights
            return (L.T * W[None, :]) / W[:, None]
        return L

    def split(self, z):
        """Stacked vector -> (u or phi on all nodes, v or psi on all nodes)."""
        n = self.n_cells
        a = np.zeros(n + 1, dtype=z.dtype)
        b = np.zeros(n + 1, dtype=z.dtype)
        a[1:] = z[:n]
        b[1:n] = z[n:]
        if self.adjoint:
            # phi(-ell) is not an unknown; report its extrapolated value
            a[0] = 2.0 * a[1] - a[2]
        else:
            b[n] = self.coeffs.w_right * a[n]
        return a, b

    def stack(self, a, b):
        n = self.n_cells
        return np.concatenate([a[1:], b[1:n]])

    def pairing(self, a, b):
        return float(np.sum(self.weights * a * b))


def cell_centres(domain: DomainSpec):
    x = domain.nodes()
    return 0.5 * (x[1:] + x[:-1])


def operator_point(xi, shock, model, domain: DomainSpec) -> ManifoldPoint:
    """Profile sampled at the cell centres (what the operator needs)."""
    return build_profile(xi, shock, model, domain, grid=cell_centres(domain))


def constant_point(u, shock: ShockData, domain: DomainSpec) -> ManifoldPoint:
    x = cell_centres(domain)
    U = np.full_like(x, float(u))
    return ManifoldPoint(xi=0.0, kappa_minus=np.nan, kappa_plus=np.nan, log_h_minus=np.nan,
                         log_h_plus=np.nan, grid=x, U=U, V=np.full_like(x, shock.v_star),
                         dUdx=np.zeros_like(x), log_dist=np.zeros_like(x), epsilon=domain.epsilon)


def linearized_coefficients(point: ManifoldPoint, model: ConstitutiveLaw, shock: ShockData,
                            u_right=None) -> LinearizedCoefficients:
    x, U, dU, eps = point.grid, point.U, point.dUdx, point.epsilon
    v = shock.v_star
    dx = x[1] - x[0]
    if not np.allclose(np.diff(x), dx, rtol=1e-9, atol=0):
        raise DomainError("operator needs a uniform grid of cell centres")
    if eps / dx < MIN_POINTS_PER_EPS:
        raise ResolutionError(f"eps/dx = {eps / dx:.2f} < {MIN_POINTS_PER_EPS}: layer under-resolved")
    if eps / dx < 2 * MIN_POINTS_PER_EPS:
        warnings.warn(f"only {eps / dx:.1f} points per eps", RuntimeWarning)
    Gu = model.dG_du(U, v)
    rho = -model.F(U, v) - eps * Gu * dU
    a1 = -model.dF_du(U, v) - eps * model.d2G_du2(U, v) * dU
    a2 = -model.dF_dv(U, v) - eps * model.d2G_dudv(U, v) * dU
    b1 = -eps * Gu
    b2 = eps * model.viscosity(U) / U
    ur = shock.u_plus if u_right is None else u_right
    return LinearizedCoefficients(x=x, U=U, rho=rho, a1=a1, a2=a2, b1=b1, b2=b2, epsilon=eps,
                                  dx=dx, w_right=v / ur)


def _assemble(c: LinearizedCoefficients):
    n, dx = c.x.size, c.dx
    size = 2 * n - 1

    # nodal values as sparse rows over the unknowns
    def u_sym(j):
        return {} if j == 0 else {j - 1: 1.0}          # u(-ell) = 0

    def v_sym(j):
        if j == 0:
            return {}                                   # v(-ell) = 0
        if j == n:
            return {n - 1: c.w_right}                   # v = (v*/U) u at ell
        return {n + j - 1: 1.0}

    def add(dst, src, s):
        for k, val in src.items():
            dst[k] = dst.get(k, 0.0) + s * val

    flux = []
    for i in range(n):
        r = {}
        for j, wt in ((i, 0.5), (i + 1, 0.5)):
            add(r, u_sym(j), wt * c.a1[i])
            add(r, v_sym(j), wt * c.a2[i])
        add(r, u_sym(i + 1), c.b1[i] / dx)
        add(r, u_sym(i), -c.b1[i] / dx)
        add(r, v_sym(i + 1), c.b2[i] / dx)
        add(r, v_sym(i), -c.b2[i] / dx)
        flux.append(r)

    Arows, Brows = [], []
    for i in range(n):
        a, b = {}, {}
        add(a, v_sym(i + 1), -1.0 / dx)
        add(a, v_sym(i), 1.0 / dx)
        add(b, u_sym(i), 0.5)
        add(b, u_sym(i + 1), 0.5)
        Arows.append(a)
        Brows.append(b)
    for j in range(1, n):
        a = {}
        add(a, flux[j], 1.0 / dx)
        add(a, flux[j - 1], -1.0 / dx)
        Arows.append(a)
        Brows.append({n + j - 1: 1.0})

    def to_csr(R):
        rows, cols, vals = [], [], []
        for i, d in enumerate(R):
            for k, val in d.items():
                if val != 0.0:
                    rows.append(i)
                    cols.append(k)
                    vals.append(val)
        return sp.csr_matrix((vals, (rows, cols)), shape=(size, size))

    return to_csr(Arows), to_csr(Brows)


def assemble_linearized(point: ManifoldPoint, model, shock, **kw) -> DiscreteOperator:
    c = linearized_coefficients(point, model, shock, **kw)
    A, B = _assemble(c)
    return DiscreteOperator(A, B, c, adjoint=False)


def assemble_adjoint(point: ManifoldPoint, model, shock, **kw) -> DiscreteOperator:
    c = linearized_coefficients(point, model, shock, **kw)
    A, B = _assemble(c)
    return DiscreteOperator(A, B, c, adjoint=True)


# ---------------------------------------------------------------------------
# eigen-solver
# ---------------------------------------------------------------------------

@dataclass
class SpectralSolution:
    lambda1: complex
    phi: np.ndarray        # nodes
    psi: np.ndarray        # nodes, zero at both ends
    residual_norm: float
    gap: float
    is_real: bool
    is_simple: bool
    centres: np.ndarray
    nodes: np.ndarray
    epsilon: float
    n_cells: int
    others: np.ndarray = field(default_factory=lambda: np.zeros(0))
    method: str = "shift-invert"

    @property
    def lambda1_real(self) -> float:
        return float(np.real(self.lambda1))

    def sample(self, x, kind="linear"):
        """``(phi(x), psi(x))`` by linear (default) or cubic interpolation."""
        if kind == "cubic":
            from scipy.interpolate import CubicSpline
            return (float(CubicSpline(self.nodes, np.real(self.phi))(x)),
                    float(CubicSpline(self.nodes, np.real(self.psi))(x)))
        ph = np.interp(x, self.nodes, np.real(self.phi))
        ps = np.interp(x, self.nodes, np.real(self.psi))
        return ph, ps

    def ratio_at(self, x, kind="linear") -> float:
        ph, ps = self.sample(x, kind)
        return float(ps / ph)


def _eig_nearest_zero(op: DiscreteOperator, k, dense, left):
    """Eigenvalues of the pencil ``(A, B)`` closest to zero with eigenvectors.

    ``left=True`` returns left eigenvectors ``y`` (``y^T A = lam y^T B``).
    """
    A, B = op.A, op.B
    if left:
        A, B = A.T, B.T
    if dense:
        w, V = la.eig(A.toarray(), B.toarray())
        ok = np.isfinite(w)
        w, V = w[ok], V[:, ok]
        order = np.argsort(np.abs(w))[:k]
        return w[order], V[:, order]
    lu = splu(A.tocsc())
    Bc = B.tocsr()
    inv = LinearOperator(A.shape, matvec=lambda x: lu.solve(np.asarray(Bc @ x, dtype=float))
                         if np.isrealobj(x) else lu.solve(np.real(Bc @ x)) + 1j * lu.solve(np.imag(Bc @ x)),
                         dtype=float)
    try:
        theta, V = eigs(inv, k=k, which="LM", tol=1e-14, maxiter=10000)
    except ArpackNoConvergence as exc:
        raise SlowLayerError(f"shift-invert iteration did not converge: {exc}") from exc
    w = 1.0 / theta
    order = np.argsort(np.abs(w))
    return w[order], V[:, order]


def leading_eigen(op: DiscreteOperator, k=3, dense=None, tol=1e-8) -> SpectralSolution:
    """Eigenvalue of smallest modulus and its eigenvector.

    For an adjoint operator the eigenvector is ``omega = W^-1 B^T y`` with
    ``y`` the left eigenvector of the pencil, so ``L* omega = lam omega``.
    A complex leading eigenvalue is returned as such and flagged through
    ``is_real``; it is never silently dropped.
    """
    size = op.size
    if dense is None:
        dense = size <= DENSE_MAX
    if not np.all(np.isfinite(op.A.data)):
        raise SlowLayerError("operator has non-finite entries")
    if np.max(np.abs(op.coeffs.b2)) == 0.0:
        raise SlowLayerError("no viscous rows: eigenproblem is first-order transport, refusing to solve")
    w, V = _eig_nearest_zero(op, min(k, size - 2), dense, left=op.adjoint)
    lam = w[0]
    z = V[:, 0]
    if op.adjoint:
        z = (op.B.T @ z) / op.weights
    j = np.argmax(np.abs(z))
    z = z * (abs(z[j]) / z[j])
    z = z / np.linalg.norm(z)
    res = np.linalg.norm(op.apply(np.real(z)) + 1j * op.apply(np.imag(z)) - lam * z)
    scale = max(abs(lam), 1e-300)
    gap = float(np.min(np.abs(w[1:] - lam))) if w.size > 1 else math.inf
    is_real = abs(lam.imag) <= 1e-8 * abs(lam.real) or abs(lam.imag) < 1e-14
    if is_real:
        lam = complex(lam.real, 0.0)
        z = np.real(z)
    a, b = op.split(z)
    sol = SpectralSolution(lambda1=lam, phi=a, psi=b, residual_norm=float(res),
                           gap=gap, is_real=bool(is_real),
                           is_simple=bool(gap > 10 * tol * max(scale, 1.0)),
                           centres=op.coeffs.x, nodes=op.nodes, epsilon=op.coeffs.epsilon,
                           n_cells=op.n_cells, others=w[1:], method="dense" if dense else "shift-invert")
    if not sol.is_real:
        warnings.warn(f"leading eigenvalue is complex: {lam}", RuntimeWarning)
    return sol


def adjoint_spectrum(xi, shock, model, domain, **kw) -> SpectralSolution:
    pt = operator_point(xi, shock, model, domain)
    return leading_eigen(assemble_adjoint(pt, model, shock), **kw)


def eigen_residual(op: DiscreteOperator, sol: SpectralSolution) -> float:
    z = op.stack(sol.phi, sol.psi)
    r = op.apply(np.real(z)) + 1j * op.apply(np.imag(z)) - sol.lambda1 * z
    return float(np.linalg.norm(r) / np.linalg.norm(z))


# ---------------------------------------------------------------------------
# constant-state asymptotics
# ---------------------------------------------------------------------------

@dataclass
class WaveCoefficients:
    u: float
    C_minus: float
    C_plus: float
    mu0: complex = np.nan
    mu_minus: complex = np.nan
    mu_plus: complex = np.nan
    confident: bool = True


def wave_coefficients(u, shock, model) -> WaveCoefficients:
    """Roots of ``F_u C**2 + 2 (v*/u) C - 1 = 0``: ``C = 1/(v*/u -+ c)``."""
    if u <= 0:
        raise DomainError("u must be positive")
    w = shock.v_star / u
    c = math.sqrt(model.dpressure(u))
    if abs(w - c) <= 1e-12 * max(w, c):
        raise DomainError("sonic state: C_minus has a pole")
    return WaveCoefficients(u=float(u), C_minus=1.0 / (w - c), C_plus=1.0 / (w + c))


def cubic_coefficients(lam, u, shock, model, epsilon):
    """``eps det(A - mu I)`` as polynomial coefficients, highest degree first."""
    v = shock.v_star
    Fu = model.dF_du(u, v)
    Gu = model.dG_du(u, v)
    nu = model.viscosity(u)
    return np.array([-epsilon, Fu / Gu + epsilon * lam * u / v, 2.0 * lam * u / nu, -lam * lam / Gu],
                    dtype=complex)


def first_order_matrix(lam, u, shock, model, epsilon, dUdx=0.0):
    """Matrix of the first-order form of the adjoint problem at constant ``U = u``."""
    v = shock.v_star
    Fu = model.dF_du(u, v)
    Gu = model.dG_du(u, v)
    a13 = -(u / v) * (v * v / (u * u) + model.dpressure(u)) - epsilon * model.dviscosity(u) / u * dUdx
    return np.array([[lam * u / v, lam, a13],
                     [0.0, 0.0, 1.0],
                     [-lam / (epsilon * Gu), 0.0, Fu / (epsilon * Gu)]], dtype=complex)


def characteristic_roots(lam, u, shock, model, epsilon) -> WaveCoefficients:
    """Cubic roots labelled against ``mu0 ~ F_u/(eps G_u)`` and ``mu_pm ~ C_pm lam``."""
    if epsilon <= 0:
        raise DomainError("epsilon must be positive")
    wc = wave_coefficients(u, shock, model)
    v = shock.v_star
    roots = np.roots(cubic_coefficients(lam, u, shock, model, epsilon))
    if roots.size < 3:
        roots = np.concatenate([roots, np.zeros(3 - roots.size)])
    target0 = model.dF_du(u, v) / (epsilon * model.dG_du(u, v))
    i0 = int(np.argmin(np.abs(roots - target0)))
    rest = [r for k, r in enumerate(roots) if k != i0]
    tm, tp = wc.C_minus * lam, wc.C_plus * lam
    if abs(rest[0] - tm) + abs(rest[1] - tp) <= abs(rest[0] - tp) + abs(rest[1] - tm):
        mm, mp = rest
    else:
        mp, mm = rest
    small = max(abs(mm), abs(mp))
    confident = abs(roots[i0]) > 10.0 * small
    wc.mu0, wc.mu_minus, wc.mu_plus, wc.confident = roots[i0], mm, mp, bool(confident)
    if not confident:
        warnings.warn("eps too large for the asymptotic root ordering", RuntimeWarning)
    return wc


def projection_matrices(lam, u, shock, model):
    """Leading-order spectral projections ``(P0, P_minus, P_plus)``."""
    Fu = model.dF_du(u, shock.v_star)
    wc = wave_coefficients(u, shock, model)
    P0 = np.array([[0, 0, 0], [0, 0, 0], [-lam, 0, Fu]], dtype=float) / Fu
    out = [P0]
    for C in (wc.C_minus, wc.C_plus):
        out.append(np.array([[C * C * Fu, C * Fu, 0], [C, 1, 0], [C * C * lam, C * lam, 0]],
                            dtype=float) / (1 + C * C * Fu))
    return tuple(out)


def adjoint_ratio_asymptotic(xi, lambda1, shock, model, domain, full=False):
    """Leading-order ``psi(xi)/phi(xi) ~ (xi + ell) lambda1 / F_u(u_minus)``.

    With ``full=True`` also returns the two-exponential expressions for
    ``phi(xi)/phi(0)`` and ``psi(xi)/phi(0)`` as a dict.
    """
    ell = domain.ell
    Fu = model.dF_du(shock.u_minus, shock.v_star)
    ratio = (xi + ell) * lambda1 / Fu
    wc = wave_coefficients(shock.u_minus, shock, model)
    if abs(lambda1) * (xi + ell) * max(abs(wc.C_minus), abs(wc.C_plus)) > 0.1:
        warnings.warn("lambda1 not small: asymptotic ratio outside its range", RuntimeWarning)
    if not full:
        return ratio
    L = xi + ell
    Cm, Cp = wc.C_minus, wc.C_plus
    em, ep = np.exp(Cm * lambda1 * L), np.exp(Cp * lambda1 * L)
    phi = Fu * (Cm * Cm / (1 + Cm * Cm * Fu) * em + Cp * Cp / (1 + Cp * Cp * Fu) * ep)
    psi = Cm / (1 + Cm * Cm * Fu) * em + Cp / (1 + Cp * Cp * Fu) * ep
    return ratio, {"phi_over_phi0": phi, "psi_over_phi0": psi, "ratio_two_exp": psi / phi}


def tangent_pairing(sol: SpectralSolution, xi, shock, model, domain, dxi=None):
    """``<omega_1, dW/dxi>`` by centred differences in ``xi`` (density part only)."""
    h = domain.epsilon * 0.05 if dxi is None else dxi
    xn = sol.nodes
    up = build_profile(xi + h, shock, model, domain, grid=xn).U
    um = build_profile(xi - h, shock, model, domain, grid=xn).U
    dW = (up - um) / (2 * h)
    return float(integrate.trapezoid(np.real(sol.phi) * dW, xn))
