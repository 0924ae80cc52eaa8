import numpy as np
import pytest

from slowlayer import pde as P
from slowlayer.burgers import BurgersSetup
from slowlayer.constitutive import ShockData
from slowlayer.errors import DomainError, PositivityError, ResolutionError, TrackingError
from slowlayer.manifold import DomainSpec, build_profile, equilibrium_xi


@pytest.fixture
def scheme():
    return P.SchemeConfig()


def test_scheme_validation():
    for bad in (0.0, 1.0, 1.5):
        with pytest.raises(DomainError):
            P.SchemeConfig(cfl=bad)
    with pytest.raises(DomainError):
        P.SchemeConfig(flux="roe")
    with pytest.raises(DomainError):
        P.SchemeConfig(viscous="explicit")
    sc = P.SchemeConfig.from_config({"cfl": "0.5", "flux": "llf"})
    assert sc.cfl == 0.5 and sc.flux == "llf"


def test_constant_state_fixed_point(model, scheme):
    F = model.F(0.5, 1.0)
    flat = ShockData(1.0, 0.5, 0.5, 1.0, 2.0, 2.0, float(F))
    prob = P.NSProblem(flat, model, DomainSpec(1.0, 0.05, 256))
    x = P.cell_centres(1.0, 256)
    s = P.FieldState(0.0, x, np.full(256, 0.5), np.full(256, 1.0))
    for _ in range(3):
        s = P.step(s, P.stable_dt(s, scheme, prob), scheme, prob)
    assert np.max(np.abs(s.u - 0.5)) <= 1e-14
    assert np.max(np.abs(s.v - 1.0)) <= 1e-14


def test_mass_balance_ns(shock, model, scheme):
    d = DomainSpec(1.0, 0.05, 1024)
    prob = P.NSProblem(shock, model, d)
    s = P.profile_state(0.3, shock, model, d, mollify_width=0.05)
    for _ in range(20):
        s2 = P.step(s, P.stable_dt(s, scheme, prob), scheme, prob)
        assert abs((s2.mass() - s.mass()) + (s2.outflow - s.outflow)) <= 1e-12
        s = s2


def test_mass_balance_burgers(scheme):
    st = BurgersSetup(1.0, 1.0, 0.08)
    prob = P.BurgersProblem(st, 1024)
    s = P.init_burgers(0.3, st, 1024, 0.05)
    for _ in range(20):
        s2 = P.step(s, P.stable_dt(s, scheme, prob), scheme, prob)
        assert abs((s2.mass() - s.mass()) + (s2.outflow - s.outflow)) <= 1e-12
        s = s2


def test_boundary_identities(shock, model, scheme):
    d = DomainSpec(1.0, 0.05, 512)
    prob = P.NSProblem(shock, model, d)
    s = P.advance(P.profile_state(0.3, shock, model, d, 0.05), 0.5, scheme, prob)
    for k, r in P.boundary_residuals(s, prob).items():
        assert abs(r) <= 1e-12, k


def test_init_and_roundtrip(shock, model):
    d = DomainSpec(1.0, 0.05, 1024)
    x = P.cell_centres(1.0, 1024)
    p = build_profile(0.25, shock, model, d, grid=x, rtol=1e-13)
    s = P.init_from_manifold(p, shock, model, d)
    assert np.array_equal(s.u, p.U)
    assert np.all(s.v == shock.v_star)
    assert s.mass() == pytest.approx(np.sum(p.U) * d.dx, abs=1e-12)
    assert abs(P.track_layer(s, shock.u_sonic) - 0.25) <= d.dx


def test_track_translation(shock, model):
    d = DomainSpec(1.0, 0.05, 1024)
    s = P.profile_state(0.0, shock, model, d)
    xi0 = P.track_layer(s, shock.u_sonic)
    for k in (-7, 3, 40):
        u = np.roll(s.u, k)
        if k > 0:
            u[:k] = s.u[0]
        else:
            u[k:] = s.u[-1]
        sk = P.FieldState(0.0, s.x, u, s.v)
        assert P.track_layer(sk, shock.u_sonic) - xi0 == pytest.approx(k * d.dx, abs=1e-12)


def test_tracking_errors():
    x = P.cell_centres(1.0, 64)
    with pytest.raises(TrackingError):
        P.track_layer(P.FieldState(0.0, x, np.full(64, 1.0)), 1.0)
    with pytest.raises(TrackingError):
        P.track_layer(P.FieldState(0.0, x, np.full(64, 0.5)), 1.0)
    with pytest.raises(TrackingError):
        P.track_layer(P.FieldState(0.0, x, 1.0 + 0.5 * np.sin(6 * x)), 1.0)


def test_resolution_check(shock, model):
    with pytest.raises(ResolutionError):
        P.check_resolution(P.NSProblem(shock, model, DomainSpec(1.0, 0.01, 256)), P.SchemeConfig())
    # LLF dissipation too large for the layer at this grid
    with pytest.raises(ResolutionError):
        P.check_resolution(P.NSProblem(shock, model, DomainSpec(1.0, 0.05, 512)),
                           P.SchemeConfig(flux="llf"))
    num = P.check_resolution(P.NSProblem(shock, model, DomainSpec(1.0, 0.05, 2048)),
                             P.SchemeConfig())
    assert num <= 0.2 * 0.05 * model.viscosity(shock.u_minus)


def test_positivity_abort(shock, model, scheme):
    d = DomainSpec(1.0, 0.05, 256)
    s = P.profile_state(0.3, shock, model, d)
    s.u[100] = -0.1
    with pytest.raises(PositivityError):
        P.step(s, 1e-4, scheme, P.NSProblem(shock, model, d))


def test_determinism(shock, model, scheme):
    d = DomainSpec(1.0, 0.05, 512)
    prob = P.NSProblem(shock, model, d)
    s0 = P.profile_state(0.3, shock, model, d, 0.05)
    a = P.run(s0, 2.0, P.SchemeConfig(cadence=0.5), prob)
    b = P.run(s0, 2.0, P.SchemeConfig(cadence=0.5), prob)
    assert np.array_equal(a.state.u, b.state.u) and np.array_equal(a.state.v, b.state.v)
    assert np.array_equal(a.trajectory.xi, b.trajectory.xi)
    assert abs(a.mass_defect) <= 1e-12 * a.state.steps


def test_run_snapshots_and_stop(scheme):
    st = BurgersSetup(1.0, 1.0, 0.08)
    prob = P.BurgersProblem(st, 512)
    s0 = P.init_burgers(0.3, st, 512, 0.02)
    res = P.run(s0, 3.0, P.SchemeConfig(cadence=1.0), prob, snapshot_times=(0.5, 1.5))
    assert [round(s.t, 12) for s in res.snapshots] == [0.5, 1.5]
    assert np.allclose(res.trajectory.times, [0, 1, 2, 3])
    res = P.run(s0, 3.0, P.SchemeConfig(cadence=1.0), prob, stop=lambda t, xi: t >= 1.0)
    assert res.trajectory.times[-1] == pytest.approx(1.0)


def test_mollified_approach_burgers(scheme):
    st = BurgersSetup(1.0, 1.0, 0.08)
    prob = P.BurgersProblem(st, 1024)
    s = P.init_burgers(0.3, st, 1024, 0.1)
    _, d0 = P.manifold_distance(s, prob)
    s = P.advance(s, 2.0, scheme, prob)
    _, d1 = P.manifold_distance(s, prob)
    assert d1 <= 0.1 * d0


def test_burgers_steady_fixed_point(scheme):
    st = BurgersSetup(1.0, 1.0, 0.08)
    prob = P.BurgersProblem(st, 2048)
    s0 = P.init_burgers(0.0, st, 2048)
    s = P.advance(s0, 10.0, scheme, prob)
    assert np.max(np.abs(s.u - s0.u)) <= 1e-6


@pytest.mark.slow
def test_ns_steady_profile(shock, model, scheme):
    d = DomainSpec(1.0, 0.05, 2048)
    xs = equilibrium_xi(shock, model, d)
    prob = P.NSProblem(shock, model, d)
    s0 = P.profile_state(xs, shock, model, d)
    s = P.advance(s0, 10.0, scheme, prob)
    assert np.max(np.abs(s.u - s0.u)) <= 1e-6
    assert np.max(np.abs(s.v - s0.v)) <= 1e-6
