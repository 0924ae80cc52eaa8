"""Subcommand implementations, rate fitting and the PDE-vs-reduced comparison."""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional

import numpy as np

from . import burgers as bg
from . import manifold as mf
from . import pde
from . import reduced as rd
from . import spectral as sp
from .config import ExperimentConfig, float_list
from .constitutive import FluidModel, ShockData
from .errors import ConfigError, DomainError
from .output import svg_plot, write_csv

# ---------------------------------------------------------------------------
# rate fitting
# ---------------------------------------------------------------------------


def speed_at(traj: rd.Trajectory, xi_probe, half_window=0.02) -> float:
    """``dxi/dt`` where the trajectory passes ``xi_probe``.

    Fits ``t(xi)`` by a quadratic over the samples within ``half_window`` of
    the probe (at least the three nearest samples) and inverts its slope.
    """
    xi, t = np.asarray(traj.xi), np.asarray(traj.times)
    if not (xi.min() <= xi_probe <= xi.max()):
        raise DomainError(f"trajectory never reaches xi={xi_probe}")
    sel = np.nonzero(np.abs(xi - xi_probe) <= half_window)[0]
    if sel.size < 3:
        sel = np.argsort(np.abs(xi - xi_probe))[:3]
    x = xi[sel] - xi_probe
    tt = t[sel]
    deg = 2 if sel.size >= 4 else 1
    c = np.polyfit(x, tt - tt.mean(), deg)
    dtdxi = c[-2]
    return float(1.0 / dtdxi)


@dataclass
class RateFit:
    c: float
    log_prefactor: float
    residual: float
    flagged: bool
    epsilons: np.ndarray
    speeds: np.ndarray


def fit_exponential_rate(data, xi_probe=None, flag_tol=0.1) -> RateFit:
    """Least-squares slope of ``log|dxi/dt|`` against ``1/eps``; returns ``c`` in ``e^{-c/eps}``.

    ``data`` maps eps to a Trajectory (then ``xi_probe`` is required) or to a speed.
    """
    items = sorted(dict(data).items()) if not isinstance(data, list) else sorted(data)
    if len({e for e, _ in items}) < 3:
        raise DomainError("need at least three epsilon values for a rate fit")
    eps, spd = [], []
    for e, d in items:
        if isinstance(d, rd.Trajectory):
            if xi_probe is None:
                raise DomainError("xi_probe required to read speeds off trajectories")
            d = speed_at(d, xi_probe)
        eps.append(float(e))
        spd.append(float(d))
    eps, spd = np.array(eps), np.array(spd)
    if np.any(spd == 0) or not np.all(np.isfinite(spd)):
        raise DomainError("zero or non-finite speed in rate fit")
    X = np.vstack([np.ones_like(eps), 1.0 / eps]).T
    y = np.log(np.abs(spd))
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    res = y - X @ coef
    rms = float(np.sqrt(np.mean(res ** 2)))
    # speeds must grow with eps for exponential slowness
    mono = np.all(np.diff(np.abs(spd)) > 0)
    return RateFit(c=float(-coef[1]), log_prefactor=float(coef[0]), residual=rms,
                   flagged=bool(rms > flag_tol or not mono), epsilons=eps, speeds=spd)


# ---------------------------------------------------------------------------
# comparison
# ---------------------------------------------------------------------------

def drift_rate(traj: rd.Trajectory, t0=None, t1=None) -> float:
    """Mean ``dxi/dt`` over ``[t0, t1]`` (least-squares line)."""
    t, x = traj.times, traj.xi
    m = np.ones_like(t, dtype=bool)
    if t0 is not None:
        m &= t >= t0
    if t1 is not None:
        m &= t <= t1
    if m.sum() < 2:
        raise DomainError("not enough samples in the rate window")
    return float(np.polyfit(t[m], x[m], 1)[0])


@dataclass
class ComparisonReport:
    pde: rd.Trajectory
    reduced: Dict[str, rd.Trajectory]
    window: tuple
    max_dev: Dict[str, float] = field(default_factory=dict)
    mean_dev: Dict[str, float] = field(default_factory=dict)
    rates: Dict[str, float] = field(default_factory=dict)
    rate_fit: Optional[RateFit] = None

    def rows(self):
        out = [("pde", float("nan"), float("nan"), self.rates.get("pde", float("nan")))]
        for k in self.reduced:
            out.append((k, self.max_dev.get(k, float("nan")), self.mean_dev.get(k, float("nan")),
                        self.rates.get(k, float("nan"))))
        return out

    def rate_ratio(self, name):
        return self.rates[name] / self.rates["pde"]


def compare_trajectories(pde_traj, reduced: Dict[str, rd.Trajectory], mask_fn=None):
    """Deviations on the overlap of the sample times, optionally restricted by ``mask_fn(t, xi_pde)``."""
    t = pde_traj.times
    rep = ComparisonReport(pde_traj, dict(reduced), (float("nan"), float("nan")))
    for name, tr in reduced.items():
        lo, hi = max(t[0], tr.times[0]), min(t[-1], tr.times[-1])
        m = (t >= lo) & (t <= hi)
        if mask_fn is not None:
            m &= mask_fn(t, pde_traj.xi)
        if not m.any():
            continue
        xr = np.interp(t[m], tr.times, tr.xi)
        d = np.abs(pde_traj.xi[m] - xr)
        rep.max_dev[name] = float(d.max())
        rep.mean_dev[name] = float(d.mean())
        rep.window = (float(t[m][0]), float(t[m][-1]))
    # drift rates on the (last) comparison window
    w0, w1 = rep.window
    for name, tr in [("pde", pde_traj)] + list(reduced.items()):
        try:
            rep.rates[name] = drift_rate(tr, w0, w1)
        except DomainError:
            rep.rates[name] = float("nan")
    return rep


# ---------------------------------------------------------------------------
# config helpers
# ---------------------------------------------------------------------------

def _model(cfg):
    return FluidModel.from_config(cfg.block("model"))


def _shock(cfg, model):
    b = cfg.block("shock")
    try:
        return ShockData.from_config(b, model)
    except KeyError as exc:
        raise ConfigError(f"shock block needs {exc.args[0]}", keys=[f"shock.{exc.args[0]}"])


def _domain(cfg, n_default=1024):
    b = cfg.block("domain")
    return mf.DomainSpec(float(b.get("ell", 1.0)), float(b.get("epsilon", 0.05)),
                         int(b.get("n_cells", n_default)))


def _burgers_setup(cfg):
    d = cfg.block("domain")
    return bg.BurgersSetup(w_bar=float(cfg.block("burgers").get("w_bar", 1.0)),
                           ell=float(d.get("ell", 1.0)), epsilon=float(d.get("epsilon", 0.1)))


def _xi_grid(run, ell, eps):
    lo = run.get("xi_min", -ell + 5 * eps)
    hi = run.get("xi_max", ell - 5 * eps)
    return np.linspace(lo, hi, int(run.get("n_xi", 50)))


class Context:
    def __init__(self, cfg: ExperimentConfig, out_dir, plot):
        self.cfg = cfg
        self.out = Path(out_dir)
        self.plot = plot
        self.hash = cfg.digest()
        self.files = []
        self.summary = {}

    def csv(self, name, cols, rows, meta=None):
        self.files.append(write_csv(self.out / name, cols, rows, self.hash, meta))

    def svg(self, name, series, **kw):
        if self.plot:
            self.files.append(svg_plot(self.out / name, series, **kw))


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_burgers(ctx: Context):
    st = _burgers_setup(ctx.cfg)
    xs = _xi_grid(ctx.cfg.run, st.ell, st.epsilon)
    rows = []
    for x in xs:
        km, kp = bg.kappa_pm_burgers(x, st)
        rows.append((x, km, kp, bg.burgers_reduced_rhs_exact(x, st),
                     bg.burgers_reduced_rhs_asymptotic(x, st)))
    ctx.csv("burgers.csv", ["xi", "kappa_minus", "kappa_plus", "rhs_exact", "rhs_asymptotic"], rows,
            meta={"w_bar": st.w_bar, "ell": st.ell, "epsilon": st.epsilon})
    r = np.array(rows)
    ctx.svg("burgers.svg", [("exact", r[:, 0], r[:, 3]), ("asymptotic", r[:, 0], r[:, 4])],
            xlabel="xi", ylabel="dxi/dt", title=f"Burgers reduced speed, eps={st.epsilon}")


def cmd_manifold(ctx: Context):
    model = _model(ctx.cfg)
    shock = _shock(ctx.cfg, model)
    dom = _domain(ctx.cfg)
    run = ctx.cfg.run
    xs = _xi_grid(run, dom.ell, dom.epsilon)
    rows, logs = [], []
    for x in xs:
        lm, lp = mf.kappa_log_excess(x, shock, model, dom)
        km, kp = mf.kappa_pm_ns(x, shock, model, dom)
        la, sg = mf._log_diff(lp, lm)
        aa, asg = mf.kappa_diff_asymptotic_log(x, shock, model, dom)
        rows.append((x, km, kp, sg * math.exp(la), asg * math.exp(aa)))
        logs.append((x, lm, lp, la, sg, aa, asg))
    meta = {"epsilon": dom.epsilon, "ell": dom.ell}
    ctx.csv("manifold.csv", ["xi", "kappa_minus", "kappa_plus", "kappa_diff",
                             "kappa_diff_asymptotic"], rows, meta=meta)
    # kappa_diff underflows for small eps; the log form keeps it
    ctx.csv("manifold_log.csv", ["xi", "log_h_minus", "log_h_plus", "log_abs_kappa_diff", "sign",
                                 "log_abs_kappa_diff_asymptotic", "sign_asymptotic"], logs, meta=meta)
    xstar = mf.equilibrium_xi(shock, model, dom)
    ctx.summary["xi_star"] = xstar
    probes = float_list(run["xi_probe"]) if "xi_probe" in run else [run.get("xi0", xstar)]
    for i, x0 in enumerate(probes):
        p = mf.build_profile(x0, shock, model, dom)
        ctx.csv(f"profile_{i:03d}.csv", ["x", "U", "V"], zip(p.grid, p.U, p.V),
                meta={"xi": x0, "xi_star": xstar, "epsilon": dom.epsilon})
        ctx.svg(f"profile_{i:03d}.svg", [("U", p.grid, p.U)], xlabel="x", ylabel="u",
                title=f"profile at xi={x0:.4f}")
    r = np.array(logs)
    ctx.svg("manifold.svg", [("exact", r[:, 0], r[:, 3]), ("asymptotic", r[:, 0], r[:, 5])],
            xlabel="xi", ylabel="log|kappa_+ - kappa_-|", title=f"flux-level difference, xi*={xstar:.5f}")


def cmd_spectrum(ctx: Context):
    model = _model(ctx.cfg)
    shock = _shock(ctx.cfg, model)
    dom = _domain(ctx.cfg)
    run = ctx.cfg.run
    if "xi_min" in run or "xi_max" in run:
        xs = _xi_grid(run, dom.ell, dom.epsilon)
    else:
        xs = [run["xi0"] if "xi0" in run else mf.equilibrium_xi(shock, model, dom)]
    rows = []
    for j, x0 in enumerate(xs):
        sol = sp.adjoint_spectrum(x0, shock, model, dom, k=int(run.get("n_modes", 3)))
        ratio = sol.ratio_at(x0)
        asym = sp.adjoint_ratio_asymptotic(x0, sol.lambda1_real, shock, model, dom)
        rows.append((x0, dom.epsilon, sol.lambda1.real, sol.lambda1.imag, sol.gap, ratio, asym))
        ctx.csv(f"eigenfunction_{j:03d}.csv", ["x", "phi", "psi"],
                zip(sol.nodes, np.real(sol.phi), np.real(sol.psi)),
                meta={"xi": x0, "lambda1": sol.lambda1_real, "residual": sol.residual_norm})
        ctx.svg(f"eigenfunction_{j:03d}.svg", [("phi", sol.nodes, np.real(sol.phi)),
                                               ("psi", sol.nodes, np.real(sol.psi))],
                xlabel="x", ylabel="adjoint eigenfunction", title=f"lambda1={sol.lambda1_real:.4g}")
        # sign reported, not asserted
        ctx.summary[f"lambda1_sign_{j:03d}"] = int(np.sign(sol.lambda1_real))
    ctx.csv("spectrum.csv", ["xi", "epsilon", "lambda1_re", "lambda1_im", "gap", "ratio_numeric",
                             "ratio_asymptotic"], rows, meta={"n_cells": dom.n_cells})
    if len(rows) > 1:
        r = np.array(rows)
        ctx.svg("spectrum.svg", [("lambda1", r[:, 0], r[:, 2])], xlabel="xi", ylabel="lambda1",
                title=f"leading eigenvalue, eps={dom.epsilon}")


def _spectral_table(shock, model, dom, xs):
    return rd.SpectralTable.build(np.asarray(xs), shock, model, dom)


def _reduced_model(cfg, variant, shock, model, dom, xi_range):
    run = cfg.run
    lam = run.get("lambda1")
    table = None
    if variant == "V1" or lam is None:
        n = int(run.get("n_table", 5))
        lo, hi = xi_range
        xs = np.linspace(lo, hi, n) if hi > lo else np.array([lo])
        if xs.size == 1:
            xs = np.array([lo - 1e-3, lo + 1e-3])
        table = _spectral_table(shock, model, dom, xs)
    return rd.ReducedModel(variant, shock, model, dom, lambda1=lam, spectral=table)


def _trajectory_rows(tr):
    return tr.to_rows()


def cmd_reduce(ctx: Context):
    cfg, run = ctx.cfg, ctx.cfg.run
    if "xi0" not in run:
        raise ConfigError("reduce needs run.xi0", keys=["run.xi0"])
    x0 = float(run["xi0"])
    horizon = ("tau", float(run["tau_end"])) if "tau_end" in run else float(run.get("t_end", 100.0))
    if cfg.system == "burgers":
        models = {"burgers": rd.BurgersReducedModel(_burgers_setup(cfg))}
    else:
        model = _model(cfg)
        shock = _shock(cfg, model)
        dom = _domain(cfg)
        xstar = mf.equilibrium_xi(shock, model, dom)
        variants = [v.strip() for v in str(run.get("variants", run.get("variant", "V2"))).split(",")]
        models = {v: _reduced_model(cfg, v, shock, model, dom, (min(x0, xstar), max(x0, xstar)))
                  for v in variants}
    series = []
    for name, rm in models.items():
        tr = rd.integrate_layer(x0, horizon, rm)
        ctx.csv(f"reduce_{name}.csv", ["t", "tau", "xi", "rhs", "variant"], _trajectory_rows(tr),
                meta={"log_S": tr.meta.get("log_S", 0.0), "status": tr.status})
        series.append((name, tr.tau, tr.xi))
        ctx.summary[f"{name}_final_xi"] = float(tr.xi[-1])
    ctx.svg("reduce.svg", series, xlabel="tau = S t", ylabel="xi", title="reduced layer motion")


def _pde_setup(cfg):
    if cfg.system == "burgers":
        st = _burgers_setup(cfg)
        n = int(cfg.block("domain").get("n_cells", 1024))
        return pde.burgers_problem(st, n), st
    model = _model(cfg)
    shock = _shock(cfg, model)
    dom = _domain(cfg)
    return pde.ns_problem(shock, model, dom), None


def _initial_state(cfg, problem, x0):
    moll = float(cfg.run.get("mollify", 0.0))
    if problem.kind == "burgers":
        return pde.init_burgers(x0, problem.setup, problem.n_cells, moll)
    return pde.profile_state(x0, problem.shock, problem.model, problem.domain, moll)


def _run_pde(cfg, problem, x0):
    scheme = pde.SchemeConfig.from_config(cfg.block("scheme"))
    st0 = _initial_state(cfg, problem, x0)
    run = cfg.run
    stop = None
    if "xi_stop" in run:
        xs = float(run["xi_stop"])
        stop = (lambda t, x: x <= xs) if xs < x0 else (lambda t, x: x >= xs)
    snaps = float_list(run.get("snapshots", ""))
    return pde.run(st0, float(run.get("t_end", 10.0)), scheme, problem, stop=stop,
                   snapshot_times=snaps)


def cmd_simulate(ctx: Context):
    cfg, run = ctx.cfg, ctx.cfg.run
    if "xi0" not in run:
        raise ConfigError("simulate needs run.xi0", keys=["run.xi0"])
    problem, _ = _pde_setup(cfg)
    res = _run_pde(cfg, problem, float(run["xi0"]))
    tr = res.trajectory
    ctx.csv("trajectory.csv", ["t", "xi"], zip(tr.times, tr.xi),
            meta={"epsilon": problem.domain.epsilon, "n_cells": problem.domain.n_cells})
    for i, s in enumerate(res.snapshots + [res.state]):
        name = "final_state.csv" if i == len(res.snapshots) else f"snapshot_{i:03d}.csv"
        v = s.v if s.v is not None else np.full_like(s.u, np.nan)
        ctx.csv(name, ["x", "u", "v"], zip(s.x, s.u, v),
                meta={"t": s.t, "epsilon": problem.domain.epsilon, "n_cells": s.n_cells})
    ctx.summary.update(final_xi=float(tr.xi[-1]), t_final=float(tr.times[-1]),
                       mass_defect=res.mass_defect, steps=res.state.steps)
    ctx.svg("trajectory.svg", [("pde", tr.times, tr.xi)], xlabel="t", ylabel="xi",
            title="layer position (PDE)")


def run_compare(cfg: ExperimentConfig):
    """PDE trajectory against the reduced equations, aligned after the transient."""
    run = cfg.run
    if "xi0" not in run:
        raise ConfigError("compare needs run.xi0", keys=["run.xi0"])
    x0 = float(run["xi0"])
    problem, st = _pde_setup(cfg)
    res = _run_pde(cfg, problem, x0)
    tr = res.trajectory
    t_tr = float(run.get("t_transient", 10.0))
    k = int(np.searchsorted(tr.times, t_tr))
    k = min(k, len(tr.times) - 2)
    t_al, x_al = tr.times[k], tr.xi[k]
    t_eval = tr.times[k:] - t_al
    if problem.kind == "burgers":
        models = {"exact": rd.BurgersReducedModel(st), "asymptotic": rd.BurgersReducedModel(st, True)}
    else:
        shock, model, dom = problem.shock, problem.model, problem.domain
        lo, hi = float(tr.xi.min()), float(tr.xi.max())
        variants = [v.strip() for v in str(run.get("variants", "V2,V3")).split(",")]
        models = {v: _reduced_model(cfg, v, shock, model, dom, (lo, hi)) for v in variants}
    reduced = {}
    for name, rm in models.items():
        r = rd.integrate_layer(x_al, t_eval[-1], rm, t_eval=t_eval)
        r.times = r.times + t_al
        reduced[name] = r
    xs = run.get("xi_stop")
    if xs is not None:
        lo, hi = sorted((float(xs), x0))
        mask = lambda t, x: (t >= t_al) & (x >= lo) & (x <= hi)
    else:
        mask = lambda t, x: t >= t_al
    rep = compare_trajectories(tr, reduced, mask)
    return rep, res


def cmd_compare(ctx: Context):
    rep, res = run_compare(ctx.cfg)
    ctx.csv("comparison.csv", ["source", "max_dev", "mean_dev", "drift_rate"], rep.rows(),
            meta={"window_t0": rep.window[0], "window_t1": rep.window[1]})
    ctx.csv("trajectory_pde.csv", ["t", "xi"], zip(rep.pde.times, rep.pde.xi))
    for name, r in rep.reduced.items():
        ctx.csv(f"trajectory_{name}.csv", ["t", "tau", "xi", "rhs", "variant"], r.to_rows())
    ctx.summary.update({f"max_dev_{k}": v for k, v in rep.max_dev.items()})
    ctx.summary.update({f"rate_{k}": v for k, v in rep.rates.items()})
    ctx.svg("comparison.svg", [("pde", rep.pde.times, rep.pde.xi)] +
            [(k, r.times, r.xi) for k, r in rep.reduced.items()],
            xlabel="t", ylabel="xi", title="PDE vs reduced")


def _sweep_job(args):
    kind, payload, x, eps = args
    if kind == "burgers":
        st = bg.BurgersSetup(payload["w_bar"], payload["ell"], eps)
        lm, lp = bg.kappa_log_excess_burgers(x, st)
    else:
        model = FluidModel.from_config(payload["model"])
        shock = ShockData.from_config(payload["shock"], model)
        dom = mf.DomainSpec(payload["ell"], eps, 16)
        lm, lp = mf.kappa_log_excess(x, shock, model, dom)
    la, sg = mf._log_diff(lp, lm)
    return (x, eps, lm, lp, la, sg)


def pool_size(n_jobs):
    env = os.environ.get("SLOWLAYER_THREADS")
    try:
        cap = int(env) if env else (os.cpu_count() or 1)
    except ValueError:
        raise ConfigError(f"SLOWLAYER_THREADS must be an integer, got {env!r}",
                          keys=["SLOWLAYER_THREADS"])
    return max(1, min(cap, n_jobs))


def cmd_sweep(ctx: Context):
    cfg, run = ctx.cfg, ctx.cfg.run
    dom = cfg.block("domain")
    ell = float(dom.get("ell", 1.0))
    epss = float_list(run["epsilons"]) if "epsilons" in run else [float(dom.get("epsilon", 0.05))]
    if cfg.system == "burgers":
        payload = {"w_bar": float(cfg.block("burgers").get("w_bar", 1.0)), "ell": ell}
    else:
        payload = {"model": cfg.block("model"), "shock": cfg.block("shock"), "ell": ell}
    jobs = [(cfg.system, payload, float(x), e) for e in epss
            for x in _xi_grid(run, ell, max(epss))]
    n = pool_size(len(jobs))
    if n == 1:
        rows = [_sweep_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=n) as ex:
            rows = list(ex.map(_sweep_job, jobs, chunksize=max(1, len(jobs) // (4 * n))))
    ctx.csv("sweep.csv", ["xi", "epsilon", "log_h_minus", "log_h_plus", "log_abs_kappa_diff", "sign"],
            rows, meta={"workers": n})
    # kappa_+ - kappa_- must be increasing in xi for each eps
    r = np.array(rows)
    mono = {}
    for e in epss:
        m = r[:, 1] == e
        d = r[m, 5] * np.exp(r[m, 4] - r[m, 4].max())
        mono[e] = bool(np.all(np.diff(d) > 0))
    ctx.summary["monotone"] = all(mono.values())
    if "xi_probe" in run and len(epss) >= 3:
        xp = float(run["xi_probe"])
        speeds = {}
        for e in epss:
            j = _sweep_job((cfg.system, payload, xp, e))
            speeds[e] = j[5] * math.exp(j[4])
        fit = fit_exponential_rate(speeds)
        ctx.summary.update(rate_c=fit.c, rate_residual=fit.residual, rate_flagged=fit.flagged)
    ctx.svg("sweep.svg", [(f"eps={e}", r[r[:, 1] == e, 0], r[r[:, 1] == e, 4]) for e in epss],
            xlabel="xi", ylabel="log|kappa_+ - kappa_-|", title="sweep")


COMMANDS = {"burgers": cmd_burgers, "manifold": cmd_manifold, "spectrum": cmd_spectrum,
            "reduce": cmd_reduce, "simulate": cmd_simulate, "compare": cmd_compare,
            "sweep": cmd_sweep}


def run_experiment(cfg: ExperimentConfig, subcommand, out_dir=None, plot=None) -> Context:
    cfg.validate_for(subcommand)
    outb = cfg.block("output")
    out_dir = out_dir or outb.get("directory", "slowlayer_out")
    plot = bool(outb.get("plot", False)) if plot is None else plot
    ctx = Context(cfg, out_dir, plot)
    COMMANDS[subcommand](ctx)
    ctx.csv("summary.csv", ["key", "value"], sorted((k, v) for k, v in ctx.summary.items()),
            meta={"subcommand": subcommand})
    return ctx
