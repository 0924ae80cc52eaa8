"""Experiment configuration: ``[section]`` blocks of ``key = value`` lines."""
from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict

from .errors import ConfigError

SUBCOMMANDS = ("burgers", "manifold", "spectrum", "reduce", "simulate", "compare", "sweep")

SCHEMA = {
    "model": {"alpha": float, "kappa_p": float, "beta": float, "c_nu": float, "u_ref": float},
    "shock": {"v_star": float, "u_minus": float},
    "burgers": {"w_bar": float},
    "domain": {"ell": float, "epsilon": float, "n_cells": int},
    "scheme": {"cfl": float, "flux": str, "artificial": float, "viscous": str,
               "cadence": float, "max_steps": int},
    "run": {"system": str, "xi0": float, "t_end": float, "tau_end": float, "variant": str,
            "lambda1": float, "xi_min": float, "xi_max": float, "n_xi": int,
            "epsilons": str, "xi_probe": float, "mollify": float, "n_table": int,
            "t_transient": float, "xi_stop": float, "snapshots": str, "n_modes": int,
            "variants": str, "rate_window": float},
    "output": {"directory": str, "plot": bool},
}

# blocks each subcommand needs (besides a non-empty run block)
REQUIRED = {
    "burgers": ("domain", "burgers"),
    "manifold": ("model", "shock", "domain"),
    "spectrum": ("model", "shock", "domain"),
    "reduce": ("domain",),
    "simulate": ("domain",),
    "compare": ("domain",),
    "sweep": ("domain",),
}


def _to_bool(s):
    t = str(s).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


@dataclass
class ExperimentConfig:
    sections: Dict[str, dict] = field(default_factory=dict)
    text: str = ""

    def block(self, name) -> dict:
        return dict(self.sections.get(name, {}))

    def has(self, name) -> bool:
        return name in self.sections

    @property
    def run(self) -> dict:
        return self.block("run")

    @property
    def system(self) -> str:
        return self.run.get("system", "burgers" if self.has("burgers") else "ns")

    def digest(self) -> str:
        """Hash of the canonical (parsed, sorted) form, independent of layout and comments."""
        canon = "\n".join(f"[{s}]" + "".join(f"\n{k}={self.sections[s][k]!r}"
                                               for k in sorted(self.sections[s]))
                          for s in sorted(self.sections))
        return hashlib.sha256(canon.encode()).hexdigest()

    def validate_for(self, subcommand):
        if subcommand not in SUBCOMMANDS:
            raise ConfigError(f"unknown subcommand {subcommand!r}", keys=[subcommand])
        if not self.run:
            raise ConfigError("the [run] block is missing or empty", keys=["run"])
        need = list(REQUIRED[subcommand])
        if subcommand in ("reduce", "simulate", "compare", "sweep"):
            need += ["burgers"] if self.system == "burgers" else ["model", "shock"]
        missing = [b for b in need if not self.has(b)]
        if missing:
            raise ConfigError(f"subcommand {subcommand!r} needs block(s) {missing}", keys=missing)
        if self.system not in ("ns", "burgers"):
            raise ConfigError(f"run.system must be 'ns' or 'burgers', got {self.system!r}",
                              keys=["run.system"])


def parse_config(text: str) -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",),
                                   comment_prefixes=("#", ";"), inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    sections, bad = {}, []
    for sec in cp.sections():
        if sec not in SCHEMA:
            bad.append(f"[{sec}]")
            continue
        vals = {}
        for key, raw in cp.items(sec):
            conv = SCHEMA[sec].get(key)
            if conv is None:
                bad.append(f"{sec}.{key}")
                continue
            try:
                vals[key] = _to_bool(raw) if conv is bool else conv(raw.strip())
            except ValueError:
                bad.append(f"{sec}.{key}={raw!r}")
        sections[sec] = vals
    if bad:
        raise ConfigError(f"unknown or invalid keys: {', '.join(bad)}", keys=bad)
    return ExperimentConfig(sections, text)


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}", keys=[str(p)]) from exc
    return parse_config(text)


def float_list(s) -> list:
    return [float(t) for t in str(s).replace(";", ",").split(",") if t.strip()]
