import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

from slowlayer import cli
from slowlayer.config import load_config, parse_config
from slowlayer.errors import ConfigError
from slowlayer.experiments import pool_size, run_experiment

BURGERS = """
[burgers]
w_bar = 1.0
[domain]
ell = 1.0
epsilon = 0.05
n_cells = 256
[run]
system = burgers
xi_min = -0.5
xi_max = 0.5
n_xi = 5
"""

NS = """
[model]
alpha = 1.0
kappa_p = 1.0
beta = 1.0
c_nu = 1.0
[shock]
v_star = 1.0
u_minus = {u_minus}
[domain]
ell = 1.0
epsilon = 0.1
n_cells = {n}
[run]
system = ns
xi0 = 0.3
"""

SWEEP = """
[burgers]
w_bar = 1.0
[domain]
ell = 1.0
[run]
system = burgers
n_xi = 9
epsilons = 0.1, 0.08, 0.0667
xi_probe = 0.3
"""


def _write(tmp_path, text, name="c.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_unknown_keys_listed():
    with pytest.raises(ConfigError) as ei:
        parse_config(BURGERS + "\n[domain2]\nx = 1\n")
    assert "[domain2]" in ei.value.keys
    with pytest.raises(ConfigError) as ei:
        parse_config(BURGERS.replace("n_cells = 256", "n_cells = 256\ncells = 3"))
    assert ei.value.keys == ["domain.cells"]
    with pytest.raises(ConfigError) as ei:
        parse_config(BURGERS.replace("n_cells = 256", "n_cells = many"))
    assert "domain.n_cells='many'" in ei.value.keys[0]


def test_missing_blocks():
    cfg = parse_config(BURGERS.replace("[burgers]\nw_bar = 1.0", ""))
    with pytest.raises(ConfigError) as ei:
        cfg.validate_for("burgers")
    assert ei.value.keys == ["burgers"]
    with pytest.raises(ConfigError):
        parse_config(BURGERS).validate_for("fly")


def test_empty_run_block_writes_nothing(tmp_path):
    text = BURGERS.split("[run]")[0] + "[run]\n"
    out = tmp_path / "out"
    rc = cli.main(["burgers", "--config", _write(tmp_path, text), "--out", str(out)])
    assert rc == 2
    assert not out.exists()


def test_digest_ignores_layout():
    a = parse_config(BURGERS)
    b = parse_config("# comment\n" + BURGERS.replace("w_bar = 1.0", "w_bar=1.0  # inline"))
    assert a.digest() == b.digest()
    c = parse_config(BURGERS.replace("w_bar = 1.0", "w_bar = 1.5"))
    assert a.digest() != c.digest()


def test_csv_hash_and_header(tmp_path):
    cfgp = _write(tmp_path, BURGERS)
    ctx = run_experiment(load_config(cfgp), "burgers", out_dir=str(tmp_path / "o"))
    digest = load_config(cfgp).digest()
    assert ctx.files
    for f in map(str, ctx.files):
        if f.endswith(".csv"):
            lines = Path(f).read_text().splitlines()
            assert lines[0].startswith(f"# config_sha256={digest}")
            assert "," in lines[1] and not lines[1][0].isdigit()


def test_byte_identical_reruns(tmp_path):
    cfgp = _write(tmp_path, BURGERS)
    for sub in ("burgers", "manifold"):
        path = cfgp if sub == "burgers" else _write(tmp_path, NS.format(u_minus=0.5, n=256), "ns.ini")
        a = run_experiment(load_config(path), sub, out_dir=str(tmp_path / f"a_{sub}"), plot=True)
        b = run_experiment(load_config(path), sub, out_dir=str(tmp_path / f"b_{sub}"), plot=True)
        assert len(a.files) == len(b.files) > 0
        for fa, fb in zip(sorted(a.files), sorted(b.files)):
            assert Path(fa).name == Path(fb).name
            assert Path(fa).read_bytes() == Path(fb).read_bytes(), fa


def test_exit_codes(tmp_path, capsys):
    bad = _write(tmp_path, BURGERS.replace("n_cells = 256", "n_cells = 256\nbogus = 1"))
    assert cli.main(["burgers", "--config", bad, "--out", str(tmp_path / "x")]) == 2
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "schema" and err["keys"] == ["domain.bogus"]
    # left state above the sonic point: domain error
    p = _write(tmp_path, NS.format(u_minus=1.5, n=256), "dom.ini")
    assert cli.main(["manifold", "--config", p, "--out", str(tmp_path / "y")]) == 3
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "domain" and err["module"]
    # layer under-resolved for the eigenproblem
    p = _write(tmp_path, NS.format(u_minus=0.5, n=64), "res.ini")
    assert cli.main(["spectrum", "--config", p, "--out", str(tmp_path / "z")]) == 5
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "resolution"
    p = str(tmp_path / "missing.ini")
    assert cli.main(["burgers", "--config", p]) == 2


def test_cli_success_prints_files(tmp_path, capsys):
    out = tmp_path / "ok"
    assert cli.main(["burgers", "--config", _write(tmp_path, BURGERS), "--out", str(out),
                     "--plot"]) == 0
    text = capsys.readouterr().out
    assert str(out / "burgers.csv") in text
    assert (out / "summary.csv").exists()
    assert any(p.suffix == ".svg" for p in out.iterdir())


def test_console_script(tmp_path):
    exe = Path(sys.executable).with_name("slowlayer")
    cmd = [str(exe)] if exe.exists() else [sys.executable, "-m", "slowlayer.cli"]
    r = subprocess.run(cmd + ["burgers", "--config", _write(tmp_path, BURGERS),
                              "--out", str(tmp_path / "cs")], capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    r = subprocess.run(cmd + ["--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "--config" in r.stdout


def test_pool_size_env(monkeypatch):
    monkeypatch.setenv("SLOWLAYER_THREADS", "3")
    assert pool_size(10) == 3
    assert pool_size(2) == 2
    monkeypatch.setenv("SLOWLAYER_THREADS", "lots")
    with pytest.raises(ConfigError):
        pool_size(10)
    monkeypatch.delenv("SLOWLAYER_THREADS")
    assert 1 <= pool_size(10) <= (os.cpu_count() or 1)


def test_sweep_threads_same_result(tmp_path, monkeypatch):
    cfgp = _write(tmp_path, SWEEP)
    res = {}
    for n in ("1", "2"):
        monkeypatch.setenv("SLOWLAYER_THREADS", n)
        ctx = run_experiment(load_config(cfgp), "sweep", out_dir=str(tmp_path / n))
        body = (tmp_path / n / "sweep.csv").read_text().splitlines()
        assert f"workers={n}" in body[0]
        res[n] = body[1:]
        assert ctx.summary["monotone"] is True
        assert ctx.summary["rate_c"] == pytest.approx(0.7, rel=0.1)
    assert res["1"] == res["2"]
    monkeypatch.setenv("SLOWLAYER_THREADS", "x")
    assert cli.main(["sweep", "--config", cfgp, "--out", str(tmp_path / "bad")]) == 2
