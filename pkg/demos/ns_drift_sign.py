"""Navier-Stokes layer at eps = 0.07: PDE drift against the three reduced equations.

    python3 demos/ns_drift_sign.py        # ~3 min

With the eigenfunction computed numerically, psi/phi at the layer is an O(1)
negative number and V1 as written pushes the layer away from xi*.  Flipping
its sign (kappa_- - kappa_+ in place of kappa_+ - kappa_-) reproduces the PDE
drift rate.  V2/V3 have the right sign but lambda1 (taken from the discrete
spectrum) makes them several orders of magnitude too slow.
"""
from pathlib import Path

from slowlayer.config import load_config
from slowlayer.experiments import run_compare

cfg = load_config(Path(__file__).resolve().parents[1] / "configs" / "compare_ns.ini")
rep, res = run_compare(cfg)
rp = rep.rates["pde"]
print(f"window t in [{rep.window[0]:.0f}, {rep.window[1]:.0f}], xi_pde: "
      f"{rep.pde.xi[0]:.5f} -> {rep.pde.xi[-1]:.5f}")
print(f"{'source':>10} {'drift rate':>12} {'rate/pde':>10} {'max dev':>10}")
print(f"{'pde':>10} {rp:12.4e} {1.0:10.4f} {'':>10}")
for k, r in rep.rates.items():
    if k == "pde":
        continue
    print(f"{k:>10} {r:12.4e} {r / rp:10.4g} {rep.max_dev[k]:10.2e}")
if "V1" in rep.rates:
    print(f"{'-V1':>10} {-rep.rates['V1']:12.4e} {-rep.rates['V1'] / rp:10.4f}   (sign flipped)")
