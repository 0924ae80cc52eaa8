"""Exact kappa_+ - kappa_- against its two-exponential leading-order form.

    python3 demos/asymptotic_prefactor.py

The ratio does not tend to 1 as eps -> 0: each exponential is off by an
eps-independent factor, so the comparison stalls at an O(1) error.
"""
import math

import numpy as np

from slowlayer.constitutive import FluidModel, ShockData
from slowlayer.manifold import DomainSpec, kappa_diff_asymptotic_log, residual_jump_log

m = FluidModel()
sh = ShockData.from_left_state(1.0, 0.5, m)
xs = [-0.6, -0.3, 0.0, 0.4, 0.6]
print("eps    " + "  ".join(f"xi={x:+.1f}" for x in xs))
for eps in (0.05, 0.02, 0.01, 0.005):
    d = DomainSpec(1.0, eps, 64)
    row = []
    for x in xs:
        le, se = residual_jump_log(x, sh, m, d)
        la, sa = kappa_diff_asymptotic_log(x, sh, m, d)
        row.append(se * sa * math.exp(la - le))
    print(f"{eps:<6} " + "  ".join(f"{r:8.4f}" for r in row))
