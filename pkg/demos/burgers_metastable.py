"""Burgers layer: full PDE against the reduced ODE at eps = 0.08.

    python3 demos/burgers_metastable.py

Prints xi(t) from both every few hundred time units.  Takes ~1 min (N = 1024).
"""
import numpy as np

from slowlayer import pde
from slowlayer.burgers import BurgersSetup
from slowlayer.reduced import BurgersReducedModel, integrate_layer

st = BurgersSetup(w_bar=1.0, ell=1.0, epsilon=0.08)
N = 1024
prob = pde.BurgersProblem(st, N)
s0 = pde.init_burgers(0.3, st, N, mollify_width=0.02)
res = pde.run(s0, 3000.0, pde.SchemeConfig(cadence=5.0), prob,
              stop=lambda t, x: x < 0.15)
tr = res.trajectory

# start the ODE from the PDE position once the transient is gone
k = np.searchsorted(tr.times, 10.0)
t0, x0 = tr.times[k], tr.xi[k]
red = integrate_layer(x0, tr.times[-1] - t0, BurgersReducedModel(st), t_eval=tr.times[k:] - t0)
red_xi = np.interp(tr.times, red.times + t0, red.xi)

print("    t      xi_pde     xi_ode")
for i in range(k, len(tr.times), 60):
    print(f"{tr.times[i]:7.0f}  {tr.xi[i]:.6f}  {red_xi[i]:.6f}")
print("max |dev| =", np.max(np.abs(tr.xi[k:] - red_xi[k:])))
print("mass defect =", res.mass_defect)
