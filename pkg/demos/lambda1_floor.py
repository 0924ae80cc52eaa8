"""Leading adjoint eigenvalue against eps: the exponentially small lambda1
sinks into the rounding floor (~1e-12 times the operator norm) near eps = 0.05.

    python3 demos/lambda1_floor.py
"""
import numpy as np

from slowlayer.constitutive import FluidModel, ShockData
from slowlayer.manifold import DomainSpec
from slowlayer.spectral import adjoint_spectrum

m = FluidModel()
sh = ShockData.from_left_state(1.0, 0.5, m)
print("eps     N      lambda1(xi=0.3)    N/2 value")
for eps in (0.2, 0.15, 0.1, 0.07, 0.05, 0.03, 0.02):
    n = int(2 ** np.ceil(np.log2(40 / eps)))
    a = adjoint_spectrum(0.3, sh, m, DomainSpec(1.0, eps, n)).lambda1_real
    b = adjoint_spectrum(0.3, sh, m, DomainSpec(1.0, eps, n // 2)).lambda1_real
    print(f"{eps:<6} {n:5d}  {a: .6e}   {b: .6e}")
