"""
Error bounds and convergence rates
==================================

Three quantitative handles on the dual error:

* a scalar bound, (max gap / 2)^p, attained midway between the two
  widest neighbours;
* a product-grid bound in d dimensions, d C (l/2)^p m^(-p) for an
  m-cell axis grid on a box of edge l, tight at the box center when
  m = 1;
* the asymptotic n^(-p/d) decay, read off a log-log slope.

On top: the 1D dual-vs-Voronoi comparison at matched grid sizes.
"""

import numpy as np

from dualquant import EUCLIDEAN_QUADRATIC, Grid, RngStream
from dualquant.distributions import make_uniform_box
from dualquant.metrics import (
    dq_values_batch,
    mc_dq_error,
    product_bound,
    product_grid,
    rate_fit,
    scalar_bound,
    theoretical_1d_uniform,
    voronoi_1d_uniform_optimum,
)

rng = np.random.default_rng(1)

# scalar bound on a rough random 1D grid
pts = np.sort(rng.uniform(0, 1, size=6))
g = Grid(pts)
xi = rng.uniform(pts[0], pts[-1], size=(100_000, 1))
vals = dq_values_batch(g, xi, EUCLIDEAN_QUADRATIC)
print(f"1D grid gaps {np.round(np.diff(pts), 3)}")
print(f"  max F^2 sampled {vals.max():.6f} <= scalar bound "
      f"{scalar_bound(g):.6f}")

# product bound, tight at the center for the bare 4-corner grid
box = ([0.0, 0.0], [1.0, 1.0])
center = np.array([[0.5, 0.5]])
val = float(dq_values_batch(product_grid(box, 1), center,
                            EUCLIDEAN_QUADRATIC)[0])
print(f"\nproduct bound d=2 m=1: {product_bound(2, 1.0, 1, EUCLIDEAN_QUADRATIC)}"
      f", value at box center: {val} (attained)")

# rate ladder: error ~ m^-2, i.e. slope -1/2 against n ~ m^2
U2 = make_uniform_box([0.0, 0.0], [1.0, 1.0])
ms = (1, 2, 4, 8)
errors = []
print("\nm   n    MC error")
for m in ms:
    grid = product_grid(box, m)
    est = mc_dq_error(grid, U2, EUCLIDEAN_QUADRATIC, 400_000, RngStream(17))
    errors.append(est.value)
    print(f"{m}  {grid.n:3d}  {est.value:.6f}")
slope = rate_fit([m * m for m in ms], errors, p=2)
print(f"log-log slope of the root error vs cell count: {slope:.4f} "
      "(n^(-1/d) decay, d=2)")

# dual quantization needs sqrt(2) times the Voronoi radius in 1D,
# the price of stationarity at equal grid size
print("\nn     dual^(1/2)   voronoi^(1/2)  ratio")
for n in (11, 101, 1001):
    _, dn = theoretical_1d_uniform(n)
    _, en = voronoi_1d_uniform_optimum(n)
    print(f"{n:<5d} {dn ** 0.5:.6f}     {en ** 0.5:.6f}       "
          f"{(dn / en) ** 0.5:.4f}")
print(f"limit: sqrt(2) = {np.sqrt(2):.4f}")
