"""
Second-order cubature from splitting frequencies
================================================

Tabulating the frequencies p_i of splitting outcomes gives a cubature
formula sum(p_i F(x_i)) ~ E F(X).  Stationarity kills the first-order
error term, so the formula is exact for affine F and second-order
accurate whenever F' is Lipschitz - for any grid, optimal or not.

Shown here: weights against their closed 1D form, the affine and
quadratic behaviour, the Lipschitz error bound, and the convex
dominance of the barycentric interpolant.
"""

import numpy as np

from dualquant import EUCLIDEAN_QUADRATIC, Grid, RngStream
from dualquant.cubature import (
    convex_dominance_check,
    expect,
    second_order_report,
    weights,
    weights_exact_1d,
)
from dualquant.distributions import make_uniform_box
from dualquant.metrics import exact_1d_dq_error

U1 = make_uniform_box([0.0], [1.0])
grid = Grid([0.0, 0.5, 1.0])

mc = weights(grid, U1, EUCLIDEAN_QUADRATIC, 200_000, RngStream(3))
exact = weights_exact_1d(grid, U1)
print("cubature weights for {0, 0.5, 1} under U([0,1]):")
print(f"  Monte Carlo  {np.round(mc.weights, 5)}")
print(f"  closed form  {exact.weights}")

print(f"\nexpect(1) = {expect(exact, lambda x: 1.0)}")
print(f"expect(x) = {expect(exact, lambda x: x[0])}  (E X = 0.5)")

# affine integrands are reproduced up to Monte Carlo noise only
aff = second_order_report(grid, U1, EUCLIDEAN_QUADRATIC,
                          lambda x: 3.0 * x[0] - 1.0, 0.0,
                          200_000, RngStream(5))
print(f"\naffine F: |error| {aff.cubature_error:.2e} "
      f"<= 4 std {4 * aff.error_std:.2e}")

# for F(x) = x^2 the error equals the mean quadratic displacement,
# which is exactly the dual quantization error of the grid
quad = second_order_report(grid, U1, EUCLIDEAN_QUADRATIC,
                           lambda x: float(x[0] ** 2), 2.0,
                           200_000, RngStream(6))
d2 = exact_1d_dq_error(grid, U1)
print(f"quadratic F: error {quad.cubature_error:.6f} vs exact d^2 "
      f"{d2:.6f} (= 1/24)")

# a generic smooth integrand respects the Lipschitz bound
cos = second_order_report(grid, U1, EUCLIDEAN_QUADRATIC,
                          lambda x: float(np.cos(x[0])), 1.0,
                          200_000, RngStream(7))
print(f"cos F: error {cos.cubature_error:.2e} <= bound {cos.bound:.6f} "
      f"-> satisfied={cos.satisfied}")

# the interpolated functional dominates convex functions pointwise
rng = np.random.default_rng(8)
g2 = Grid(np.vstack([[[0, 0], [1, 0], [0, 1], [1, 1]],
                     rng.uniform(size=(6, 2))]))
pts = rng.uniform(0.05, 0.95, size=(200, 2))
print(f"\nconvex dominance on a planar grid: "
      f"{convex_dominance_check(g2, lambda x: float(x @ x), pts)}")
print(f"(concave direction flips it: "
      f"{convex_dominance_check(g2, lambda x: -float(x @ x), pts)})")
