"""
For A(t) = t^p the Hopf identity |Phi| = p K^(p-1) |h_w| |h_wbar| pins
|h_wbar| to a level curve y = A_k(x) of

    (x^2 + y^2)^(p-1) x y = k (x^2 - y^2)^(p-1),    k = |Phi| / p,

so a minimizer solves h_wbar = B(w, h_w).  This script tabulates one
curve, checks the monotonicity of V = y/x and W = x y that drives the
ellipticity argument, and samples the Lipschitz bound of B.
"""

import numpy as np

from conformal_lab.beltrami import (BeltramiOp, ellipticity_sample, eval_B, level_curve, level_relation,
                                    monotonicity_check)

curve = level_curve(2, 10, 3.5, 12, 400)
print("first and last points of the p = 2, k = 10 curve:")
print(curve[[0, -1]])
print("worst relation residual:", np.max(np.abs(level_relation(2, 10, curve[:, 0], curve[:, 1]))))

# at p = 1 the curve is the hyperbola y = k / x (W constant), which only exists for x > sqrt(k)
for p in (1, 1.5, 2, 3):
    report = monotonicity_check(p, 10, np.geomspace(2 * np.sqrt(10), 30, 20))
    print(f"p = {p}: monotonicity report passes: {report.passed}")

# B keeps h_w conj(h_wbar) parallel to Phi
op = BeltramiOp(2, lambda w: 20 * np.exp(0.5j))
xi = 4 * np.exp(0.2j)
b = eval_B(op, 0.0, xi)
print("B(w, xi) =", b, " arg(xi conj(B)) =", np.angle(xi * np.conj(b)))

# The quotient |B(zeta) - B(xi)| / |zeta - xi| stays below max V < 1, but
# max V approaches 1 for extreme arguments: the equation is degenerate elliptic.
for p in (1.5, 2, 3):
    r = ellipticity_sample(p, 100_000, seed=42, n_theta_tuples=1000)
    print(f"p = {p}: {r['n']} samples, {r['violations']} violations, max V {r['max_V']:.6f}")
