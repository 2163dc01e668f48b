"""
One-point tails in a proxy box
==============================

The tail P(eta_0 >= h) of the centre site is a product of conditional
ratios, each averaged along a chain that pins the centre at or above the
previous level.  For p = 1 the decay rate in h is close to 4 beta.
"""

import math

from psos.experiments import TailEstimator, typical_height

beta = 1.5
est = TailEstimator(p=1, beta=beta, M=32, n_sweeps=1000, burn_in=200, seed=1)
for h in range(4):
    t = est.tail(h)
    print(f"h={h}  p_hat={t.p_hat:.3e}  +-{t.ci:.1e}  -log={-math.log(t.p_hat):.2f}")
print(f"4 beta = {4 * beta}")

###############################################################################
# The typical height at L = 1000 is the largest h whose tail clears 5 beta / L

th = typical_height(beta, 1000, est)
print(f"H = {th.H} (threshold {th.threshold:.4f})")
