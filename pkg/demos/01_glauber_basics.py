"""
Heat-bath Glauber dynamics on a small box
=========================================

A chain started flat at zero under a floor and a ceiling.  At this
temperature the surface stays close to the floor, with small islands
at height one and two appearing and dissolving.
"""

import numpy as np

from psos.dynamics import GlauberChain, make_rng
from psos.gibbs import FLOOR_CEILING, ModelParams, total_energy
from psos.lattice import HeightField

L = 16
params = ModelParams(p=1.5, beta=0.8, mode=FLOOR_CEILING, n_plus=4)

# one random stream per (seed, replica); reruns are bit-identical
chain = GlauberChain(params, HeightField.constant(L, 0), make_rng(0, 1))

###############################################################################
# Mean height and energy every 50 sweeps

for block in range(10):
    chain.sweeps(50)
    h = chain.heights
    print(f"sweep {50 * (block + 1):4d}  mean {h.mean():.3f}  max {h.max()}  "
          f"energy {total_energy(chain.field, params):.1f}")

###############################################################################
# The final field, row by row

print(np.array2string(chain.heights, max_line_width=120))
