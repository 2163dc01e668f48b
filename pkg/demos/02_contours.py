"""
Level lines and h-contours
==========================

Contours live on the dual lattice.  Where two high sites touch along the
south-west/north-east diagonal they share a circuit; along the other
diagonal they do not.
"""

import numpy as np

from psos.contour import extract_h_contours, level_circuits, shift_down
from psos.gibbs import FREE, ModelParams, total_energy
from psos.lattice import HeightField

eta = HeightField.from_array(np.array([
    [0, 0, 0, 0, 0, 0],
    [0, 1, 1, 1, 0, 0],
    [0, 1, 2, 1, 0, 0],
    [0, 1, 1, 1, 0, 1],
    [0, 0, 0, 0, 1, 0],
    [0, 0, 0, 0, 0, 0],
]))

for h in (1, 2):
    for g in extract_h_contours(eta, h):
        print(f"h={h}: perimeter {g.perimeter:2d}, area {g.area}, interior {sorted(g.interior)}")

###############################################################################
# A circuit with the high side outside bounds a hole and is not an h-contour

ring = np.ones((3, 3), dtype=int)
ring[1, 1] = 0
print([(g.perimeter, high) for g, high in level_circuits(ring, 1)])

###############################################################################
# Lowering the inside of an h-contour by one saves at least its length in energy

g = max(extract_h_contours(eta, 1), key=lambda c: c.area)
lowered = shift_down(eta, g).field
for p in (1.0, 2.0, 3.0):
    params = ModelParams(p, 1.0, FREE)
    print(f"p={p}: H(eta)={total_energy(eta, params):.0f}  H(T eta)={total_energy(lowered, params):.0f}  "
          f"|gamma|={g.perimeter}")
