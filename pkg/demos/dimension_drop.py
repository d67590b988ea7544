"""Local dimension of chaos over area measure on the disk, for a few values of gamma.

Lattice backend, 512 cells, level 6.  The printed target is 2 - gamma^2/2.  At these coarse radii the
estimate sits above the target once gamma approaches 1; finer levels close the gap.
Run with ``python3 demos/dimension_drop.py``.
"""

import numpy as np

from gmcsim.analysis import local_dimension
from gmcsim.domain import Domain
from gmcsim.gmc import GmcApproximant, GridLadder, _reweight
from gmcsim.measures import AtomList

D = Domain.disk()
LEVEL = 6
RADII = 2.0 ** -np.arange(4, 7)

gl = GridLadder(D, 512, [LEVEL])
base = gl.node_atoms()
print(f"{'gamma':>6} {'mean slope':>11} {'target':>7}")
for gamma in (0.0, 0.5, 1.0):
    means = []
    for r in range(4):
        w = _reweight(base.weights, gl.node_values(gl.field(3, r))[0], LEVEL, gamma) if gamma else base.weights
        ap = GmcApproximant(LEVEL, gamma, AtomList(base.points, w, base.provenance), base)
        means.append(local_dimension(ap, RADII, 200, seed=3, replicate=r, collar=0.3, domain=D, mesh=gl.h).mean)
    print(f"{gamma:6.2f} {np.mean(means):11.3f} {2 - gamma**2 / 2:7.3f}")
