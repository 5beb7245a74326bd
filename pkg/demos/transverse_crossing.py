"""
A transverse mode crossing a longitudinal one
=============================================

For a unit-square section the first transverse Neumann eigenvalue is
(pi/eps)^2, the third longitudinal one (2 pi)^2. At eps = 1/2 they meet and
the 3D spectrum has a triple eigenvalue (two transverse directions plus
cos(2 pi y1)). With n1 = 2 n_sec the discrete values coincide as well, and
the report flags the cluster.
"""
import numpy as np

from thinrod import geometry as g
from thinrod.harness import ResolutionPolicy, sweep

square = g.rect_heights(0.5, 0.5, 0.5, 0.5)
rep = sweep(square, "neumann", [0.6, 0.5, 0.4], k=6, resolution_policy=ResolutionPolicy(16, 8, 2000))
for e, lam, cl in zip(rep.eps, rep.lambda_eps, rep.clusters):
    print(f"eps={e}: lambda/pi^2 = {np.array2string(lam / np.pi ** 2, precision=4)}  clusters {cl}")
print("fraction of each mode that is section-constant at eps=0.5:",
      np.round(rep.longitudinal_fraction[1], 3))
