"""
Limit spectra of the presets
============================

The 1D limit problem only sees the section area w = |D(y1)|. Here we print
the first eigenvalues of every preset for both end conditions and check the
min-max ordering Neumann <= Dirichlet.
"""
import numpy as np

from thinrod import geometry as g
from thinrod.limit1d import solve_limit_spectrum

for name in g.PRESETS:
    p = g.preset(name)
    dirichlet = solve_limit_spectrum(p, "mixed", 5, 4000).eigenvalues
    neumann = solve_limit_spectrum(p, "neumann", 5, 4000).eigenvalues
    print(f"{name:12s} area in [{p.c0:.3f}, {p.c1:.3f}]")
    print("  dirichlet", np.array2string(dirichlet, precision=4))
    print("  neumann  ", np.array2string(neumann, precision=4))
    assert np.all(neumann <= dirichlet)

# scaling the area by a constant does not move the spectrum: a wider
# constant rod has the same limit eigenvalues n^2 pi^2 as a thin one
wide = g.rect_heights(2.0, 2.0, 2.0, 2.0)
print("wide constant:", solve_limit_spectrum(wide, "mixed", 3, 4000).eigenvalues / np.pi ** 2)
