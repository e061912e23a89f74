"""Invariant density of a perturbed doubling map by power iteration and by Ulam's method."""
import numpy as np

from coupledmaps import ExpandingSiteMap
from coupledmaps.transfer import ExpandingMap1D, cell_averages, invariant_density, ulam_invariant_density

site = ExpandingMap1D(ExpandingSiteMap(2, [(0.05, 1, 0.0)]))
rho = invariant_density(site, M=1024)
for K in (256, 1024, 4096):
    ulam = ulam_invariant_density(site, K)
    err = np.mean(np.abs(cell_averages(rho, K) - ulam))
    print(f"K = {K:5d}  L1 gap to Ulam = {err:.2e}")
print("density range:", rho.values.min(), rho.values.max())
