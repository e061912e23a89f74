"""Straighten the coordinate foliation of a coupled tripling system and inspect the chart."""
import numpy as np

from coupledmaps import ExpandingSiteMap, diffusive_system
from coupledmaps.foliation import fiber_map_G, phi_jacobian, straighten_batch

rng = np.random.default_rng(0)
for N in (8, 32, 128):
    system = diffusive_system(N, 0.1, ExpandingSiteMap(3))
    y, yhat = rng.random(4), rng.random((4, N - 1))
    X, res, _ = straighten_batch(system, 0, y, yhat)
    D = phi_jacobian(system, 0, y, yhat, X)
    off = np.abs(D[:, 1:, 0]).max()
    gap = fiber_map_G(system, 0, yhat[0], M=64).c2_gap
    print(f"N = {N:4d}  residual {res.max():.1e}  max |d_i Phi_m| {off:.2e}  d_C2(G, H) {gap:.2e}")
