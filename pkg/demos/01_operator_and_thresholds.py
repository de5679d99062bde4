"""The spatial operator, the noise model, and the threshold constants.

Run with ``python demos/01_operator_and_thresholds.py``; takes a few seconds.
"""

# %% The Neumann Laplacian on a cell-centred grid
import numpy as np

from epispde import (
    CoefficientFamily,
    DiscreteSemigroup,
    Grid,
    ModelParams,
    NoiseSpec,
    compute_thresholds,
    cosine_field,
    covariance,
    integrate,
    laplacian_apply,
)

grid = Grid(64)
sg = DiscreteSemigroup(grid, k=0.05)
bump = np.exp(-200 * (grid.centers - 0.3) ** 2)

# zero-flux boundaries: the Laplacian moves mass around but never creates it
print("integral of Laplacian(bump):", integrate(laplacian_apply(bump, sg), grid))

# %% Heat flow spreads the bump but keeps its mass
for t in (0.0, 0.1, 1.0, 10.0):
    u = sg.apply(bump, t)
    print(f"t={t:5.1f}  max={u.max():.4f}  mass={integrate(u, grid):.6f}")

# the spectral propagator is exact: applying 0.4 then 0.6 equals applying 1.0
print("semigroup law residual:", np.abs(sg.apply(sg.apply(bump, 0.4), 0.6) - sg.apply(bump, 1.0)).max())

# %% Correlated noise from a truncated cosine expansion
spec = NoiseSpec.kl(CoefficientFamily.geometric(a=0.1, q=0.5), K=20)
trace, tail = spec.trace(2)
print(f"trace a2 = {trace:.4f}, variance discarded by truncation = {tail:.2e}")
for x, y in [(0.25, 0.25), (0.25, 0.75), (0.0, 1.0)]:
    print(f"Cov(W(1,{x}), W(1,{y})) = {covariance(spec, x, y, 1.0):.4f}")

# %% Threshold constants for a spatially varying example
params = ModelParams.constant(grid, lam=1.0, mu1=0.5, mu2=0.5, alpha=0.2).replace(
    mu2=cosine_field(grid, 0.5, 0.1), alpha=cosine_field(grid, 0.2, 0.05))
report = compute_thresholds(params, spec, grid)
print(report)
print("prediction:", report.prediction())

# %% Under space-independent noise the threshold also gives a moment decay rate
params = ModelParams.constant(grid, lam=1.0, mu1=0.5, mu2=0.4, alpha=0.3)
report = compute_thresholds(params, NoiseSpec.space_independent(0.2, 0.2), grid, p=0.5)
print(f"R_p = {report.r_p:.3f}; E(int I)^p should decay at least like exp({-0.5 * report.r_p:.3f} t)")
