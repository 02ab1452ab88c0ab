"""Density ratios, excess decay and good points.

On a smooth surface the tilt excess against the tangent plane decays like
the square of the radius, the density ratio tends to one, and points with
small local curvature mass are good.  A spike concentrates curvature and
shows up as a cluster of bad vertices.
"""

# %%
import math

import numpy as np

from helfrich import shapes
from helfrich.diagnostics import density_ratio, diameter_check, excess_report, good_point_map

# %%
m = shapes.icosphere(5)
x = m.vertices[0]
om = np.array([0.4, 0.2, 0.1, 0.05])
tilts = []
for o in om:
    r = excess_report(m, x, o, normal=x)
    tilts.append(r.tilt)
    print(f"omega {o:.2f}: tilt {r.tilt:.3e} (pi omega^2 = {math.pi * o * o:.3e}), "
          f"height {r.height:.3e}, density {r.density_ratio:.5f}")
print(f"tilt decay exponent {np.polyfit(np.log(om), np.log(tilts), 1)[0]:.3f}")

# %%
for sigma in (0.1, 0.5, 1.0):
    print(f"sphere density ratio at sigma {sigma}: {density_ratio(m, x, sigma):.5f}")

# %%
spike = shapes.spiked_sphere(4, height=0.4, width=0.12)
for eps0 in (0.5, 1.0, 2.0, 4.0):
    good, n_bad = good_point_map(spike, eps0, 0.3)
    print(f"eps0 {eps0}: {n_bad} bad vertices of {spike.n_vertices}")

# %%
for name, s in (("sphere", shapes.icosphere(4)), ("capsule 10 x 0.5", shapes.capsule(10.0, 0.5))):
    print(f"{name}: diam / sqrt(area * W_Will) = {diameter_check(s):.4f}")
