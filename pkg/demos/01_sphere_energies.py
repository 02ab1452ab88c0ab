"""Bending energies of a few closed surfaces.

Run with ``python3 demos/01_sphere_energies.py``.  Prints the discrete Willmore
and Helfrich energies of refined icospheres, the Willmore energy of the
Clifford torus against its exact value, and the Gauss-Bonnet totals.
"""

# %%
import math

from helfrich import shapes
from helfrich.curvature import compute_curvature, gauss_bonnet_total, helfrich_energy, willmore_energy
from helfrich.mesh import area, enclosed_volume, genus

# %% [markdown]
# The unit sphere minimizes the Willmore energy at 4 pi.  With spontaneous
# curvature h0 = 2 (the sphere's own mean curvature) the Helfrich energy
# vanishes.

# %%
for level in (2, 3, 4, 5):
    m = shapes.icosphere(level)
    c = compute_curvature(m)
    print(f"level {level}: V={m.n_vertices:6d}  area/4pi={area(m) / (4 * math.pi):.5f}  "
          f"vol/(4pi/3)={enclosed_volume(m) / (4 * math.pi / 3):.5f}  "
          f"W_Will/4pi={willmore_energy(m, c) / (4 * math.pi):.5f}  "
          f"W_2={helfrich_energy(m, 2.0, c):.2e}  "
          f"H range=[{c.mean_curvature.min():.4f}, {c.mean_curvature.max():.4f}]")

# %% [markdown]
# The Willmore energy is scale invariant; the Helfrich energy with h0 != 0 is not.

# %%
m = shapes.icosphere(4)
for lam in (0.5, 1.0, 3.0):
    s = m.scaled(lam)
    print(f"radius {lam}: W_Will={willmore_energy(s):.5f}  W_h0=1 {helfrich_energy(s, 1.0):.5f}")

# %% [markdown]
# The Clifford torus (radii sqrt(2) and 1) has Willmore energy 2 pi^2.

# %%
for n in (32, 64, 128):
    t = shapes.torus(math.sqrt(2), 1.0, n, n // 2)
    print(f"torus {n}x{n // 2}: W_Will={willmore_energy(t):.5f}  (2 pi^2 = {2 * math.pi**2:.5f})")

# %% [markdown]
# The total angle defect is fixed by the topology: 2 pi times the Euler characteristic.

# %%
for name, m in (("sphere", shapes.icosphere(3)), ("torus", shapes.torus(2.0, 0.5, 32, 16)),
                ("double torus", shapes.double_torus())):
    print(f"{name:12s} genus {genus(m)}  angle defect / 2pi = {gauss_bonnet_total(m) / (2 * math.pi):+.12f}")
