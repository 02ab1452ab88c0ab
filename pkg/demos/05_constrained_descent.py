"""Constrained descent of the Willmore energy.

A perturbed sphere is moved onto the round icosphere's area and volume and
then descended with exact constraint restoration after every step.  The
energy approaches 4 pi and the Euler-Lagrange residual drops.
"""

# %%
import math

from helfrich import shapes
from helfrich.curvature import willmore_energy
from helfrich.mesh import Constraints, area, enclosed_volume
from helfrich.minimize import OptimizerState, descend, el_residual, restore_constraints

# %%
pert = shapes.perturbed_sphere(3, 0.05)
goal = Constraints.of(shapes.icosphere(3))
start = restore_constraints(pert, goal)
print(f"perturbed: W/4pi = {willmore_energy(pert) / (4 * math.pi):.5f}, el = {el_residual(pert):.4f}")
print(f"restored:  W/4pi = {willmore_energy(start) / (4 * math.pi):.5f}, el = {el_residual(start):.4f}")

# %%
st = descend(OptimizerState(start, goal))
print(st.log_csv())
print(f"stop reason {st.stop_reason} after {st.n_accepted} accepted steps")
print(f"final: W/4pi = {willmore_energy(st.mesh) / (4 * math.pi):.5f}, el = {el_residual(st.mesh):.4f}")
print(f"constraint errors: area {abs(area(st.mesh) - goal.area0) / goal.area0:.1e}, "
      f"vol {abs(enclosed_volume(st.mesh) - goal.vol0) / goal.vol0:.1e}")
print(f"multipliers (lambda_A, lambda_V) = {st.multipliers}")
