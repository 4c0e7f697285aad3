"""Walkthrough: time stepping and the maximal-regularity ratio.

The ratio of solution norms to forcing norms should not blow up as the
shift d grows; both schemes keep it essentially flat.
"""

import warnings

import numpy as np

from degenop import CoefficientField, GridSpec, NonlocalBC, ParabolicProblem, step_scheme
from degenop.errors import StabilityWarning
from degenop.parabolic import maximal_regularity_ratio

g = GridSpec.build([0.5], [1.0], [64])
bc = NonlocalBC.uniform("dirichlet", 1)
coeffs = CoefficientField.build(g, a=-1.0, A=1.0)
F = np.random.default_rng(0).standard_normal(g.shape)
F[0] = F[-1] = 0.0

print("   d   implicit-euler   crank-nicolson")
with warnings.catch_warnings():
    warnings.simplefilter("ignore", StabilityWarning)
    for d in (10, 20, 40, 80):
        row = [maximal_regularity_ratio(step_scheme(ParabolicProblem(coeffs, bc, g, d, 1.0, 50, lambda t: F), s))
               for s in ("implicit-euler", "crank-nicolson")]
        print(f"{d:4d}   {row[0]:14.4f}   {row[1]:14.4f}")

print("\nrough forcing with large steps makes Crank-Nicolson ring:")
with warnings.catch_warnings(record=True) as caught:
    warnings.simplefilter("always")
    step_scheme(ParabolicProblem(coeffs, bc, g, 0.0, 1.0, 5, lambda t: F), "crank-nicolson")
print("  " + (str(caught[0].message) if caught else "no warning"))
