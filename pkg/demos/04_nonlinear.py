"""Walkthrough: Picard iteration for a quasilinear toy problem.

B(u) = 1 + eps u.  The contraction factor eta_hat drops as the horizon T
shrinks; a strong nonlinearity on a long horizon does not contract and
the solver says so instead of returning garbage.
"""

from degenop import GridSpec, NonlocalBC
from degenop.errors import NoContraction
from degenop.nonlinear import NonlinearControls, solve_nonlinear, toy_quadratic_model

g = GridSpec.build([0.5], [1.0], [32])
bc = NonlocalBC.uniform("dirichlet", 1)
model = toy_quadratic_model(1.0, source=5.0)

for T in (1.0, 0.5, 0.25):
    _, rep = solve_nonlinear(model, NonlinearControls(r=1e3, T=T, n_steps=20), g, bc)
    print(f"T={T:<5} iterations={len(rep.increments):2d}  eta_hat={rep.eta_hat:.3f}  residual={rep.residual:.1e}")

strong = toy_quadratic_model(10.0, source=5.0)
try:
    solve_nonlinear(strong, NonlinearControls(r=float("inf"), T=1.0, n_steps=20), g, bc)
except NoContraction as exc:
    print(f"\neps=10: {exc}")

_, rep = solve_nonlinear(strong, NonlinearControls(r=float("inf"), T=1.0, n_steps=20, max_shrinks=4), g, bc)
print(f"with auto-shrink: T={rep.T}, eta_hat={rep.eta_hat:.3f}, converged={rep.converged}")
