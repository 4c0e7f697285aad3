import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from degenop.boundary import NonlocalBC
from degenop.calculus import GridFunction, GridSpec
from degenop.elliptic import CoefficientField, assemble
from degenop.errors import DivisionByZero, DomainError, StabilityWarning
from degenop.norms import NormSpec, lp_values
from degenop.parabolic import (SCHEMES, ParabolicProblem, forcing_times, maximal_regularity_ratio,
                               step_scheme)

DIR1 = NonlocalBC.uniform("dirichlet", 1)


def setup(alpha=0.5, n=64, A=1.0):
    g = GridSpec.build([alpha], [1.0], [n])
    return g, CoefficientField.build(g, a=-1.0, A=A)


def rough_forcing(g, seed=0):
    F = np.random.default_rng(seed).standard_normal(g.shape)
    F[0] = F[-1] = 0.0
    return F


def richardson_order(scheme, levels=(20, 40, 80)):
    g, c = setup()
    tau = g.mesh("tau")[0]
    k = np.pi / g.axes[0].tau_b
    f = lambda t: (2 * t + t * t * (k * k + 1)) * np.sin(k * tau)
    sols = [step_scheme(ParabolicProblem(c, DIR1, g, 0.0, 1.0, n, f), scheme).snapshots[-1] for n in levels]
    return np.log2(np.abs(sols[0] - sols[1]).max() / np.abs(sols[1] - sols[2]).max())


def test_forcing_times():
    assert np.allclose(forcing_times("implicit-euler", 1.0, 4), [0.25, 0.5, 0.75, 1.0])
    assert np.allclose(forcing_times("crank-nicolson", 1.0, 4), [0.125, 0.375, 0.625, 0.875])
    with pytest.raises(DomainError):
        forcing_times("rk4", 1.0, 4)


@pytest.mark.parametrize("scheme", list(SCHEMES))
def test_zero_forcing(scheme):
    g, c = setup()
    sol = step_scheme(ParabolicProblem(c, DIR1, g, 1.0, 1.0, 8), scheme)
    assert np.all(sol.snapshots == 0)


def test_initial_snapshot_is_zero():
    g, c = setup()
    sol = step_scheme(ParabolicProblem(c, DIR1, g, 0.0, 1.0, 8, lambda t: 1.0))
    assert np.all(sol.snapshot(0).values == 0)
    assert sol.n_steps == 8 and sol.times[-1] == pytest.approx(1.0)


def test_problem_validation():
    g, c = setup()
    for kw in ({"T": 0.0}, {"n_steps": 0}, {"d": -1.0}):
        with pytest.raises(DomainError):
            ParabolicProblem(c, DIR1, g, **kw)


def test_eigenmode_matches_scalar_ode():
    g, c = setup(0.5, 32)
    op = assemble(c, DIR1, g)
    mu, vec = np.linalg.eig(op.restricted())
    j = np.argmin(mu.real)
    phi = op.extend(vec[:, j]).reshape(g.shape + (1,))
    mu, d, T = mu[j].real, 2.0, 1.0
    errs = []
    for n in (40, 80, 160):
        sol = step_scheme(ParabolicProblem(c, DIR1, g, d, T, n, lambda t: phi))
        coef = sol.snapshots[-1, 5, 0] / phi[5, 0]
        exact = (1 - np.exp(-(mu + d) * T)) / (mu + d)
        errs.append(abs(coef - exact))
    assert errs[-1] < 1e-3
    assert np.log2(errs[0] / errs[1]) == pytest.approx(1.0, abs=0.2)


def test_implicit_euler_order():
    assert abs(richardson_order("implicit-euler") - 1.0) <= 0.3


def test_crank_nicolson_order():
    assert abs(richardson_order("crank-nicolson") - 2.0) <= 0.3


def test_smooth_crank_nicolson_does_not_warn():
    with warnings.catch_warnings():
        warnings.simplefilter("error", StabilityWarning)
        richardson_order("crank-nicolson")


def test_rough_crank_nicolson_warns():
    g, c = setup(0.0, 128)
    F = rough_forcing(g)
    with pytest.warns(StabilityWarning):
        step_scheme(ParabolicProblem(c, DIR1, g, 0.0, 1.0, 10, lambda t: F), "crank-nicolson")


@pytest.mark.filterwarnings("ignore::degenop.errors.StabilityWarning")
@pytest.mark.parametrize("scheme", list(SCHEMES))
def test_ratio_uniform_in_shift(scheme):
    g, c = setup()
    F = rough_forcing(g)
    ratios = [maximal_regularity_ratio(step_scheme(ParabolicProblem(c, DIR1, g, d, 1.0, 50, lambda t: F), scheme))
              for d in (10, 20, 40, 80)]
    assert max(ratios) / min(ratios) <= 2.0


def test_ratio_errors():
    g, c = setup()
    with pytest.raises(DivisionByZero):
        maximal_regularity_ratio(step_scheme(ParabolicProblem(c, DIR1, g, 0.0, 1.0, 8)))
    with pytest.raises(DomainError):
        maximal_regularity_ratio(step_scheme(ParabolicProblem(c, DIR1, g, 0.0, 1.0, 3, lambda t: 1.0)))


@pytest.mark.filterwarnings("ignore::degenop.errors.StabilityWarning")
@given(st.floats(1e-3, 1e3), st.sampled_from(list(SCHEMES)))
def test_ratio_homogeneous(scale, scheme):
    g, c = setup(0.3, 24)
    F = rough_forcing(g, 3)
    r1 = maximal_regularity_ratio(step_scheme(ParabolicProblem(c, DIR1, g, 1.0, 0.5, 8, lambda t: F), scheme))
    r2 = maximal_regularity_ratio(step_scheme(ParabolicProblem(c, DIR1, g, 1.0, 0.5, 8, lambda t: scale * F), scheme))
    assert r1 == pytest.approx(r2, rel=1e-9)


def test_single_mode_ratio_against_scalar_reduction():
    from scipy.integrate import quad
    from degenop.calculus import tau_diff
    g, c = setup(0.5, 64)
    op = assemble(c, DIR1, g)
    mu, vec = np.linalg.eig(op.restricted())
    j = np.argmin(mu.real)
    phi = op.extend(vec[:, j]).reshape(g.shape + (1,)).real
    mu, d, T = mu[j].real, 5.0, 1.0
    sol = step_scheme(ParabolicProblem(c, DIR1, g, d, T, 400, lambda t: phi))
    s = mu + d
    cn = lambda t: (1 - np.exp(-s * t)) / s
    dcn = lambda t: np.exp(-s * t)
    L2t = lambda fn: np.sqrt(quad(lambda t: fn(t) ** 2, 0, T)[0])
    nphi = lp_values(phi, g, 2)
    nd2 = lp_values(tau_diff(phi, g.dtau[0], 0, 2), g, 2)
    oracle = (L2t(dcn) * nphi + L2t(cn) * nd2 + L2t(cn) * nphi) / (np.sqrt(T) * nphi)
    assert maximal_regularity_ratio(sol) == pytest.approx(oracle, rel=0.1)


def test_maximum_principle_surrogate():
    g, c = setup(0.5, 48, A=0.5)
    F = np.abs(rough_forcing(g, 7))
    sol = step_scheme(ParabolicProblem(c, DIR1, g, 0.0, 1.0, 30, lambda t: F))
    assert sol.snapshots.real.min() >= -1e-12


def test_semigroup_decay_after_cutoff():
    g, c = setup(0.5, 48, A=0.0)
    F = np.abs(rough_forcing(g, 2))
    f = lambda t: F if t <= 0.3 else 0.0 * F
    sol = step_scheme(ParabolicProblem(c, DIR1, g, 0.0, 1.0, 50, f))
    norms = [lp_values(sol.snapshots[s], g, 2) for s in range(16, 51)]
    assert np.all(np.diff(norms) < 0)


def test_diagnostics_keys_and_2d():
    g = GridSpec.build([0.5, 0.2], [1.0, 1.0], [12, 10])
    c = CoefficientField.build(g, m=2, a=-1.0, A=np.diag([1.0, 2.0]))
    bc = NonlocalBC.uniform("neumann", 2)
    sol = step_scheme(ParabolicProblem(c, bc, g, 1.0, 0.5, 6, lambda t: np.ones(g.shape + (2,))), "crank-nicolson")
    diag = sol.diagnostics(NormSpec(2, 2))
    assert set(diag) == {"dudt", "d2", "Au", "f"} and len(diag["d2"]) == 2
    assert all(np.isfinite(v) for v in [diag["dudt"], diag["Au"], diag["f"]] + diag["d2"])
