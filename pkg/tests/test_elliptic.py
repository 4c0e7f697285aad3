import numpy as np
import pytest
from hypothesis import given, strategies as st

from degenop.boundary import NonlocalBC
from degenop.calculus import GridFunction, GridSpec
from degenop.elliptic import (CoefficientField, Factorization, assemble, coercivity_scan,
                              coercivity_terms, manufactured_forcing, solve)
from degenop.errors import ConditionError, SingularSystem
from degenop.norms import lp_values
from degenop.sector import SectorSpec

DIR1 = NonlocalBC.uniform("dirichlet", 1)
DIR2 = NonlocalBC.uniform("dirichlet", 2)


def rel_l2(u, v, grid):
    return lp_values(u - v, grid, 2) / lp_values(v, grid, 2)


def manufactured_error(alpha, n, lam=0.0, A=0.0):
    g = GridSpec.build([alpha], [1.0], [n])
    coeffs = CoefficientField.build(g, a=-1.0, A=A)
    exact, f = manufactured_forcing(g, coeffs, lam)
    u = solve(assemble(coeffs, DIR1, g, lam), f)
    return rel_l2(u.values, exact.values, g)


def test_hand_assembled_5x5():
    g = GridSpec.build([0.0], [1.0], [4])
    op = assemble(CoefficientField.build(g, a=-1.0, A=0.0), DIR1, g, 0.0, check=False)
    h2 = 0.25**2
    expect = np.zeros((5, 5))
    expect[0, 0] = expect[4, 4] = 1.0
    for i in range(1, 4):
        expect[i, i - 1:i + 2] = np.array([-1, 2, -1]) / h2
    assert np.allclose(op.matrix.toarray(), expect, atol=1e-12)


def test_block_diagonal_shift():
    g = GridSpec.build([0.0], [1.0], [4])
    op = assemble(CoefficientField.build(g, m=2, a=-1.0, A=np.diag([1.0, 2.0])), DIR1, g)
    d = op.matrix.diagonal()
    assert d[1 * 2 + 1] - d[1 * 2 + 0] == pytest.approx(1.0)
    M = op.matrix.toarray()
    assert np.all(M[2::2, 1::2] == 0) and np.all(M[3::2, 0::2] == 0)


@pytest.mark.parametrize("m", [1, 2])
def test_2d_sparsity(m):
    g = GridSpec.build([0.0, 0.0], [1.0, 1.0], [2, 2])
    op = assemble(CoefficientField.build(g, m=m, a=-1.0, A=np.eye(m)), DIR2, g)
    assert op.shape == (9 * m, 9 * m)
    centre = 4 * m
    for c in range(m):
        assert op.matrix[centre + c].nnz <= 5
    assert len(op.bc_index) == 8 * m


def test_bc_rows_per_transverse_node():
    g = GridSpec.build([0.2, 0.4], [1.0, 1.0], [5, 6])
    op = assemble(CoefficientField.build(g, A=1.0), DIR2, g)
    # axis 0 owns whole faces; axis 1 owns its faces at axis-0 interior nodes
    assert len(op.bc_index) == 2 * 7 + 2 * 4


def test_sign_violation_raises_at_assembly():
    g = GridSpec.build([0.0], [1.0], [8])
    with pytest.raises(ConditionError, match="sign condition"):
        assemble(CoefficientField.build(g, a=1.0, A=1.0), DIR1, g)


def test_zero_forcing_gives_zero():
    g = GridSpec.build([0.5, 0.2], [1.0, 1.0], [8, 8])
    op = assemble(CoefficientField.build(g, a=-1.0, A=1.0), DIR2, g, 1j)
    u = solve(op, GridFunction.constant(g, 0.0))
    assert np.all(u.values == 0)


def test_solve_residual_within_tolerance(rng):
    g = GridSpec.build([0.5], [1.0], [64])
    op = assemble(CoefficientField.build(g, a=-1.0, A=1.0), NonlocalBC.uniform("periodic", 1), g, 3 - 2j)
    f = rng.standard_normal(op.shape[0]) + 0j
    lu = Factorization(op)
    u = lu.solve_flat(f)
    fz = f.copy()
    fz[op.bc_index] = 0
    assert np.linalg.norm(op.matrix @ u - fz) <= 1e-10 * np.linalg.norm(fz)


def test_sine_manufactured_alpha0():
    errs = [manufactured_error(0.0, n) for n in (32, 64)]
    assert errs[1] < 1e-3
    assert np.log2(errs[0] / errs[1]) == pytest.approx(2.0, abs=0.2)


def test_manufactured_degenerate_order():
    errs = [manufactured_error(0.5, n, lam=1 + 1j, A=1.0) for n in (64, 128, 256)]
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert errs[-1] <= 1e-3
    assert np.all(np.abs(orders - 2.0) < 0.3)


def test_singular_system_surfaces():
    g = GridSpec.build([0.0], [1.0], [8])
    op = assemble(CoefficientField.build(g, a=0.0, A=1.0), DIR1, g, -1.0)
    with pytest.raises(SingularSystem):
        solve(op, GridFunction.constant(g, 1.0))


def test_nested_one_dimensional_consistency(rng):
    alphas, lam = (0.3, 0.6), 1.0 + 2.0j
    g = GridSpec.build(list(alphas), [1.0, 1.0], [16, 16])
    coeffs = CoefficientField.build(g, a=-1.0, A=1.0)
    op2 = assemble(coeffs, DIR2, g, lam)
    f = rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape)
    u2 = solve(op2, GridFunction(g, f)).values[..., 0]

    g0 = GridSpec((g.axes[0],))
    op0 = assemble(CoefficientField.build(g0, a=-1.0, A=0.0), DIR1, g0)
    S0 = op0.restricted()
    inner = op0.interior_index
    g1 = GridSpec((g.axes[1],))
    nested = CoefficientField.build(g1, m=len(inner), a=-1.0, A=S0 + np.eye(len(inner)))
    op1 = assemble(nested, DIR1, g1, lam, check=False)
    f1 = f[inner, :].T  # axis-1 nodes x axis-0 interior components
    u1 = solve(op1, GridFunction(g1, f1)).values
    assert np.abs(u1.T - u2[inner, :]).max() <= 1e-8 * np.abs(u2).max()


@given(st.complex_numbers(min_magnitude=0.5, max_magnitude=1e3, allow_nan=False, allow_infinity=False),
       st.integers(0, 2**31 - 1))
def test_conjugate_symmetry(lam, seed):
    g = GridSpec.build([0.4], [1.0], [24])
    coeffs = CoefficientField.build(g, a=lambda x: -1.0 - x, A=2.0)
    r = np.random.default_rng(seed)
    f = r.standard_normal((25, 1)) + 1j * r.standard_normal((25, 1))
    if abs(lam.imag) < 1e-3 and lam.real < 0:
        lam = -lam
    u = solve(assemble(coeffs, DIR1, g, lam), GridFunction(g, f)).values
    v = solve(assemble(coeffs, DIR1, g, np.conj(lam)), GridFunction(g, np.conj(f))).values
    assert np.allclose(v, np.conj(u), rtol=1e-10, atol=1e-12 * np.abs(u).max())


def test_perturbation_is_linear_in_eps():
    g = GridSpec.build([0.5, 0.3], [1.0, 1.0], [24, 24])
    lam = 2.0
    f = GridFunction.from_function(g, lambda x, y: np.sin(np.pi * x) * (1 + y))
    u0 = solve(assemble(CoefficientField.build(g, a=-1.0, A=1.0), DIR2, g, lam), f).values
    epss = np.array([1e-1, 1e-2, 1e-3])
    diffs = []
    for eps in epss:
        coeffs = CoefficientField.build(g, a=-1.0, A=1.0, A_first=[eps, -0.5 * eps])
        ue = solve(assemble(coeffs, DIR2, g, lam), f).values
        diffs.append(lp_values(ue - u0, g, 2) / lp_values(u0, g, 2))
    slope = np.polyfit(np.log(epss), np.log(diffs), 1)[0]
    assert abs(slope - 1.0) <= 0.2
    assert np.all(np.array(diffs) / epss < 10)


def test_coercivity_scan_empty_for_zero_trials():
    g = GridSpec.build([0.0], [1.0], [8])
    assert coercivity_scan(CoefficientField.build(g, A=1.0), DIR1, g, SectorSpec.default(), 0) == []


def test_coercivity_lambda_zero_term():
    g = GridSpec.build([0.0], [1.0], [32])
    coeffs = CoefficientField.build(g, a=-1.0, A=1.0)
    sector = SectorSpec(np.pi / 2, (1.0,), (0.0,), include_zero=True)
    recs = coercivity_scan(coeffs, DIR1, g, sector, 3, seed=5)
    zero = recs[0]
    assert zero.lam == 0 and np.isfinite(zero.ratio) and zero.ratio > 0
    # only the second derivative and A u terms survive at lam = 0
    f = GridFunction.from_function(g, lambda x: np.sin(np.pi * x))
    u = solve(assemble(coeffs, DIR1, g, 0.0), f)
    r = coercivity_terms(u, f, coeffs.A, 0.0)
    from degenop.calculus import tau_diff
    manual = (lp_values(tau_diff(u.values, g.dtau[0], 0, 2), g, 2) + lp_values(u.values, g, 2)) / lp_values(f.values, g, 2)
    assert r == pytest.approx(manual, rel=1e-12)


def test_resolvent_decay_bound():
    g = GridSpec.build([0.0], [1.0], [64])
    coeffs = CoefficientField.build(g, a=-1.0, A=1.0)
    op0 = assemble(coeffs, DIR1, g, 0.0)
    for lam in (1e2, 1e3, 1e4):
        f = GridFunction.from_function(g, lambda x: x * (1 - x))
        u = solve(assemble(coeffs, DIR1, g, lam), f)
        assert lam * lp_values(u.values, g, 2) / lp_values(f.values, g, 2) <= 1.0 + 1e-8


def test_scan_is_deterministic():
    g = GridSpec.build([0.5], [1.0], [32])
    coeffs = CoefficientField.build(g, A=1.0)
    s = SectorSpec.default(decades=(0, 2), n_rays=3)
    a = coercivity_scan(coeffs, DIR1, g, s, 4, seed=9)
    b = coercivity_scan(coeffs, DIR1, g, s, 4, seed=9, threads=2)
    assert [r.ratio for r in a] == [r.ratio for r in b]
