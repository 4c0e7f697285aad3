import numpy as np
import pytest
from hypothesis import given, strategies as st

from degenop.boundary import (AxisBC, NonlocalBC, bc_from_dict, bc_rows, eta_determinant,
                              validate_conditions)
from degenop.calculus import GridFunction, GridSpec
from degenop.elliptic import CoefficientField, assemble, solve
from degenop.errors import BCError, EtaDegenerate

nonzero = st.complex_numbers(min_magnitude=0.1, max_magnitude=10, allow_nan=False, allow_infinity=False)


def grid1(n=4, alpha=0.0):
    return GridSpec.build([alpha], [1.0], [n])


def test_eta_dirichlet():
    assert eta_determinant(NonlocalBC.uniform("dirichlet", 1), 0) == 1


def test_eta_neumann():
    assert eta_determinant(NonlocalBC.uniform("neumann", 1), 0) == -1


def test_eta_periodic_pair():
    assert eta_determinant(NonlocalBC.uniform("periodic", 1), 0) == -2


def test_dirichlet_rows_are_point_evaluations():
    r0, r1 = bc_rows(NonlocalBC.uniform("dirichlet", 1), grid1(4), 0)
    assert np.array_equal(r0.toarray()[0], [1, 0, 0, 0, 0])
    assert np.array_equal(r1.toarray()[0], [0, 0, 0, 0, 1])


def test_neumann_row_at_origin():
    g = grid1(4)
    h = g.dtau[0]
    r0, r1 = bc_rows(NonlocalBC.uniform("neumann", 1), g, 0)
    assert np.allclose(r0.toarray()[0], [-3 / (2 * h), 2 / h, -1 / (2 * h), 0, 0])
    assert np.allclose(r1.toarray()[0], [0, 0, 1 / (2 * h), -2 / h, 3 / (2 * h)])


def test_periodic_rows_touch_both_ends():
    g = grid1(6)
    for r in bc_rows(NonlocalBC.uniform("periodic", 1), g, 0):
        row = r.toarray()[0]
        assert row[0] != 0 and row[-1] != 0
    # superposition of the single-end rows
    h = g.dtau[0]
    second = bc_rows(NonlocalBC.uniform("periodic", 1), g, 0)[1].toarray()[0]
    expect = np.zeros(7)
    expect[:3] += np.array([-3, 4, -1]) / (2 * h)
    expect[-3:] -= np.array([1, -4, 3]) / (2 * h)
    assert np.allclose(second, expect)


@given(st.lists(st.floats(-5, 5), min_size=7, max_size=7))
def test_dirichlet_rows_annihilate_vanishing_functions(vals):
    v = np.array(vals)
    r0, r1 = bc_rows(NonlocalBC.uniform("dirichlet", 1), grid1(6), 0)
    assert (r0 @ v)[0] == v[0] and (r1 @ v)[0] == v[-1]


def test_zero_top_coefficients_rejected():
    with pytest.raises(BCError):
        AxisBC((0, 0), ([0], [0]), ([1], [1]))
    with pytest.raises(BCError):
        AxisBC((0, 0), ([1], [1]), ([1], [0]))
    with pytest.raises(BCError):
        AxisBC((0, 2), ([1], [1, 1, 1]), ([1], [1, 1, 1]))
    with pytest.raises(BCError):
        AxisBC((1, 0), ([1], [1]), ([1], [1]))


def test_degenerate_eta_raises():
    # u(0) - u(b) = 0 twice
    bc = NonlocalBC((AxisBC((0, 0), ([1], [-1]), ([-1], [1])),))
    assert abs(eta_determinant(bc, 0)) == 0
    with pytest.raises(EtaDegenerate):
        bc_rows(bc, grid1(), 0)
    report = validate_conditions(CoefficientField.build(grid1(), A=1.0), bc, grid1())
    assert not report.satisfied and any(f.code == "eta" for f in report.errors)


def test_validate_clean_case():
    g = grid1(16, alpha=0.25)
    rep = validate_conditions(CoefficientField.build(g, a=-1.0, A=1.0), NonlocalBC.uniform("dirichlet", 1), g, p=2)
    assert rep.satisfied and rep.ok and rep.messages == []


def test_validate_sign_error():
    g = grid1(16)
    rep = validate_conditions(CoefficientField.build(g, a=1.0, A=1.0), NonlocalBC.uniform("dirichlet", 1), g)
    assert not rep.ok
    assert any("sign condition violated" in f.message for f in rep.errors)


def test_validate_trace_warning():
    g = grid1(16, alpha=0.9)
    rep = validate_conditions(CoefficientField.build(g, a=-1.0, A=1.0), NonlocalBC.uniform("dirichlet", 1), g, p=2)
    assert rep.ok
    assert any("trace condition alpha < 1 - 1/p violated" in f.message for f in rep.warnings)


def test_compat_warning_only_for_coupled_ends():
    g = grid1(16)
    coeffs = CoefficientField.build(g, a=lambda x: -1.0 - x, A=1.0)
    dir_rep = validate_conditions(coeffs, NonlocalBC.uniform("dirichlet", 1), g)
    per_rep = validate_conditions(coeffs, NonlocalBC.uniform("periodic", 1), g)
    assert not any(f.code == "compat" for f in dir_rep.messages)
    assert any(f.code == "compat" for f in per_rep.warnings)


@given(nonzero, st.integers(0, 1))
def test_scaling_scales_eta_and_keeps_solution(c, j):
    g = grid1(12, alpha=0.4)
    base = AxisBC((0, 1), ([1], [0.3, 1]), ([-0.5], [0.2, 2]))
    bc0 = NonlocalBC((base,))
    bc1 = NonlocalBC((base.scaled(j, c),))
    assert eta_determinant(bc1, 0) == pytest.approx(c * eta_determinant(bc0, 0), rel=1e-12)
    coeffs = CoefficientField.build(g, a=-1.0, A=1.0)
    f = GridFunction.from_function(g, lambda x: np.cos(3 * x) + 1j * x)
    u0 = solve(assemble(coeffs, bc0, g, 2.0), f).values
    u1 = solve(assemble(coeffs, bc1, g, 2.0), f).values
    assert np.allclose(u0, u1, rtol=1e-9, atol=1e-9)


def _eta_family(eta):
    # u(0) - u(b) = 0 and -u(0) + (1 + eta) u(b) = 0 have determinant eta
    return NonlocalBC((AxisBC((0, 0), ([1], [-1]), ([-1], [1 + eta])),))


def test_condition_number_diverges_as_eta_vanishes():
    g = grid1(32, alpha=0.5)
    coeffs = CoefficientField.build(g, a=-1.0, A=1.0)
    assert eta_determinant(_eta_family(1e-6), 0) == pytest.approx(1e-6)
    conds = [np.linalg.cond(assemble(coeffs, _eta_family(e), g, 1.0).matrix.toarray()) for e in (1.0, 1e-6)]
    assert conds[1] >= 1e3 * conds[0]


def test_bc_dict_round_trip():
    ax = AxisBC((0, 1), ([1 + 2j], [0.5, 1]), ([-1], [0, 3j]))
    bc = bc_from_dict([ax.to_dict()])
    assert bc[0] == ax
