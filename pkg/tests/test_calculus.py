import numpy as np
import pytest
from hypothesis import given, strategies as st

from degenop.calculus import (DegenerateAxis, GridFunction, GridSpec, degen_derivative,
                              diff_matrix, inverse_map, tau_diff, tau_map)
from degenop.errors import DomainError

alphas = st.floats(0.0, 0.95)
lengths = st.floats(0.1, 10.0)


@pytest.mark.parametrize("x, alpha, expected", [(1.0, 0.0, 1.0), (1.0, 0.5, 2.0), (0.25, 0.5, 1.0)])
def test_tau_map_examples(x, alpha, expected):
    assert tau_map(x, DegenerateAxis(alpha, 1.0, 8)) == pytest.approx(expected, rel=1e-15)


@pytest.mark.parametrize("tau, alpha, expected", [(1.0, 0.0, 1.0), (2.0, 0.5, 1.0), (1.0, 0.5, 0.25)])
def test_inverse_map_examples(tau, alpha, expected):
    assert inverse_map(tau, DegenerateAxis(alpha, 1.0, 8)) == pytest.approx(expected, rel=1e-15)


def test_maps_reject_out_of_range():
    ax = DegenerateAxis(0.5, 1.0, 8)
    for bad in (-0.1, 1.5):
        with pytest.raises(DomainError):
            tau_map(bad, ax)
    with pytest.raises(DomainError):
        inverse_map(ax.tau_b * 1.01, ax)
    with pytest.raises(DomainError):
        inverse_map(-1.0, ax)


@pytest.mark.parametrize("alpha, b, n", [(1.0, 1.0, 8), (1.2, 1.0, 8), (-0.1, 1.0, 8), (0.5, 0.0, 8), (0.5, 1.0, 1)])
def test_axis_rejects_bad_parameters(alpha, b, n):
    with pytest.raises(DomainError):
        DegenerateAxis(alpha, b, n)


def test_alpha_one_message():
    with pytest.raises(DomainError, match="alpha must be < 1"):
        DegenerateAxis(1.0, 1.0, 4)


@given(alphas, lengths, st.floats(1e-6, 1.0))
def test_inverse_is_left_inverse(alpha, b, frac):
    ax = DegenerateAxis(alpha, b, 4)
    x = frac * b
    assert inverse_map(tau_map(x, ax), ax) == pytest.approx(x, rel=1e-12)


@given(alphas, lengths)
def test_tau_b_and_monotone(alpha, b):
    ax = DegenerateAxis(alpha, b, 4)
    assert tau_map(b, ax) == pytest.approx(ax.tau_b, rel=1e-14)
    xs = np.linspace(0, b, 50)
    assert np.all(np.diff(tau_map(xs, ax)) > 0)


@given(alphas, lengths, st.integers(2, 64))
def test_grid_nodes(alpha, b, n):
    ax = DegenerateAxis(alpha, b, n)
    t = ax.tau_nodes
    assert np.allclose(t, np.arange(n + 1) * ax.dtau, rtol=1e-14, atol=0)
    x = ax.x_nodes
    assert x[0] == 0.0 and x[-1] == b
    assert np.all(np.diff(x) > 0)


@given(st.floats(0.05, 0.95), st.integers(3, 64))
def test_mesh_grading(alpha, n):
    dx = np.diff(DegenerateAxis(alpha, 1.0, n).x_nodes)
    assert np.all(np.diff(dx) > 0)


def test_grid_function_shape_and_length():
    g = GridSpec.build([0.2, 0.4], [1.0, 2.0], [4, 6])
    u = GridFunction.constant(g, 1.0, m=3)
    assert u.values.shape == (5, 7, 3)
    assert u.flat().size == 5 * 7 * 3
    with pytest.raises(DomainError):
        GridFunction(g, np.zeros((4, 7, 3)))


def test_grid_function_is_immutable():
    g = GridSpec.build([0.0], [1.0], [4])
    u = GridFunction.constant(g, 1.0)
    with pytest.raises(ValueError):
        u.values[0, 0] = 2.0


def test_constant_has_zero_derivative():
    g = GridSpec.build([0.5], [1.0], [16])
    u = GridFunction.constant(g, 3.0 - 1j)
    for order in (1, 2):
        assert np.abs(degen_derivative(u, 0, order).values).max() < 1e-12


def test_derivative_of_tau_is_one():
    g = GridSpec.build([0.5], [1.0], [16])
    u = GridFunction.from_function(g, lambda t: t, coords="tau")
    assert np.allclose(degen_derivative(u, 0, 1).values, 1.0, atol=1e-12)


def test_derivative_of_x_matches_symbolic():
    # x**alpha d/dx x = sqrt(x) at x = 0.25 for alpha = 0.5
    g = GridSpec.build([0.5], [1.0], [256])
    u = GridFunction.from_function(g, lambda x: x)
    d = degen_derivative(u, 0, 1)
    j = int(np.argmin(np.abs(g.x_nodes[0] - 0.25)))
    assert g.x_nodes[0][j] == pytest.approx(0.25, rel=1e-12)
    assert abs(d.values[j, 0] - 0.5) < 1e-3


@given(st.floats(0.0, 0.9), st.integers(3, 40), st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3))
def test_quadratics_in_tau_are_exact(alpha, n, c0, c1, c2):
    g = GridSpec.build([alpha], [1.0], [n])
    u = GridFunction.from_function(g, lambda t: c0 + c1 * t + c2 * t**2, coords="tau")
    t = g.tau_nodes[0]
    scale = 1 + abs(c0) + abs(c1) + abs(c2)
    d1 = degen_derivative(u, 0, 1).values[:, 0]
    d2 = degen_derivative(u, 0, 2).values[:, 0]
    assert np.allclose(d1, c1 + 2 * c2 * t, atol=1e-9 * scale * n)
    assert np.allclose(d2, 2 * c2, atol=1e-8 * scale * n * n)


@pytest.mark.parametrize("alpha", [0.0, 0.3, 0.7])
def test_composition_is_first_order(alpha):
    errs = []
    for n in (32, 64, 128):
        g = GridSpec.build([alpha], [1.0], [n])
        tb = g.axes[0].tau_b
        u = GridFunction.from_function(g, lambda t: np.sin(2 * t / tb), coords="tau")
        dd = degen_derivative(degen_derivative(u, 0, 1), 0, 1).values
        errs.append(np.abs(degen_derivative(u, 0, 2).values - dd).max() * tb**2)
    ratios = np.array(errs[:-1]) / np.array(errs[1:])
    assert np.all(ratios > 1.7)
    # C * dtau with C independent of alpha (tau rescaled to unit length)
    assert errs[-1] * 128 < 10


def test_derivative_errors():
    g = GridSpec.build([0.0], [1.0], [2])
    u = GridFunction.constant(g, 1.0)
    with pytest.raises(DomainError):
        degen_derivative(u, 1, 1)
    with pytest.raises(DomainError):
        degen_derivative(u, 0, 3)


def test_coarse_grid_rejected():
    g = GridSpec.build([0.0, 0.0], [1.0, 1.0], [2, 4])
    u = GridFunction.constant(g, 1.0)
    assert np.allclose(degen_derivative(u, 1, 2).values, 0.0)


@pytest.mark.parametrize("order", [1, 2])
@pytest.mark.parametrize("n", [2, 3, 9])
def test_diff_matrix_matches_tau_diff(order, n, rng):
    v = rng.standard_normal(n + 1)
    h = 0.37
    assert np.allclose(diff_matrix(n + 1, h, order) @ v, tau_diff(v, h, 0, order), atol=1e-12)


def test_axis_derivative_in_2d_acts_along_axis():
    g = GridSpec.build([0.3, 0.6], [1.0, 2.0], [8, 10])
    u = GridFunction.from_function(g, lambda t1, t2: t1 * 3 + t2**2, coords="tau")
    t2 = g.mesh("tau")[1]
    assert np.allclose(degen_derivative(u, 0, 1).values[..., 0], 3.0)
    assert np.allclose(degen_derivative(u, 1, 1).values[..., 0], 2 * t2)


def test_grid_csv(tmp_path):
    g = GridSpec.build([0.5, 0.0], [1.0, 2.0], [4, 3])
    g.write_csv(tmp_path / "g.csv")
    lines = (tmp_path / "g.csv").read_text().splitlines()
    assert lines[0] == "axis,j,tau,x"
    assert len(lines) == 1 + 5 + 4
    axis, j, tau, x = lines[5].split(",")
    assert (axis, j) == ("0", "4")
    assert float(x) == 1.0 and float(tau) == pytest.approx(2.0, rel=1e-15)


def test_too_many_axes():
    with pytest.raises(DomainError):
        GridSpec.build([0.0] * 4, [1.0] * 4, [2] * 4)
