"""Lebesgue and degenerate Sobolev norms on graded grids, in space and space-time.

Space integrals use the trapezoidal rule on the graded ``x`` nodes; time
integrals use the right-endpoint rectangle rule.  Values live in ``C^m``
with the Euclidean norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from .calculus import DegenerateAxis, GridFunction, GridSpec, tau_diff
from .errors import DomainError


@dataclass(frozen=True)
class NormSpec:
    """Spatial exponent ``p`` and temporal exponent ``p0``."""

    p: float = 2.0
    p0: float = 2.0

    def __post_init__(self):
        for name in ("p", "p0"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 1.0):
                raise DomainError(f"{name} must be finite and >= 1, got {v}")


def trapezoid_weights(nodes: np.ndarray) -> np.ndarray:
    w = np.empty_like(nodes, dtype=float)
    dx = np.diff(nodes)
    w[0], w[-1] = dx[0] / 2, dx[-1] / 2
    w[1:-1] = (dx[:-1] + dx[1:]) / 2
    return w


def cell_measures_tau(axis: DegenerateAxis, order: int = 8) -> np.ndarray:
    """``dx``-measure of each tau-cell, by quadrature of the Jacobian ``dx/dtau``.

    The Jacobian ``((1-alpha) tau)**(alpha/(1-alpha))`` is a power of tau, so
    the first cell uses Gauss-Jacobi and the others Gauss-Legendre.
    """
    a = axis.alpha
    beta = a / (1.0 - a)
    c = (1.0 - a) ** beta
    h = axis.dtau
    left = axis.tau_nodes[:-1]
    s, w = roots_legendre(order)
    pts = left[:, None] + h * (1 + s[None, :]) / 2
    meas = (c * pts**beta) @ w * h / 2
    sj, wj = roots_jacobi(order, 0.0, beta)
    meas[0] = c * (h / 2) ** beta * np.sum(wj) * h / 2
    return meas


def _integrate(density: np.ndarray, weights) -> float:
    out = density
    for k in reversed(range(len(weights))):
        out = np.sum(out * _bcast(weights[k], out.ndim, k), axis=k)
    return float(out)


def _bcast(w, ndim, k):
    shape = [1] * ndim
    shape[k] = -1
    return w.reshape(shape)


def _pointwise(values: np.ndarray) -> np.ndarray:
    mag = np.abs(values)
    scale = float(np.max(mag, initial=0.0))
    if scale == 0.0 or not np.isfinite(scale):
        return np.linalg.norm(mag, axis=-1)
    return scale * np.linalg.norm(mag / scale, axis=-1)


def _scaled_lp(density: np.ndarray, weights, p: float) -> float:
    # rescale by the max so tiny or huge values neither underflow nor overflow
    scale = float(np.max(density, initial=0.0))
    if scale == 0.0 or not np.isfinite(scale):
        return scale
    return scale * _integrate((density / scale) ** p, weights) ** (1.0 / p)


def lp_values(values: np.ndarray, grid: GridSpec, p: float) -> float:
    """``L_p`` norm of an array shaped ``grid.shape + (m,)``."""
    weights = [trapezoid_weights(x) for x in grid.x_nodes]
    return _scaled_lp(_pointwise(values), weights, p)


def lp_norm(u: GridFunction, spec: NormSpec = NormSpec()) -> float:
    """``(int ||u(x)||^p dx)^(1/p)`` by trapezoidal quadrature in ``x``."""
    return lp_values(u.values, u.grid, spec.p)


def lp_norm_tau(u: GridFunction, spec: NormSpec = NormSpec()) -> float:
    """Same integral evaluated in tau coordinates against the Jacobian weight.

    Each tau-cell contributes the mean of its endpoint values times the
    quadrature of ``dx/dtau`` over the cell.
    """
    g = _pointwise(u.values)
    weights = []
    for axis in u.grid.axes:
        meas = cell_measures_tau(axis)
        w = np.zeros(axis.n_nodes)
        w[:-1] += meas / 2
        w[1:] += meas / 2
        weights.append(w)
    return _scaled_lp(g, weights, spec.p)


def _apply_matrix_field(A, values):
    if A is None:
        return values
    A = np.asarray(A)
    return np.einsum("...ij,...j->...i", A, values)


def e0_pointwise(values: np.ndarray, A=None) -> np.ndarray:
    """Graph norm ``||u|| + ||A u||`` at every node (identity ``A`` if None)."""
    Au = values if A is None else _apply_matrix_field(A, values)
    return _pointwise(values) + _pointwise(Au)


def sobolev_norm(u: GridFunction, spec: NormSpec = NormSpec(), A=None) -> float:
    """Degenerate Sobolev norm ``||u||_{L_p(E0)} + sum_k ||D[2]_k u||_{L_p}``.

    ``A`` is an ``(m, m)`` matrix or a field shaped ``grid.shape + (m, m)``;
    the ``E0`` norm is ``||u|| + ||A u||``.
    """
    grid = u.grid
    weights = [trapezoid_weights(x) for x in grid.x_nodes]
    total = _scaled_lp(e0_pointwise(u.values, A), weights, spec.p)
    for k in range(grid.ndim):
        d2 = tau_diff(u.values, grid.dtau[k], k, 2)
        total += lp_values(d2, grid, spec.p)
    return total


def mixed_values(series: np.ndarray, grid: GridSpec, spec: NormSpec, dt: float) -> float:
    """Mixed norm of an array shaped ``(n_times,) + grid.shape + (m,)``."""
    spatial = np.array([lp_values(v, grid, spec.p) for v in series])
    return float(np.sum(dt * spatial**spec.p0) ** (1.0 / spec.p0))


def mixed_norm(u, spec: NormSpec, dt: float) -> float:
    """``(sum_t dt * ||u(t)||_p^p0)^(1/p0)`` over the supplied time samples.

    ``u`` is a sequence of :class:`GridFunction` sharing one grid; every
    sample counts as the right endpoint of a step of length ``dt``.
    """
    u = list(u)
    if not u:
        return 0.0
    spatial = np.array([lp_norm(v, spec) for v in u])
    return float(np.sum(dt * spatial**spec.p0) ** (1.0 / spec.p0))
