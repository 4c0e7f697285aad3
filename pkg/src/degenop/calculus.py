"""Degenerate calculus on tensor-product graded grids.

The degenerate derivative ``D[1] = x**alpha d/dx`` turns into a plain
derivative under the substitution ``tau = x**(1-alpha) / (1-alpha)``.  Grids
are therefore uniform in ``tau`` and graded in ``x``; every derivative in this
package is a finite difference in ``tau``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy import sparse

from .errors import DomainError

_TAU_SLACK = 1e-12


@dataclass(frozen=True)
class DegenerateAxis:
    """One coordinate direction ``(0, b)`` degenerating like ``x**alpha`` at 0."""

    alpha: float
    b: float
    n_cells: int

    def __post_init__(self):
        if not 0.0 <= self.alpha < 1.0:
            raise DomainError(f"alpha must be < 1 and >= 0, got {self.alpha}")
        if not self.b > 0.0:
            raise DomainError(f"axis length b must be positive, got {self.b}")
        if int(self.n_cells) != self.n_cells or self.n_cells < 2:
            raise DomainError(f"n_cells must be an integer >= 2, got {self.n_cells}")
        object.__setattr__(self, "n_cells", int(self.n_cells))

    @property
    def tau_b(self) -> float:
        return self.b ** (1.0 - self.alpha) / (1.0 - self.alpha)

    @property
    def dtau(self) -> float:
        return self.tau_b / self.n_cells

    @property
    def n_nodes(self) -> int:
        return self.n_cells + 1

    @cached_property
    def tau_nodes(self) -> np.ndarray:
        return np.arange(self.n_nodes) * self.dtau

    @cached_property
    def x_nodes(self) -> np.ndarray:
        x = inverse_map(self.tau_nodes, self)
        x[0], x[-1] = 0.0, self.b
        return x


def tau_map(x, axis: DegenerateAxis):
    """Map ``x`` in ``[0, b]`` to ``tau = x**(1-alpha)/(1-alpha)``."""
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0.0) or np.any(xa > axis.b):
        raise DomainError(f"x outside [0, {axis.b}]")
    out = xa ** (1.0 - axis.alpha) / (1.0 - axis.alpha)
    return float(out) if out.ndim == 0 else out


def inverse_map(tau, axis: DegenerateAxis):
    """Inverse of :func:`tau_map` on ``[0, tau_b]``."""
    ta = np.asarray(tau, dtype=float)
    tb = axis.tau_b
    if np.any(ta < 0.0) or np.any(ta > tb * (1.0 + _TAU_SLACK)):
        raise DomainError(f"tau outside [0, {tb}]")
    ta = np.minimum(ta, tb)
    out = ((1.0 - axis.alpha) * ta) ** (1.0 / (1.0 - axis.alpha))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class GridSpec:
    """Tensor product of at most three degenerate axes."""

    axes: tuple

    def __post_init__(self):
        axes = tuple(self.axes)
        if not 1 <= len(axes) <= 3:
            raise DomainError(f"grid needs 1 to 3 axes, got {len(axes)}")
        object.__setattr__(self, "axes", axes)

    @classmethod
    def build(cls, alphas: Sequence[float], lengths: Sequence[float], n_cells: Sequence[int]):
        return cls(tuple(DegenerateAxis(a, b, n) for a, b, n in zip(alphas, lengths, n_cells)))

    @property
    def ndim(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple:
        return tuple(ax.n_nodes for ax in self.axes)

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.shape))

    @property
    def dtau(self) -> tuple:
        return tuple(ax.dtau for ax in self.axes)

    @property
    def tau_nodes(self) -> tuple:
        return tuple(ax.tau_nodes for ax in self.axes)

    @property
    def x_nodes(self) -> tuple:
        return tuple(ax.x_nodes for ax in self.axes)

    def mesh(self, coords: str = "x") -> tuple:
        """Node coordinates broadcast to the full grid shape (``ij`` indexing)."""
        nodes = self.x_nodes if coords == "x" else self.tau_nodes
        return tuple(np.meshgrid(*nodes, indexing="ij"))

    def rows(self):
        """Rows ``(axis, j, tau, x)`` describing every axis node."""
        for k, ax in enumerate(self.axes):
            for j, (t, x) in enumerate(zip(ax.tau_nodes, ax.x_nodes)):
                yield k, j, t, x

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["axis", "j", "tau", "x"])
            for k, j, t, x in self.rows():
                w.writerow([k, j, f"{t:.17g}", f"{x:.17g}"])


@dataclass(frozen=True)
class GridFunction:
    """Values in ``C^m`` at every node of a grid; ``values.shape == grid.shape + (m,)``."""

    grid: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values)
        if vals.ndim == self.grid.ndim:
            vals = vals[..., None]
        if vals.shape[:-1] != self.grid.shape:
            raise DomainError(f"values of shape {vals.shape} do not match grid {self.grid.shape}")
        vals = vals.astype(complex)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def m(self) -> int:
        return self.values.shape[-1]

    @classmethod
    def from_function(cls, grid: GridSpec, func, coords: str = "x"):
        """Sample ``func(*coords)`` on the grid; scalar results get ``m = 1``."""
        return cls(grid, np.asarray(func(*grid.mesh(coords))))

    @classmethod
    def constant(cls, grid: GridSpec, value, m: int = 1):
        return cls(grid, np.full(grid.shape + (m,), value, dtype=complex))

    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)

    @classmethod
    def from_flat(cls, grid: GridSpec, vec, m: int):
        return cls(grid, np.asarray(vec).reshape(grid.shape + (m,)))

    def __add__(self, other):
        return GridFunction(self.grid, self.values + _values(other))

    def __sub__(self, other):
        return GridFunction(self.grid, self.values - _values(other))

    def __mul__(self, c):
        return GridFunction(self.grid, self.values * c)

    __rmul__ = __mul__

    def conj(self):
        return GridFunction(self.grid, self.values.conj())


def _values(u):
    return u.values if isinstance(u, GridFunction) else u


def tau_diff(values: np.ndarray, h: float, axis: int, order: int) -> np.ndarray:
    """Finite-difference ``order``-th derivative along ``axis`` with spacing ``h``.

    Central stencils in the interior, second-order one-sided stencils at
    both ends (first-order for ``order=2`` when only three nodes exist).
    """
    if order not in (1, 2):
        raise DomainError(f"order must be 1 or 2, got {order}")
    u = np.moveaxis(np.asarray(values), axis, 0)
    n = u.shape[0]
    if n < 3:
        raise DomainError(f"need at least 3 nodes along the axis, got {n}")
    out = np.empty(u.shape, dtype=np.result_type(u, float))
    if order == 1:
        out[1:-1] = (u[2:] - u[:-2]) / (2 * h)
        out[0] = (-3 * u[0] + 4 * u[1] - u[2]) / (2 * h)
        out[-1] = (3 * u[-1] - 4 * u[-2] + u[-3]) / (2 * h)
    else:
        h2 = h * h
        out[1:-1] = (u[2:] - 2 * u[1:-1] + u[:-2]) / h2
        if n >= 4:
            out[0] = (2 * u[0] - 5 * u[1] + 4 * u[2] - u[3]) / h2
            out[-1] = (2 * u[-1] - 5 * u[-2] + 4 * u[-3] - u[-4]) / h2
        else:
            out[0] = out[-1] = out[1]
    return np.moveaxis(out, 0, axis)


def diff_matrix(n_nodes: int, h: float, order: int) -> sparse.csr_matrix:
    """Sparse matrix form of :func:`tau_diff` on ``n_nodes`` points."""
    n = n_nodes
    if n < 3:
        raise DomainError(f"need at least 3 nodes along the axis, got {n}")
    if order == 1:
        mat = (sparse.diags([-np.ones(n - 1), np.ones(n - 1)], [-1, 1]) / (2 * h)).tolil()
        mat[0, :3] = np.array([-3.0, 4.0, -1.0]) / (2 * h)
        mat[n - 1, n - 3:] = np.array([1.0, -4.0, 3.0]) / (2 * h)
    elif order == 2:
        e = np.ones(n)
        mat = (sparse.diags([e[1:], -2 * e, e[1:]], [-1, 0, 1]) / h**2).tolil()
        if n >= 4:
            mat[0, :4] = np.array([2.0, -5.0, 4.0, -1.0]) / h**2
            mat[n - 1, n - 4:] = np.array([-1.0, 4.0, -5.0, 2.0]) / h**2
        else:
            mat[0, :] = mat[n - 1, :] = mat[1, :]
    else:
        raise DomainError(f"order must be 1 or 2, got {order}")
    return mat.tocsr()


def degen_derivative(u: GridFunction, axis_index: int, order: int) -> GridFunction:
    """Discrete ``(x**alpha d/dx)**order`` along one axis, computed as a tau-derivative."""
    grid = u.grid
    if not 0 <= axis_index < grid.ndim:
        raise DomainError(f"axis index {axis_index} out of range for {grid.ndim}-d grid")
    d = tau_diff(u.values, grid.dtau[axis_index], axis_index, order)
    return GridFunction(grid, d)
