"""Discrete degenerate elliptic problems with a complex spectral parameter.

The operator

    sum_k a_k(x) D[2]_k u + A(x) u + lambda u + sum_k A_k(x) D[1]_k u

is assembled as a Kronecker sum of one-dimensional tau-difference matrices.
Unknowns are ordered node-major (C order over the grid), component-minor.
Rows at boundary nodes are overwritten by boundary functionals; a node on
several faces belongs to the lowest-numbered axis whose face it lies on.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as spla

from .boundary import NonlocalBC, bc_rows, validate_conditions
from .calculus import GridFunction, GridSpec, diff_matrix, tau_diff
from .errors import ConditionError, DomainError, SingularSystem
from .norms import NormSpec, lp_values

log = logging.getLogger(__name__)

RESIDUAL_RTOL = 1e-10


def _field(value, grid: GridSpec, tail: tuple):
    """Sample a scalar / array / callable onto ``grid.shape + tail``."""
    if callable(value):
        value = value(*grid.mesh("x"))
    arr = np.asarray(value, dtype=complex)
    target = grid.shape + tail
    if arr.shape == target:
        return arr.copy()
    if arr.shape == grid.shape and tail:
        if len(tail) == 1:
            return np.broadcast_to(arr[..., None], target).copy()
        return arr[..., None, None] * np.eye(tail[0])
    if arr.ndim == 0 and len(tail) == 2:
        return np.broadcast_to(arr * np.eye(tail[0]), target).copy()
    if arr.shape == tail or arr.ndim == 0:
        return np.broadcast_to(arr, target).copy()
    raise DomainError(f"cannot broadcast coefficient of shape {arr.shape} to {target}")


@dataclass
class CoefficientField:
    """Coefficients sampled at grid nodes.

    ``a[k]`` has shape ``grid.shape + (m,)`` (a diagonal coefficient per
    component), ``A`` and ``A_first[k]`` have shape ``grid.shape + (m, m)``.
    """

    grid: GridSpec
    m: int
    a: tuple
    A: np.ndarray = field(repr=False)
    A_first: tuple | None = None

    @classmethod
    def build(cls, grid: GridSpec, m: int = 1, a=-1.0, A=0.0, A_first=None):
        """Sample coefficients given as node values or callables of the ``x`` mesh.

        ``a`` and ``A_first`` may be one value for all axes or a per-axis
        sequence.  A scalar ``A`` means ``A * I``.
        """
        def per_axis(v):
            if isinstance(v, (list, tuple)) and len(v) == grid.ndim:
                return list(v)
            return [v] * grid.ndim

        a_f = tuple(_field(v, grid, (m,)) for v in per_axis(a))
        A_f = _field(A, grid, (m, m))
        first = None
        if A_first is not None:
            first = tuple(_field(v, grid, (m, m)) for v in per_axis(A_first))
        return cls(grid, m, a_f, A_f, first)


def _axis_kron(grid: GridSpec, k: int, mat1d, m: int):
    pre = int(np.prod(grid.shape[:k]))
    post = int(np.prod(grid.shape[k + 1:])) * m
    return sparse.kron(sparse.kron(sparse.identity(pre), mat1d), sparse.identity(post), format="csr")


def _diag(values: np.ndarray):
    return sparse.diags(values.reshape(-1))


def _block_diag(blocks: np.ndarray, grid: GridSpec):
    m = blocks.shape[-1]
    n = grid.n_nodes
    node = np.repeat(np.arange(n), m * m)
    i = np.tile(np.repeat(np.arange(m), m), n)
    j = np.tile(np.arange(m), n * m)
    return sparse.csr_matrix((blocks.reshape(-1), (node * m + i, node * m + j)),
                             shape=(n * m, n * m))


def boundary_owner(grid: GridSpec) -> np.ndarray:
    """Per node: the axis owning its boundary row, ``-1`` for interior nodes."""
    owner = np.full(grid.shape, -1)
    idx = np.indices(grid.shape)
    for k in reversed(range(grid.ndim)):
        on_face = (idx[k] == 0) | (idx[k] == grid.shape[k] - 1)
        owner[on_face] = k
    return owner


def _bc_block(bc: NonlocalBC, grid: GridSpec, m: int):
    owner = boundary_owner(grid).reshape(-1)
    rows, cols, vals = [], [], []
    for k in range(grid.ndim):
        pair = bc_rows(bc, grid, k)
        pre = int(np.prod(grid.shape[:k]))
        post = int(np.prod(grid.shape[k + 1:]))
        nk = grid.shape[k]
        ip, iq = np.meshgrid(np.arange(pre), np.arange(post), indexing="ij")
        for j, end in enumerate((0, nk - 1)):
            targets = ((ip * nk + end) * post + iq).reshape(-1)
            block = _axis_kron(grid, k, pair[j], m).tocoo()
            # block row r = transverse_index * m + component
            node = targets[block.row // m]
            keep = owner[node] == k
            rows.append((node * m + block.row % m)[keep])
            cols.append(block.col[keep])
            vals.append(block.data[keep])
    n = grid.n_nodes * m
    mat = sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                            shape=(n, n))
    bnodes = np.flatnonzero(owner >= 0)
    bidx = (bnodes[:, None] * m + np.arange(m)[None, :]).reshape(-1)
    return mat, bidx


@dataclass
class DiscreteOperator:
    """Assembled sparse matrix with boundary rows in place."""

    matrix: sparse.csr_matrix = field(repr=False)
    grid: GridSpec
    m: int
    lam: complex
    bc_index: np.ndarray = field(repr=False)

    @property
    def shape(self):
        return self.matrix.shape

    @cached_property
    def interior_index(self) -> np.ndarray:
        mask = np.ones(self.matrix.shape[0], dtype=bool)
        mask[self.bc_index] = False
        return np.flatnonzero(mask)

    @cached_property
    def _blocks(self):
        M = self.matrix.tocsr()
        I, B = self.interior_index, self.bc_index
        return M[I][:, I], M[I][:, B], M[B][:, I], M[B][:, B].tocsc()

    @cached_property
    def _bb_lu(self):
        try:
            return spla.splu(self._blocks[3])
        except RuntimeError as exc:
            raise SingularSystem(f"boundary block is singular: {exc}") from exc

    @cached_property
    def boundary_map(self) -> np.ndarray:
        """Dense ``-M_BB^{-1} M_BI``: boundary values from interior values."""
        M_BI = self._blocks[2]
        return -self._bb_lu.solve(M_BI.toarray().astype(complex))

    @cached_property
    def _restricted(self) -> np.ndarray:
        M_II, M_IB, _, _ = self._blocks
        return M_II.toarray() + M_IB @ self.boundary_map

    def restricted(self) -> np.ndarray:
        """Dense operator acting on interior values of BC-satisfying vectors."""
        return self._restricted.copy()

    def extend(self, interior_values: np.ndarray) -> np.ndarray:
        """Full vector from interior values, filling boundary dofs from the BCs."""
        v = np.asarray(interior_values)
        out = np.zeros((self.matrix.shape[0],) + v.shape[1:], dtype=complex)
        out[self.interior_index] = v
        out[self.bc_index] = self.boundary_map @ v
        return out

    def apply(self, u: GridFunction) -> GridFunction:
        return GridFunction.from_flat(self.grid, self.matrix @ u.flat(), self.m)

    def interior_mask(self) -> np.ndarray:
        """Boolean array shaped ``grid.shape + (m,)``: True off boundary rows."""
        mask = np.ones(self.matrix.shape[0], dtype=bool)
        mask[self.bc_index] = False
        return mask.reshape(self.grid.shape + (self.m,))


def check_conditions(coeffs: CoefficientField, bc: NonlocalBC, grid: GridSpec, p: float = 2.0):
    report = validate_conditions(coeffs, bc, grid, p)
    if not report.ok:
        raise ConditionError("; ".join(f.message for f in report.errors), report)
    return report


def _log_first_order(coeffs: CoefficientField):
    try:
        smin = np.linalg.svd(coeffs.A, compute_uv=False)[..., -1].min()
    except np.linalg.LinAlgError:
        return
    if smin <= 0:
        return
    for k, Ak in enumerate(coeffs.A_first):
        nk = np.linalg.norm(Ak, ord=2, axis=(-2, -1)).max()
        log.info("first-order term %d: |A_k| |A^-1/2| ~ %.3g", k, nk / np.sqrt(smin))


def spatial_operator(coeffs: CoefficientField, lam: complex = 0.0) -> sparse.csr_matrix:
    """Operator rows without boundary replacement (every node)."""
    grid, m = coeffs.grid, coeffs.m
    n = grid.n_nodes * m
    M = _block_diag(coeffs.A, grid) + lam * sparse.identity(n)
    for k in range(grid.ndim):
        d2 = _axis_kron(grid, k, diff_matrix(grid.shape[k], grid.dtau[k], 2), m)
        M = M + _diag(coeffs.a[k]) @ d2
        if coeffs.A_first is not None:
            d1 = _axis_kron(grid, k, diff_matrix(grid.shape[k], grid.dtau[k], 1), m)
            M = M + _block_diag(coeffs.A_first[k], grid) @ d1
    return sparse.csr_matrix(M)


def assemble(coeffs: CoefficientField, bc: NonlocalBC, grid: GridSpec | None = None,
             lam: complex = 0.0, check: bool = True) -> DiscreteOperator:
    """Assemble the discrete operator with boundary rows.

    With ``check`` the structural conditions are validated first and a
    :class:`ConditionError` is raised on any error finding.
    """
    grid = coeffs.grid if grid is None else grid
    if grid != coeffs.grid:
        raise DomainError("coefficient field was sampled on a different grid")
    if check:
        check_conditions(coeffs, bc, grid)
    if coeffs.A_first is not None:
        _log_first_order(coeffs)
    M = spatial_operator(coeffs, lam)
    B, bidx = _bc_block(bc, grid, coeffs.m)
    keep = np.ones(M.shape[0])
    keep[bidx] = 0.0
    mat = sparse.csr_matrix(sparse.diags(keep) @ M + B)
    mat.sum_duplicates()
    return DiscreteOperator(mat, grid, coeffs.m, complex(lam), bidx)


class Factorization:
    """Sparse LU of an operator, reusable across right-hand sides."""

    def __init__(self, op: DiscreteOperator):
        self.op = op
        try:
            self._lu = spla.splu(op.matrix.tocsc().astype(complex))
        except RuntimeError as exc:
            raise SingularSystem(f"factorization failed at lambda={op.lam}: {exc}") from exc

    def solve_flat(self, rhs: np.ndarray) -> np.ndarray:
        rhs = np.array(rhs, dtype=complex)
        rhs[self.op.bc_index] = 0.0
        u = self._lu.solve(rhs)
        if not np.all(np.isfinite(u)):
            raise SingularSystem(f"non-finite solution at lambda={self.op.lam}")
        res = np.linalg.norm(self.op.matrix @ u - rhs)
        scale = np.linalg.norm(rhs)
        if res > RESIDUAL_RTOL * scale:
            raise SingularSystem(
                f"residual {res:.3e} exceeds tolerance at lambda={self.op.lam}")
        return u

    def residual(self, u: np.ndarray, rhs: np.ndarray) -> float:
        rhs = np.array(rhs, dtype=complex)
        rhs[self.op.bc_index] = 0.0
        scale = np.linalg.norm(rhs)
        res = np.linalg.norm(self.op.matrix @ u - rhs)
        return float(res / scale) if scale else float(res)


def solve(op: DiscreteOperator, f: GridFunction) -> GridFunction:
    """Sparse direct solve; forcing at boundary rows is replaced by zero."""
    if f.m != op.m:
        raise DomainError(f"forcing has {f.m} components, operator has {op.m}")
    u = Factorization(op).solve_flat(f.flat())
    return GridFunction.from_flat(op.grid, u, op.m)


@dataclass(frozen=True)
class CoercivityRecord:
    lam: complex
    ratio: float
    residual: float
    status: str = "ok"


def coercivity_terms(u: GridFunction, f: GridFunction, A: np.ndarray, lam: complex,
                     p: float = 2.0) -> float:
    """``[sum_k sum_i |lam|^(1-i/2) ||D[i]_k u|| + ||A u||] / ||f||``."""
    grid = u.grid
    lam_abs = abs(lam)
    total = 0.0
    for k in range(grid.ndim):
        for i in range(3):
            w = lam_abs ** (1.0 - i / 2.0)
            if w == 0.0:
                continue
            d = u.values if i == 0 else tau_diff(u.values, grid.dtau[k], k, i)
            total += w * lp_values(d, grid, p)
    Au = np.einsum("...ij,...j->...i", A, u.values)
    total += lp_values(Au, grid, p)
    fn = lp_values(f.values, grid, p)
    if fn == 0.0:
        return float("inf") if total else 0.0
    return total / fn


def random_forcings(grid: GridSpec, m: int, trials: int, seed: int, mask: np.ndarray,
                    p: float = 2.0) -> list:
    """Seeded complex Gaussian forcings, zero on boundary rows, unit ``L_p`` norm."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(trials):
        v = rng.standard_normal(grid.shape + (m,)) + 1j * rng.standard_normal(grid.shape + (m,))
        v = np.where(mask, v, 0.0)
        out.append(GridFunction(grid, v / lp_values(v, grid, p)))
    return out


def _scan_one(coeffs, bc, grid, lam, forcings, p):
    try:
        op = assemble(coeffs, bc, grid, lam, check=False)
        lu = Factorization(op)
        worst, worst_res = 0.0, 0.0
        for f in forcings:
            u = lu.solve_flat(f.flat())
            worst_res = max(worst_res, lu.residual(u, f.flat()))
            ug = GridFunction.from_flat(grid, u, coeffs.m)
            worst = max(worst, coercivity_terms(ug, f, coeffs.A, lam, p))
        return CoercivityRecord(complex(lam), worst, worst_res)
    except SingularSystem:
        return CoercivityRecord(complex(lam), float("nan"), float("nan"), "singular")


def coercivity_scan(coeffs: CoefficientField, bc: NonlocalBC, grid: GridSpec, sector,
                    trials: int, p: float = 2.0, seed: int = 0, threads: int = 1) -> list:
    """Largest coercivity ratio over ``trials`` random forcings, per sector sample.

    The sampled maximum is a lower bound for the true constant.
    """
    if trials <= 0:
        return []
    check_conditions(coeffs, bc, grid, p)
    mask = assemble(coeffs, bc, grid, 0.0, check=False).interior_mask()
    forcings = random_forcings(grid, coeffs.m, trials, seed, mask, p)
    lams = list(sector.samples())
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(threads) as ex:
            return list(ex.map(lambda lam: _scan_one(coeffs, bc, grid, lam, forcings, p), lams))
    return [_scan_one(coeffs, bc, grid, lam, forcings, p) for lam in lams]


def manufactured_forcing(grid: GridSpec, coeffs: CoefficientField, lam: complex = 0.0,
                         component=None) -> tuple:
    """Exact solution ``prod_k sin(pi tau_k / tau_bk)`` and its continuum forcing.

    Valid for coefficients constant in space without first-order terms.
    Returns ``(u_exact, f)`` as grid functions.
    """
    m = coeffs.m
    taus = grid.mesh("tau")
    vec = np.ones(m) if component is None else np.asarray(component, dtype=complex)
    phi = np.ones(grid.shape)
    for t, ax in zip(taus, grid.axes):
        phi = phi * np.sin(np.pi * t / ax.tau_b)
    u = phi[..., None] * vec
    f = np.zeros_like(u, dtype=complex)
    for k, ax in enumerate(grid.axes):
        f += coeffs.a[k] * (-(np.pi / ax.tau_b) ** 2) * u
    f += np.einsum("...ij,...j->...i", coeffs.A, u) + lam * u
    return GridFunction(grid, u), GridFunction(grid, f)
