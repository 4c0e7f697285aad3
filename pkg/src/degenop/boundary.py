"""Nonlocal two-point boundary conditions and structural condition checks.

Along axis ``k`` each of the two conditions reads

    sum_i alpha_ji * u^[i](x_k = 0) + beta_ji * u^[i](x_k = b_k) = 0,   j = 1, 2

with orders ``m_j`` in ``{0, 1}``.  Traces ``u^[1]`` are tau-derivatives,
approximated by second-order one-sided stencils.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import sparse

from .calculus import GridSpec
from .errors import BCError, DomainError, EtaDegenerate

ETA_RTOL = 1e-10
COMPAT_RTOL = 1e-8


def _complex_list(values, length, name):
    vals = [complex(v) for v in values]
    if len(vals) != length:
        raise BCError(f"{name} needs {length} coefficients, got {len(vals)}")
    return tuple(vals)


@dataclass(frozen=True)
class AxisBC:
    """The pair of conditions attached to one axis.

    ``alpha[j][i]`` multiplies ``u^[i]`` at ``x=0`` in condition ``j``;
    ``beta[j][i]`` multiplies ``u^[i]`` at ``x=b``.
    """

    m: tuple
    alpha: tuple
    beta: tuple

    def __post_init__(self):
        m = tuple(int(v) for v in self.m)
        if len(m) != 2 or any(v not in (0, 1) for v in m):
            raise BCError(f"orders m must be a pair from {{0, 1}}, got {self.m}")
        if len(self.alpha) != 2 or len(self.beta) != 2:
            raise BCError("alpha and beta need one coefficient list per condition")
        alpha = tuple(_complex_list(self.alpha[j], m[j] + 1, f"alpha[{j}]") for j in range(2))
        beta = tuple(_complex_list(self.beta[j], m[j] + 1, f"beta[{j}]") for j in range(2))
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)
        if alpha[0][m[0]] == 0:
            raise BCError("top-order coefficient alpha of the first condition must be nonzero")
        if beta[1][m[1]] == 0:
            raise BCError("top-order coefficient beta of the second condition must be nonzero")

    @classmethod
    def dirichlet(cls):
        return cls((0, 0), ([1], [0]), ([0], [1]))

    @classmethod
    def neumann(cls):
        return cls((1, 1), ([0, 1], [0, 0]), ([0, 0], [0, 1]))

    @classmethod
    def periodic(cls):
        return cls((0, 1), ([1], [0, 1]), ([-1], [0, -1]))

    def top(self, j):
        """Top-order coefficients ``(alpha_j,m_j, beta_j,m_j)`` of condition ``j``."""
        return self.alpha[j][self.m[j]], self.beta[j][self.m[j]]

    def couples_ends(self) -> bool:
        return any(any(self.alpha[j]) and any(self.beta[j]) for j in range(2))

    def scaled(self, j, c):
        """Copy with condition ``j`` multiplied by ``c``."""
        alpha = [list(a) for a in self.alpha]
        beta = [list(b) for b in self.beta]
        alpha[j] = [c * v for v in alpha[j]]
        beta[j] = [c * v for v in beta[j]]
        return AxisBC(self.m, alpha, beta)

    def to_dict(self):
        pair = lambda z: [z.real, z.imag]
        return {
            "m": list(self.m),
            "alpha_coeffs": [[pair(z) for z in a] for a in self.alpha],
            "beta_coeffs": [[pair(z) for z in b] for b in self.beta],
        }


@dataclass(frozen=True)
class NonlocalBC:
    """Boundary conditions for every axis of a grid."""

    axes: tuple

    def __post_init__(self):
        object.__setattr__(self, "axes", tuple(self.axes))

    @classmethod
    def uniform(cls, kind: str, ndim: int):
        make = {"dirichlet": AxisBC.dirichlet, "neumann": AxisBC.neumann,
                "periodic": AxisBC.periodic}[kind]
        return cls(tuple(make() for _ in range(ndim)))

    def __getitem__(self, k) -> AxisBC:
        return self.axes[k]

    def __len__(self):
        return len(self.axes)


def eta_determinant(bc: NonlocalBC, axis_index: int) -> complex:
    """Regularity determinant of the two conditions on one axis."""
    ax = bc[axis_index]
    m1, m2 = ax.m
    a1, b1 = ax.top(0)
    a2, b2 = ax.top(1)
    return (-1) ** m1 * a1 * b2 - (-1) ** m2 * a2 * b1


def eta_scale(bc: NonlocalBC, axis_index: int) -> float:
    a1, b1 = bc[axis_index].top(0)
    a2, b2 = bc[axis_index].top(1)
    return (abs(a1) + abs(b1)) * (abs(a2) + abs(b2))


def eta_is_degenerate(bc: NonlocalBC, axis_index: int) -> bool:
    return abs(eta_determinant(bc, axis_index)) <= ETA_RTOL * eta_scale(bc, axis_index)


def _trace_row(n_nodes, h, order, end):
    row = np.zeros(n_nodes)
    if order == 0:
        row[0 if end == 0 else -1] = 1.0
    elif end == 0:
        row[:3] = np.array([-3.0, 4.0, -1.0]) / (2 * h)
    else:
        row[-3:] = np.array([1.0, -4.0, 3.0]) / (2 * h)
    return row


def bc_rows(bc: NonlocalBC, grid: GridSpec, axis_index: int):
    """The two boundary functionals of one axis as ``1 x n_nodes`` sparse rows.

    Row ``j`` replaces the discrete equation at node 0 (``j=0``) or at the
    last node (``j=1``) along the axis.
    """
    if not 0 <= axis_index < grid.ndim:
        raise DomainError(f"axis index {axis_index} out of range")
    if eta_is_degenerate(bc, axis_index):
        raise EtaDegenerate(
            f"boundary determinant eta vanishes on axis {axis_index}: "
            f"{eta_determinant(bc, axis_index)}"
        )
    axis = grid.axes[axis_index]
    ax = bc[axis_index]
    rows = []
    for j in range(2):
        row = np.zeros(axis.n_nodes, dtype=complex)
        for i in range(ax.m[j] + 1):
            row += ax.alpha[j][i] * _trace_row(axis.n_nodes, axis.dtau, i, 0)
            row += ax.beta[j][i] * _trace_row(axis.n_nodes, axis.dtau, i, 1)
        rows.append(sparse.csr_matrix(row[None, :]))
    return tuple(rows)


@dataclass(frozen=True)
class Finding:
    severity: str
    code: str
    message: str


@dataclass
class BCReport:
    """Result of :func:`validate_conditions`.

    ``satisfied`` tracks only the boundary determinants; other findings
    are listed in ``messages`` with their severity.
    """

    eta: tuple
    satisfied: bool
    messages: list = field(default_factory=list)

    @property
    def errors(self):
        return [f for f in self.messages if f.severity == "error"]

    @property
    def warnings(self):
        return [f for f in self.messages if f.severity == "warning"]

    @property
    def ok(self) -> bool:
        return not self.errors

    def to_dict(self):
        return {
            "eta": [[z.real, z.imag] for z in self.eta],
            "satisfied": self.satisfied,
            "ok": self.ok,
            "messages": [vars(f) for f in self.messages],
        }


def _faces(arr, axis):
    return np.take(arr, 0, axis=axis), np.take(arr, -1, axis=axis)


def _close(u, v):
    scale = max(np.abs(u).max(initial=0.0), np.abs(v).max(initial=0.0), 1.0)
    return np.abs(u - v).max(initial=0.0) <= COMPAT_RTOL * scale


def validate_conditions(coeffs, bc: NonlocalBC, grid: GridSpec, p: float = 2.0) -> BCReport:
    """Check the structural conditions on sampled coefficients and BCs.

    Findings are collected, never raised.  ``coeffs`` needs attributes
    ``a`` (per-axis arrays shaped ``grid.shape + (m,)``) and ``A``
    (shaped ``grid.shape + (m, m)``).
    """
    msgs: list[Finding] = []
    if len(bc) != grid.ndim:
        msgs.append(Finding("error", "bc-shape", f"need {grid.ndim} axis BCs, got {len(bc)}"))
        return BCReport((), False, msgs)

    for k, axis in enumerate(grid.axes):
        if p > 1 and not axis.alpha < 1.0 - 1.0 / p:
            msgs.append(Finding(
                "warning", "trace",
                f"trace condition alpha < 1 - 1/p violated on axis {k} "
                f"(alpha={axis.alpha}, 1-1/p={1.0 - 1.0 / p})"))

    for k, a in enumerate(coeffs.a):
        a = np.asarray(a)
        if not np.any(a):
            msgs.append(Finding("info", "diffusion-off", f"diffusion disabled on axis {k}"))
        elif np.any(a.real >= 0):
            msgs.append(Finding("error", "sign",
                                f"sign condition violated: Re a_{k} must be < 0 on [0, b_{k}]"))

    A = np.asarray(coeffs.A)
    herm = 0.5 * (A + np.conj(np.swapaxes(A, -1, -2)))
    if np.linalg.eigvalsh(herm).min() <= 0:
        msgs.append(Finding("warning", "positivity",
                            "numerical range of A(x) is not bounded away from Re z <= 0"))

    for j in range(grid.ndim):
        if not bc[j].couples_ends():
            continue
        for k, a in enumerate(coeffs.a):
            if not _close(*_faces(np.asarray(a), j)):
                msgs.append(Finding("warning", "compat",
                                    f"a_{k} differs between the faces x_{j}=0 and x_{j}=b_{j}"))
        if not _close(*_faces(A, j)):
            msgs.append(Finding("warning", "compat",
                                f"A differs between the faces x_{j}=0 and x_{j}=b_{j}"))

    etas = tuple(eta_determinant(bc, k) for k in range(grid.ndim))
    satisfied = True
    for k in range(grid.ndim):
        if eta_is_degenerate(bc, k):
            satisfied = False
            msgs.append(Finding("error", "eta",
                                f"boundary determinant eta_{k} vanishes ({etas[k]})"))
    return BCReport(etas, satisfied, msgs)


def bc_from_dict(items: Sequence[dict]) -> NonlocalBC:
    """Build a :class:`NonlocalBC` from the run-config representation."""
    def cplx(z):
        return complex(z[0], z[1]) if isinstance(z, (list, tuple)) else complex(z)

    axes = []
    for item in items:
        axes.append(AxisBC(
            tuple(item["m"]),
            tuple([cplx(z) for z in cond] for cond in item["alpha_coeffs"]),
            tuple([cplx(z) for z in cond] for cond in item["beta_coeffs"]),
        ))
    return NonlocalBC(tuple(axes))
