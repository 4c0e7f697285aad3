"""Time integration of ``du/dt + (O + d) u = f``, ``u(0) = 0``.

``O`` is the discrete elliptic operator (assembled with ``lam = 0``).  Its
boundary rows are imposed as algebraic constraints at every step, and the
step matrix is factorized once per run.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as spla

from .boundary import NonlocalBC
from .calculus import GridFunction, GridSpec, tau_diff
from .elliptic import CoefficientField, DiscreteOperator, assemble
from .errors import DivisionByZero, DomainError, SingularSystem, StabilityWarning
from .norms import NormSpec, mixed_values

SCHEMES = {"implicit-euler": 1.0, "crank-nicolson": 0.5}


def _theta(scheme: str) -> float:
    try:
        return SCHEMES[scheme]
    except KeyError:
        raise DomainError(f"unknown scheme {scheme!r}; choose from {sorted(SCHEMES)}") from None


def forcing_times(scheme: str, T: float, n_steps: int) -> np.ndarray:
    """Times at which each step samples the forcing (``t_{s+1}`` or ``t_{s+1/2}``)."""
    dt = T / n_steps
    shift = 1.0 if _theta(scheme) == 1.0 else 0.5
    return (np.arange(n_steps) + shift) * dt


class TimeStepper:
    """One-step theta scheme with a cached sparse LU.

    Interior rows of the step matrix are ``I + theta dt (O + d)``; boundary
    rows are the boundary functionals with zero right-hand side.
    """

    def __init__(self, op: DiscreteOperator, d: float, dt: float, scheme: str = "implicit-euler"):
        self.op, self.d, self.dt, self.scheme = op, float(d), float(dt), scheme
        theta = _theta(scheme)
        n = op.matrix.shape[0]
        keep = np.ones(n)
        keep[op.bc_index] = 0.0
        P_I = sparse.diags(keep)
        P_B = sparse.diags(1.0 - keep)
        shifted = op.matrix + self.d * sparse.identity(n)
        K = P_I @ (sparse.identity(n) + theta * dt * shifted) + P_B @ op.matrix
        self._explicit = None
        if theta < 1.0:
            self._explicit = sparse.csr_matrix(P_I @ (sparse.identity(n) - (1 - theta) * dt * shifted))
        self._keep = keep.astype(bool)
        try:
            self._lu = spla.splu(sparse.csc_matrix(K, dtype=complex))
        except RuntimeError as exc:
            raise SingularSystem(f"step matrix is singular: {exc}") from exc

    def run(self, forcing_steps: np.ndarray) -> np.ndarray:
        """Integrate from zero; ``forcing_steps[s]`` drives step ``s -> s+1``."""
        op = self.op
        n_steps = forcing_steps.shape[0]
        shape = op.grid.shape + (op.m,)
        out = np.zeros((n_steps + 1,) + shape, dtype=complex)
        u = np.zeros(op.matrix.shape[0], dtype=complex)
        for s in range(n_steps):
            rhs = u.copy() if self._explicit is None else self._explicit @ u
            rhs[~self._keep] = 0.0
            rhs += self.dt * np.where(self._keep, forcing_steps[s].reshape(-1), 0.0)
            u = self._lu.solve(rhs)
            if not np.all(np.isfinite(u)):
                raise SingularSystem(f"non-finite state at step {s + 1}")
            out[s + 1] = u.reshape(shape)
        if self._explicit is not None:
            _check_oscillation(out)
        return out


def _check_oscillation(snapshots: np.ndarray, run: int = 3):
    """Warn when successive increments keep reversing direction."""
    inc = np.diff(snapshots, axis=0).reshape(snapshots.shape[0] - 1, -1)
    size = np.linalg.norm(inc, axis=1)
    if size.size < run + 1 or size.max() == 0:
        return
    dots = np.real(np.sum(inc[1:] * np.conj(inc[:-1]), axis=1))
    alternating = (dots < 0) & (size[1:] > 1e-8 * size.max())
    streak = 0
    for flag in alternating:
        streak = streak + 1 if flag else 0
        if streak >= run:
            warnings.warn("Crank-Nicolson increments alternate in sign; "
                          "stiff modes are oscillating (reduce dt)", StabilityWarning, stacklevel=3)
            return


@dataclass
class ParabolicProblem:
    """Linear problem ``du/dt + sum_k a_k D[2]_k u + A u + d u = f`` with ``u(0) = 0``.

    ``forcing(t)`` returns an array shaped ``grid.shape + (m,)`` or a
    :class:`GridFunction`; ``None`` means zero forcing.
    """

    coeffs: CoefficientField
    bc: NonlocalBC
    grid: GridSpec
    d: float = 0.0
    T: float = 1.0
    n_steps: int = 10
    forcing: Callable | None = None

    def __post_init__(self):
        if not self.T > 0 or int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise DomainError("T and n_steps must be positive")
        if self.d < 0:
            raise DomainError("shift d must be >= 0")

    @property
    def dt(self) -> float:
        return self.T / self.n_steps

    def sample_forcing(self, times) -> np.ndarray:
        shape = self.grid.shape + (self.coeffs.m,)
        out = np.zeros((len(times),) + shape, dtype=complex)
        if self.forcing is None:
            return out
        for s, t in enumerate(times):
            v = self.forcing(t)
            v = v.values if isinstance(v, GridFunction) else np.asarray(v)
            if v.shape != shape and v.size == out[s].size:
                v = v.reshape(shape)
            out[s] = np.broadcast_to(v, shape)
        return out


@dataclass
class ParabolicSolution:
    """Snapshots ``u(t_s)``, ``s = 0..n_steps``, and the forcing each step used."""

    grid: GridSpec
    snapshots: np.ndarray = field(repr=False)
    forcing: np.ndarray = field(repr=False)
    scheme: str
    dt: float
    A: np.ndarray = field(repr=False)

    @property
    def n_steps(self) -> int:
        return self.snapshots.shape[0] - 1

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt

    def snapshot(self, s: int) -> GridFunction:
        return GridFunction(self.grid, self.snapshots[s])

    def diagnostics(self, spec: NormSpec = NormSpec()) -> dict:
        """Mixed norm of each equation term, keyed by name.

        ``du/dt`` uses backward differences of the snapshots for every scheme.
        """
        grid, u = self.grid, self.snapshots
        later = u[1:]
        dudt = np.diff(u, axis=0) / self.dt
        d2 = [mixed_values(tau_diff(later, grid.dtau[k], k + 1, 2), grid, spec, self.dt)
              for k in range(grid.ndim)]
        Au = np.einsum("...ij,t...j->t...i", self.A, later)
        return {
            "dudt": mixed_values(dudt, grid, spec, self.dt),
            "d2": d2,
            "Au": mixed_values(Au, grid, spec, self.dt),
            "f": mixed_values(self.forcing, grid, spec, self.dt),
        }


def stepper_for(problem: ParabolicProblem, scheme: str, check: bool = True) -> TimeStepper:
    op = assemble(problem.coeffs, problem.bc, problem.grid, 0.0, check=check)
    return TimeStepper(op, problem.d, problem.dt, scheme)


def step_scheme(problem: ParabolicProblem, scheme: str = "implicit-euler",
                check: bool = True) -> ParabolicSolution:
    """Integrate the problem with implicit Euler or Crank-Nicolson."""
    stepper = stepper_for(problem, scheme, check)
    forcing = problem.sample_forcing(forcing_times(scheme, problem.T, problem.n_steps))
    snaps = stepper.run(forcing)
    return ParabolicSolution(problem.grid, snaps, forcing, scheme, problem.dt, problem.coeffs.A)


def maximal_regularity_ratio(solution: ParabolicSolution, spec: NormSpec = NormSpec()) -> float:
    """``[||du/dt|| + sum_k ||D[2]_k u|| + ||A u||] / ||f||`` in the mixed norm."""
    if solution.n_steps < 4:
        raise DomainError("need at least 4 time steps")
    diag = solution.diagnostics(spec)
    if diag["f"] == 0.0:
        raise DivisionByZero("forcing is identically zero; the ratio is vacuous")
    return (diag["dudt"] + sum(diag["d2"]) + diag["Au"]) / diag["f"]
