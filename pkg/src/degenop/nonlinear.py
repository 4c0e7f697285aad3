"""Picard (contraction-mapping) solver for the nonlinear degenerate parabolic problem

    du/dt + sum_k a_k D[2]_k u + d u + B(t, x, u, D[1]u) u = F(t, x, u, D[1]u),  u(0) = 0.

The linear part is frozen at ``A(x) = B(0, x, 0, 0)``.  One application of
the map ``Q`` solves the linear problem with forcing

    F(t, x, V) + [A(x) - B(t, x, V)] v,   V = (v, D[1]_1 v, ..., D[1]_n v),

and the iteration starts from the base solution ``w`` (``v = 0``).

Callbacks are vectorized over nodes: they receive ``t`` (float), ``x`` (tuple
of node-coordinate arrays shaped ``grid.shape``), ``u`` shaped
``grid.shape + (m,)`` and ``Du`` shaped ``(n,) + grid.shape + (m,)``; ``B``
returns ``grid.shape + (m, m)`` and ``F`` returns ``grid.shape + (m,)``.
They must be deterministic and free of side effects.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .boundary import NonlocalBC
from .calculus import GridSpec, tau_diff
from .elliptic import CoefficientField, assemble
from .errors import BallExit, CallbackFailure, DomainError, NoContraction
from .norms import NormSpec, mixed_values
from .parabolic import SCHEMES, ParabolicSolution, TimeStepper, forcing_times

log = logging.getLogger(__name__)

GROWTH_LIMIT = 3


@dataclass
class NonlinearModel:
    """Nonlinear coefficients plus the linear diffusion part.

    ``a`` and ``first_order`` take the forms accepted by
    :meth:`CoefficientField.build`.  ``lipschitz`` optionally maps a radius
    ``r`` to a declared Lipschitz constant; it is reported, never enforced.
    """

    B: Callable
    F: Callable
    m: int = 1
    a: object = -1.0
    first_order: object = None
    lipschitz: Callable | None = None


@dataclass(frozen=True)
class NonlinearControls:
    r: float = 1.0
    T: float = 1.0
    n_steps: int = 20
    max_outer: int = 50
    tol: float = 1e-10
    d: float = 0.0
    scheme: str = "implicit-euler"
    norm: NormSpec = NormSpec()
    max_shrinks: int = 0

    def __post_init__(self):
        if not (self.r > 0 and self.T > 0 and self.n_steps >= 1 and self.max_outer >= 1):
            raise DomainError("controls must be positive (r, T, n_steps, max_outer)")
        if self.tol < 1e-12:
            raise DomainError(f"tol must be >= 1e-12, got {self.tol}")
        if self.d < 0:
            raise DomainError("shift d must be >= 0")
        if self.scheme not in SCHEMES:
            raise DomainError(f"unknown scheme {self.scheme!r}")

    @property
    def dt(self) -> float:
        return self.T / self.n_steps


@dataclass
class IterationReport:
    increments: list = field(default_factory=list)
    eta_hat: float = 0.0
    converged: bool = False
    ball_violations: int = 0
    C0_hat: float = float("nan")
    C1_hat: float = float("nan")
    delta_b: float = float("nan")
    residual: float = float("nan")
    T: float = float("nan")
    shrinks: int = 0

    def to_dict(self) -> dict:
        return {
            "increments": [float(v) for v in self.increments],
            "eta_hat": float(self.eta_hat),
            "converged": bool(self.converged),
            "ball_violations": int(self.ball_violations),
            "C0_hat": float(self.C0_hat),
            "C1_hat": float(self.C1_hat),
            "delta_b": float(self.delta_b),
            "residual": float(self.residual),
            "T": float(self.T),
            "shrinks": int(self.shrinks),
        }


def _eta_hat(increments) -> float:
    ratios = [b / a for a, b in zip(increments, increments[1:]) if a > 0]
    return max(ratios) if ratios else 0.0


def _call(fn, name, *args):
    try:
        out = np.asarray(fn(*args), dtype=complex)
    except Exception as exc:  # callbacks are user code
        raise CallbackFailure(f"{name} raised {type(exc).__name__}: {exc}") from exc
    if not np.all(np.isfinite(out)):
        raise CallbackFailure(f"{name} returned non-finite values")
    return out


def degenerate_gradient(values: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Stack of ``D[1]_k`` (one-sided at the ends), shaped ``(n,) + values.shape``."""
    offset = values.ndim - grid.ndim - 1
    return np.stack([tau_diff(values, grid.dtau[k], k + offset, 1) for k in range(grid.ndim)])


def y_norm(snapshots: np.ndarray, grid: GridSpec, A: np.ndarray, dt: float,
           spec: NormSpec = NormSpec()) -> float:
    """Discrete ``W^{1,[2]}`` norm: mixed norms of ``du/dt`` and each ``D[2]_k u`` plus the mixed ``E0`` norm."""
    later = snapshots[1:]
    total = mixed_values(np.diff(snapshots, axis=0) / dt, grid, spec, dt)
    for k in range(grid.ndim):
        total += mixed_values(tau_diff(later, grid.dtau[k], k + 1, 2), grid, spec, dt)
    total += mixed_values(np.einsum("...ij,t...j->t...i", A, later), grid, spec, dt)
    total += mixed_values(later, grid, spec, dt)
    return total


def trace_sup_norm(u: ParabolicSolution) -> float:
    """``sup`` over nodes and steps of ``||u|| + sum_k ||D[1]_k u||``.

    A pointwise stand-in for the trace-space sup norm.
    """
    snaps = u.snapshots
    pointwise = np.linalg.norm(snaps, axis=-1)
    grads = degenerate_gradient(snaps, u.grid)
    pointwise = pointwise + np.linalg.norm(grads, axis=-1).sum(axis=0)
    return float(pointwise.max())


def linear_coefficients(model: NonlinearModel, grid: GridSpec) -> CoefficientField:
    """Coefficients of the frozen linear problem, ``A(x) = B(0, x, 0, 0)``."""
    x = grid.mesh("x")
    zero = np.zeros(grid.shape + (model.m,), dtype=complex)
    A = _call(model.B, "B", 0.0, x, zero, np.zeros((grid.ndim,) + zero.shape, dtype=complex))
    return CoefficientField.build(grid, model.m, a=model.a, A=A, A_first=model.first_order)


class PicardMap:
    """The map ``v -> Q v`` for one fixed problem setup."""

    def __init__(self, model: NonlinearModel, controls: NonlinearControls, grid: GridSpec,
                 bc: NonlocalBC, check: bool = True):
        self.model, self.controls, self.grid, self.bc = model, controls, grid, bc
        self.coeffs = linear_coefficients(model, grid)
        self.op = assemble(self.coeffs, bc, grid, 0.0, check=check)
        self.stepper = TimeStepper(self.op, controls.d, controls.dt, controls.scheme)
        self.theta = SCHEMES[controls.scheme]
        self.times = forcing_times(controls.scheme, controls.T, controls.n_steps)
        self.x = grid.mesh("x")

    @property
    def A(self) -> np.ndarray:
        return self.coeffs.A

    def midpoints(self, snapshots: np.ndarray) -> np.ndarray:
        th = self.theta
        return th * snapshots[1:] + (1 - th) * snapshots[:-1]

    def forcing(self, snapshots: np.ndarray) -> np.ndarray:
        """Right-hand side of the linearized problem at every step."""
        vbar = self.midpoints(snapshots)
        out = np.empty_like(vbar)
        for s, t in enumerate(self.times):
            v = vbar[s]
            Dv = degenerate_gradient(v, self.grid)
            Bv = _call(self.model.B, "B", t, self.x, v, Dv)
            Fv = _call(self.model.F, "F", t, self.x, v, Dv)
            out[s] = np.broadcast_to(Fv, v.shape) + np.einsum("...ij,...j->...i", self.A - Bv, v)
        return out

    def solution(self, snapshots, forcing) -> ParabolicSolution:
        c = self.controls
        return ParabolicSolution(self.grid, snapshots, forcing, c.scheme, c.dt, self.A)

    def base(self) -> ParabolicSolution:
        shape = (self.controls.n_steps + 1,) + self.grid.shape + (self.model.m,)
        f0 = self.forcing(np.zeros(shape, dtype=complex))
        return self.solution(self.stepper.run(f0), f0)

    def __call__(self, v: ParabolicSolution) -> ParabolicSolution:
        g = self.forcing(v.snapshots)
        return self.solution(self.stepper.run(g), g)

    def y_norm(self, snapshots) -> float:
        c = self.controls
        return y_norm(snapshots, self.grid, self.A, c.dt, c.norm)

    def residual(self, u: ParabolicSolution) -> float:
        """Mixed norm of the discrete nonlinear residual on interior rows."""
        c = self.controls
        snaps = u.snapshots
        ubar = self.midpoints(snaps)
        mask = self.op.interior_mask()
        res = np.empty_like(ubar)
        for s, t in enumerate(self.times):
            v = ubar[s]
            Dv = degenerate_gradient(v, self.grid)
            Bv = _call(self.model.B, "B", t, self.x, v, Dv)
            Fv = _call(self.model.F, "F", t, self.x, v, Dv)
            lin = (self.op.matrix @ v.reshape(-1)).reshape(v.shape) + c.d * v
            r = (snaps[s + 1] - snaps[s]) / c.dt + lin \
                + np.einsum("...ij,...j->...i", Bv - self.A, v) - Fv
            res[s] = np.where(mask, r, 0.0)
        return mixed_values(res, self.grid, c.norm, c.dt)

    def delta_b(self, u: ParabolicSolution) -> float:
        """``sup ||B(t, x, W) - B(t, 0, W)||`` over nodes and steps, ``W`` from ``u``."""
        ubar = self.midpoints(u.snapshots)
        origin = tuple(np.zeros_like(xk) for xk in self.x)
        worst = 0.0
        for s, t in enumerate(self.times):
            v = ubar[s]
            Dv = degenerate_gradient(v, self.grid)
            diff = _call(self.model.B, "B", t, self.x, v, Dv) - _call(self.model.B, "B", t, origin, v, Dv)
            worst = max(worst, float(np.linalg.norm(diff, ord=2, axis=(-2, -1)).max()))
        return worst


def base_solution(model: NonlinearModel, controls: NonlinearControls, grid: GridSpec,
                  bc: NonlocalBC) -> ParabolicSolution:
    """Solution ``w`` of the frozen linear problem driven by ``F(t, x, 0, 0)``."""
    q = PicardMap(model, controls, grid, bc)
    w = q.base()
    fn = mixed_values(w.forcing, grid, controls.norm, controls.dt)
    if fn > 0:
        log.info("C0_hat = %.6g", q.y_norm(w.snapshots) / fn)
    return w


def picard_step(v: ParabolicSolution, model: NonlinearModel, controls: NonlinearControls,
                grid: GridSpec, bc: NonlocalBC) -> ParabolicSolution:
    """One application of the contraction map to ``v``."""
    return PicardMap(model, controls, grid, bc)(v)


def _iterate(q: PicardMap) -> tuple:
    c = q.controls
    report = IterationReport(T=c.T)
    w = q.base()
    w_norm = q.y_norm(w.snapshots)
    f_norm = mixed_values(w.forcing, q.grid, c.norm, c.dt)
    report.C0_hat = w_norm / f_norm if f_norm > 0 else float("nan")
    report.C1_hat = trace_sup_norm(w) / w_norm if w_norm > 0 else float("nan")

    u, growth = w, 0
    for _ in range(c.max_outer):
        new = q(u)
        inc = q.y_norm(new.snapshots - u.snapshots)
        report.increments.append(inc)
        report.eta_hat = _eta_hat(report.increments)
        if len(report.increments) > 1 and inc > report.increments[-2]:
            growth += 1
        else:
            growth = 0
        u = new
        if not np.isfinite(inc):
            raise NoContraction("increment overflowed; the map is not a contraction", report)
        if growth >= GROWTH_LIMIT:
            raise NoContraction(
                f"increments grew {growth} times in a row (eta_hat={report.eta_hat:.3g}); "
                "shrink T or the domain", report)
        if q.y_norm(u.snapshots - w.snapshots) > c.r:
            report.ball_violations += 1
            raise BallExit(f"iterate left the ball of radius {c.r} around the base solution",
                           report)
        if inc <= c.tol:
            # transient growth means contraction was not observed
            report.converged = report.eta_hat < 1.0
            if not report.converged:
                log.warning("increments fell below tol but eta_hat=%.3g >= 1", report.eta_hat)
            break
    report.delta_b = q.delta_b(u)
    report.residual = q.residual(u)
    return u, report


def solve_nonlinear(model: NonlinearModel, controls: NonlinearControls, grid: GridSpec,
                    bc: NonlocalBC) -> tuple:
    """Iterate ``u <- Q u`` from the base solution until the increment drops below ``tol``.

    Returns ``(solution, report)``.  On :class:`NoContraction`, or when the
    run ends with ``eta_hat >= 1``, the horizon is halved up to
    ``controls.max_shrinks`` times before giving up.
    """
    shrinks = 0
    while True:
        try:
            u, report = _iterate(PicardMap(model, controls, grid, bc))
        except NoContraction as exc:
            if shrinks >= controls.max_shrinks or isinstance(exc, BallExit):
                if exc.report is not None:
                    exc.report.shrinks = shrinks
                raise
            shrinks += 1
            controls = replace(controls, T=controls.T / 2)
            log.warning("no contraction; retrying with T=%g", controls.T)
            continue
        report.shrinks = shrinks
        if not report.converged and report.eta_hat >= 1 and shrinks < controls.max_shrinks:
            shrinks += 1
            controls = replace(controls, T=controls.T / 2)
            log.warning("eta_hat=%.3g >= 1; retrying with T=%g", report.eta_hat, controls.T)
            continue
        if report.converged:
            log.info("converged in %d iterations, eta_hat=%.3g", len(report.increments),
                     report.eta_hat)
        return u, report


def toy_quadratic_model(eps: float, a0: float = 1.0, source=1.0, a=-1.0, m: int = 1) -> NonlinearModel:
    """``B(u) = a0 I + eps diag(u)`` with a fixed source ``F``.

    ``source`` is a constant (scalar or ``m``-vector) or a callable of the ``x`` mesh.
    """
    def B(t, x, u, Du):
        out = np.zeros(u.shape + (m,), dtype=complex)
        idx = np.arange(m)
        out[..., idx, idx] = a0 + eps * u
        return out

    def F(t, x, u, Du):
        s = source(*x) if callable(source) else source
        s = np.asarray(s, dtype=complex)
        if s.shape == u.shape[:-1]:
            s = s[..., None]
        return np.broadcast_to(s, u.shape)

    return NonlinearModel(B, F, m=m, a=a, lipschitz=lambda r: abs(eps))


def linear_model(a0: float = 1.0, source=1.0, a=-1.0, m: int = 1) -> NonlinearModel:
    """``u``-independent model; the base solution is already the answer."""
    return toy_quadratic_model(0.0, a0, source, a, m)
