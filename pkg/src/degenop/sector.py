"""Resolvent estimates over a sector of the complex plane.

For a finite-dimensional value space positivity and R-positivity coincide,
so sampling ``(1 + |lam|) * ||(O + lam)^{-1}||`` over the sector is the
checkable stand-in for the positivity hypothesis on the operator.

Norms are taken on the interior unknowns of boundary-satisfying vectors,
in the Euclidean norm of the tau-uniform grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .boundary import NonlocalBC
from .calculus import GridSpec
from .elliptic import CoefficientField, DiscreteOperator, assemble, check_conditions
from .errors import DomainError, SingularSystem

SINGULAR_RTOL = 1e-14


@dataclass(frozen=True)
class SectorSpec:
    """Samples ``r * exp(i theta)`` for every modulus and ray."""

    phi: float
    moduli: tuple
    rays: tuple
    include_zero: bool = False

    def __post_init__(self):
        moduli = tuple(float(r) for r in self.moduli)
        rays = tuple(float(t) for t in self.rays)
        if not 0.0 < self.phi < np.pi:
            raise DomainError(f"sector angle must lie in (0, pi), got {self.phi}")
        if any(r <= 0 for r in moduli) or any(b <= a for a, b in zip(moduli, moduli[1:])):
            raise DomainError("moduli must be positive and strictly increasing")
        if any(abs(t) > self.phi * (1 + 1e-12) for t in rays):
            raise DomainError("every ray must satisfy |theta| <= phi")
        object.__setattr__(self, "moduli", moduli)
        object.__setattr__(self, "rays", rays)

    @classmethod
    def default(cls, phi: float = 2 * np.pi / 3, decades=(0, 4), n_rays: int = 9,
                include_zero: bool = False):
        lo, hi = decades
        moduli = np.logspace(lo, hi, hi - lo + 1)
        return cls(phi, tuple(moduli), tuple(np.linspace(-phi, phi, n_rays)), include_zero)

    def samples(self):
        if self.include_zero:
            yield 0j
        for r in self.moduli:
            for t in self.rays:
                yield complex(r * np.cos(t), r * np.sin(t))

    def __len__(self):
        return len(self.moduli) * len(self.rays) + int(self.include_zero)


def _norm_from_restricted(S: np.ndarray, lam: complex, p: float, seed: int, n_samples: int):
    M = S + lam * np.eye(S.shape[0])
    U, sv, Vh = linalg.svd(M)
    if sv[-1] <= SINGULAR_RTOL * sv[0] * S.shape[0]:
        raise SingularSystem(f"lambda={lam} is (numerically) a discrete eigenvalue")
    if p == 2:
        return float(1.0 / sv[-1])
    # p != 2: sampled lower bound for the induced p-norm
    rng = np.random.default_rng(seed)
    n = S.shape[0]
    F = rng.standard_normal((n, n_samples)) + 1j * rng.standard_normal((n, n_samples))
    F = np.column_stack([F, U[:, -1]])
    lu = linalg.lu_factor(M)
    X = linalg.lu_solve(lu, F)
    ratios = np.linalg.norm(X, ord=p, axis=0) / np.linalg.norm(F, ord=p, axis=0)
    return float(ratios.max())


def resolvent_norm(op: DiscreteOperator, lam: complex, p: float = 2.0, seed: int = 0,
                   n_samples: int = 64) -> float:
    """``||(O_h + lam)^{-1}||`` on the boundary-satisfying subspace.

    ``op`` should be assembled with ``lam = 0``.  For ``p == 2`` this is the
    exact induced norm (reciprocal smallest singular value); otherwise a
    seeded random lower bound.
    """
    return _norm_from_restricted(op._restricted, complex(lam), p, seed, n_samples)


@dataclass(frozen=True)
class SectorSample:
    lam: complex
    resolvent_norm: float
    weighted_norm: float
    status: str = "ok"


@dataclass
class PositivityReport:
    """Sampled resolvent norms and their weighted maximum ``M_hat``."""

    samples: list = field(default_factory=list)

    @property
    def M_hat(self):
        vals = [s.weighted_norm for s in self.samples if s.status == "ok"]
        return max(vals) if vals else None

    @property
    def argmax(self):
        ok = [s for s in self.samples if s.status == "ok"]
        return max(ok, key=lambda s: s.weighted_norm) if ok else None


def positivity_scan(coeffs: CoefficientField, bc: NonlocalBC, grid: GridSpec, sector: SectorSpec,
                    p: float = 2.0, seed: int = 0, threads: int = 1) -> PositivityReport:
    """Tabulate ``(1 + |lam|) * ||(O_h + lam)^{-1}||`` over the sector samples."""
    check_conditions(coeffs, bc, grid, p)
    lams = list(sector.samples())
    if not lams:
        return PositivityReport([])
    S = assemble(coeffs, bc, grid, 0.0, check=False)._restricted

    def one(lam):
        try:
            r = _norm_from_restricted(S, lam, p, seed, 64)
            return SectorSample(lam, r, (1 + abs(lam)) * r)
        except SingularSystem:
            return SectorSample(lam, float("inf"), float("inf"), "singular")

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(threads) as ex:
            return PositivityReport(list(ex.map(one, lams)))
    return PositivityReport([one(lam) for lam in lams])
