"""Transport demo with ``m`` reacting species.

Physical form (species ``i``, axes ``k``)::

    du_i/dt = sum_k [ a_ki D[2]_k u_i + b_ki D[1]_k (u_i w_k) ] + sum_j d_j u_j + f_i(u) + g_i

The adapter rewrites it as ``du/dt + sum_k a'_k D[2]_k u + sum_k A_k D[1]_k u
+ B u = F(u)`` with ``a'_k = -diag(a_ki)``, ``A_k = -diag(b_ki w_k)``,
``B = -C - diag(sum_k b_ki D[1]_k w_k)`` where ``C[i, j] = d_j``, and
``F = f(u) + g``.  The coefficient ``b_ki`` multiplies the derivative of the
product from outside.  Advection is differenced centrally; large winds may
oscillate.

The bundled reaction mechanisms are illustrative toys.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from .boundary import NonlocalBC, bc_from_dict
from .calculus import GridSpec, tau_diff
from .elliptic import CoefficientField, assemble
from .errors import ValidationError
from .io import write_json, write_snapshot_csv
from .nonlinear import NonlinearControls, NonlinearModel, solve_nonlinear
from .norms import NormSpec

log = logging.getLogger(__name__)


def no_reaction(u, rates=()):
    return np.zeros_like(u)


def chapman_reaction(u, rates):
    """``f1 = -k1 u1 u2``, ``f2 = -k1 u1 u2 + k2 u3``, ``f3 = k1 u1 u2 - k2 u3``."""
    k1, k2 = rates
    p = k1 * u[..., 0] * u[..., 1]
    q = k2 * u[..., 2]
    return np.stack([-p, -p + q, p - q], axis=-1)


def exchange_reaction(u, rates):
    """Pairwise exchange ``u1 + u2 <-> 2 u3``; the rates sum to zero over species."""
    k1, k2 = rates
    r = k1 * u[..., 0] * u[..., 1] - k2 * u[..., 2]
    return np.stack([-r, -r, 2 * r], axis=-1)


REACTIONS = {"none": no_reaction, "chapman": chapman_reaction, "exchange": exchange_reaction}


def _per_axis_species(value, grid: GridSpec, m: int, name: str) -> np.ndarray:
    """Broadcast species data (a scalar up to a species x axis table) to ``(ndim,) + grid.shape + (m,)``."""
    target = (grid.ndim,) + grid.shape + (m,)
    if callable(value):
        value = value(*grid.mesh("x"))
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return np.full(target, float(arr))
    if arr.shape == (m,):
        return np.broadcast_to(arr, target).copy()
    if arr.shape == (m, grid.ndim):
        return np.broadcast_to(arr.T.reshape((grid.ndim,) + (1,) * grid.ndim + (m,)), target).copy()
    if arr.shape == target:
        return arr.copy()
    raise ValidationError(f"{name}: cannot broadcast shape {arr.shape} to {target}")


@dataclass
class PollutantModel:
    """Sampled data of the species system in the physical sign convention.

    ``diffusion`` and ``advection`` have shape ``(ndim,) + grid.shape + (m,)``,
    ``wind`` has shape ``(ndim,) + grid.shape``, ``coupling_d`` has length
    ``m`` and ``source`` has shape ``grid.shape + (m,)``.
    """

    grid: GridSpec
    bc: NonlocalBC
    diffusion: np.ndarray = field(repr=False)
    advection: np.ndarray = field(repr=False)
    wind: np.ndarray = field(repr=False)
    coupling_d: np.ndarray
    source: np.ndarray = field(repr=False)
    reaction: Callable = no_reaction
    rates: tuple = ()

    def __post_init__(self):
        g, m = self.grid, self.m
        if self.diffusion.shape != (g.ndim,) + g.shape + (m,):
            raise ValidationError(f"diffusion has shape {self.diffusion.shape}")
        if self.advection.shape != self.diffusion.shape:
            raise ValidationError(f"advection has shape {self.advection.shape}")
        if self.wind.shape != (g.ndim,) + g.shape:
            raise ValidationError(f"wind has shape {self.wind.shape}")
        if np.shape(self.coupling_d) != (m,):
            raise ValidationError(f"coupling_d must have {m} entries")
        if not np.all(self.diffusion > 0):
            raise ValidationError("diffusion must be positive (physical convention)")
        if len(self.bc) != g.ndim:
            raise ValidationError("need one boundary condition per axis")

    @property
    def m(self) -> int:
        return self.source.shape[-1]

    @classmethod
    def build(cls, grid: GridSpec, bc: NonlocalBC, m: int = 3, diffusion=1.0, advection=1.0,
              wind=0.0, coupling_d=0.0, source=0.0, reaction="none", rates=()):
        """Sample constants or callables of the ``x`` mesh onto ``grid``; lists are per species."""
        if isinstance(wind, (int, float)):
            wind = [wind] * grid.ndim
        wind_f = np.empty((grid.ndim,) + grid.shape)
        x = grid.mesh("x")
        for k, w in enumerate(wind):
            wind_f[k] = w(*x) if callable(w) else float(w)
        d = np.asarray(coupling_d, dtype=float)
        if d.ndim and d.shape != (m,):
            raise ValidationError(f"coupling_d must have {m} entries")
        d = np.broadcast_to(d, (m,)).copy()
        src = np.empty(grid.shape + (m,), dtype=complex)
        sources = source if isinstance(source, (list, tuple)) else [source] * m
        if len(sources) != m:
            raise ValidationError(f"sources must have {m} entries")
        for i, s in enumerate(sources):
            src[..., i] = s(*x) if callable(s) else s
        react = REACTIONS[reaction] if isinstance(reaction, str) else reaction
        if react in (chapman_reaction, exchange_reaction) and m != 3:
            raise ValidationError("the bundled reactions need exactly 3 species")
        return cls(grid, bc, _per_axis_species(diffusion, grid, m, "diffusion"),
                   _per_axis_species(advection, grid, m, "advection"), wind_f, d, src,
                   react, tuple(rates))

    def f(self, u):
        return self.reaction(u, self.rates)

    def permuted(self, perm) -> "PollutantModel":
        """Relabel species: new species ``i`` is old species ``perm[i]``."""
        perm = np.asarray(perm)
        inv = np.argsort(perm)
        base = self.reaction
        react = lambda u, rates: base(u[..., inv], rates)[..., perm]
        return replace(self, diffusion=self.diffusion[..., perm], advection=self.advection[..., perm],
                       coupling_d=self.coupling_d[perm], source=self.source[..., perm],
                       reaction=react)


@dataclass
class AbstractForm:
    """The species system as a nonlinear model plus its frozen linear coefficients."""

    model: NonlinearModel
    coeffs: CoefficientField
    bc: NonlocalBC
    grid: GridSpec


def _diag_field(values):
    m = values.shape[-1]
    out = np.zeros(values.shape + (m,), dtype=complex)
    idx = np.arange(m)
    out[..., idx, idx] = values
    return out


def to_abstract(pm: PollutantModel) -> AbstractForm:
    """Convert to the abstract form with the elliptic sign convention."""
    g, m = pm.grid, pm.m
    a = tuple(-pm.diffusion[k] for k in range(g.ndim))
    has_wind = bool(np.any(pm.wind != 0))
    first = None
    div = np.zeros(g.shape + (m,))
    if has_wind:
        first = tuple(_diag_field(-pm.advection[k] * pm.wind[k][..., None]) for k in range(g.ndim))
        for k in range(g.ndim):
            div += pm.advection[k] * tau_diff(pm.wind[k], g.dtau[k], k, 1)[..., None]
    C = np.broadcast_to(pm.coupling_d, (m, m))
    A_lin = -C - _diag_field(div)
    A_lin = np.broadcast_to(A_lin, g.shape + (m, m)).copy()
    src = pm.source

    def B(t, x, u, Du):
        return A_lin

    def F(t, x, u, Du):
        return pm.f(u) + src

    nl = NonlinearModel(B, F, m=m, a=a, first_order=first)
    coeffs = CoefficientField.build(g, m, a=a, A=A_lin, A_first=first)
    return AbstractForm(nl, coeffs, pm.bc, g)


def conservation_weights(grid: GridSpec, bc: NonlocalBC):
    """Tensor weights ``W`` on interior nodes with ``W^T S = 0`` for the diffusion operator.

    ``S`` is the boundary-eliminated operator ``-sum_k D[2]_k``.  Returns an
    array shaped ``grid.shape`` (zero on boundary nodes), or ``None`` when
    some axis has no conserved quantity (e.g. Dirichlet).  Each axis factor
    is normalized to total tau-length.
    """
    from scipy.linalg import null_space

    factors = []
    for k, axis in enumerate(grid.axes):
        g1 = GridSpec((axis,))
        op = assemble(CoefficientField.build(g1, 1, a=-1.0, A=0.0), NonlocalBC((bc[k],)), g1,
                      check=False)
        S = op.restricted()
        ns = null_space(S.conj().T, rcond=1e-10)
        if ns.shape[1] != 1:
            return None
        w = np.real(ns[:, 0] / ns[:, 0].sum()) * axis.tau_b
        full = np.zeros(axis.n_nodes)
        full[op.interior_index] = w
        factors.append(full)
    W = factors[0]
    for f in factors[1:]:
        W = np.multiply.outer(W, f)
    return W


def species_mass(snapshots: np.ndarray, W: np.ndarray) -> np.ndarray:
    """Weighted totals per time and species, shape ``(n_times, m)``."""
    axes = tuple(range(1, W.ndim + 1))
    return np.real((snapshots * W[None, ..., None]).sum(axis=axes))


def mass_budget(snapshots: np.ndarray, source: np.ndarray, W: np.ndarray, dt: float) -> np.ndarray:
    """Per-step defect ``d/dt sum_i M_i - sum_i <W, g_i>``."""
    total = species_mass(snapshots, W).sum(axis=1)
    rate = np.diff(total) / dt
    return rate - float(np.real((source * W[..., None]).sum()))


def controls_from_config(cfg: dict) -> NonlinearControls:
    t, nl = cfg.get("time", {}), cfg.get("nonlinear", {})
    return NonlinearControls(
        r=float(nl.get("r", 1e6)), T=float(t.get("T", 1.0)), n_steps=int(t.get("steps", 20)),
        max_outer=int(nl.get("max_outer", 50)), tol=float(nl.get("tol", 1e-10)),
        scheme=t.get("scheme", "implicit-euler"), norm=NormSpec(), max_shrinks=int(nl.get("max_shrinks", 0)),
    )


def _source_fn(spec):
    if isinstance(spec, dict):
        amp = float(spec.get("amplitude", 1.0))
        center = np.asarray(spec["center"], dtype=float)
        width = float(spec.get("width", 0.1))

        def g(*x):
            r2 = sum((xk - ck) ** 2 for xk, ck in zip(x, center))
            return amp * np.exp(-r2 / (2 * width**2))
        return g
    return float(spec)


def model_from_config(cfg: dict) -> PollutantModel:
    """Build a :class:`PollutantModel` from a validated demo config."""
    n_cells = cfg["grid"]["n_cells"]
    ndim = len(n_cells)
    lengths = cfg["grid"].get("lengths", [1.0] * ndim)
    alpha = cfg.get("alpha", 0.0)
    alphas = alpha if isinstance(alpha, list) else [alpha] * ndim
    grid = GridSpec.build(alphas, lengths, n_cells)
    bc_cfg = cfg.get("bc", "neumann")
    bc = NonlocalBC.uniform(bc_cfg, ndim) if isinstance(bc_cfg, str) else bc_from_dict(bc_cfg)
    m = int(cfg.get("species", 3))
    src = cfg.get("sources", 0.0)
    sources = [_source_fn(s) for s in src] if isinstance(src, list) else _source_fn(src)
    react = cfg.get("reactions", {})
    return PollutantModel.build(
        grid, bc, m,
        diffusion=cfg.get("diffusion", 1.0),
        advection=cfg.get("advection_scale", 1.0),
        wind=cfg.get("wind", 0.0),
        coupling_d=cfg.get("coupling_d", 0.0),
        source=sources,
        reaction=react.get("type", "none"),
        rates=react.get("rates", []),
    )


def run_demo(cfg: dict, out_dir) -> dict:
    """Solve the configured species system and write its artifacts to ``out_dir``.

    Writes one ``species_<i>.csv`` per species (final snapshot) next to the
    JSON reports and ``grid.csv``.  Returns the summary with a ``files`` list.
    """
    out_dir = Path(out_dir)
    pm = model_from_config(cfg)
    controls = controls_from_config(cfg)
    form = to_abstract(pm)
    sol, report = solve_nonlinear(form.model, controls, form.grid, form.bc)
    files = []
    for i in range(pm.m):
        name = f"species_{i}.csv"
        write_snapshot_csv(out_dir / name, pm.grid, sol.snapshots[-1], components=[i])
        files.append(name)
    summary = {
        "species": pm.m,
        "grid_shape": list(pm.grid.shape),
        "T": report.T,
        "min_re": [float(np.real(sol.snapshots[..., i]).min()) for i in range(pm.m)],
    }
    if min(summary["min_re"]) < -1e-8:
        log.warning("negative concentrations down to %.3g (central advection, no limiter)",
                    min(summary["min_re"]))
    W = conservation_weights(pm.grid, pm.bc)
    if W is not None:
        mass = species_mass(sol.snapshots, W)
        summary["mass"] = mass.tolist()
        summary["mass_budget_defect"] = float(np.abs(mass_budget(sol.snapshots, pm.source, W, sol.dt)).max())
    write_json(out_dir / "report.json", report.to_dict())
    write_json(out_dir / "summary.json", summary)
    pm.grid.write_csv(out_dir / "grid.csv")
    files += ["report.json", "summary.json", "grid.csv"]
    summary["files"] = files
    return summary
