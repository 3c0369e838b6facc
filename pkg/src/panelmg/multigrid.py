"""Tensor-product geometric multigrid with horizontal semi-coarsening.

The hierarchy halves the horizontal resolution per level and keeps the
vertical grid unchanged; combined with the exact vertical line solves of
the smoother this is robust for the grid-aligned vertical anisotropy of
the model problem.  Coarse operators are rebuilt by rediscretising on
each coarse grid.  Residuals move down by horizontal cell averaging and
corrections move up by bilinear interpolation of cell-center values
(constant extension outside the panel).

Because the operator carries the cell volume on its diagonal, the
coarse-grid right-hand side must aggregate residuals like volumes do:
the V-cycle therefore restricts with the children *sum* (4x the cell
average exposed by :func:`restrict`); with the plain average the coarse
correction would systematically under-correct by that factor.

Level policies: ``standard`` coarsens to a single global column,
``shallow`` until one column per worker is left, ``very_shallow``
performs exactly three coarsenings (and smooths five times on its
coarsest level), ``explicit`` takes a level count.  On levels with
fewer columns than workers, data folds onto a quarter of the workers
per level (see :mod:`panelmg.partition`); ``l_split`` can force folding
to start on a finer level than strictly necessary.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

from .geometry import PanelGrid
from .krylov import SolveReport
from .params import ModelParameters, is_power_of_two
from .partition import (Decomposition, DistField, LevelLayout, collect,
                        distribute, dist_norm, halo_exchange)
from .smoother import LineSmoother
from .stencil import PanelOperator

__all__ = [
    "MGConfig",
    "Level",
    "LevelHierarchy",
    "build_hierarchy",
    "restrict",
    "prolong",
    "v_cycle",
    "mg_solve",
]

POLICIES = ("standard", "shallow", "very_shallow", "explicit")


@dataclass(frozen=True)
class MGConfig:
    """Cycle shape, level policy and stopping rule of the multigrid solver."""

    nu_pre: int = 1
    nu_post: int = 1
    policy: str = "standard"
    explicit_levels: int | None = None
    coarse_sweeps: int | None = None
    eps: float = 1e-5
    maxiter: int = 100
    l_split: int | None = None
    rho: float = 1.0
    deterministic: bool = False

    def __post_init__(self):
        if self.nu_pre < 0 or self.nu_post < 0 or self.nu_pre + self.nu_post < 1:
            raise ValueError("need at least one smoothing step per level")
        if self.policy not in POLICIES:
            raise ValueError(f"policy must be one of {POLICIES}")
        if self.policy == "explicit" and (self.explicit_levels is None
                                          or self.explicit_levels < 1):
            raise ValueError("explicit policy needs explicit_levels >= 1")
        if not 0.0 < self.eps < 1.0:
            raise ValueError("eps must lie in (0, 1)")
        if self.maxiter < 1:
            raise ValueError("maxiter must be positive")
        if not 0.0 < self.rho < 2.0:
            raise ValueError("overrelaxation weight must lie in (0, 2)")
        if self.coarse_sweeps is not None and self.coarse_sweeps < 1:
            raise ValueError("coarse_sweeps must be positive")

    def resolved_coarse_sweeps(self) -> int:
        if self.coarse_sweeps is not None:
            return self.coarse_sweeps
        return 5 if self.policy == "very_shallow" else 1


@dataclass
class Level:
    """One grid level: geometry, layout, operator, smoother and transfers."""

    grid: PanelGrid
    layout: LevelLayout
    op: PanelOperator
    smoother: LineSmoother
    # Staging layout at this level's nx but the coarser level's worker
    # set; present exactly when moving to the next level folds workers.
    fold_layout: LevelLayout | None = None

    @property
    def nx(self) -> int:
        return self.grid.nx


@dataclass
class _Scratch:
    u: DistField
    f: DistField
    r: DistField


class LevelHierarchy:
    """Immutable ladder of levels, finest first."""

    def __init__(self, levels: list[Level], decomp: Decomposition,
                 params: ModelParameters):
        self.levels = levels
        self.decomp = decomp
        self.params = params

    def __len__(self) -> int:
        return len(self.levels)

    @property
    def fine(self) -> Level:
        return self.levels[0]

    def level_sizes(self) -> list[int]:
        return [lev.nx for lev in self.levels]

    def first_fold_level(self) -> int | None:
        """Level number (finest = len(self)) below which workers fold."""
        for c, lev in enumerate(self.levels):
            if lev.fold_layout is not None:
                return len(self.levels) - c - 1
        return None

    def make_scratch(self) -> list[_Scratch]:
        nz = self.params.nz
        return [
            _Scratch(DistField.zeros(lev.layout, nz),
                     DistField.zeros(lev.layout, nz),
                     DistField.zeros(lev.layout, nz))
            for lev in self.levels
        ]

    def reset_counters(self) -> None:
        for lev in self.levels:
            lev.layout.halo_count = 0
        self.decomp.collect_calls = 0
        self.decomp.distribute_calls = 0


def _level_count(nx: int, pside: int, cfg: MGConfig) -> int:
    lmax = int(math.log2(nx)) + 1
    if cfg.policy == "standard":
        return lmax
    if cfg.policy == "shallow":
        return int(math.log2(nx // pside)) + 1
    if cfg.policy == "very_shallow":
        return min(4, lmax)
    if cfg.explicit_levels > lmax:
        raise ValueError(
            f"{cfg.explicit_levels} levels would coarsen an nx={nx} grid "
            f"below one column (at most {lmax})")
    return cfg.explicit_levels


def build_hierarchy(grid: PanelGrid, params: ModelParameters, cfg: MGConfig,
                    decomp: Decomposition | None = None) -> LevelHierarchy:
    """Construct grids, layouts, operators and smoothers for every level."""
    if not is_power_of_two(grid.nx):
        raise ValueError("multigrid needs a power-of-two horizontal size")
    if decomp is None:
        decomp = Decomposition(grid.nx, 1)
    nlev = _level_count(grid.nx, decomp.pside, cfg)
    if cfg.l_split is not None and not 1 <= cfg.l_split <= nlev:
        raise ValueError(f"l_split must lie in [1, {nlev}]")

    levels: list[Level] = []
    g = grid
    pside = decomp.pside
    for c in range(nlev):
        paper_level = nlev - c
        want = pside
        if cfg.l_split is not None and paper_level <= cfg.l_split:
            folds = cfg.l_split - paper_level + 1
            want = max(1, decomp.pside >> folds)
        pside = min(pside, want, g.nx)
        layout = decomp.layout(g.nx, pside)
        op = PanelOperator(g, params, layout)
        levels.append(Level(g, layout, op, LineSmoother(op)))
        if c + 1 < nlev:
            g = g.coarsen()

    for c in range(nlev - 1):
        fine, coarse = levels[c], levels[c + 1]
        if coarse.layout.pside < fine.layout.pside:
            if coarse.layout.pside * 2 != fine.layout.pside:
                raise ValueError("worker folding must halve the active side per level")
            fine.fold_layout = decomp.layout(fine.nx, coarse.layout.pside)
    return LevelHierarchy(levels, decomp, params)


def _restrict_kernel(fo, co, weight: float) -> None:
    co[...] = fo[0::2, 0::2, :] + fo[1::2, 0::2, :]
    co += fo[0::2, 1::2, :]
    co += fo[1::2, 1::2, :]
    if weight != 1.0:
        co *= weight


def _restrict_into(df: DistField, fine: Level, coarse: Level,
                   out: DistField, weight: float) -> DistField:
    if fine.fold_layout is not None:
        df = collect(df, fine.fold_layout)
    for w, cf in out.parts.items():
        _restrict_kernel(df.parts[w].owned, cf.owned, weight)
    return out


def restrict(df: DistField, fine: Level, coarse: Level) -> DistField:
    """Cell-average restriction: each coarse cell gets the mean of its
    four fine children; vertical index untouched."""
    out = DistField.zeros(coarse.layout, df.nz)
    return _restrict_into(df, fine, coarse, out, 0.25)


def _prolong_kernel(cdata, out) -> None:
    cc = cdata[1:-1, 1:-1, :]
    cw = cdata[0:-2, 1:-1, :]
    ce = cdata[2:, 1:-1, :]
    cs = cdata[1:-1, 0:-2, :]
    cn = cdata[1:-1, 2:, :]
    csw = cdata[0:-2, 0:-2, :]
    cse = cdata[2:, 0:-2, :]
    cnw = cdata[0:-2, 2:, :]
    cne = cdata[2:, 2:, :]
    out[0::2, 0::2, :] = (9.0 * cc + 3.0 * cw + 3.0 * cs + csw) * 0.0625
    out[1::2, 0::2, :] = (9.0 * cc + 3.0 * ce + 3.0 * cs + cse) * 0.0625
    out[0::2, 1::2, :] = (9.0 * cc + 3.0 * cw + 3.0 * cn + cnw) * 0.0625
    out[1::2, 1::2, :] = (9.0 * cc + 3.0 * ce + 3.0 * cn + cne) * 0.0625


def prolong(df: DistField, coarse: Level, fine: Level,
            out: DistField | None = None) -> DistField:
    """Bilinear cell-center interpolation onto the fine grid.

    The coarse halo must be current; mirror halos at the panel boundary
    turn the interpolation into a constant extension there.  Only owned
    cells of the result are meaningful; ``out`` may supply a reusable
    target field.
    """
    nz = df.nz
    if fine.fold_layout is not None:
        staged = DistField.zeros(fine.fold_layout, nz)
        for w, cf in df.parts.items():
            _prolong_kernel(cf.data, staged.parts[w].owned)
        return distribute(staged, fine.layout, out=out)
    if out is None:
        out = DistField.zeros(fine.layout, nz)
    for w, cf in df.parts.items():
        _prolong_kernel(cf.data, out.parts[w].owned)
    return out


def v_cycle(hier: LevelHierarchy, cfg: MGConfig, scratch: list[_Scratch],
            c: int = 0) -> None:
    """One V-cycle on the iterate ``scratch[c].u`` (halo-consistent on entry)."""
    lev = hier.levels[c]
    s = scratch[c]
    if c + 1 < len(hier.levels):
        lev.smoother.sweep(s.u, s.f, cfg.nu_pre, cfg.rho)
        lev.op.residual(s.f, s.u, out=s.r)
        coarse = hier.levels[c + 1]
        # Children-sum restriction: consistent with the volume-scaled
        # operator rebuilt on the coarse grid.
        _restrict_into(s.r, lev, coarse, scratch[c + 1].f, weight=1.0)
        scratch[c + 1].u.fill(0.0)
        v_cycle(hier, cfg, scratch, c + 1)
        # s.r is free again here (already restricted), so it doubles as
        # the correction buffer.
        corr = prolong(scratch[c + 1].u, coarse, lev, out=s.r)
        for w, uf in s.u.parts.items():
            own = uf.owned
            own += corr.parts[w].owned
        halo_exchange(s.u)
        lev.smoother.sweep(s.u, s.f, cfg.nu_post, cfg.rho)
    else:
        lev.smoother.sweep(s.u, s.f, cfg.resolved_coarse_sweeps(), cfg.rho)


def mg_solve(f: DistField, hier: LevelHierarchy, cfg: MGConfig
             ) -> tuple[DistField, SolveReport]:
    """Repeat V-cycles from a zero start until ||r||/||r0|| < eps.

    Non-convergence within ``maxiter`` is reported, not raised.
    """
    scratch = hier.make_scratch()
    s0 = scratch[0]
    for w, part in s0.f.parts.items():
        part.data[...] = f.parts[w].data
    u = s0.u

    det = cfg.deterministic
    r0 = dist_norm(s0.f, det)
    history = [r0]
    echo = {"solver": "mg", "policy": cfg.policy, "levels": len(hier.levels),
            "nu_pre": cfg.nu_pre, "nu_post": cfg.nu_post, "rho": cfg.rho,
            "coarse_sweeps": cfg.resolved_coarse_sweeps(), "eps": cfg.eps,
            "maxiter": cfg.maxiter, "deterministic": det,
            "workers": hier.decomp.workers}
    if r0 == 0.0:
        return u, SolveReport(0, history, True, 0.0, echo)

    converged = False
    t0 = time.perf_counter()
    for _ in range(cfg.maxiter):
        v_cycle(hier, cfg, scratch)
        rnorm = dist_norm(hier.fine.op.residual(s0.f, u, out=s0.r), det)
        history.append(rnorm)
        if rnorm / r0 < cfg.eps:
            converged = True
            break
    wall = time.perf_counter() - t0
    return u, SolveReport(len(history) - 1, history, converged, wall, echo)

