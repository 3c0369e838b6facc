"""Benchmark harness: single solves, scaling schedules and robustness tables.

Each experiment derives its parameters from (nx, nz, dt), builds the
requested solver, runs one solve from a zero start and appends one CSV
row.  Right-hand sides are reproducible: ``random`` draws uniform
[-1, 1] values on the global grid from a seeded generator (so the rhs
is identical for every worker count), ``manufactured`` applies the
discrete operator to a smooth reference solution (making that solution
the exact discrete answer), ``file`` loads a dumped field.

Tables: ``param_space`` tabulates the derived coefficients and
anisotropies per resolution; ``weak_scaling`` runs the multigrid solver
along the fixed-Courant refinement schedule; ``levels`` compares the
level policies; ``robustness`` scans the coefficient multipliers
f_omega2 in {1, 10, 100} and f_lambda2 in {100, 0.01} for all solver
variants.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field as dc_field

import numpy as np

from .field import Field
from .geometry import PanelGrid, panel_grid
from .krylov import SSORPreconditioner, SolveReport, pcg_solve
from .multigrid import MGConfig, build_hierarchy, mg_solve
from .params import (DEFAULT_CONSTANTS, ModelParameters, PhysicalConstants,
                     anisotropy, derive_parameters, weak_scaling_schedule)
from .partition import decompose, scatter_owned
from .smoother import LineSmoother
from .stencil import PanelOperator, apply_operator

__all__ = [
    "SpecError",
    "MemoryCapError",
    "ExperimentSpec",
    "manufactured_rhs",
    "run_experiment",
    "run_table",
    "EXPERIMENT_COLUMNS",
    "PARAM_SPACE_COLUMNS",
]

SOLVERS = ("mg", "cg")
POLICIES = ("standard", "shallow", "very_shallow", "explicit")
RHS_MODES = ("random", "manufactured", "file")
TABLES = ("param_space", "weak_scaling", "levels", "robustness")

DEFAULT_MEMORY_CAP = 8 * 2 ** 30
# Rough per-solve footprint: solution/rhs/residual plus hierarchy or CG
# vectors and the per-level coefficient caches, in fine-grid fields.
MEMORY_FIELDS = 12
MEMORY_SAFETY = 1.5

EXPERIMENT_COLUMNS = [
    "nx", "nz", "dof", "dt", "omega2", "lambda2", "f_omega2", "f_lambda2",
    "solver", "policy", "workers", "iterations", "converged",
    "final_rel_residual", "wall_time_s", "time_per_iter_s", "seed",
]

PARAM_SPACE_COLUMNS = [
    "nx", "nz", "dof", "dx_km", "dt", "omega2", "lambda2",
    "beta_bottom", "beta_middle", "beta_top",
]


class SpecError(ValueError):
    """The experiment description is invalid."""


class MemoryCapError(RuntimeError):
    """The estimated memory footprint exceeds the configured cap."""


@dataclass(frozen=True)
class ExperimentSpec:
    """Everything needed to reproduce one solve."""

    nx: int = 256
    nz: int = 128
    dt: float = 600.0
    solver: str = "mg"
    policy: str = "standard"
    explicit_levels: int | None = None
    f_omega2: float = 1.0
    f_lambda2: float = 1.0
    workers: int = 1
    eps: float = 1e-5
    maxiter: int | None = None
    rho: float = 1.0
    nu_pre: int = 1
    nu_post: int = 1
    rhs: str = "random"
    seed: int = 0
    rhs_file: str | None = None
    flat: bool = False
    deterministic: bool = False
    output: str | None = None
    memory_cap_bytes: int = DEFAULT_MEMORY_CAP
    constants: PhysicalConstants = dc_field(default_factory=PhysicalConstants)

    def validate(self) -> None:
        if self.solver not in SOLVERS:
            raise SpecError(f"solver must be one of {SOLVERS}")
        if self.policy not in POLICIES:
            raise SpecError(f"policy must be one of {POLICIES}")
        if self.policy == "explicit" and (self.explicit_levels is None
                                          or self.explicit_levels < 1):
            raise SpecError("explicit policy needs a positive level count")
        if self.rhs not in RHS_MODES:
            raise SpecError(f"rhs must be one of {RHS_MODES}")
        if self.rhs == "file" and not self.rhs_file:
            raise SpecError("rhs=file needs a field file path")
        if not 0.0 < self.eps < 1.0:
            raise SpecError("eps must lie in (0, 1)")
        if not 0.0 < self.rho < 2.0:
            raise SpecError("rho must lie in (0, 2)")
        if self.nu_pre < 0 or self.nu_post < 0 or self.nu_pre + self.nu_post < 1:
            raise SpecError("need at least one smoothing step per level")
        if self.maxiter is not None and self.maxiter < 1:
            raise SpecError("maxiter must be positive")

    @property
    def dof(self) -> int:
        return self.nx * self.nx * self.nz

    def resolved_maxiter(self) -> int:
        if self.maxiter is not None:
            return self.maxiter
        return 100 if self.solver == "mg" else 2000


def estimate_memory_bytes(spec: ExperimentSpec) -> int:
    return int(MEMORY_FIELDS * spec.dof * 8 * MEMORY_SAFETY)


def check_memory(spec: ExperimentSpec) -> None:
    est = estimate_memory_bytes(spec)
    if est > spec.memory_cap_bytes:
        raise MemoryCapError(
            f"estimated footprint {est / 2**30:.2f} GiB exceeds the cap of "
            f"{spec.memory_cap_bytes / 2**30:.2f} GiB "
            f"(nx={spec.nx}, nz={spec.nz}, {spec.dof} dof)")


def manufactured_rhs(grid: PanelGrid, params: ModelParameters
                     ) -> tuple[Field, Field]:
    """Smooth reference solution with zero boundary flux and its rhs.

    The reference is a product of cosines in the panel coordinates and
    in the uniform vertical index of the graded grid; the rhs is its
    image under the discrete operator, so the reference is the exact
    discrete solution and any solver must reproduce it to its tolerance.
    """
    xc = grid.xi_centers()
    eta = (np.arange(grid.nz) + 0.5) / grid.nz
    prof = np.cos(0.5 * math.pi * (xc + 1.0))
    uex = (prof[:, None, None] * prof[None, :, None]
           * np.cos(math.pi * eta)[None, None, :])
    u_field = Field.from_owned(uex)
    f_field = apply_operator(u_field, grid, params)
    return f_field, u_field


def _global_rhs(spec: ExperimentSpec, grid: PanelGrid,
                params: ModelParameters) -> np.ndarray:
    if spec.rhs == "random":
        rng = np.random.default_rng(spec.seed)
        return rng.uniform(-1.0, 1.0, size=(spec.nx, spec.nx, spec.nz))
    if spec.rhs == "manufactured":
        return manufactured_rhs(grid, params)[0].owned.copy()
    f = Field.load(spec.rhs_file)
    if f.m != spec.nx or f.nz != spec.nz:
        raise SpecError(
            f"rhs file holds a {f.m}x{f.m}x{f.nz} field, expected "
            f"{spec.nx}x{spec.nx}x{spec.nz}")
    return f.owned.copy()


def run_experiment(spec: ExperimentSpec) -> tuple[SolveReport, dict]:
    """Run one solve and return its report plus the CSV row."""
    spec.validate()
    check_memory(spec)
    try:
        params = derive_parameters(spec.nx, spec.nz, spec.dt, spec.constants,
                                   spec.f_omega2, spec.f_lambda2)
        decomp = decompose(spec.nx, spec.workers)
    except ValueError as err:
        raise SpecError(str(err)) from err
    grid = panel_grid(spec.nx, spec.nz, depth=spec.constants.shell_depth,
                      flat_mode=spec.flat)
    f_global = _global_rhs(spec, grid, params)

    if spec.solver == "mg":
        cfg = MGConfig(nu_pre=spec.nu_pre, nu_post=spec.nu_post,
                       policy=spec.policy, explicit_levels=spec.explicit_levels,
                       eps=spec.eps, maxiter=spec.resolved_maxiter(),
                       rho=spec.rho, deterministic=spec.deterministic)
        hier = build_hierarchy(grid, params, cfg, decomp)
        fdist = scatter_owned(f_global, hier.fine.layout)
        _, report = mg_solve(fdist, hier, cfg)
    else:
        layout = decomp.layout(spec.nx)
        op = PanelOperator(grid, params, layout)
        precond = SSORPreconditioner(LineSmoother(op), spec.rho)
        fdist = scatter_owned(f_global, layout)
        _, report = pcg_solve(fdist, op, precond, eps=spec.eps,
                              maxiter=spec.resolved_maxiter(),
                              deterministic=spec.deterministic)

    row = _experiment_row(spec, params, report)
    if spec.output:
        append_rows(spec.output, [row], EXPERIMENT_COLUMNS)
    return report, row


def _experiment_row(spec: ExperimentSpec, params: ModelParameters,
                    report: SolveReport) -> dict:
    iters = report.iterations
    return {
        "nx": spec.nx,
        "nz": spec.nz,
        "dof": spec.dof,
        "dt": f"{spec.dt:.6g}",
        "omega2": f"{params.omega2:.6e}",
        "lambda2": f"{params.lambda2:.6e}",
        "f_omega2": f"{spec.f_omega2:.6g}",
        "f_lambda2": f"{spec.f_lambda2:.6g}",
        "solver": spec.solver,
        "policy": spec.policy if spec.solver == "mg" else "",
        "workers": spec.workers,
        "iterations": iters,
        "converged": report.converged,
        "final_rel_residual": f"{report.final_relative_residual:.6e}",
        "wall_time_s": f"{report.wall_time:.6f}",
        "time_per_iter_s": f"{report.wall_time / iters:.6f}" if iters else "",
        "seed": spec.seed if spec.rhs == "random" else "",
    }


def append_rows(path: str, rows: list[dict], columns: list[str]) -> None:
    """Append CSV rows, writing the header only for a new or empty file."""
    need_header = not os.path.exists(path) or os.path.getsize(path) == 0
    if not need_header:
        with open(path, newline="") as fh:
            first = fh.readline().strip()
        if first and first.split(",") != columns:
            raise SpecError(f"existing file {path} has an incompatible header")
    with open(path, "a", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns)
        if need_header:
            writer.writeheader()
        for row in rows:
            writer.writerow(row)


def param_space_rows(nx_values, nz: int, base_dt: float, base_nx: int,
                     constants: PhysicalConstants = DEFAULT_CONSTANTS) -> list[dict]:
    """Derived-coefficient table along the fixed-Courant schedule.

    ``base_dt`` is the time step at ``base_nx``; other resolutions scale
    it so the Courant number stays put.
    """
    rows = []
    for nx in nx_values:
        dt = base_dt * base_nx / nx
        p = derive_parameters(nx, nz, dt, constants)
        grid = panel_grid(nx, nz, depth=constants.shell_depth)
        rows.append({
            "nx": nx,
            "nz": nz,
            "dof": p.dof,
            "dx_km": f"{p.dx / 1000.0:.6g}",
            "dt": f"{dt:.6g}",
            "omega2": f"{p.omega2:.6e}",
            "lambda2": f"{p.lambda2:.6e}",
            "beta_bottom": f"{anisotropy(p, grid, 0, constants):.6e}",
            "beta_middle": f"{anisotropy(p, grid, nz // 2, constants):.6e}",
            "beta_top": f"{anisotropy(p, grid, nz - 1, constants):.6e}",
        })
    return rows


ROBUSTNESS_MULTIPLIERS = [(1.0, 1.0), (1.0, 1e2), (1.0, 1e-2), (10.0, 1.0), (100.0, 1.0)]
ROBUSTNESS_SOLVERS = [("mg", "standard"), ("mg", "shallow"),
                      ("mg", "very_shallow"), ("cg", "standard")]


def run_table(which: str, output: str | None = None, *, nx: int = 256,
              nx_max: int | None = None, nz: int = 128, dt: float = 600.0,
              doublings: int | None = None, workers: int = 1, eps: float = 1e-5,
              maxiter: int | None = None, rho: float = 1.0, nu_pre: int = 1,
              nu_post: int = 1, seed: int = 0, flat: bool = False,
              deterministic: bool = False,
              memory_cap_bytes: int = DEFAULT_MEMORY_CAP,
              constants: PhysicalConstants = DEFAULT_CONSTANTS) -> list[dict]:
    """Produce one of the benchmark tables; returns the CSV rows.

    Solve tables share the experiment row schema; ``param_space`` has
    its own.  The memory cap is checked for every planned row before
    any solve starts, so an oversized table fails fast.
    """
    if which not in TABLES:
        raise SpecError(f"table must be one of {TABLES}")

    def make_spec(nx_i, dt_i, solver, policy, f_o=1.0, f_l=1.0):
        return ExperimentSpec(
            nx=nx_i, nz=nz, dt=dt_i, solver=solver, policy=policy,
            f_omega2=f_o, f_lambda2=f_l, workers=workers, eps=eps,
            maxiter=maxiter, rho=rho, nu_pre=nu_pre, nu_post=nu_post,
            seed=seed, flat=flat, deterministic=deterministic,
            memory_cap_bytes=memory_cap_bytes, constants=constants)

    if which == "param_space":
        nx_values = []
        n = nx
        while n <= max(nx_max or nx, nx):
            nx_values.append(n)
            n *= 2
        rows = param_space_rows(nx_values, nz, dt, nx, constants)
        if output:
            append_rows(output, rows, PARAM_SPACE_COLUMNS)
        return rows

    if which == "weak_scaling":
        if doublings is None:
            doublings = int(math.log2((nx_max or nx) // nx))
        base = derive_parameters(nx, nz, dt, constants)
        specs = [make_spec(p.nx, p.dt, "mg", "standard")
                 for p in weak_scaling_schedule(base, doublings, constants)]
    elif which == "levels":
        specs = [make_spec(nx, dt, "mg", policy)
                 for policy in ("standard", "shallow", "very_shallow")]
    else:
        specs = [make_spec(nx, dt, solver, policy, f_o, f_l)
                 for (f_o, f_l) in ROBUSTNESS_MULTIPLIERS
                 for (solver, policy) in ROBUSTNESS_SOLVERS]

    for s in specs:
        s.validate()
        check_memory(s)
    rows = []
    for s in specs:
        _, row = run_experiment(s)
        rows.append(row)
    if output:
        append_rows(output, rows, EXPERIMENT_COLUMNS)
    return rows
