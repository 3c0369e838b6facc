"""Matrix-free solvers for the anisotropic shell Helmholtz problem on one
gnomonic cubed-sphere panel: tensor-product geometric multigrid (horizontal
semi-coarsening with vertical line relaxation) and SSOR-preconditioned CG,
plus a benchmark harness reproducing the iteration-count tables at desk scale.
"""

from .params import (PhysicalConstants, ModelParameters, derive_parameters,
                     weak_scaling_schedule, anisotropy, horizontal_coupling)
from .geometry import (PanelGrid, panel_grid, map_to_sphere, vertical_levels,
                       build_factors, cell_geometry, CellGeometry)
from .field import Field
from .tridiag import TridiagonalSystem, ZeroPivotError, thomas_solve
from .partition import (Decomposition, DistField, decompose, halo_exchange,
                        collect, distribute, gather_owned, scatter_owned,
                        dist_dot, dist_norm)
from .stencil import (PanelOperator, VerticalBlock, apply_operator,
                      compute_residual, assemble_matrix, vertical_blocks)
from .smoother import (SmootherConfig, LineSmoother, smooth,
                       apply_ssor_preconditioner)
from .multigrid import (MGConfig, LevelHierarchy, build_hierarchy, restrict,
                        prolong, v_cycle, mg_solve)
from .krylov import (SolveReport, BreakdownError, IdentityPreconditioner,
                     SSORPreconditioner, pcg_solve)
from .bench import (ExperimentSpec, SpecError, MemoryCapError,
                    manufactured_rhs, run_experiment, run_table)

__version__ = "0.1.0"

__all__ = [
    "PhysicalConstants", "ModelParameters", "derive_parameters",
    "weak_scaling_schedule", "anisotropy", "horizontal_coupling",
    "PanelGrid", "panel_grid", "map_to_sphere", "vertical_levels",
    "build_factors", "cell_geometry", "CellGeometry",
    "Field",
    "TridiagonalSystem", "ZeroPivotError", "thomas_solve",
    "Decomposition", "DistField", "decompose", "halo_exchange", "collect",
    "distribute", "gather_owned", "scatter_owned", "dist_dot", "dist_norm",
    "PanelOperator", "VerticalBlock", "apply_operator", "compute_residual",
    "assemble_matrix", "vertical_blocks",
    "SmootherConfig", "LineSmoother", "smooth", "apply_ssor_preconditioner",
    "MGConfig", "LevelHierarchy", "build_hierarchy", "restrict", "prolong",
    "v_cycle", "mg_solve",
    "SolveReport", "BreakdownError", "IdentityPreconditioner",
    "SSORPreconditioner", "pcg_solve",
    "ExperimentSpec", "SpecError", "MemoryCapError", "manufactured_rhs",
    "run_experiment", "run_table",
    "__version__",
]
