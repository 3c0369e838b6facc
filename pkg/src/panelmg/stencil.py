"""Matrix-free application of the discretised shell Helmholtz operator.

The finite-volume operator acting on a field u is, per cell c,

    (A u)_c = V_c u_c + omega2 * [ sum_horiz T_f (u_c - u_nbr)
                                   + lambda2 * sum_vert T_f (u_c - u_nbr) ]

with transmissibilities ``T_f = face_area / center_distance`` and zero
flux through physical boundary faces (homogeneous Neumann).  Keeping the
volume scaling on the left makes A symmetric positive definite by
construction, which both CG and the energy-norm arguments for the
smoother require.

The stencil never touches more than the six face neighbours.  No matrix
is stored on the solve path: the per-cell coefficients come from the
tensor-product factors of :mod:`panelmg.geometry` (2-d horizontal arrays
times 1-d vertical profiles), and only O(field)-sized caches (the
diagonal and the per-column tridiagonal prefactorisation) are kept per
level.  :func:`assemble_matrix` builds the same operator as an explicit
sparse matrix, strictly as a testing oracle and capped in size.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .field import Field
from .geometry import GridFactors, PanelGrid, build_factors
from .params import ModelParameters
from .partition import Decomposition, DistField, LevelLayout

__all__ = [
    "VerticalBlock",
    "PanelOperator",
    "apply_operator",
    "compute_residual",
    "assemble_matrix",
    "vertical_blocks",
]

ORACLE_CELL_CAP = 100_000


@dataclass(frozen=True)
class VerticalBlock:
    """Tridiagonal restriction of the operator to one vertical column.

    ``sub[k]`` couples cell k to k-1 (``sub[0] = 0``) and ``sup[k]`` to
    k+1 (``sup[nz-1] = 0``); symmetry gives ``sup[k] = sub[k+1]``.  The
    diagonal carries the full operator diagonal, horizontal
    transmissibilities included, so the block is strictly dominant.
    """

    sub: np.ndarray
    diag: np.ndarray
    sup: np.ndarray


class _WorkerSlices:
    """Per-worker windows into the global factor arrays plus scratch."""

    __slots__ = ("wxm", "wxp", "wym", "wyp", "av", "vh", "diag3", "vband",
                 "acc", "tmp")

    def __init__(self, op: "PanelOperator", i0: int, j0: int, m: int):
        f = op.factors
        self.wxm = f.wx[i0:i0 + m, j0:j0 + m][:, :, None]
        self.wxp = f.wx[i0 + 1:i0 + m + 1, j0:j0 + m][:, :, None]
        self.wym = f.wy[i0:i0 + m, j0:j0 + m][:, :, None]
        self.wyp = f.wy[i0:i0 + m, j0 + 1:j0 + m + 1][:, :, None]
        self.av = f.av[i0:i0 + m, j0:j0 + m]
        self.vh = f.vh[i0:i0 + m, j0:j0 + m]
        self.diag3 = op.diag3[i0:i0 + m, j0:j0 + m, :]
        # Interior vertical transmissibilities of each column, cached so
        # the operator application allocates nothing per call.
        nz = f.nz
        if nz > 1:
            self.vband = op.vcoef * self.av[:, :, None] * f.vprof[None, None, 1:nz]
        else:
            self.vband = None
        self.acc = np.empty((m, m, nz))
        self.tmp = np.empty((m, m, nz))


class PanelOperator:
    """The model operator bound to one grid level and one worker layout."""

    def __init__(self, grid: PanelGrid, params: ModelParameters,
                 layout: LevelLayout | None = None,
                 factors: GridFactors | None = None):
        if layout is None:
            layout = Decomposition(grid.nx, 1).layout(grid.nx)
        if layout.nx != grid.nx:
            raise ValueError("layout does not match the grid size")
        self.grid = grid
        self.params = params
        self.layout = layout
        self.factors = factors if factors is not None else build_factors(grid)
        self.omega2 = params.omega2
        self.vcoef = params.omega2 * params.lambda2

        f = self.factors
        self.diag3 = (
            f.vh[:, :, None] * f.volprof[None, None, :]
            + self.omega2 * f.sumw[:, :, None] * f.dr[None, None, :]
            + self.vcoef * f.av[:, :, None] * (f.vprof[:-1] + f.vprof[1:])[None, None, :]
        )
        self._drw = self.omega2 * f.dr[None, None, :]
        self._ws = {}
        for w in layout.workers:
            i0, j0 = layout.origin(w)
            self._ws[w] = _WorkerSlices(self, i0, j0, layout.mloc)

    @property
    def nz(self) -> int:
        return self.grid.nz

    def _check(self, u: DistField) -> None:
        if u.layout is not self.layout and (
                u.layout.nx != self.layout.nx or u.layout.pside != self.layout.pside):
            raise ValueError("field layout does not match the operator layout")
        if u.nz != self.grid.nz:
            raise ValueError("field vertical size does not match the grid")

    def apply(self, u: DistField, out: DistField | None = None) -> DistField:
        """Matrix-free v = A u over owned cells (u halos must be current)."""
        self._check(u)
        if out is None:
            out = DistField.zeros(self.layout, self.nz)
        drw = self._drw
        nz = self.nz
        for w, uf in u.parts.items():
            sl = self._ws[w]
            d = uf.data
            uo = uf.owned
            res = out.parts[w].owned
            acc, tmp = sl.acc, sl.tmp
            np.multiply(sl.wxm, d[0:-2, 1:-1, :], out=acc)
            np.multiply(sl.wxp, d[2:, 1:-1, :], out=tmp)
            acc += tmp
            np.multiply(sl.wym, d[1:-1, 0:-2, :], out=tmp)
            acc += tmp
            np.multiply(sl.wyp, d[1:-1, 2:, :], out=tmp)
            acc += tmp
            acc *= drw
            np.multiply(sl.diag3, uo, out=res)
            res -= acc
            if nz > 1:
                band = sl.vband
                t = tmp[:, :, :nz - 1]
                np.multiply(band, uo[:, :, :-1], out=t)
                res[:, :, 1:] -= t
                np.multiply(band, uo[:, :, 1:], out=t)
                res[:, :, :-1] -= t
        return out

    def residual(self, f: DistField, u: DistField,
                 out: DistField | None = None) -> DistField:
        """r = f - A u over owned cells."""
        out = self.apply(u, out)
        for w, rf in out.parts.items():
            np.subtract(f.parts[w].owned, rf.owned, out=rf.owned)
        return out

    def column_block(self, i: int, j: int) -> VerticalBlock:
        """Tridiagonal block of column (i, j) in global indices."""
        nx, nz = self.grid.nx, self.grid.nz
        if not (0 <= i < nx and 0 <= j < nx):
            raise ValueError("column index out of range")
        f = self.factors
        diag = self.diag3[i, j, :].copy()
        sub = np.zeros(nz)
        sup = np.zeros(nz)
        if nz > 1:
            coup = -self.vcoef * f.av[i, j] * f.vprof[1:nz]
            sub[1:] = coup
            sup[:-1] = coup
        return VerticalBlock(sub=sub, diag=diag, sup=sup)

    def assemble(self):
        """Explicit sparse matrix equal to the matrix-free operator.

        Testing oracle only; refuses grids above ``ORACLE_CELL_CAP``
        cells.  Unknowns are numbered nz*(nx*i + j) + k over owned cells.
        """
        import scipy.sparse as sp

        nx, nz = self.grid.nx, self.grid.nz
        n = nx * nx * nz
        if n > ORACLE_CELL_CAP:
            raise ValueError(
                f"assembled-matrix oracle capped at {ORACLE_CELL_CAP} cells, got {n}")
        f = self.factors

        def cid(i, j, k):
            return nz * (nx * i + j) + k

        rows = [np.arange(n)]
        cols = [np.arange(n)]
        vals = [self.diag3.ravel().copy()]

        def add_faces(r_idx, c_idx, v):
            rows.append(r_idx.ravel())
            cols.append(c_idx.ravel())
            vals.append(v.ravel())
            rows.append(c_idx.ravel())
            cols.append(r_idx.ravel())
            vals.append(v.ravel())

        kk = np.arange(nz)
        if nx > 1:
            ii, jj = np.meshgrid(np.arange(1, nx), np.arange(nx), indexing="ij")
            v = -self.omega2 * f.wx[1:nx, :, None] * f.dr[None, None, :]
            add_faces(cid(ii[:, :, None] - 1, jj[:, :, None], kk),
                      cid(ii[:, :, None], jj[:, :, None], kk), v)
            ii, jj = np.meshgrid(np.arange(nx), np.arange(1, nx), indexing="ij")
            v = -self.omega2 * f.wy[:, 1:nx, None] * f.dr[None, None, :]
            add_faces(cid(ii[:, :, None], jj[:, :, None] - 1, kk),
                      cid(ii[:, :, None], jj[:, :, None], kk), v)
        if nz > 1:
            ii, jj = np.meshgrid(np.arange(nx), np.arange(nx), indexing="ij")
            kf = np.arange(1, nz)
            v = -self.vcoef * f.av[:, :, None] * f.vprof[None, None, 1:nz]
            add_faces(cid(ii[:, :, None], jj[:, :, None], kf - 1),
                      cid(ii[:, :, None], jj[:, :, None], kf), v)

        mat = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(n, n))
        return mat.tocsr()


def _wrap_single(u: Field, grid: PanelGrid) -> DistField:
    if u.m != grid.nx or u.nz != grid.nz:
        raise ValueError(
            f"field {u.m}x{u.m}x{u.nz} does not match grid {grid.nx}x{grid.nx}x{grid.nz}")
    layout = Decomposition(grid.nx, 1).layout(grid.nx)
    return DistField(layout, {layout.workers[0]: u})


def apply_operator(u: Field, grid: PanelGrid, params: ModelParameters) -> Field:
    """Single-field convenience wrapper around :meth:`PanelOperator.apply`."""
    du = _wrap_single(u, grid)
    op = PanelOperator(grid, params, du.layout)
    return op.apply(du).parts[du.layout.workers[0]]


def compute_residual(f: Field, u: Field, grid: PanelGrid,
                     params: ModelParameters) -> Field:
    """Single-field convenience wrapper: r = f - A u."""
    du = _wrap_single(u, grid)
    df = _wrap_single(f, grid)
    op = PanelOperator(grid, params, du.layout)
    return op.residual(df, du).parts[du.layout.workers[0]]


def assemble_matrix(grid: PanelGrid, params: ModelParameters):
    """Sparse symmetric oracle matrix for small grids."""
    return PanelOperator(grid, params).assemble()


def vertical_blocks(grid: PanelGrid, params: ModelParameters):
    """Factory mapping a column (i, j) to its :class:`VerticalBlock`."""
    op = PanelOperator(grid, params)
    return op.column_block
