"""Gnomonic cubed-sphere panel shell: mapping, graded levels, geometric factors.

One panel covers a sixth of the sphere.  Panel coordinates
``(xi1, xi2) in [-1, 1]^2`` are mapped to a point at radius ``r`` by the
central (gnomonic) projection of the cube face; equivalently

    x = r sin(theta),  y = r cos(theta) sin(phi),  z = r cos(theta) cos(phi)

with ``tan(phi) = xi2`` and ``tan(theta) = xi1 / sqrt(1 + xi2^2)``, which
reduces to ``(x, y, z) = r * (xi1, xi2, 1) / sqrt(1 + xi1^2 + xi2^2)``.

The vertical grid is graded so the spacing grows linearly with height:
``r_k = 1 + H (k/nz)^2``.

The finite-volume stencil needs, per cell, a volume, face areas and
distances between neighbouring cell centers.  Because the mapping is
linear in ``r``, every such factor splits exactly into a horizontal
2-d array times a 1-d vertical profile; :func:`build_factors` computes
this tensor-product form, which is what the solvers consume.  Cell
centers are placed at parameter-space midpoints, face areas use the
cross product of the two face diagonals (exact for planar faces,
second-order otherwise) and volumes use the parallelepiped spanned by
the three center-to-face chords.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .params import is_power_of_two

__all__ = [
    "map_to_sphere",
    "vertical_levels",
    "PanelGrid",
    "panel_grid",
    "GridFactors",
    "build_factors",
    "CellGeometry",
    "cell_geometry",
]


def map_to_sphere(xi1, xi2, r, depth: float | None = None):
    """Map panel coordinates and radius to Cartesian coordinates.

    Accepts scalars or broadcastable arrays.  The returned point lies at
    distance ``r`` from the origin up to rounding.

    Raises
    ------
    ValueError
        If ``|xi1| > 1``, ``|xi2| > 1``, ``r < 1``, or (when ``depth`` is
        given) ``r > 1 + depth``.
    """
    xi1 = np.asarray(xi1, dtype=float)
    xi2 = np.asarray(xi2, dtype=float)
    r = np.asarray(r, dtype=float)
    if np.any(np.abs(xi1) > 1.0) or np.any(np.abs(xi2) > 1.0):
        raise ValueError("panel coordinates must lie in [-1, 1]")
    if np.any(r < 1.0):
        raise ValueError("radius must be >= 1 (shell inner boundary)")
    if depth is not None and np.any(r > 1.0 + depth):
        raise ValueError("radius exceeds the shell outer boundary")
    inv = 1.0 / np.sqrt(1.0 + xi1 * xi1 + xi2 * xi2)
    return r * xi1 * inv, r * xi2 * inv, r * inv


def vertical_levels(nz: int, depth: float) -> np.ndarray:
    """Graded level radii ``r_k = 1 + depth*(k/nz)^2`` for k = 0..nz."""
    if nz < 1:
        raise ValueError("nz must be at least 1")
    k = np.arange(nz + 1, dtype=float)
    return 1.0 + depth * (k / nz) ** 2


def _unit_directions(xi1, xi2):
    """Unit radial direction of the gnomonic map, stacked on the last axis."""
    xi1, xi2 = np.broadcast_arrays(np.asarray(xi1, float), np.asarray(xi2, float))
    inv = 1.0 / np.sqrt(1.0 + xi1 * xi1 + xi2 * xi2)
    return np.stack((xi1 * inv, xi2 * inv, inv), axis=-1)


@dataclass(frozen=True)
class PanelGrid:
    """Grid on one panel shell: nx^2 columns of nz cells with graded radii.

    ``flat_mode`` replaces the gnomonic mapping by the identity on the
    box ``[-1,1]^2 x [1, 1+depth]`` so the discretisation can be checked
    against textbook Cartesian stencils.
    """

    nx: int
    nz: int
    depth: float
    levels: np.ndarray = field(repr=False)
    flat_mode: bool = False

    def __post_init__(self):
        if not (self.nx >= 1 and is_power_of_two(self.nx)):
            raise ValueError("nx must be a power of two >= 1")
        if self.nz < 1:
            raise ValueError("nz must be at least 1")
        lv = np.asarray(self.levels, dtype=float)
        if lv.shape != (self.nz + 1,):
            raise ValueError("levels must have length nz + 1")
        if np.any(np.diff(lv) <= 0.0):
            raise ValueError("levels must be strictly increasing")
        if lv[0] != 1.0 or lv[-1] != 1.0 + self.depth:
            raise ValueError("levels must run from 1 to 1 + depth exactly")
        object.__setattr__(self, "levels", lv)

    @property
    def dxi(self) -> float:
        return 2.0 / self.nx

    def xi_edges(self) -> np.ndarray:
        return -1.0 + self.dxi * np.arange(self.nx + 1)

    def xi_centers(self) -> np.ndarray:
        return -1.0 + self.dxi * (np.arange(self.nx) + 0.5)

    def coarsen(self) -> "PanelGrid":
        """Grid with half the horizontal resolution and the same columns."""
        if self.nx < 2:
            raise ValueError("cannot coarsen a single-column grid")
        return PanelGrid(self.nx // 2, self.nz, self.depth, self.levels, self.flat_mode)


def panel_grid(nx: int, nz: int, depth: float = 0.01, flat_mode: bool = False,
               levels: np.ndarray | None = None) -> PanelGrid:
    """Build a panel grid; ``levels`` defaults to the graded radii."""
    if levels is None:
        levels = vertical_levels(nz, depth)
    return PanelGrid(nx, nz, depth, np.asarray(levels, dtype=float), flat_mode)


@dataclass(frozen=True)
class GridFactors:
    """Tensor-product geometric factors of the 7-point flux stencil.

    Horizontal transmissibility of the face between cells (i-1,j) and
    (i,j) at vertical level k is ``wx[i,j] * dr[k]`` (boundary rows of
    ``wx``/``wy`` are zero, realising the no-flux condition).  The
    vertical transmissibility of the face between cells k-1 and k is
    ``av[i,j] * vprof[k]`` (before the lambda2 scaling applied by the
    operator; ``vprof[0] = vprof[nz] = 0``).  Cell volume is
    ``vh[i,j] * volprof[k]``.  ``sumw`` caches the sum of the (up to
    four) horizontal face weights around each column.
    """

    wx: np.ndarray        # (nx+1, nx)
    wy: np.ndarray        # (nx, nx+1)
    av: np.ndarray        # (nx, nx)
    vh: np.ndarray        # (nx, nx)
    sumw: np.ndarray      # (nx, nx)
    dr: np.ndarray        # (nz,)
    vprof: np.ndarray     # (nz+1,), zero at both ends
    volprof: np.ndarray   # (nz,)

    @property
    def nx(self) -> int:
        return self.av.shape[0]

    @property
    def nz(self) -> int:
        return self.dr.shape[0]

    def volumes(self) -> np.ndarray:
        """Full (nx, nx, nz) array of cell volumes."""
        return self.vh[:, :, None] * self.volprof[None, None, :]


def _cross_norm(a, b):
    c = np.cross(a, b)
    return np.sqrt(np.einsum("...i,...i->...", c, c))


def build_factors(grid: PanelGrid) -> GridFactors:
    nx, nz = grid.nx, grid.nz
    lv = grid.levels
    dr = np.diff(lv)
    rc = 0.5 * (lv[:-1] + lv[1:])

    vprof = np.zeros(nz + 1)
    volprof = np.empty(nz)
    if grid.flat_mode:
        if nz > 1:
            vprof[1:nz] = 2.0 / (lv[2:] - lv[:-2])
        volprof[:] = dr
    else:
        if nz > 1:
            vprof[1:nz] = 2.0 * lv[1:nz] ** 2 / (lv[2:] - lv[:-2])
        volprof[:] = rc ** 2 * dr

    if grid.flat_mode:
        dxi = grid.dxi
        wx = np.ones((nx + 1, nx))
        wx[0, :] = wx[nx, :] = 0.0
        wy = np.ones((nx, nx + 1))
        wy[:, 0] = wy[:, nx] = 0.0
        av = np.full((nx, nx), dxi * dxi)
        vh = np.full((nx, nx), dxi * dxi)
    else:
        xe = grid.xi_edges()
        xc = grid.xi_centers()
        corners = _unit_directions(xe[:, None], xe[None, :])      # (nx+1, nx+1, 3)
        centers = _unit_directions(xc[:, None], xc[None, :])      # (nx, nx, 3)
        edge_x = _unit_directions(xe[:, None], xc[None, :])       # (nx+1, nx, 3)
        edge_y = _unit_directions(xc[:, None], xe[None, :])       # (nx, nx+1, 3)

        # Faces normal to xi1: area chord |n_j x n_{j+1}|, distance chord
        # between the adjacent cell centers.  The radial parts (Dr for the
        # area-to-distance ratio) live in the vertical profiles.
        wx = np.zeros((nx + 1, nx))
        span = _cross_norm(corners[1:-1, :-1, :], corners[1:-1, 1:, :])
        dist = np.linalg.norm(centers[1:, :, :] - centers[:-1, :, :], axis=-1)
        wx[1:-1, :] = span / dist

        wy = np.zeros((nx, nx + 1))
        span = _cross_norm(corners[:-1, 1:-1, :], corners[1:, 1:-1, :])
        dist = np.linalg.norm(centers[:, 1:, :] - centers[:, :-1, :], axis=-1)
        wy[:, 1:-1] = span / dist

        # Bottom/top faces: half cross product of the two diagonals.
        d1 = corners[1:, 1:, :] - corners[:-1, :-1, :]
        d2 = corners[:-1, 1:, :] - corners[1:, :-1, :]
        av = 0.5 * _cross_norm(d1, d2)

        # Volume: parallelepiped of the three center-to-face chords.
        e1 = edge_x[1:, :, :] - edge_x[:-1, :, :]
        e2 = edge_y[:, 1:, :] - edge_y[:, :-1, :]
        vh = np.abs(np.einsum("ijk,ijk->ij", np.cross(e1, e2), centers))

    sumw = wx[:-1, :] + wx[1:, :] + wy[:, :-1] + wy[:, 1:]
    return GridFactors(wx=wx, wy=wy, av=av, vh=vh, sumw=sumw,
                       dr=dr, vprof=vprof, volprof=volprof)


@dataclass(frozen=True)
class CellGeometry:
    """Per-cell geometry: volume, face areas and center distances.

    Pairs are ordered (minus side, plus side) along each axis.  Center
    distances across physical boundary faces have no neighbour and are
    NaN; the matching boundary flag is set.
    """

    volume: float
    face_area_xi1: tuple[float, float]
    face_area_xi2: tuple[float, float]
    face_area_r: tuple[float, float]
    center_dist_xi1: tuple[float, float]
    center_dist_xi2: tuple[float, float]
    center_dist_r: tuple[float, float]
    boundary_xi1: tuple[bool, bool]
    boundary_xi2: tuple[bool, bool]
    boundary_r: tuple[bool, bool]


def cell_geometry(grid: PanelGrid, i: int, j: int, k: int) -> CellGeometry:
    """Geometry of cell (i, j, k), computed directly from mapped corners.

    This scalar path is independent of :func:`build_factors` (which the
    solvers use) and serves as its cross-check.
    """
    nx, nz = grid.nx, grid.nz
    if not (0 <= i < nx and 0 <= j < nx and 0 <= k < nz):
        raise ValueError("cell index out of range")
    lv = grid.levels
    xe, xc = grid.xi_edges(), grid.xi_centers()
    r0, r1 = lv[k], lv[k + 1]
    rc = 0.5 * (r0 + r1)

    if grid.flat_mode:
        def point(a, b, r):
            return np.array([a, b, r])
    else:
        def point(a, b, r):
            return np.array(map_to_sphere(a, b, r, depth=grid.depth))

    def quad_area(p00, p10, p01, p11):
        d1 = p11 - p00
        d2 = p01 - p10
        return 0.5 * float(np.linalg.norm(np.cross(d1, d2)))

    # Faces normal to xi1 (minus at edge i, plus at edge i+1).
    fa1 = []
    for a in (xe[i], xe[i + 1]):
        fa1.append(quad_area(point(a, xe[j], r0), point(a, xe[j + 1], r0),
                             point(a, xe[j], r1), point(a, xe[j + 1], r1)))
    fa2 = []
    for b in (xe[j], xe[j + 1]):
        fa2.append(quad_area(point(xe[i], b, r0), point(xe[i + 1], b, r0),
                             point(xe[i], b, r1), point(xe[i + 1], b, r1)))
    far = []
    for r in (r0, r1):
        far.append(quad_area(point(xe[i], xe[j], r), point(xe[i + 1], xe[j], r),
                             point(xe[i], xe[j + 1], r), point(xe[i + 1], xe[j + 1], r)))

    center = point(xc[i], xc[j], rc)

    def dist_to(ii, jj, kk):
        rr = 0.5 * (lv[kk] + lv[kk + 1])
        return float(np.linalg.norm(point(xc[ii], xc[jj], rr) - center))

    nan = math.nan
    cd1 = (dist_to(i - 1, j, k) if i > 0 else nan,
           dist_to(i + 1, j, k) if i < nx - 1 else nan)
    cd2 = (dist_to(i, j - 1, k) if j > 0 else nan,
           dist_to(i, j + 1, k) if j < nx - 1 else nan)
    cdr = (dist_to(i, j, k - 1) if k > 0 else nan,
           dist_to(i, j, k + 1) if k < nz - 1 else nan)

    e1 = point(xe[i + 1], xc[j], rc) - point(xe[i], xc[j], rc)
    e2 = point(xc[i], xe[j + 1], rc) - point(xc[i], xe[j], rc)
    e3 = point(xc[i], xc[j], r1) - point(xc[i], xc[j], r0)
    volume = float(abs(np.dot(np.cross(e1, e2), e3)))

    return CellGeometry(
        volume=volume,
        face_area_xi1=tuple(fa1), face_area_xi2=tuple(fa2), face_area_r=tuple(far),
        center_dist_xi1=cd1, center_dist_xi2=cd2, center_dist_r=cdr,
        boundary_xi1=(i == 0, i == nx - 1),
        boundary_xi2=(j == 0, j == nx - 1),
        boundary_r=(k == 0, k == nz - 1),
    )
