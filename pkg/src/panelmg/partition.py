"""Horizontal 2-d domain decomposition with halo exchange and worker folding.

The panel is tiled by ``P = 4^p`` equal square subdomains, one per
worker, so vertical columns are never split.  Workers are simulated
in-process: every parallel phase is a loop over per-worker arrays
separated by the same barriers (halo exchanges, collects) a distributed
implementation would use, so the communication pattern -- not the
hardware -- is what gets exercised and counted.

On coarse multigrid levels with fewer columns than workers, data is
folded onto a quarter of the workers per level: ``collect`` gathers the
four children of each 2x2 worker group onto its lowest-indexed member,
``distribute`` is the exact inverse.

Halo exchange runs in two phases (first direction, then the other over
the full extended range) so corner halo cells pick up diagonal-neighbour
data transitively.  Physical-boundary halos mirror the adjacent owned
value, which realises the zero-flux boundary for interpolation.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.linalg import blas

from .field import Field

__all__ = [
    "Decomposition",
    "LevelLayout",
    "DistField",
    "decompose",
    "halo_exchange",
    "collect",
    "distribute",
    "gather_owned",
    "scatter_owned",
    "dist_dot",
    "dist_norm",
]


class Decomposition:
    """Static description of the finest-level worker tiling."""

    def __init__(self, nx: int, workers: int = 1):
        pside = math.isqrt(workers)
        if pside * pside != workers or workers < 1 or (pside & (pside - 1)):
            raise ValueError(f"worker count must be 4^p (got {workers})")
        if nx % pside != 0:
            raise ValueError(f"nx={nx} not divisible by sqrt(workers)={pside}")
        self.nx = nx
        self.workers = workers
        self.pside = pside
        self.collect_calls = 0
        self.distribute_calls = 0

    def layout(self, nx_level: int, pside: int | None = None) -> "LevelLayout":
        """Layout for a level with ``nx_level`` columns per direction.

        By default as many workers stay active as the level can feed
        with at least one column each.
        """
        if pside is None:
            pside = min(self.pside, nx_level)
        return LevelLayout(self, nx_level, pside)


def decompose(nx: int, workers: int) -> Decomposition:
    """Validate and build the worker tiling of an nx x nx panel."""
    return Decomposition(nx, workers)


class LevelLayout:
    """Active workers and owned rectangles of one grid level."""

    def __init__(self, decomp: Decomposition, nx: int, pside: int):
        if pside < 1 or (pside & (pside - 1)):
            raise ValueError("active side must be a power of two")
        if pside > decomp.pside:
            raise ValueError("cannot activate more workers than exist")
        if nx % pside != 0:
            raise ValueError(f"nx={nx} not divisible by active side {pside}")
        self.decomp = decomp
        self.nx = nx
        self.pside = pside
        self.mloc = nx // pside
        self.group = decomp.pside // pside
        self.workers = [
            (wi * self.group) * decomp.pside + (wj * self.group)
            for wi in range(pside)
            for wj in range(pside)
        ]
        self.halo_count = 0

    def coords(self, worker: int) -> tuple[int, int]:
        """Active-grid coordinates (ai, aj) of a worker id."""
        wi, wj = divmod(worker, self.decomp.pside)
        if wi % self.group or wj % self.group:
            raise ValueError(f"worker {worker} not active on this layout")
        return wi // self.group, wj // self.group

    def worker_at(self, ai: int, aj: int) -> int:
        return (ai * self.group) * self.decomp.pside + (aj * self.group)

    def origin(self, worker: int) -> tuple[int, int]:
        """Global (i, j) of the first owned column."""
        ai, aj = self.coords(worker)
        return ai * self.mloc, aj * self.mloc

    def neighbor(self, worker: int, di: int, dj: int) -> int | None:
        ai, aj = self.coords(worker)
        ni, nj = ai + di, aj + dj
        if 0 <= ni < self.pside and 0 <= nj < self.pside:
            return self.worker_at(ni, nj)
        return None


class DistField:
    """A field split over the active workers of one layout."""

    __slots__ = ("layout", "parts")

    def __init__(self, layout: LevelLayout, parts: dict[int, Field]):
        self.layout = layout
        self.parts = parts

    @classmethod
    def zeros(cls, layout: LevelLayout, nz: int) -> "DistField":
        return cls(layout, {w: Field.zeros(layout.mloc, nz) for w in layout.workers})

    @property
    def nz(self) -> int:
        return next(iter(self.parts.values())).nz

    def copy(self) -> "DistField":
        return DistField(self.layout, {w: f.copy() for w, f in self.parts.items()})

    def fill(self, value: float) -> None:
        for f in self.parts.values():
            f.fill(value)

    def add_scaled(self, alpha: float, other: "DistField") -> None:
        """self += alpha * other over the full arrays (halo included)."""
        for w, f in self.parts.items():
            blas.daxpy(other.parts[w].data.ravel(), f.data.ravel(), a=alpha)

    def scale_plus(self, beta: float, other: "DistField") -> None:
        """self = other + beta * self over the full arrays."""
        for w, f in self.parts.items():
            y = f.data.ravel()
            blas.dscal(beta, y)
            blas.daxpy(other.parts[w].data.ravel(), y, a=1.0)


def halo_exchange(df: DistField) -> None:
    """Refresh all halo cells from neighbouring owned data (or mirrors).

    Two phases: the i-direction strips first, then the j-direction
    strips over the full extended range, which fills corners with
    diagonal-neighbour values.  Counted once per call on the layout.
    """
    lay = df.layout
    m = lay.mloc
    for w, f in df.parts.items():
        d = f.data
        left = lay.neighbor(w, -1, 0)
        if left is None:
            d[0, 1:-1, :] = d[1, 1:-1, :]
        else:
            d[0, 1:-1, :] = df.parts[left].data[m, 1:-1, :]
        right = lay.neighbor(w, 1, 0)
        if right is None:
            d[m + 1, 1:-1, :] = d[m, 1:-1, :]
        else:
            d[m + 1, 1:-1, :] = df.parts[right].data[1, 1:-1, :]
    for w, f in df.parts.items():
        d = f.data
        down = lay.neighbor(w, 0, -1)
        if down is None:
            d[:, 0, :] = d[:, 1, :]
        else:
            d[:, 0, :] = df.parts[down].data[:, m, :]
        up = lay.neighbor(w, 0, 1)
        if up is None:
            d[:, m + 1, :] = d[:, m, :]
        else:
            d[:, m + 1, :] = df.parts[up].data[:, 1, :]
    lay.halo_count += 1


def collect(df: DistField, to_layout: LevelLayout) -> DistField:
    """Fold each 2x2 group of subdomains onto its lowest-indexed worker.

    Owned data is moved; the halos of the folded field are left zero
    (consumers either exchange or only read owned cells).
    """
    lay = df.layout
    if to_layout.nx != lay.nx or to_layout.pside * 2 != lay.pside:
        raise ValueError("collect target must halve the active side at the same nx")
    m = lay.mloc
    nz = df.nz
    parts: dict[int, Field] = {}
    for pw in to_layout.workers:
        ai, aj = to_layout.coords(pw)
        big = Field.zeros(2 * m, nz)
        for di in range(2):
            for dj in range(2):
                child = lay.worker_at(2 * ai + di, 2 * aj + dj)
                big.data[1 + di * m:1 + (di + 1) * m,
                         1 + dj * m:1 + (dj + 1) * m, :] = df.parts[child].owned
        parts[pw] = big
    lay.decomp.collect_calls += 1
    return DistField(to_layout, parts)


def distribute(df: DistField, to_layout: LevelLayout,
               out: DistField | None = None) -> DistField:
    """Inverse of :func:`collect`: hand each quadrant back to its worker.

    Every child receives its owned block plus the surrounding one-cell
    ring from the parent array, so halos toward the interior of the
    parent are already consistent.
    """
    lay = df.layout
    if to_layout.nx != lay.nx or to_layout.pside != lay.pside * 2:
        raise ValueError("distribute target must double the active side at the same nx")
    m = to_layout.mloc
    if out is None:
        out = DistField.zeros(to_layout, df.nz)
    for cw in to_layout.workers:
        ai, aj = to_layout.coords(cw)
        parent = df.parts[lay.worker_at(ai // 2, aj // 2)]
        di, dj = ai % 2, aj % 2
        out.parts[cw].data[...] = parent.data[di * m:di * m + m + 2,
                                              dj * m:dj * m + m + 2, :]
    lay.decomp.distribute_calls += 1
    return out


def gather_owned(df: DistField) -> np.ndarray:
    """Assemble the global (nx, nx, nz) array of owned values."""
    lay = df.layout
    out = np.empty((lay.nx, lay.nx, df.nz))
    m = lay.mloc
    for w, f in df.parts.items():
        i0, j0 = lay.origin(w)
        out[i0:i0 + m, j0:j0 + m, :] = f.owned
    return out


def scatter_owned(arr: np.ndarray, layout: LevelLayout) -> DistField:
    """Split a global array over the layout; halos start at zero."""
    nx = layout.nx
    if arr.shape[0] != nx or arr.shape[1] != nx:
        raise ValueError("array does not match the layout size")
    df = DistField.zeros(layout, arr.shape[2])
    m = layout.mloc
    for w, f in df.parts.items():
        i0, j0 = layout.origin(w)
        f.owned[...] = arr[i0:i0 + m, j0:j0 + m, :]
    return df


def dist_dot(a: DistField, b: DistField, deterministic: bool = False) -> float:
    """Global inner product over owned cells.

    In deterministic mode the owned data is assembled in global layout
    order first, so the reduction order (and hence the result, bit for
    bit) is independent of the worker count.
    """
    if deterministic:
        ga = gather_owned(a)
        gb = ga if b is a else gather_owned(b)
        return float(np.dot(ga.ravel(), gb.ravel()))
    total = 0.0
    for w in a.layout.workers:
        total += float(np.einsum("ijk,ijk->", a.parts[w].owned, b.parts[w].owned))
    return total


def dist_norm(a: DistField, deterministic: bool = False) -> float:
    """Discrete L2 norm over owned cells."""
    return math.sqrt(dist_dot(a, a, deterministic=deterministic))
