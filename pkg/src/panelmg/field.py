"""Scalar fields on a (sub)grid with a one-cell horizontal halo.

A field stores a square block of ``m x m`` owned columns of ``nz`` cells
plus a one-cell halo ring, flattened vertically-fastest:

    value(i, j, k) = data.ravel()[nz * ((m + 2) * i + j) + k]

with ``i, j in 0..m+1`` (0 and m+1 are halo) and ``k in 0..nz-1``.  The
vertical direction carries no halo; vertical columns are contiguous in
memory so the line solves of the smoother stream through cache.

Fields can be saved to a small binary container: the magic bytes
``ANMG``, four little-endian uint32 (rows, cols, nz, flags) and the
float64 payload in layout order.  Flag bit 0 marks that the stored
array includes the halo ring.
"""

from __future__ import annotations

import numpy as np

__all__ = ["Field", "MAGIC"]

MAGIC = b"ANMG"
_FLAG_HAS_HALO = 1


class Field:
    """A square subdomain of vertical columns with a one-cell halo."""

    __slots__ = ("data",)

    def __init__(self, data: np.ndarray):
        data = np.asarray(data)
        if data.ndim != 3 or data.shape[0] != data.shape[1] or data.shape[0] < 3:
            raise ValueError("field data must have shape (m+2, m+2, nz) with m >= 1")
        if data.dtype != np.float64:
            data = data.astype(np.float64)
        if not data.flags.c_contiguous:
            data = np.ascontiguousarray(data)
        self.data = data

    @classmethod
    def zeros(cls, m: int, nz: int) -> "Field":
        return cls(np.zeros((m + 2, m + 2, nz)))

    @classmethod
    def from_owned(cls, owned: np.ndarray) -> "Field":
        """Wrap an (m, m, nz) array of owned values; halo starts at zero."""
        owned = np.asarray(owned, dtype=np.float64)
        m, m2, nz = owned.shape
        if m != m2:
            raise ValueError("owned block must be square")
        f = cls.zeros(m, nz)
        f.owned[...] = owned
        return f

    @property
    def owned(self) -> np.ndarray:
        return self.data[1:-1, 1:-1, :]

    @property
    def m(self) -> int:
        return self.data.shape[0] - 2

    @property
    def nz(self) -> int:
        return self.data.shape[2]

    def copy(self) -> "Field":
        return Field(self.data.copy())

    def fill(self, value: float) -> None:
        self.data.fill(value)

    def flat_index(self, i: int, j: int, k: int) -> int:
        """Position of (i, j, k) in the flattened layout (halo indices included)."""
        rows = self.data.shape[0]
        return self.nz * (rows * i + j) + k

    def dump(self, path, include_halo: bool = True) -> None:
        """Write the field to the binary container format."""
        arr = self.data if include_halo else np.ascontiguousarray(self.owned)
        flags = _FLAG_HAS_HALO if include_halo else 0
        header = np.array([arr.shape[0], arr.shape[1], arr.shape[2], flags],
                          dtype="<u4")
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(header.tobytes())
            fh.write(arr.astype("<f8").tobytes())

    @classmethod
    def load(cls, path) -> "Field":
        with open(path, "rb") as fh:
            magic = fh.read(4)
            if magic != MAGIC:
                raise ValueError(f"not a field dump (bad magic {magic!r})")
            header = np.frombuffer(fh.read(16), dtype="<u4")
            rows, cols, nz, flags = (int(x) for x in header)
            if rows != cols:
                raise ValueError("field dump must be square in the horizontal")
            payload = np.frombuffer(fh.read(rows * cols * nz * 8), dtype="<f8")
            if payload.size != rows * cols * nz:
                raise ValueError("truncated field dump")
            arr = payload.reshape(rows, cols, nz).astype(np.float64)
        if flags & _FLAG_HAS_HALO:
            return cls(arr)
        return cls.from_owned(arr)
