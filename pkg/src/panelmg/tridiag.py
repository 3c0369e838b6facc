"""Thomas algorithm for tridiagonal systems.

This is the kernel of vertical line relaxation: every column update
solves one symmetric, diagonally dominant tridiagonal system.  No
pivoting is performed (dominance is guaranteed by the stencil); a
vanishing pivot therefore signals a bug upstream and raises.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["TridiagonalSystem", "ZeroPivotError", "thomas_solve"]

PIVOT_FLOOR = 1e-300


class ZeroPivotError(ArithmeticError):
    """Elimination hit a (near-)zero pivot: the system is not dominant."""


@dataclass
class TridiagonalSystem:
    """System T u = f with diagonal ``a`` (n), superdiagonal ``b`` (n-1),
    subdiagonal ``c`` (n-1) and right-hand side ``f`` (n)."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    f: np.ndarray

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        self.c = np.asarray(self.c, dtype=float)
        self.f = np.asarray(self.f, dtype=float)
        n = self.a.shape[0]
        if n < 1:
            raise ValueError("system must have at least one unknown")
        if self.b.shape != (max(n - 1, 0),) or self.c.shape != (max(n - 1, 0),):
            raise ValueError("off-diagonals must have length n - 1")
        if self.f.shape != (n,):
            raise ValueError("right-hand side must have length n")

    @property
    def n(self) -> int:
        return self.a.shape[0]

    def matvec(self, u: np.ndarray) -> np.ndarray:
        v = self.a * u
        if self.n > 1:
            v[:-1] += self.b * u[1:]
            v[1:] += self.c * u[:-1]
        return v


def thomas_solve(sys: TridiagonalSystem, work: np.ndarray | None = None) -> np.ndarray:
    """Solve a tridiagonal system by forward elimination and backsubstitution.

    ``work`` may supply a reusable (2, n) scratch array for the modified
    coefficients, avoiding a per-column allocation when solving many
    columns in a row.  Inputs are not modified.

    Raises
    ------
    ZeroPivotError
        If an eliminated pivot falls below ``PIVOT_FLOOR`` in magnitude.
    """
    n = sys.n
    if work is None:
        work = np.empty((2, n))
    elif work.shape[0] < 2 or work.shape[1] < n:
        raise ValueError("workspace must have shape at least (2, n)")
    bprime = work[0]
    fprime = work[1]

    piv = sys.a[0]
    if abs(piv) < PIVOT_FLOOR:
        raise ZeroPivotError("zero pivot at row 0")
    if n == 1:
        return np.array([sys.f[0] / piv])

    bprime[0] = sys.b[0] / piv
    fprime[0] = sys.f[0] / piv
    for i in range(1, n):
        piv = sys.a[i] - bprime[i - 1] * sys.c[i - 1]
        if abs(piv) < PIVOT_FLOOR:
            raise ZeroPivotError(f"zero pivot at row {i}")
        inv = 1.0 / piv
        if i < n - 1:
            bprime[i] = sys.b[i] * inv
        fprime[i] = (sys.f[i] - fprime[i - 1] * sys.c[i - 1]) * inv

    u = np.empty(n)
    u[n - 1] = fprime[n - 1]
    for i in range(n - 2, -1, -1):
        u[i] = fprime[i] - bprime[i] * u[i + 1]
    return u
