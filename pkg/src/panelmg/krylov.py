"""Preconditioned Conjugate Gradient, the one-level comparison solver.

Per iteration: one operator application, one preconditioner application,
two vector updates plus the search-direction update, and three global
inner products.  The residual is updated recursively
(``r <- r - alpha q`` with ``alpha = <r,z>/<p,q>``); a final
true-residual evaluation guards against accumulated drift.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

from .partition import DistField, dist_dot, dist_norm, halo_exchange
from .smoother import LineSmoother
from .stencil import PanelOperator

__all__ = [
    "SolveReport",
    "BreakdownError",
    "IdentityPreconditioner",
    "SSORPreconditioner",
    "pcg_solve",
]


class BreakdownError(ArithmeticError):
    """A CG inner product lost positivity: operator or preconditioner not SPD."""


@dataclass
class SolveReport:
    """Outcome of one iterative solve.

    ``residual_history[0]`` is the initial residual norm, one entry is
    appended per iteration, so its length is ``iterations + 1``.
    """

    iterations: int
    residual_history: list[float]
    converged: bool
    wall_time: float
    config_echo: dict = field(default_factory=dict)
    residual_drift: float = 0.0

    @property
    def final_relative_residual(self) -> float:
        h = self.residual_history
        return h[-1] / h[0] if h and h[0] > 0.0 else 0.0

    def reduction_rate(self) -> float:
        """Geometric-mean residual reduction per iteration."""
        h = self.residual_history
        if self.iterations == 0 or h[0] == 0.0:
            return 0.0
        return (h[-1] / h[0]) ** (1.0 / self.iterations)


class IdentityPreconditioner:
    """z = r (with a halo refresh so search directions stay consistent)."""

    def apply(self, r: DistField) -> DistField:
        z = r.copy()
        halo_exchange(z)
        return z


class SSORPreconditioner:
    """Symmetric red-black block SSOR line relaxation, z = M^{-1} r."""

    def __init__(self, smoother: LineSmoother, rho: float = 1.0):
        if not 0.0 < rho < 2.0:
            raise ValueError("overrelaxation weight must lie in (0, 2)")
        self.smoother = smoother
        self.rho = rho
        self._z: DistField | None = None

    def apply(self, r: DistField) -> DistField:
        # The result buffer is reused across applications; callers that
        # keep z across iterations must copy it (PCG does not need to).
        if self._z is None:
            self._z = DistField.zeros(self.smoother.op.layout, self.smoother.op.nz)
        return self.smoother.ssor_apply(r, self.rho, out=self._z)


def pcg_solve(
    f: DistField,
    op: PanelOperator,
    preconditioner=None,
    eps: float = 1e-5,
    maxiter: int = 500,
    tau: float = 1e-300,
    deterministic: bool = False,
    callback=None,
) -> tuple[DistField, SolveReport]:
    """Solve A u = f from a zero start until ||r|| / ||r0|| < eps.

    ``tau`` is an absolute residual tolerance (effectively disabled by
    default).  ``callback(k, u, r, z)`` is invoked after each
    preconditioner application, mainly for diagnostics in tests.

    Raises
    ------
    BreakdownError
        If <p, A p> <= 0 or <r, z> <= 0, signalling a non-SPD operator
        or preconditioner.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError("relative tolerance must lie in (0, 1)")
    if preconditioner is None:
        preconditioner = IdentityPreconditioner()

    lay = op.layout
    u = DistField.zeros(lay, op.nz)
    r = f.copy()
    r0 = dist_norm(r, deterministic)
    history = [r0]
    echo = {"solver": "cg", "eps": eps, "maxiter": maxiter, "tau": tau,
            "deterministic": deterministic, "workers": lay.decomp.workers}
    if r0 == 0.0 or r0 < tau:
        return u, SolveReport(0, history, True, 0.0, echo)

    t0 = time.perf_counter()
    z = preconditioner.apply(r)
    if callback is not None:
        callback(0, u, r, z)
    p = z.copy()
    kappa = dist_dot(r, z, deterministic)
    if kappa <= 0.0:
        raise BreakdownError("<r, z> <= 0: preconditioner is not positive definite")

    q = DistField.zeros(lay, op.nz)
    converged = False
    it = 0
    rnorm = r0
    for it in range(1, maxiter + 1):
        op.apply(p, out=q)
        pq = dist_dot(p, q, deterministic)
        if pq <= 0.0:
            raise BreakdownError("<p, A p> <= 0: operator is not positive definite")
        alpha = kappa / pq
        u.add_scaled(alpha, p)
        r.add_scaled(-alpha, q)
        rnorm = dist_norm(r, deterministic)
        history.append(rnorm)
        if rnorm / r0 < eps or rnorm < tau:
            converged = True
            break
        z = preconditioner.apply(r)
        if callback is not None:
            callback(it, u, r, z)
        kappa_new = dist_dot(r, z, deterministic)
        if kappa_new <= 0.0:
            raise BreakdownError("<r, z> <= 0: preconditioner is not positive definite")
        p.scale_plus(kappa_new / kappa, z)
        kappa = kappa_new
    wall = time.perf_counter() - t0

    true_norm = dist_norm(op.residual(f, u), deterministic)
    drift = abs(true_norm - rnorm)
    if drift > 10.0 * eps * r0:
        warnings.warn(
            f"recursive residual drifted from the true residual by {drift:.3e}",
            RuntimeWarning, stacklevel=2)
    return u, SolveReport(it, history, converged, wall, echo, residual_drift=drift)
