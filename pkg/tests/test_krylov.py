import numpy as np
import pytest

from panelmg import (BreakdownError, IdentityPreconditioner, SSORPreconditioner,
                     derive_parameters, panel_grid, pcg_solve)
from panelmg.partition import Decomposition, dist_norm, gather_owned, scatter_owned
from panelmg.smoother import LineSmoother
from panelmg.stencil import PanelOperator
from conftest import Setup, a_norm, dense_solve, toy_params


def test_identity_operator_converges_in_one_iteration():
    # Unit cells with omega2 = 0: the operator is the identity mass matrix.
    grid = panel_grid(2, 1, depth=1.0, flat_mode=True)
    op = PanelOperator(grid, toy_params(2, 1, omega2=0.0))
    f = scatter_owned(np.random.default_rng(0).uniform(-1, 1, (2, 2, 1)), op.layout)
    u, rep = pcg_solve(f, op, IdentityPreconditioner(), eps=1e-12)
    assert rep.iterations == 1 and rep.converged
    assert np.allclose(gather_owned(u), gather_owned(f), rtol=1e-12)


def test_matches_dense_solve(curved_small):
    s = curved_small
    fg = np.random.default_rng(2).standard_normal((8, 8, 4))
    ref = dense_solve(s.op, fg)
    pre = SSORPreconditioner(LineSmoother(s.op))
    f = scatter_owned(fg, s.layout)
    u, rep = pcg_solve(f, s.op, pre, eps=1e-12, maxiter=500)
    assert rep.converged
    err = np.max(np.abs(gather_owned(u) - ref)) / np.max(np.abs(ref))
    assert err <= 1e-10


def test_report_invariants(curved_small):
    s = curved_small
    f = s.random_field(1)
    pre = SSORPreconditioner(LineSmoother(s.op))
    u, rep = pcg_solve(f, s.op, pre, eps=1e-8)
    assert len(rep.residual_history) == rep.iterations + 1
    assert rep.residual_history[0] == pytest.approx(dist_norm(f))
    assert rep.final_relative_residual < 1e-8
    assert rep.residual_drift <= 10.0 * 1e-8 * rep.residual_history[0]
    assert rep.config_echo["solver"] == "cg"


def test_zero_rhs_short_circuits(curved_small):
    f = curved_small.zeros()
    u, rep = pcg_solve(f, curved_small.op, None, eps=1e-6)
    assert rep.iterations == 0 and rep.converged
    assert dist_norm(u) == 0.0


def test_absolute_tolerance(curved_small):
    f = curved_small.random_field(4)
    _, rep = pcg_solve(f, curved_small.op, None, eps=1e-14, maxiter=500,
                       tau=dist_norm(f) * 2.0)
    assert rep.iterations == 0 and rep.converged


class _Negated:
    """Sign-flipped operator: not positive definite."""

    def __init__(self, op):
        self._op = op
        self.layout = op.layout
        self.nz = op.nz

    def apply(self, u, out=None):
        out = self._op.apply(u, out)
        for f in out.parts.values():
            np.negative(f.data, out=f.data)
        return out

    def residual(self, f, u, out=None):
        raise NotImplementedError


def test_breakdown_reported(curved_small):
    bad = _Negated(curved_small.op)
    f = curved_small.random_field(3)
    with pytest.raises(BreakdownError):
        pcg_solve(f, bad, None, eps=1e-6, maxiter=10)


@pytest.mark.filterwarnings("ignore:recursive residual")
def test_error_decreases_monotonically_in_energy_norm(curved_small):
    s = curved_small
    fg = np.random.default_rng(6).standard_normal((8, 8, 4))
    ref = dense_solve(s.op, fg)
    pre = SSORPreconditioner(LineSmoother(s.op))
    errs = []
    for k in range(1, 9):
        f = scatter_owned(fg, s.layout)
        u, _ = pcg_solve(f, s.op, pre, eps=1e-15, maxiter=k)
        errs.append(a_norm(s.op, gather_owned(u) - ref))
    assert all(b < a for a, b in zip(errs, errs[1:]))


def test_residuals_are_preconditioner_orthogonal():
    s = Setup(16, 8, omega2=6.7e-4, lambda2=3.3e-2)
    pre = SSORPreconditioner(LineSmoother(s.op))
    f = s.random_field(7)
    captured = []

    def cb(k, u, r, z):
        captured.append((gather_owned(r).ravel().copy(),
                         gather_owned(z).ravel().copy()))

    _, rep = pcg_solve(f, s.op, pre, eps=1e-10, maxiter=200, callback=cb)
    assert rep.converged
    scale = max(np.linalg.norm(r) * np.linalg.norm(z) for r, z in captured)
    for k in range(1, len(captured)):
        zk = captured[k][1]
        for j in range(k):
            rj = captured[j][0]
            assert abs(zk @ rj) <= 1e-8 * scale


def test_unpreconditioned_needs_many_more_iterations():
    params = derive_parameters(128, 16, 1200.0)
    grid = panel_grid(128, 16)
    op = PanelOperator(grid, params, Decomposition(128, 1).layout(128))
    f = scatter_owned(np.random.default_rng(0).uniform(-1, 1, (128, 128, 16)),
                      op.layout)
    pre = SSORPreconditioner(LineSmoother(op))
    _, rep = pcg_solve(f, op, pre, eps=1e-5, maxiter=500)
    assert rep.converged
    cap = 5 * rep.iterations
    _, plain = pcg_solve(f, op, None, eps=1e-5, maxiter=cap)
    assert not plain.converged  # vertical anisotropy cripples plain CG
