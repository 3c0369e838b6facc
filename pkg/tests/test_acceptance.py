"""Acceptance gate: every criterion at its stated tolerance.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one line per
criterion.  Criteria 2-6 solve production-sized problems (up to
512x512x128) on one in-process worker; expect roughly 30-60 minutes for
the full set, dominated by the nx=512 robustness matrix.
"""

import numpy as np
import pytest

from panelmg import (ExperimentSpec, MGConfig, SSORPreconditioner,
                     build_hierarchy, derive_parameters, mg_solve, panel_grid,
                     pcg_solve, run_experiment, run_table)
from panelmg.multigrid import v_cycle
from panelmg.partition import (Decomposition, dist_dot, gather_owned,
                               halo_exchange, scatter_owned)
from panelmg.smoother import LineSmoother
from panelmg.stencil import PanelOperator
from panelmg.tridiag import TridiagonalSystem, thomas_solve
from conftest import PARAM_TABLE, Setup, a_norm, dense_solve

_RUNS: dict = {}


def solve(solver, nx, dt, policy="standard", f_o=1.0, f_l=1.0, nz=128):
    """One cached benchmark solve (random rhs, seed 0, eps 1e-5)."""
    key = (solver, policy, nx, nz, dt, f_o, f_l)
    if key not in _RUNS:
        spec = ExperimentSpec(nx=nx, nz=nz, dt=dt, solver=solver, policy=policy,
                              f_omega2=f_o, f_lambda2=f_l, eps=1e-5,
                              maxiter=500)
        _RUNS[key] = run_experiment(spec)[0]
    return _RUNS[key]


def ok(num, text):
    print(f"\nACCEPTANCE {num}: PASS - {text}")


def test_criterion_1_parameter_table():
    """Derived dx, omega2, lambda2 to 3 significant figures and the
    anisotropy columns to +-2% for nx in {256, 512, 1024}."""
    from panelmg import anisotropy
    checked = []
    for nx, dt, dx_km, omega2, lambda2, b_bot, b_mid, b_top in PARAM_TABLE[:3]:
        p = derive_parameters(nx, 128, dt)
        grid = panel_grid(nx, 128)
        assert round(p.dx / 1000.0, 1) == pytest.approx(dx_km)
        assert abs(p.omega2 - omega2) / omega2 < 5e-3
        assert abs(p.lambda2 - lambda2) / lambda2 < 5e-3
        for k, ref in ((0, b_bot), (64, b_mid), (127, b_top)):
            assert abs(anisotropy(p, grid, k) - ref) / ref < 0.02
        checked.append(nx)
    ok(1, f"parameter table reproduced for nx={checked}")


def test_criterion_2_mg_iteration_count():
    """nx=256, nz=128, dt=600 s, standard policy, nu=1+1, RB line SOR,
    eps=1e-5, zero start -> 6 +- 1 V-cycles."""
    rep = solve("mg", 256, 600.0)
    assert rep.converged
    assert 5 <= rep.iterations <= 7, rep.iterations
    assert rep.reduction_rate() <= 0.25
    ok(2, f"standard multigrid took {rep.iterations} V-cycles (band 6+-1, "
          f"mean rate {rep.reduction_rate():.3f})")


def test_criterion_3_mesh_independence():
    """Iteration count identical (+-1) across nx in {64,...,512} under the
    fixed-Courant schedule."""
    counts = {}
    for nx, dt in ((64, 2400.0), (128, 1200.0), (256, 600.0), (512, 300.0)):
        rep = solve("mg", nx, dt)
        assert rep.converged
        counts[nx] = rep.iterations
    assert max(counts.values()) - min(counts.values()) <= 1, counts
    ok(3, f"V-cycle counts across resolutions: {counts}")


def test_criterion_4_cg_iteration_count():
    """Same nx=256 problem with the SSOR line preconditioner -> 44 +- 6."""
    rep = solve("cg", 256, 600.0)
    assert rep.converged
    assert 38 <= rep.iterations <= 50, rep.iterations
    ok(4, f"preconditioned CG took {rep.iterations} iterations (band 44+-6)")


def test_criterion_5_level_policy_equivalence():
    """Shallow and very shallow hierarchies also converge in 6 +- 1 at
    base parameters."""
    counts = {}
    for policy in ("shallow", "very_shallow"):
        rep = solve("mg", 256, 600.0, policy=policy)
        assert rep.converged
        counts[policy] = rep.iterations
        assert 5 <= rep.iterations <= 7, (policy, rep.iterations)
    ok(5, f"level policies at base parameters: {counts}")


def test_criterion_6_robustness_matrix():
    """Coefficient-multiplier scan at nx=512 (3.4e7 dof): the vertical
    coupling multipliers leave every multigrid policy within +-1
    iteration and CG within its +-6 count tolerance (a few-percent
    shift); under f_omega2=100 standard multigrid stays within 2x its
    base count while very shallow multigrid and CG degrade by at least
    5x."""
    it = {}
    for (f_o, f_l) in ((1.0, 1.0), (1.0, 1e2), (1.0, 1e-2), (10.0, 1.0), (100.0, 1.0)):
        for solver, policy in (("mg", "standard"), ("mg", "shallow"),
                               ("mg", "very_shallow"), ("cg", "standard")):
            rep = solve(solver, 512, 300.0, policy=policy, f_o=f_o, f_l=f_l)
            label = solver if solver == "cg" else policy
            it[(f_o, f_l, label)] = rep.iterations
    for (f_o, f_l, label), count in sorted(it.items()):
        print(f"  f_omega2={f_o:>5} f_lambda2={f_l:>6}: {label:<13} {count}")

    for label in ("standard", "shallow", "very_shallow"):
        base = it[(1.0, 1.0, label)]
        for f_l in (1e2, 1e-2):
            assert abs(it[(1.0, f_l, label)] - base) <= 1, (label, f_l)
    cg_base = it[(1.0, 1.0, "cg")]
    for f_l in (1e2, 1e-2):
        shift = it[(1.0, f_l, "cg")] - cg_base
        assert abs(shift) <= 6 and it[(1.0, f_l, "cg")] <= 1.2 * cg_base, (f_l, shift)
    assert it[(100.0, 1.0, "standard")] <= 2 * it[(1.0, 1.0, "standard")]
    assert it[(100.0, 1.0, "very_shallow")] >= 5 * it[(100.0, 1.0, "standard")]
    assert it[(100.0, 1.0, "cg")] >= 5 * cg_base
    # degradation ordering across the solver family
    assert (it[(100.0, 1.0, "standard")] <= it[(100.0, 1.0, "shallow")]
            <= it[(100.0, 1.0, "very_shallow")] < it[(100.0, 1.0, "cg")])
    ok(6, "robustness matrix holds at nx=512 (multigrid +-1 under "
          "vertical-coupling multipliers, CG within its count tolerance, "
          "degradation ratios as published)")


def test_criterion_7_oracle_equivalence():
    """Matrix-free == assembled (1e-13); Thomas == dense elimination
    (1e-12, 1000 systems); PCG and MG == dense direct solve (1e-10)."""
    rng = np.random.default_rng(0)
    for flat in (True, False):
        s = Setup(8, 4, omega2=0.7, lambda2=1.3, flat=flat,
                  depth=1.0 if flat else 0.01)
        a = s.op.assemble()
        ug = rng.standard_normal((8, 8, 4))
        v = gather_owned(s.op.apply(s.field(ug)))
        ref = (a @ ug.ravel()).reshape(8, 8, 4)
        assert np.max(np.abs(v - ref)) <= 1e-13 * np.max(np.abs(ref))

    sizes = [1, 2, 3, 64, 128, 257]
    for trial in range(1000):
        n = sizes[trial % len(sizes)]
        a = rng.uniform(2.5, 4.0, n)
        b = rng.uniform(-1.0, 1.0, max(n - 1, 0))
        c = rng.uniform(-1.0, 1.0, max(n - 1, 0))
        f = rng.uniform(-1.0, 1.0, n)
        u = thomas_solve(TridiagonalSystem(a=a, b=b, c=c, f=f))
        dense = np.diag(a)
        if n > 1:
            dense += np.diag(b, 1) + np.diag(c, -1)
        ref = np.linalg.solve(dense, f)
        assert np.max(np.abs(u - ref)) <= 1e-12 * max(1.0, np.max(np.abs(ref)))

    s = Setup(8, 4, omega2=6.7e-4, lambda2=3.3e-2)
    fg = rng.standard_normal((8, 8, 4))
    ref = dense_solve(s.op, fg)
    scale = np.max(np.abs(ref))
    pre = SSORPreconditioner(LineSmoother(s.op))
    u, rep = pcg_solve(scatter_owned(fg, s.layout), s.op, pre,
                       eps=1e-12, maxiter=500)
    assert rep.converged
    assert np.max(np.abs(gather_owned(u) - ref)) <= 1e-10 * scale

    cfg = MGConfig(eps=1e-12, maxiter=100)
    hier = build_hierarchy(s.grid, s.params, cfg, s.decomp)
    u, rep = mg_solve(scatter_owned(fg, hier.fine.layout), hier, cfg)
    assert rep.converged
    assert np.max(np.abs(gather_owned(u) - ref)) <= 1e-10 * scale
    ok(7, "matrix-free, Thomas, PCG and MG all match their oracles")


def test_criterion_8_property_suite():
    """Operator symmetry/PD probes, smoother fixed point and energy
    decrease, transfer identities, contracting V-cycle, partition
    invariance for P in {1,4,16} and the halo-exchange count."""
    rng = np.random.default_rng(1)

    s = Setup(16, 8, omega2=6.7e-4, lambda2=3.3e-2)
    for _ in range(20):
        u = s.field(rng.standard_normal((16, 16, 8)))
        v = s.field(rng.standard_normal((16, 16, 8)))
        auv = dist_dot(s.op.apply(u), v)
        uav = dist_dot(u, s.op.apply(v))
        assert abs(auv - uav) <= 1e-12 * max(abs(auv), abs(uav))
        assert dist_dot(u, s.op.apply(u)) > 0.0

    so = Setup(8, 4, omega2=6.7e-4, lambda2=3.3e-2)
    fg = rng.standard_normal((8, 8, 4))
    ustar = dense_solve(so.op, fg)
    sm = LineSmoother(so.op)
    u = so.field(ustar)
    sm.sweep(u, so.field(fg), 1, 1.0)
    assert np.max(np.abs(gather_owned(u) - ustar)) <= 1e-13 * np.max(np.abs(ustar))
    u = so.zeros()
    e0 = a_norm(so.op, ustar)
    sm.sweep(u, so.field(fg), 1, 1.0)
    assert a_norm(so.op, gather_owned(u) - ustar) < e0

    from panelmg import prolong, restrict
    cfg = MGConfig()
    hier = build_hierarchy(so.grid, so.params, cfg, so.decomp)
    fine, coarse = hier.levels[0], hier.levels[1]
    const = scatter_owned(np.full((8, 8, 4), 2.0), fine.layout)
    rc = restrict(const, fine, coarse)
    assert np.allclose(gather_owned(rc), 2.0)
    halo_exchange(rc)
    assert np.allclose(gather_owned(prolong(rc, coarse, fine)), 2.0)
    rndf = rng.standard_normal((8, 8, 4))
    rr = restrict(scatter_owned(rndf, fine.layout), fine, coarse)
    assert 4.0 * gather_owned(rr).sum() == pytest.approx(rndf.sum(), rel=1e-13)

    flat = Setup(8, 4, omega2=0.7, lambda2=1.3, flat=True, depth=1.0)
    hier = build_hierarchy(flat.grid, flat.params, cfg, flat.decomp)
    scratch = hier.make_scratch()
    n = 8 * 8 * 4
    e = np.zeros((n, n))
    for col in range(n):
        scratch[0].f.fill(0.0)
        scratch[0].u.parts[0].owned[...] = np.eye(n)[col].reshape(8, 8, 4)
        halo_exchange(scratch[0].u)
        v_cycle(hier, cfg, scratch)
        e[:, col] = gather_owned(scratch[0].u).ravel()
    assert np.max(np.abs(np.linalg.eigvals(e))) < 1.0

    params = derive_parameters(32, 8, 4800.0)
    grid = panel_grid(32, 8)
    fglob = rng.uniform(-1, 1, (32, 32, 8))
    mg_hist, cg_hist = {}, {}
    for workers in (1, 4, 16):
        cfgd = MGConfig(deterministic=True)
        hier = build_hierarchy(grid, params, cfgd, Decomposition(32, workers))
        _, rep = mg_solve(scatter_owned(fglob, hier.fine.layout), hier, cfgd)
        mg_hist[workers] = np.array(rep.residual_history)
        lay = Decomposition(32, workers).layout(32)
        op = PanelOperator(grid, params, lay)
        _, rep = pcg_solve(scatter_owned(fglob, lay), op,
                           SSORPreconditioner(LineSmoother(op)),
                           eps=1e-5, maxiter=100, deterministic=True)
        cg_hist[workers] = np.array(rep.residual_history)
    for workers in (4, 16):
        for hist, ref in ((mg_hist[workers], mg_hist[1]),
                          (cg_hist[workers], cg_hist[1])):
            assert len(hist) == len(ref)
            assert np.max(np.abs(hist - ref) / ref) <= 1e-10

    for nu_pre, nu_post in ((1, 1), (2, 1)):
        cfgh = MGConfig(nu_pre=nu_pre, nu_post=nu_post)
        hierh = build_hierarchy(grid, params, cfgh, Decomposition(32, 4))
        scr = hierh.make_scratch()
        hierh.reset_counters()
        v_cycle(hierh, cfgh, scr)
        for lev in hierh.levels[:-1]:
            assert lev.layout.halo_count == 1 + 2 * (nu_pre + nu_post)
    ok(8, "property suite holds (symmetry, PD, smoother, transfers, "
          "contraction, partition invariance, halo accounting)")


def test_criterion_9_out_of_scope_statement():
    """Large-machine wall-clock results (0.177 s/cycle at 3.4e10 dof,
    scaled efficiencies, strong-scaling curves) are not reproducible at
    desk scale; communication-pattern accounting and partition
    invariance (criteria 7 and 8) stand in for them."""
    ok(9, "hardware-scale timings substituted by criteria 7 and 8")
