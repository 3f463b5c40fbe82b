"""Action, preconditioned operator, contraction solver, continuation."""

import json
import os

import numpy as np
import pytest

from nvortex import core, equilibria as eq, loops as lp, reduction as rd
from nvortex.core import Plane, UnitDisk, VortexSystem
from nvortex.errors import EmptyPath, ZeroTotalVorticity

RNG = np.random.default_rng(99)
M = 10


@pytest.fixture(scope="module")
def pair_setup():
    sys2 = VortexSystem([1.0, 1.0])
    pair = eq.normalize_period(eq.make_pair(1.0, 1.0, 2.0))
    frame = lp.build_frame(pair.z, pair.omega, 2, M)
    basis = rd.build_x_basis(frame)
    return sys2, pair, frame, basis


# ---------------------------------------------------------------------------
# action and gradient

def test_action_symplectic_coefficient_vs_quadrature(pair_setup):
    sys2, _, frame, _ = pair_setup
    u = frame.Z + lp.Loop(0.1 * RNG.normal(size=(2 * M + 1, 4)))
    m = 8 * (2 * M + 1)
    t = lp.sample_times(m)
    vals, dvals = u.eval(t), lp.differentiate(u).eval(t)
    mj = sys2.m_gamma() @ sys2.j_n()
    quad = 0.5 * 2 * np.pi / m * np.sum(
        np.einsum("ti,ij,tj->t", dvals, mj, vals))
    assert abs(rd._symplectic_term(sys2, u) - quad) < 1e-10 * max(
        1.0, abs(quad))


def test_action_constant_loop_is_minus_energy(pair_setup):
    sys2, *_ = pair_setup
    c = lp.constant_loop(np.array([1.0, 0.0, -1.0, 0.5]), M)
    val = rd.action_J_r(sys2, Plane(), 0.0, c)
    assert val == pytest.approx(-2 * np.pi * core.eval_H0(sys2, c.a0),
                                rel=1e-12)


def test_action_r_dependence_linear(pair_setup):
    sys2, _, frame, _ = pair_setup
    disk = UnitDisk()
    u = frame.Z
    j0 = rd.action_J_r(sys2, Plane(), 0.0, u)
    vals = [abs(rd.action_J_r(sys2, disk, r, u) - j0)
            for r in (0.2, 0.1, 0.05)]
    # the F terms vanish with r; each halving shrinks the gap
    assert all(v2 < v1 for v1, v2 in zip(vals, vals[1:]))


def test_grad_zero_at_seed_on_plane(pair_setup):
    sys2, _, frame, _ = pair_setup
    g = rd.grad_J_r(sys2, Plane(), 0.0, frame.Z)
    assert lp.h1_norm(g) < 1e-10


def test_grad_matches_directional_derivative(pair_setup):
    sys2, _, frame, _ = pair_setup
    disk = UnitDisk()
    u = frame.Z + lp.Loop(0.05 * RNG.normal(size=(2 * M + 1, 4)))
    w = lp.Loop(RNG.normal(size=(2 * M + 1, 4)))
    r, epsv = 0.08, 1e-6
    fd = (rd.action_J_r(sys2, disk, r, u + epsv * w)
          - rd.action_J_r(sys2, disk, r, u - epsv * w)) / (2 * epsv)
    an = lp.h1_inner(rd.grad_J_r(sys2, disk, r, u), w)
    assert abs(fd - an) / abs(an) < 1e-5


def test_grad_at_seed_is_smoothed_F_gradient(pair_setup):
    """At the seed the plane part cancels and only the domain forcing
    survives: grad = r (id-Lap)^{-1} grad F(r Z) as a loop."""
    sys2, _, frame, _ = pair_setup
    disk = UnitDisk()
    r = 0.1
    g = rd.grad_J_r(sys2, disk, r, frame.Z)
    m = lp.dealias_samples(M)
    pts = lp.sample(frame.Z, m)
    forcing = lp.from_samples(r * core.grad_F(sys2, disk, r * pts), M)
    expect = lp.inv_id_minus_laplace(forcing)
    assert lp.h1_norm(g - expect) < 1e-12


def test_grad_at_seed_vanishes_with_r(pair_setup):
    sys2, _, frame, _ = pair_setup
    disk = UnitDisk()
    norms = [lp.h1_norm(rd.grad_J_r(sys2, disk, r, frame.Z))
             for r in (0.2, 0.1, 0.05)]
    assert norms[0] < 1e-2
    assert all(n2 < 0.5 * n1 for n1, n2 in zip(norms, norms[1:]))


# ---------------------------------------------------------------------------
# the operator on X

def test_x_basis_orthonormal(pair_setup):
    _, _, frame, basis = pair_setup
    G = basis.matrix.T @ (basis.weights[:, None] * basis.matrix)
    assert np.max(np.abs(G - np.eye(basis.dim))) < 1e-12
    # first two columns are the normalized constant translations
    e1n = basis.column_loop(0)
    assert np.allclose(e1n.coeffs[0], np.tile(
        [1.0 / np.sqrt(2 * np.pi * 2), 0.0], 2))


def test_operator_plane_blocks(pair_setup):
    sys2, _, frame, basis = pair_setup
    op = rd.assemble_L_r(sys2, Plane(), 0.0, frame, basis=basis)
    assert op.block_norms["D"] < 1e-14
    assert op.block_norms["B"] < 1e-14
    assert op.block_norms["C"] < 1e-14
    assert np.linalg.cond(op.matrix[2:, 2:]) < 1e3


def test_operator_matches_finite_differences(pair_setup):
    sys2, _, frame, basis = pair_setup
    disk = UnitDisk()
    r = 0.08
    op = rd.assemble_L_r(sys2, disk, r, frame, basis=basis)
    y = RNG.normal(size=basis.dim)
    y /= np.linalg.norm(y)
    w = basis.to_loop(y)
    epsv = 1e-6
    fd = (rd.grad_J_r(sys2, disk, r, frame.Z + epsv * w).coeffs
          - rd.grad_J_r(sys2, disk, r, frame.Z - epsv * w).coeffs) / (2 * epsv)
    fdc = basis.coords(lp.Loop(fd))
    assert np.linalg.norm(op.matrix @ y - fdc) / np.linalg.norm(fdc) < 1e-5


def test_operator_symmetric(pair_setup):
    sys2, _, frame, basis = pair_setup
    op = rd.assemble_L_r(sys2, UnitDisk(), 0.1, frame, basis=basis)
    assert np.max(np.abs(op.matrix - op.matrix.T)) < 1e-12


def test_d_block_limit_closed_form(pair_setup):
    """The scaled D block converges to the lift of (Gamma^2/N) h''(0)."""
    sys2, _, frame, basis = pair_setup
    disk = UnitDisk()
    expect = (sys2.gamma_total**2 / sys2.n) * core.hess_h(disk, np.zeros(2))
    for r in (0.1, 0.02):
        op = rd.assemble_L_r(sys2, disk, r, frame, basis=basis)
        assert np.max(np.abs(op.d0_matrix - expect)) < 1e-3 * r**0 * 1e-1 \
            or np.max(np.abs(op.d0_matrix - expect)) < 5e-3
    op = rd.assemble_L_r(sys2, disk, 1e-3, frame, basis=basis)
    assert np.max(np.abs(op.d0_matrix - expect)) < 1e-6


def test_center_of_vorticity_identity(pair_setup):
    """P_D[(id-Lap)^{-1} F''(0)[Z]] = 0 for a mean-free seed."""
    sys2, _, frame, _ = pair_setup
    disk = UnitDisk()
    hess0 = core.hess_F(sys2, disk, np.zeros(4))
    img = lp.Loop(frame.Z.coeffs @ hess0.T)
    out = lp.project_D(lp.inv_id_minus_laplace(img))
    assert lp.h1_norm(out) < 1e-10


# ---------------------------------------------------------------------------
# reduced solve

def test_plane_solution_is_zero(pair_setup):
    sys2, _, frame, basis = pair_setup
    sol = rd.solve_reduced(sys2, Plane(), 0.1, frame,
                           rd.SolverParams(modes=M), basis=basis)
    assert sol.vnorm < 1e-12
    assert sol.residual_grad < 1e-12


def test_disk_solution_diagnostics(pair_setup):
    sys2, _, frame, basis = pair_setup
    sol = rd.solve_reduced(sys2, UnitDisk(), 0.1, frame,
                           rd.SolverParams(modes=M), basis=basis)
    assert sol.residual_grad < 1e-10
    assert sol.phase_defect < 1e-10
    assert abs(lp.h1_inner(sol.v, frame.Zdot)) < 1e-10
    assert sol.spectral_tail < 1e-8
    assert 0 < sol.vnorm < 1e-3


def test_fixedpoint_newton_agree(pair_setup):
    sys2, _, frame, basis = pair_setup
    fp = rd.solve_reduced(sys2, UnitDisk(), 0.15, frame,
                          rd.SolverParams(modes=M), basis=basis)
    nw = rd.solve_reduced(sys2, UnitDisk(), 0.15, frame,
                          rd.SolverParams(modes=M, mode="Newton"),
                          basis=basis)
    assert lp.h1_norm(fp.v - nw.v) < 1e-9


def test_solver_equivariance(pair_setup):
    sys2, _, frame, _ = pair_setup
    params = rd.SolverParams(modes=M)
    base = rd.solve_reduced(sys2, UnitDisk(), 0.1, frame, params)
    theta = np.pi / 2
    shifted = lp.LoopFrame(Z=lp.time_shift(theta, frame.Z),
                           Zdot=lp.time_shift(theta, frame.Zdot),
                           e1=frame.e1, e2=frame.e2)
    sol = rd.solve_reduced(sys2, UnitDisk(), 0.1, shifted, params)
    assert lp.h1_norm(sol.v - lp.time_shift(theta, base.v)) < 1e-9


def test_local_uniqueness_probe(pair_setup):
    sys2, _, frame, _ = pair_setup
    params = rd.SolverParams(modes=M)
    sol = rd.solve_reduced(sys2, UnitDisk(), 0.1, frame, params)
    report = rd.local_uniqueness_probe(
        sys2, UnitDisk(), 0.1, frame, params, sol,
        np.linspace(0.0, 2 * np.pi, 8, endpoint=False))
    assert report["max"] < 1e-8
    assert report["mismatch"][0.0] < 1e-12


def test_sigma_filter_on_thomson():
    th = eq.normalize_period(eq.make_thomson(3, 1.0, 1.0))
    sys3 = VortexSystem([1.0, 1.0, 1.0])
    frame = lp.build_frame(th.z, th.omega, 3, M)
    sigma = (1, 2, 0)
    params = rd.SolverParams(modes=M, sigma=sigma)
    sol = rd.solve_reduced(sys3, UnitDisk(), 0.1, frame, params)
    fixed = lp.sigma_act(np.array(sigma), sol.v)
    assert lp.h1_norm(fixed - sol.v) < 1e-10
    assert sol.residual_grad < 1e-10


# ---------------------------------------------------------------------------
# continuation and unrescaling

@pytest.fixture(scope="module")
def small_path(pair_setup):
    sys2, _, frame, _ = pair_setup
    params = rd.SolverParams(modes=M, r_points=12)
    return rd.continue_path(sys2, UnitDisk(), np.zeros(2), frame, params)


def test_continuation_all_points(small_path):
    assert len(small_path.entries) == 12
    assert not small_path.failures
    assert all(e.residual_grad < 1e-10 for e in small_path.entries)
    assert small_path.r0_empirical >= small_path.entries[0].r


def test_continuation_vnorm_monotone(small_path):
    rs, vs = small_path.r_values, small_path.vnorms
    mask = rs <= 0.05
    assert np.all(np.diff(vs[mask]) < 0)


def test_zero_vorticity_rejected(pair_setup):
    _, _, frame, _ = pair_setup
    with pytest.raises(ZeroTotalVorticity):
        rd.continue_path(VortexSystem([1.0, -1.0]), UnitDisk(), np.zeros(2),
                         frame, rd.SolverParams(modes=M))


def test_unrescale_geometry(small_path, pair_setup):
    sys2, pair, _, _ = pair_setup
    sol = small_path.entries[0]
    orbit = rd.unrescale(np.zeros(2), sol.r, sol, 64, domain=UnitDisk())
    assert orbit.period == pytest.approx(2 * np.pi * sol.r**2)
    pts = orbit.samples.reshape(64, 2, 2)
    radii = np.linalg.norm(pts, axis=-1)
    # two points circling the center at radius ~ r * |z_k|
    seed_radius = np.linalg.norm(pair.z[0])
    assert np.all(np.abs(radii - sol.r * seed_radius) < 0.05 * sol.r)
    assert np.all(np.linalg.norm(pts, axis=-1) < 1.0)


def test_unrescale_roundtrip(small_path):
    sol = small_path.entries[0]
    orbit = rd.unrescale(np.zeros(2), sol.r, sol, 32)
    back = orbit.samples / sol.r
    expect = sol.u.eval(orbit.times / sol.r**2)
    assert np.max(np.abs(back - expect)) < 1e-10


def test_orbit_file_roundtrip(small_path, pair_setup, tmp_path):
    sys2, pair, _, _ = pair_setup
    sol = small_path.entries[0]
    doc = rd.orbit_to_dict(sys2, UnitDisk(), np.zeros(2), pair.omega, sol)
    path = os.path.join(tmp_path, "orbit.json")
    rd.save_orbit(path, doc)
    loaded = rd.load_orbit(path)
    assert loaded["schema_version"] == rd.ORBIT_SCHEMA_VERSION
    assert loaded["system"]["gammas"] == [1.0, 1.0]
    back = lp.loop_from_dict(loaded["loop"])
    assert np.array_equal(back.coeffs, sol.u.coeffs)
    assert loaded["diagnostics"]["residual_grad"] == sol.residual_grad


def test_orbit_schema_version_checked(tmp_path):
    path = os.path.join(tmp_path, "bad.json")
    with open(path, "w") as fh:
        json.dump({"schema_version": 99}, fh)
    with pytest.raises(ValueError):
        rd.load_orbit(path)


def test_solver_params_validation():
    with pytest.raises(ValueError):
        rd.SolverParams(fp_tol=-1.0)
    with pytest.raises(ValueError):
        rd.SolverParams(r_max=0.001, r_min=0.1)
    with pytest.raises(ValueError):
        rd.SolverParams(mode="bogus")
    grid = rd.SolverParams().r_grid()
    assert grid[0] == pytest.approx(0.2) and grid[-1] == pytest.approx(1e-3)
    assert np.all(np.diff(grid) < 0)
