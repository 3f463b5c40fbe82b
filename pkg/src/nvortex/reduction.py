"""Contraction-mapping reduction for small periodic orbits near an
interior equilibrium point of the regular part.

The rescaled problem looks for 2*pi-periodic loops u with

    M_Gamma u' = J_N grad H_r(u),      H_r(u) = H0(u) - F(ru) + F(0),

as zeros of the H^1 gradient of the action

    J_r(u) = 1/2 int M_Gamma u' . J_N u  -  int H_r(u).

Writing u = Z + v with Z the rigidly rotating seed, the correction v is
found in the subspace X (H^1-orthogonal complement of the phase
direction Z') either by the frozen-Jacobian fixed-point iteration

    v  <-  v - L_r^{-1} [P_X grad J_r(Z + v)]

or by a damped Newton method, and continued in the scale parameter r.
Un-rescaling z(t) = a0 + r u(t / r^2) produces orbits of the physical
system with period 2*pi*r^2.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import core, loops
from .core import DomainModel, TranslatedDomain, VortexSystem
from .errors import (
    CollisionError,
    ContractionFailure,
    DomainExit,
    EmptyPath,
    NoConvergence,
    PhaseDefect,
    SingularOperator,
    ZeroTotalVorticity,
)
from .loops import Loop, LoopFrame

ORBIT_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class SolverParams:
    modes: int = 32
    fp_tol: float = 1e-11
    newton_tol: float = 1e-11
    max_iter: int = 200
    contraction_guard: float = 0.9
    mode: str = "FixedPoint"  # or "Newton"
    r_max: float = 0.2
    r_min: float = 1e-3
    r_points: int = 30
    spectral_tail_tol: float = 1e-8
    sigma: tuple | None = None  # optional permutation filter

    def __post_init__(self):
        if self.fp_tol <= 0 or self.newton_tol <= 0:
            raise ValueError("tolerances must be positive")
        if not (0 < self.r_min < self.r_max):
            raise ValueError("r grid must be strictly decreasing and positive")
        if self.mode not in ("FixedPoint", "Newton"):
            raise ValueError(f"unknown solver mode {self.mode!r}")

    def r_grid(self) -> np.ndarray:
        """Geometric sequence from r_max down to r_min."""
        return np.geomspace(self.r_max, self.r_min, self.r_points)

    @property
    def quad_nodes(self) -> int:
        return loops.dealias_samples(self.modes)


@dataclass(frozen=True)
class ReducedSolution:
    r: float
    v: Loop
    u: Loop
    residual_grad: float
    phase_defect: float
    vnorm: float
    iterations: int
    spectral_tail: float
    contraction_estimate: float = float("nan")


@dataclass(frozen=True)
class PhysicalOrbit:
    a0: np.ndarray
    r: float
    period: float
    times: np.ndarray
    samples: np.ndarray  # (m, 2N)
    source: ReducedSolution


@dataclass
class ContinuationPath:
    a0: np.ndarray
    entries: list  # ReducedSolution, r descending
    failures: dict  # r -> message
    r0_empirical: float

    @property
    def r_values(self) -> np.ndarray:
        return np.array([e.r for e in self.entries])

    @property
    def vnorms(self) -> np.ndarray:
        return np.array([e.vnorm for e in self.entries])


# ---------------------------------------------------------------------------
# action and gradient

def _symplectic_term(sys: VortexSystem, u: Loop) -> float:
    """1/2 int M u' . J u, exact in the Fourier coefficients."""
    mj = sys.m_gamma() @ sys.j_n()
    a, b = u.coeffs[1::2], u.coeffs[2::2]
    k = np.arange(1, u.modes + 1)
    return float(np.pi * np.sum(k * np.einsum("kd,dc,kc->k", b, mj, a)))


def _check_nodes(sys: VortexSystem, domain: DomainModel, pts: np.ndarray,
                 r: float) -> None:
    """pts: (m, 2N) rescaled loop samples; physical points are r*pts."""
    z = pts.reshape(pts.shape[0], -1, 2)
    d = z[:, :, None, :] - z[:, None, :, :]
    dist = np.linalg.norm(d, axis=-1)
    idx = np.arange(z.shape[1])
    dist[:, idx, idx] = np.inf
    if dist.min() <= core.COLLISION_TOL:
        t_bad = 2 * np.pi * dist.min(axis=(1, 2)).argmin() / pts.shape[0]
        raise CollisionError(f"loop samples collide near t = {t_bad:.6f}")
    if r > 0 and not np.all(domain.contains(r * z)):
        bad = np.argmin(np.all(domain.contains(r * z), axis=-1))
        t_bad = 2 * np.pi * bad / pts.shape[0]
        raise DomainExit(f"loop sample leaves the domain near t = {t_bad:.6f}")


def action_J_r(sys: VortexSystem, domain: DomainModel, r: float, u: Loop,
               nodes: int | None = None) -> float:
    """Action of the rescaled system; H0/F terms by trapezoidal quadrature."""
    m = nodes or loops.dealias_samples(u.modes)
    pts = loops.sample(u, m)
    _check_nodes(sys, domain, pts, r)
    ham = core.eval_H0(sys, pts)
    if r > 0:
        ham = ham - core.eval_F(sys, domain, r * pts) + core.eval_F(
            sys, domain, np.zeros(2 * sys.n))
    return _symplectic_term(sys, u) - 2 * np.pi * float(np.mean(ham))


def grad_J_r(sys: VortexSystem, domain: DomainModel, r: float, u: Loop,
             nodes: int | None = None) -> Loop:
    """H^1 gradient: (id-Lap)^{-1} of the L^2 field -J M u' - grad H_r(u)."""
    m = nodes or loops.dealias_samples(u.modes)
    pts = loops.sample(u, m)
    _check_nodes(sys, domain, pts, r)
    field = -core.grad_H0(sys, pts)
    if r > 0:
        field = field + r * core.grad_F(sys, domain, r * pts)
    nonlin = loops.from_samples(field, u.modes)
    du = loops.differentiate(u)
    jm = (sys.j_n() @ sys.m_gamma())
    lin = Loop(-du.coeffs @ jm.T)
    return loops.inv_id_minus_laplace(lin + nonlin)


# ---------------------------------------------------------------------------
# the X-space basis and the preconditioned operator

@dataclass(frozen=True)
class XBasis:
    """H^1-orthonormal basis of X = (R Z')^perp, as flattened columns.

    The first two columns span D (normalized constant translations); the
    rest span N_Z. weights is the diagonal H^1 Gram in flat coordinates.
    """

    matrix: np.ndarray  # (dim_total, dim_X)
    weights: np.ndarray
    n: int
    modes: int

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def coords(self, u: Loop) -> np.ndarray:
        return self.matrix.T @ (self.weights * loops.flatten(u.pad(self.modes)))

    def to_loop(self, y: np.ndarray) -> Loop:
        return loops.unflatten(self.matrix @ y, self.n, self.modes)

    def column_loop(self, j: int) -> Loop:
        return loops.unflatten(self.matrix[:, j], self.n, self.modes)


def build_x_basis(frame: LoopFrame) -> XBasis:
    n, modes = frame.n, frame.modes
    w = loops.h1_weight_vector(n, modes)
    sw = np.sqrt(w)
    zdot = loops.flatten(frame.Zdot)
    e1 = loops.flatten(frame.e1)
    e2 = loops.flatten(frame.e2)
    scale = np.sqrt(2 * np.pi * n)
    cols = [e1 / scale, e2 / scale]
    # N_Z: orthogonal complement of span{Z', e1, e2} in the W metric
    removed = np.vstack([zdot, e1, e2]) * sw
    null = scipy.linalg.null_space(removed)
    cols.append(null / sw[:, None])
    mat = np.column_stack([cols[0], cols[1], cols[2]])
    return XBasis(matrix=mat, weights=w, n=n, modes=modes)


def _hessian_stack(sys: VortexSystem, domain: DomainModel, r: float,
                   base_pts: np.ndarray) -> np.ndarray:
    """H_r''(base(t)) at the quadrature nodes, shape (m, 2N, 2N)."""
    h = core.hess_H0(sys, base_pts)
    if r > 0:
        h = h - r**2 * core.hess_F(sys, domain, r * base_pts)
    return h


def _apply_dphi(sys: VortexSystem, hmats: np.ndarray, w: Loop,
                modes: int) -> Loop:
    """(id-Lap)^{-1}(-J M w' - H_r''(base) w), H-term pseudo-spectral."""
    m = hmats.shape[0]
    pts = loops.sample(w, m)
    nonlin = loops.from_samples(-np.einsum("tij,tj->ti", hmats, pts), modes)
    jm = sys.j_n() @ sys.m_gamma()
    lin = Loop(-loops.differentiate(w).coeffs @ jm.T)
    return loops.inv_id_minus_laplace(lin + nonlin)


@dataclass(frozen=True)
class OperatorReport:
    matrix: np.ndarray
    block_norms: dict
    d0_matrix: np.ndarray  # 2x2 D-block of (L_r - L_0-part)/r^2 in the e-hat basis
    condition: float


def assemble_L_r(sys: VortexSystem, domain: DomainModel, r: float,
                 frame: LoopFrame, basis: XBasis | None = None,
                 base: Loop | None = None,
                 cond_limit: float = 1e12) -> OperatorReport:
    """Dense matrix of P_X DPhi_r at the base loop over the X basis."""
    basis = basis or build_x_basis(frame)
    base = base or frame.Z
    m = loops.dealias_samples(basis.modes)
    base_pts = loops.sample(base, m)
    _check_nodes(sys, domain, base_pts, r)
    hmats = _hessian_stack(sys, domain, r, base_pts)

    dim = basis.dim
    L = np.empty((dim, dim))
    for j in range(dim):
        bj = basis.column_loop(j)
        L[:, j] = basis.coords(_apply_dphi(sys, hmats, bj, basis.modes))
    L = 0.5 * (L + L.T)  # DPhi_r is H^1 self-adjoint; symmetrize roundoff

    blocks = {
        "D": np.linalg.norm(L[:2, :2]),
        "B": np.linalg.norm(L[:2, 2:]),
        "C": np.linalg.norm(L[2:, :2]),
        "A": np.linalg.norm(L[2:, 2:]),
    }
    # D-block of the F-contribution alone, scaled by 1/r^2 (finite limit)
    if r > 0:
        fmats = _hessian_stack(sys, domain, 0.0, base_pts) - hmats
        d0 = np.empty((2, 2))
        for j in range(2):
            bj = basis.column_loop(j)
            pts = loops.sample(bj, m)
            img = loops.from_samples(
                np.einsum("tij,tj->ti", fmats, pts), basis.modes)
            d0[:, j] = basis.coords(loops.inv_id_minus_laplace(img))[:2]
        d0 /= r**2
    else:
        d0 = np.zeros((2, 2))

    cond_A = np.linalg.cond(L[2:, 2:])
    # the D block vanishes identically when F has no effect (plane, r = 0)
    cond_D = np.linalg.cond(L[:2, :2]) if blocks["D"] > 1e-14 else 1.0
    if max(cond_A, cond_D) > cond_limit:
        raise SingularOperator(
            f"ill-conditioned reduced operator: cond(A)={cond_A:.3e}, "
            f"cond(D)={cond_D:.3e}")
    return OperatorReport(matrix=L, block_norms=blocks, d0_matrix=d0,
                          condition=float(np.linalg.cond(L)))


# ---------------------------------------------------------------------------
# reduced solve

def _linear_solver(op: OperatorReport):
    """Factorized solve; drops the D block when it decouples and vanishes
    (plane domain / r = 0), where the residual has no D component either."""
    bn = op.block_norms
    if max(bn["D"], bn["B"], bn["C"]) < 1e-14:
        lu = scipy.linalg.lu_factor(op.matrix[2:, 2:])

        def solve(res):
            step = np.zeros_like(res)
            step[2:] = scipy.linalg.lu_solve(lu, res[2:])
            return step

        return solve
    lu = scipy.linalg.lu_factor(op.matrix)
    return lambda res: scipy.linalg.lu_solve(lu, res)


def _diagnostics(sys, domain, r, frame, v, iters, contraction):
    u = frame.Z + v
    grad = grad_J_r(sys, domain, r, u)
    residual = loops.h1_norm(grad)
    phase = abs(loops.h1_inner(grad, frame.Zdot))
    tail = _spectral_tail(u)
    return ReducedSolution(r=r, v=v, u=u, residual_grad=residual,
                           phase_defect=phase, vnorm=loops.h1_norm(v),
                           iterations=iters, spectral_tail=tail,
                           contraction_estimate=contraction)


def _spectral_tail(u: Loop) -> float:
    """Relative H^1 mass carried by the top quarter of the mode range."""
    w = loops.h1_weights(u.modes)
    per_row = w * np.sum(u.coeffs**2, axis=1)
    cutoff = 2 * int(np.ceil(0.75 * u.modes)) + 1
    total = per_row.sum()
    return float(per_row[cutoff:].sum() / total) if total > 0 else 0.0


def _collision_ball(frame: LoopFrame) -> float:
    z = frame.Z.a(1).reshape(-1, 2)
    return 0.5 * core.min_separation(z)


def solve_reduced(sys: VortexSystem, domain: DomainModel, r: float,
                  frame: LoopFrame, params: SolverParams,
                  warm_start: Loop | None = None,
                  basis: XBasis | None = None,
                  operator: OperatorReport | None = None) -> ReducedSolution:
    """Solve P_X grad J_r(Z + v) = 0 for the correction v in X."""
    basis = basis or build_x_basis(frame)
    if operator is None and params.mode == "FixedPoint":
        operator = assemble_L_r(sys, domain, r, frame, basis=basis)

    v = warm_start.pad(params.modes) if warm_start is not None else \
        loops.zero_loop(sys.n, params.modes)
    y = basis.coords(v)
    eps_ball = _collision_ball(frame)

    if params.mode == "FixedPoint":
        solve = _linear_solver(operator)
        prev_step, contraction = None, float("nan")
        guard_strikes = 0
        for it in range(1, params.max_iter + 1):
            v = _filtered(basis.to_loop(y), params)
            res = basis.coords(grad_J_r(sys, domain, r, frame.Z + v,
                                        nodes=params.quad_nodes))
            step = -solve(res)
            y = y + step
            step_norm = np.linalg.norm(step)
            if prev_step is not None and prev_step > 1e-15:
                contraction = step_norm / prev_step
                if contraction > params.contraction_guard and step_norm > params.fp_tol:
                    guard_strikes += 1
                    if guard_strikes >= 3:
                        raise ContractionFailure(
                            f"contraction estimate {contraction:.3f} exceeds "
                            f"guard {params.contraction_guard} at r={r:.5g}")
                else:
                    guard_strikes = 0
            prev_step = step_norm
            if np.linalg.norm(y) > max(10 * eps_ball, 1e3):
                raise ContractionFailure(
                    f"iterates diverge at r={r:.5g} (|v| = {np.linalg.norm(y):.3e})")
            if step_norm <= params.fp_tol:
                break
        else:
            raise NoConvergence(
                f"fixed point not converged in {params.max_iter} iterations "
                f"at r={r:.5g} (last step {step_norm:.3e})")
        iters = it
    else:
        contraction = float("nan")
        for it in range(1, params.max_iter + 1):
            v = _filtered(basis.to_loop(y), params)
            grad = grad_J_r(sys, domain, r, frame.Z + v,
                            nodes=params.quad_nodes)
            res = basis.coords(grad)
            res_norm = np.linalg.norm(res)
            if res_norm <= params.newton_tol:
                break
            op = assemble_L_r(sys, domain, r, frame, basis=basis,
                              base=frame.Z + v)
            step = -_linear_solver(op)(res)
            # backtracking on the projected residual
            alpha = 1.0
            for _ in range(8):
                y_try = y + alpha * step
                v_try = _filtered(basis.to_loop(y_try), params)
                try:
                    r_try = np.linalg.norm(basis.coords(
                        grad_J_r(sys, domain, r, frame.Z + v_try,
                                 nodes=params.quad_nodes)))
                except (CollisionError, DomainExit):
                    r_try = np.inf
                if r_try < res_norm:
                    break
                alpha *= 0.5
            y = y + alpha * step
        else:
            raise NoConvergence(
                f"Newton not converged in {params.max_iter} iterations "
                f"at r={r:.5g} (residual {res_norm:.3e})")
        iters = it

    v = _filtered(basis.to_loop(y), params)
    sol = _diagnostics(sys, domain, r, frame, v, iters, contraction)
    tol = params.fp_tol if params.mode == "FixedPoint" else params.newton_tol
    if sol.residual_grad > 10 * max(tol, 1e-13) * max(1.0, sol.vnorm + 1.0):
        raise PhaseDefect(
            f"full gradient {sol.residual_grad:.3e} exceeds 10x the solver "
            f"tolerance at r={r:.5g}; the phase component did not vanish")
    return sol


def _filtered(v: Loop, params: SolverParams) -> Loop:
    if params.sigma is not None:
        return loops.sigma_project(np.asarray(params.sigma, dtype=int), v)
    return v


# ---------------------------------------------------------------------------
# continuation

def continue_path(sys: VortexSystem, domain: DomainModel, a0: np.ndarray,
                  frame: LoopFrame, params: SolverParams) -> ContinuationPath:
    """Sweep the r grid downward with warm starts; probe upward for r0."""
    if abs(sys.gamma_total) < 1e-14:
        raise ZeroTotalVorticity(
            "total vorticity vanishes: the reduction hypothesis fails")
    a0 = np.asarray(a0, dtype=float)
    work_domain = domain if np.allclose(a0, 0.0) else TranslatedDomain(domain, a0)

    basis = build_x_basis(frame)
    entries, failures = [], {}
    warm = None
    for r in params.r_grid():
        try:
            sol = solve_reduced(sys, work_domain, float(r), frame, params,
                                warm_start=warm, basis=basis)
            if sol.spectral_tail >= params.spectral_tail_tol:
                raise NoConvergence(
                    f"spectral tail {sol.spectral_tail:.3e} above "
                    f"{params.spectral_tail_tol:g} at r={r:.5g}")
            entries.append(sol)
            warm = sol.v
        except (ContractionFailure, NoConvergence, PhaseDefect, DomainExit,
                CollisionError, SingularOperator) as exc:
            failures[float(r)] = f"{type(exc).__name__}: {exc}"
    if not entries:
        raise EmptyPath("no grid point converged")

    # probe upward from the largest converged r to estimate the empirical r0
    ratio = (params.r_max / params.r_min) ** (1.0 / (params.r_points - 1))
    r0 = entries[0].r
    warm_up = entries[0].v
    r_probe = r0
    for _ in range(8):
        r_probe *= ratio
        try:
            sol = solve_reduced(sys, work_domain, r_probe, frame, params,
                                warm_start=warm_up, basis=basis)
            if sol.spectral_tail >= params.spectral_tail_tol:
                break
            r0, warm_up = r_probe, sol.v
        except (ContractionFailure, NoConvergence, PhaseDefect, DomainExit,
                CollisionError, SingularOperator):
            break
    return ContinuationPath(a0=a0, entries=entries, failures=failures,
                            r0_empirical=r0)


def unrescale(a0: np.ndarray, r: float, solution: ReducedSolution,
              samples: int, domain: DomainModel | None = None) -> PhysicalOrbit:
    """Physical orbit z(t) = a0 + r u(t/r^2), period 2 pi r^2."""
    a0 = np.asarray(a0, dtype=float)
    period = 2 * np.pi * r**2
    times = np.arange(samples) * (period / samples)
    phases = times / r**2
    u_vals = solution.u.eval(phases)
    pts = np.tile(a0, solution.u.n) + r * u_vals
    if domain is not None:
        z = pts.reshape(samples, -1, 2)
        if not np.all(domain.contains(z)):
            raise DomainExit("rescaled orbit leaves the domain")
    return PhysicalOrbit(a0=a0, r=r, period=period, times=times,
                         samples=pts, source=solution)


def local_uniqueness_probe(sys: VortexSystem, domain: DomainModel, r: float,
                           frame: LoopFrame, params: SolverParams,
                           solution: ReducedSolution,
                           thetas) -> dict:
    """Re-solve with time-shifted frames; the result must be the shifted v."""
    mismatches = {}
    for theta in thetas:
        shifted = LoopFrame(Z=loops.time_shift(theta, frame.Z),
                            Zdot=loops.time_shift(theta, frame.Zdot),
                            e1=frame.e1, e2=frame.e2)
        sol = solve_reduced(sys, domain, r, shifted, params)
        expected = loops.time_shift(theta, solution.v)
        mismatches[float(theta)] = loops.h1_norm(sol.v - expected)
    return {"mismatch": mismatches, "max": max(mismatches.values())}


# ---------------------------------------------------------------------------
# orbit persistence

def orbit_to_dict(sys: VortexSystem, domain: DomainModel, a0, omega_seed: float,
                  solution: ReducedSolution) -> dict:
    return {
        "schema_version": ORBIT_SCHEMA_VERSION,
        "system": {"gammas": list(map(float, sys.gammas))},
        "domain": {"variant": domain.variant, "params": domain.params()},
        "a0": list(map(float, np.asarray(a0, dtype=float))),
        "r": float(solution.r),
        "omega_seed": float(omega_seed),
        "loop": loops.loop_to_dict(solution.u),
        "diagnostics": {
            "residual_grad": solution.residual_grad,
            "phase_defect": solution.phase_defect,
            "vnorm": solution.vnorm,
            "iterations": solution.iterations,
        },
    }


def save_orbit(path: str, doc: dict) -> None:
    """Atomic write: temp file in the target directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            json.dump(doc, fh, indent=1)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_orbit(path: str) -> dict:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("schema_version") != ORBIT_SCHEMA_VERSION:
        raise ValueError(f"unsupported orbit schema {doc.get('schema_version')}")
    return doc
