"""Rigidly rotating vortex configurations and their Floquet analysis.

A relative equilibrium is a configuration z that rotates rigidly,
Z(t) = e^{-omega J t} z applied blockwise, and solves the free-plane system.
Constructors cover the co-rotating pair, the equilateral triangle and the
regular N-gon of identical vortices; each output is validated through its
defining residual.  Nondegeneracy is certified by the geometric multiplicity
of the Floquet multiplier 1 of the linearized periodic system.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import J2, VortexSystem, grad_H0, hess_H0
from .errors import ZeroTotalVorticity

__all__ = [
    "RelativeEquilibrium",
    "MonodromyReport",
    "TriangleConditions",
    "make_pair",
    "make_triangle",
    "make_thomson",
    "normalize_period",
    "residual_HS0",
    "monodromy",
    "triangle_conditions",
]


def _rot(angle: float) -> np.ndarray:
    """Counter-clockwise rotation e^{-J angle} acting on column points."""
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class RelativeEquilibrium:
    """A rigidly rotating solution Z(t) = e^{-omega J t} z of the plane system."""

    sys: VortexSystem
    z: np.ndarray
    omega: float

    def __post_init__(self):
        object.__setattr__(self, "z", np.asarray(self.z, dtype=float).ravel())
        if self.omega == 0.0:
            raise ValueError("angular velocity must be nonzero")
        if self.z.size != 2 * self.sys.n:
            raise ValueError("configuration size does not match the system")

    @property
    def period(self) -> float:
        return 2.0 * np.pi / abs(self.omega)

    def config_at(self, t: float) -> np.ndarray:
        """Configuration at time t (blockwise rotation by omega * t)."""
        R = _rot(self.omega * t)
        return (self.z.reshape(-1, 2) @ R.T).ravel()

    def zdot_at(self, t: float) -> np.ndarray:
        """Velocity at time t, i.e. -omega J applied blockwise."""
        blocks = self.config_at(t).reshape(-1, 2)
        return (-self.omega * blocks @ J2.T).ravel()

    def center_of_vorticity(self) -> np.ndarray:
        return (self.sys.gammas[:, None] * self.z.reshape(-1, 2)).sum(axis=0)


def residual_HS0(eq: RelativeEquilibrium) -> float:
    """Max block norm of Gamma_k Zdot_k(0) - J grad_k H0(z)."""
    grad = grad_H0(eq.sys, eq.z).reshape(-1, 2)
    lhs = eq.sys.gammas[:, None] * eq.zdot_at(0.0).reshape(-1, 2)
    rhs = grad @ J2.T
    return float(np.linalg.norm(lhs - rhs, axis=1).max())


def make_pair(gamma1: float, gamma2: float, separation: float) -> RelativeEquilibrium:
    """Two vortices rotating about their center of vorticity at the origin."""
    if gamma1 == 0 or gamma2 == 0:
        raise ValueError("vorticities must be nonzero")
    if separation <= 0:
        raise ValueError("separation must be positive")
    total = gamma1 + gamma2
    if total == 0:
        raise ZeroTotalVorticity("a zero-sum pair translates instead of rotating")
    z1 = np.array([gamma2 * separation / total, 0.0])
    z2 = np.array([-gamma1 * separation / total, 0.0])
    omega = total / (np.pi * separation**2)
    return RelativeEquilibrium(
        sys=VortexSystem([gamma1, gamma2]),
        z=np.concatenate([z1, z2]),
        omega=omega,
    )


def make_triangle(gamma1: float, gamma2: float, gamma3: float,
                  side: float) -> RelativeEquilibrium:
    """Three vortices on an equilateral triangle, vorticity center at 0.

    The angular velocity is (gamma1+gamma2+gamma3) / (pi * side^2), which the
    residual check validates directly against the equations of motion.
    """
    gammas = np.array([gamma1, gamma2, gamma3], dtype=float)
    if np.any(gammas == 0):
        raise ValueError("vorticities must be nonzero")
    if side <= 0:
        raise ValueError("side must be positive")
    total = gammas.sum()
    if total == 0:
        raise ZeroTotalVorticity("equilateral triangle needs nonzero total vorticity")
    # unit-circumradius triangle, scaled so the side is as requested
    angles = 2.0 * np.pi * np.arange(3) / 3.0
    verts = (side / np.sqrt(3.0)) * np.column_stack([np.cos(angles), np.sin(angles)])
    verts -= (gammas[:, None] * verts).sum(axis=0) / total
    omega = total / (np.pi * side**2)
    return RelativeEquilibrium(sys=VortexSystem(gammas), z=verts.ravel(), omega=omega)


def make_thomson(n: int, gamma: float, radius: float) -> RelativeEquilibrium:
    """N identical vortices on a regular N-gon of the given radius."""
    if n < 2:
        raise ValueError("need at least two vortices")
    if gamma == 0:
        raise ValueError("vorticity must be nonzero")
    if radius <= 0:
        raise ValueError("radius must be positive")
    angles = 2.0 * np.pi * np.arange(n) / n
    verts = radius * np.column_stack([np.cos(angles), np.sin(angles)])
    omega = gamma * (n - 1) / (2.0 * np.pi * radius**2)
    return RelativeEquilibrium(
        sys=VortexSystem(np.full(n, float(gamma))), z=verts.ravel(), omega=omega
    )


def normalize_period(eq: RelativeEquilibrium) -> RelativeEquilibrium:
    """Rescale to |omega| = 1 (2pi-periodic); idempotent.

    Scaling the configuration by sqrt|omega| divides the angular velocity of
    the logarithmic interaction by |omega|.
    """
    if abs(eq.omega) == 1.0:
        return eq
    scale = np.sqrt(abs(eq.omega))
    return RelativeEquilibrium(
        sys=eq.sys, z=scale * eq.z, omega=float(np.sign(eq.omega))
    )


@dataclass(frozen=True)
class MonodromyReport:
    matrix: np.ndarray
    multipliers: np.ndarray
    kernel_dim: int
    nondegenerate: bool
    singular_values: np.ndarray


def monodromy(eq: RelativeEquilibrium, steps: int = 2000,
              svd_tol: float = 1e-6) -> MonodromyReport:
    """Monodromy of the linearized system over one period of a normalized
    equilibrium.

    Integrates Wdot = M_Gamma^{-1} J_N H0''(Z(t)) W over [0, 2pi] with
    fixed-step RK4.  The coefficient matrix is evaluated through the rigid
    rotation identity H0''(Z(t)) = R(t) H0''(z) R(t)^T.  Nondegeneracy means
    the multiplier-1 eigenspace is exactly three-dimensional: two
    translations plus the phase direction.
    """
    if abs(abs(eq.omega) - 1.0) > 1e-9:
        raise ValueError("monodromy expects a normalized equilibrium; "
                         "call normalize_period first")
    n = eq.sys.n
    dim = 2 * n
    H = hess_H0(eq.sys, eq.z)
    minv = 1.0 / eq.sys.m_gamma_diag()
    jn = eq.sys.j_n()
    eye_n = np.eye(n)

    def coeff(t):
        R = np.kron(eye_n, _rot(eq.omega * t))
        return minv[:, None] * (jn @ (R @ H @ R.T))

    W = np.eye(dim)
    h = 2.0 * np.pi / steps
    for i in range(steps):
        t = i * h
        k1 = coeff(t) @ W
        k2 = coeff(t + 0.5 * h) @ (W + 0.5 * h * k1)
        k3 = coeff(t + 0.5 * h) @ (W + 0.5 * h * k2)
        k4 = coeff(t + h) @ (W + h * k3)
        W = W + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    sv = np.linalg.svd(W - np.eye(dim), compute_uv=False)
    kernel_dim = int(np.count_nonzero(sv < svd_tol * sv[0]))
    return MonodromyReport(
        matrix=W,
        multipliers=np.linalg.eigvals(W),
        kernel_dim=kernel_dim,
        nondegenerate=(kernel_dim == 3),
        singular_values=sv,
    )


@dataclass(frozen=True)
class TriangleConditions:
    gamma_ok: bool
    L_ok: bool
    L_neq_sumsq: bool
    gamma: float
    L: float
    sumsq: float

    @property
    def predicted_nondegenerate(self) -> bool:
        return self.gamma_ok and self.L_ok and self.L_neq_sumsq


def triangle_conditions(gamma1: float, gamma2: float, gamma3: float,
                        tol: float = 1e-9) -> TriangleConditions:
    """Algebraic nondegeneracy conditions for the equilateral triangle.

    L is the total vortex angular momentum gamma1*gamma2 + gamma1*gamma3 +
    gamma2*gamma3; the triangle is predicted nondegenerate when the total
    vorticity and L are nonzero and L differs from the sum of squares.
    """
    if gamma1 == 0 or gamma2 == 0 or gamma3 == 0:
        raise ValueError("vorticities must be nonzero")
    total = gamma1 + gamma2 + gamma3
    L = gamma1 * gamma2 + gamma1 * gamma3 + gamma2 * gamma3
    sumsq = gamma1**2 + gamma2**2 + gamma3**2
    return TriangleConditions(
        gamma_ok=abs(total) > tol,
        L_ok=abs(L) > tol,
        L_neq_sumsq=abs(L - sumsq) > tol,
        gamma=total,
        L=L,
        sumsq=sumsq,
    )
