"""Point-vortex Hamiltonians and domain Green-function regular parts.

The interaction energy of N vortices with strengths ``gammas`` splits into a
free-plane logarithmic part ``H0`` and a boundary correction ``F`` built from
the regular part ``g(w, z)`` of the domain's Green function.  The Robin
function is ``h(p) = g(p, p)``.  Both sums run over *ordered* index pairs, so
every unordered pair contributes twice and ``F`` keeps its diagonal
``gamma_k**2 * h(z_k)`` terms.

All evaluation functions broadcast over leading axes: a configuration is an
array of shape ``(..., 2N)`` holding the stacked planar positions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    BoundaryError,
    CollisionError,
    DomainError,
    LeftDomain,
    NoConvergence,
)

__all__ = [
    "J2",
    "COLLISION_TOL",
    "BOUNDARY_TOL",
    "VortexSystem",
    "Configuration",
    "DomainModel",
    "Plane",
    "UnitDisk",
    "HalfPlane",
    "SyntheticQuadratic",
    "TranslatedDomain",
    "domain_from_spec",
    "min_separation",
    "eval_H0",
    "grad_H0",
    "hess_H0",
    "eval_F",
    "grad_F",
    "hess_F",
    "eval_h",
    "grad_h",
    "hess_h",
    "eval_Hr",
    "grad_Hr",
    "vortex_rhs",
    "CriticalPoint",
    "find_critical_point_h",
]

# Standard symplectic 2x2 matrix, rows (0, 1), (-1, 0).
J2 = np.array([[0.0, 1.0], [-1.0, 0.0]])

COLLISION_TOL = 1e-12
BOUNDARY_TOL = 1e-14


@dataclass(frozen=True)
class VortexSystem:
    """Vorticities and the derived constant matrices of an N-vortex system."""

    gammas: np.ndarray

    def __post_init__(self):
        g = np.atleast_1d(np.asarray(self.gammas, dtype=float))
        if g.ndim != 1 or g.size == 0:
            raise ValueError("gammas must be a nonempty vector")
        if np.any(g == 0.0):
            raise ValueError("every vorticity must be nonzero")
        object.__setattr__(self, "gammas", g)

    @property
    def n(self) -> int:
        return self.gammas.size

    @property
    def gamma_total(self) -> float:
        return float(self.gammas.sum())

    def m_gamma_diag(self) -> np.ndarray:
        """Diagonal of M_Gamma: each vorticity repeated twice."""
        return np.repeat(self.gammas, 2)

    def m_gamma(self) -> np.ndarray:
        return np.diag(self.m_gamma_diag())

    def j_n(self) -> np.ndarray:
        """Block-diagonal symplectic matrix: N copies of J2."""
        return np.kron(np.eye(self.n), J2)


def _as_points(z):
    z = np.asarray(z, dtype=float)
    if z.shape[-1] % 2:
        raise ValueError("configuration length must be even")
    return z.reshape(z.shape[:-1] + (z.shape[-1] // 2, 2))


def min_separation(z) -> float:
    """Minimum pairwise distance over the (batched) configuration."""
    p = _as_points(z)
    n = p.shape[-2]
    if n < 2:
        return np.inf
    d = p[..., :, None, :] - p[..., None, :, :]
    dist2 = np.einsum("...x,...x->...", d, d)
    iu = np.triu_indices(n, 1)
    return float(np.sqrt(dist2[..., iu[0], iu[1]].min()))


@dataclass(frozen=True)
class Configuration:
    """A configuration z in R^{2N} with the blow-up scale r (r=0: plane)."""

    z: np.ndarray
    r: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "z", np.asarray(self.z, dtype=float).ravel())
        if self.r < 0:
            raise ValueError("scale r must be nonnegative")

    @property
    def n(self) -> int:
        return self.z.size // 2

    def min_separation(self) -> float:
        return min_separation(self.z)

    def is_valid(self, domain=None) -> bool:
        if self.min_separation() <= COLLISION_TOL:
            return False
        if self.r > 0 and domain is not None:
            return bool(np.all(domain.contains(_as_points(self.r * self.z))))
        return True


# ---------------------------------------------------------------------------
# Domain models
# ---------------------------------------------------------------------------


class DomainModel:
    """Regular part g of a hydrodynamic Green function and its derivatives.

    Subclasses provide ``g``, the gradient ``g_w`` in the first argument, the
    second derivatives ``g_ww`` and the mixed block ``g_wz`` with entries
    ``d^2 g / dw_a dz_b``.  All methods broadcast over leading axes of the
    two planar points ``w`` and ``z``.
    """

    variant = "abstract"

    def g(self, w, z):
        raise NotImplementedError

    def g_w(self, w, z):
        raise NotImplementedError

    def g_ww(self, w, z):
        raise NotImplementedError

    def g_wz(self, w, z):
        raise NotImplementedError

    def contains(self, p):
        """Membership predicate for points of shape (..., 2)."""
        raise NotImplementedError

    def boundary_gap(self, p):
        """Distance-like gap to the boundary; +inf for unbounded variants."""
        p = np.asarray(p, dtype=float)
        return np.full(p.shape[:-1], np.inf)

    def params(self) -> dict:
        return {}


class Plane(DomainModel):
    """The whole plane: no boundary, g identically zero."""

    variant = "plane"

    def g(self, w, z):
        w = np.asarray(w, dtype=float)
        z = np.asarray(z, dtype=float)
        return np.zeros(np.broadcast_shapes(w.shape[:-1], z.shape[:-1]))

    def g_w(self, w, z):
        shape = np.broadcast_shapes(np.shape(w), np.shape(z))
        return np.zeros(shape)

    def g_ww(self, w, z):
        shape = np.broadcast_shapes(np.shape(w), np.shape(z))
        return np.zeros(shape + (2,))

    g_wz = g_ww

    def contains(self, p):
        p = np.asarray(p, dtype=float)
        return np.ones(p.shape[:-1], dtype=bool)


class UnitDisk(DomainModel):
    """Open unit disk with the method-of-images regular part.

    g(w, z) = -(1/4pi) * log(|w|^2 |z|^2 - 2 w.z + 1), which is symmetric and
    gives the Robin function h(p) = -(1/2pi) * log(1 - |p|^2).
    """

    variant = "disk"

    @staticmethod
    def _q(w, z):
        w = np.asarray(w, dtype=float)
        z = np.asarray(z, dtype=float)
        w2 = np.einsum("...x,...x->...", w, w)
        z2 = np.einsum("...x,...x->...", z, z)
        wz = np.einsum("...x,...x->...", w, z)
        return w2 * z2 - 2.0 * wz + 1.0

    def g(self, w, z):
        return -np.log(self._q(w, z)) / (4.0 * np.pi)

    def g_w(self, w, z):
        w = np.asarray(w, dtype=float)
        z = np.asarray(z, dtype=float)
        q = self._q(w, z)
        z2 = np.einsum("...x,...x->...", z, z)
        q_w = 2.0 * z2[..., None] * w - 2.0 * z
        return -q_w / (4.0 * np.pi * q[..., None])

    def g_ww(self, w, z):
        w = np.asarray(w, dtype=float)
        z = np.asarray(z, dtype=float)
        q = self._q(w, z)[..., None, None]
        z2 = np.einsum("...x,...x->...", z, z)
        q_w = 2.0 * z2[..., None] * w - 2.0 * z
        q_ww = 2.0 * z2[..., None, None] * np.eye(2)
        outer = q_w[..., :, None] * q_w[..., None, :]
        return -(q_ww / q - outer / q**2) / (4.0 * np.pi)

    def g_wz(self, w, z):
        w = np.asarray(w, dtype=float)
        z = np.asarray(z, dtype=float)
        q = self._q(w, z)[..., None, None]
        z2 = np.einsum("...x,...x->...", z, z)
        w2 = np.einsum("...x,...x->...", w, w)
        q_w = 2.0 * z2[..., None] * w - 2.0 * z
        q_z = 2.0 * w2[..., None] * z - 2.0 * w
        # d(q_w)_a / dz_b = 4 w_a z_b - 2 delta_ab
        q_wz = 4.0 * w[..., :, None] * z[..., None, :] - 2.0 * np.eye(2)
        outer = q_w[..., :, None] * q_z[..., None, :]
        return -(q_wz / q - outer / q**2) / (4.0 * np.pi)

    def contains(self, p):
        p = np.asarray(p, dtype=float)
        return np.einsum("...x,...x->...", p, p) < 1.0

    def boundary_gap(self, p):
        p = np.asarray(p, dtype=float)
        return 1.0 - np.einsum("...x,...x->...", p, p)


class HalfPlane(DomainModel):
    """Open upper half-plane; the image vortex is the mirror across y = 0."""

    variant = "halfplane"

    _R = np.array([[1.0, 0.0], [0.0, -1.0]])

    def _d(self, w, z):
        w = np.asarray(w, dtype=float)
        z = np.asarray(z, dtype=float)
        return w - z @ self._R

    def g(self, w, z):
        d = self._d(w, z)
        d2 = np.einsum("...x,...x->...", d, d)
        return -np.log(d2) / (4.0 * np.pi)

    def g_w(self, w, z):
        d = self._d(w, z)
        d2 = np.einsum("...x,...x->...", d, d)
        return -d / (2.0 * np.pi * d2[..., None])

    def g_ww(self, w, z):
        d = self._d(w, z)
        d2 = np.einsum("...x,...x->...", d, d)[..., None, None]
        outer = d[..., :, None] * d[..., None, :]
        return -(np.eye(2) / d2 - 2.0 * outer / d2**2) / (2.0 * np.pi)

    def g_wz(self, w, z):
        # d depends on z through -R z, so the mixed block is -g_ww @ R.
        return -self.g_ww(w, z) @ self._R

    def contains(self, p):
        p = np.asarray(p, dtype=float)
        return p[..., 1] > 0.0

    def boundary_gap(self, p):
        p = np.asarray(p, dtype=float)
        return p[..., 1]


class SyntheticQuadratic(DomainModel):
    """Synthetic regular part g(w, z) = w^T A z on the whole plane.

    Useful as an exactly-solvable test family: h(p) = p^T A p, and all
    second derivatives are constant.
    """

    variant = "quadratic"

    def __init__(self, a_matrix=None):
        a = np.eye(2) if a_matrix is None else np.asarray(a_matrix, dtype=float)
        if a.shape != (2, 2) or not np.allclose(a, a.T):
            raise ValueError("A must be a symmetric 2x2 matrix")
        self.a_matrix = a

    def g(self, w, z):
        w = np.asarray(w, dtype=float)
        z = np.asarray(z, dtype=float)
        return np.einsum("...x,xy,...y->...", w, self.a_matrix, z)

    def g_w(self, w, z):
        z = np.asarray(z, dtype=float)
        w = np.asarray(w, dtype=float)
        out = z @ self.a_matrix.T
        return np.broadcast_to(out, np.broadcast_shapes(w.shape, out.shape)).copy()

    def g_ww(self, w, z):
        shape = np.broadcast_shapes(np.shape(w), np.shape(z))
        return np.zeros(shape + (2,))

    def g_wz(self, w, z):
        shape = np.broadcast_shapes(np.shape(w), np.shape(z))
        return np.broadcast_to(self.a_matrix, shape + (2,)).copy()

    def contains(self, p):
        p = np.asarray(p, dtype=float)
        return np.ones(p.shape[:-1], dtype=bool)

    def params(self) -> dict:
        return {"a_matrix": self.a_matrix.tolist()}


class TranslatedDomain(DomainModel):
    """View of a domain recentred so that a given point becomes the origin."""

    def __init__(self, base: DomainModel, offset):
        self.base = base
        self.offset = np.asarray(offset, dtype=float).reshape(2)
        self.variant = base.variant + "+offset"

    def g(self, w, z):
        return self.base.g(np.asarray(w) + self.offset, np.asarray(z) + self.offset)

    def g_w(self, w, z):
        return self.base.g_w(np.asarray(w) + self.offset, np.asarray(z) + self.offset)

    def g_ww(self, w, z):
        return self.base.g_ww(np.asarray(w) + self.offset, np.asarray(z) + self.offset)

    def g_wz(self, w, z):
        return self.base.g_wz(np.asarray(w) + self.offset, np.asarray(z) + self.offset)

    def contains(self, p):
        return self.base.contains(np.asarray(p) + self.offset)

    def boundary_gap(self, p):
        return self.base.boundary_gap(np.asarray(p) + self.offset)

    def params(self) -> dict:
        d = dict(self.base.params())
        d["offset"] = self.offset.tolist()
        return d


def domain_from_spec(variant: str, params: dict | None = None) -> DomainModel:
    """Build a domain from its serialized (variant, params) description."""
    params = params or {}
    variant = variant.lower()
    if variant == "plane":
        return Plane()
    if variant in ("disk", "unitdisk"):
        return UnitDisk()
    if variant == "halfplane":
        return HalfPlane()
    if variant == "quadratic":
        return SyntheticQuadratic(params.get("a_matrix"))
    raise ValueError(f"unknown domain variant: {variant!r}")


# ---------------------------------------------------------------------------
# Hamiltonians
# ---------------------------------------------------------------------------


def _check_separation(p, tol=COLLISION_TOL):
    n = p.shape[-2]
    if n < 2:
        return
    d = p[..., :, None, :] - p[..., None, :, :]
    dist2 = np.einsum("...x,...x->...", d, d)
    iu = np.triu_indices(n, 1)
    m = dist2[..., iu[0], iu[1]].min()
    if m <= tol * tol:
        raise CollisionError(f"minimum separation {np.sqrt(m):.3e} <= {tol:.0e}")


def _check_membership(domain, p, what="configuration"):
    inside = domain.contains(p)
    if not np.all(inside):
        raise DomainError(f"{what} has points outside the domain")


def eval_H0(sys: VortexSystem, z):
    """Logarithmic pair interaction, summed over ordered pairs j != k."""
    p = _as_points(z)
    _check_separation(p)
    d = p[..., :, None, :] - p[..., None, :, :]
    dist2 = np.einsum("...x,...x->...", d, d)
    gg = np.outer(sys.gammas, sys.gammas)
    iu = np.triu_indices(sys.n, 1)
    terms = gg[iu] * np.log(dist2[..., iu[0], iu[1]])
    # each unordered pair appears twice; log|d| = log(d^2)/2
    return -terms.sum(axis=-1) / (2.0 * np.pi)


def grad_H0(sys: VortexSystem, z):
    """Gradient of ``eval_H0``; block k is -(G_k/pi) sum_j G_j d_kj/|d_kj|^2."""
    p = _as_points(z)
    _check_separation(p)
    d = p[..., :, None, :] - p[..., None, :, :]
    dist2 = np.einsum("...x,...x->...", d, d)
    idx = np.arange(sys.n)
    d[..., idx, idx, :] = 0.0
    dist2[..., idx, idx] = 1.0
    field = np.einsum("j,...kjx->...kx", sys.gammas, d / dist2[..., None])
    out = -(sys.gammas[:, None] / np.pi) * field
    return out.reshape(np.asarray(z, dtype=float).shape)


def hess_H0(sys: VortexSystem, z):
    """Dense symmetric Hessian of ``eval_H0``, shape (..., 2N, 2N)."""
    p = _as_points(z)
    _check_separation(p)
    n = sys.n
    d = p[..., :, None, :] - p[..., None, :, :]
    dist2 = np.einsum("...x,...x->...", d, d)
    dist2[..., np.arange(n), np.arange(n)] = 1.0
    # K(d) = I/|d|^2 - 2 d d^T / |d|^4, the Jacobian of d/|d|^2
    K = np.eye(2) / dist2[..., None, None] - 2.0 * (
        d[..., :, None] * d[..., None, :]
    ) / (dist2**2)[..., None, None]
    gg = np.outer(sys.gammas, sys.gammas)
    batch = p.shape[:-2]
    H = np.zeros(batch + (n, 2, n, 2))
    off = (gg[..., None, None] / np.pi) * K
    idx = np.arange(n)
    # off has axes (..., k, j, a, b); interleave to (..., k, a, j, b)
    H[..., :, :, :, :] = np.moveaxis(off, -2, -3)
    # zero the (yet wrong) diagonal blocks, then set them from the row sums
    H[..., idx, :, idx, :] = 0.0
    mask = 1.0 - np.eye(n)
    diag = -np.einsum("...kjab,kj->...kab", off, mask)
    H[..., idx, :, idx, :] = np.moveaxis(diag, -3, 0) if batch else diag
    full = H.reshape(batch + (2 * n, 2 * n))
    return 0.5 * (full + np.swapaxes(full, -1, -2))


def eval_F(sys: VortexSystem, domain: DomainModel, z):
    """Boundary interaction: full double sum of G_j G_k g(z_j, z_k)."""
    p = _as_points(z)
    _check_membership(domain, p)
    gvals = domain.g(p[..., :, None, :], p[..., None, :, :])
    return np.einsum("j,k,...jk->...", sys.gammas, sys.gammas, gvals)


def grad_F(sys: VortexSystem, domain: DomainModel, z):
    p = _as_points(z)
    _check_membership(domain, p)
    gw = domain.g_w(p[..., :, None, :], p[..., None, :, :])
    out = 2.0 * sys.gammas[:, None] * np.einsum("k,...jkx->...jx", sys.gammas, gw)
    return out.reshape(np.asarray(z, dtype=float).shape)


def hess_F(sys: VortexSystem, domain: DomainModel, z):
    """Dense symmetric Hessian of ``eval_F``, shape (..., 2N, 2N)."""
    p = _as_points(z)
    _check_membership(domain, p)
    n = sys.n
    wp = p[..., :, None, :]
    zp = p[..., None, :, :]
    gww = domain.g_ww(wp, zp)
    gwz = domain.g_wz(wp, zp)
    gg = np.outer(sys.gammas, sys.gammas)
    batch = p.shape[:-2]
    idx = np.arange(n)

    blocks = 2.0 * gg[..., None, None] * gwz
    Hfull = np.zeros(batch + (n, 2, n, 2))
    Hfull[...] = np.moveaxis(blocks, -2, -3)
    Hfull[..., idx, :, idx, :] = 0.0

    # diagonal blocks: cross terms with the other vortices plus the Robin term
    mask = 1.0 - np.eye(n)
    cross = 2.0 * np.einsum("jk,...jkab->...jab", gg * mask, gww)
    gwz_d = gwz[..., idx, idx, :, :]
    gww_d = gww[..., idx, idx, :, :]
    hpp = 2.0 * (gww_d + 0.5 * (gwz_d + np.swapaxes(gwz_d, -1, -2)))
    diag = cross + (sys.gammas**2)[:, None, None] * hpp
    Hfull[..., idx, :, idx, :] = np.moveaxis(diag, -3, 0) if batch else diag

    full = Hfull.reshape(batch + (2 * n, 2 * n))
    return 0.5 * (full + np.swapaxes(full, -1, -2))


# ---------------------------------------------------------------------------
# Robin function
# ---------------------------------------------------------------------------


def _check_point(domain, p):
    p = np.asarray(p, dtype=float)
    if not np.all(domain.contains(p)):
        raise DomainError("point outside the domain")
    gap = domain.boundary_gap(p)
    if np.any(gap < BOUNDARY_TOL):
        raise BoundaryError("point too close to the boundary")
    return p


def eval_h(domain: DomainModel, p):
    """Robin function h(p) = g(p, p)."""
    p = _check_point(domain, p)
    return domain.g(p, p)


def grad_h(domain: DomainModel, p):
    """Gradient of the Robin function: 2 g_w(p, p) by symmetry of g."""
    p = _check_point(domain, p)
    return 2.0 * domain.g_w(p, p)


def hess_h(domain: DomainModel, p):
    p = _check_point(domain, p)
    gwz = domain.g_wz(p, p)
    return 2.0 * (domain.g_ww(p, p) + 0.5 * (gwz + np.swapaxes(gwz, -1, -2)))


# ---------------------------------------------------------------------------
# Blown-up Hamiltonian H_r and vector fields
# ---------------------------------------------------------------------------


def _check_Or(domain, u, r):
    p = _as_points(u)
    _check_separation(p)
    if r > 0:
        _check_membership(domain, r * p, "scaled configuration")


def eval_Hr(sys: VortexSystem, domain: DomainModel, r: float, u):
    """Rescaled Hamiltonian H_r(u) = H0(u) - F(ru) + F(0)."""
    if r < 0:
        raise ValueError("r must be nonnegative")
    _check_Or(domain, u, r)
    u = np.asarray(u, dtype=float)
    if r == 0:
        return eval_H0(sys, u)
    f0 = eval_F(sys, domain, np.zeros_like(u))
    return eval_H0(sys, u) - eval_F(sys, domain, r * u) + f0


def grad_Hr(sys: VortexSystem, domain: DomainModel, r: float, u):
    if r < 0:
        raise ValueError("r must be nonnegative")
    _check_Or(domain, u, r)
    u = np.asarray(u, dtype=float)
    out = grad_H0(sys, u)
    if r > 0:
        out = out - r * grad_F(sys, domain, r * u)
    return out


def vortex_rhs(sys: VortexSystem, domain: DomainModel, z, r: float = 0.0,
               physical: bool = False):
    """Right-hand side of the vortex equations.

    ``physical=True`` evaluates the un-rescaled field (1/G_k) J grad_k (H0-F)
    at actual domain positions; otherwise ``r`` selects H0 (r=0) or H_r.
    """
    z = np.asarray(z, dtype=float)
    if physical:
        p = _as_points(z)
        _check_separation(p)
        _check_membership(domain, p)
        grad = grad_H0(sys, z) - grad_F(sys, domain, z)
    else:
        grad = grad_Hr(sys, domain, r, z)
    blocks = grad.reshape(grad.shape[:-1] + (sys.n, 2))
    out = (blocks @ J2.T) / sys.gammas[:, None]
    return out.reshape(z.shape)


# ---------------------------------------------------------------------------
# Robin critical points
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CriticalPoint:
    point: np.ndarray
    hessian: np.ndarray
    nondegenerate: bool


def find_critical_point_h(domain: DomainModel, guess, tol: float = 1e-10,
                          max_iter: int = 50, deg_tol: float = 1e-10) -> CriticalPoint:
    """Newton iteration on grad h with step halving to stay inside the domain."""
    p = np.asarray(guess, dtype=float).reshape(2)
    if not domain.contains(p):
        raise DomainError("initial guess outside the domain")
    for _ in range(max_iter):
        gh = grad_h(domain, p)
        if np.linalg.norm(gh) <= tol:
            hh = hess_h(domain, p)
            nondeg = abs(np.linalg.det(hh)) > deg_tol
            return CriticalPoint(point=p, hessian=hh, nondegenerate=nondeg)
        hh = hess_h(domain, p)
        try:
            step = np.linalg.solve(hh, -gh)
        except np.linalg.LinAlgError as exc:
            raise NoConvergence("singular Robin Hessian in Newton step") from exc
        for _ in range(20):
            cand = p + step
            if domain.contains(cand):
                break
            step = 0.5 * step
        else:
            raise LeftDomain("Newton step left the domain despite damping")
        p = cand
    raise NoConvergence(f"no critical point after {max_iter} iterations")
