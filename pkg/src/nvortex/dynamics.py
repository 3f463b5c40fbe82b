"""Direct time integration of the vortex equations and orbit validation.

Wraps scipy's adaptive Dormand-Prince integrators with per-step validity
guards (collision and boundary approach stop the run with the failure
time), conserved-quantity drift reports, and a period-closure check used
to validate output of the reduction solver independently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from . import core
from .core import DomainModel, VortexSystem
from .errors import (BoundaryApproach, BoundaryError, CollisionApproach,
                     CollisionError, DomainError, MinStepReached)
from .reduction import PhysicalOrbit

COLLISION_GUARD = 1e-9
BOUNDARY_GUARD = 1e-9


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (len(times), 2N)
    mode: str

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("trajectory times must be strictly increasing")

    @property
    def initial(self) -> np.ndarray:
        return self.states[0]

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def min_separation(self) -> float:
        z = self.states.reshape(len(self.times), -1, 2)
        d = z[:, :, None, :] - z[:, None, :, :]
        dist = np.linalg.norm(d, axis=-1)
        idx = np.arange(z.shape[1])
        dist[:, idx, idx] = np.inf
        return float(dist.min())


def _rhs(sys: VortexSystem, domain: DomainModel, mode: str, r: float):
    if mode == "physical":
        return lambda t, z: core.vortex_rhs(sys, domain, z, physical=True)
    if mode == "rescaled":
        return lambda t, z: core.vortex_rhs(sys, domain, z, r=r)
    if mode == "plane":
        return lambda t, z: core.vortex_rhs(sys, core.Plane(), z, r=0.0)
    raise ValueError(f"unknown integration mode {mode!r}")


def _events(sys: VortexSystem, domain: DomainModel, mode: str, r: float,
            collision_guard: float = COLLISION_GUARD,
            boundary_guard: float = BOUNDARY_GUARD):
    def collision(t, z):
        return core.min_separation(z) - collision_guard

    collision.terminal = True
    collision.direction = -1
    events = [collision]

    if mode == "physical" and np.isfinite(domain.boundary_gap(np.zeros(2))):
        def boundary(t, z):
            return float(np.min(domain.boundary_gap(z.reshape(-1, 2)))) \
                - boundary_guard

        boundary.terminal = True
        boundary.direction = -1
        events.append(boundary)
    return events


def integrate(sys: VortexSystem, domain: DomainModel, mode: str,
              z0: np.ndarray, T: float, rtol: float = 1e-10,
              atol: float = 1e-12, r: float = 0.0,
              t_eval: np.ndarray | None = None,
              collision_guard: float = COLLISION_GUARD,
              boundary_guard: float = BOUNDARY_GUARD) -> Trajectory:
    """Integrate one of the vortex systems over [0, T]."""
    z0 = np.asarray(z0, dtype=float).ravel()
    if core.min_separation(z0) <= collision_guard:
        raise CollisionApproach("initial state within the collision guard",
                                t=0.0)
    if mode == "physical":
        gap = float(np.min(domain.boundary_gap(z0.reshape(-1, 2))))
        if gap <= boundary_guard:
            raise BoundaryApproach("initial state within the boundary guard",
                                   t=0.0)
    last_t = [0.0]
    base_rhs = _rhs(sys, domain, mode, r)

    def rhs(t, z):
        last_t[0] = t
        return base_rhs(t, z)

    try:
        sol = solve_ivp(rhs, (0.0, T), z0,
                        method="DOP853", rtol=rtol, atol=atol,
                        events=_events(sys, domain, mode, r,
                                       collision_guard, boundary_guard),
                        t_eval=t_eval, dense_output=False)
    except CollisionError as exc:
        raise CollisionApproach(str(exc), t=last_t[0]) from exc
    except (DomainError, BoundaryError) as exc:
        raise BoundaryApproach(str(exc), t=last_t[0]) from exc
    if sol.status == 1:  # a terminal event fired
        which = next(i for i, te in enumerate(sol.t_events) if len(te))
        t_fail = float(sol.t_events[which][0])
        if which == 0:
            raise CollisionApproach(
                f"vortices within {COLLISION_GUARD:g} of collision", t=t_fail)
        raise BoundaryApproach(
            f"vortex within {BOUNDARY_GUARD:g} of the boundary", t=t_fail)
    if not sol.success:
        raise MinStepReached(sol.message, t=float(sol.t[-1]))
    times, states = sol.t, sol.y.T
    if times[0] == times[-1] or len(times) < 2:
        times = np.array([0.0, T])
        states = np.vstack([z0, states[-1]])
    return Trajectory(times=times, states=states, mode=mode)


def _energy(sys: VortexSystem, domain: DomainModel, mode: str, r: float,
            states: np.ndarray) -> np.ndarray:
    if mode == "physical":
        return core.eval_H0(sys, states) - core.eval_F(sys, domain, states)
    if mode == "rescaled":
        return core.eval_Hr(sys, domain, r, states)
    return core.eval_H0(sys, states)


def invariants_along(sys: VortexSystem, domain: DomainModel,
                     traj: Trajectory, r: float = 0.0) -> dict:
    """Max drift of the conserved quantities along a trajectory."""
    if len(traj.times) == 0:
        return {"energy_drift": 0.0}
    energy = _energy(sys, domain, traj.mode, r, traj.states)
    report = {"energy_drift": float(np.max(np.abs(energy - energy[0])))}
    if traj.mode == "plane":
        z = traj.states.reshape(len(traj.times), -1, 2)
        cov = np.einsum("k,tkx->tx", sys.gammas, z)
        imp = np.einsum("k,tk->t", sys.gammas, np.sum(z**2, axis=-1))
        report["center_of_vorticity_drift"] = float(
            np.max(np.linalg.norm(cov - cov[0], axis=-1)))
        report["angular_impulse_drift"] = float(np.max(np.abs(imp - imp[0])))
    return report


def validate_orbit(sys: VortexSystem, domain: DomainModel,
                   orbit: PhysicalOrbit, rtol: float = 1e-10) -> dict:
    """Re-integrate the physical system over one period from sample 0."""
    traj = integrate(sys, domain, "physical", orbit.samples[0], orbit.period,
                     rtol=rtol, atol=rtol * 1e-2,
                     t_eval=np.append(orbit.times, orbit.period))
    closure = float(np.linalg.norm(traj.states[-1] - orbit.samples[0]))
    defect = float(np.max(np.linalg.norm(
        traj.states[: len(orbit.times)] - orbit.samples, axis=-1)))
    return {"closure_error": closure, "max_pointwise_defect": defect}
