"""Adaptive time integration of the coupled equations of motion.

This is diagnostic plumbing, not part of the variational construction:
trajectories from here cross-check curves produced by the action
minimisers.  Shooting along the separatrix is hopeless over long spans
(the torus is hyperbolic), so validation of long curves goes through
discrete Euler-Lagrange residuals instead; the integrator is only
trusted over short horizons.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .errors import IntegrationError
from .model import PhasePoint, SystemParams, eom_rhs


def pendulum_energy(point: PhasePoint) -> float:
    """Pendulum first integral qdot^2/2 + cos q - 1 (zero on the separatrix)."""
    return 0.5 * point.qdot**2 + math.cos(point.q) - 1.0


def rotor_energy(point: PhasePoint) -> float:
    """Rotor first integral Qdot^2/2, conserved at mu = 0."""
    return 0.5 * point.Qdot**2


@dataclass
class Trajectory:
    """Integrator output sampled at requested times.

    states has one row (q, qdot, Q, Qdot) per entry of times; rtol/atol
    record the tolerances the run used.
    """

    times: np.ndarray
    states: np.ndarray
    rtol: float
    atol: float
    nfev: int = 0

    def __len__(self) -> int:
        return len(self.times)

    def point(self, i: int) -> PhasePoint:
        q, qdot, Q, Qdot = self.states[i]
        return PhasePoint(t=float(self.times[i]), q=q, qdot=qdot, Q=Q, Qdot=Qdot)

    def points(self) -> list[PhasePoint]:
        return [self.point(i) for i in range(len(self))]

    def to_csv(self, path) -> None:
        from .records import write_csv

        rows = np.column_stack([self.times, self.states])
        write_csv(path, ["t", "q", "qdot", "Q", "Qdot"], rows)


def integrate(
    start: PhasePoint,
    t_end: float,
    s: SystemParams,
    rtol: float = 1e-13,
    atol: float = 1e-13,
    t_eval=None,
    method: str = "DOP853",
    max_step: float = math.inf,
) -> Trajectory:
    """Integrate the equations of motion from `start` to t_end.

    Integrates backward when t_end < start.t.  `t_eval` requests dense
    output at specific times (defaults to 257 uniform samples).  Raises
    IntegrationError when the stepper fails or produces non-finite
    values.
    """
    t0 = start.t
    if t_eval is None:
        t_eval = np.linspace(t0, t_end, 257)
    else:
        t_eval = np.asarray(t_eval, dtype=float)

    sol = solve_ivp(
        eom_rhs,
        (t0, t_end),
        start.as_array(),
        method=method,
        t_eval=t_eval,
        rtol=rtol,
        atol=atol,
        max_step=max_step,
        args=(s,),
        dense_output=False,
    )
    if not sol.success:
        raise IntegrationError(
            f"integration failed at t = {sol.t[-1] if len(sol.t) else t0}: {sol.message}"
        )
    states = sol.y.T
    if not np.all(np.isfinite(states)):
        bad = np.argmax(~np.isfinite(states).all(axis=1))
        raise IntegrationError(f"non-finite state at t = {sol.t[bad]}")
    return Trajectory(times=sol.t, states=states, rtol=rtol, atol=atol, nfev=sol.nfev)
