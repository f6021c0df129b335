"""Simple transitions: two loops glued at an optimised junction.

A transition between rotor frequencies omega1 and omega2 (|omega2 -
omega1| <= mu) is built by minimising the glued action

    F_Y(T0, Q0) = F(loop from (T-1, Q-1) to (T0, Q0))
                + F(loop from (T0, Q0) to (T1, Q1))

over junction apexes (T0, Q0) ranging in a box B translated from the
certified minimum of the splitting functional.  When the minimum is
interior to B the junction kink can be relaxed away: re-solving the
double loop with a free interior yields a genuine discrete trajectory
whose Euler-Lagrange residual is at solver tolerance everywhere,
junction node included.

The projection onto the glued-loop family (first crossing of q = pi)
and its action inequality are computed on a shared refined mesh, so
the comparison carries no cross-mesh discretisation bias.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.integrate import quad
from scipy.optimize import minimize as _scipy_minimize

from .errors import ConfigError, MinimumOnBoundary, QuadratureError
from .melnikov import Condition1Certificate
from .model import PerturbationSpec, SystemParams, separatrix_angle
from .variational import (
    BoundarySpec,
    DiscreteCurve,
    SolveInfo,
    _one_sided_slope,
    action,
    loop_mesh,
    minimize_curve,
    residual_norms,
    solve_loop,
)

logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())

_TWO_PI = 2.0 * math.pi

# Shortest loop duration a junction placement may create.  Keeps both
# separatrix layers resolvable on the graded mesh.
MIN_LOOP_DURATION = 30.0


# ---------------------------------------------------------------------------
# domain types


@dataclass(frozen=True)
class JunctionBox:
    """Axis-aligned (T0, Q0) search box, a 2 pi-translate of the
    certified box around the splitting-functional minimum."""

    T_center: float
    Q_center: float
    half_T: float
    half_Q: float

    def contains(self, T0: float, Q0: float, shrink: float = 0.0) -> bool:
        return (
            abs(T0 - self.T_center) <= self.half_T - shrink
            and abs(Q0 - self.Q_center) <= self.half_Q - shrink
        )

    def corners(self):
        for sT in (-1.0, 1.0):
            for sQ in (-1.0, 1.0):
                yield (self.T_center + sT * self.half_T, self.Q_center + sQ * self.half_Q)

    def boundary_points(self, n: int) -> np.ndarray:
        """>= n points tracing the box edge, as an (m, 2) array."""
        per_side = max(int(math.ceil(n / 4.0)), 2)
        u = np.linspace(-1.0, 1.0, per_side, endpoint=False)
        T_lo, T_hi = self.T_center - self.half_T, self.T_center + self.half_T
        Q_lo, Q_hi = self.Q_center - self.half_Q, self.Q_center + self.half_Q
        bottom = np.column_stack((T_lo + (u + 1.0) * self.half_T, np.full_like(u, Q_lo)))
        right = np.column_stack((np.full_like(u, T_hi), Q_lo + (u + 1.0) * self.half_Q))
        top = np.column_stack((T_hi - (u + 1.0) * self.half_T, np.full_like(u, Q_hi)))
        left = np.column_stack((np.full_like(u, T_lo), Q_hi - (u + 1.0) * self.half_Q))
        return np.vstack((bottom, right, top, left))


@dataclass(frozen=True)
class TransitionRecord:
    """Summary of one junction search plus the relaxed double loop."""

    outer: BoundarySpec
    omega1: float
    omega2: float
    T0: float
    Q0: float
    box: JunctionBox
    FY_at_junction: float
    boundary_FY_min: float
    el_residual: float
    vel_jump_q: float
    vel_jump_Q: float

    @property
    def margin(self) -> float:
        return self.boundary_FY_min - self.FY_at_junction

    @property
    def slope_in(self) -> float:
        return (self.Q0 - self.outer.Q0) / (self.T0 - self.outer.T0)

    @property
    def slope_out(self) -> float:
        return (self.outer.Q1 - self.Q0) / (self.outer.T1 - self.T0)

    @property
    def vel_jump(self) -> float:
        return max(self.vel_jump_q, self.vel_jump_Q)

    def to_record(self) -> dict:
        return {
            "omega1": self.omega1,
            "omega2": self.omega2,
            "outer": {
                "T_minus": self.outer.T0,
                "Q_minus": self.outer.Q0,
                "T_plus": self.outer.T1,
                "Q_plus": self.outer.Q1,
            },
            "junction": {"T0": self.T0, "Q0": self.Q0},
            "box": {
                "T_center": self.box.T_center,
                "Q_center": self.box.Q_center,
                "half_T": self.box.half_T,
                "half_Q": self.box.half_Q,
            },
            "FY_at_junction": self.FY_at_junction,
            "boundary_FY_min": self.boundary_FY_min,
            "margin": self.margin,
            "slope_in": self.slope_in,
            "slope_out": self.slope_out,
            "el_residual": self.el_residual,
            "vel_jump_q": self.vel_jump_q,
            "vel_jump_Q": self.vel_jump_Q,
        }


# ---------------------------------------------------------------------------
# gluing


def _check_double_boundary(outer: BoundarySpec):
    if abs((outer.qb - outer.qa) - 2.0 * _TWO_PI) > 1e-12:
        raise ConfigError("glued boundary must span two pendulum excursions (qb - qa = 4 pi)")


def _loop_pair_boundaries(T0, Q0, outer):
    apex = outer.qa + _TWO_PI
    bA = BoundarySpec(T0=outer.T0, T1=T0, Q0=outer.Q0, Q1=Q0, qa=outer.qa, qb=apex)
    bB = BoundarySpec(T0=T0, T1=outer.T1, Q0=Q0, Q1=outer.Q1, qa=apex, qb=outer.qb)
    return bA, bB


def _solve_pair(T0, Q0, outer, s, opt_tol=1e-8, meshes=(None, None)):
    bA, bB = _loop_pair_boundaries(T0, Q0, outer)
    curve_a, _ = solve_loop(bA, s, opt_tol=opt_tol, mesh=meshes[0])
    curve_b, _ = solve_loop(bB, s, opt_tol=opt_tol, mesh=meshes[1])
    return curve_a, curve_b


def _concat(curve_a: DiscreteCurve, curve_b: DiscreteCurve, outer: BoundarySpec) -> DiscreteCurve:
    times = np.concatenate((curve_a.times, curve_b.times[1:]))
    q = np.concatenate((curve_a.q_nodes, curve_b.q_nodes[1:]))
    Q = np.concatenate((curve_a.Q_nodes, curve_b.Q_nodes[1:]))
    return DiscreteCurve(times=times, q_nodes=q, Q_nodes=Q, boundary=outer)


def glued_curve(T0, Q0, outer: BoundarySpec, s: SystemParams, opt_tol: float = 1e-8,
                meshes=(None, None)) -> DiscreteCurve:
    """Concatenation of the two solved loops meeting at (T0, Q0)."""
    _check_double_boundary(outer)
    curve_a, curve_b = _solve_pair(T0, Q0, outer, s, opt_tol, meshes)
    return _concat(curve_a, curve_b, outer)


def glue_action(T0, Q0, outer: BoundarySpec, s: SystemParams, opt_tol: float = 1e-8,
                meshes=(None, None)) -> float:
    """F_Y(T0, Q0): summed action of the two loops glued at (T0, Q0).

    The discrete action is additive over the concatenation, so this is
    exactly the action of the glued curve.
    """
    _check_double_boundary(outer)
    curve_a, curve_b = _solve_pair(T0, Q0, outer, s, opt_tol, meshes)
    return action(curve_a, s).F + action(curve_b, s).F


def boundary_half_integrals(outer: BoundarySpec, omega1: float, f: PerturbationSpec,
                            trunc: float = 20.0, quad_tol: float = 1e-10) -> float:
    """Junction-independent perturbation constant of the glued action.

    Sum of the two half-line integrals of (1 - cos q0) f along the
    separatrix branches anchored at the outer boundary points, both
    taken at slope omega1:

        int_0^inf  2 sech^2(s) f(Q-1 + w1 s, q0(s), T-1 + s) ds
      + int_-inf^0 2 sech^2(s) f(Q+1 + w1 s, q0(s), T+1 + s) ds
    """
    if f.is_zero:
        return 0.0

    def head(sv):
        sech = 1.0 / math.cosh(sv)
        return 2.0 * sech * sech * f.eval(
            outer.Q0 + omega1 * sv, separatrix_angle(sv), outer.T0 + sv
        )

    def tail(sv):
        sech = 1.0 / math.cosh(sv)
        return 2.0 * sech * sech * f.eval(
            outer.Q1 + omega1 * sv, separatrix_angle(sv), outer.T1 + sv
        )

    total = 0.0
    for fun, a, b in ((head, 0.0, trunc), (tail, -trunc, 0.0)):
        res = quad(fun, a, b, epsabs=quad_tol, epsrel=1e-11, limit=400, full_output=True)
        if len(res) > 3 or not math.isfinite(res[0]):
            raise QuadratureError(f"half-line quadrature did not converge on [{a}, {b}]")
        total += res[0]
    return total


# ---------------------------------------------------------------------------
# junction search


def _validate_transition(outer, omega1, omega2, s):
    _check_double_boundary(outer)
    if not (0.5 < omega1 <= omega2 < 2.5):
        raise ConfigError(f"frequencies ({omega1}, {omega2}) outside (1/2, 5/2)")
    if omega2 - omega1 > s.mu + 1e-12:
        raise ConfigError(
            f"frequency step {omega2 - omega1:.3e} exceeds mu = {s.mu:.3e}"
        )
    two_T = 2.0 * s.loop_time
    if math.isfinite(two_T) and outer.duration < two_T - 1e-9:
        raise ConfigError(
            f"outer interval {outer.duration:.1f} shorter than 2T = {two_T:.1f}"
        )
    if abs(outer.slope - omega1) > s.mu + 1e-12:
        raise ConfigError(
            f"outer slope {outer.slope:.6f} not within mu of omega1 = {omega1}"
        )


def _junction_slope_devs(T0, Q0, outer, omega1, omega2):
    dev_in = (Q0 - outer.Q0) / (T0 - outer.T0) - omega1
    dev_out = (outer.Q1 - Q0) / (outer.T1 - T0) - omega2
    return abs(dev_in), abs(dev_out)


def _nominal_junction_time(outer, omega1, omega2):
    """Meeting time of the two exact slope lines through the endpoints."""
    D = outer.duration
    dQ = outer.Q1 - outer.Q0
    if omega2 > omega1:
        frac = (dQ - omega2 * D) / ((omega1 - omega2) * D)
    else:
        frac = 0.5
    return outer.T0 + frac * D


def translate_box(outer: BoundarySpec, omega1: float, omega2: float,
                  cert: Condition1Certificate, mu: float) -> JunctionBox:
    """Translate the certified box by the 2 pi lattice into the
    admissible junction region.

    The T translate lands nearest the slope-matching time; the Q
    translate snaps the center onto the incoming slope line, which
    keeps the corner slope deviations within mu.  Raises ConfigError
    when no translate fits.
    """
    T_star = _nominal_junction_time(outer, omega1, omega2)
    T_star = min(
        max(T_star, outer.T0 + MIN_LOOP_DURATION),
        outer.T1 - MIN_LOOP_DURATION,
    )
    k0 = round((T_star - cert.T_min) / _TWO_PI)
    best = None
    for k in range(k0 - 3, k0 + 4):
        T_c = cert.T_min + _TWO_PI * k
        if (T_c - outer.T0) < MIN_LOOP_DURATION or (outer.T1 - T_c) < MIN_LOOP_DURATION:
            continue
        Q_line = outer.Q0 + omega1 * (T_c - outer.T0)
        Q_c = cert.Q_min + _TWO_PI * round((Q_line - cert.Q_min) / _TWO_PI)
        box = JunctionBox(T_c, Q_c, cert.half_width_T, cert.half_width_Q)
        worst = max(
            max(_junction_slope_devs(cT, cQ, outer, omega1, omega2))
            for cT, cQ in box.corners()
        )
        if best is None or worst < best[0]:
            best = (worst, box)
    if best is None:
        raise ConfigError("no 2 pi-translate of the certificate box fits the outer interval")
    worst, box = best
    if mu > 0.0 and worst > mu + 1e-12:
        raise ConfigError(
            f"no admissible translate: best corner slope deviation {worst:.3e} > mu = {mu:.3e}"
        )
    return box


class _GlueObjective:
    """F_Y evaluator with mesh templates frozen per transition, so the
    value varies smoothly under junction moves (constant node count)."""

    def __init__(self, outer, s, opt_tol, box):
        self.outer = outer
        self.s = s
        self.opt_tol = opt_tol
        d_a = box.T_center - outer.T0
        d_b = outer.T1 - box.T_center
        self.meshes = (loop_mesh(d_a), loop_mesh(d_b))

    def __call__(self, T0, Q0) -> float:
        return glue_action(T0, Q0, self.outer, self.s, self.opt_tol, self.meshes)


def find_transition(
    outer: BoundarySpec,
    omega1: float,
    omega2: float,
    s: SystemParams,
    cert: Condition1Certificate,
    opt_tol: float = 1e-8,
    grid_n: int = 9,
    boundary_samples: int = 256,
    workers: int = 1,
) -> tuple[TransitionRecord, DiscreteCurve]:
    """Locate the junction minimising F_Y in the translated box, certify
    it interior, and relax the glued curve into a genuine trajectory.

    Returns the record and the relaxed double-loop curve.  Raises
    MinimumOnBoundary when the boundary minimum fails to exceed the
    junction value, ConfigError when no box translate is admissible.

    At mu = 0 the glued action is constant along the slope line, so the
    junction is placed on the line at the box center and the interior
    certificate is vacuous (margin reported as computed).  The glued
    curve is then returned without the final relax: the coupling is what
    pins the junction, and without it the excursion-translation modes
    are flat to e^{-T}, leaving the position of the discrete minimiser
    in that valley numerically undetermined.  Away from the junction
    node the concatenation already satisfies the interior equations to
    opt_tol; el_residual reports its one-node O(h^2) defect.
    """
    _validate_transition(outer, omega1, omega2, s)
    if abs(cert.omega - omega1) > 0.1:
        raise ConfigError(
            f"certificate at omega = {cert.omega} does not cover omega1 = {omega1}"
        )
    box = translate_box(outer, omega1, omega2, cert, s.mu)
    fy = _GlueObjective(outer, s, opt_tol, box)

    if s.mu > 0.0:
        T0, Q0, fy_min = _descend_junction(fy, box, grid_n)
    else:
        T0 = box.T_center
        Q0 = outer.Q0 + omega1 * (T0 - outer.T0)
        fy_min = fy(T0, Q0)

    pts = box.boundary_points(boundary_samples)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            vals = list(pool.map(lambda p: fy(p[0], p[1]), pts))
    else:
        vals = [fy(p[0], p[1]) for p in pts]
    boundary_min = float(min(vals))

    interior = box.contains(T0, Q0, shrink=1e-9 * max(box.half_T, box.half_Q))
    if s.mu > 0.0 and (boundary_min <= fy_min or not interior):
        raise MinimumOnBoundary(
            f"junction not certified interior: boundary min {boundary_min:.12g} vs "
            f"junction {fy_min:.12g} (margin {boundary_min - fy_min:.3e}); "
            "increase a0 or decrease mu"
        )

    glued = glued_curve(T0, Q0, outer, s, opt_tol, fy.meshes)
    if s.mu > 0.0:
        relaxed, info = minimize_curve(glued, s, opt_tol=opt_tol)
        el_residual = info.residual
    else:
        relaxed = glued
        el_residual = residual_norms(glued, s)[1]
    j = int(np.searchsorted(relaxed.times, T0))
    jump_q, jump_Q = _velocity_jumps(relaxed, j)

    record = TransitionRecord(
        outer=outer,
        omega1=omega1,
        omega2=omega2,
        T0=float(T0),
        Q0=float(Q0),
        box=box,
        FY_at_junction=float(fy_min),
        boundary_FY_min=boundary_min,
        el_residual=el_residual,
        vel_jump_q=jump_q,
        vel_jump_Q=jump_Q,
    )
    logger.info(
        "transition %.4f -> %.4f: junction (%.6f, %.6f), margin %.3e, "
        "vel jump (%.2e, %.2e)",
        omega1, omega2, record.T0, record.Q0, record.margin, jump_q, jump_Q,
    )
    return record, relaxed


def _descend_junction(fy, box: JunctionBox, grid_n: int):
    """Coarse grid scan then bounded quasi-Newton descent on F_Y."""
    u = np.linspace(-1.0, 1.0, grid_n)
    Ts = box.T_center + u * box.half_T
    Qs = box.Q_center + u * box.half_Q
    vals = np.array([[fy(T, Q) for Q in Qs] for T in Ts])
    i, j = np.unravel_index(np.argmin(vals), vals.shape)

    bounds = [
        (box.T_center - box.half_T, box.T_center + box.half_T),
        (box.Q_center - box.half_Q, box.Q_center + box.half_Q),
    ]
    res = _scipy_minimize(
        lambda x: fy(x[0], x[1]),
        x0=np.array([Ts[i], Qs[j]]),
        method="L-BFGS-B",
        bounds=bounds,
        options={"eps": 1e-4, "maxfun": 200, "ftol": 1e-14, "gtol": 1e-7},
    )
    if res.fun <= vals[i, j]:
        return float(res.x[0]), float(res.x[1]), float(res.fun)
    return float(Ts[i]), float(Qs[j]), float(vals[i, j])


def _velocity_jumps(curve: DiscreteCurve, j: int) -> tuple[float, float]:
    """|qdot| and |Qdot| mismatch at node j from one-sided parabolic
    fits over three nodes on each side."""
    t = curve.times
    if j < 2 or j > t.size - 3:
        raise ConfigError("junction node too close to the curve ends for a one-sided fit")
    out = []
    for y in (curve.q_nodes, curve.Q_nodes):
        left = _one_sided_slope(t[j - 2 : j + 1], y[j - 2 : j + 1], t[j])
        right = _one_sided_slope(t[j : j + 3], y[j : j + 3], t[j])
        out.append(abs(left - right))
    return out[0], out[1]


# ---------------------------------------------------------------------------
# projection onto the glued-loop family


def project_to_loop_family(curve: DiscreteCurve) -> tuple[float, float]:
    """(a, b): first time the pendulum angle exceeds pi (linear
    interpolation between nodes) and the rotor phase there."""
    q = curve.q_nodes
    t = curve.times
    above = np.nonzero(q > math.pi)[0]
    if above.size == 0:
        raise ConfigError("curve never exceeds q = pi")
    i = int(above[0])
    if i == 0:
        raise ConfigError("curve starts above q = pi")
    w = (math.pi - q[i - 1]) / (q[i] - q[i - 1])
    a = t[i - 1] + w * (t[i] - t[i - 1])
    b = curve.Q_nodes[i - 1] + w * (curve.Q_nodes[i] - curve.Q_nodes[i - 1])
    return float(a), float(b)


class ProjectionGap(NamedTuple):
    a: float
    b: float
    F_curve: float
    F_projected: float

    @property
    def gap(self) -> float:
        return self.F_curve - self.F_projected


def _insert_junction(curve: DiscreteCurve, a: float, b: float):
    """Mesh with a node at time a carrying (q, Q) = (pi, b) exactly.

    Reuses an existing node when a falls on one; otherwise inserts.
    Returns (times, q, Q, index).
    """
    t = curve.times
    q = curve.q_nodes.copy()
    Q = curve.Q_nodes.copy()
    j = int(np.searchsorted(t, a))
    scale = max(1.0, abs(a))
    if j < t.size and abs(t[j] - a) <= 1e-12 * scale:
        q[j] = math.pi
        Q[j] = b
        return t.copy(), q, Q, j
    if j > 0 and abs(t[j - 1] - a) <= 1e-12 * scale:
        q[j - 1] = math.pi
        Q[j - 1] = b
        return t.copy(), q, Q, j - 1
    t_new = np.insert(t, j, a)
    q_new = np.insert(q, j, math.pi)
    Q_new = np.insert(Q, j, b)
    return t_new, q_new, Q_new, j


def projection_gap(curve: DiscreteCurve, s: SystemParams, opt_tol: float = 1e-8) -> ProjectionGap:
    """Action excess of a curve over its projection onto the glued-loop
    family, both evaluated on the same junction-refined mesh.

    The two loop solves start from the restrictions of the curve
    itself, and the line search only ever accepts descent, so
    F_projected <= F_curve holds mechanically whenever the solves
    converge; the reported gap isolates genuine variational excess
    from cross-mesh quadrature bias.
    """
    _check_double_boundary(curve.boundary)
    a, b = project_to_loop_family(curve)
    t, q, Q, j = _insert_junction(curve, a, b)
    outer = curve.boundary
    apex = outer.qa + _TWO_PI

    refined = DiscreteCurve(times=t, q_nodes=q, Q_nodes=Q, boundary=outer)
    F_curve = action(refined, s).F

    bA = BoundarySpec(T0=outer.T0, T1=float(t[j]), Q0=outer.Q0, Q1=b, qa=outer.qa, qb=apex)
    bB = BoundarySpec(T0=float(t[j]), T1=outer.T1, Q0=b, Q1=outer.Q1, qa=apex, qb=outer.qb)
    init_a = DiscreteCurve(times=t[: j + 1], q_nodes=q[: j + 1], Q_nodes=Q[: j + 1], boundary=bA)
    init_b = DiscreteCurve(times=t[j:], q_nodes=q[j:], Q_nodes=Q[j:], boundary=bB)
    solved_a, _ = minimize_curve(init_a, s, opt_tol=opt_tol)
    solved_b, _ = minimize_curve(init_b, s, opt_tol=opt_tol)
    F_proj = action(solved_a, s).F + action(solved_b, s).F
    return ProjectionGap(a=a, b=b, F_curve=F_curve, F_projected=F_proj)
