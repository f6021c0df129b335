"""Transition chains: diffusing orbits, drift-time measurement, mu scaling.

A diffusing orbit across the frequency ladder ``omega_1 < ... < omega_K`` is
assembled from K-1 glued transitions, one per time window of width 2T with
T = a0/mu, chained end to end.  Each window hands its final apex (time,
rotor position, lifted pendulum branch) to the next as an initial boundary.
The rotor velocity along the relaxed chain rises in steps of at most mu per
window, so the drift time from the Qdot <= 1 plateau to the Qdot >= 2
plateau scales like mu^-2 for a fixed frequency span.

Endpoint rotor phases are the only free knobs and are spent on robustness:
the entry phase maximises the incoming separatrix kick (pushing Qdot at the
first apex below the lowest plateau), the exit phase maximises the outgoing
kick (pushing Qdot at the last apex above the highest plateau).  Interior
window boundaries take the unbiased midpoint slope; the junction search
inside each window absorbs the remaining phase freedom.
"""

from __future__ import annotations

import dataclasses
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.integrate import quad

from .errors import ChainAborted, ConfigError, DriftLabError, QuadratureError
from .melnikov import Condition1Certificate, certify_at
from .model import PerturbationSpec, SystemParams, separatrix_angle
from .transition import TransitionRecord, find_transition
from .variational import (
    BoundarySpec,
    DiscreteCurve,
    minimize_curve,
    residual_norms,
    solve_loop,
)

logger = logging.getLogger(__name__)

_TWO_PI = 2.0 * math.pi

# Rotor-velocity plateaus ride the frequency ladder; the drift time is read
# between these two thresholds.
QDOT_LOW = 1.0
QDOT_HIGH = 2.0

# Duration of the stand-in loop chain for a single-frequency plan at mu = 0,
# where the natural window width a0/mu is unbounded.
_FROZEN_PLAN_DURATION = 120.0

_PHASE_GRID = 96


@dataclass(frozen=True)
class DiffusionReport:
    """Summary of one chain run.

    t_d is the drift time: first time the node-difference rotor velocity
    reaches QDOT_HIGH minus the last prior time it was at or below QDOT_LOW.
    It is NaN when the thresholds are not crossed (single-frequency plans,
    spans that do not straddle both thresholds, aborted chains).
    """

    mu: float
    omega_chain: tuple[float, ...]
    junctions: tuple[tuple[float, float], ...]
    curve_ref: str
    Qdot_start: float
    Qdot_end: float
    t_d: float
    residual_max: float
    wall_time: float

    def __post_init__(self) -> None:
        chain = tuple(float(w) for w in self.omega_chain)
        object.__setattr__(self, "omega_chain", chain)
        object.__setattr__(
            self, "junctions", tuple((float(a), float(b)) for a, b in self.junctions)
        )
        for w in chain:
            if not 0.5 < w < 2.5:
                raise ConfigError(f"chain frequency {w} outside (1/2, 5/2)")
        steps = np.diff(chain)
        if steps.size and np.any(steps < -1e-12):
            raise ConfigError("chain frequencies must be nondecreasing")
        if steps.size and self.mu >= 0 and np.any(steps > self.mu + 1e-9):
            raise ConfigError("chain step exceeds mu")

    @property
    def success(self) -> bool:
        return (
            self.Qdot_start <= QDOT_LOW
            and self.Qdot_end >= QDOT_HIGH
            and math.isfinite(self.t_d)
        )

    def to_record(self) -> dict:
        return {
            "mu": self.mu,
            "omega_chain": list(self.omega_chain),
            "junctions": [list(j) for j in self.junctions],
            "curve_ref": self.curve_ref,
            "Qdot_start": self.Qdot_start,
            "Qdot_end": self.Qdot_end,
            "t_d": self.t_d,
            "residual_max": self.residual_max,
            "wall_time": self.wall_time,
            "success": self.success,
        }


def plan_chain(omega_start: float, omega_end: float, mu: float) -> list[float]:
    """Frequency ladder from omega_start to omega_end in steps of at most mu.

    Every step is exactly min(mu, remaining span), so the ladder has
    ceil((omega_end - omega_start)/mu) + 1 rungs.  A zero-span plan is the
    single frequency [omega_start] and does not consult mu.
    """
    start = float(omega_start)
    end = float(omega_end)
    if not (0.5 < start <= end < 2.5):
        raise ConfigError(
            f"frequency span [{start}, {end}] must sit inside (1/2, 5/2) with start <= end"
        )
    if end == start:
        return [start]
    if mu <= 0:
        raise ConfigError("a positive mu is required for a multi-step plan")
    n_steps = math.ceil((end - start) / mu - 1e-12)
    plan = [start + k * mu for k in range(n_steps)]
    plan.append(end)
    return plan


def half_kick(
    omega: float,
    theta_Q: float,
    theta_T: float,
    f: PerturbationSpec,
    entering: bool = True,
    trunc: float = 20.0,
    quad_tol: float = 1e-10,
) -> float:
    """One-sided separatrix kick integral for the rotor velocity.

    Integrates 2 sech^2(s) f_Q(theta_Q + omega s, q0(s), theta_T + s) over
    s >= 0 (entering an excursion) or s <= 0 (leaving one).  The plateau
    rotor velocity after an apex exceeds the apex velocity by mu times the
    entering kick; symmetrically for the exiting side.
    """

    def integrand(sv: float) -> float:
        sech2 = 1.0 / math.cosh(sv) ** 2
        return 2.0 * sech2 * f.eval(
            theta_Q + omega * sv, separatrix_angle(sv), theta_T + sv, dQ=1
        )

    lo, hi = (0.0, trunc) if entering else (-trunc, 0.0)
    res = quad(integrand, lo, hi, epsabs=quad_tol, epsrel=quad_tol, limit=200, full_output=1)
    if len(res) > 3:
        raise QuadratureError(f"kick integral did not converge: {res[3]}")
    return float(res[0])


def _best_phase(omega: float, theta_T: float, f: PerturbationSpec, entering: bool) -> tuple[float, float]:
    """Rotor phase in [0, 2pi) maximising the one-sided kick, and its value."""
    grid = np.linspace(0.0, _TWO_PI, _PHASE_GRID, endpoint=False)
    kicks = [half_kick(omega, th, theta_T, f, entering=entering) for th in grid]
    i = int(np.argmax(kicks))
    # parabolic refinement through the winning node and its ring neighbours
    ym, y0, yp = kicks[i - 1], kicks[i], kicks[(i + 1) % _PHASE_GRID]
    denom = ym - 2.0 * y0 + yp
    shift = 0.0 if abs(denom) < 1e-15 else 0.5 * (ym - yp) / denom
    shift = min(max(shift, -0.5), 0.5)
    theta = float(np.mod(grid[i] + shift * (grid[1] - grid[0]), _TWO_PI))
    best = half_kick(omega, theta, theta_T, f, entering=entering)
    if best < y0:
        theta, best = float(grid[i]), y0
    return theta, best


def _wrap_to_pi(x: float) -> float:
    return float(np.mod(x + np.pi, _TWO_PI) - np.pi)


def _assemble(pieces: Sequence[DiscreteCurve]) -> DiscreteCurve:
    """Concatenate per-window curves, lifting q by 4 pi per window."""
    times = [pieces[0].times]
    q = [pieces[0].q_nodes]
    Q = [pieces[0].Q_nodes]
    for k, piece in enumerate(pieces[1:], start=1):
        if piece.times[0] != times[-1][-1]:
            raise ConfigError("chain windows do not share boundary times")
        if piece.Q_nodes[0] != Q[-1][-1]:
            raise ConfigError("chain windows do not share boundary rotor positions")
        times.append(piece.times[1:])
        q.append(piece.q_nodes[1:] + 2.0 * _TWO_PI * k)
        Q.append(piece.Q_nodes[1:])
    t_all = np.concatenate(times)
    q_all = np.concatenate(q)
    Q_all = np.concatenate(Q)
    boundary = BoundarySpec(
        T0=float(t_all[0]),
        T1=float(t_all[-1]),
        Q0=float(Q_all[0]),
        Q1=float(Q_all[-1]),
        qa=float(q_all[0]),
        qb=float(q_all[-1]),
    )
    return DiscreteCurve(t_all, q_all, Q_all, boundary)


def _single_frequency_run(
    omega: float,
    s: SystemParams,
    opt_tol: float,
    curve_ref: str,
    t_start: float,
) -> tuple[DiscreteCurve, DiffusionReport]:
    duration = 2.0 * s.loop_time if s.mu > 0 else _FROZEN_PLAN_DURATION
    boundary = BoundarySpec(
        T0=0.0, T1=duration, Q0=0.0, Q1=omega * duration, qa=-math.pi, qb=math.pi
    )
    curve, _ = solve_loop(boundary, s, opt_tol=opt_tol)
    _, vQ = curve.velocities()
    _, residual = residual_norms(curve, s)
    report = DiffusionReport(
        mu=s.mu,
        omega_chain=(omega,),
        junctions=(),
        curve_ref=curve_ref,
        Qdot_start=float(vQ[0]),
        Qdot_end=float(vQ[-1]),
        t_d=math.nan,
        residual_max=residual,
        wall_time=time.perf_counter() - t_start,
    )
    return curve, report


def _partial_report(
    plan: Sequence[float],
    s: SystemParams,
    records: Sequence[TransitionRecord],
    curve_ref: str,
    t_start: float,
) -> DiffusionReport:
    return DiffusionReport(
        mu=s.mu,
        omega_chain=tuple(plan),
        junctions=tuple((r.T0, r.Q0) for r in records),
        curve_ref=curve_ref,
        Qdot_start=math.nan,
        Qdot_end=math.nan,
        t_d=math.nan,
        residual_max=math.nan,
        wall_time=time.perf_counter() - t_start,
    )


def build_diffusing_orbit(
    plan: Sequence[float],
    s: SystemParams,
    opt_tol: float = 1e-8,
    boundary_samples: int = 256,
    workers: int = 1,
    certs: dict[float, Condition1Certificate] | None = None,
    curve_ref: str = "",
) -> tuple[DiscreteCurve, DiffusionReport]:
    """Solve the full transition chain for a frequency plan.

    Returns the globally relaxed chain curve and its report.  Transition
    failures abort the chain and raise ChainAborted carrying the report for
    the prefix that did succeed.
    """
    t_start = time.perf_counter()
    plan = [float(w) for w in plan]
    if not plan:
        raise ConfigError("empty frequency plan")
    for w in plan:
        if not 0.5 < w < 2.5:
            raise ConfigError(f"plan frequency {w} outside (1/2, 5/2)")
    steps = np.diff(plan)
    if np.any(steps < -1e-12):
        raise ConfigError("plan frequencies must be nondecreasing")
    if len(plan) == 1:
        return _single_frequency_run(plan[0], s, opt_tol, curve_ref, t_start)
    if s.mu <= 0:
        raise ConfigError("chain stepping requires mu > 0")
    if np.any(steps > s.mu + 1e-9):
        raise ConfigError("plan step exceeds mu")

    f = s.perturbation
    certs = dict(certs) if certs else {}
    for w in plan[:-1]:
        if w not in certs:
            certs[w] = certify_at(w, f)

    T = s.loop_time
    K = len(plan)
    total = 2.0 * T * (K - 1)

    Q_entry, kick_in = _best_phase(plan[0], 0.0, f, entering=True)
    bounds = [Q_entry]
    for k in range(K - 1):
        nominal = bounds[-1] + T * (plan[k] + plan[k + 1])
        if k == K - 2:
            theta_exit, kick_out = _best_phase(plan[k + 1], total, f, entering=False)
            nominal += _wrap_to_pi(theta_exit - nominal)
        bounds.append(nominal)
    logger.info(
        "chain: K=%d windows of 2T=%.6g, entry kick %.4f, exit kick %.4f",
        K - 1, 2.0 * T, kick_in, kick_out,
    )

    records: list[TransitionRecord] = []
    pieces: list[DiscreteCurve] = []
    for k in range(K - 1):
        outer = BoundarySpec(
            T0=2.0 * T * k,
            T1=2.0 * T * (k + 1),
            Q0=bounds[k],
            Q1=bounds[k + 1],
            qa=-math.pi,
            qb=3.0 * math.pi,
        )
        try:
            rec, curve = find_transition(
                outer,
                plan[k],
                plan[k + 1],
                s,
                certs[plan[k]],
                opt_tol=opt_tol,
                boundary_samples=boundary_samples,
                workers=workers,
            )
        except DriftLabError as exc:
            partial = _partial_report(plan, s, records, curve_ref, t_start)
            raise ChainAborted(
                f"window {k} ({plan[k]:.6g} -> {plan[k + 1]:.6g}) failed: {exc}",
                partial_report=partial,
                cause=exc,
            ) from exc
        logger.info(
            "window %d: junction (%.4f, %.4f), margin %.3e",
            k, rec.T0, rec.Q0, rec.margin,
        )
        records.append(rec)
        pieces.append(curve)

    chain = _assemble(pieces)
    relaxed, info = minimize_curve(chain, s, opt_tol=opt_tol)
    _, vQ = relaxed.velocities()
    try:
        t_d = measure_td(relaxed)
    except ConfigError:
        t_d = math.nan
    report = DiffusionReport(
        mu=s.mu,
        omega_chain=tuple(plan),
        junctions=tuple((r.T0, r.Q0) for r in records),
        curve_ref=curve_ref,
        Qdot_start=float(vQ[0]),
        Qdot_end=float(vQ[-1]),
        t_d=t_d,
        residual_max=info.residual,
        wall_time=time.perf_counter() - t_start,
    )
    return relaxed, report


def measure_td(curve: DiscreteCurve) -> float:
    """Drift time between the QDOT_LOW and QDOT_HIGH rotor-velocity thresholds.

    Node-difference velocities live at interval midpoints; the piecewise
    linear interpolant through them (extended linearly to the curve ends)
    defines the crossing times.  t_d is the first time the velocity reaches
    QDOT_HIGH minus the last prior time it was at or below QDOT_LOW.
    """
    t = curve.times
    v = np.diff(curve.Q_nodes) / np.diff(t)
    if v.size < 2:
        raise ConfigError("curve too short to measure a drift time")
    tm = 0.5 * (t[1:] + t[:-1])
    v_head = v[0] + (v[1] - v[0]) * (t[0] - tm[0]) / (tm[1] - tm[0])
    v_tail = v[-1] + (v[-1] - v[-2]) * (t[-1] - tm[-1]) / (tm[-1] - tm[-2])
    tt = np.concatenate(([t[0]], tm, [t[-1]]))
    vv = np.concatenate(([v_head], v, [v_tail]))

    above = np.nonzero(vv >= QDOT_HIGH)[0]
    if above.size == 0:
        raise ConfigError(f"rotor velocity never reaches {QDOT_HIGH}")
    i2 = int(above[0])
    if i2 == 0:
        t_high = float(tt[0])
    else:
        frac = (QDOT_HIGH - vv[i2 - 1]) / (vv[i2] - vv[i2 - 1])
        t_high = float(tt[i2 - 1] + frac * (tt[i2] - tt[i2 - 1]))

    below = np.nonzero((vv <= QDOT_LOW) & (tt < t_high))[0]
    if below.size == 0:
        raise ConfigError(f"rotor velocity never at or below {QDOT_LOW} before the rise")
    i1 = int(below[-1])
    if vv[i1] == QDOT_LOW or i1 + 1 >= vv.size:
        t_low = float(tt[i1])
    else:
        frac = (QDOT_LOW - vv[i1]) / (vv[i1 + 1] - vv[i1])
        t_low = float(tt[i1] + frac * (tt[i1 + 1] - tt[i1]))
    return t_high - t_low


def plateau_deviation(
    curve: DiscreteCurve,
    report: DiffusionReport,
    s: SystemParams,
    margin: float = 6.0,
) -> float:
    """Max deviation of the rotor velocity from the chain profile.

    The chain profile is piecewise constant: omega_k on the loop segments of
    window k.  Segments are shrunk by `margin` on each side to stay clear of
    the separatrix layers where the velocity steps.
    """
    if len(report.omega_chain) < 2:
        raise ConfigError("plateau profile needs a multi-window chain")
    t = curve.times
    v = np.diff(curve.Q_nodes) / np.diff(t)
    tm = 0.5 * (t[1:] + t[:-1])
    T = s.loop_time
    worst = 0.0
    for k, (t_junction, _) in enumerate(report.junctions):
        spans = (
            (2.0 * T * k, t_junction, report.omega_chain[k]),
            (t_junction, 2.0 * T * (k + 1), report.omega_chain[k + 1]),
        )
        for lo, hi, omega in spans:
            mask = (tm >= lo + margin) & (tm <= hi - margin)
            if np.any(mask):
                worst = max(worst, float(np.max(np.abs(v[mask] - omega))))
    return worst


class ScalingRow(NamedTuple):
    mu: float
    t_d: float
    p_partial: float
    status: str


class ScalingStudy(NamedTuple):
    rows: tuple[ScalingRow, ...]
    exponent: float
    reports: tuple  # DiffusionReport per row, None where the run failed

    def to_rows(self) -> list[list]:
        return [[r.mu, r.t_d, r.p_partial, r.status] for r in self.rows]


def _fit_exponent(mus: Sequence[float], tds: Sequence[float]) -> float:
    if len(mus) < 2 or len(set(mus)) < 2:
        return math.nan
    slope = np.polyfit(np.log(1.0 / np.asarray(mus)), np.log(np.asarray(tds)), 1)[0]
    return float(slope)


def scaling_study(
    mu_list: Sequence[float],
    plan_template: tuple[float, float],
    s: SystemParams,
    opt_tol: float = 1e-8,
    boundary_samples: int = 256,
    workers: int = 1,
) -> ScalingStudy:
    """Drift times over a list of mu values and the fitted power t_d ~ mu^-p.

    Each mu runs the same frequency span with its own ladder.  Failed runs
    are reported as failed rows and excluded from the fit; p_partial is the
    fit through the successful rows seen so far (NaN until two are in).
    """
    mus = [float(m) for m in mu_list]
    if len(set(mus)) < 3:
        raise ConfigError("scaling fit needs at least 3 distinct mu values")
    if any(m <= 0 for m in mus):
        raise ConfigError("scaling mu values must be positive")
    start, end = float(plan_template[0]), float(plan_template[1])
    if end <= start:
        raise ConfigError("scaling span must be increasing")

    def run(m: float) -> DiffusionReport:
        sp = dataclasses.replace(s, mu=m)
        plan = plan_chain(start, end, m)
        _, rep = build_diffusing_orbit(
            plan, sp, opt_tol=opt_tol, boundary_samples=boundary_samples
        )
        return rep

    outcomes: dict[float, tuple[str, float, DiffusionReport | None]] = {}

    def attempt(m: float) -> tuple[str, float, DiffusionReport | None]:
        try:
            rep = run(m)
        except DriftLabError as exc:
            logger.warning("scaling run mu=%g failed: %s", m, exc)
            return f"failed: {type(exc).__name__}", math.nan, None
        if not math.isfinite(rep.t_d):
            return "failed: thresholds not crossed", math.nan, rep
        return "ok", rep.t_d, rep

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for m, out in zip(mus, pool.map(attempt, mus)):
                outcomes[m] = out
    else:
        for m in mus:
            outcomes[m] = attempt(m)

    rows: list[ScalingRow] = []
    reports: list[DiffusionReport | None] = []
    good_mu: list[float] = []
    good_td: list[float] = []
    for m in mus:
        status, td, rep = outcomes[m]
        if status == "ok":
            good_mu.append(m)
            good_td.append(td)
        rows.append(ScalingRow(m, td, _fit_exponent(good_mu, good_td), status))
        reports.append(rep)
    return ScalingStudy(tuple(rows), _fit_exponent(good_mu, good_td), tuple(reports))


def shooting_consistency(
    curve: DiscreteCurve,
    s: SystemParams,
    horizon: float = 10.0,
) -> tuple[float, tuple[float, float]]:
    """C0 distance between the curve head and a true trajectory through it.

    Fits the initial velocities of an integrated orbit started at the
    curve's first node so the orbit tracks the curve nodes over
    [t0, t0+horizon]; position errors near the hyperbolic apex amplify
    like e^t, so the velocities must be fitted rather than read from node
    differences.  Returns the max position mismatch at the nodes and the
    fitted (qdot0, Qdot0).
    """
    from scipy.optimize import least_squares

    from .integrator import integrate
    from .model import PhasePoint

    t0 = float(curve.times[0])
    horizon = min(horizon, float(curve.times[-1]) - t0)
    head = curve.times <= t0 + horizon + 1e-12
    t_eval = curve.times[head]
    q_ref = curve.q_nodes[head]
    Q_ref = curve.Q_nodes[head]
    vq, vQ = curve.velocities()

    def mismatch(p: np.ndarray) -> np.ndarray:
        start = PhasePoint(
            t=t0, q=float(curve.q_nodes[0]), qdot=float(p[0]),
            Q=float(curve.Q_nodes[0]), Qdot=float(p[1]),
        )
        traj = integrate(start, float(t_eval[-1]), s, t_eval=t_eval)
        return np.concatenate(
            (traj.states[:, 0] - q_ref, traj.states[:, 2] - Q_ref)
        )

    fit = least_squares(
        mismatch,
        np.array([float(vq[0]), float(vQ[0])]),
        method="lm",
        diff_step=1e-8,
        xtol=1e-15,
        ftol=1e-15,
        gtol=1e-15,
    )
    err = float(np.max(np.abs(fit.fun)))
    return err, (float(fit.x[0]), float(fit.x[1]))
