"""Direct variational construction of pendulum-rotor loops.

A loop is a trajectory segment that starts at a separatrix apex
(q = -pi, heading down), follows the stable manifold into a small
neighbourhood of the torus q = qdot = 0, lingers there while the rotor
phase advances, and leaves along the unstable manifold to the next apex
(q = +pi).  Shooting is hopeless over such spans: a perturbation of the
apex state is amplified by roughly e^{duration} through the hyperbolic
layer.  Instead we minimise the discretised action

    F[gamma] = sum_i [ (dq_i^2 + dQ_i^2) / (2 h_i)
                       + h_i * V(midpoint_i) ],
    V(Q, q, t) = (1 - cos q) * (1 + mu f(Q, q, t)),

over piecewise-linear curves with fixed endpoints (trapezoid kinetic
term, midpoint potential).  The potential enters with a plus sign, so
loops are genuine minimisers and a damped Newton iteration with the
exact banded Hessian converges in a handful of steps from the
closed-form initial guess.

Node ordering for the optimizer interleaves the two angles,
[q_1, Q_1, q_2, Q_2, ...], which makes the Hessian symmetric banded
with half-bandwidth 3; each Newton step is a single
scipy.linalg.solveh_banded call, O(N) time and memory.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.linalg import LinAlgError, solveh_banded
from scipy.optimize import minimize as _scipy_minimize

from .errors import ConfigError, SolverDidNotConverge
from .model import SystemParams, separatrix_angle

logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())

# Rotor frequencies for which loop solves are considered well posed.
# Slightly wider than the certified band so transition boundaries may
# wander by the box half-width without tripping validation.
WORKING_BAND = (0.4, 2.6)

# Minimum number of mesh intervals in any curve.
MIN_SEGMENTS = 64

# Mesh grading: fine spacing inside the separatrix layers, geometric
# coarsening to the cap in the near-torus stretch.
H_FINE = 0.05
H_MAX = 0.5
MESH_RATIO = 1.12
LAYER_HALF_WIDTH = 12.0

# Gradient size below which newton steps are trusted without a line search;
# see _minimize_newton.
_NEWTON_TRUST_GRAD = 1e-5

_TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# domain types


@dataclass(frozen=True)
class BoundarySpec:
    """Fixed-endpoint data for a loop solve.

    The pendulum angle runs from qa at time T0 to qb at time T1 while
    the rotor phase runs from Q0 to Q1.  Defaults describe the single
    loop between consecutive apexes; glued double loops use qb = 3 pi.
    """

    T0: float
    T1: float
    Q0: float
    Q1: float
    qa: float = -math.pi
    qb: float = math.pi

    def __post_init__(self):
        if not (self.T1 > self.T0):
            raise ConfigError(f"need T1 > T0, got [{self.T0}, {self.T1}]")
        for name in ("T0", "T1", "Q0", "Q1", "qa", "qb"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"boundary field {name} is not finite")

    @property
    def duration(self) -> float:
        return self.T1 - self.T0

    @property
    def slope(self) -> float:
        """Mean rotor frequency imposed by the endpoints."""
        return (self.Q1 - self.Q0) / (self.T1 - self.T0)


@dataclass(frozen=True)
class DiscreteCurve:
    """Piecewise-linear curve on a strictly increasing time mesh.

    Endpoints must match the boundary exactly; interior nodes are the
    optimisation variables.
    """

    times: np.ndarray
    q_nodes: np.ndarray
    Q_nodes: np.ndarray
    boundary: BoundarySpec

    def __post_init__(self):
        t = np.array(self.times, dtype=float)
        q = np.array(self.q_nodes, dtype=float)
        Q = np.array(self.Q_nodes, dtype=float)
        if not (t.ndim == q.ndim == Q.ndim == 1 and t.size == q.size == Q.size):
            raise ConfigError("times, q_nodes, Q_nodes must be 1-d arrays of equal length")
        if t.size < MIN_SEGMENTS + 1:
            raise ConfigError(f"need at least {MIN_SEGMENTS} mesh intervals, got {t.size - 1}")
        if not np.all(np.diff(t) > 0.0):
            raise ConfigError("times must be strictly increasing")
        b = self.boundary
        if t[0] != b.T0 or t[-1] != b.T1:
            raise ConfigError("mesh endpoints do not match the boundary times")
        if q[0] != b.qa or q[-1] != b.qb or Q[0] != b.Q0 or Q[-1] != b.Q1:
            raise ConfigError("node endpoints do not match the boundary values")
        for arr in (t, q, Q):
            arr.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "q_nodes", q)
        object.__setattr__(self, "Q_nodes", Q)

    @property
    def n_segments(self) -> int:
        return self.times.size - 1

    def interp(self, t):
        """Piecewise-linear (q, Q) at times t."""
        return (
            np.interp(t, self.times, self.q_nodes),
            np.interp(t, self.times, self.Q_nodes),
        )

    def velocities(self) -> tuple[np.ndarray, np.ndarray]:
        """Node velocities from local parabolic fits.

        Centered three-point formulas on the nonuniform mesh; one-sided
        parabolas at the two endpoints.
        """
        return (
            _parabolic_derivative(self.times, self.q_nodes),
            _parabolic_derivative(self.times, self.Q_nodes),
        )

    def to_csv(self, path):
        from .records import write_csv

        rows = zip(self.times, self.q_nodes, self.Q_nodes)
        return write_csv(path, ("t", "q", "Q"), rows)

    @classmethod
    def from_csv(cls, path) -> "DiscreteCurve":
        from .records import read_csv_columns

        cols = read_csv_columns(path)
        t, q, Q = cols["t"], cols["q"], cols["Q"]
        boundary = BoundarySpec(
            T0=t[0], T1=t[-1], Q0=Q[0], Q1=Q[-1], qa=q[0], qb=q[-1]
        )
        return cls(times=t, q_nodes=q, Q_nodes=Q, boundary=boundary)


def _parabolic_derivative(t: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Derivative of the interpolating parabola at each node."""
    out = np.empty_like(y)
    h0 = t[1:-1] - t[:-2]
    h1 = t[2:] - t[1:-1]
    out[1:-1] = (y[2:] - y[1:-1]) * h0 / (h1 * (h0 + h1)) + (
        y[1:-1] - y[:-2]
    ) * h1 / (h0 * (h0 + h1))
    out[0] = _one_sided_slope(t[:3], y[:3], t[0])
    out[-1] = _one_sided_slope(t[-3:], y[-3:], t[-1])
    return out


def _one_sided_slope(t3, y3, at) -> float:
    """Derivative at `at` of the parabola through three (t, y) points."""
    t0, t1, t2 = (float(v) for v in t3)
    y0, y1, y2 = (float(v) for v in y3)
    d0 = (2 * at - t1 - t2) / ((t0 - t1) * (t0 - t2))
    d1 = (2 * at - t0 - t2) / ((t1 - t0) * (t1 - t2))
    d2 = (2 * at - t0 - t1) / ((t2 - t0) * (t2 - t1))
    return y0 * d0 + y1 * d1 + y2 * d2


@dataclass(frozen=True)
class LoopProfile:
    """Closeness of a solved loop to its asymptotic model.

    The loop is split at distance l from either apex.  d_sep_in and
    d_sep_out are C0 distances (pendulum angle) to the entering and
    exiting separatrix branches over the outer windows; d_torus is the
    largest |q| over the middle window, i.e. the distance from the
    torus q = 0.
    """

    d_sep_in: float
    d_torus: float
    d_sep_out: float
    l: float

    def as_dict(self) -> dict:
        return {
            "d_sep_in": self.d_sep_in,
            "d_torus": self.d_torus,
            "d_sep_out": self.d_sep_out,
            "l": self.l,
        }


def profile_window(mu: float) -> float:
    """Layer window l = |log mu| / 6, with a fixed fallback at mu = 0."""
    if mu <= 0.0:
        return 6.0
    return abs(math.log(mu)) / 6.0


def loop_profile(curve: DiscreteCurve, mu: float) -> LoopProfile:
    b = curve.boundary
    l = profile_window(mu)
    t = curve.times
    q = curve.q_nodes
    mid = 0.5 * (b.T0 + b.T1)
    ta = min(b.T0 + l, mid)
    tb = max(b.T1 - l, mid)

    # Lifted branches: entering runs -pi -> 0, exiting runs 0 -> +pi.
    # A glued double loop (qb = 3 pi) exits toward q = 2 pi, so shift
    # the exit branch to the branch point nearest qb.
    exit_shift = _TWO_PI * round((b.qb - math.pi) / _TWO_PI)

    in_win = t <= ta
    out_win = t >= tb
    mid_win = (t >= ta) & (t <= tb)

    q_in = separatrix_angle(t[in_win] - b.T0) - _TWO_PI
    q_out = separatrix_angle(t[out_win] - b.T1) + exit_shift
    d_in = float(np.max(np.abs(q[in_win] - q_in))) if in_win.any() else 0.0
    d_out = float(np.max(np.abs(q[out_win] - q_out))) if out_win.any() else 0.0
    if mid_win.any():
        # distance from the nearest torus sheet q = 0 mod 2 pi
        d_mid = float(np.max(np.abs(_wrap_to_pi(q[mid_win]))))
    else:
        d_mid = 0.0
    return LoopProfile(d_sep_in=d_in, d_torus=d_mid, d_sep_out=d_out, l=l)


def _wrap_to_pi(q):
    return (np.asarray(q) + math.pi) % _TWO_PI - math.pi


# ---------------------------------------------------------------------------
# action and derivatives


class ActionParts(NamedTuple):
    F: float
    F0: float
    P: float


def _midpoint_data(curve: DiscreteCurve):
    t = curve.times
    q = curve.q_nodes
    Q = curve.Q_nodes
    h = np.diff(t)
    qm = 0.5 * (q[1:] + q[:-1])
    Qm = 0.5 * (Q[1:] + Q[:-1])
    tm = 0.5 * (t[1:] + t[:-1])
    return h, np.diff(q), np.diff(Q), qm, Qm, tm


def action(curve: DiscreteCurve, s: SystemParams) -> ActionParts:
    """Discrete action of the curve, split as F = F0 + mu P.

    F0 is the unperturbed part (kinetic plus pendulum potential), P the
    perturbation part sum_i h_i (1 - cos q) f at interval midpoints.
    """
    h, dq, dQ, qm, Qm, tm = _midpoint_data(curve)
    kinetic = 0.5 * float(np.sum((dq * dq + dQ * dQ) / h))
    pend = 1.0 - np.cos(qm)
    F0 = kinetic + float(np.sum(h * pend))
    if s.perturbation.is_zero:
        P = 0.0
    else:
        P = float(np.sum(h * pend * s.perturbation.eval(Qm, qm, tm)))
    return ActionParts(F=F0 + s.mu * P, F0=F0, P=P)


def _potential_gradients(qm, Qm, tm, s: SystemParams):
    """(V_q, V_Q) at interval midpoints for V = (1 - cos q)(1 + mu f)."""
    sin_q = np.sin(qm)
    pend = 1.0 - np.cos(qm)
    mu = s.mu
    f = s.perturbation
    if mu == 0.0 or f.is_zero:
        return sin_q, np.zeros_like(qm)
    fv = f.eval(Qm, qm, tm)
    fq = f.eval(Qm, qm, tm, dq=1)
    fQ = f.eval(Qm, qm, tm, dQ=1)
    Vq = sin_q * (1.0 + mu * fv) + mu * pend * fq
    VQ = mu * pend * fQ
    return Vq, VQ


def action_gradient(curve: DiscreteCurve, s: SystemParams) -> tuple[np.ndarray, np.ndarray]:
    """Exact gradient of the discrete action w.r.t. node positions.

    Returns full-length arrays (d/dq_j, d/dQ_j) with zeros in the two
    endpoint slots, which are boundary data rather than unknowns.
    """
    h, dq, dQ, qm, Qm, tm = _midpoint_data(curve)
    Vq, VQ = _potential_gradients(qm, Qm, tm, s)
    gq = np.zeros_like(curve.q_nodes)
    gQ = np.zeros_like(curve.Q_nodes)
    pq = dq / h
    pQ = dQ / h
    gq[1:-1] = pq[:-1] - pq[1:] + 0.5 * (h[:-1] * Vq[:-1] + h[1:] * Vq[1:])
    gQ[1:-1] = pQ[:-1] - pQ[1:] + 0.5 * (h[:-1] * VQ[:-1] + h[1:] * VQ[1:])
    return gq, gQ


def _potential_hessians(qm, Qm, tm, s: SystemParams):
    """(V_qq, V_qQ, V_QQ) at interval midpoints."""
    cos_q = np.cos(qm)
    sin_q = np.sin(qm)
    pend = 1.0 - cos_q
    mu = s.mu
    f = s.perturbation
    if mu == 0.0 or f.is_zero:
        z = np.zeros_like(qm)
        return cos_q, z, z
    fv = f.eval(Qm, qm, tm)
    fq = f.eval(Qm, qm, tm, dq=1)
    fQ = f.eval(Qm, qm, tm, dQ=1)
    fqq = f.eval(Qm, qm, tm, dq=2)
    fqQ = f.eval(Qm, qm, tm, dq=1, dQ=1)
    fQQ = f.eval(Qm, qm, tm, dQ=2)
    Vqq = cos_q * (1.0 + mu * fv) + mu * (2.0 * sin_q * fq + pend * fqq)
    VqQ = mu * (sin_q * fQ + pend * fqQ)
    VQQ = mu * pend * fQQ
    return Vqq, VqQ, VQQ


def _hessian_banded(curve: DiscreteCurve, s: SystemParams) -> np.ndarray:
    """Upper-banded Hessian over interior nodes, interleaved [q, Q].

    Layout matches scipy.linalg.solveh_banded: ab[3] is the main
    diagonal, ab[3 - k] the k-th superdiagonal with entry (i, i + k)
    stored in column i + k.
    """
    h, _, _, qm, Qm, tm = _midpoint_data(curve)
    Vqq, VqQ, VQQ = _potential_hessians(qm, Qm, tm, s)
    n_int = curve.times.size - 2
    ab = np.zeros((4, 2 * n_int))

    inv_h = 1.0 / h
    kin_diag = inv_h[:-1] + inv_h[1:]
    pot_qq = 0.25 * (h[:-1] * Vqq[:-1] + h[1:] * Vqq[1:])
    pot_QQ = 0.25 * (h[:-1] * VQQ[:-1] + h[1:] * VQQ[1:])
    pot_qQ = 0.25 * (h[:-1] * VqQ[:-1] + h[1:] * VqQ[1:])
    ab[3, 0::2] = kin_diag + pot_qq
    ab[3, 1::2] = kin_diag + pot_QQ

    # same-node q-Q coupling, entry (q_j, Q_j) at column of Q_j
    ab[2, 1::2] = pot_qQ

    # neighbour couplings through the shared interval j = 1 .. n_int-1
    h_in = h[1:-1]
    off_qq = -1.0 / h_in + 0.25 * h_in * Vqq[1:-1]
    off_QQ = -1.0 / h_in + 0.25 * h_in * VQQ[1:-1]
    off_qQ = 0.25 * h_in * VqQ[1:-1]
    ab[1, 2::2] = off_qq  # (q_j, q_{j+1})
    ab[1, 3::2] = off_QQ  # (Q_j, Q_{j+1})
    ab[2, 2::2] = off_qQ  # (Q_j, q_{j+1})
    ab[0, 3::2] = off_qQ  # (q_j, Q_{j+1})
    return ab


# ---------------------------------------------------------------------------
# minimisation


class SolveInfo(NamedTuple):
    iterations: int
    grad_max: float
    residual: float
    F: float
    converged: bool


def _node_weights(times: np.ndarray) -> np.ndarray:
    h = np.diff(times)
    return 0.5 * (h[:-1] + h[1:])


def _interleave(gq, gQ) -> np.ndarray:
    g = np.empty(2 * (gq.size - 2))
    g[0::2] = gq[1:-1]
    g[1::2] = gQ[1:-1]
    return g


def _with_interior(curve: DiscreteCurve, x: np.ndarray) -> DiscreteCurve:
    q = curve.q_nodes.copy()
    Q = curve.Q_nodes.copy()
    q[1:-1] = x[0::2]
    Q[1:-1] = x[1::2]
    return DiscreteCurve(times=curve.times, q_nodes=q, Q_nodes=Q, boundary=curve.boundary)


def minimize_curve(
    initial: DiscreteCurve,
    s: SystemParams,
    opt_tol: float = 1e-8,
    method: str = "newton",
    max_iter: int = 80,
) -> tuple[DiscreteCurve, SolveInfo]:
    """Minimise the discrete action over interior nodes.

    Convergence is declared when the per-unit-time residual
    max_j |g_j| / w_j (w_j the node quadrature weight) drops to
    opt_tol, or when no representable descent remains near a minimum:
    the newton update underflows the node resolution, or the gradient
    sits at its assembly noise floor while the action is bitwise
    stationary.  That floor grows with the rotor winding |Q|, so very
    long chains bottom out slightly above a tight opt_tol; the achieved
    residual is reported either way.  Raises SolverDidNotConverge
    otherwise.
    """
    if method == "lbfgs":
        return _minimize_lbfgs(initial, s, opt_tol, max_iter)
    if method != "newton":
        raise ConfigError(f"unknown optimizer method {method!r}")
    return _minimize_newton(initial, s, opt_tol, max_iter)


def _residuals(curve, s):
    gq, gQ = action_gradient(curve, s)
    g = _interleave(gq, gQ)
    w = np.repeat(_node_weights(curve.times), 2)
    grad_max = float(np.max(np.abs(g))) if g.size else 0.0
    residual = float(np.max(np.abs(g) / w)) if g.size else 0.0
    return g, grad_max, residual


def residual_norms(curve: DiscreteCurve, s: SystemParams) -> tuple[float, float]:
    """(raw gradient max-norm, per-unit-time residual) of a curve."""
    _, grad_max, residual = _residuals(curve, s)
    return grad_max, residual


def _minimize_newton(initial, s, opt_tol, max_iter):
    curve = initial
    F = action(curve, s).F
    lam = 0.0
    for it in range(max_iter):
        g, grad_max, residual = _residuals(curve, s)
        logger.debug(
            "newton iter=%d F=%.15g res=%.3e gmax=%.3e lam=%.1e",
            it, F, residual, grad_max, lam,
        )
        if residual <= opt_tol and grad_max <= opt_tol:
            return curve, SolveInfo(it, grad_max, residual, F, True)
        ab = _hessian_banded(curve, s)
        x = np.empty_like(g)
        x[0::2] = curve.q_nodes[1:-1]
        x[1::2] = curve.Q_nodes[1:-1]
        stepped = False
        grad_floor = False
        # Near the minimum the predicted action decrease falls below the
        # rounding noise of the action sum, so an Armijo test on F stalls.
        # Accept raw Newton steps there on gradient decrease instead.
        if lam == 0.0 and grad_max < _NEWTON_TRUST_GRAD:
            try:
                dx = solveh_banded(ab, -g)
                # Step at or below the node representation resolution:
                # no closer float curve exists, the iterate is stationary
                # to machine precision.  Large rotor windings hit this
                # floor before a tight opt_tol does.
                x_res = np.finfo(float).eps * np.maximum(np.abs(x), 1.0)
                if np.all(np.abs(dx) <= 4.0 * x_res):
                    return curve, SolveInfo(it, grad_max, residual, F, True)
                trial = _with_interior(curve, x + dx)
                g_t, gmax_t, _ = _residuals(trial, s)
                if np.all(np.isfinite(g_t)) and gmax_t < grad_max:
                    curve = trial
                    F = action(curve, s).F
                    continue
                grad_floor = np.all(np.isfinite(g_t))
            except LinAlgError:
                pass
        for _ in range(24):
            abl = ab if lam == 0.0 else _damped(ab, lam)
            try:
                dx = solveh_banded(abl, -g)
            except LinAlgError:
                lam = max(lam * 10.0, 1e-8)
                continue
            slope = float(np.dot(g, dx))
            if slope >= 0.0:
                lam = max(lam * 10.0, 1e-8)
                continue
            alpha = 1.0
            no_progress = False
            for _ in range(40):
                trial = _with_interior(curve, x + alpha * dx)
                F_new = action(trial, s).F
                if F_new <= F + 1e-4 * alpha * slope:
                    # The gradient path above found no decrease and the
                    # accepted step leaves the action bitwise unchanged:
                    # no representable descent remains, the iterate is
                    # stationary at the working precision.
                    no_progress = grad_floor and lam == 0.0 and F_new == F
                    curve, F = trial, F_new
                    stepped = True
                    break
                alpha *= 0.5
            if stepped:
                if no_progress:
                    _, gmax_f, res_f = _residuals(curve, s)
                    return curve, SolveInfo(it, gmax_f, res_f, F, True)
                lam *= 0.1
                if lam < 1e-12:
                    lam = 0.0
                break
            lam = max(lam * 10.0, 1e-8)
        if not stepped:
            raise SolverDidNotConverge(
                "newton step rejected at every damping level",
                iterations=it,
                grad_max=grad_max,
            )
    _, grad_max, residual = _residuals(curve, s)
    raise SolverDidNotConverge(
        f"no convergence in {max_iter} newton iterations "
        f"(residual {residual:.3e}, tol {opt_tol:.1e})",
        iterations=max_iter,
        grad_max=grad_max,
    )


def _damped(ab: np.ndarray, lam: float) -> np.ndarray:
    out = ab.copy()
    out[3] += lam * np.maximum(ab[3], 1.0)
    return out


def _minimize_lbfgs(initial, s, opt_tol, max_iter):
    """Matrix-free fallback; slower than newton on long loops."""
    curve = initial

    def fun(x):
        c = _with_interior(curve, x)
        gq, gQ = action_gradient(c, s)
        return action(c, s).F, _interleave(gq, gQ)

    x0 = np.empty(2 * (curve.times.size - 2))
    x0[0::2] = curve.q_nodes[1:-1]
    x0[1::2] = curve.Q_nodes[1:-1]
    res = _scipy_minimize(
        fun, x0, jac=True, method="L-BFGS-B",
        options={"maxiter": max(200, 50 * max_iter), "gtol": 0.1 * opt_tol, "ftol": 0.0},
    )
    solved = _with_interior(curve, res.x)
    _, grad_max, residual = _residuals(solved, s)
    if residual > opt_tol or grad_max > opt_tol:
        raise SolverDidNotConverge(
            f"l-bfgs stalled at residual {residual:.3e} (tol {opt_tol:.1e})",
            iterations=int(res.nit),
            grad_max=grad_max,
        )
    return solved, SolveInfo(int(res.nit), grad_max, residual, float(res.fun), True)


# ---------------------------------------------------------------------------
# meshes and initial guesses


def loop_mesh(
    duration: float,
    h_fine: float = H_FINE,
    h_max: float = H_MAX,
    ratio: float = MESH_RATIO,
    layer: float = LAYER_HALF_WIDTH,
) -> np.ndarray:
    """Normalised node template in [0, 1] for a loop of given duration.

    Spacing h_fine inside the separatrix layers at both ends,
    geometric coarsening to h_max across the near-torus middle.  The
    template is symmetric; scaling it to [T0, T1] keeps the node count
    fixed, so the action varies smoothly as the endpoints move.
    """
    if duration <= 0.0:
        raise ConfigError("mesh duration must be positive")
    half = 0.5 * duration
    cap = min(h_fine, 2.0 * half / MIN_SEGMENTS)
    steps = []
    pos = 0.0
    h = cap
    while pos < half:
        steps.append(h)
        pos += h
        if pos >= layer and h < h_max:
            h = min(h * ratio, h_max)
    scale = half / pos
    steps = np.asarray(steps) * scale
    offsets = np.concatenate(([0.0], np.cumsum(steps)))
    offsets[-1] = half
    # mirror about the midpoint
    nodes = np.concatenate((offsets, duration - offsets[-2::-1]))
    out = nodes / duration
    out[0], out[-1] = 0.0, 1.0
    return out


def _mesh_times(boundary: BoundarySpec, mesh) -> np.ndarray:
    if mesh is None:
        template = loop_mesh(boundary.duration)
    elif isinstance(mesh, (int, np.integer)):
        if mesh < MIN_SEGMENTS:
            raise ConfigError(f"need at least {MIN_SEGMENTS} segments, got {mesh}")
        template = np.linspace(0.0, 1.0, int(mesh) + 1)
    else:
        template = np.asarray(mesh, dtype=float)
        if template[0] != 0.0 or template[-1] != 1.0:
            raise ConfigError("mesh template must span [0, 1]")
    times = boundary.T0 + template * boundary.duration
    times[0] = boundary.T0
    times[-1] = boundary.T1
    return times


def initial_guess(boundary: BoundarySpec, mu: float = 0.0, mesh=None) -> DiscreteCurve:
    """Closed-form starting curve: sum of separatrix tails plus a linear
    correction that pins the endpoints exactly.

    The guess is the unperturbed asymptotic loop, already within O(mu)
    plus O(e^{-duration}) of the minimiser; mu is accepted for
    interface uniformity.  Works for single loops (qb - qa = 2 pi)
    only; glued curves are built loop by loop.
    """
    del mu
    if abs((boundary.qb - boundary.qa) - _TWO_PI) > 1e-12:
        raise ConfigError("initial_guess expects a single-excursion boundary")
    times = _mesh_times(boundary, mesh)
    q = _loop_guess_q(times, boundary)
    Q = boundary.Q0 + (times - boundary.T0) * (
        (boundary.Q1 - boundary.Q0) / boundary.duration
    )
    Q[0], Q[-1] = boundary.Q0, boundary.Q1
    return DiscreteCurve(times=times, q_nodes=q, Q_nodes=Q, boundary=boundary)


def _loop_guess_q(times: np.ndarray, boundary: BoundarySpec) -> np.ndarray:
    base = boundary.qa + math.pi  # branch offset: canonical loop is -pi -> pi
    raw = (
        (separatrix_angle(times - boundary.T0) - _TWO_PI)
        + separatrix_angle(times - boundary.T1)
    )
    ca = (boundary.qa - base) - raw[0]
    cb = (boundary.qb - base) - raw[-1]
    u = (times - boundary.T0) / boundary.duration
    q = base + raw + ca * (1.0 - u) + cb * u
    q[0], q[-1] = boundary.qa, boundary.qb
    return q


def solve_loop(
    boundary: BoundarySpec,
    s: SystemParams,
    opt_tol: float = 1e-8,
    mesh=None,
    method: str = "newton",
    max_iter: int = 80,
) -> tuple[DiscreteCurve, LoopProfile]:
    """Minimise the action over curves with the given fixed endpoints.

    mesh may be None (graded template), an integer segment count
    (uniform), or a normalised node template in [0, 1].  Returns the
    solved curve and its LoopProfile.
    """
    slope = boundary.slope
    if not (WORKING_BAND[0] <= slope <= WORKING_BAND[1]):
        raise ConfigError(
            f"boundary slope {slope:.4f} outside working band {WORKING_BAND}"
        )
    guess = initial_guess(boundary, s.mu, mesh=mesh)
    solved, info = minimize_curve(guess, s, opt_tol=opt_tol, method=method, max_iter=max_iter)
    logger.info(
        "loop [%.2f, %.2f] slope %.4f: %d iters, F=%.12g, residual %.2e",
        boundary.T0, boundary.T1, slope, info.iterations, info.F, info.residual,
    )
    return solved, loop_profile(solved, s.mu)
