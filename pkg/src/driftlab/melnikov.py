"""Separatrix forcing integrals and isolated-minimum certificates.

For a rotor speed omega the forcing field is

    A_omega(Q0, T0) = int 2/cosh(s)^2 * f(Q0 + omega s, q0(s), T0 + s) ds

over the whole line, the first-order change of the perturbation action
along the homoclinic product orbit with apex phases (T0, Q0).  The sign
convention keeps A as the plain integral of (1 - cos q) f along the
separatrix, so glued-curve actions compare against +A directly.

A frequency passes "condition 1" when A_omega has an interior minimum
on a box strictly below the boundary values; the positive gap is what
the transition stage spends to pin junctions.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy.integrate import quad
from scipy.optimize import minimize

from .errors import Condition1Violated, ConfigError, QuadratureError
from .model import PerturbationSpec, separatrix_angle

TWO_PI = 2.0 * math.pi

# Frequencies outside this band have poor hyperbolicity/averaging margins;
# every public entry point validates against it.
OMEGA_BAND = (0.5, 2.5)


@lru_cache(maxsize=64)
def composite_gauss(a: float, b: float, panel: float = 0.5, order: int = 12):
    """Fixed composite Gauss-Legendre nodes and weights on [a, b].

    panel is the target panel width; order the Gauss order per panel.
    Accurate to ~1e-14 for the smooth, mildly oscillatory integrands
    used here (checked against the closed forms in the test suite).
    """
    n_panels = max(1, int(math.ceil((b - a) / panel)))
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, n_panels + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * (edges[1:] - edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def truncation_bound(f: PerturbationSpec, trunc: float) -> float:
    """8 e^{-2L} max|f|, the tail mass of 2/cosh^2 beyond +-L."""
    return 8.0 * math.exp(-2.0 * trunc) * f.max_abs()


class MelnikovResult(NamedTuple):
    value: float
    truncation_bound: float


def melnikov_value(
    omega: float,
    Q0: float,
    T0: float,
    f: PerturbationSpec,
    trunc: float = 20.0,
    quad_tol: float = 1e-10,
) -> MelnikovResult:
    """A_omega(Q0, T0) by adaptive quadrature on [-trunc, trunc].

    Returns the value together with the analytic truncation bound; raises
    QuadratureError if the adaptive rule does not converge.
    """
    if not f.terms:
        return MelnikovResult(0.0, 0.0)

    def integrand(s):
        sech2 = 2.0 / math.cosh(s) ** 2
        return sech2 * f.eval(Q0 + omega * s, separatrix_angle(s), T0 + s)

    res = quad(
        integrand, -trunc, trunc, epsabs=quad_tol, epsrel=1e-11, limit=400,
        full_output=True,
    )
    value, err = res[0], res[1]
    # quad appends an explanation entry only when it failed to converge
    if len(res) > 3 or not math.isfinite(value):
        raise QuadratureError(
            f"adaptive quadrature did not converge (error estimate {err:.3e}): {res[-1]}"
        )
    return MelnikovResult(float(value), truncation_bound(f, trunc))


# -- separable evaluation ---------------------------------------------------
#
# Each term c cos(kQ Q + kq q + kt t + phi) evaluated along the separatrix
# splits as cos(alpha + beta(s)) with alpha = kQ Q0 + kt T0 + phi carrying
# all (T0, Q0) dependence and beta(s) = (kQ omega + kt) s + kq q0(s) fixed
# on the quadrature nodes.  Two scalar node sums per term then give the
# whole field; scans over large grids cost two cosines per term per point.


def _term_profiles(f: PerturbationSpec, omega: float, trunc: float):
    nodes, weights = composite_gauss(-trunc, trunc)
    wt = weights * (2.0 / np.cosh(nodes) ** 2)
    qs = separatrix_angle(nodes)
    profiles = []
    for term in f.terms:
        beta = (term.kQ * omega + term.kt) * nodes + term.kq * qs
        profiles.append(
            (
                term.c,
                term.kQ,
                term.kt,
                term.phi,
                float(np.dot(wt, np.cos(beta))),
                float(np.dot(wt, np.sin(beta))),
            )
        )
    return profiles


def _field_eval(profiles, Q0, T0, grad: bool = False):
    """Evaluate A (and optionally its (T0, Q0) gradient) from term profiles."""
    Q0 = np.asarray(Q0, dtype=float)
    T0 = np.asarray(T0, dtype=float)
    shape = np.broadcast(Q0, T0).shape
    val = np.zeros(shape)
    if grad:
        d_T = np.zeros(shape)
        d_Q = np.zeros(shape)
    for c, kQ, kt, phi, ic, isn in profiles:
        alpha = kQ * Q0 + kt * T0 + phi
        cos_a, sin_a = np.cos(alpha), np.sin(alpha)
        val += c * (cos_a * ic - sin_a * isn)
        if grad:
            bracket = -c * (sin_a * ic + cos_a * isn)
            d_T += kt * bracket
            d_Q += kQ * bracket
    if grad:
        return val, d_T, d_Q
    return val


@dataclass
class MelnikovField:
    """A_omega sampled on the fundamental domain [0, 2pi)^2.

    values[i, j] = A_omega(Q0=Q0[j], T0=T0[i]).
    """

    omega: float
    T0: np.ndarray
    Q0: np.ndarray
    values: np.ndarray
    truncation_bound: float

    def argmin(self) -> tuple[float, float]:
        """(T0, Q0) of the smallest grid sample."""
        i, j = np.unravel_index(np.argmin(self.values), self.values.shape)
        return float(self.T0[i]), float(self.Q0[j])

    def to_csv(self, path) -> None:
        from .records import write_csv

        rows = [
            (self.T0[i], self.Q0[j], self.values[i, j])
            for i in range(len(self.T0))
            for j in range(len(self.Q0))
        ]
        write_csv(path, ["T0", "Q0", "value"], rows)


def melnikov_field(
    omega: float,
    n_T: int,
    n_Q: int,
    f: PerturbationSpec,
    trunc: float = 20.0,
) -> MelnikovField:
    """Sample A_omega on an n_T x n_Q grid of the fundamental domain."""
    if n_T < 2 or n_Q < 2:
        raise ConfigError("melnikov_field needs at least a 2 x 2 grid")
    T0 = np.arange(n_T) * (TWO_PI / n_T)
    Q0 = np.arange(n_Q) * (TWO_PI / n_Q)
    profiles = _term_profiles(f, omega, trunc)
    values = _field_eval(profiles, Q0[None, :], T0[:, None])
    return MelnikovField(
        omega=omega,
        T0=T0,
        Q0=Q0,
        values=values,
        truncation_bound=truncation_bound(f, trunc),
    )


# -- condition-1 certificates ----------------------------------------------


@dataclass(frozen=True)
class BoxPolicy:
    """Certificate box geometry and the shrink fallback.

    The box around the refined minimum starts with the given half widths;
    if the boundary fails to clear the minimum it is shrunk by `shrink`
    up to `max_shrinks` times before the frequency is declared violated.
    """

    half_width_T: float = math.pi / 2.0
    half_width_Q: float = math.pi / 2.0
    shrink: float = 0.75
    max_shrinks: int = 8
    boundary_samples: int = 256

    def __post_init__(self):
        if not (0.0 < self.half_width_T < math.pi and 0.0 < self.half_width_Q < math.pi):
            raise ConfigError("box half widths must lie in (0, pi)")
        if self.boundary_samples < 8:
            raise ConfigError("need at least 8 boundary samples")


@dataclass(frozen=True)
class Condition1Certificate:
    """Isolated-minimum certificate for one frequency.

    gap = boundary_min - min_value; the frequency passes when gap > 0.
    """

    omega: float
    T_min: float
    Q_min: float
    min_value: float
    half_width_T: float
    half_width_Q: float
    boundary_min: float
    gap: float
    boundary_samples: int
    truncation_bound: float

    def to_record(self) -> dict:
        return {
            "omega": self.omega,
            "T_min": self.T_min,
            "Q_min": self.Q_min,
            "min_value": self.min_value,
            "half_width_T": self.half_width_T,
            "half_width_Q": self.half_width_Q,
            "boundary_min": self.boundary_min,
            "gap": self.gap,
            "boundary_samples": self.boundary_samples,
            "truncation_bound": self.truncation_bound,
        }


def _box_boundary(T_c, Q_c, s_T, s_Q, n: int):
    """>= n points tracing the rectangle boundary, corners included."""
    per_edge = max(2, int(math.ceil(n / 4.0)))
    u = np.linspace(-1.0, 1.0, per_edge, endpoint=False)
    T_pts = [T_c + u * s_T, np.full_like(u, T_c + s_T), T_c - u * s_T, np.full_like(u, T_c - s_T)]
    Q_pts = [np.full_like(u, Q_c - s_Q), Q_c + u * s_Q, np.full_like(u, Q_c + s_Q), Q_c - u * s_Q]
    return np.concatenate(T_pts), np.concatenate(Q_pts)


def certify_at(
    omega: float,
    f: PerturbationSpec,
    box_policy: BoxPolicy | None = None,
    refinement_tol: float = 1e-10,
    n_grid: int = 48,
    trunc: float = 20.0,
) -> Condition1Certificate:
    """Certificate for a single frequency; raises Condition1Violated on failure.

    Locates the grid minimum of A_omega, polishes it with a gradient
    descent, then checks the box boundary clears the minimum.  The box
    may be shrunk per the policy before giving up.
    """
    policy = box_policy or BoxPolicy()
    if not (OMEGA_BAND[0] - 1e-12 <= omega <= OMEGA_BAND[1] + 1e-12):
        raise ConfigError(f"omega {omega} outside the working band {OMEGA_BAND}")

    profiles = _term_profiles(f, omega, trunc)
    n_grid = max(8, n_grid)
    T0 = np.arange(n_grid) * (TWO_PI / n_grid)
    Q0 = np.arange(n_grid) * (TWO_PI / n_grid)
    values = _field_eval(profiles, Q0[None, :], T0[:, None])
    i, j = np.unravel_index(np.argmin(values), values.shape)

    def fun(x):
        v, d_T, d_Q = _field_eval(profiles, x[1], x[0], grad=True)
        return float(v), np.array([float(d_T), float(d_Q)])

    res = minimize(
        fun,
        np.array([T0[i], Q0[j]]),
        jac=True,
        method="L-BFGS-B",
        options={"gtol": refinement_tol, "ftol": 0.0, "maxiter": 200},
    )
    T_min = float(np.mod(res.x[0], TWO_PI))
    Q_min = float(np.mod(res.x[1], TWO_PI))
    min_value = float(res.fun)

    s_T, s_Q = policy.half_width_T, policy.half_width_Q
    for _ in range(policy.max_shrinks + 1):
        bT, bQ = _box_boundary(T_min, Q_min, s_T, s_Q, policy.boundary_samples)
        boundary = _field_eval(profiles, bQ, bT)
        boundary_min = float(np.min(boundary))
        gap = boundary_min - min_value
        if gap > 0.0:
            return Condition1Certificate(
                omega=omega,
                T_min=T_min,
                Q_min=Q_min,
                min_value=min_value,
                half_width_T=s_T,
                half_width_Q=s_Q,
                boundary_min=boundary_min,
                gap=gap,
                boundary_samples=len(bT),
                truncation_bound=truncation_bound(f, trunc),
            )
        s_T *= policy.shrink
        s_Q *= policy.shrink
    raise Condition1Violated(
        f"no isolated minimum at omega = {omega:.6g}: "
        f"boundary never clears the minimum (last gap {gap:.3e})",
        omegas=[omega],
    )


def certify_condition1(
    omega_range: tuple[float, float] = OMEGA_BAND,
    omega_step: float = 0.01,
    f: PerturbationSpec | None = None,
    box_policy: BoxPolicy | None = None,
    refinement_tol: float = 1e-10,
    n_grid: int = 48,
    trunc: float = 20.0,
    workers: int = 1,
) -> tuple[list[Condition1Certificate], float]:
    """Certificates over a frequency scan plus the global gap constant.

    Returns (certificates, global_gap) where global_gap = min gap over the
    scan.  Raises Condition1Violated as soon as one frequency fails.
    """
    if f is None:
        raise ConfigError("certify_condition1 requires a perturbation")
    lo, hi = omega_range
    if not (OMEGA_BAND[0] - 1e-12 <= lo <= hi <= OMEGA_BAND[1] + 1e-12):
        raise ConfigError(f"omega_range must sit inside {OMEGA_BAND}")
    if omega_step <= 0.0 or omega_step > 0.05 + 1e-15:
        raise ConfigError("omega_step must be positive and at most 0.05")

    n = int(round((hi - lo) / omega_step))
    omegas = [min(lo + k * omega_step, hi) for k in range(n + 1)]
    if omegas[-1] < hi - 1e-12:
        omegas.append(hi)

    def one(w):
        return certify_at(
            w, f, box_policy=box_policy, refinement_tol=refinement_tol,
            n_grid=n_grid, trunc=trunc,
        )

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            certs = list(pool.map(one, omegas))
    else:
        certs = [one(w) for w in omegas]
    global_gap = min(c.gap for c in certs)
    return certs, global_gap
