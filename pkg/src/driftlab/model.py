"""Pendulum-rotor model with a small periodic coupling.

The configuration is (q, Q) where q is a pendulum angle whose upright
equilibrium q = 0 is hyperbolic and Q is a free rotor angle.  The
Lagrangian is

    L = Qdot^2/2 + qdot^2/2 + (1 - cos q) + mu (1 - cos q) f(Q, q, t)

with f a trigonometric polynomial, 2*pi-periodic in each argument.  The
coupling vanishes quadratically at q = 0, so the rotor tori
{q = qdot = 0, Qdot = omega} survive for every mu.

At mu = 0 the pendulum separates from the rotor and carries the
homoclinic separatrix

    q0(t) = 4 arctan(e^t),  qdot0(t) = 2 / cosh(t),

normalised so the apex q = pi is reached at t = 0.  The identity
1 - cos q0(t) = 2 / cosh(t)^2 is used throughout the quadratures.

Angles are always lifted to the real line, never reduced mod 2*pi:
loops run q from -pi to pi and glued curves continue to 3*pi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

_HALF_PI = math.pi / 2.0


@dataclass(frozen=True)
class TrigTerm:
    """One term c * cos(kQ*Q + kq*q + kt*t + phi) of the coupling."""

    c: float
    kQ: int
    kq: int
    kt: int
    phi: float = 0.0


@dataclass(frozen=True)
class PerturbationSpec:
    """Trigonometric coupling f(Q, q, t) = sum of TrigTerm cosines.

    Integer wavenumbers keep f 2*pi-periodic in each argument, which the
    translate bookkeeping in the transition stage relies on.  An empty
    term tuple is the zero coupling.
    """

    terms: tuple[TrigTerm, ...] = ()

    def __post_init__(self):
        for term in self.terms:
            if not (
                isinstance(term.kQ, int)
                and isinstance(term.kq, int)
                and isinstance(term.kt, int)
            ):
                raise ConfigError(f"wavenumbers must be integers, got {term}")

    def eval(self, Q, q, t, dQ: int = 0, dq: int = 0, dt: int = 0):
        """Evaluate f or a mixed partial derivative, broadcasting over arrays.

        Each derivative order multiplies the term by its wavenumber and
        advances the cosine phase by pi/2.
        """
        out = np.zeros(np.broadcast(Q, q, t).shape)
        shift = (dQ + dq + dt) * _HALF_PI
        for term in self.terms:
            coeff = term.c * term.kQ**dQ * term.kq**dq * term.kt**dt
            if coeff == 0.0:
                continue
            arg = term.kQ * np.asarray(Q) + term.kq * np.asarray(q) + term.kt * np.asarray(t)
            out += coeff * np.cos(arg + term.phi + shift)
        if out.shape == ():
            return float(out)
        return out

    def max_abs(self) -> float:
        """Upper bound sum |c| on |f|; used in truncation estimates."""
        return float(sum(abs(term.c) for term in self.terms))

    @property
    def is_zero(self) -> bool:
        return all(term.c == 0.0 for term in self.terms)

    def to_records(self) -> list[dict]:
        return [
            {"c": t.c, "kQ": t.kQ, "kq": t.kq, "kt": t.kt, "phi": t.phi}
            for t in self.terms
        ]

    @classmethod
    def from_records(cls, records) -> "PerturbationSpec":
        terms = []
        for rec in records:
            unknown = set(rec) - {"c", "kQ", "kq", "kt", "phi"}
            if unknown:
                raise ConfigError(f"unknown perturbation term fields: {sorted(unknown)}")
            try:
                terms.append(
                    TrigTerm(
                        c=float(rec["c"]),
                        kQ=int(rec["kQ"]),
                        kq=int(rec["kq"]),
                        kt=int(rec["kt"]),
                        phi=float(rec.get("phi", 0.0)),
                    )
                )
            except KeyError as exc:
                raise ConfigError(f"perturbation term missing field {exc}") from exc
        return cls(terms=tuple(terms))

    @classmethod
    def preset(cls, name: str) -> "PerturbationSpec":
        """Named couplings; 'arnold' is cos Q + cos t, 'zero' switches f off."""
        if name == "arnold":
            return cls(
                terms=(
                    TrigTerm(c=1.0, kQ=1, kq=0, kt=0),
                    TrigTerm(c=1.0, kQ=0, kq=0, kt=1),
                )
            )
        if name == "zero":
            return cls(terms=())
        raise ConfigError(f"unknown perturbation preset {name!r}")


@dataclass(frozen=True)
class SystemParams:
    """Coupling size mu >= 0, loop-length scale a0 > 1, and the coupling itself.

    a0 sets the minimising-loop duration T = a0 / mu used by the
    variational stages; it is carried here so every stage sees one value.
    """

    mu: float = 0.0
    a0: float = 10.0
    perturbation: PerturbationSpec = field(default_factory=PerturbationSpec)

    def __post_init__(self):
        if self.mu < 0.0:
            raise ConfigError(f"mu must be >= 0, got {self.mu}")
        if self.a0 <= 1.0:
            raise ConfigError(f"a0 must be > 1, got {self.a0}")

    @property
    def loop_time(self) -> float:
        """T = a0 / mu, the nominal duration of one minimising loop."""
        if self.mu == 0.0:
            return math.inf
        return self.a0 / self.mu


@dataclass(frozen=True)
class PhasePoint:
    """One phase-space sample (t, q, qdot, Q, Qdot), angles lifted."""

    t: float
    q: float
    qdot: float
    Q: float
    Qdot: float

    def as_array(self) -> np.ndarray:
        return np.array([self.q, self.qdot, self.Q, self.Qdot])


@dataclass(frozen=True)
class SeparatrixParams:
    """Unperturbed homoclinic reference: apex time T0, rotor phase Q0, speed omega."""

    omega: float
    T0: float = 0.0
    Q0: float = 0.0


def separatrix_angle(t):
    """q0(t) = 4 arctan(e^t), the separatrix angle with apex pi at t = 0.

    Evaluated through arctan(e^-|t|) so both tails stay fully accurate.
    """
    t = np.asarray(t, dtype=float)
    pos = 2.0 * math.pi - 4.0 * np.arctan(np.exp(-np.abs(t)))
    out = np.where(t >= 0.0, pos, 2.0 * math.pi - pos)
    if out.shape == ():
        return float(out)
    return out


def separatrix_velocity(t):
    """qdot0(t) = 2 / cosh(t)."""
    t = np.asarray(t, dtype=float)
    out = 2.0 / np.cosh(t)
    if out.shape == ():
        return float(out)
    return out


def separatrix_state(sep: SeparatrixParams, t: float) -> PhasePoint:
    """Phase point of the product orbit (separatrix) x (rotor at speed omega)."""
    s = t - sep.T0
    return PhasePoint(
        t=float(t),
        q=float(separatrix_angle(s)),
        qdot=float(separatrix_velocity(s)),
        Q=float(sep.Q0 + sep.omega * s),
        Qdot=float(sep.omega),
    )


def lagrangian(point: PhasePoint, s: SystemParams) -> float:
    """L evaluated at one phase point."""
    f = s.perturbation
    pendulum = 0.5 * point.qdot**2 + (1.0 - math.cos(point.q))
    rotor = 0.5 * point.Qdot**2
    coupling = s.mu * (1.0 - math.cos(point.q)) * f.eval(point.Q, point.q, point.t)
    return float(rotor + pendulum + coupling)


def eom_rhs(t, y, s: SystemParams):
    """Euler-Lagrange right-hand side for y = (q, qdot, Q, Qdot).

        qddot = sin q (1 + mu f) + mu (1 - cos q) f_q
        Qddot = mu (1 - cos q) f_Q

    Works on a single state vector or a batch with shape (4, n).
    """
    y = np.asarray(y, dtype=float)
    f = s.perturbation
    q, qdot, Q, Qdot = y[0], y[1], y[2], y[3]
    one_mcos = 1.0 - np.cos(q)
    sin_q = np.sin(q)
    if s.mu == 0.0 or not f.terms:
        qddot = sin_q
        Qddot = np.zeros_like(np.asarray(Qdot, dtype=float))
    else:
        fval = f.eval(Q, q, t)
        f_q = f.eval(Q, q, t, dq=1)
        f_Q = f.eval(Q, q, t, dQ=1)
        qddot = sin_q * (1.0 + s.mu * fval) + s.mu * one_mcos * f_q
        Qddot = s.mu * one_mcos * f_Q
    return np.array([qdot, qddot, Qdot, Qddot])
