"""Quantitative acceptance gates, one test per criterion.

Each test checks a stated tolerance end to end and is named so the
verbose test report reads as a pass/fail line per criterion:

  01  splitting quadrature vs closed form, 1e-8 on 33x33 grids
  02  isolation certificates over the whole frequency band
  03  integrator conservation and separatrix reproduction
  04  loop solver vs closed-form action and profile scaling in mu
  05  transition junction quality and the action/splitting regression
  06  diffusion chains at three mu with the mu^-2 drift-time law
  07  projection monotonicity under random curve perturbations
  08  action gradient vs finite differences

Budgeted runtimes are asserted where the gate states one.  The whole
module is deterministic: every random draw is seeded.
"""

import math
import time

import numpy as np
import pytest
from scipy.integrate import simpson

from driftlab.diffusion import scaling_study
from driftlab.errors import Condition1Violated
from driftlab.integrator import integrate, pendulum_energy, rotor_energy
from driftlab.melnikov import (
    certify_at,
    certify_condition1,
    melnikov_field,
    melnikov_value,
)
from driftlab.model import (
    PerturbationSpec,
    PhasePoint,
    SeparatrixParams,
    SystemParams,
    separatrix_angle,
    separatrix_state,
)
from driftlab.transition import find_transition, glue_action, glued_curve, projection_gap
from driftlab.variational import (
    BoundarySpec,
    DiscreteCurve,
    action,
    action_gradient,
    loop_mesh,
    solve_loop,
)

PI = math.pi
ARNOLD = PerturbationSpec.preset("arnold")

# amplitude of the separatrix kernel integral 2 int sech^2(s) cos(nu s) ds
def _kernel_closed(nu: float) -> float:
    if nu == 0.0:
        return 4.0
    return 2.0 * PI * nu / math.sinh(PI * nu / 2.0)


def _system(mu: float, a0: float = 10.0) -> SystemParams:
    return SystemParams(mu=mu, a0=a0, perturbation=ARNOLD)


def test_criterion_01_splitting_matches_closed_form():
    t_start = time.perf_counter()

    # the closed form is trusted only after brute-force validation:
    # composite Simpson on [-40, 40] resolves the kernel to ~1e-13
    sv = np.linspace(-40.0, 40.0, 512001)
    w = 2.0 / np.cosh(sv) ** 2
    omegas = (0.5, 1.0, 1.7, 2.5)
    for nu in omegas:
        brute = float(simpson(w * np.cos(nu * sv), x=sv))
        assert abs(_kernel_closed(nu) - brute) <= 1e-12

    a_T = _kernel_closed(1.0)
    worst = 0.0
    for omega in omegas:
        a_Q = _kernel_closed(omega)
        # grid values come from the vectorized quadrature path
        field = melnikov_field(omega, 33, 33, ARNOLD)
        exact = a_Q * np.cos(field.Q0)[None, :] + a_T * np.cos(field.T0)[:, None]
        worst = max(worst, float(np.max(np.abs(field.values - exact))))
        # spot-check the adaptive pointwise quadrature on the same grid
        for i in (0, 7, 16, 25, 32):
            got = melnikov_value(omega, field.Q0[i], field.T0[32 - i], ARNOLD).value
            want = a_Q * math.cos(field.Q0[i]) + a_T * math.cos(field.T0[32 - i])
            worst = max(worst, abs(got - want))
    assert worst <= 1e-8

    elapsed = time.perf_counter() - t_start
    assert elapsed <= 10.0
    print(f"criterion 01: max |quadrature - closed form| = {worst:.3e}, {elapsed:.1f}s")


def test_criterion_02_certification_over_the_band():
    t_start = time.perf_counter()

    certs, global_gap = certify_condition1((0.5, 2.5), 0.01, ARNOLD)
    assert len(certs) == 201
    assert all(c.gap > 0.0 for c in certs)

    # the band minimum of the gap sits at the top frequency, where the
    # rotor-phase amplitude 2 pi omega / sinh(pi omega / 2) is smallest
    expected = _kernel_closed(2.5)
    assert abs(global_gap - expected) <= 0.05 * expected

    with pytest.raises(Condition1Violated):
        certify_condition1((0.5, 2.5), 0.01, PerturbationSpec.preset("zero"))

    elapsed = time.perf_counter() - t_start
    assert elapsed <= 60.0
    print(f"criterion 02: 201 certificates, global gap {global_gap:.6f}, {elapsed:.1f}s")


def test_criterion_03_conservation_and_separatrix():
    s = _system(0.0)
    rng = np.random.default_rng(2026)
    t_eval = np.linspace(0.0, 1000.0, 101)
    worst_drift = 0.0
    for _ in range(20):
        q, Q = rng.uniform(-PI, PI, size=2)
        qdot, Qdot = rng.uniform(-2.5, 2.5, size=2)
        start = PhasePoint(t=0.0, q=q, qdot=qdot, Q=Q, Qdot=Qdot)
        traj = integrate(start, 1000.0, s, t_eval=t_eval)
        e0, r0 = pendulum_energy(start), rotor_energy(start)
        for p in traj.points():
            worst_drift = max(
                worst_drift,
                abs(pendulum_energy(p) - e0),
                abs(rotor_energy(p) - r0),
            )
    assert worst_drift <= 1e-9

    sep = SeparatrixParams(omega=1.3, T0=5.0, Q0=2.0)
    traj = integrate(separatrix_state(sep, 0.0), 10.0, s,
                     t_eval=np.linspace(0.0, 10.0, 201))
    q_err = np.max(np.abs(traj.states[:, 0] - separatrix_angle(traj.times - 5.0)))
    Q_err = np.max(np.abs(traj.states[:, 2] - (2.0 + 1.3 * (traj.times - 5.0))))
    assert max(q_err, Q_err) <= 1e-6
    print(f"criterion 03: energy drift {worst_drift:.2e}, separatrix C0 {q_err:.2e}")


def test_criterion_04_loop_solver():
    t_start = time.perf_counter()

    # closed-form check: at mu = 0 the minimizing loop is two glued
    # separatrix tails and its action is the rotor line plus the full
    # homoclinic action 8
    omega, dT = 1.3, 30.0
    b = BoundarySpec(T0=0.0, T1=dT, Q0=0.0, Q1=omega * dT, qa=-PI, qb=PI)
    curve, _ = solve_loop(b, _system(0.0), mesh=4096)
    t = curve.times
    splice = np.where(
        t <= 0.5 * dT,
        separatrix_angle(t) - 2.0 * PI,
        separatrix_angle(t - dT),
    )
    c0 = float(np.max(np.abs(curve.q_nodes - splice)))
    c0 = max(c0, float(np.max(np.abs(curve.Q_nodes - omega * t))))
    assert c0 <= 1e-4
    F = action(curve, _system(0.0)).F
    F_exact = 0.5 * omega**2 * dT + 8.0
    assert abs(F - F_exact) <= 1e-3

    # profile distances shrink with the coupling; raw gradient converged
    profiles = []
    for mu in (0.05, 0.02, 0.01):
        s = _system(mu)
        two_T = 2.0 * s.loop_time
        bm = BoundarySpec(T0=0.0, T1=two_T, Q0=0.0, Q1=two_T, qa=-PI, qb=PI)
        solved, profile = solve_loop(bm, s, opt_tol=1e-9)
        gq, gQ = action_gradient(solved, s)
        grad_max = max(float(np.max(np.abs(gq))), float(np.max(np.abs(gQ))))
        assert grad_max <= 1e-8
        profiles.append(profile)
    for a, b2 in zip(profiles, profiles[1:]):
        assert b2.d_sep_in < a.d_sep_in
        assert b2.d_torus < a.d_torus
        assert b2.d_sep_out < a.d_sep_out

    elapsed = time.perf_counter() - t_start
    assert elapsed <= 300.0
    print(
        f"criterion 04: C0 {c0:.2e}, action err {abs(F - F_exact):.2e}, "
        f"d_torus {[f'{p.d_torus:.4f}' for p in profiles]}, {elapsed:.1f}s"
    )


def test_criterion_05_transition_quality_and_regression():
    t_start = time.perf_counter()

    mu, w1, w2 = 0.02, 1.0, 1.02
    s = _system(mu)
    T = s.loop_time
    outer = BoundarySpec(
        T0=0.0, T1=2.0 * T, Q0=0.0, Q1=T * (w1 + w2), qa=-PI, qb=3.0 * PI
    )
    cert = certify_at(w1, ARNOLD)
    record, _ = find_transition(
        outer, w1, w2, s, cert, grid_n=9, boundary_samples=256
    )
    assert record.margin > 0.0
    box = record.box
    assert box.contains(record.T0, record.Q0, shrink=1e-9)
    assert record.vel_jump <= 1e-4
    assert record.el_residual <= 1e-8

    # glued action against the splitting functional along the incoming
    # slope line through the box center, meshes frozen across samples
    meshes = (loop_mesh(box.T_center - outer.T0), loop_mesh(outer.T1 - box.T_center))
    dTs = np.linspace(-0.8 * box.half_T, 0.8 * box.half_T, 25)
    FY = np.array([
        glue_action(box.T_center + d, box.Q_center + w1 * d, outer, s, meshes=meshes)
        for d in dTs
    ])
    A = np.array([
        melnikov_value(w1, box.Q_center + w1 * d, box.T_center + d, ARNOLD).value
        for d in dTs
    ])
    slope = float(np.polyfit(mu * A, FY, 1)[0])
    assert 0.8 <= slope <= 1.2

    elapsed = time.perf_counter() - t_start
    assert elapsed <= 600.0
    print(
        f"criterion 05: margin {record.margin:.3e}, jump {record.vel_jump:.2e}, "
        f"residual {record.el_residual:.2e}, slope {slope:.4f}, {elapsed:.1f}s"
    )


def test_criterion_06_diffusion_scaling():
    t_start = time.perf_counter()

    mus = [0.05, 0.025, 0.0125]
    study = scaling_study(mus, (1.0, 2.0), _system(0.05), workers=1)

    assert [r.mu for r in study.rows] == mus
    assert all(r.status == "ok" for r in study.rows)
    for report in study.reports:
        assert report is not None and report.success
        assert report.Qdot_start <= 1.05
        assert report.Qdot_end >= 1.95
    assert 1.8 <= study.exponent <= 2.2

    # drift-time law with the constant fixed at the coarsest mu
    C = study.rows[0].t_d * mus[0] ** 2
    for row in study.rows[1:]:
        assert row.t_d <= 1.25 * C / row.mu**2

    elapsed = time.perf_counter() - t_start
    assert elapsed <= 7200.0
    print(
        f"criterion 06: t_d {[f'{r.t_d:.0f}' for r in study.rows]}, "
        f"p = {study.exponent:.3f}, C = {C:.2f}, {elapsed:.0f}s"
    )


def test_criterion_07_projection_monotonicity():
    mu = 0.02
    s = SystemParams(mu=mu, a0=2.0, perturbation=ARNOLD)
    outer = BoundarySpec(T0=0.0, T1=200.0, Q0=0.0, Q1=200.0, qa=-PI, qb=3.0 * PI)

    bases = []
    for T0, dq in ((95.3, 0.2), (99.1, -0.15), (100.37, 0.3), (104.8, 0.0)):
        Q0 = outer.Q0 + T0 + dq  # near the unit-slope line
        meshes = (loop_mesh(T0 - outer.T0), loop_mesh(outer.T1 - T0))
        bases.append(glued_curve(T0, Q0, outer, s, meshes=meshes))

    gaps = []
    rng = np.random.default_rng(7)
    for k in range(100):
        base = bases[k % len(bases)]
        u = (base.times - base.times[0]) / (base.times[-1] - base.times[0])
        bump_q = np.zeros_like(u)
        bump_Q = np.zeros_like(u)
        for m in (1, 2, 3):
            bump_q += rng.uniform(-1.0, 1.0) * np.sin(PI * m * u)
            bump_Q += rng.uniform(-1.0, 1.0) * np.sin(PI * m * u)
        for bump in (bump_q, bump_Q):
            bump *= rng.uniform(0.01, 0.05) / np.max(np.abs(bump))
            bump[0] = bump[-1] = 0.0
        perturbed = DiscreteCurve(
            times=base.times,
            q_nodes=base.q_nodes + bump_q,
            Q_nodes=base.Q_nodes + bump_Q,
            boundary=base.boundary,
        )
        gaps.append(projection_gap(perturbed, s).gap)

    gaps = np.array(gaps)
    assert np.all(gaps >= -1e-6)
    assert np.max(gaps) > 1e-5  # perturbations genuinely cost action
    print(f"criterion 07: min gap {gaps.min():.3e}, max gap {gaps.max():.3e}")


def test_criterion_08_gradient_vs_finite_differences():
    s = _system(0.02)
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(100):
        n = 80
        duration = rng.uniform(20.0, 60.0)
        t = np.linspace(0.0, duration, n + 1)
        h = duration / n
        t[1:-1] += rng.uniform(-0.3, 0.3, n - 1) * h
        qa, qb = rng.uniform(-PI, PI, size=2)
        Q1 = duration * rng.uniform(0.6, 2.3)
        u = t / duration
        q = qa + (qb - qa) * u
        Q = Q1 * u
        for m in (1, 2, 3):
            q += rng.uniform(-0.5, 0.5) * np.sin(PI * m * u)
            Q += rng.uniform(-0.5, 0.5) * np.sin(PI * m * u)
        q[0], q[-1] = qa, qb
        Q[0], Q[-1] = 0.0, Q1
        b = BoundarySpec(T0=0.0, T1=duration, Q0=0.0, Q1=Q1, qa=qa, qb=qb)
        curve = DiscreteCurve(times=t, q_nodes=q, Q_nodes=Q, boundary=b)

        gq, gQ = action_gradient(curve, s)
        for _ in range(6):
            j = int(rng.integers(1, n))
            pick_q = bool(rng.integers(0, 2))
            arr = q if pick_q else Q
            step = 1e-6 * (1.0 + abs(arr[j]))
            plus, minus = arr.copy(), arr.copy()
            plus[j] += step
            minus[j] -= step
            if pick_q:
                F_p = action(DiscreteCurve(t, plus, Q, b), s).F
                F_m = action(DiscreteCurve(t, minus, Q, b), s).F
                g = gq[j]
            else:
                F_p = action(DiscreteCurve(t, q, plus, b), s).F
                F_m = action(DiscreteCurve(t, q, minus, b), s).F
                g = gQ[j]
            fd = (F_p - F_m) / (2.0 * step)
            worst = max(worst, abs(g - fd) / max(1.0, abs(fd)))
    assert worst <= 1e-6
    print(f"criterion 08: worst relative gradient error {worst:.3e}")
