"""Splitting-integral tests with an independent quadrature oracle.

For a coupling term c cos(kQ Q + kt t + phi) carrying no pendulum
factor, the splitting integral along the separatrix reduces to the
sech^2 cosine transform

    int 2 sech^2(s) cos(nu s) ds = 2 pi nu / sinh(pi nu / 2),  nu != 0,

with limit 4 at nu = 0, evaluated at nu = kQ omega + kt.  The Simpson
oracle below validates that transform to 1e-12 before the closed form
is used to check anything else.  For the standard coupling
f = cos Q + cos t this gives

    A(Q0, T0) = aQ(omega) cos Q0 + aT cos T0,
    aQ(omega) = 2 pi omega / sinh(pi omega / 2),  aT = aQ(1),

so the minimum over the torus sits at (pi, pi) with value -(aQ + aT).
"""

import math
import time

import numpy as np
import pytest
from scipy.integrate import simpson

from driftlab.errors import ConfigError, Condition1Violated
from driftlab.melnikov import (
    OMEGA_BAND,
    BoxPolicy,
    certify_at,
    certify_condition1,
    composite_gauss,
    melnikov_field,
    melnikov_value,
    truncation_bound,
)
from driftlab.model import PerturbationSpec, separatrix_angle

TWO_PI = 2.0 * math.pi

# Frozen closed-form constants (validated against the Simpson oracle below):
A_T = 2.7302778013234312          # aT = 2 pi / sinh(pi / 2)
ARNOLD_MIN_OMEGA1 = -5.4605556026468625   # -(aQ(1) + aT) = -2 aT
A_Q_25 = 0.6192243951878528       # aQ(5/2), the weakest gap in the band


def kernel_closed(nu: float) -> float:
    """int 2 sech^2(s) cos(nu s) ds over the line."""
    if nu == 0.0:
        return 4.0
    x = math.pi * nu / 2.0
    return 2.0 * x / math.sinh(x) * 2.0


def kernel_simpson(nu: float, L: float = 40.0, n: int = 512001) -> float:
    s = np.linspace(-L, L, n)
    y = 2.0 / np.cosh(s) ** 2 * np.cos(nu * s)
    return float(simpson(y, x=s))


def a_Q(omega: float) -> float:
    return kernel_closed(omega)


def closed_form(omega, Q0, T0):
    return a_Q(omega) * np.cos(Q0) + A_T * np.cos(T0)


# ---------------------------------------------------------------------------
# the oracle itself


def test_kernel_closed_form_against_simpson():
    for nu in (0.0, 0.5, 1.0, 1.7, 2.5, 3.5):
        assert abs(kernel_simpson(nu) - kernel_closed(nu)) < 1e-12


def test_frozen_constants():
    assert kernel_closed(1.0) == pytest.approx(A_T, rel=1e-15)
    assert kernel_closed(2.5) == pytest.approx(A_Q_25, rel=1e-15)
    assert -(a_Q(1.0) + A_T) == pytest.approx(ARNOLD_MIN_OMEGA1, rel=1e-15)


def test_melnikov_value_matches_closed_form():
    f = PerturbationSpec.preset("arnold")
    rng = np.random.default_rng(5)
    for omega in (0.5, 1.0, 1.7, 2.5):
        for _ in range(5):
            Q0, T0 = rng.uniform(0.0, TWO_PI, 2)
            res = melnikov_value(omega, Q0, T0, f)
            assert res.value == pytest.approx(closed_form(omega, Q0, T0), abs=1e-10)
            assert res.truncation_bound < 1e-15


def test_melnikov_value_with_pendulum_factor():
    # a term with kq != 0 has no elementary closed form; check the
    # adaptive quadrature against Simpson on the explicit integrand
    f = PerturbationSpec.from_records([{"c": 0.7, "kQ": 1, "kq": 1, "kt": -1, "phi": 0.4}])
    omega, Q0, T0 = 1.3, 1.1, 2.9

    s = np.linspace(-40.0, 40.0, 512001)
    integrand = (2.0 / np.cosh(s) ** 2) * f.eval(Q0 + omega * s, separatrix_angle(s), T0 + s)
    brute = float(simpson(integrand, x=s))

    res = melnikov_value(omega, Q0, T0, f)
    assert res.value == pytest.approx(brute, abs=1e-9)


def test_melnikov_linearity_in_terms():
    # the integral is linear in f, so term values add
    f1 = PerturbationSpec.from_records([{"c": 1.0, "kQ": 1, "kq": 0, "kt": 0}])
    f2 = PerturbationSpec.from_records([{"c": 1.0, "kQ": 0, "kq": 0, "kt": 1}])
    both = PerturbationSpec.preset("arnold")
    v1 = melnikov_value(0.9, 0.7, 1.9, f1).value
    v2 = melnikov_value(0.9, 0.7, 1.9, f2).value
    v12 = melnikov_value(0.9, 0.7, 1.9, both).value
    assert v12 == pytest.approx(v1 + v2, abs=1e-12)


# ---------------------------------------------------------------------------
# field sampling


def test_field_matches_pointwise_values():
    f = PerturbationSpec.preset("arnold")
    field = melnikov_field(1.0, 16, 16, f)
    for i in (0, 5, 11):
        for j in (0, 7, 15):
            expected = closed_form(1.0, field.Q0[j], field.T0[i])
            assert field.values[i, j] == pytest.approx(expected, abs=1e-10)


def test_field_argmin_at_pi_pi():
    # 32-point grids hit (pi, pi) exactly at index 16
    f = PerturbationSpec.preset("arnold")
    field = melnikov_field(1.0, 32, 32, f)
    T_min, Q_min = field.argmin()
    assert T_min == pytest.approx(math.pi, abs=1e-12)
    assert Q_min == pytest.approx(math.pi, abs=1e-12)
    assert field.values[16, 16] == pytest.approx(ARNOLD_MIN_OMEGA1, abs=1e-10)


def test_field_grid_convention():
    f = PerturbationSpec.preset("arnold")
    field = melnikov_field(1.3, 8, 12, f)
    np.testing.assert_allclose(field.T0, np.arange(8) * TWO_PI / 8, atol=1e-15)
    np.testing.assert_allclose(field.Q0, np.arange(12) * TWO_PI / 12, atol=1e-15)
    assert field.values.shape == (8, 12)
    with pytest.raises(ConfigError):
        melnikov_field(1.0, 1, 8, f)


def test_field_csv(tmp_path):
    from driftlab.records import read_csv_columns

    f = PerturbationSpec.preset("arnold")
    field = melnikov_field(1.0, 4, 4, f)
    path = tmp_path / "field.csv"
    field.to_csv(path)
    cols = read_csv_columns(path)
    assert set(cols) == {"T0", "Q0", "value"}
    assert cols["value"].size == 16


# ---------------------------------------------------------------------------
# certification


def test_certify_at_omega_one():
    f = PerturbationSpec.preset("arnold")
    cert = certify_at(1.0, f)
    assert cert.omega == 1.0
    # polished minimum sits at (pi, pi) with the frozen depth
    assert cert.T_min % TWO_PI == pytest.approx(math.pi, abs=1e-6)
    assert cert.Q_min % TWO_PI == pytest.approx(math.pi, abs=1e-6)
    assert cert.min_value == pytest.approx(ARNOLD_MIN_OMEGA1, abs=5e-3)
    assert cert.gap > 0.0
    assert cert.boundary_min == pytest.approx(cert.min_value + cert.gap, rel=1e-12)
    assert cert.half_width_T <= math.pi / 2 + 1e-12
    assert cert.half_width_Q <= math.pi / 2 + 1e-12
    # full-size box edges pass through the saddle direction: the gap
    # equals the smaller of the two term amplitudes
    assert cert.gap == pytest.approx(min(a_Q(1.0), A_T), rel=1e-6)


def test_certify_gap_shrinks_with_omega():
    # aQ decays with omega, so the certificate weakens monotonically
    f = PerturbationSpec.preset("arnold")
    gaps = [certify_at(w, f).gap for w in (1.0, 1.8, 2.4)]
    assert gaps[0] > gaps[1] > gaps[2] > 0.0


def test_certify_rejects_zero_coupling():
    with pytest.raises(Condition1Violated):
        certify_at(1.0, PerturbationSpec.preset("zero"))


def test_certify_record_fields():
    f = PerturbationSpec.preset("arnold")
    rec = certify_at(1.2, f).to_record()
    for key in ("omega", "T_min", "Q_min", "min_value", "boundary_min", "gap"):
        assert key in rec


def test_sweep_small_band():
    f = PerturbationSpec.preset("arnold")
    certs, global_gap = certify_condition1(omega_range=(0.9, 1.1), omega_step=0.05, f=f)
    assert len(certs) == 5
    assert all(c.gap > 0.0 for c in certs)
    assert global_gap == pytest.approx(min(c.gap for c in certs), rel=1e-15)


def test_sweep_zero_coupling_raises():
    with pytest.raises(Condition1Violated):
        certify_condition1(omega_range=(1.0, 1.05), omega_step=0.05,
                           f=PerturbationSpec.preset("zero"))


# ---------------------------------------------------------------------------
# quadrature helpers


def test_composite_gauss_exactness():
    nodes, weights = composite_gauss(0.0, math.pi)
    assert float(weights @ np.sin(nodes)) == pytest.approx(2.0, abs=1e-13)
    assert float(np.sum(weights)) == pytest.approx(math.pi, rel=1e-14)


def test_truncation_bound_decays():
    f = PerturbationSpec.preset("arnold")
    assert truncation_bound(f, 20.0) < truncation_bound(f, 10.0) < truncation_bound(f, 5.0)
    assert truncation_bound(f, 20.0) == pytest.approx(8.0 * math.exp(-40.0) * 2.0, rel=1e-12)
