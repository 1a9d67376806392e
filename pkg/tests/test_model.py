import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qratchet.model import (DrivingField, FlashingPotential, RatchetSystem,
                            Variant, WaveState, check_flashing_symmetries,
                            check_shift_symmetry, check_time_reversal,
                            field_value, find_reflection_point,
                            flashing_system, potential_value, spatial_profile,
                            system_from_descriptor, system_to_descriptor,
                            tilting_system, vector_potential,
                            vector_potential_integral)

finite = st.floats(allow_nan=False, allow_infinity=False)


def test_field_value_reference_point():
    f = DrivingField(e1=3.0, e2=1.5, omega=1.0, theta=-0.5 * math.pi, t0=0.0)
    assert field_value(f, 0.25 * math.pi) == pytest.approx(
        3.6213203435596424, rel=1e-13)


def test_field_value_is_periodic():
    f = DrivingField(e1=1.3, e2=0.7, omega=2.5, theta=0.4, t0=0.1)
    t = 0.77
    assert field_value(f, t + f.period) == pytest.approx(field_value(f, t),
                                                         abs=1e-12)


def test_vector_potential_anchor_and_derivative():
    f = DrivingField(e1=2.0, e2=1.0, omega=1.7, theta=1.1, t0=0.3)
    assert vector_potential(f, f.t0) == pytest.approx(0.0, abs=1e-14)
    # A' = -E
    h = 1e-6
    for t in (0.0, 0.9, 2.2):
        deriv = (vector_potential(f, t + h) - vector_potential(f, t - h)) / (2 * h)
        assert deriv == pytest.approx(-field_value(f, t), abs=1e-7)


def test_vector_potential_integral_against_quadrature():
    from scipy.integrate import quad
    f = DrivingField(e1=1.5, e2=0.8, omega=2.0, theta=-0.9, t0=0.2)
    val = vector_potential_integral(f, 0.1, 1.7)
    ref, _ = quad(lambda u: vector_potential(f, u), 0.1, 1.7,
                  epsabs=1e-13, epsrel=1e-13)
    assert val == pytest.approx(ref, abs=1e-11)


@given(a=st.floats(-5, 5), b=st.floats(-5, 5), c=st.floats(-5, 5))
@settings(max_examples=50, deadline=None)
def test_vector_potential_integral_additive(a, b, c):
    f = DrivingField(e1=1.0, e2=0.5, omega=1.3, theta=0.7)
    whole = vector_potential_integral(f, a, c)
    split = (vector_potential_integral(f, a, b)
             + vector_potential_integral(f, b, c))
    assert whole == pytest.approx(split, abs=1e-10)


def test_period():
    assert DrivingField(1, 1, 2.0).period == pytest.approx(math.pi)


def test_driving_field_rejects_nonpositive_omega():
    with pytest.raises(ValueError):
        DrivingField(e1=1.0, e2=0.0, omega=0.0)


def test_potential_value_tilting():
    s = tilting_system(e1=1.0, e2=0.0, omega=1.0, n_cut=4)
    for x in (0.0, 1.0, 2.5):
        assert potential_value(s, x, 0.7) == pytest.approx(1.0 + math.cos(x))


def test_potential_value_flashing_matches_profile():
    s = flashing_system(e1=1.0, e2=0.5, omega=1.0, n_cut=4,
                        k=1.5, s=0.25, theta_p=0.3)
    x = np.linspace(0, 2 * np.pi, 17)
    want = 1.5 * (np.cos(x) + 0.25 * np.cos(2 * x + 0.3))
    np.testing.assert_allclose(spatial_profile(s, x), want, atol=1e-14)
    t = 0.9
    np.testing.assert_allclose(potential_value(s, x, t),
                               want * field_value(s.driving, t), atol=1e-13)


def test_wave_state_validation():
    with pytest.raises(ValueError):
        WaveState(np.ones(4) / 2.0)          # even length
    with pytest.raises(ValueError):
        WaveState(np.ones(5))                # badly normalized
    c = np.zeros(5, complex)
    c[2] = 1.0
    w = WaveState(c)
    assert w.n_cut == 2
    assert w.norm_error() < 1e-15


def test_system_validation():
    drv = DrivingField(1.0, 0.5, 1.0)
    with pytest.raises(ValueError):
        RatchetSystem(Variant.TILTING, drv, hbar=0.0, n_cut=4)
    with pytest.raises(ValueError):
        RatchetSystem(Variant.TILTING, drv, n_cut=0)
    with pytest.raises(ValueError):
        RatchetSystem(Variant.TILTING, drv, n_cut=4, kappa=0.1)
    with pytest.raises(ValueError):
        RatchetSystem(Variant.FLASHING, drv, n_cut=4)   # needs a potential
    s = RatchetSystem(Variant.TILTING, drv, n_cut=3)
    assert s.dim == 7
    np.testing.assert_array_equal(s.basis_indices(), np.arange(-3, 4))


def test_descriptor_roundtrip():
    s = flashing_system(e1=2.0, e2=1.5, omega=1.0, theta=-0.5 * np.pi,
                        t0=0.4, hbar=1.0, n_cut=10, k=1.5, s=0.25,
                        theta_p=0.5 * np.pi)
    d = system_to_descriptor(s)
    s2 = system_from_descriptor(d)
    assert s2 == s
    t = tilting_system(e1=3.0, e2=1.5, omega=1.0, hbar=0.2, n_cut=12)
    assert system_from_descriptor(system_to_descriptor(t)) == t


def test_descriptor_rejects_unknown_fields():
    d = system_to_descriptor(tilting_system(e1=1.0, e2=0.0, omega=1.0, n_cut=4))
    d["voltage"] = 3.0
    with pytest.raises(ValueError):
        system_from_descriptor(d)


def test_shift_symmetry_iff_single_harmonic():
    assert check_shift_symmetry(DrivingField(2.0, 0.0, 1.0, theta=0.9))
    assert not check_shift_symmetry(DrivingField(2.0, 0.5, 1.0, theta=0.9))


@given(e1=st.floats(0.1, 4.0), omega=st.floats(0.5, 4.0),
       theta=st.floats(-math.pi, math.pi))
@settings(max_examples=30, deadline=None)
def test_shift_symmetry_property(e1, omega, theta):
    assert check_shift_symmetry(DrivingField(e1, 0.0, omega, theta=theta))


def test_time_reversal_point_detection():
    for theta in (0.0, math.pi):
        f = DrivingField(2.0, 2.0, 2.0, theta=theta, t0=0.0)
        t_r = check_time_reversal(f)
        assert t_r is not None
        t = np.linspace(0.0, f.period, 257)
        np.testing.assert_allclose(field_value(f, 2 * t_r - t),
                                   field_value(f, t), atol=1e-8)
    # the ratchet phase destroys every common reflection point
    assert check_time_reversal(
        DrivingField(2.0, 2.0, 2.0, theta=-0.5 * math.pi)) is None


def test_time_reversal_trivial_without_second_harmonic():
    t_r = check_time_reversal(DrivingField(2.0, 0.0, 1.0))
    assert t_r is not None


def test_find_reflection_point_synthetic():
    omega = 1.0
    period = 2 * math.pi / omega
    shift = 0.8

    def fn(t):
        return np.cos(omega * (np.asarray(t) - shift))

    point = find_reflection_point(fn, period)
    assert point is not None
    assert min((point - shift) % period, (shift - point) % period,
               abs((point - shift) % period - period / 2)) < 1e-6


def test_find_reflection_point_absent_for_skewed_profile():
    period = 2 * math.pi

    def fn(t):
        t = np.asarray(t)
        return np.cos(t) + 0.5 * np.sin(2 * t + 0.7)

    assert find_reflection_point(fn, period) is None


def test_flashing_symmetry_sets():
    base = dict(e1=2.0, e2=0.0, omega=1.0, theta=0.0, hbar=1.0, n_cut=4)
    s_even = flashing_system(k=1.5, s=0.25, theta_p=0.0, **base)
    found = check_flashing_symmetries(s_even)
    assert "S1" in found and "S2" in found
    # the skewed potential kills the spatial reflection but the drive
    # stays even in time
    s_skew = flashing_system(k=1.5, s=0.25, theta_p=0.5 * math.pi, **base)
    found = check_flashing_symmetries(s_skew)
    assert "S1" not in found
    assert "S2" in found
    # pure single-harmonic potential: odd reflection about x = pi/2 plus
    # antiperiodicity, so the shift-type symmetries appear
    s_pure = flashing_system(k=1.5, s=0.0, theta_p=0.0, **base)
    found = check_flashing_symmetries(s_pure)
    assert {"S1", "S2", "S3", "S4"} <= found


def test_flashing_symmetries_broken_at_generic_phase():
    s = flashing_system(e1=2.0, e2=1.5, omega=1.0, theta=-0.5 * math.pi,
                        hbar=1.0, n_cut=4, k=1.5, s=0.25,
                        theta_p=0.5 * math.pi)
    assert check_flashing_symmetries(s) == set()
