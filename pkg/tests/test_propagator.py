import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qratchet.model import (DrivingField, WaveState, flashing_system,
                            spatial_profile, tilting_system, vector_potential)
from qratchet.propagator import (FloquetMatrix, PropagatorConfig, Scheme,
                                 StepSizeUnderflow, UnitarityViolation,
                                 build_floquet_matrix,
                                 build_window_propagator, coupling_matrix,
                                 default_n_cut, load_floquet_matrix,
                                 save_floquet_matrix, step_interaction_picture,
                                 step_kick_split)


def test_coupling_matrix_reconstructs_potential_tilting():
    s = tilting_system(e1=1.0, e2=0.5, omega=1.0, hbar=0.2, n_cut=6)
    m = coupling_matrix(s)
    assert np.allclose(m, m.conj().T)
    c = s.n_cut
    x = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    rec = np.zeros_like(x)
    for k in range(-c, c + 1):
        rec = rec + np.real(s.hbar * m[c + k, c] * np.exp(1j * k * x))
    # the kick generator carries the x-dependent part only; the constant
    # offset of 1 + cos x is a global phase
    np.testing.assert_allclose(rec, spatial_profile(s, x) - 1.0, atol=1e-10)


def test_coupling_matrix_reconstructs_potential_flashing():
    s = flashing_system(e1=1.0, e2=0.5, omega=1.0, hbar=0.7, n_cut=6,
                        k=1.5, s=0.25, theta_p=0.4)
    m = coupling_matrix(s)
    assert np.allclose(m, m.conj().T)
    c = s.n_cut
    x = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    rec = np.zeros(x.size, dtype=complex)
    for k in range(-c, c + 1):
        rec = rec + s.hbar * m[c + k, c] * np.exp(1j * k * x)
    assert np.abs(rec.imag).max() < 1e-12
    np.testing.assert_allclose(rec.real, spatial_profile(s, x), atol=1e-10)


def test_unitarity(fig1_matrix):
    assert fig1_matrix.unitarity_error < 1e-9


def test_unitarity_interaction_picture(fig1_system):
    cfg = PropagatorConfig(scheme=Scheme.INTERACTION_PICTURE,
                           ode_tolerance=1e-10)
    fm = build_floquet_matrix(fig1_system, cfg)
    assert fm.unitarity_error < 1e-7


def test_composition_over_half_periods(fig1_system, fig1_config):
    s = fig1_system
    T = s.driving.period
    full = build_floquet_matrix(s, fig1_config).matrix
    fm1 = build_window_propagator(s, fig1_config, 0.0, 0.5 * T)
    g1 = fm1.frame_a_start + vector_potential(s.driving, 0.0) \
        - vector_potential(s.driving, 0.5 * T)
    fm2 = build_window_propagator(s, fig1_config, 0.5 * T, T,
                                  frame_a_start=g1)
    assert np.abs(fm2.matrix @ fm1.matrix - full).max() < 1e-9


def test_step_doubling_convergence():
    s = tilting_system(e1=2.0, e2=2.0, omega=2.0, theta=-0.5 * np.pi,
                       hbar=0.2, n_cut=16)
    u1 = build_floquet_matrix(s, PropagatorConfig(n_steps=512)).matrix
    u2 = build_floquet_matrix(s, PropagatorConfig(n_steps=1024)).matrix
    assert np.abs(u1 - u2).max() < 1e-4
    # fourth-order scheme: doubling again shrinks the defect by ~16x
    u3 = build_floquet_matrix(s, PropagatorConfig(n_steps=2048)).matrix
    d12 = np.abs(u1 - u2).max()
    d23 = np.abs(u2 - u3).max()
    assert d23 < d12 / 8.0


def test_schemes_agree(fig1_system):
    s = dataclasses.replace(fig1_system, n_cut=12)
    u_ks = build_floquet_matrix(s, PropagatorConfig(n_steps=1024)).matrix
    u_ip = build_floquet_matrix(
        s, PropagatorConfig(scheme=Scheme.INTERACTION_PICTURE,
                            ode_tolerance=1e-10)).matrix
    assert np.abs(u_ks - u_ip).max() < 1e-5


def test_schemes_agree_flashing():
    s = flashing_system(e1=1.5, e2=1.0, omega=1.0, theta=0.8, hbar=1.0,
                        n_cut=10, k=1.2, s=0.3, theta_p=0.6)
    u_ks = build_floquet_matrix(s, PropagatorConfig(n_steps=1024)).matrix
    u_ip = build_floquet_matrix(
        s, PropagatorConfig(scheme=Scheme.INTERACTION_PICTURE,
                            ode_tolerance=1e-10)).matrix
    assert np.abs(u_ks - u_ip).max() < 1e-5


def test_static_limit_matches_exact_eigenphases():
    # with the drive off, the propagator is exp(-i H T / hbar) of the
    # static pendulum Hamiltonian; include the global phase so the
    # comparison is absolute
    s = tilting_system(e1=0.0, e2=0.0, omega=2.7, hbar=1.0, n_cut=12)
    cfg = PropagatorConfig(n_steps=1024, include_global_phase=True)
    fm = build_floquet_matrix(s, cfg)
    n = s.basis_indices().astype(float)
    h = np.diag(0.5 * s.hbar ** 2 * n ** 2 + 1.0) \
        + 0.5 * (np.eye(s.dim, k=1) + np.eye(s.dim, k=-1))
    evals = np.linalg.eigvalsh(h)
    T = s.driving.period
    lam_exact = np.exp(-1j * evals * T / s.hbar)
    lam = np.linalg.eigvals(fm.matrix)
    for le in lam_exact:
        assert np.abs(lam - le).min() < 1e-8


def test_global_phase_constant_offset():
    s = tilting_system(e1=0.0, e2=0.0, omega=2.0, hbar=0.5, n_cut=8)
    plain = build_floquet_matrix(s, PropagatorConfig(n_steps=256)).matrix
    gp = build_floquet_matrix(
        s, PropagatorConfig(n_steps=256, include_global_phase=True)).matrix
    T = s.driving.period
    np.testing.assert_allclose(gp, plain * np.exp(-1j * T / s.hbar),
                               atol=1e-12)


def test_global_phase_noop_for_flashing():
    s = flashing_system(e1=1.0, e2=0.5, omega=1.0, hbar=1.0, n_cut=6,
                        k=1.0, s=0.2, theta_p=0.1)
    plain = build_floquet_matrix(s, PropagatorConfig(n_steps=256)).matrix
    gp = build_floquet_matrix(
        s, PropagatorConfig(n_steps=256, include_global_phase=True)).matrix
    np.testing.assert_allclose(gp, plain, atol=1e-14)


def test_step_matches_matrix(fig1_system, fig1_config, fig1_matrix):
    s = fig1_system
    c0 = np.zeros(s.dim, complex)
    c0[s.n_cut] = 1.0
    out = step_kick_split(WaveState(c0), s, fig1_config)
    np.testing.assert_allclose(out.coeffs, fig1_matrix.matrix[:, s.n_cut],
                               atol=1e-12)
    assert out.time == pytest.approx(s.driving.period)
    assert out.frame_a == pytest.approx(0.0, abs=1e-12)


def test_step_interaction_picture_matches_matrix(fig1_system):
    s = dataclasses.replace(fig1_system, n_cut=10)
    cfg = PropagatorConfig(scheme=Scheme.INTERACTION_PICTURE,
                           ode_tolerance=1e-10)
    fm = build_floquet_matrix(s, cfg)
    c0 = np.zeros(s.dim, complex)
    c0[s.n_cut] = 1.0
    out = step_interaction_picture(WaveState(c0), s, cfg)
    np.testing.assert_allclose(out.coeffs, fm.matrix[:, s.n_cut], atol=1e-6)


def test_two_half_steps_equal_one_full_step(fig1_system, fig1_config):
    s = fig1_system
    T = s.driving.period
    c0 = np.zeros(s.dim, complex)
    c0[s.n_cut] = 1.0
    one = step_kick_split(WaveState(c0), s, fig1_config)
    half = step_kick_split(WaveState(c0), s, fig1_config, duration=0.5 * T)
    two = step_kick_split(half, s, fig1_config, duration=0.5 * T)
    np.testing.assert_allclose(two.coeffs, one.coeffs, atol=1e-9)
    assert two.frame_a == pytest.approx(one.frame_a, abs=1e-12)


def test_save_load_roundtrip(tmp_path, fig1_matrix, fig1_system, fig1_config):
    path = tmp_path / "u.fqm"
    save_floquet_matrix(fig1_matrix, path)
    back = load_floquet_matrix(path, system=fig1_system, config=fig1_config)
    np.testing.assert_array_equal(back.matrix, fig1_matrix.matrix)
    assert back.dim == fig1_matrix.dim


def test_load_rejects_mismatched_system(tmp_path, fig1_matrix, fig1_system):
    path = tmp_path / "u.fqm"
    save_floquet_matrix(fig1_matrix, path)
    other = dataclasses.replace(
        fig1_system,
        driving=dataclasses.replace(fig1_system.driving, theta=0.25))
    with pytest.raises(ValueError):
        load_floquet_matrix(path, system=other)


def test_load_rejects_corrupt_file(tmp_path, fig1_matrix):
    path = tmp_path / "u.fqm"
    save_floquet_matrix(fig1_matrix, path)
    raw = path.read_bytes()
    (tmp_path / "bad_magic.fqm").write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(ValueError):
        load_floquet_matrix(tmp_path / "bad_magic.fqm")
    (tmp_path / "short.fqm").write_bytes(raw[:len(raw) // 2])
    with pytest.raises(ValueError):
        load_floquet_matrix(tmp_path / "short.fqm")


def test_unitarity_violation_raised(fig1_matrix):
    with pytest.raises(UnitarityViolation):
        dataclasses.replace(fig1_matrix, matrix=1.5 * fig1_matrix.matrix)


def test_step_size_underflow():
    s = tilting_system(e1=float("nan"), e2=0.0, omega=1.0, hbar=0.2, n_cut=4)
    cfg = PropagatorConfig(scheme=Scheme.INTERACTION_PICTURE,
                           ode_tolerance=1e-10)
    with pytest.raises(StepSizeUnderflow):
        build_floquet_matrix(s, cfg)


def test_default_n_cut_heuristic(fig1_system):
    n_sys = default_n_cut(fig1_system)
    n_field = default_n_cut(fig1_system.driving, hbar=fig1_system.hbar)
    assert n_sys == n_field
    assert n_sys >= 8
    # slower drive swings the gauge momentum further
    slow = DrivingField(e1=3.0, e2=1.5, omega=0.5)
    fast = DrivingField(e1=3.0, e2=1.5, omega=3.0)
    assert default_n_cut(slow, hbar=0.2) > default_n_cut(fast, hbar=0.2)


def test_propagator_config_validation():
    with pytest.raises(ValueError):
        PropagatorConfig(n_steps=0)
    with pytest.raises(ValueError):
        PropagatorConfig(ode_tolerance=0.0)


def test_window_requires_forward_time(fig1_system, fig1_config):
    with pytest.raises(ValueError):
        build_window_propagator(fig1_system, fig1_config, 1.0, 1.0)


@given(e1=st.floats(0.2, 2.5), e2=st.floats(0.0, 2.0),
       omega=st.floats(0.8, 3.0), theta=st.floats(-math.pi, math.pi))
@settings(max_examples=12, deadline=None)
def test_unitarity_random_systems(e1, e2, omega, theta):
    s = tilting_system(e1=e1, e2=e2, omega=omega, theta=theta,
                       hbar=0.5, n_cut=6)
    fm = build_floquet_matrix(s, PropagatorConfig(n_steps=128))
    assert fm.unitarity_error < 1e-8
