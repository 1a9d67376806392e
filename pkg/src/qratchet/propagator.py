"""One-period propagators in the truncated plane-wave basis.

Two independent integrators produce the same unitary and cross-check each
other:

  * kick_split: a position/momentum operator splitting.  The kinetic
    factors are diagonal and use the exact closed-form integral of the
    vector potential over each substep, so the only error is the splitting
    error itself; a triple-jump composition of symmetric substeps pushes
    that to fourth order in the step size.
  * interaction_picture: the coupled amplitude equations in the frame
    where the (gauge) kinetic phases are removed analytically, integrated
    with an adaptive high-order Runge-Kutta method.

Both schemes drop state-independent global phases (the constant part of
the potential and the spatially uniform piece of the gauge kinetic term);
set include_global_phase to restore them as an overall scalar.

Frame convention: a propagator over [t_start, t_end] acts on coefficients
in the gauge frame whose momentum shift g(t) satisfies g(t_start) =
frame_a_start (zero by default, i.e. the frame is released at the window
start).  Physical momentum is hbar*n + g(t).
"""

from __future__ import annotations

import enum
import math
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .model import (RatchetSystem, Variant, WaveState, field_value,
                    vector_potential, vector_potential_integral)

# triple-jump composition coefficients (the middle jump runs backwards)
GAMMA1 = 1.0 / (2.0 - 2.0 ** (1.0 / 3.0))
GAMMA2 = 1.0 - 2.0 * GAMMA1

# node fractions of one step: kick windows [c0,c2],[c2,c4],[c4,c6],
# kinetic segments [c0,c1],[c1,c3],[c3,c5],[c5,c6]
_C1 = 0.5 * GAMMA1
_C2 = GAMMA1
_C3 = GAMMA1 + 0.5 * GAMMA2
_C4 = GAMMA1 + GAMMA2
_C5 = GAMMA1 + GAMMA2 + 0.5 * GAMMA1

_MAGIC = b"FQM1"
_FORMAT_VERSION = 1


class Scheme(enum.Enum):
    KICK_SPLIT = "kick_split"
    INTERACTION_PICTURE = "interaction_picture"


_SCHEME_IDS = {Scheme.KICK_SPLIT: 0, Scheme.INTERACTION_PICTURE: 1}
_SCHEME_FROM_ID = {v: k for k, v in _SCHEME_IDS.items()}


class UnitarityViolation(RuntimeError):
    """The computed propagator is measurably non-unitary."""


class StepSizeUnderflow(RuntimeError):
    """The adaptive integrator failed to reach the requested tolerance."""


@dataclass(frozen=True)
class PropagatorConfig:
    scheme: Scheme = Scheme.KICK_SPLIT
    n_steps: int = 2048          # kick-split steps per drive period
    ode_tolerance: float = 1e-10  # relative tolerance of the adaptive scheme
    include_global_phase: bool = False

    def __post_init__(self):
        if self.n_steps < 1:
            raise ValueError("n_steps must be at least 1")
        if not 0.0 < self.ode_tolerance < 1.0:
            raise ValueError("ode_tolerance must lie in (0, 1)")


def coupling_matrix(system: RatchetSystem) -> np.ndarray:
    """Spatial coupling operator divided by hbar (the kick generator).

    Tilting: the cos x part of the potential, giving 1/(2*hbar) on the
    first codiagonals.  Flashing: the spatial profile, giving K/(2*hbar)
    on the first and K*s*exp(+-i*theta_p)/(2*hbar) on the second
    codiagonals.  The constant part of the tilting potential is a global
    phase and is not included.
    """
    d = system.dim
    if system.variant is Variant.TILTING:
        m = np.zeros((d, d))
        off = 1.0 / (2.0 * system.hbar)
        idx = np.arange(d - 1)
        m[idx, idx + 1] = off
        m[idx + 1, idx] = off
        return m
    pot = system.potential
    m = np.zeros((d, d), dtype=complex)
    idx = np.arange(d - 1)
    m[idx, idx + 1] = pot.k / (2.0 * system.hbar)
    m[idx + 1, idx] = pot.k / (2.0 * system.hbar)
    if d > 2:
        idx2 = np.arange(d - 2)
        # <n| cos(2x + theta_p) |n+2> = exp(-i theta_p)/2
        m[idx2, idx2 + 2] = pot.k * pot.s * np.exp(-1j * pot.theta_p) / (2.0 * system.hbar)
        m[idx2 + 2, idx2] = pot.k * pot.s * np.exp(1j * pot.theta_p) / (2.0 * system.hbar)
    return m


@dataclass
class KickSplitTables:
    """Precomputed spectral data for the kick operator at a fixed step size."""

    dt: float
    n: np.ndarray
    n_sq: np.ndarray
    evals: np.ndarray
    evecs: np.ndarray
    w1: np.ndarray | None = None   # tilting only: fixed kick matrices
    w2: np.ndarray | None = None


def make_tables(system: RatchetSystem, dt: float) -> KickSplitTables:
    n = system.basis_indices().astype(float)
    m = coupling_matrix(system)
    evals, evecs = np.linalg.eigh(m)
    tab = KickSplitTables(dt=dt, n=n, n_sq=n * n, evals=evals, evecs=evecs)
    if system.variant is Variant.TILTING:
        # static kick generator: the two matrices are reused for every step
        tab.w1 = (evecs * np.exp(-1j * GAMMA1 * dt * evals)) @ evecs.T
        tab.w2 = (evecs * np.exp(-1j * GAMMA2 * dt * evals)) @ evecs.T
    return tab


def _kick_split_evolve(system, n_steps, t_start, t_end, a_base, mat, on_step=None):
    """Advance `mat` (columns are states) over [t_start, t_end] in place.

    a_base fixes the gauge frame: the frame momentum shift is
    g(t) = a_base - A(t).  The flashing variant ignores it (no gauge
    transform is used there).  on_step(j, t, mat) is invoked after each
    completed step, j = 1 .. n_steps.
    """
    f = system.driving
    hbar = system.hbar
    dt = (t_end - t_start) / n_steps
    tab = make_tables(system, dt)
    n, n_sq = tab.n, tab.n_sq
    tilting = system.variant is Variant.TILTING
    if tilting:
        qh = None
    else:
        qh = tab.evecs.conj().T

    def kinetic(u1, u2):
        # exp(-i [hbar n^2 (u2-u1)/2 + n int_{u1}^{u2} g dt'])
        du = u2 - u1
        if tilting:
            gi = a_base * du - vector_potential_integral(f, u1, u2)
        else:
            gi = 0.0
        return np.exp(-1j * (0.5 * hbar * du * n_sq + gi * n))

    def kick_flashing(u1, u2, mat):
        # exp(-i M * int_{u1}^{u2} E dt'),  int E = A(u1) - A(u2)
        s = vector_potential(f, u1) - vector_potential(f, u2)
        tmp = qh @ mat
        tmp *= np.exp(-1j * s * tab.evals)[:, None]
        return tab.evecs @ tmp

    for j in range(n_steps):
        ta = t_start + j * dt
        tb = t_start + (j + 1) * dt
        u1, u2, u3, u4, u5 = (ta + _C1 * dt, ta + _C2 * dt, ta + _C3 * dt,
                              ta + _C4 * dt, ta + _C5 * dt)
        mat *= kinetic(ta, u1)[:, None]
        if tilting:
            mat = tab.w1 @ mat
        else:
            mat = kick_flashing(ta, u2, mat)
        mat *= kinetic(u1, u3)[:, None]
        if tilting:
            mat = tab.w2 @ mat
        else:
            mat = kick_flashing(u2, u4, mat)
        mat *= kinetic(u3, u5)[:, None]
        if tilting:
            mat = tab.w1 @ mat
        else:
            mat = kick_flashing(u4, tb, mat)
        mat *= kinetic(u5, tb)[:, None]
        if on_step is not None:
            on_step(j + 1, tb, mat)
    return mat


def _interaction_picture_evolve(system, config, t_start, t_end, a_base, mat):
    """Integrate the interaction-picture amplitude equations over the window."""
    f = system.driving
    hbar = system.hbar
    dim = system.dim
    n = system.basis_indices().astype(float)
    tilting = system.variant is Variant.TILTING
    shape = mat.shape

    # theta_n(u) = hbar n^2 (u - t_start)/2 + n * ig(u), the kinetic phase
    def frame_integral(u):
        if not tilting:
            return 0.0
        return a_base * (u - t_start) - vector_potential_integral(f, t_start, u)

    n_mid = n[:-1]                      # pairs (n, n+1)
    dtheta1_quad = hbar * (2.0 * n_mid + 1.0) / 2.0
    if not tilting:
        pot = system.potential
        n_mid2 = n[:-2]                 # pairs (n, n+2)
        dtheta2_quad = hbar * (4.0 * n_mid2 + 4.0) / 2.0
        v2 = pot.k * pot.s * np.exp(-1j * pot.theta_p) / 2.0

    def rhs(u, y):
        a = y.reshape(shape)
        tau = u - t_start
        out = np.zeros_like(a)
        if tilting:
            up = 0.5 * np.exp(-1j * (dtheta1_quad * tau + frame_integral(u)))
            out[:-1] += up[:, None] * a[1:]
            out[1:] += np.conj(up)[:, None] * a[:-1]
        else:
            e_now = field_value(f, u)
            up1 = (pot.k / 2.0) * e_now * np.exp(-1j * dtheta1_quad * tau)
            out[:-1] += up1[:, None] * a[1:]
            out[1:] += np.conj(up1)[:, None] * a[:-1]
            if dim > 2:
                up2 = v2 * e_now * np.exp(-1j * dtheta2_quad * tau)
                out[:-2] += up2[:, None] * a[2:]
                out[2:] += np.conj(up2)[:, None] * a[:-2]
        out *= -1j / hbar
        return out.reshape(-1)

    rtol = config.ode_tolerance
    sol = solve_ivp(rhs, (t_start, t_end), mat.reshape(-1).astype(complex),
                    method="DOP853", rtol=rtol, atol=rtol * 1e-2,
                    dense_output=False)
    if not sol.success:
        raise StepSizeUnderflow(f"adaptive integrator failed: {sol.message}")
    a_end = sol.y[:, -1].reshape(shape)
    tau_end = t_end - t_start
    theta_end = 0.5 * hbar * n * n * tau_end + n * frame_integral(t_end)
    return np.exp(-1j * theta_end)[:, None] * a_end


def _global_phase(system, t_start, t_end, a_base, order=64):
    """Scalar phase dropped by both schemes: exp(-i/hbar int [g^2/2 + v0] dt).

    v0 is the uniform part of the potential (1 for the tilting variant,
    0 for the flashing one, whose spatial profile has zero mean).
    """
    if system.variant is not Variant.TILTING:
        return 1.0 + 0.0j
    f = system.driving
    nodes, weights = np.polynomial.legendre.leggauss(order)
    mid = 0.5 * (t_start + t_end)
    half = 0.5 * (t_end - t_start)
    t = mid + half * nodes
    g = a_base - vector_potential(f, t)
    integral = half * float(np.sum(weights * 0.5 * g * g))
    v0 = 1.0
    return np.exp(-1j * (integral + v0 * (t_end - t_start)) / system.hbar)


@dataclass
class FloquetMatrix:
    """A one-window propagator with its provenance.

    matrix[i, j] = <n_i | U | n_j> in the gauge frame described in the
    module docstring.  Construction verifies unitarity and raises
    UnitarityViolation when max |U+ U - 1| reaches 1e-6.
    """

    matrix: np.ndarray
    system: RatchetSystem | None
    config: PropagatorConfig
    t_start: float
    t_end: float
    frame_a_start: float = 0.0
    unitarity_error: float = field(init=False, default=0.0)

    def __post_init__(self):
        u = np.asarray(self.matrix)
        if u.ndim != 2 or u.shape[0] != u.shape[1] or u.shape[0] % 2 == 0:
            raise ValueError("propagator must be a square matrix of odd dimension")
        if self.system is not None and u.shape[0] != self.system.dim:
            raise ValueError("propagator dimension does not match the system cutoff")
        gram = u.conj().T @ u
        gram[np.diag_indices_from(gram)] -= 1.0
        self.unitarity_error = float(np.max(np.abs(gram)))
        if self.unitarity_error >= 1e-6:
            raise UnitarityViolation(
                f"max |U+ U - 1| = {self.unitarity_error:.3e}")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def window(self) -> tuple:
        return (self.t_start, self.t_end)

    def spans_full_period(self, rel_tol=1e-12) -> bool:
        if self.system is None:
            return False
        period = self.system.driving.period
        return abs((self.t_end - self.t_start) - period) <= rel_tol * period


def build_window_propagator(system: RatchetSystem, config: PropagatorConfig,
                            t_start: float, t_end: float,
                            frame_a_start: float = 0.0) -> FloquetMatrix:
    """Propagator over an arbitrary lab-time window [t_start, t_end]."""
    if not t_end > t_start:
        raise ValueError("t_end must exceed t_start")
    f = system.driving
    a_base = frame_a_start + vector_potential(f, t_start)
    mat = np.eye(system.dim, dtype=complex)
    if config.scheme is Scheme.KICK_SPLIT:
        frac = (t_end - t_start) / f.period
        n_steps = max(1, int(round(config.n_steps * frac)))
        mat = _kick_split_evolve(system, n_steps, t_start, t_end, a_base, mat)
    else:
        mat = _interaction_picture_evolve(system, config, t_start, t_end,
                                          a_base, mat)
    if config.include_global_phase:
        mat = mat * _global_phase(system, t_start, t_end, a_base)
    return FloquetMatrix(matrix=mat, system=system, config=config,
                         t_start=t_start, t_end=t_end,
                         frame_a_start=frame_a_start)


def build_floquet_matrix(system: RatchetSystem,
                         config: PropagatorConfig | None = None) -> FloquetMatrix:
    """One-period propagator over the lab window [0, T].

    The drive itself is anchored at system.driving.t0, so changing t0
    slides the force pattern through the fixed integration window; that is
    what makes the launch phase a physical parameter.
    """
    if config is None:
        config = PropagatorConfig()
    return build_window_propagator(system, config, 0.0,
                                   system.driving.period, 0.0)


def _advance_state(state: WaveState, system: RatchetSystem,
                   config: PropagatorConfig, duration, use_ip: bool) -> WaveState:
    if duration is None:
        duration = system.driving.period
    if not duration > 0.0:
        raise ValueError("duration must be positive")
    if state.coeffs.size != system.dim:
        raise ValueError("state dimension does not match the system cutoff")
    f = system.driving
    t1 = state.time
    t2 = t1 + duration
    a_base = state.frame_a + vector_potential(f, t1)
    vec = state.coeffs.copy().reshape(-1, 1)
    if use_ip:
        vec = _interaction_picture_evolve(system, config, t1, t2, a_base, vec)
    else:
        frac = duration / f.period
        n_steps = max(1, int(round(config.n_steps * frac)))
        vec = _kick_split_evolve(system, n_steps, t1, t2, a_base, vec)
    if config.include_global_phase:
        vec = vec * _global_phase(system, t1, t2, a_base)
    return WaveState(coeffs=vec.reshape(-1), time=t2,
                     frame_a=a_base - vector_potential(f, t2))


def step_kick_split(state: WaveState, system: RatchetSystem,
                    config: PropagatorConfig | None = None,
                    duration=None) -> WaveState:
    """Advance a wave state with the splitting integrator."""
    return _advance_state(state, system, config or PropagatorConfig(),
                          duration, use_ip=False)


def step_interaction_picture(state: WaveState, system: RatchetSystem,
                             config: PropagatorConfig | None = None,
                             duration=None) -> WaveState:
    """Advance a wave state with the adaptive interaction-picture integrator."""
    return _advance_state(state, system, config or PropagatorConfig(),
                          duration, use_ip=True)


# ---------------------------------------------------------------------------
# persistence

_HEADER = struct.Struct("<4sIIIdddd")


def save_floquet_matrix(fm: FloquetMatrix, path) -> None:
    """Write a propagator to a binary file.

    Header fields: magic, format version, dimension, scheme id, then
    hbar, omega, theta, t0 of the system the matrix was built for.
    """
    if fm.system is None:
        raise ValueError("cannot save a propagator without its system")
    f = fm.system.driving
    header = _HEADER.pack(_MAGIC, _FORMAT_VERSION, fm.dim,
                          _SCHEME_IDS[fm.config.scheme],
                          fm.system.hbar, f.omega, f.theta, f.t0)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(fm.matrix, dtype=complex).tobytes())


def load_floquet_matrix(path, system: RatchetSystem | None = None,
                        config: PropagatorConfig | None = None) -> FloquetMatrix:
    """Read a propagator written by save_floquet_matrix.

    When a system is supplied the header must match it; the returned
    matrix is then usable for spectral analysis.  Without one, only the
    raw matrix and header metadata are restored.
    """
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
        if len(raw) != _HEADER.size:
            raise ValueError("truncated propagator file")
        magic, version, dim, scheme_id, hbar, omega, theta, t0 = _HEADER.unpack(raw)
        if magic != _MAGIC:
            raise ValueError("not a propagator file (bad magic)")
        if version != _FORMAT_VERSION:
            raise ValueError(f"unsupported format version {version}")
        if scheme_id not in _SCHEME_FROM_ID:
            raise ValueError(f"unknown scheme id {scheme_id}")
        data = np.frombuffer(fh.read(), dtype=complex)
    if data.size != dim * dim:
        raise ValueError("propagator payload has the wrong size")
    mat = data.reshape(dim, dim).copy()
    if system is not None:
        fld = system.driving
        same = (system.dim == dim
                and math.isclose(system.hbar, hbar, rel_tol=0.0, abs_tol=1e-12)
                and math.isclose(fld.omega, omega, rel_tol=0.0, abs_tol=1e-12)
                and math.isclose(fld.theta, theta, rel_tol=0.0, abs_tol=1e-12)
                and math.isclose(fld.t0, t0, rel_tol=0.0, abs_tol=1e-12))
        if not same:
            raise ValueError("propagator header does not match the given system")
    if config is None:
        config = PropagatorConfig(scheme=_SCHEME_FROM_ID[scheme_id])
    period = 2.0 * math.pi / omega
    return FloquetMatrix(matrix=mat, system=system, config=config,
                         t_start=0.0, t_end=period, frame_a_start=0.0)


def default_n_cut(system_or_field, hbar: float | None = None) -> int:
    """Basis cutoff heuristic: cover the classically visited momentum range.

    The estimate adds the peak gauge momentum excursion of the drive to
    the width of the chaotic layer around the resonance region, converts
    to the plane-wave index and pads the result.
    """
    if isinstance(system_or_field, RatchetSystem):
        f = system_or_field.driving
        hbar = system_or_field.hbar
        if system_or_field.variant is Variant.TILTING:
            v_span = 2.0
        else:
            pot = system_or_field.potential
            v_span = 2.0 * abs(pot.k) * (1.0 + abs(pot.s)) * (abs(f.e1) + abs(f.e2))
    else:
        f = system_or_field
        if hbar is None:
            raise ValueError("hbar is required when passing a bare field")
        v_span = 2.0
    a_max = abs(f.e1) / f.omega + abs(f.e2) / (2.0 * f.omega)
    p_max = a_max + math.sqrt(2.0 * v_span) + 2.0
    return max(8, int(math.ceil(p_max / hbar)) + 8)
