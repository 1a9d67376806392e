"""Physical definitions for the driven ratchet systems.

Two Hamiltonian variants live on the ring x in [0, 2*pi):

    tilting:   H = p^2/2 + (1 + cos x) - x E(t)
    flashing:  H = p^2/2 + U(x) E(t),   U(x) = K [cos x + s cos(2x + theta_p)]

driven by the two-harmonic zero-mean force

    E(t) = E1 cos(w (t - t0)) + E2 cos(2 w (t - t0) + theta),  T = 2*pi / w.

The tilting variant is integrated in the gauge frame where the tilt -x E(t)
is replaced by a vector potential A(t) = -int E dt'.  This module holds the
closed forms for E, A and the running integral of A (the propagator needs
the latter exactly, drift-free over thousands of periods), together with
the symmetry predicates that decide whether directed transport is
forbidden for a given parameter set.

Momentum units: the natural momentum quantum on the ring is hbar (recoil
momentum with unit wave number).  Currents elsewhere in the package are
reported in these units.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * math.pi

# resolution / tolerance for the grid-based symmetry predicates
_SYM_GRID = 4096
_SYM_TOL = 1e-10


class Variant(enum.Enum):
    TILTING = "tilting"
    FLASHING = "flashing"


@dataclass(frozen=True)
class DrivingField:
    """Two-harmonic driving force with zero period mean.

    e1, e2   : harmonic amplitudes
    omega    : angular frequency of the fundamental, period T = 2*pi/omega
    theta    : relative phase of the second harmonic (radians)
    t0       : time anchor of the drive; the force is a function of t - t0
    """

    e1: float
    e2: float
    omega: float
    theta: float = 0.0
    t0: float = 0.0

    def __post_init__(self):
        if not self.omega > 0.0:
            raise ValueError(f"omega must be positive, got {self.omega}")

    @property
    def period(self) -> float:
        return TWO_PI / self.omega


@dataclass(frozen=True)
class FlashingPotential:
    """Spatial profile K [cos x + s cos(2x + theta_p)] of the flashing variant."""

    k: float
    s: float
    theta_p: float = 0.0


@dataclass(frozen=True)
class RatchetSystem:
    """A Hamiltonian variant plus effective Planck constant and basis cutoff.

    The plane-wave basis is |n> = exp(i n x)/sqrt(2*pi) with
    n = -n_cut .. n_cut (dimension 2*n_cut + 1).  kappa is the Bloch phase
    across one spatial period and is pinned to zero.
    """

    variant: Variant
    driving: DrivingField
    potential: FlashingPotential | None = None
    hbar: float = 0.2
    n_cut: int = 64
    kappa: float = 0.0

    def __post_init__(self):
        if self.n_cut < 1:
            raise ValueError("n_cut must be at least 1")
        if not self.hbar > 0.0:
            raise ValueError("hbar must be positive")
        if self.kappa != 0.0:
            raise ValueError("only the kappa = 0 Bloch sector is supported")
        if self.variant is Variant.FLASHING and self.potential is None:
            raise ValueError("flashing variant needs a FlashingPotential")

    @property
    def dim(self) -> int:
        return 2 * self.n_cut + 1

    def basis_indices(self) -> np.ndarray:
        return np.arange(-self.n_cut, self.n_cut + 1)


def tilting_system(e1, e2, omega, theta=0.0, t0=0.0, hbar=0.2, n_cut=64) -> RatchetSystem:
    return RatchetSystem(
        variant=Variant.TILTING,
        driving=DrivingField(e1=e1, e2=e2, omega=omega, theta=theta, t0=t0),
        hbar=hbar,
        n_cut=n_cut,
    )


def flashing_system(e1, e2, omega, theta=0.0, t0=0.0, hbar=1.0, n_cut=24,
                    k=1.5, s=0.25, theta_p=0.0) -> RatchetSystem:
    return RatchetSystem(
        variant=Variant.FLASHING,
        driving=DrivingField(e1=e1, e2=e2, omega=omega, theta=theta, t0=t0),
        potential=FlashingPotential(k=k, s=s, theta_p=theta_p),
        hbar=hbar,
        n_cut=n_cut,
    )


_DESCRIPTOR_FIELDS = ("variant", "e1", "e2", "omega", "theta", "t0", "hbar",
                      "n_cut", "k", "s", "theta_p")


def system_from_descriptor(d: dict) -> RatchetSystem:
    """Build a RatchetSystem from the flat JSON descriptor used by the CLI."""
    unknown = set(d) - set(_DESCRIPTOR_FIELDS)
    if unknown:
        raise ValueError(f"unknown descriptor fields: {sorted(unknown)}")
    variant = Variant(d.get("variant", "tilting"))
    drv = DrivingField(
        e1=float(d.get("e1", 0.0)),
        e2=float(d.get("e2", 0.0)),
        omega=float(d.get("omega", 1.0)),
        theta=float(d.get("theta", 0.0)),
        t0=float(d.get("t0", 0.0)),
    )
    pot = None
    if variant is Variant.FLASHING:
        pot = FlashingPotential(
            k=float(d.get("k", 1.0)),
            s=float(d.get("s", 0.0)),
            theta_p=float(d.get("theta_p", 0.0)),
        )
    return RatchetSystem(
        variant=variant,
        driving=drv,
        potential=pot,
        hbar=float(d.get("hbar", 0.2)),
        n_cut=int(d.get("n_cut", 64)),
    )


def system_to_descriptor(sys: RatchetSystem) -> dict:
    d = {
        "variant": sys.variant.value,
        "e1": sys.driving.e1,
        "e2": sys.driving.e2,
        "omega": sys.driving.omega,
        "theta": sys.driving.theta,
        "t0": sys.driving.t0,
        "hbar": sys.hbar,
        "n_cut": sys.n_cut,
    }
    if sys.potential is not None:
        d.update(k=sys.potential.k, s=sys.potential.s, theta_p=sys.potential.theta_p)
    return d


@dataclass
class WaveState:
    """Plane-wave coefficients c_n at a given time, in the gauge frame.

    frame_a is the accumulated vector potential of the frame at `time`
    (zero at the time the state was prepared).  The constructor rejects
    badly non-normalized coefficient vectors; unitary propagation keeps
    the norm far inside the tolerance.
    """

    coeffs: np.ndarray
    time: float = 0.0
    frame_a: float = 0.0

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=complex)
        if self.coeffs.ndim != 1 or self.coeffs.size % 2 == 0:
            raise ValueError("coeffs must be a 1-d vector of odd length")
        norm2 = float(np.sum(np.abs(self.coeffs) ** 2))
        if abs(norm2 - 1.0) > 1e-8:
            raise ValueError(f"state is not normalized: sum |c_n|^2 = {norm2!r}")

    @property
    def n_cut(self) -> int:
        return (self.coeffs.size - 1) // 2

    def norm_error(self) -> float:
        return abs(float(np.sum(np.abs(self.coeffs) ** 2)) - 1.0)


# ---------------------------------------------------------------------------
# closed forms

def field_value(f: DrivingField, t):
    """Driving force E at time t (scalar or array)."""
    tau = np.asarray(t, dtype=float) - f.t0
    out = f.e1 * np.cos(f.omega * tau) + f.e2 * np.cos(2.0 * f.omega * tau + f.theta)
    return out if out.ndim else float(out)


def vector_potential(f: DrivingField, t):
    """Vector potential A(t) = -int E dt', anchored so that A(t0) = 0."""
    tau = np.asarray(t, dtype=float) - f.t0
    out = -(f.e1 / f.omega) * np.sin(f.omega * tau) \
        - (f.e2 / (2.0 * f.omega)) * (np.sin(2.0 * f.omega * tau + f.theta)
                                      - math.sin(f.theta))
    return out if out.ndim else float(out)


def _apot_antiderivative(f: DrivingField, tau):
    # antiderivative of the closed-form A as a function of tau = t - t0;
    # the secular term carries the nonzero period mean of A for theta != 0
    return (f.e1 / f.omega**2) * np.cos(f.omega * tau) \
        + (f.e2 / (4.0 * f.omega**2)) * np.cos(2.0 * f.omega * tau + f.theta) \
        + (f.e2 * math.sin(f.theta) / (2.0 * f.omega)) * tau


def vector_potential_integral(f: DrivingField, t1, t2):
    """Exact integral of A over [t1, t2]."""
    return _apot_antiderivative(f, np.asarray(t2, dtype=float) - f.t0) \
        - _apot_antiderivative(f, np.asarray(t1, dtype=float) - f.t0)


def spatial_profile(sys: RatchetSystem, x):
    """Static spatial factor of the potential (tilting: 1 + cos x)."""
    x = np.asarray(x, dtype=float)
    if sys.variant is Variant.TILTING:
        out = 1.0 + np.cos(x)
    else:
        pot = sys.potential
        out = pot.k * (np.cos(x) + pot.s * np.cos(2.0 * x + pot.theta_p))
    return out if out.ndim else float(out)


def potential_value(sys: RatchetSystem, x, t):
    """Potential energy at position x and time t.

    The tilting potential is static (the drive enters as a tilt handled by
    the gauge frame); the flashing potential is the spatial profile times
    the instantaneous drive.
    """
    if sys.variant is Variant.TILTING:
        return spatial_profile(sys, x)
    return spatial_profile(sys, x) * field_value(sys.driving, t)


# ---------------------------------------------------------------------------
# symmetry predicates
#
# All of these work on dense grids of a closed-form periodic function.  A
# periodic function is even (odd) about a reflection point exactly when all
# its Fourier coefficients are real (imaginary) after shifting the origin
# there, which turns the existence search into a couple of candidate roots
# of the lowest harmonic plus a residual check; a short golden-section
# polish on the direct grid residual then guards against conditioning of
# the Fourier route.


def _reflection_residual(fn, period, point, sign, n_grid):
    d = period * np.arange(1, n_grid // 2) / n_grid
    return float(np.max(np.abs(fn(point + d) - sign * fn(point - d))))


def _golden_polish(res_fn, lo, hi, iters=60):
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = res_fn(c), res_fn(d)
    for _ in range(iters):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = res_fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = res_fn(d)
    return (a + b) / 2.0


def find_reflection_point(fn, period, anti=False, n_grid=_SYM_GRID, tol=_SYM_TOL):
    """Return a point about which the periodic fn is even (odd if anti), or None.

    fn must accept numpy arrays.  The returned point lies in [0, period).
    """
    grid = period * np.arange(n_grid) / n_grid
    samples = np.asarray(fn(grid), dtype=float)
    scale = float(np.max(np.abs(samples)))
    if scale < tol:
        return 0.0 if not anti else 0.0  # identically zero is both even and odd
    c = np.fft.rfft(samples) / n_grid
    mags = np.abs(c)
    if anti and mags[0] > tol * max(scale, 1.0):
        return None  # an odd function has no mean
    harmonics = np.nonzero(mags[1:] > 1e-9 * scale)[0] + 1
    if harmonics.size == 0:
        return None if anti else 0.0
    m0 = int(harmonics[0])
    w0 = TWO_PI / period
    phase = math.atan2(c[m0].imag, c[m0].real)
    # candidates where harmonic m0 satisfies its parity condition
    if anti:
        ks = (np.arange(2 * m0) + 0.5) * math.pi
    else:
        ks = np.arange(2 * m0) * math.pi
    candidates = ((ks - phase) / (m0 * w0)) % period
    best = None
    for cand in sorted(candidates):
        res = _reflection_residual(lambda u: fn(u), period, cand, -1.0 if anti else 1.0,
                                   n_grid)
        if res < tol * max(scale, 1.0) * 10.0:
            # polish on the direct residual
            h = period / n_grid
            polished = _golden_polish(
                lambda u: _reflection_residual(fn, period, u, -1.0 if anti else 1.0,
                                               n_grid),
                cand - h, cand + h)
            res_p = _reflection_residual(fn, period, polished, -1.0 if anti else 1.0,
                                         n_grid)
            pick = polished if res_p <= res else cand
            if best is None:
                best = pick
    return best


def check_shift_symmetry(f: DrivingField, n_grid=_SYM_GRID) -> bool:
    """True when E(t) = -E(t + T/2) on a dense grid.

    For the two-harmonic drive this holds only when the second harmonic is
    absent (a pure second harmonic has period T/2, so the half-period shift
    reproduces +E rather than -E).
    """
    t = f.t0 + f.period * np.arange(n_grid) / n_grid
    res = np.max(np.abs(field_value(f, t) + field_value(f, t + f.period / 2.0)))
    return bool(res < 1e-12 * max(1.0, abs(f.e1) + abs(f.e2)))


def check_time_reversal(f: DrivingField):
    """Return a time t_s with E(t_s + t) = E(t_s - t) if one exists, else None.

    For the two-harmonic drive a reflection point exists iff theta is a
    multiple of pi (or one amplitude vanishes).  The returned point is the
    admissible one closest to t0, mapped into [t0, t0 + T).
    """
    point = find_reflection_point(lambda u: field_value(f, f.t0 + u), f.period,
                                  anti=False)
    if point is None:
        return None
    # prefer the symmetry point nearest the drive anchor
    cands = [point, (point + f.period / 2.0) % f.period]
    good = []
    for cand in cands:
        res = _reflection_residual(lambda u: field_value(f, f.t0 + u), f.period,
                                   cand, 1.0, _SYM_GRID)
        if res < _SYM_TOL * max(1.0, abs(f.e1) + abs(f.e2)) * 10.0:
            good.append(cand)
    if not good:
        return None
    best = min(good, key=lambda cand: min(cand, f.period - cand))
    return f.t0 + best


def check_flashing_symmetries(sys: RatchetSystem) -> set:
    """Evaluate the four transport-forbidding symmetries of the flashing variant.

    Returns the subset of {"S1", "S2", "S3", "S4"} satisfied:
      S1: the spatial profile is even about some x_s
      S2: the drive is even about some t_s
      S3: the drive is shift-antisymmetric, E(t) = -E(t + T/2), and the
          spatial profile is odd about some x_s
      S4: the drive is odd about some t_s and the profile obeys
          U(x) = -U(x + pi)
    """
    if sys.variant is not Variant.FLASHING:
        raise ValueError("flashing symmetry check needs the flashing variant")
    f = sys.driving
    prof = lambda x: spatial_profile(sys, x)
    found = set()
    if find_reflection_point(prof, TWO_PI) is not None:
        found.add("S1")
    if check_time_reversal(f) is not None:
        found.add("S2")
    if check_shift_symmetry(f) and find_reflection_point(prof, TWO_PI, anti=True) is not None:
        found.add("S3")
    # S4: odd drive about some point, and profile antiperiodic by half a period
    odd_drive = find_reflection_point(lambda u: field_value(f, f.t0 + u), f.period,
                                      anti=True)
    x = TWO_PI * np.arange(_SYM_GRID) / _SYM_GRID
    antiperiodic = np.max(np.abs(prof(x) + prof(x + math.pi))) < _SYM_TOL * max(
        1.0, abs(sys.potential.k))
    if odd_drive is not None and antiperiodic:
        found.add("S4")
    return found
