"""Transport observables: asymptotic currents, running averages, phase space.

The directed current carried by a wave packet launched into the driven
system has two equivalent expressions: the spectral one (momentum of each
Floquet state weighted by how strongly the packet excites it) and the
dynamical one (the long-time running average of the momentum expectation).
Both are computed with the same period quadrature, so they agree in the
long-time limit by construction and the running average exposes the
transient on top.

Currents are quoted in recoil units (momentum divided by hbar).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .model import RatchetSystem, WaveState, vector_potential
from .floquet import FloquetDecomposition, decompose
from .propagator import (PropagatorConfig, build_floquet_matrix,
                         _kick_split_evolve)

TWO_PI = 2.0 * math.pi


class NormDeficit(RuntimeError):
    """The spectral expansion misses too much of the initial state."""


@dataclass(frozen=True)
class InitialState:
    """A launch state given by its plane-wave coefficients."""

    coeffs: np.ndarray
    label: str = "custom"

    def to_wave_state(self, time: float = 0.0) -> WaveState:
        return WaveState(coeffs=np.asarray(self.coeffs, dtype=complex),
                         time=time, frame_a=0.0)


def plane_wave_zero(system: RatchetSystem) -> InitialState:
    """The zero-momentum plane wave, the standard launch state."""
    c = np.zeros(system.dim, dtype=complex)
    c[system.n_cut] = 1.0
    return InitialState(coeffs=c, label="n0")


def _coefficients(state) -> np.ndarray:
    if isinstance(state, (InitialState, WaveState)):
        return np.asarray(state.coeffs, dtype=complex)
    return np.asarray(state, dtype=complex)


def asymptotic_current_floquet(dec: FloquetDecomposition, state,
                               min_mass: float = 0.999,
                               return_weights: bool = False):
    """Directed current from the spectral decomposition, recoil units.

    J = sum_alpha |<phi_alpha|psi>|^2 <p>_alpha.  Raises NormDeficit when
    the expansion captures less than min_mass of the state, which signals
    a basis cutoff too small for this launch state.
    """
    c = _coefficients(state)
    if c.size != dec.dim:
        raise ValueError("state dimension does not match the decomposition")
    weights = np.abs(dec.states.conj().T @ c) ** 2
    mass = float(np.sum(weights))
    if mass < min_mass:
        raise NormDeficit(
            f"spectral expansion captures only {mass:.6f} of the state")
    j = float(weights @ dec.mean_p)
    if return_weights:
        return j, weights
    return j


def averaged_current(system: RatchetSystem, config: PropagatorConfig | None = None,
                     n_t0: int = 16, state=None, n_snapshots: int = 32):
    """Current averaged over the drive launch phase.

    Computes J for n_t0 values of the anchor t0 spread uniformly over one
    period (starting from the system's own t0) and returns the mean
    together with the individual values.
    """
    if n_t0 < 1:
        raise ValueError("n_t0 must be at least 1")
    if config is None:
        config = PropagatorConfig()
    f = system.driving
    t0_values = f.t0 + f.period * np.arange(n_t0) / n_t0
    js = np.empty(n_t0)
    for k, t0 in enumerate(t0_values):
        sys_k = replace(system, driving=replace(f, t0=float(t0)))
        dec = decompose(build_floquet_matrix(sys_k, config), n_snapshots)
        launch = plane_wave_zero(sys_k) if state is None else state
        js[k] = asymptotic_current_floquet(dec, launch)
    return float(np.mean(js)), js


def period_momentum_operator(system: RatchetSystem,
                             config: PropagatorConfig | None = None,
                             n_snapshots: int = 32):
    """One-period propagator and the period-averaged momentum operator.

    The operator is (1/K) sum_j U_j^+ N U_j with U_j the propagator from
    the window start to the j-th snapshot and N the plane-wave index.
    Sandwiching it gives the period average of <n> for any state, with the
    same quadrature the spectral decomposition uses.
    """
    if config is None:
        config = PropagatorConfig()
    f = system.driving
    n_steps = config.n_steps
    k = min(max(1, n_snapshots), n_steps)
    while n_steps % k:
        k -= 1
    stride = n_steps // k
    n = system.basis_indices().astype(float)
    a_base = vector_potential(f, 0.0)
    acc = np.diag(n).astype(complex)   # j = 0 term: U_0 = identity
    snapshots = []

    def on_step(j, t, mat):
        if j % stride == 0 and j < n_steps:
            snapshots.append(mat.copy())

    u = _kick_split_evolve(system, n_steps, 0.0, f.period, a_base,
                           np.eye(system.dim, dtype=complex), on_step=on_step)
    for uj in snapshots:
        acc += uj.conj().T @ (n[:, None] * uj)
    acc /= k
    return u, acc


def evolve_running_average(system: RatchetSystem,
                           config: PropagatorConfig | None = None,
                           n_periods: int = 1000, state=None,
                           n_snapshots: int = 32) -> np.ndarray:
    """Running time average of the momentum over whole drive periods.

    Element m-1 is the average of <n> over the first m periods (recoil
    units).  For long times this converges to the spectral current of the
    launch state.
    """
    if n_periods < 1:
        raise ValueError("n_periods must be at least 1")
    u, pbar = period_momentum_operator(system, config, n_snapshots)
    c = _coefficients(plane_wave_zero(system) if state is None else state).copy()
    inst = np.empty(n_periods)
    for m in range(n_periods):
        inst[m] = float(np.real(c.conj() @ (pbar @ c)))
        c = u @ c
    return np.cumsum(inst) / np.arange(1, n_periods + 1)


@dataclass(frozen=True)
class HusimiGrid:
    """Phase-space grid: x in [0, 2*pi), momentum in recoil units."""

    nx: int = 128
    n_p: int = 128
    p_min: float = -4.0
    p_max: float = 4.0

    def x_values(self) -> np.ndarray:
        return TWO_PI * np.arange(self.nx) / self.nx

    def p_values(self) -> np.ndarray:
        return np.linspace(self.p_min, self.p_max, self.n_p)


def husimi(state, system: RatchetSystem, grid: HusimiGrid | None = None,
           frame_a: float | None = None):
    """Husimi distribution of a state over the phase-space grid.

    Returns (x, p, rho) with rho[i, j] the density at (x[i], p[j]).  The
    projecting coherent states are minimum-uncertainty Gaussians whose
    momentum-space overlap with plane wave n is
    (hbar/pi)^(1/4) exp(i n x0) exp(-(hbar/2) (n - q)^2), q in recoil
    units.  The normalization makes the full integral equal 1; a finite
    momentum window keeps whatever mass falls inside it.

    frame_a shifts the momentum axis to physical momentum; a WaveState
    supplies its own frame shift, a bare coefficient vector defaults to 0.
    """
    if grid is None:
        grid = HusimiGrid()
    c = _coefficients(state)
    if c.size != system.dim:
        raise ValueError("state dimension does not match the system cutoff")
    if frame_a is None:
        frame_a = state.frame_a if isinstance(state, WaveState) else 0.0
    hbar = system.hbar
    n = system.basis_indices().astype(float)
    x = grid.x_values()
    p = grid.p_values()
    q_center = p - frame_a / hbar
    gauss = np.exp(-0.5 * hbar * (n[None, :] - q_center[:, None]) ** 2)
    plane = np.exp(1j * np.outer(n, x))
    amp = (gauss * c[None, :]) @ plane
    rho = (math.sqrt(hbar / math.pi) / TWO_PI) * np.abs(amp) ** 2
    return x, p, rho.T


def husimi_mass(grid: HusimiGrid, rho: np.ndarray) -> float:
    """Riemann-sum mass of a Husimi map on its grid."""
    dx = TWO_PI / grid.nx
    dp = (grid.p_max - grid.p_min) / (grid.n_p - 1)
    return float(np.sum(rho) * dx * dp)
