"""Classical limit of the driven ratchet: trajectories and chaotic transport.

The classical equations of motion are

    x' = p,   p' = sin x + E(t)                      (tilting)
    x' = p,   p' = K [sin x + 2 s sin(2x + theta_p)] E(t)   (flashing)

integrated with a fixed-step fourth-order Runge-Kutta scheme, vectorized
over whole ensembles.  Positions are never wrapped, so the time-averaged
velocity of a trajectory is exactly (x_end - x_start) / elapsed time.

The chaotic-layer current averages that velocity over an ensemble started
inside the chaotic sea.  Membership is decided empirically: a candidate
whose stroboscopic momentum wanders over more than a threshold range is
not on a regular island, and an upper bound on |p| (estimated from the
probe itself) removes ballistic outliers that stick to transporting
islands at large momentum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import RatchetSystem, Variant, field_value, spatial_profile


class InsufficientChaoticSamples(RuntimeError):
    """Too few probe trajectories qualified as chaotic."""


def force(system: RatchetSystem, x, t):
    """Force on a classical particle at position x and time t."""
    x = np.asarray(x, dtype=float)
    if system.variant is Variant.TILTING:
        return np.sin(x) + field_value(system.driving, t)
    pot = system.potential
    grad = pot.k * (np.sin(x) + 2.0 * pot.s * np.sin(2.0 * x + pot.theta_p))
    return grad * field_value(system.driving, t)


def energy(system: RatchetSystem, x, p, t=0.0):
    """Instantaneous mechanical energy p^2/2 + V(x, t) (no tilt term)."""
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    if system.variant is Variant.TILTING:
        v = 1.0 + np.cos(x)
    else:
        v = spatial_profile(system, x) * field_value(system.driving, t)
    return 0.5 * p * p + v


def rk4_evolve(system: RatchetSystem, x, p, t_start: float, duration: float,
               n_steps: int):
    """Fixed-step RK4 over an ensemble; returns the final (x, p)."""
    x = np.array(x, dtype=float, copy=True)
    p = np.array(p, dtype=float, copy=True)
    h = duration / n_steps
    for j in range(n_steps):
        t = t_start + j * h
        k1x = p
        k1p = force(system, x, t)
        k2x = p + 0.5 * h * k1p
        k2p = force(system, x + 0.5 * h * k1x, t + 0.5 * h)
        k3x = p + 0.5 * h * k2p
        k3p = force(system, x + 0.5 * h * k2x, t + 0.5 * h)
        k4x = p + h * k3p
        k4p = force(system, x + h * k3x, t + h)
        x += (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        p += (h / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
    return x, p


def strobe_map(system: RatchetSystem, x0, p0, n_periods: int,
               steps_per_period: int = 4096, t_start: float = 0.0):
    """Stroboscopic trajectory samples at multiples of the drive period.

    Returns arrays of shape (n_periods + 1, n_particles); row 0 holds the
    initial conditions and positions are unwrapped.
    """
    period = system.driving.period
    x = np.atleast_1d(np.asarray(x0, dtype=float)).copy()
    p = np.atleast_1d(np.asarray(p0, dtype=float)).copy()
    xs = np.empty((n_periods + 1, x.size))
    ps = np.empty((n_periods + 1, p.size))
    xs[0], ps[0] = x, p
    for m in range(n_periods):
        x, p = rk4_evolve(system, x, p, t_start + m * period, period,
                          steps_per_period)
        xs[m + 1], ps[m + 1] = x, p
    return xs, ps


@dataclass
class ClassicalCurrent:
    """Ensemble-averaged chaotic transport velocity."""

    j: float                 # mean velocity, natural units
    j_recoil: float          # same, divided by hbar (recoil units)
    stderr: float            # bootstrap standard error of j, natural units
    stderr_recoil: float
    n_particles: int
    n_periods: int
    steps_per_period: int
    seed: int

    def as_dict(self) -> dict:
        return {"J_ch": self.j_recoil, "stderr": self.stderr_recoil,
                "n": self.n_particles, "periods": self.n_periods}


def chaotic_current(system: RatchetSystem, n_particles: int = 1024,
                    n_periods: int = 5000, steps_per_period: int = 4096,
                    seed: int = 0, probe_periods: int = 50,
                    probe_factor: int = 4, range_threshold: float = 1.5,
                    bound_margin: float = 0.5, min_fraction: float = 0.1,
                    n_bootstrap: int = 200) -> ClassicalCurrent:
    """Directed current of the chaotic layer.

    Candidates start at x uniform in [0, 2*pi), p uniform in [-1/2, 1/2];
    a short probe run keeps those whose strobe momentum range exceeds
    range_threshold (chaotic, not island-bound) and whose |p| stays below
    a bound estimated from the accepted population (drops ballistic
    channels).  Raises InsufficientChaoticSamples when fewer than
    min_fraction of the candidates qualify.
    """
    rng = np.random.default_rng(seed)
    n_cand = max(probe_factor * n_particles, 64)
    x0 = rng.uniform(0.0, 2.0 * math.pi, n_cand)
    p0 = rng.uniform(-0.5, 0.5, n_cand)
    _, ps = strobe_map(system, x0, p0, probe_periods, steps_per_period)
    p_range = ps.max(axis=0) - ps.min(axis=0)
    p_extent = np.abs(ps).max(axis=0)
    wandering = p_range > range_threshold
    if not np.any(wandering):
        raise InsufficientChaoticSamples(
            "no probe trajectory left its island; the drive may be too weak")
    p_bound = float(np.percentile(p_extent[wandering], 90.0)) + bound_margin
    accepted = wandering & (p_extent <= p_bound)
    fraction = accepted.sum() / n_cand
    if fraction < min_fraction:
        raise InsufficientChaoticSamples(
            f"only {accepted.sum()} of {n_cand} candidates look chaotic")
    idx = np.nonzero(accepted)[0][:n_particles]

    period = system.driving.period
    elapsed = n_periods * period
    x_end, _ = rk4_evolve(system, x0[idx], p0[idx], 0.0, elapsed,
                          n_periods * steps_per_period)
    v = (x_end - x0[idx]) / elapsed
    j = float(np.mean(v))
    boots = np.empty(n_bootstrap)
    for b in range(n_bootstrap):
        pick = rng.integers(0, v.size, v.size)
        boots[b] = np.mean(v[pick])
    stderr = float(np.std(boots))
    return ClassicalCurrent(j=j, j_recoil=j / system.hbar, stderr=stderr,
                            stderr_recoil=stderr / system.hbar,
                            n_particles=int(v.size), n_periods=n_periods,
                            steps_per_period=steps_per_period, seed=seed)
