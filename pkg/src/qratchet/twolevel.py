"""Effective two-level description of a tunneling doublet.

Near a resonance the pair of counterpropagating basis states (+n, -n)
decouples from the rest of the spectrum; in that subspace the reduced
quasienergy operator is

    H = [[-epsilon, delta], [delta, epsilon]]

with epsilon the half detuning of the pair and delta the effective
coupling.  Everything about the doublet (gap, state mixing, transported
momentum) follows from the single ratio gamma = epsilon / delta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class ZeroCoupling(ValueError):
    """The doublet has no coupling; the mixing ratio is undefined."""


@dataclass(frozen=True)
class TwoLevelModel:
    n: int            # momentum index of the pair (+n, -n), recoil units
    epsilon: float    # half detuning between the unperturbed partners
    delta: float      # effective coupling, half the minimal gap

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("the pair index n must be a positive integer")
        if self.delta == 0.0:
            raise ZeroCoupling("delta = 0 leaves the doublet uncoupled")

    @property
    def gamma(self) -> float:
        return self.epsilon / self.delta

    @property
    def gap(self) -> float:
        """Quasienergy splitting 2 sqrt(epsilon^2 + delta^2)."""
        return 2.0 * math.hypot(self.epsilon, self.delta)


def _mixing_ratio(model: TwoLevelModel) -> float:
    g = model.gamma
    return g + math.sqrt(1.0 + g * g)


def eigenstates(model: TwoLevelModel):
    """Energies (+rho, -rho) and the corresponding normalized states.

    Column 0 of the state matrix is (1, r)/L for the upper level, column 1
    is (r, -1)/L for the lower one, with r the mixing ratio.
    """
    rho = 0.5 * model.gap
    r = _mixing_ratio(model)
    norm = math.sqrt(1.0 + r * r)
    states = np.array([[1.0, r], [r, -1.0]]) / norm
    return np.array([rho, -rho]), states


def momenta(model: TwoLevelModel):
    """Momentum carried by the two doublet states, in recoil units.

    p = n (|c_{+n}|^2 - |c_{-n}|^2); the partners carry exactly opposite
    momentum and |p| can never exceed n.  For weak mixing p grows linearly
    as -gamma n, for strong mixing it saturates at -n (and the partner at
    +n).
    """
    r = _mixing_ratio(model)
    p_upper = model.n * (1.0 - r * r) / (1.0 + r * r)
    return p_upper, -p_upper


def propagator(model: TwoLevelModel) -> np.ndarray:
    """Closed-form exp(-i H) of the reduced doublet Hamiltonian."""
    h = np.array([[-model.epsilon, model.delta],
                  [model.delta, model.epsilon]])
    rho = 0.5 * model.gap
    if rho == 0.0:
        return np.eye(2, dtype=complex)
    return math.cos(rho) * np.eye(2) - 1j * (math.sin(rho) / rho) * h


@dataclass
class SplittingScaling:
    """Least-squares fit of log(gap) against n log(n)."""

    slope: float
    intercept: float
    residuals: np.ndarray
    rms_residual: float


def splitting_scaling(n_values, gaps) -> SplittingScaling:
    """Regress doublet gaps against the n log n law.

    A sequence gap_n proportional to n^(-c n) gives slope -c with zero
    residuals; other decay laws (plain exponentials, power laws) leave a
    systematic residual pattern, so the rms residual separates the
    scaling families even when the slopes look similar.
    """
    n_values = np.asarray(n_values, dtype=float)
    gaps = np.asarray(gaps, dtype=float)
    if n_values.shape != gaps.shape or n_values.ndim != 1:
        raise ValueError("n_values and gaps must be 1-d arrays of equal length")
    if n_values.size < 3:
        raise ValueError("need at least three doublets to fit a scaling law")
    if np.any(n_values < 1.0):
        raise ValueError("pair indices must be >= 1")
    if np.any(gaps <= 0.0):
        raise ValueError("gaps must be positive")
    x = n_values * np.log(n_values)
    y = np.log(gaps)
    slope, intercept = np.polyfit(x, y, 1)
    residuals = y - (slope * x + intercept)
    return SplittingScaling(slope=float(slope), intercept=float(intercept),
                            residuals=residuals,
                            rms_residual=float(np.sqrt(np.mean(residuals ** 2))))
