"""Eigensystem of the one-period propagator and derived band data.

Quasienergies are the eigenphases of U(T): U |phi> = exp(-i E) |phi| with
E in (-pi, pi].  Momentum carried by a state is reported as the period
average of <n> in the gauge frame (units of the recoil momentum hbar);
the kinetic spread used for ordering states is the period average of the
physical (n + g/hbar)^2.

When the drive is even in time the propagator obeys u[n, m] = u[-m, -n]
and the whole eigenproblem can be done in real arithmetic, which keeps
near-degenerate tunneling doublets cleanly separated instead of mixing
them; the generic case falls back to a unitary Schur factorization so the
returned basis is orthonormal even through avoided crossings.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import schur

from .model import RatchetSystem, vector_potential
from .propagator import (FloquetMatrix, PropagatorConfig, UnitarityViolation,
                         _kick_split_evolve)

_TR_DETECT = 1e-8
_CLUSTER_TOL = 1e-8


class DegenerateSubspaceAmbiguity(UserWarning):
    """A degenerate eigenspace admits no canonical state choice."""


class TrackingAmbiguity(UserWarning):
    """Band continuation between scan points fell below the overlap threshold."""


def wrap_phase(x):
    """Map angles to (-pi, pi]."""
    out = np.mod(np.asarray(x, dtype=float) + math.pi, 2.0 * math.pi) - math.pi
    out = np.where(out == -math.pi, math.pi, out)
    return out if out.ndim else float(out)


def check_timereversal_property(fm: FloquetMatrix) -> float:
    """Residual max |u[n, m] - u[-m, -n]| of the time-reversal structure."""
    u = fm.matrix
    return float(np.max(np.abs(u - u[::-1, ::-1].T)))


def check_shift_property(fm_half: FloquetMatrix, fm_full: FloquetMatrix) -> float:
    """Residual of U(T) against the half-period composition.

    When the drive changes sign under a half-period shift (single-harmonic
    drive), the second half of the evolution is the momentum-reflected
    first half: U(T) = J U(T/2) J U(T/2) with J the n -> -n reversal.
    """
    uh = fm_half.matrix
    lhs = uh[::-1, ::-1] @ uh
    return float(np.max(np.abs(lhs - fm_full.matrix)))


def _real_structure_basis(n_cut: int) -> np.ndarray:
    """Unitary map to the basis where a time-even propagator is symmetric.

    Columns: the n = 0 wave, then the even combinations
    (e_n + e_{-n})/sqrt(2), then the odd ones i (e_n - e_{-n})/sqrt(2).
    """
    d = 2 * n_cut + 1
    r = np.zeros((d, d), dtype=complex)
    c = n_cut
    r[c, 0] = 1.0
    s = 1.0 / math.sqrt(2.0)
    for k in range(1, n_cut + 1):
        r[c + k, k] = s
        r[c - k, k] = s
        r[c + k, n_cut + k] = 1j * s
        r[c - k, n_cut + k] = -1j * s
    return r


def _split_degenerate(v, p_diag, energies):
    """Canonicalize truly degenerate eigenphase clusters by spatial parity.

    Returns the number of clusters that stay ambiguous after the split.
    """
    order = np.argsort(energies)
    ambiguous = 0
    i = 0
    while i < len(order):
        j = i + 1
        while j < len(order):
            d = abs(wrap_phase(energies[order[j]] - energies[order[i]]))
            if d > _CLUSTER_TOL:
                break
            j += 1
        if j - i > 1:
            idx = order[i:j]
            vg = v[:, idx]
            m = vg.T @ (p_diag[:, None] * vg)
            m = 0.5 * (m + m.T)
            pe, w = np.linalg.eigh(m)
            v[:, idx] = vg @ w
            if np.max(np.abs(np.abs(pe) - 1.0)) > 1e-6:
                ambiguous += 1
            else:
                for sign in (-1.0, 1.0):
                    if np.sum(np.abs(pe - sign) < 1e-6) > 1:
                        ambiguous += 1
                        break
        i = j
    return ambiguous


@dataclass
class FloquetDecomposition:
    """Quasienergies, eigenstates and their period-averaged momenta."""

    quasienergies: np.ndarray       # (d,), in (-pi, pi], ascending
    states: np.ndarray              # (d, d), column alpha is state alpha at t = 0
    mean_p: np.ndarray              # (d,), period-averaged <n>, recoil units
    mean_p2: np.ndarray             # (d,), period-averaged physical (p/hbar)^2
    system: RatchetSystem
    config: PropagatorConfig
    n_snapshots: int
    time_reversal: bool
    eigen_residual: float
    orthonormality_error: float

    @property
    def dim(self) -> int:
        return self.quasienergies.size


def _moment_pass(system, config, states, n_snapshots):
    """Period-average <n> and the physical kinetic moment over each state."""
    f = system.driving
    n_steps = config.n_steps
    k = min(max(1, n_snapshots), n_steps)
    while n_steps % k:
        k -= 1
    stride = n_steps // k
    n = system.basis_indices().astype(float)
    a_base = vector_potential(f, 0.0)
    mean_p = np.zeros(states.shape[1])
    mean_p2 = np.zeros(states.shape[1])

    def accumulate(t, mat):
        w = np.abs(mat) ** 2
        g = a_base - vector_potential(f, t)
        mean_p[:] += n @ w
        mean_p2[:] += ((n + g / system.hbar) ** 2) @ w

    accumulate(0.0, states)

    def on_step(j, t, mat):
        if j % stride == 0 and j < n_steps:
            accumulate(t, mat)

    _kick_split_evolve(system, n_steps, 0.0, f.period, a_base,
                       states.astype(complex, copy=True), on_step=on_step)
    return mean_p / k, mean_p2 / k, k


def decompose(fm: FloquetMatrix, n_snapshots: int = 32) -> FloquetDecomposition:
    """Diagonalize a one-period propagator and attach transport moments."""
    if fm.system is None:
        raise ValueError("decomposition needs the propagator's system")
    if not fm.spans_full_period(rel_tol=1e-9):
        raise ValueError("decomposition needs a full-period propagator")
    system = fm.system
    u = fm.matrix
    d = fm.dim
    n_cut = system.n_cut

    tr_residual = check_timereversal_property(fm)
    time_reversal = tr_residual < _TR_DETECT
    if time_reversal:
        r = _real_structure_basis(n_cut)
        up = r.conj().T @ u @ r
        x = np.ascontiguousarray(up.real)
        y = np.ascontiguousarray(up.imag)
        x = 0.5 * (x + x.T)
        y = 0.5 * (y + y.T)
        xw, v = np.linalg.eigh(x)
        # rotate inside clusters of equal cos E so that sin E is diagonal too
        i = 0
        while i < d:
            j = i + 1
            while j < d and xw[j] - xw[i] <= _CLUSTER_TOL:
                j += 1
            if j - i > 1:
                vc = v[:, i:j]
                yc = vc.T @ y @ vc
                yc = 0.5 * (yc + yc.T)
                _, w = np.linalg.eigh(yc)
                v[:, i:j] = vc @ w
            i = j
        cos_e = np.einsum("ij,ij->j", v, x @ v)
        sin_e = np.einsum("ij,ij->j", v, y @ v)
        energies = -np.arctan2(sin_e, cos_e)
        p_diag = np.concatenate([np.ones(n_cut + 1), -np.ones(n_cut)])
        ambiguous = _split_degenerate(v, p_diag, energies)
        if ambiguous:
            warnings.warn(
                f"{ambiguous} degenerate eigenphase cluster(s) have no "
                "canonical basis; per-state momenta there are a basis choice",
                DegenerateSubspaceAmbiguity, stacklevel=2)
        cos_e = np.einsum("ij,ij->j", v, x @ v)
        sin_e = np.einsum("ij,ij->j", v, y @ v)
        energies = wrap_phase(-np.arctan2(sin_e, cos_e))
        states = r @ v
    else:
        t, z = schur(u, output="complex")
        lam = np.diag(t)
        if np.max(np.abs(np.abs(lam) - 1.0)) > 1e-8:
            raise UnitarityViolation(
                "eigenvalues drift off the unit circle; the propagator is "
                "not resolved to spectral accuracy")
        energies = wrap_phase(-np.angle(lam))
        states = z.copy()

    order = np.argsort(energies, kind="stable")
    energies = energies[order]
    states = states[:, order]

    lam = np.exp(-1j * energies)
    resid = float(np.max(np.linalg.norm(u @ states - states * lam[None, :],
                                        axis=0)))
    gram = states.conj().T @ states
    gram[np.diag_indices_from(gram)] -= 1.0
    ortho = float(np.max(np.abs(gram)))

    mean_p, mean_p2, k = _moment_pass(system, fm.config, states, n_snapshots)
    return FloquetDecomposition(
        quasienergies=energies, states=states, mean_p=mean_p, mean_p2=mean_p2,
        system=system, config=fm.config, n_snapshots=k,
        time_reversal=time_reversal, eigen_residual=resid,
        orthonormality_error=ortho)


def cumulative_momentum(dec: FloquetDecomposition):
    """States ordered by kinetic spread and the running sum of their momenta.

    Transporting states show up as jumps; the final value is the basis
    trace of the momentum operator and vanishes for a complete set.
    """
    order = np.argsort(dec.mean_p2, kind="stable")
    return order, np.cumsum(dec.mean_p[order])


@dataclass
class BandTrack:
    """Bands followed through a parameter scan by state overlap."""

    params: np.ndarray              # (P,)
    energies: np.ndarray            # (P, B)
    mean_p: np.ndarray              # (P, B)
    mean_p2: np.ndarray             # (P, B)
    overlaps: np.ndarray            # (P, B), |<prev|this>|^2, first row 1
    perms: np.ndarray               # (P, B) column index into each decomposition

    @property
    def n_bands(self) -> int:
        return self.energies.shape[1]


def track_bands(decs, params=None, overlap_threshold: float = 0.5) -> BandTrack:
    """Follow eigenstates through a sequence of decompositions.

    Bands keep the identity of the first decomposition's states; at each
    step every band is matched to the unclaimed state with the largest
    squared overlap.  Matches below overlap_threshold are reported with a
    TrackingAmbiguity warning but still assigned.
    """
    if len(decs) == 0:
        raise ValueError("need at least one decomposition")
    dims = {dec.dim for dec in decs}
    if len(dims) != 1:
        raise ValueError("decompositions have mismatched dimensions")
    d = dims.pop()
    p_count = len(decs)
    if params is None:
        params = np.arange(p_count, dtype=float)
    params = np.asarray(params, dtype=float)
    if params.size != p_count:
        raise ValueError("params length must match the decomposition count")

    energies = np.empty((p_count, d))
    mean_p = np.empty((p_count, d))
    mean_p2 = np.empty((p_count, d))
    overlaps = np.ones((p_count, d))
    perms = np.empty((p_count, d), dtype=int)

    perm = np.arange(d)
    weak = 0
    for k, dec in enumerate(decs):
        if k > 0:
            prev = decs[k - 1].states[:, perms[k - 1]]
            o = np.abs(prev.conj().T @ dec.states) ** 2
            new_perm = np.full(d, -1)
            band_overlap = np.zeros(d)
            flat = np.argsort(o, axis=None)[::-1]
            row_done = np.zeros(d, dtype=bool)
            col_done = np.zeros(d, dtype=bool)
            assigned = 0
            for pos in flat:
                i, j = divmod(int(pos), d)
                if row_done[i] or col_done[j]:
                    continue
                new_perm[i] = j
                band_overlap[i] = o[i, j]
                row_done[i] = True
                col_done[j] = True
                assigned += 1
                if assigned == d:
                    break
            weak += int(np.sum(band_overlap < overlap_threshold))
            perm = new_perm
            overlaps[k] = band_overlap
        perms[k] = perm
        energies[k] = dec.quasienergies[perm]
        mean_p[k] = dec.mean_p[perm]
        mean_p2[k] = dec.mean_p2[perm]
    if weak:
        warnings.warn(
            f"{weak} band continuation(s) fell below overlap "
            f"{overlap_threshold}; identities across those segments are a guess",
            TrackingAmbiguity, stacklevel=2)
    return BandTrack(params=params, energies=energies, mean_p=mean_p,
                     mean_p2=mean_p2, overlaps=overlaps, perms=perms)


@dataclass
class AvoidedCrossing:
    """A local minimum of the gap between two tracked bands."""

    param: float          # grid point where the minimum was found
    band_a: int
    band_b: int
    gap: float            # refined minimal gap estimate
    refined_param: float  # vertex of the parabola through gap^2

    def as_dict(self) -> dict:
        return {"param": self.param, "band_a": self.band_a,
                "band_b": self.band_b, "gap": self.gap,
                "refined_param": self.refined_param}


def find_avoided_crossings(track: BandTrack, gap_threshold: float = 0.2,
                           pairs=None):
    """Locate interior gap minima between band pairs.

    The refinement fits a parabola to gap^2 through the minimum and its
    neighbors, which is exact for a linear two-level crossing, so the
    returned refined_param and gap are much better than the scan spacing
    for isolated crossings.
    """
    p = track.params
    if p.size < 3:
        return []
    found = []
    if pairs is None:
        pairs = [(a, b) for a in range(track.n_bands)
                 for b in range(a + 1, track.n_bands)]
    for a, b in pairs:
        g = np.abs(wrap_phase(track.energies[:, a] - track.energies[:, b]))
        for i in range(1, p.size - 1):
            if not (g[i] < gap_threshold and g[i] <= g[i - 1] and g[i] <= g[i + 1]):
                continue
            y = g[i - 1:i + 2] ** 2
            coeff = np.polyfit(p[i - 1:i + 2], y, 2)
            if coeff[0] > 0.0:
                vertex = -coeff[1] / (2.0 * coeff[0])
                if p[i - 1] <= vertex <= p[i + 1]:
                    ymin = np.polyval(coeff, vertex)
                    found.append(AvoidedCrossing(
                        param=float(p[i]), band_a=a, band_b=b,
                        gap=float(math.sqrt(max(ymin, 0.0))),
                        refined_param=float(vertex)))
                    continue
            found.append(AvoidedCrossing(param=float(p[i]), band_a=a,
                                         band_b=b, gap=float(g[i]),
                                         refined_param=float(p[i])))
    found.sort(key=lambda ac: ac.gap)
    return found
