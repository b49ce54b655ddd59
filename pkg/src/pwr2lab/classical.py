"""Classical (B = 0) analysis: exact energies, exhaustive spectra, candidate
ground states, closed-form excitation families, and finite-size phase
boundaries on the power-of-two ring.

Energy convention: H = sum over stored pairs of J_d * S_i^z * S_j^z with
S = sigma/2, so E = (1/4) * sum of J_d * sigma_i * sigma_j. With the default
afm-favoring sign (J > 0), anti-aligned bonds are satisfied.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from .errors import InvalidSize, SizeMismatch, TooLarge, NoBoundaryFound
from ._bits import is_power_of_two, gray_code
from .graph import (
    CouplingGraph,
    SpinConfiguration,
    build_pwr2_couplings,
    coupling_value,
    euclidean_afm,
    monna_mapped_afm,
    recursive_ground_state,
    ring_distances,
)

DEFAULT_DEDUP_SCALE = 1e-9
# energy differences at or below this scale count as the same level when
# deciding whether a candidate excitation is a ground-manifold member
MANIFOLD_FLOOR_SCALE = 1e-12

PHASE_AFM = "p1-afm"
PHASE_GAPLESS = "p2-gapless"
PHASE_RECURSIVE = "p2-recursive"
PHASE_COLLAPSING = "p3-collapsing"
PHASE_TREE_AFM = "p4-tree-afm"


# ---------------------------------------------------------------------------
# energies

def classical_energy(c: SpinConfiguration, g: CouplingGraph) -> float:
    """Energy of a configuration: (1/4) sum of coupling * sigma_i * sigma_j.

    Ring graphs aggregate bonds per distance class with exact integer pair
    sums, which keeps repeated evaluations bit-consistent with the
    enumeration kernel.
    """
    if c.n_sites != g.n_sites:
        raise SizeMismatch(f"configuration has {c.n_sites} sites, graph {g.n_sites}")
    sig = c.sigma().astype(np.int64)
    if g.ring_distance is not None:
        e = 0.0
        for d, w, _count in g.distance_classes():
            prod = sig * np.roll(sig, -d)
            if 2 * d == g.n_sites:
                prod = prod[: g.n_sites // 2]
            e += w * int(prod.sum())
        return 0.25 * e
    terms = g.coupling * sig[g.pair_i] * sig[g.pair_j]
    return 0.25 * float(terms.sum())


def _ring_class_table(g: CouplingGraph):
    """(distances, weights) arrays for a ring graph."""
    classes = g.distance_classes()
    d = np.array([c[0] for c in classes], dtype=np.int64)
    w = np.array([c[1] for c in classes])
    return d, w


def _sigma_energy(sig: np.ndarray, dists, weights, n: int) -> float:
    """Class-aggregated energy of a +-1 array (same arithmetic as above)."""
    e = 0.0
    for d, w in zip(dists, weights):
        prod = sig * np.roll(sig, -d)
        if 2 * d == n:
            prod = prod[: n // 2]
        e += w * int(prod.sum())
    return 0.25 * e


# ---------------------------------------------------------------------------
# exhaustive enumeration

@dataclass(frozen=True)
class Spectrum:
    """Ascending energy levels with degeneracies and one representative each."""

    levels: tuple  # of (energy, degeneracy, SpinConfiguration)
    n_sites: int
    dedup_tol: float
    complete: bool = True

    @property
    def ground_energy(self) -> float:
        return self.levels[0][0]

    @property
    def gap(self) -> float:
        """First excitation energy above the ground manifold."""
        if len(self.levels) < 2:
            return float("inf")
        return self.levels[1][0] - self.levels[0][0]

    def total_degeneracy(self) -> int:
        return sum(lv[1] for lv in self.levels)


def _cluster_levels(energies, indices, tol, n_sites, max_levels=None):
    """Group sorted energies into levels separated by more than tol."""
    order = np.argsort(energies, kind="stable")
    es = energies[order]
    ids = indices[order]
    levels = []
    start = 0
    for i in range(1, len(es) + 1):
        if i == len(es) or es[i] - es[i - 1] > tol:
            rep_idx = int(ids[start:i].min())
            rep = SpinConfiguration.from_int(int(gray_code(rep_idx)), n_sites)
            levels.append((float(es[start]), i - start, rep))
            start = i
            if max_levels is not None and len(levels) >= max_levels:
                break
    return levels


def enumerate_spectrum(g: CouplingGraph, max_levels=None,
                       dedup_tol=None) -> Spectrum:
    """Visit all 2^n configurations by Gray-code single-flip updates.

    The walk is partitioned into contiguous index blocks advanced in lockstep:
    every block flips the same site at the same step, so the per-step update
    vectorizes across blocks. Ring graphs keep exact integer pair sums per
    distance class; energies are reconstructed as sum(w_c * m_c) / 4, which
    makes every recorded energy bit-identical to classical_energy.
    """
    n = g.n_sites
    if n > 28:
        raise TooLarge(f"exhaustive enumeration capped at n=28, got {n}")
    if n > 24 and max_levels is None:
        raise TooLarge(f"full spectrum storage at n={n} needs max_levels")
    if g.ring_distance is None:
        return _enumerate_generic(g, max_levels, dedup_tol)

    dists, weights = _ring_class_table(g)
    m_bits = min(n, max(1, n // 2))
    n_blocks = 1 << (n - m_bits)
    steps = 1 << m_bits

    starts = gray_code(np.arange(n_blocks, dtype=np.uint64) << np.uint64(m_bits))
    sig = np.zeros((n_blocks, n), dtype=np.int64)
    for b in range(n):
        sig[:, b] = ((starts >> np.uint64(b)) & np.uint64(1)).astype(np.int64)
    sig = 2 * sig - 1

    # exact integer pair sums per class, per block
    counts = np.empty((len(dists), n_blocks), dtype=np.int64)
    for ci, d in enumerate(dists):
        prod = sig * np.roll(sig, -int(d), axis=1)
        if 2 * d == n:
            prod = prod[:, : n // 2]
        counts[ci] = prod.sum(axis=1)

    energies = np.empty(n_blocks << m_bits)
    buf = np.empty((n_blocks, steps))
    buf[:, 0] = 0.25 * (weights @ counts)
    for t in range(1, steps):
        k = ((t & -t).bit_length() - 1)  # flip site = ruler sequence
        sk = sig[:, k]
        for ci, d in enumerate(dists):
            d = int(d)
            if 2 * d == n:
                counts[ci] -= 2 * sk * sig[:, (k + d) % n]
            else:
                counts[ci] -= 2 * sk * (sig[:, (k + d) % n] + sig[:, (k - d) % n])
        sig[:, k] = -sk
        buf[:, t] = 0.25 * (weights @ counts)
    energies = buf.reshape(-1)
    flat_idx = np.arange(len(energies), dtype=np.int64).reshape(n_blocks, steps)
    flat_idx = flat_idx.reshape(-1)

    e0 = float(energies.min())
    tol = dedup_tol if dedup_tol is not None else DEFAULT_DEDUP_SCALE * max(1.0, abs(e0))
    levels = _cluster_levels(energies, flat_idx, tol, n,
                             None if max_levels in (None, "all") else int(max_levels))
    complete = max_levels in (None, "all")
    return Spectrum(tuple(levels), n, tol, complete)


def _enumerate_generic(g: CouplingGraph, max_levels, dedup_tol) -> Spectrum:
    """Fallback for non-ring graphs: float incremental energies."""
    n = g.n_sites
    if n > 20:
        raise TooLarge(f"generic-graph enumeration capped at n=20, got {n}")
    nbr = [[] for _ in range(n)]
    for i, j, w in zip(g.pair_i, g.pair_j, g.coupling):
        nbr[i].append((int(j), float(w)))
        nbr[j].append((int(i), float(w)))
    sig = -np.ones(n, dtype=np.int64)
    e = classical_energy(SpinConfiguration(n, np.zeros(n, dtype=np.uint8)), g)
    energies = np.empty(1 << n)
    energies[0] = e
    for t in range(1, 1 << n):
        k = (t & -t).bit_length() - 1
        h = sum(w * sig[j] for j, w in nbr[k])
        e += -0.5 * sig[k] * h
        sig[k] = -sig[k]
        energies[t] = e
    e0 = float(energies.min())
    tol = dedup_tol if dedup_tol is not None else DEFAULT_DEDUP_SCALE * max(1.0, abs(e0))
    idx = np.arange(1 << n, dtype=np.int64)
    levels = _cluster_levels(energies, idx, tol, n,
                             None if max_levels in (None, "all") else int(max_levels))
    return Spectrum(tuple(levels), n, tol, max_levels in (None, "all"))


# ---------------------------------------------------------------------------
# candidate states and excitation families (evaluated, not fitted)

def _couplings_for(n: int, s: float, j: float):
    d = np.array(ring_distances(n), dtype=np.int64)
    w = np.array([coupling_value(int(k), s, j, n) for k in d])
    return d, w


def _flip_deltas(sig, n, s, j):
    """Energy change from flipping each single site of sig."""
    d, w = _couplings_for(n, s, j)
    h = np.zeros(n)
    for dist, wd in zip(d, w):
        dist = int(dist)
        if 2 * dist == n:
            h += wd * np.roll(sig, -dist)
        else:
            h += wd * (np.roll(sig, -dist) + np.roll(sig, dist))
    return -0.5 * sig * h


def _pair_deltas(sig, n, s, j):
    """Energy change from flipping antipodal pairs (k, k + n/2)."""
    fl = _flip_deltas(sig, n, s, j)
    _, w = _couplings_for(n, s, j)
    w_fn = w[-1]  # antipodal bond weight
    half = n // 2
    return fl + np.roll(fl, -half) + w_fn * sig * np.roll(sig, -half)


def _two_wall_deltas(n, s, j):
    """Energy change vs the alternating state from flipping one contiguous
    block, for every block length L = 1..n-1 (two domain walls)."""
    d, w = _couplings_for(n, s, j)
    L = np.arange(1, n)
    lt = np.minimum(L, n - L)
    de = np.zeros(n - 1)
    for dist, wd in zip(d, w):
        dist = int(dist)
        if dist == 1:
            de += wd * np.minimum(1, lt)
        elif 2 * dist == n:
            de -= 0.5 * wd * lt
        else:
            de -= wd * np.minimum(dist, lt)
    return de


def _halfblock_deltas(sig, n, s, j):
    """Energy change from flipping the contiguous half block [a, a + n/2),
    for every anchor a. Only bonds crossing the block boundary change."""
    d, w = _couplings_for(n, s, j)
    half = n // 2
    anchors = np.arange(n)
    total = np.zeros(n)
    for dist, wd in zip(d, w):
        dist = int(dist)
        if 2 * dist == n:
            # every antipodal pair has exactly one endpoint in the block
            m_fn = int((sig[:half] * np.roll(sig, -half)[:half]).sum())
            total += -0.5 * wd * m_fn
            continue
        c = sig * np.roll(sig, -dist)  # bond product at (i, i+dist)
        cs = np.concatenate([[0], np.cumsum(np.concatenate([c, c]))])
        lo1 = (anchors - dist) % n
        lo2 = (anchors + half - dist) % n
        cross = (cs[lo1 + dist] - cs[lo1]) + (cs[lo2 + dist] - cs[lo2])
        total += -0.5 * wd * cross
    return total


def _min_positive(values, floor):
    pos = values[values > floor]
    return float(pos.min()) if len(pos) else float("inf")


# ---------------------------------------------------------------------------
# phase boundaries

@dataclass(frozen=True)
class PhaseBoundaries:
    s1: float  # alternating state stops being the ground candidate
    s2: float  # single flips overtake half-block walls on the recursive state
    s3: float  # antipodal pair gap crosses the single-flip plateau

    def as_dict(self):
        return {"s1": self.s1, "s2": self.s2, "s3": self.s3}


def _two_wall_min(n, s, j=1.0):
    return float(_two_wall_deltas(n, s, j).min())


def _flip_gap(n, s, j=1.0):
    """Cheapest positive single-flip excitation of the recursive state."""
    sig = recursive_ground_state(n).sigma().astype(np.int64)
    return _min_positive(_flip_deltas(sig, n, s, j), 1e-12 * max(1.0, abs(j)))


def _halfblock_gap(n, s, j=1.0):
    sig = recursive_ground_state(n).sigma().astype(np.int64)
    return float(_halfblock_deltas(sig, n, s, j).min())


@lru_cache(maxsize=64)
def phase_boundaries(n: int) -> PhaseBoundaries:
    """Finite-n boundary locations (j = 1 scale; all boundaries are
    j-independent because every energy in the defining differences is
    proportional to j).

    s1: root of the minimum two-domain-wall excitation energy above the
        alternating state.
    s2: root of [single-flip gap - half-block two-wall gap], both measured on
        the recursive state; locates where single flips become the cheapest
        excitation of the recursive region.
    s3: closed form ln(1/4)/ln(2/n), where the antipodal pair-flip gap
        2*(2/n)^s falls to the single-flip plateau 1/2.
    """
    if not is_power_of_two(n) or n < 8:
        raise InvalidSize(f"n must be a power of two >= 8, got {n}")
    try:
        s1 = float(brentq(lambda s: _two_wall_min(n, s), -8.0, -0.05, xtol=1e-10))
    except ValueError as exc:
        raise NoBoundaryFound(f"s1 root not bracketed for n={n}") from exc

    f = lambda s: _flip_gap(n, s) - _halfblock_gap(n, s)
    lo, hi = None, None
    b = 0.0
    for _ in range(16):  # walk down from 0 in unit steps until the sign flips
        a = b - 1.0
        if f(a) > 0 >= f(b):
            lo, hi = a, b
            break
        b = a
    if lo is None:
        raise NoBoundaryFound(f"s2 root not bracketed for n={n}")
    s2 = float(brentq(f, lo, hi, xtol=1e-10))

    s3 = float(np.log(0.25) / np.log(2.0 / n))
    return PhaseBoundaries(s1, s2, s3)


# ---------------------------------------------------------------------------
# analytic gap

@dataclass(frozen=True)
class GapPrediction:
    phase: str
    gap: float
    ground_candidate: SpinConfiguration
    excitation_family: str
    ground_energy: float


_FAMILY_GROUND = "ground-candidate"


def analytic_gap(n: int, s: float, j: float = 1.0) -> GapPrediction:
    """Gap prediction from closed-form candidate states and excitations.

    Ground candidates: alternating (AFM), recursive, Monna-mapped AFM.
    Excitation families above them: one flipped contiguous block on the
    alternating state (two domain walls, all lengths), single flips on the
    recursive state, and antipodal pair flips on the recursive state.

    Returns the minimum positive excitation energy above the best ground
    candidate; 0 if a competing level sits within the degeneracy tolerance
    but above the numerical-zero floor (a collapsed gap). The phase label
    follows the s-intervals from phase_boundaries.
    """
    if not is_power_of_two(n) or n < 8:
        raise InvalidSize(f"n must be a power of two >= 8, got {n}")
    j = float(j)
    if j <= 0:
        raise InvalidSize("coupling scale j must be positive")

    dists, weights = _couplings_for(n, s, j)
    afm = euclidean_afm(n)
    rec = recursive_ground_state(n)
    mon = monna_mapped_afm(n)
    sig_afm = afm.sigma().astype(np.int64)
    sig_rec = rec.sigma().astype(np.int64)
    sig_mon = mon.sigma().astype(np.int64)

    e_afm = _sigma_energy(sig_afm, dists, weights, n)
    e_rec = _sigma_energy(sig_rec, dists, weights, n)
    e_mon = _sigma_energy(sig_mon, dists, weights, n)

    candidates = [(e_afm, afm), (e_rec, rec), (e_mon, mon)]
    e0, ground = min(candidates, key=lambda t: t[0])

    scale = max(1.0, abs(e0))
    tol = DEFAULT_DEDUP_SCALE * scale
    floor = MANIFOLD_FLOOR_SCALE * scale

    family_levels = [
        ("two-domain-wall", e_afm + _two_wall_deltas(n, s, j)),
        ("single-flip", e_rec + _flip_deltas(sig_rec, n, s, j)),
        ("pair-flip", e_rec + _pair_deltas(sig_rec, n, s, j)),
        (_FAMILY_GROUND, np.array([e_afm, e_rec, e_mon])),
    ]
    best_gap, best_family = float("inf"), "none"
    for name, levels in family_levels:
        diffs = np.asarray(levels) - e0
        gap = _min_positive(diffs, floor)
        if gap < best_gap:
            best_gap, best_family = gap, name

    b = phase_boundaries(n)
    if s >= b.s3:
        # the cheapest excitation is the antipodal pair flip, whose energy has
        # the exact closed form 2 j (2/n)^s; evaluate it directly so extreme s
        # cannot underflow it out of the float family sums
        pair_closed = 2.0 * coupling_value(1, s, j, n)
        if pair_closed <= floor:
            return GapPrediction(PHASE_TREE_AFM, 0.0, ground, "pair-flip", e0)
        if pair_closed < best_gap:
            best_gap, best_family = pair_closed, "pair-flip"
        return GapPrediction(PHASE_COLLAPSING, best_gap, ground, best_family, e0)

    if best_gap <= tol:
        best_gap = 0.0
    if s < b.s1:
        phase = PHASE_AFM
    elif s < b.s2:
        phase = PHASE_GAPLESS
    else:
        phase = PHASE_RECURSIVE
    return GapPrediction(phase, best_gap, ground, best_family, e0)


def classical_gap_row(n: int, s: float, j: float = 1.0) -> dict:
    """One CSV row of the classical-gap command."""
    p = analytic_gap(n, s, j)
    return {
        "n": n,
        "s": s,
        "phase": p.phase,
        "gap": p.gap,
        "E0": p.ground_energy,
        "degeneracy": "",
    }
