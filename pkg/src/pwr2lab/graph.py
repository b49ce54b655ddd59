"""Coupling graphs on the power-of-two ring, site permutations, and metrics.

The central object is CouplingGraph: an immutable edge list over n sites with
each unordered pair stored exactly once. Ring-structured graphs (couplings a
function of ring distance alone) carry their distance classes so that energy
kernels can aggregate bonds per class with exact integer counts.
"""

from dataclasses import dataclass, field
import json

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from .errors import InvalidSize, DisconnectedGraph
from ._bits import is_power_of_two, bit_reverse, popcount

SIGN_AFM = "afm-favoring"
SIGN_FM = "fm-favoring"


def _readonly(a):
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SpinConfiguration:
    """Classical Ising configuration; bit i set means spin up (+1/2)."""

    n_sites: int
    bits: np.ndarray  # uint8 vector of 0/1, length n_sites

    def __post_init__(self):
        b = np.ascontiguousarray(self.bits, dtype=np.uint8)
        if b.shape != (self.n_sites,):
            raise InvalidSize(f"bit vector length {b.shape} != n_sites {self.n_sites}")
        object.__setattr__(self, "bits", _readonly(b))

    @classmethod
    def from_sigma(cls, sigma) -> "SpinConfiguration":
        sigma = np.asarray(sigma)
        return cls(len(sigma), (sigma > 0).astype(np.uint8))

    @classmethod
    def from_int(cls, value: int, n_sites: int) -> "SpinConfiguration":
        bits = np.array([(value >> i) & 1 for i in range(n_sites)], dtype=np.uint8)
        return cls(n_sites, bits)

    def to_int(self) -> int:
        out = 0
        for i in range(self.n_sites - 1, -1, -1):
            out = (out << 1) | int(self.bits[i])
        return out

    def sigma(self) -> np.ndarray:
        """Spins as +-1 integers."""
        return 2 * self.bits.astype(np.int8) - 1

    def spins(self) -> np.ndarray:
        """Spins as +-1/2 reals."""
        return self.bits.astype(np.float64) - 0.5

    def flipped(self, sites) -> "SpinConfiguration":
        b = self.bits.copy()
        b[np.asarray(sites, dtype=np.intp)] ^= 1
        return SpinConfiguration(self.n_sites, b)

    def global_flip(self) -> "SpinConfiguration":
        return SpinConfiguration(self.n_sites, 1 - self.bits)

    def __eq__(self, other):
        return (
            isinstance(other, SpinConfiguration)
            and self.n_sites == other.n_sites
            and bool(np.array_equal(self.bits, other.bits))
        )

    def __hash__(self):
        return hash((self.n_sites, self.bits.tobytes()))

    def __repr__(self):
        if self.n_sites <= 64:
            arrows = "".join("↑" if b else "↓" for b in self.bits)
            return f"SpinConfiguration({arrows})"
        return f"SpinConfiguration(n={self.n_sites})"


@dataclass(frozen=True)
class CouplingGraph:
    """Symmetric pairwise couplings with each unordered pair stored once."""

    n_sites: int
    pair_i: np.ndarray
    pair_j: np.ndarray
    coupling: np.ndarray
    kind: str = "pwr2"
    params: dict = field(default_factory=dict)
    sign: str = SIGN_AFM
    # ring distance class per pair; None for non-ring (dense geometric) graphs
    ring_distance: np.ndarray | None = None

    def __post_init__(self):
        pi = np.ascontiguousarray(self.pair_i, dtype=np.int64)
        pj = np.ascontiguousarray(self.pair_j, dtype=np.int64)
        w = np.ascontiguousarray(self.coupling, dtype=np.float64)
        if not (len(pi) == len(pj) == len(w)):
            raise InvalidSize("pair arrays must have equal length")
        object.__setattr__(self, "pair_i", _readonly(pi))
        object.__setattr__(self, "pair_j", _readonly(pj))
        object.__setattr__(self, "coupling", _readonly(w))
        if self.ring_distance is not None:
            rd = np.ascontiguousarray(self.ring_distance, dtype=np.int64)
            object.__setattr__(self, "ring_distance", _readonly(rd))

    @property
    def n_pairs(self) -> int:
        return len(self.coupling)

    def coupling_of(self, i: int, j: int) -> float:
        """Coupling of the unordered pair (i, j); 0.0 if absent."""
        sel = ((self.pair_i == i) & (self.pair_j == j)) | (
            (self.pair_i == j) & (self.pair_j == i)
        )
        idx = np.nonzero(sel)[0]
        return float(self.coupling[idx[0]]) if len(idx) else 0.0

    def distance_classes(self):
        """Ring graphs: list of (distance, coupling value, pair count)."""
        if self.ring_distance is None:
            raise InvalidSize("graph has no ring distance classes")
        out = []
        for d in np.unique(self.ring_distance):
            sel = self.ring_distance == d
            out.append((int(d), float(self.coupling[sel][0]), int(sel.sum())))
        return out

    def max_abs_coupling(self) -> float:
        return float(np.abs(self.coupling).max()) if self.n_pairs else 0.0


def ring_distances(n: int) -> tuple:
    """Power-of-two separations below n/2, plus the antipodal separation n/2."""
    out = []
    d = 1
    while 2 * d < n:
        out.append(d)
        d *= 2
    if n % 2 == 0 and n >= 2:
        out.append(n // 2)
    return tuple(out)


def coupling_value(d: int, s: float, j: float, n: int) -> float:
    """Coupling at ring distance d: j*d^s, renormalized by (2/n)^s for s>0.

    The s>0 renormalization pins the largest magnitude to exactly |j| at the
    antipodal bond d = n/2.
    """
    v = j * float(d) ** s
    if s > 0:
        v *= (2.0 / n) ** s
    return v


def build_ring_couplings(n: int, s: float, j: float = 1.0,
                         distances=None, sign: str = SIGN_AFM) -> CouplingGraph:
    """Ring graph with one stored bond per unordered pair.

    distances defaults to ring_distances(n). Separations below n/2 contribute
    n pairs each; the antipodal separation contributes n/2 pairs (stored once).
    """
    if n < 2:
        raise InvalidSize(f"need at least 2 sites, got {n}")
    if distances is None:
        distances = ring_distances(n)
    sgn = 1.0 if sign == SIGN_AFM else -1.0
    pis, pjs, ws, rds = [], [], [], []
    for d in distances:
        if not 1 <= d <= n // 2:
            raise InvalidSize(f"ring distance {d} out of range for n={n}")
        w = sgn * coupling_value(d, s, j, n)
        count = n // 2 if 2 * d == n else n
        i = np.arange(count, dtype=np.int64)
        pis.append(i)
        pjs.append((i + d) % n)
        ws.append(np.full(count, w))
        rds.append(np.full(count, d, dtype=np.int64))
    return CouplingGraph(
        n_sites=n,
        pair_i=np.concatenate(pis),
        pair_j=np.concatenate(pjs),
        coupling=np.concatenate(ws),
        kind="pwr2",
        params={"s": float(s), "j": float(j)},
        sign=sign,
        ring_distance=np.concatenate(rds),
    )


def build_pwr2_couplings(n: int, s: float, j: float = 1.0,
                         sign: str = SIGN_AFM) -> CouplingGraph:
    """Power-of-two ring graph: bonds at separations {1, 2, 4, ..., n/2}."""
    if not is_power_of_two(n) or n < 4:
        raise InvalidSize(f"n must be a power of two >= 4, got {n}")
    return build_ring_couplings(n, s, j, sign=sign)


def monna_map(n: int, i: int) -> int:
    """Digit-reversal permutation of site indices; an involution."""
    if not is_power_of_two(n) or n < 2:
        raise InvalidSize(f"n must be a power of two >= 2, got {n}")
    if not 0 <= i < n:
        raise IndexError(f"site index {i} out of range for n={n}")
    return bit_reverse(i, n.bit_length() - 1)


def monna_permutation(n: int) -> np.ndarray:
    """The full permutation as an index array: p[i] = monna_map(n, i)."""
    width = n.bit_length() - 1
    if not is_power_of_two(n) or n < 2:
        raise InvalidSize(f"n must be a power of two >= 2, got {n}")
    return np.array([bit_reverse(i, width) for i in range(n)], dtype=np.int64)


def recursive_ground_state(n: int) -> SpinConfiguration:
    """Doubling construction g(2k) = g(k) ++ inverse(g(k)), g(2) = up,down.

    Equivalently: spin up at site i iff popcount(i) is even. Anti-aligns every
    antipodal pair and every bond at the dominant separations for s > 0.
    """
    if not is_power_of_two(n) or n < 2:
        raise InvalidSize(f"n must be a power of two >= 2, got {n}")
    pc = popcount(np.arange(n, dtype=np.uint64)).astype(np.int64)
    return SpinConfiguration(n, (pc % 2 == 0).astype(np.uint8))


def euclidean_afm(n: int) -> SpinConfiguration:
    """Alternating configuration: spin up on even sites."""
    if n < 2 or n % 2:
        raise InvalidSize(f"need even n >= 2, got {n}")
    bits = (np.arange(n) % 2 == 0).astype(np.uint8)
    return SpinConfiguration(n, bits)


def monna_mapped_afm(n: int) -> SpinConfiguration:
    """Euclidean AFM pulled back through the Monna permutation.

    Site i takes the AFM value at monna_map(i); the result has the first n/2
    spins up and the last n/2 down.
    """
    p = monna_permutation(n)
    return SpinConfiguration(n, euclidean_afm(n).bits[p])


def two_adic_distance(n: int, i: int, j: int) -> float:
    """2^(-v) where v is the 2-adic valuation of (i - j) mod n; 0 for i == j."""
    if not 0 <= i < n or not 0 <= j < n:
        raise IndexError(f"site index out of range for n={n}")
    if i == j:
        return 0.0
    r = (i - j) % n
    v = (r & -r).bit_length() - 1
    return 2.0 ** (-v)


@dataclass(frozen=True)
class DistanceMatrix:
    """Symmetric nonnegative site distances with zero diagonal."""

    n_sites: int
    dist: np.ndarray

    def __post_init__(self):
        d = np.ascontiguousarray(self.dist, dtype=np.float64)
        if d.shape != (self.n_sites, self.n_sites):
            raise InvalidSize("distance matrix shape mismatch")
        object.__setattr__(self, "dist", _readonly(d))


def _is_circulant(g: CouplingGraph) -> bool:
    if g.ring_distance is None:
        return False
    # one coupling value per distance class
    for d in np.unique(g.ring_distance):
        w = g.coupling[g.ring_distance == d]
        if not np.all(w == w[0]):
            return False
    return True


def _edge_lengths(g: CouplingGraph) -> np.ndarray:
    w = np.abs(g.coupling)
    if np.any(w == 0):
        raise DisconnectedGraph("zero coupling on a stored pair")
    return 1.0 / w


def graph_metric(g: CouplingGraph) -> DistanceMatrix:
    """All-pairs shortest-path distances with edge length 1/|coupling|."""
    n = g.n_sites
    lengths = _edge_lengths(g)
    rows = np.concatenate([g.pair_i, g.pair_j])
    cols = np.concatenate([g.pair_j, g.pair_i])
    vals = np.concatenate([lengths, lengths])
    sp = csr_matrix((vals, (rows, cols)), shape=(n, n))
    if _is_circulant(g):
        # distances depend only on (i - j) mod n; one Dijkstra suffices
        row = dijkstra(sp, indices=0)
        if not np.all(np.isfinite(row)):
            raise DisconnectedGraph("graph is not connected")
        offs = (np.arange(n)[None, :] - np.arange(n)[:, None]) % n
        return DistanceMatrix(n, row[offs])
    dist = dijkstra(sp)
    if not np.all(np.isfinite(dist)):
        raise DisconnectedGraph("graph is not connected")
    return DistanceMatrix(n, dist)


def direct_metric(g: CouplingGraph) -> DistanceMatrix:
    """Inverse-coupling distances without shortest-path completion.

    Uncoupled pairs get +inf. Mainly for comparing dimensionality diagnostics
    against the shortest-path default.
    """
    n = g.n_sites
    lengths = _edge_lengths(g)
    dist = np.full((n, n), np.inf)
    np.fill_diagonal(dist, 0.0)
    dist[g.pair_i, g.pair_j] = lengths
    dist[g.pair_j, g.pair_i] = lengths
    return DistanceMatrix(n, dist)


def _graph_paths(base):
    base = str(base)
    if base.endswith(".csv"):
        base = base[:-4]
    return base + ".csv", base + ".json"


def save_graph(g: CouplingGraph, base):
    """Write `<base>.csv` (edge list `i,j,coupling`) and `<base>.json`
    (kind, n, sign, params) so the graph reloads without recomputation."""
    csv_path, sidecar_path = _graph_paths(base)
    with open(csv_path, "w") as f:
        f.write("i,j,coupling\n")
        for i, j, w in zip(g.pair_i, g.pair_j, g.coupling):
            f.write(f"{i},{j},{w:.17g}\n")
    meta = {"kind": g.kind, "n": g.n_sites, "sign": g.sign,
            "params": dict(g.params)}
    with open(sidecar_path, "w") as f:
        json.dump(meta, f, indent=2, sort_keys=True)
        f.write("\n")


def load_graph(base) -> CouplingGraph:
    csv_path, sidecar_path = _graph_paths(base)
    with open(sidecar_path) as f:
        meta = json.load(f)
    data = np.loadtxt(csv_path, delimiter=",", skiprows=1, ndmin=2)
    pi = data[:, 0].astype(np.int64)
    pj = data[:, 1].astype(np.int64)
    w = data[:, 2]
    n = int(meta["n"])
    params = dict(meta.get("params", {}))
    rd = None
    if meta["kind"] == "pwr2":
        raw = np.minimum((pi - pj) % n, (pj - pi) % n)
        rd = raw.astype(np.int64)
    return CouplingGraph(
        n_sites=n, pair_i=pi, pair_j=pj, coupling=w,
        kind=meta["kind"], params=params, sign=meta.get("sign", SIGN_AFM),
        ring_distance=rd,
    )
