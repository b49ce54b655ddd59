"""Sparse diagonalization of the transverse-field model and ground-state
observables: entanglement entropy under site reorderings, spin structure
factor, and the second-moment correlation length.

H = sum_pairs J_d S^z_i S^z_j + B sum_k S^x_k with S = sigma/2. Basis states
are bit strings; site k is bit k, bit value 1 means sigma = +1. The diagonal
is the classical energy of each configuration; S^x contributes B/2 between
states differing at exactly one site.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    ConvergenceFailure,
    InvalidMomentum,
    InvalidSize,
    ManifoldNotExited,
    NotNormalized,
    TooLarge,
)
from ._bits import derive_seed, popcount
from .graph import CouplingGraph, monna_permutation
from .mcmc import sm64_next

MAX_SITES = 24
MAX_DENSE_SITES = 14


def _ring_diagonal(g: CouplingGraph) -> np.ndarray:
    n = g.n_sites
    idx = np.arange(1 << n, dtype=np.uint64)
    mask = np.uint64((1 << n) - 1)
    e = np.zeros(1 << n)
    for d, w, count in g.distance_classes():
        rot = ((idx >> np.uint64(d)) | (idx << np.uint64(n - d))) & mask
        x = idx ^ rot
        if 2 * d == n:
            x = x & np.uint64((1 << (n // 2)) - 1)
        anti = popcount(x).astype(np.int64)
        e += 0.25 * w * (count - 2 * anti)
    return e


def _generic_diagonal(g: CouplingGraph) -> np.ndarray:
    n = g.n_sites
    idx = np.arange(1 << n, dtype=np.uint64)
    e = np.zeros(1 << n)
    for i, j, w in zip(g.pair_i, g.pair_j, g.coupling):
        same = ((idx >> np.uint64(i)) ^ (idx >> np.uint64(j))) & np.uint64(1)
        e += 0.25 * w * (1.0 - 2.0 * same.astype(np.float64))
    return e


@dataclass(frozen=True)
class Hamiltonian:
    """Matrix-free transverse-field Hamiltonian on up to 24 sites."""

    graph: CouplingGraph
    b_field: float
    diagonal: np.ndarray

    @property
    def n_sites(self) -> int:
        return self.graph.n_sites

    @property
    def dim(self) -> int:
        return 1 << self.graph.n_sites

    def matvec(self, x: np.ndarray) -> np.ndarray:
        y = self.diagonal * x
        if self.b_field != 0.0:
            half_b = 0.5 * self.b_field
            for k in range(self.n_sites):
                xr = x.reshape(-1, 2, 1 << k)
                yr = y.reshape(-1, 2, 1 << k)
                yr[:, 0, :] += half_b * xr[:, 1, :]
                yr[:, 1, :] += half_b * xr[:, 0, :]
        return y

    def to_dense(self) -> np.ndarray:
        if self.n_sites > MAX_DENSE_SITES:
            raise TooLarge(
                f"dense form limited to n <= {MAX_DENSE_SITES}, got {self.n_sites}")
        dim = self.dim
        m = np.diag(self.diagonal)
        half_b = 0.5 * self.b_field
        for v in range(dim):
            for k in range(self.n_sites):
                m[v ^ (1 << k), v] += half_b
        return m

    def norm_bound(self) -> float:
        """Upper bound on the spectral radius (diag range + field)."""
        return float(np.max(np.abs(self.diagonal)) + 0.5 * abs(self.b_field) * self.n_sites)


def build_hamiltonian(g: CouplingGraph, b_field: float) -> Hamiltonian:
    if g.n_sites > MAX_SITES:
        raise TooLarge(f"state space limited to n <= {MAX_SITES}, got {g.n_sites}")
    if g.n_sites < 1:
        raise InvalidSize("need at least one site")
    diag = _ring_diagonal(g) if g.ring_distance is not None else _generic_diagonal(g)
    diag.flags.writeable = False
    return Hamiltonian(g, float(b_field), diag)


@dataclass(frozen=True)
class EigenSolution:
    eigenvalues: np.ndarray   # ascending
    eigenvectors: np.ndarray  # (dim, k), column i belongs to eigenvalues[i]
    residuals: np.ndarray     # ||H v - e v|| per pair
    matvecs: int
    ground_energy: float

    @property
    def k(self) -> int:
        return len(self.eigenvalues)


def _seeded_unit_vector(dim: int, seed: int) -> np.ndarray:
    # splitmix64 state after t steps is seed + t*gamma, so the whole stream
    # vectorizes; matches sm64_next applied sequentially
    steps = np.arange(1, dim + 1, dtype=np.uint64)
    z = np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + steps * np.uint64(0x9E3779B97F4A7C15)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    z = z ^ (z >> np.uint64(31))
    v = (z >> np.uint64(11)) * (1.0 / 9007199254740992.0) - 0.5
    nrm = np.linalg.norm(v)
    return v / nrm


def _orthogonalize(v: np.ndarray, basis: list) -> np.ndarray:
    for _ in range(2):  # two Gram-Schmidt passes keep orthogonality at eps
        for b in basis:
            v = v - (b @ v) * b
    return v


def _lanczos_cycle(h: Hamiltonian, v: np.ndarray, m: int, locked: list,
                   scale: float):
    """One Lanczos pass of up to m steps, fully reorthogonalized against both
    the growing basis and the locked eigenvectors. Returns the best Ritz pair
    (value, vector) of the deflated operator and the matvec count."""
    basis = [v]
    alphas: list = []
    betas: list = []
    matvecs = 0
    for _ in range(m):
        w = h.matvec(basis[-1])
        matvecs += 1
        alphas.append(float(basis[-1] @ w))
        w = _orthogonalize(w, locked)
        w = _orthogonalize(w, basis)
        b = float(np.linalg.norm(w))
        if b < 1e-13 * scale:
            break
        betas.append(b)
        basis.append(w / b)
    if len(basis) > len(alphas):
        basis = basis[: len(alphas)]
        betas = betas[: len(alphas) - 1]
    t = np.diag(alphas)
    for i, b in enumerate(betas):
        t[i, i + 1] = t[i + 1, i] = b
    theta, y = np.linalg.eigh(t)
    vmat = np.stack(basis, axis=1)
    x = vmat @ y[:, 0]
    x /= np.linalg.norm(x)
    return float(theta[0]), x, matvecs


def lowest_eigenpairs(h: Hamiltonian, k: int = 2, tol: float = 1e-8,
                      seed: int = 0, m: int | None = None,
                      max_restarts: int = 120) -> EigenSolution:
    """k lowest eigenpairs, multiplicity included, by deflated Lanczos.

    Each restart runs a fully reorthogonalized Lanczos pass on the operator
    deflated by everything already locked, so its lowest Ritz pair targets
    the smallest remaining eigenvalue; one pair is locked per restart, which
    makes degenerate copies appear in order instead of being hidden inside a
    single Krylov space. Unconverged passes warm-restart from the best Ritz
    vector with the step budget doubled up to the cap. Residuals are
    measured as ||Hv - ev||; running out of restarts raises
    ConvergenceFailure carrying the last residuals. Identical inputs give
    bit-identical output.
    """
    dim = h.dim
    if not 1 <= k <= dim:
        raise InvalidSize(f"need 1 <= k <= {dim}, got k={k}")
    scale = max(1.0, h.norm_bound())

    if dim <= 512:
        dense = h.to_dense()
        evals, evecs = np.linalg.eigh(dense)
        res = np.array([float(np.linalg.norm(h.matvec(evecs[:, i]) - evals[i] * evecs[:, i]))
                        for i in range(k)])
        return EigenSolution(evals[:k].copy(), evecs[:, :k].copy(), res, k,
                             float(evals[0]))

    m_cap = int(min(dim, 64, max(2 * k + 4, (1 << 28) // dim)))
    m_cur = int(min(m, m_cap)) if m is not None else min(max(2 * k + 8, 24), m_cap)

    locked_vecs: list = []
    locked_vals: list = []
    matvecs = 0
    warm = None
    fresh = 0
    stall = 0
    last_res = float("inf")

    for _restart in range(max_restarts):
        if len(locked_vals) >= k:
            break
        if warm is None:
            v = _seeded_unit_vector(dim, derive_seed(seed, fresh))
            fresh += 1
        else:
            v = warm
        v = _orthogonalize(v, locked_vecs)
        nrm = np.linalg.norm(v)
        if nrm < 1e-12:
            warm = None
            continue
        theta, x, used = _lanczos_cycle(h, v / nrm, m_cur, locked_vecs, scale)
        matvecs += used
        r = h.matvec(x) - theta * x
        matvecs += 1
        last_res = float(np.linalg.norm(r))
        if last_res <= tol * scale:
            x = _orthogonalize(x, locked_vecs)
            nx = np.linalg.norm(x)
            if nx > 1e-8:
                locked_vecs.append(x / nx)
                locked_vals.append(theta)
                warm = None
                stall = 0
                continue
            warm = None  # rediscovered a locked direction, try fresh
        else:
            warm = x
        stall += 1
        m_cur = min(2 * m_cur, m_cap)
        if stall > 30:
            break

    if len(locked_vals) < k:
        raise ConvergenceFailure(
            f"locked {len(locked_vals)}/{k} eigenpairs "
            f"(last residual {last_res:.3e}, tolerance {tol * scale:.3e})",
            residuals=np.array([last_res]))

    order = np.argsort(locked_vals)[:k]
    evals = np.array([locked_vals[i] for i in order])
    evecs = np.stack([locked_vecs[i] for i in order], axis=1)
    res = np.empty(k)
    for i in range(k):
        res[i] = np.linalg.norm(h.matvec(evecs[:, i]) - evals[i] * evecs[:, i])
        matvecs += 1
    return EigenSolution(evals, evecs, res, matvecs, float(evals[0]))


def spectral_gap(sol: EigenSolution, degeneracy_tol: float | None = None) -> float:
    """Smallest eigenvalue separation from the ground level that exceeds the
    degeneracy tolerance. All returned levels inside the tolerance means the
    solve never left the ground manifold: ManifoldNotExited."""
    e0 = sol.eigenvalues[0]
    if degeneracy_tol is None:
        degeneracy_tol = 1e-8 * max(1.0, abs(e0))
    above = sol.eigenvalues[sol.eigenvalues - e0 > degeneracy_tol]
    if len(above) == 0:
        raise ManifoldNotExited(
            f"all {sol.k} levels within {degeneracy_tol} of the ground energy")
    return float(above.min() - e0)


ORDERINGS = ("euclidean", "monna")


def _permute_sites(state: np.ndarray, n: int, perm: np.ndarray) -> np.ndarray:
    """Relabel qubits: output bit k carries input bit perm[k]."""
    full = state.reshape([2] * n)
    # axis a of the reshaped tensor indexes bit (n-1-a)
    axes = [n - 1 - perm[n - 1 - a] for a in range(n)]
    return np.transpose(full, axes).reshape(-1)


def entanglement_entropy(state: np.ndarray, block_size: int, n_sites: int,
                         ordering: str = "euclidean") -> float:
    """Von Neumann entropy of the reduced block [0, block_size).

    ordering="monna" relabels sites by the Monna permutation before cutting,
    so the block gathers sites that the bit-reversed order makes contiguous.
    """
    state = np.asarray(state, dtype=np.float64)
    if state.shape != (1 << n_sites,):
        raise InvalidSize(f"state length {state.shape} does not match n={n_sites}")
    if not 1 <= block_size < n_sites:
        raise InvalidSize(f"need 1 <= block_size < {n_sites}, got {block_size}")
    if ordering not in ORDERINGS:
        raise InvalidSize(f"ordering must be one of {ORDERINGS}, got {ordering!r}")
    nrm = np.linalg.norm(state)
    if abs(nrm - 1.0) > 1e-10:
        raise NotNormalized(f"state norm {nrm} is not 1 within 1e-10")
    if ordering == "monna":
        state = _permute_sites(state, n_sites, monna_permutation(n_sites))
    # block sites are the low bits; rows index the environment
    mat = state.reshape(1 << (n_sites - block_size), 1 << block_size)
    lam = np.linalg.svd(mat, compute_uv=False) ** 2
    lam = lam[lam > 1e-16]
    return float(-(lam * np.log(lam)).sum())


def entropy_profile(state: np.ndarray, n_sites: int,
                    ordering: str = "euclidean") -> np.ndarray:
    """Entropy at every cut 1 <= block_size < n."""
    return np.array([entanglement_entropy(state, b, n_sites, ordering)
                     for b in range(1, n_sites)])


def correlation_matrix(state: np.ndarray, n_sites: int) -> np.ndarray:
    """Connected <S^z_i S^z_j> - <S^z_i><S^z_j> matrix, S = sigma/2.

    Symmetric, diagonal in [0, 1/4]. Kept separate from the momentum-space
    observables so synthetic correlation matrices (sizes far beyond the state
    spaces this module can hold) feed the same downstream estimators.
    """
    state = np.asarray(state, dtype=np.float64)
    if state.shape != (1 << n_sites,):
        raise InvalidSize(f"state length {state.shape} does not match n={n_sites}")
    nrm = np.linalg.norm(state)
    if abs(nrm - 1.0) > 1e-10:
        raise NotNormalized(f"state norm {nrm} is not 1 within 1e-10")
    prob = state * state
    idx = np.arange(1 << n_sites, dtype=np.uint64)
    z = np.empty((1 << n_sites, n_sites))
    for k in range(n_sites):
        z[:, k] = 2.0 * ((idx >> np.uint64(k)) & np.uint64(1)).astype(np.float64) - 1.0
    m1 = prob @ z
    m2 = (z.T * prob) @ z
    c = 0.25 * (m2 - np.outer(m1, m1))
    return 0.5 * (c + c.T)


def connected_structure_factor(c: np.ndarray, q: float) -> float:
    """S(q) = (1/n) sum_ij exp(iq(i-j)) c[i,j] on a ring momentum q = 2 pi m / n."""
    c = np.asarray(c, dtype=np.float64)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise InvalidSize(f"correlation matrix must be square, got {c.shape}")
    n = c.shape[0]
    mval = q * n / (2.0 * np.pi)
    if abs(mval - round(mval)) > 1e-9:
        raise InvalidMomentum(f"q={q} is not a multiple of 2*pi/{n}")
    sites = np.arange(n)
    phase = np.exp(1j * q * (sites[:, None] - sites[None, :]))
    val = complex((phase * c).sum() / n)
    assert abs(val.imag) < 1e-12 * max(1.0, abs(val.real))
    return float(val.real)


def second_moment_xi(c: np.ndarray, q0: float = np.pi) -> float:
    """Correlation length from S(q) around the ordering momentum q0.

    xi = [2 sin(delta/2)]^-1 sqrt(S(q0)/mean(S(q0 +- delta)) - 1) with
    delta = 2 pi / n. A flat or inverted peak clamps to 0; a vanishing
    off-peak average with finite peak reports +inf.
    """
    n = np.asarray(c).shape[0]
    delta = 2.0 * np.pi / n
    s_peak = connected_structure_factor(c, q0)
    s_off = 0.5 * (connected_structure_factor(c, q0 + delta)
                   + connected_structure_factor(c, q0 - delta))
    if s_peak <= 0.0:
        return 0.0
    if s_off <= 0.0:
        return float("inf")
    arg = s_peak / s_off - 1.0
    if arg <= 0.0:
        return 0.0
    return float(np.sqrt(arg) / (2.0 * np.sin(delta / 2.0)))


def ground_with_gap(h: Hamiltonian, tol: float = 1e-8, seed: int = 0,
                    k0: int = 2, k_cap: int = 64):
    """Ground solution plus a gap that actually exits the ground manifold.

    The eigenpair count doubles on ManifoldNotExited up to k_cap, after which
    the error propagates to the caller.
    """
    k = max(2, k0)
    while True:
        sol = lowest_eigenpairs(h, k=min(k, h.dim), tol=tol, seed=seed)
        try:
            return sol, spectral_gap(sol)
        except ManifoldNotExited:
            if 2 * k > min(k_cap, h.dim):
                raise
            k *= 2


def z2_symmetric_ground(h: Hamiltonian, sol: EigenSolution,
                        degeneracy_tol: float | None = None) -> np.ndarray:
    """Representative ground vector rotated to the global-flip eigenbasis.

    The simultaneous flip of every spin commutes with H, so a numerically
    degenerate lowest cluster can be rotated into flip eigenstates; the
    symmetric member is returned (it is the B -> 0+ limit of the unique
    ground state). A nondegenerate ground state is returned as is, sign-fixed.
    """
    e0 = sol.eigenvalues[0]
    if degeneracy_tol is None:
        degeneracy_tol = 1e-8 * max(1.0, abs(e0))
    members = [i for i in range(sol.k)
               if sol.eigenvalues[i] - e0 <= degeneracy_tol]
    n = h.n_sites
    mask = (1 << n) - 1
    flip_idx = mask - np.arange(1 << n)

    block = np.stack([sol.eigenvectors[:, i] for i in members], axis=1)
    xblock = block[flip_idx, :]
    xmat = block.T @ xblock
    w, u = np.linalg.eigh(xmat)
    # eigenvalue closest to +1 is the flip-symmetric combination
    pick = int(np.argmax(w))
    v = block @ u[:, pick]
    v /= np.linalg.norm(v)
    if v[np.argmax(np.abs(v))] < 0:
        v = -v
    return v
