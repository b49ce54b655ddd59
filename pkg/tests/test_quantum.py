import numpy as np
import pytest
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from pwr2lab import (
    InvalidMomentum,
    InvalidSize,
    ManifoldNotExited,
    NotNormalized,
    TooLarge,
    ConvergenceFailure,
    build_pwr2_couplings,
    build_ring_couplings,
    enumerate_spectrum,
)
from pwr2lab._bits import bit_reverse
from pwr2lab.quantum import (
    EigenSolution,
    build_hamiltonian,
    connected_structure_factor,
    correlation_matrix,
    entanglement_entropy,
    entropy_profile,
    lowest_eigenpairs,
    second_moment_xi,
    spectral_gap,
    z2_symmetric_ground,
)


def brute_diag(g):
    """Classical energy of every basis state, straight from the pair list."""
    n = g.n_sites
    idx = np.arange(1 << n, dtype=np.uint64)
    cols = np.arange(n, dtype=np.uint64)
    sig = 2.0 * ((idx[:, None] >> cols[None, :]) & np.uint64(1)).astype(float) - 1.0
    e = np.zeros(1 << n)
    for i, j, w in zip(g.pair_i, g.pair_j, g.coupling):
        e += 0.25 * w * sig[:, i] * sig[:, j]
    return e


def dense_oracle(g, b):
    n = g.n_sites
    m = np.diag(brute_diag(g))
    idx = np.arange(1 << n)
    for k in range(n):
        m[idx ^ (1 << k), idx] += 0.5 * b
    return m


def sparse_oracle(g, b):
    n = g.n_sites
    dim = 1 << n
    diag = sp.diags(brute_diag(g), format="csr")
    idx = np.arange(dim)
    rows = np.concatenate([idx ^ (1 << k) for k in range(n)])
    cols = np.tile(idx, n)
    off = sp.csr_matrix((np.full(n * dim, 0.5 * b), (rows, cols)), shape=(dim, dim))
    return diag + off


class TestBuildHamiltonian:
    def test_two_site_spectrum(self):
        g = build_ring_couplings(2, 0.0, 1.0)
        h = build_hamiltonian(g, 0.0)
        np.testing.assert_allclose(np.sort(h.diagonal), [-0.25, -0.25, 0.25, 0.25],
                                   rtol=0, atol=0)

    @pytest.mark.parametrize("g", [
        build_pwr2_couplings(8, -1.5),
        build_pwr2_couplings(8, 2.0),
        build_ring_couplings(12, 0.7),
        build_ring_couplings(10, -0.3, distances=(1,)),
    ])
    def test_diagonal_is_classical_energy(self, g):
        h = build_hamiltonian(g, 0.4)
        np.testing.assert_allclose(h.diagonal, brute_diag(g), rtol=1e-14, atol=1e-14)

    def test_dense_matches_oracle(self):
        g = build_pwr2_couplings(8, -1.2)
        h = build_hamiltonian(g, 0.7)
        np.testing.assert_allclose(h.to_dense(), dense_oracle(g, 0.7),
                                   rtol=1e-14, atol=1e-15)

    def test_matvec_matches_dense(self):
        g = build_ring_couplings(10, 0.5)
        h = build_hamiltonian(g, 1.0)
        m = dense_oracle(g, 1.0)
        rng = np.random.default_rng(3)
        for _ in range(5):
            x = rng.standard_normal(h.dim)
            np.testing.assert_allclose(h.matvec(x), m @ x, rtol=1e-13, atol=1e-12)

    def test_hermitian_on_random_vectors(self):
        g = build_pwr2_couplings(8, -1.5)
        h = build_hamiltonian(g, 0.7)
        rng = np.random.default_rng(11)
        for _ in range(20):
            u = rng.standard_normal(h.dim)
            v = rng.standard_normal(h.dim)
            lhs = u @ h.matvec(v)
            rhs = h.matvec(u) @ v
            assert abs(lhs - rhs) < 1e-12 * max(1.0, abs(lhs))

    def test_too_many_sites(self):
        g = build_ring_couplings(25, -1.0)
        with pytest.raises(TooLarge):
            build_hamiltonian(g, 0.1)

    def test_dense_cap(self):
        g = build_ring_couplings(16, -1.0)
        h = build_hamiltonian(g, 0.1)
        with pytest.raises(TooLarge):
            h.to_dense()


class TestLowestEigenpairs:
    def test_dense_window_n8(self):
        # small enough that the solve goes through the dense eigh shortcut
        g = build_pwr2_couplings(8, -3.0)
        h = build_hamiltonian(g, 0.5)
        sol = lowest_eigenpairs(h, k=4)
        ref = np.linalg.eigvalsh(dense_oracle(g, 0.5))[:4]
        np.testing.assert_allclose(sol.eigenvalues, ref, rtol=0, atol=1e-10)

    @pytest.mark.parametrize("n,s,b,k", [
        (10, 0.5, 1.0, 6),   # doubly degenerate levels in the low spectrum
        (10, -4.0, 0.1, 4),
        (12, -1.0, 0.3, 5),
    ])
    def test_lanczos_matches_oracle(self, n, s, b, k):
        g = build_ring_couplings(n, s)
        h = build_hamiltonian(g, b)
        sol = lowest_eigenpairs(h, k=k)
        if n <= 10:
            ref = np.linalg.eigvalsh(dense_oracle(g, b))[:k]
            atol = 1e-9
        else:
            ref = np.sort(spla.eigsh(sparse_oracle(g, b), k=k, which="SA",
                                     ncv=80, tol=1e-12)[0])
            atol = 1e-7
        np.testing.assert_allclose(sol.eigenvalues, ref, rtol=0, atol=atol)
        scale = max(1.0, h.norm_bound())
        assert np.all(sol.residuals <= 1e-8 * scale)
        gram = sol.eigenvectors.T @ sol.eigenvectors
        np.testing.assert_allclose(gram, np.eye(k), rtol=0, atol=1e-8)

    def test_diagonal_operator_minimum(self):
        g = build_ring_couplings(10, -0.7)
        h = build_hamiltonian(g, 0.0)
        sol = lowest_eigenpairs(h, k=1)
        assert sol.ground_energy == pytest.approx(float(h.diagonal.min()), abs=1e-10)
        assert sol.ground_energy == pytest.approx(
            enumerate_spectrum(g).ground_energy, abs=1e-10)

    def test_deterministic_bits(self):
        g = build_ring_couplings(10, 0.5)
        h = build_hamiltonian(g, 1.0)
        a = lowest_eigenpairs(h, k=3, seed=7)
        b = lowest_eigenpairs(h, k=3, seed=7)
        assert np.array_equal(a.eigenvalues, b.eigenvalues)
        assert np.array_equal(a.eigenvectors, b.eigenvectors)

    def test_convergence_failure_carries_residuals(self):
        g = build_ring_couplings(10, 0.5)
        h = build_hamiltonian(g, 1.0)
        with pytest.raises(ConvergenceFailure) as exc:
            lowest_eigenpairs(h, k=2, tol=1e-300, max_restarts=3)
        assert len(exc.value.residuals) >= 1

    def test_invalid_k(self):
        g = build_ring_couplings(8, 0.0)
        h = build_hamiltonian(g, 0.2)
        with pytest.raises(InvalidSize):
            lowest_eigenpairs(h, k=0)

    def test_ground_energy_is_variational(self):
        g = build_pwr2_couplings(8, -1.3)
        h = build_hamiltonian(g, 0.6)
        e0 = lowest_eigenpairs(h, k=1).ground_energy
        rng = np.random.default_rng(5)
        for _ in range(100):
            x = rng.standard_normal(h.dim)
            x /= np.linalg.norm(x)
            assert x @ h.matvec(x) >= e0 - 1e-12


class TestSpectralGap:
    @staticmethod
    def _sol(energies):
        e = np.asarray(energies, dtype=float)
        k = len(e)
        return EigenSolution(e, np.eye(k), np.zeros(k), 0, float(e[0]))

    def test_definition(self):
        assert spectral_gap(self._sol([-1.0, -1.0, -0.5]), 1e-9) == pytest.approx(0.5)

    def test_manifold_not_exited(self):
        with pytest.raises(ManifoldNotExited):
            spectral_gap(self._sol([-1.0, -1.0 + 1e-12]), 1e-9)

    def test_n4_classical_point(self):
        # ground manifold: 2 alternating states + 4 two-domain states, all -0.5
        g = build_pwr2_couplings(4, 0.0)
        h = build_hamiltonian(g, 0.0)
        sol = lowest_eigenpairs(h, k=7)
        assert spectral_gap(sol) == pytest.approx(0.5, abs=1e-10)
        members = np.sum(sol.eigenvalues - sol.eigenvalues[0] <= 1e-8)
        assert members == enumerate_spectrum(g).levels[0][1] == 6

    def test_matches_enumeration_gap(self):
        for n, s in [(8, -3.0), (12, 0.7), (8, 1.5)]:
            g = build_ring_couplings(n, s) if n == 12 else build_pwr2_couplings(n, s)
            h = build_hamiltonian(g, 0.0)
            spec = enumerate_spectrum(g)
            k = spec.levels[0][1] + 1
            sol = lowest_eigenpairs(h, k=k)
            assert spectral_gap(sol) == pytest.approx(spec.gap, abs=1e-9)


def product_state(amps):
    """Tensor product over sites; site k is bit k, so reversed kron order."""
    v = np.array([1.0])
    for a in amps:
        v = np.kron(np.asarray(a, dtype=float), v)
    return v


class TestEntanglementEntropy:
    def test_product_state_zero(self):
        rng = np.random.default_rng(2)
        th = rng.uniform(0, np.pi, 5)
        state = product_state([(np.cos(t), np.sin(t)) for t in th])
        for b in range(1, 5):
            assert entanglement_entropy(state, b, 5) == pytest.approx(0.0, abs=1e-12)

    def test_bell_pair(self):
        state = np.array([1.0, 0.0, 0.0, 1.0]) / np.sqrt(2)
        assert entanglement_entropy(state, 1, 2) == pytest.approx(np.log(2), abs=1e-12)

    def test_antipodal_pairs_euclid_vs_monna(self):
        # Bell pairs on (0,2) and (1,3): both straddle the euclidean half cut,
        # while the monna block {0,2} swallows one pair whole.
        state = np.zeros(16)
        for i in range(16):
            b = [(i >> k) & 1 for k in range(4)]
            if b[0] == b[2] and b[1] == b[3]:
                state[i] = 0.5
        assert entanglement_entropy(state, 2, 4) == pytest.approx(
            2 * np.log(2), abs=1e-12)
        assert entanglement_entropy(state, 2, 4, ordering="monna") == pytest.approx(
            0.0, abs=1e-12)

    def test_block_complement_symmetry(self):
        n = 6
        rng = np.random.default_rng(9)
        state = rng.standard_normal(1 << n)
        state /= np.linalg.norm(state)
        rev = np.empty_like(state)
        for i in range(1 << n):
            rev[bit_reverse(i, n)] = state[i]
        for b in range(1, n):
            assert entanglement_entropy(state, b, n) == pytest.approx(
                entanglement_entropy(rev, n - b, n), abs=1e-9)

    def test_profile_shape(self):
        g = build_pwr2_couplings(8, -1.0)
        sol = lowest_eigenpairs(build_hamiltonian(g, 0.5), k=1)
        prof = entropy_profile(sol.eigenvectors[:, 0], 8)
        assert prof.shape == (7,)
        assert np.all(prof >= -1e-12)

    def test_validation(self):
        state = np.array([1.0, 0.0, 0.0, 1.0]) / np.sqrt(2)
        with pytest.raises(NotNormalized):
            entanglement_entropy(2.0 * state, 1, 2)
        with pytest.raises(InvalidSize):
            entanglement_entropy(state, 2, 2)
        with pytest.raises(InvalidSize):
            entanglement_entropy(state, 1, 3)
        with pytest.raises(InvalidSize):
            entanglement_entropy(state, 1, 2, ordering="sorted")


class TestCorrelations:
    def test_transverse_product_state(self):
        n = 6
        state = np.full(1 << n, 1.0 / np.sqrt(1 << n))
        c = correlation_matrix(state, n)
        np.testing.assert_allclose(c, np.eye(n) / 4.0, rtol=0, atol=1e-12)
        for m in range(n):
            q = 2.0 * np.pi * m / n
            assert connected_structure_factor(c, q) == pytest.approx(0.25, abs=1e-12)

    def test_staggered_cat_state(self):
        n = 6
        up_even = sum(1 << k for k in range(0, n, 2))
        state = np.zeros(1 << n)
        state[up_even] = state[up_even ^ ((1 << n) - 1)] = 1.0 / np.sqrt(2)
        c = correlation_matrix(state, n)
        i = np.arange(n)
        expect = 0.25 * (-1.0) ** np.abs(i[:, None] - i[None, :])
        np.testing.assert_allclose(c, expect, rtol=0, atol=1e-12)
        assert connected_structure_factor(c, np.pi) == pytest.approx(n / 4.0, abs=1e-12)
        assert connected_structure_factor(c, 0.0) == pytest.approx(0.0, abs=1e-12)
        assert second_moment_xi(c) == np.inf

    def test_parseval(self):
        n = 6
        rng = np.random.default_rng(4)
        state = rng.standard_normal(1 << n)
        state /= np.linalg.norm(state)
        c = correlation_matrix(state, n)
        total = sum(connected_structure_factor(c, 2.0 * np.pi * m / n)
                    for m in range(n))
        assert total == pytest.approx(np.trace(c), abs=1e-10)

    def test_ground_state_nonnegative_sq(self):
        g = build_ring_couplings(12, -1.2)
        sol = lowest_eigenpairs(build_hamiltonian(g, 0.4), k=1)
        c = correlation_matrix(sol.eigenvectors[:, 0], 12)
        np.testing.assert_allclose(c, c.T, rtol=0, atol=1e-12)
        assert np.all(np.diag(c) >= -1e-12)
        assert np.all(np.diag(c) <= 0.25 + 1e-12)
        for m in range(12):
            assert connected_structure_factor(c, 2.0 * np.pi * m / 12) >= -1e-10

    def test_momentum_grid(self):
        c = np.eye(6) / 4.0
        with pytest.raises(InvalidMomentum):
            connected_structure_factor(c, 0.3)
        with pytest.raises(InvalidSize):
            connected_structure_factor(np.ones((2, 3)), 0.0)
        with pytest.raises(InvalidMomentum):
            second_moment_xi(np.eye(5) / 4.0)  # pi off the odd-n grid

    def test_xi_flat_spectrum_clamps(self):
        assert second_moment_xi(np.eye(6) / 4.0) == 0.0

    def test_xi_synthetic_exponential(self):
        n = 64
        i = np.arange(n)
        dist = np.minimum(np.abs(i[:, None] - i[None, :]),
                          n - np.abs(i[:, None] - i[None, :]))
        c = 0.25 * (-1.0) ** dist * np.exp(-dist / 4.0)
        xi = second_moment_xi(c)
        assert abs(xi - 4.0) / 4.0 < 0.10


class TestZ2Ground:
    def test_cat_state_entropy(self):
        g = build_ring_couplings(10, -4.0)
        h = build_hamiltonian(g, 0.1)
        sol = lowest_eigenpairs(h, k=3)
        v = z2_symmetric_ground(h, sol)
        flip = (1 << 10) - 1 - np.arange(1 << 10)
        np.testing.assert_allclose(v[flip], v, rtol=0, atol=1e-6)
        half = entanglement_entropy(v, 5, 10)
        assert half == pytest.approx(np.log(2), abs=0.05)

    def test_nondegenerate_passthrough(self):
        g = build_pwr2_couplings(8, -3.0)
        h = build_hamiltonian(g, 0.5)
        sol = lowest_eigenpairs(h, k=2)
        v = z2_symmetric_ground(h, sol)
        assert abs(v @ sol.eigenvectors[:, 0]) == pytest.approx(1.0, abs=1e-10)
