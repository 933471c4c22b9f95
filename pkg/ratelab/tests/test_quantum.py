"""Tests for entropies, partial traces, purification and ccq states."""

import math

import numpy as np
import pytest
from scipy import linalg

from ratelab.errors import DomainError, UnknownRegisterError
from ratelab.quantum import (
    UNDEFINED,
    CcqState,
    binary_entropy,
    classical_min_entropy,
    conditional_entropy,
    max_entropy_rank,
    min_entropy,
    partial_trace,
    product_bound_delta,
    purify,
    shannon_entropy,
    smooth_min_entropy_product_bound,
    trace_distance,
    von_neumann_entropy,
)

from .helpers import choi_of

PHI_PLUS = np.array([1, 0, 0, 1]) / math.sqrt(2)


def random_density(rng, dim, rank=None):
    g = rng.normal(size=(dim, rank or dim)) + 1j * rng.normal(size=(dim, rank or dim))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_ccq(rng, sizes, eve_dim):
    weights = rng.dirichlet(np.ones(int(np.prod(sizes))))
    blocks = np.array([w * random_density(rng, eve_dim) for w in weights])
    names = [f"R{i}" for i in range(len(sizes))]
    return CcqState.from_weighted(list(zip(names, sizes)), blocks.reshape(tuple(sizes) + (eve_dim, eve_dim)))


class TestBinaryEntropy:
    def test_examples(self):
        """h(1/2) = 1, h(0) = 0, h(1/4) = 0.811278."""
        assert binary_entropy(0.5) == pytest.approx(1.0)
        assert binary_entropy(0.0) == 0.0
        assert binary_entropy(0.25) == pytest.approx(0.811278, abs=1e-6)

    def test_symmetric(self):
        for p in (0.01, 0.2, 0.37):
            assert binary_entropy(p) == pytest.approx(binary_entropy(1 - p), abs=1e-15)

    def test_out_of_range(self):
        with pytest.raises(DomainError):
            binary_entropy(1.2)
        with pytest.raises(DomainError):
            binary_entropy(-0.1)


class TestShannonEntropy:
    def test_examples(self):
        assert shannon_entropy([1, 0, 0, 0]) == 0.0
        assert shannon_entropy([0.25] * 4) == pytest.approx(2.0)
        assert shannon_entropy([0.85, 0.05, 0.05, 0.05]) == pytest.approx(0.847584, abs=1e-6)

    def test_rejects_non_distribution(self):
        with pytest.raises(DomainError):
            shannon_entropy([0.5, 0.6])


class TestVonNeumannEntropy:
    def test_maximally_mixed_qubit(self):
        assert von_neumann_entropy(np.eye(2) / 2) == pytest.approx(1.0)

    def test_pure_state(self):
        assert von_neumann_entropy(np.outer(PHI_PLUS, PHI_PLUS)) == pytest.approx(0.0, abs=1e-12)

    def test_bloch_vector(self):
        """|theta| = 0.6 gives h(0.8)."""
        rho = (np.eye(2) + 0.6 * np.array([[1, 0], [0, -1]])) / 2
        assert von_neumann_entropy(rho) == pytest.approx(0.721928, abs=1e-6)

    def test_rejects_invalid(self):
        with pytest.raises(DomainError):
            von_neumann_entropy(np.diag([1.5, -0.5]))
        with pytest.raises(DomainError):
            von_neumann_entropy(np.array([[0.5, 1], [0, 0.5]]))


class TestPartialTrace:
    def test_maximally_entangled(self):
        reduced = partial_trace(np.outer(PHI_PLUS, PHI_PLUS), [2, 2], [0])
        assert np.allclose(reduced, np.eye(2) / 2)

    def test_product(self, rng):
        rho, sigma = random_density(rng, 2), random_density(rng, 3)
        assert np.allclose(partial_trace(np.kron(rho, sigma), [2, 3], [0]), rho)
        assert np.allclose(partial_trace(np.kron(rho, sigma), [2, 3], [1]), sigma)

    def test_choi_alice_marginal(self):
        choi = choi_of("amplitude_damping", p=0.2)
        assert np.allclose(partial_trace(choi.op, [2, 2], [0]), np.eye(2) / 2, atol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(DomainError):
            partial_trace(np.eye(4) / 4, [2, 3], [0])


class TestPurify:
    def test_pure_input(self):
        state = purify(np.outer(PHI_PLUS, PHI_PLUS))
        assert state.dims == (4, 1)

    def test_maximally_mixed(self):
        state = purify(np.eye(2) / 2)
        assert state.dims == (2, 2)
        assert np.allclose(partial_trace(state.projector(), [2, 2], [0]), np.eye(2) / 2)

    def test_bell_diagonal_choi(self):
        choi = choi_of("pauli", bell=[0.85, 0.05, 0.05, 0.05])
        state = purify(choi.op)
        assert state.amplitudes.size == 16
        reduced = partial_trace(state.projector(), list(state.dims), [0])
        assert np.max(np.abs(reduced - choi.op)) < 1e-9

    def test_random_reduction(self, rng):
        for dim in (2, 3, 4, 6):
            rho = random_density(rng, dim, rank=2)
            state = purify(rho)
            assert state.dims[1] == 2
            assert np.max(np.abs(partial_trace(state.projector(), list(state.dims), [0]) - rho)) < 1e-9


class TestConditionalEntropy:
    def test_product_state(self, rng):
        """Eve independent of X gives H(X|E) = H(X)."""
        p = np.array([0.3, 0.7])
        sigma = random_density(rng, 2)
        state = CcqState.from_weighted([("X", 2)], np.array([q * sigma for q in p]))
        assert conditional_entropy(state, ["X"]) == pytest.approx(shannon_entropy(p), abs=1e-9)

    def test_classical_copy(self):
        joint = np.array([[0.5, 0.0], [0.0, 0.5]])
        state = CcqState.from_weighted([("X", 2), ("Y", 2)], joint[..., None, None])
        assert conditional_entropy(state, ["X"], ["Y"], with_eve=False) == pytest.approx(0.0, abs=1e-12)

    def test_chain_rule(self, rng):
        for _ in range(5):
            state = random_ccq(rng, (2, 2, 2), 3)
            lhs = conditional_entropy(state, ["R0", "R1"], ["R2"])
            rhs = conditional_entropy(state, ["R0"], ["R1", "R2"]) + conditional_entropy(state, ["R1"], ["R2"])
            assert lhs == pytest.approx(rhs, abs=1e-9)

    def test_unknown_register(self, rng):
        state = random_ccq(rng, (2,), 2)
        with pytest.raises(UnknownRegisterError):
            conditional_entropy(state, ["nope"])

    def test_validate_and_marginal(self, rng):
        state = random_ccq(rng, (2, 3), 2)
        state.validate()
        marginal = state.marginal(["R1"])
        assert marginal.names == ["R1"]
        assert np.isclose(np.trace(marginal.total_operator()).real, 1.0)


class TestMinEntropy:
    def test_uniform_trivial_side(self):
        assert min_entropy(np.eye(2) / 2, np.eye(1), (2, 1)) == pytest.approx(1.0)

    def test_pure_trivial_side(self):
        assert min_entropy(np.diag([1.0, 0.0]), np.eye(1), (2, 1)) == pytest.approx(0.0, abs=1e-12)

    def test_classical_uniform(self):
        rho = np.eye(4) / 4
        assert min_entropy(rho, np.eye(2) / 2, (2, 2)) == pytest.approx(1.0)
        assert classical_min_entropy(np.full((2, 2), 0.25)) == pytest.approx(1.0)

    def test_psd_characterisation(self, rng):
        """2^-H makes lambda id⊗sigma - rho PSD, slightly less does not."""
        for _ in range(5):
            rho = random_density(rng, 4)
            sigma = partial_trace(rho, [2, 2], [1])
            lam = 2 ** -min_entropy(rho, sigma, (2, 2))
            ref = np.kron(np.eye(2), sigma)
            assert linalg.eigvalsh(lam * ref - rho).min() > -1e-9
            assert linalg.eigvalsh((lam - 1e-6) * ref - rho).min() < 0

    def test_support_failure(self):
        rho = np.diag([0.0, 1.0, 0.0, 0.0])
        assert min_entropy(rho, np.diag([1.0, 0.0]), (2, 2)) is UNDEFINED

    def test_dimension_mismatch(self):
        with pytest.raises(DomainError):
            min_entropy(np.eye(4) / 4, np.eye(3) / 3, (2, 2))


class TestMaxEntropyRank:
    def test_examples(self):
        assert max_entropy_rank(np.diag([1.0, 0.0])) == 0.0
        assert max_entropy_rank(np.eye(2) / 2) == pytest.approx(1.0)
        choi = choi_of("pauli", bell=[0.5, 0.25, 0.25, 0.0])
        assert max_entropy_rank(choi.op) == pytest.approx(math.log2(3))


class TestProductBound:
    def test_delta_value(self):
        delta = product_bound_delta(1.0, 10**6, 1e-9)
        assert delta == pytest.approx(5 * math.sqrt(math.log2(2e9) / 1e6))

    def test_monotone_in_n(self):
        values = [product_bound_delta(1.0, n, 1e-6) for n in (10, 100, 10**4, 10**8)]
        assert all(a > b for a, b in zip(values, values[1:]))

    def test_large_n_limit(self):
        assert smooth_min_entropy_product_bound(1.5, 0.7, 1.0, 10**18, 0.01) == pytest.approx(0.8, abs=1e-6)

    def test_rejects_bad_epsilon(self):
        with pytest.raises(DomainError):
            product_bound_delta(1.0, 100, 1.5)


class TestTraceDistance:
    def test_examples(self):
        rho = np.diag([0.6, 0.4])
        assert trace_distance(rho, rho) == 0.0
        assert trace_distance(np.diag([1.0, 0.0]), np.diag([0.0, 1.0])) == pytest.approx(2.0)
        assert trace_distance(rho, np.eye(2) / 2) == pytest.approx(0.2)

    def test_metric(self, rng):
        for _ in range(10):
            a, b, c = (random_density(rng, 3) for _ in range(3))
            assert trace_distance(a, b) == pytest.approx(trace_distance(b, a), abs=1e-12)
            assert trace_distance(a, c) <= trace_distance(a, b) + trace_distance(b, c) + 1e-9

    def test_eigendecomposition_residual(self, rng):
        for dim in (2, 16, 64):
            g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
            herm = g + g.conj().T
            evals, vecs = linalg.eigh(herm)
            assert np.max(np.abs(herm - vecs @ np.diag(evals) @ vecs.conj().T)) < 1e-9
