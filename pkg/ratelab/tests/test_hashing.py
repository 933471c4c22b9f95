"""Tests for Toeplitz hashing and the exact secrecy audits."""

import numpy as np
import pytest

from ratelab.errors import BudgetExceededError, DomainError
from ratelab.hashing import (
    AuditResult,
    ToeplitzHash,
    classical_secrecy_audit,
    collision_probability,
    family_size,
    iid_classical_joint,
    iid_key_state,
    secrecy_audit,
    toeplitz_apply,
)
from ratelab.quantum import UNDEFINED, CcqState


class TestToeplitzHash:
    def test_zero_seed(self):
        h = ToeplitzHash(6, 3, np.zeros(8))
        assert not toeplitz_apply(h, [1, 0, 1, 1, 0, 1]).any()

    def test_matrix_is_toeplitz(self, rng):
        h = ToeplitzHash.random(7, 4, rng)
        t = h.matrix()
        assert t.shape == (4, 7)
        assert np.array_equal(t[1:, 1:], t[:-1, :-1])

    def test_linear(self, rng):
        h = ToeplitzHash.random(10, 5, rng)
        for _ in range(10):
            x, y = rng.integers(0, 2, 10), rng.integers(0, 2, 10)
            assert np.array_equal(toeplitz_apply(h, x ^ y), toeplitz_apply(h, x) ^ toeplitz_apply(h, y))

    def test_from_index_big_endian(self):
        h = ToeplitzHash.from_index(3, 2, 0b1000)
        assert h.seed.tolist() == [1, 0, 0, 0]

    def test_empty_output(self):
        assert ToeplitzHash.seed_length(5, 0) == 0
        assert family_size(5, 0) == 1
        assert toeplitz_apply(ToeplitzHash(5, 0, []), [1, 1, 0, 0, 1]).size == 0

    def test_validation(self):
        with pytest.raises(DomainError):
            ToeplitzHash(3, 4, np.zeros(6))
        with pytest.raises(DomainError):
            ToeplitzHash(3, 2, np.zeros(3))
        with pytest.raises(DomainError):
            toeplitz_apply(ToeplitzHash(3, 1, np.zeros(3)), [1, 0])


class TestCollisions:
    def test_universal(self, rng):
        """Distinct inputs collide with probability at most 2^-ell."""
        for _ in range(5):
            x, y = rng.integers(0, 2, 6), rng.integers(0, 2, 6)
            if np.array_equal(x, y):
                continue
            assert collision_probability(6, 3, x, y) <= 2**-3 + 1e-12

    def test_equal_inputs(self):
        assert collision_probability(4, 2, [1, 0, 1, 0], [1, 0, 1, 0]) == 1.0

    def test_budget(self):
        with pytest.raises(BudgetExceededError):
            collision_probability(20, 10, np.zeros(20), np.ones(20))


class TestClassicalAudit:
    def test_zero_output(self):
        joint = iid_classical_joint([[0.4, 0.1], [0.1, 0.4]], 3)
        result = classical_secrecy_audit(joint, 0)
        assert result.distance == pytest.approx(0.0, abs=1e-12)
        assert result.seeds == 1

    def test_eve_knows_everything(self):
        """Eve holding a copy of X leaves one hashed bit at distance 1."""
        joint = np.eye(8) / 8
        result = classical_secrecy_audit(joint, 1)
        assert result.min_entropy == pytest.approx(0.0)
        assert result.distance == pytest.approx(1.0)
        assert result.holds

    def test_uniform_input(self):
        joint = np.full((16, 1), 1 / 16)
        result = classical_secrecy_audit(joint, 2)
        assert result.min_entropy == pytest.approx(4.0)
        assert result.bound == pytest.approx(0.5)
        assert result.holds

    def test_noisy_copy_satisfies_bound(self):
        joint = iid_classical_joint([[0.4, 0.1], [0.1, 0.4]], 4)
        assert joint.shape == (16, 16)
        for ell in (1, 2):
            result = classical_secrecy_audit(joint, ell)
            assert result.exhaustive
            assert result.holds

    def test_subsampled(self):
        joint = iid_classical_joint([[0.4, 0.1], [0.1, 0.4]], 4)
        result = classical_secrecy_audit(joint, 2, max_exhaustive=8, subsample=4)
        assert result.seeds == 4
        assert not result.exhaustive

    def test_validation(self):
        with pytest.raises(DomainError):
            classical_secrecy_audit(np.ones((3, 1)) / 3, 0)
        with pytest.raises(DomainError):
            classical_secrecy_audit(np.full((4, 1), 0.25), 3)

    def test_report(self):
        data = AuditResult(0.1, 0.5, 2.0, 16, True).to_dict()
        assert data["holds"] is True
        assert data["minEntropy"] == 2.0


class TestQuantumAudit:
    def test_amplitude_damping(self, amplitude_damping):
        state = iid_key_state(amplitude_damping, 3, "reverse")
        assert state.eve_dim == 8
        for ell in (1, 2):
            result = secrecy_audit(state, ell)
            assert result.exhaustive
            assert result.holds

    def test_diagonal_state_takes_classical_path(self):
        joint = iid_classical_joint([[0.4, 0.1], [0.1, 0.4]], 3)
        blocks = np.array([np.diag(row) for row in joint])
        state = CcqState.from_weighted([("X", 8)], blocks)
        quantum = secrecy_audit(state, 1)
        classical = classical_secrecy_audit(joint, 1)
        assert quantum.distance == pytest.approx(classical.distance)
        assert quantum.min_entropy == pytest.approx(classical.min_entropy)

    def test_identity_channel_is_secret(self, identity):
        state = iid_key_state(identity, 2)
        result = secrecy_audit(state, 2)
        assert result.min_entropy == pytest.approx(2.0)
        assert result.holds

    def test_budget(self, depolarizing):
        with pytest.raises(BudgetExceededError):
            iid_key_state(depolarizing, 4)
        iid_key_state(depolarizing, 3)

    def test_needs_single_register(self, rng):
        blocks = np.zeros((2, 2, 1, 1))
        blocks[0, 0] = blocks[1, 1] = 0.5
        with pytest.raises(DomainError):
            secrecy_audit(CcqState.from_weighted([("X", 2), ("Y", 2)], blocks), 1)

    def test_undefined_min_entropy_is_an_error(self, amplitude_damping, monkeypatch):
        monkeypatch.setattr("ratelab.hashing.min_entropy", lambda *args: UNDEFINED)
        state = iid_key_state(amplitude_damping, 3, "reverse")
        with pytest.raises(DomainError, match="undefined"):
            secrecy_audit(state, 1)
