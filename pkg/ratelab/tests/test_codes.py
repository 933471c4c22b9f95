"""Tests for linear codes, minimum-entropy decoding and reconciliation runs."""

import numpy as np
import pytest

from ratelab.codes import (
    LinearCode,
    bsc_grid,
    coset_members,
    decoding_error_rate,
    gf2_rank,
    min_entropy_decode,
    one_way_ir,
    sample_pairs,
    syndrome,
    syndrome_cost_comparison,
    syndrome_length,
    two_way_ir,
    universal_correctness,
)
from ratelab.channels import joint_distribution
from ratelab.errors import BudgetExceededError, DomainError
from ratelab.twoway import BlockFunctions

from .helpers import choi_of, h


def bsc(q):
    return np.array([[1 - q, q], [q, 1 - q]]) / 2


class TestLinearCode:
    def test_syndrome_example(self):
        code = LinearCode(np.array([[1, 1, 1]]))
        assert syndrome(code, [1, 0, 1]).tolist() == [0]
        assert syndrome(code, [1, 0, 0]).tolist() == [1]

    def test_codewords_have_zero_syndrome(self, rng):
        code = LinearCode.random(10, 4, rng)
        for word in coset_members(code, np.zeros(4, dtype=np.uint8)):
            assert not code.syndrome(word).any()

    def test_linearity(self, rng):
        code = LinearCode.random(12, 5, rng)
        words = coset_members(code, np.zeros(5, dtype=np.uint8))
        for _ in range(10):
            x = rng.integers(0, 2, 12)
            c = words[rng.integers(len(words))]
            assert np.array_equal(code.syndrome(x ^ c), code.syndrome(x))

    def test_kernel_and_particular_solution(self, rng):
        code = LinearCode.random(9, 4, rng)
        assert not ((code.matrix.astype(int) @ code.kernel_basis.T.astype(int)) % 2).any()
        assert code.kernel_basis.shape == (5, 9)
        t = np.array([1, 0, 1, 1], dtype=np.uint8)
        assert np.array_equal(code.syndrome(code.particular_solution(t)), t)
        assert len(coset_members(code, t)) == 32

    def test_rank(self):
        assert gf2_rank([[1, 1, 0], [0, 1, 1], [1, 0, 1]]) == 2
        assert gf2_rank(np.eye(4, dtype=np.uint8)) == 4
        with pytest.raises(DomainError):
            LinearCode(np.array([[1, 1], [1, 1]]))

    def test_rejects_non_binary(self):
        with pytest.raises(DomainError):
            LinearCode(np.array([[1, 2]]))
        code = LinearCode(np.array([[1, 1, 1]]))
        with pytest.raises(DomainError):
            code.syndrome([1, 0])

    def test_text_round_trip(self, rng, tmp_path):
        code = LinearCode.random(8, 3, rng)
        path = tmp_path / "code.txt"
        path.write_text(code.to_text())
        again = LinearCode.load(str(path))
        assert np.array_equal(again.matrix, code.matrix)
        assert LinearCode.from_text("4 0\n").k == 0

    def test_text_errors(self):
        for text in ("", "three two\n", "3 1\n10\n", "3 2\n101\n"):
            with pytest.raises(DomainError):
                LinearCode.from_text(text)

    def test_min_distance(self, rng):
        code = LinearCode.random(12, 7, rng, min_distance=3)
        assert code.min_distance() >= 3
        assert LinearCode(np.eye(3, dtype=np.uint8)).min_distance() == 4

    def test_budget(self):
        with pytest.raises(BudgetExceededError):
            coset_members(LinearCode.empty(22), np.zeros(0, dtype=np.uint8))
        with pytest.raises(BudgetExceededError):
            LinearCode.empty(25).check_budget()


class TestMinEntropyDecode:
    def test_prefers_low_type_entropy(self):
        """Code {000, 011}; 000 has type entropy h(1/3) against y = 001, 011 has log 3."""
        code = LinearCode(np.array([[1, 0, 0], [0, 1, 1]]))
        decoded = min_entropy_decode(code, [0, 0], [0, 0, 1])
        assert decoded.tolist() == [0, 0, 0]

    def test_tie_break_is_lexicographic(self):
        code = LinearCode(np.array([[1, 1]]))
        assert min_entropy_decode(code, [1], [0, 0]).tolist() == [0, 1]

    def test_full_rank_is_exact(self, rng):
        code = LinearCode.random(10, 10, rng)
        for _ in range(20):
            x = rng.integers(0, 2, 10)
            y = rng.integers(0, 2, 10)
            assert one_way_ir(x, y, code).matches(x)

    def test_side_length_mismatch(self):
        code = LinearCode(np.array([[1, 1, 1]]))
        with pytest.raises(DomainError):
            min_entropy_decode(code, [0], [0, 1])


class TestOneWayReconciliation:
    def test_identical_strings(self, rng):
        code = LinearCode.random(16, 12, rng)
        x = rng.integers(0, 2, 16)
        outcome = one_way_ir(x, x, code)
        assert outcome.matches(x)
        assert outcome.syndrome.size == 12

    def test_symmetric_channel(self, rng):
        """Q = 0.02, n = 20 and 12 syndrome bits; rate 0.6 is well above h(0.02)."""
        code = LinearCode.random(20, 12, rng, min_distance=5)
        assert decoding_error_rate(code, bsc(0.02), 300, rng) < 0.05

    def test_universality(self, rng):
        code = LinearCode.random(20, 12, rng, min_distance=5)
        report = universal_correctness(code, bsc_grid(0.02, 0.01, 3), 100, rng, delta=0.1)
        assert len(report.error_rates) == 3
        assert report.passed
        assert report.worst <= 0.1

    def test_rejects_zero_trials(self, rng):
        with pytest.raises(DomainError):
            decoding_error_rate(LinearCode.empty(4), bsc(0.1), 0, rng)

    def test_sample_pairs(self, rng):
        x, y = sample_pairs(bsc(0.0), 50, rng)
        assert np.array_equal(x, y)

    def test_bsc_grid(self):
        grid = bsc_grid(0.02, 0.05, 4)
        assert len(grid) == 4
        assert grid[0][0, 1] == 0.0
        assert all(g.sum() == pytest.approx(1.0) for g in grid)


class TestTwoWayReconciliation:
    def test_noiseless(self, rng):
        chi = BlockFunctions.advantage_distillation()
        codes = (LinearCode.random(6, 6, rng), LinearCode.random(6, 6, rng), LinearCode.empty(6))
        x = rng.integers(0, 2, 12)
        outcome = two_way_ir(x, x, codes, chi)
        assert outcome.success
        assert not outcome.transcript[1].any()

    def test_depolarizing_blocks(self, rng):
        chi = BlockFunctions.advantage_distillation()
        joint = joint_distribution(choi_of("depolarizing", e=0.05), "z", "z")
        codes = (LinearCode.random(12, 11, rng, min_distance=8),
                 LinearCode.random(12, 9, rng, min_distance=4),
                 LinearCode.empty(12))
        successes = 0
        for _ in range(200):
            x, y = sample_pairs(joint, 24, rng)
            outcome = two_way_ir(x, y, codes, chi)
            successes += outcome.success
            w1_hat = outcome.transcript[1]
            assert not outcome.alice[1][w1_hat == 1].any()
        assert successes / 200 >= 0.9

    def test_length_checks(self, rng):
        chi = BlockFunctions.advantage_distillation()
        codes = (LinearCode.empty(3),) * 3
        with pytest.raises(DomainError):
            two_way_ir(np.zeros(5), np.zeros(5), codes, chi)
        with pytest.raises(DomainError):
            two_way_ir(np.zeros(8), np.zeros(8), codes, chi)


class TestSyndromeSizing:
    def test_side_information_helps(self, amplitude_damping):
        joint = joint_distribution(amplitude_damping, "z", "z")
        conditional, error = syndrome_cost_comparison(joint)
        assert conditional < error
        assert error == pytest.approx(h(0.1))

    def test_symmetric_channel_equal(self):
        conditional, error = syndrome_cost_comparison(bsc(0.1))
        assert conditional == pytest.approx(error)

    def test_syndrome_length(self):
        assert syndrome_length(20, 0.33) == 7
        assert syndrome_length(20, 1.5) == 20
        assert syndrome_length(20, -0.1) == 0
