"""Linear-code information reconciliation with exhaustive minimum-entropy decoding.

Bit vectors are ``numpy`` uint8 arrays. Decoding enumerates the whole
syndrome coset, so block lengths are kept at desk scale.
"""

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import BudgetExceededError, DomainError
from .quantum import entropy_bits

logger = logging.getLogger(__name__)

MAX_BLOCK = 24
MAX_COSET_BITS = 20
TIE_TOL = 1e-12
RANDOM_CODE_ATTEMPTS = 2000


def _bits(x, n: int | None = None) -> np.ndarray:
    v = np.asarray(x, dtype=np.uint8).ravel()
    if np.any(v > 1):
        raise DomainError("bit vectors may only contain 0 and 1")
    if n is not None and v.size != n:
        raise DomainError(f"expected {n} bits, got {v.size}")
    return v


def _rref(matrix: np.ndarray) -> tuple[np.ndarray, list[int]]:
    m = matrix.copy() % 2
    pivots = []
    row = 0
    for col in range(m.shape[1]):
        if row == m.shape[0]:
            break
        hits = np.nonzero(m[row:, col])[0]
        if hits.size == 0:
            continue
        pivot = row + hits[0]
        m[[row, pivot]] = m[[pivot, row]]
        others = np.nonzero(m[:, col])[0]
        others = others[others != row]
        m[others] ^= m[row]
        pivots.append(col)
        row += 1
    return m, pivots


def gf2_rank(matrix) -> int:
    m = np.asarray(matrix, dtype=np.uint8)
    if m.size == 0:
        return 0
    return len(_rref(m)[1])


@dataclass(frozen=True, eq=False)
class LinearCode:
    """Parity-check matrix M (k x n, full row rank over F2); the syndrome of x is Mx."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.uint8)
        if m.ndim != 2:
            raise DomainError(f"parity-check matrix must be 2-D, got shape {m.shape}")
        if np.any(m > 1):
            raise DomainError("parity-check matrix entries must be 0 or 1")
        if gf2_rank(m) != m.shape[0]:
            raise DomainError(f"parity-check matrix has rank {gf2_rank(m)}, expected {m.shape[0]}")
        object.__setattr__(self, "matrix", m)

    @property
    def n(self) -> int:
        return self.matrix.shape[1]

    @property
    def k(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def empty(cls, n: int) -> "LinearCode":
        """Zero-length syndrome: every word of length n is in the single coset."""
        return cls(np.zeros((0, n), dtype=np.uint8))

    @classmethod
    def random(cls, n: int, k: int, rng: np.random.Generator, min_distance: int = 1) -> "LinearCode":
        if not 0 <= k <= n:
            raise DomainError(f"need 0 <= k <= n, got n={n}, k={k}")
        for _ in range(RANDOM_CODE_ATTEMPTS):
            m = rng.integers(0, 2, size=(k, n), dtype=np.uint8)
            if gf2_rank(m) != k:
                continue
            code = cls(m)
            if min_distance <= 1 or code.min_distance() >= min_distance:
                return code
        raise DomainError(f"no random [{n}, {k}] parity check with distance {min_distance} found")

    @classmethod
    def from_text(cls, text: str) -> "LinearCode":
        """Parse ``n k`` followed by k rows of n characters in {0, 1}."""
        lines = [line.strip() for line in text.splitlines() if line.strip()]
        try:
            n, k = (int(v) for v in lines[0].split())
        except (IndexError, ValueError):
            raise DomainError("parity-check text must start with a line 'n k'") from None
        rows = lines[1:]
        if len(rows) != k or any(len(r) != n or set(r) - {"0", "1"} for r in rows):
            raise DomainError(f"expected {k} rows of {n} binary characters")
        if k == 0:
            return cls.empty(n)
        return cls(np.array([[int(c) for c in r] for r in rows], dtype=np.uint8))

    @classmethod
    def load(cls, path: str) -> "LinearCode":
        try:
            with open(path) as f:
                return cls.from_text(f.read())
        except OSError as exc:
            raise DomainError(f"cannot read parity-check file {path}: {exc}") from exc

    def to_text(self) -> str:
        rows = ["".join(str(int(b)) for b in row) for row in self.matrix]
        return "\n".join([f"{self.n} {self.k}", *rows]) + "\n"

    def syndrome(self, x) -> np.ndarray:
        return (self.matrix.astype(np.int64) @ _bits(x, self.n)) % 2

    @cached_property
    def kernel_basis(self) -> np.ndarray:
        """Rows span {x : Mx = 0}."""
        if self.k == 0:
            return np.eye(self.n, dtype=np.uint8)
        reduced, pivots = _rref(self.matrix)
        free = [c for c in range(self.n) if c not in pivots]
        basis = np.zeros((len(free), self.n), dtype=np.uint8)
        for i, f in enumerate(free):
            basis[i, f] = 1
            for row, p in enumerate(pivots):
                basis[i, p] = reduced[row, f]
        return basis

    def particular_solution(self, t) -> np.ndarray:
        t = _bits(t, self.k)
        x = np.zeros(self.n, dtype=np.uint8)
        if self.k == 0:
            return x
        augmented = np.hstack([self.matrix, t[:, None]])
        reduced, pivots = _rref(augmented)
        for row, p in enumerate(pivots):
            x[p] = reduced[row, -1]
        return x

    def check_budget(self) -> None:
        if self.n > MAX_BLOCK or self.n - self.k > MAX_COSET_BITS:
            raise BudgetExceededError(
                f"coset enumeration for n={self.n}, k={self.k} exceeds the budget "
                f"(n <= {MAX_BLOCK}, n - k <= {MAX_COSET_BITS})")

    def min_distance(self) -> int:
        """Smallest weight of a nonzero word with zero syndrome (n + 1 if there is none)."""
        words = coset_members(self, np.zeros(self.k, dtype=np.uint8))
        weights = words.sum(axis=1)
        nonzero = weights[weights > 0]
        return int(nonzero.min()) if nonzero.size else self.n + 1


def syndrome(code: LinearCode, x) -> np.ndarray:
    return code.syndrome(x)


def coset_members(code: LinearCode, t) -> np.ndarray:
    """All x with Mx = t, one per row, in no particular order."""
    code.check_budget()
    basis = code.kernel_basis
    d = basis.shape[0]
    combos = ((np.arange(2**d)[:, None] >> np.arange(d)[::-1]) & 1).astype(np.int64)
    span = (combos @ basis) % 2
    return (span ^ code.particular_solution(t)).astype(np.uint8)


def joint_type_entropy(candidates: np.ndarray, side: np.ndarray, side_size: int) -> np.ndarray:
    """H of the empirical joint type of (candidate, side) for every candidate row."""
    n = side.size
    onehot = np.zeros((n, side_size))
    onehot[np.arange(n), side] = 1
    ones = candidates.astype(float) @ onehot
    zeros = onehot.sum(axis=0)[None, :] - ones
    counts = np.concatenate([ones, zeros], axis=1) / n
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(counts > 0, -counts * np.log2(counts), 0.0)
    return terms.sum(axis=1)


def min_entropy_decode(code: LinearCode, t, side: Sequence[int]) -> np.ndarray:
    """Coset member whose joint type with ``side`` has least entropy; ties go to the lexicographically smallest."""
    side = np.asarray(side, dtype=np.int64).ravel()
    if side.size != code.n:
        raise DomainError(f"side information has {side.size} symbols, expected {code.n}")
    if side.size and side.min() < 0:
        raise DomainError("side-information symbols must be non-negative")
    candidates = coset_members(code, t)
    entropies = joint_type_entropy(candidates, side, int(side.max()) + 1 if side.size else 1)
    tied = np.nonzero(entropies <= entropies.min() + TIE_TOL)[0]
    if tied.size == 1:
        return candidates[tied[0]]
    tied_rows = candidates[tied]
    order = np.lexsort(tied_rows.T[::-1])
    return tied_rows[order[0]]


@dataclass(frozen=True)
class OneWayOutcome:
    estimate: np.ndarray
    syndrome: np.ndarray

    def matches(self, x) -> bool:
        return bool(np.array_equal(self.estimate, _bits(x)))


def one_way_ir(x, y, code: LinearCode) -> OneWayOutcome:
    """Alice sends Mx; Bob decodes with his string as side information."""
    x = _bits(x, code.n)
    y = _bits(y, code.n)
    t = code.syndrome(x)
    return OneWayOutcome(estimate=min_entropy_decode(code, t, y), syndrome=t)


@dataclass(frozen=True)
class TwoWayOutcome:
    alice: tuple[np.ndarray, np.ndarray, np.ndarray]
    bob: tuple[np.ndarray, np.ndarray, np.ndarray]
    truth: tuple[np.ndarray, np.ndarray, np.ndarray]
    transcript: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]

    @property
    def success(self) -> bool:
        return all(np.array_equal(a, t) and np.array_equal(b, t)
                   for a, b, t in zip(self.alice, self.bob, self.truth))


def _zeroed(bits: np.ndarray, table: Sequence[int], first: np.ndarray, second: np.ndarray) -> np.ndarray:
    discard = np.asarray(table, dtype=np.uint8)[2 * first.astype(np.int64) + second]
    return bits * (1 - discard)


def two_way_ir(x, y, codes: tuple[LinearCode, LinearCode, LinearCode], functions) -> TwoWayOutcome:
    """Six-step reconciliation of (U1, U2, V2) over blocks of two bits.

    ``x`` and ``y`` hold 2n bits; block i is (x[2i], x[2i+1]).
    """
    m1, ma2, mb2 = codes
    x = _bits(x)
    y = _bits(y)
    if x.size != y.size or x.size % 2:
        raise DomainError("two-way reconciliation needs equal, even-length strings")
    n = x.size // 2
    if any(c.n != n for c in codes):
        raise DomainError(f"every code must have block length {n}")
    x1, x2, y1, y2 = x[0::2], x[1::2], y[0::2], y[1::2]
    u1, v1 = x1 ^ x2, y1 ^ y2
    u2 = _zeroed(x2, functions.chi_a, u1, v1)
    v2 = _zeroed(y2, functions.chi_b, u1, v1)

    t1 = m1.syndrome(u1)
    u1_hat = min_entropy_decode(m1, t1, 2 * y1.astype(np.int64) + y2)
    w1_hat = u1_hat ^ v1
    u2_alice = _zeroed(x2, functions.chi_a, u1, u1 ^ w1_hat)
    v2_bob = _zeroed(y2, functions.chi_b, u1_hat, v1)
    ta2 = ma2.syndrome(u2_alice)
    tb2 = mb2.syndrome(v2_bob)
    w = 4 * w1_hat.astype(np.int64)
    u2_bob = min_entropy_decode(ma2, ta2, w + 2 * y1 + y2)
    v2_alice = min_entropy_decode(mb2, tb2, w + 2 * x1 + x2)

    return TwoWayOutcome(
        alice=(u1, u2_alice, v2_alice),
        bob=(u1_hat, u2_bob, v2_bob),
        truth=(u1, u2, v2),
        transcript=(t1, w1_hat, ta2, tb2),
    )


def sample_pairs(joint, length: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """``length`` i.i.d. (x, y) pairs from a 2x2 joint distribution."""
    p = np.asarray(joint, dtype=float).ravel()
    idx = rng.choice(4, size=length, p=p / p.sum())
    return (idx // 2).astype(np.uint8), (idx % 2).astype(np.uint8)


def decoding_error_rate(code: LinearCode, joint, trials: int, rng: np.random.Generator) -> float:
    if trials < 1:
        raise DomainError(f"trials must be positive, got {trials}")
    failures = 0
    for _ in range(trials):
        x, y = sample_pairs(joint, code.n, rng)
        if not one_way_ir(x, y, code).matches(x):
            failures += 1
    logger.debug("decoding error %d/%d for [%d, %d]", failures, trials, code.n, code.k)
    return failures / trials


@dataclass(frozen=True)
class UniversalityReport:
    error_rates: tuple[float, ...]
    delta: float

    @property
    def worst(self) -> float:
        return max(self.error_rates)

    @property
    def passed(self) -> bool:
        return self.worst <= self.delta


def universal_correctness(code: LinearCode, joints, trials: int, rng: np.random.Generator,
                          delta: float) -> UniversalityReport:
    """Decoding error of one fixed code across a grid of source distributions."""
    rates = tuple(decoding_error_rate(code, joint, trials, rng) for joint in joints)
    return UniversalityReport(error_rates=rates, delta=delta)


def bsc_grid(flip: float, radius: float, points: int) -> list[np.ndarray]:
    """Symmetric-channel joints with crossover probabilities in [flip - radius, flip + radius]."""
    flips = np.linspace(max(flip - radius, 0.0), min(flip + radius, 0.5), points)
    return [np.array([[1 - q, q], [q, 1 - q]]) / 2 for q in flips]


def syndrome_cost_comparison(joint) -> tuple[float, float]:
    """(H(X|Y), H(X xor Y)): syndrome length with and without Bob's marginal."""
    p = np.asarray(joint, dtype=float)
    conditional = entropy_bits(p) - entropy_bits(p.sum(axis=0))
    error = p[0, 1] + p[1, 0]
    return conditional, entropy_bits([error, 1 - error])


def syndrome_length(n: int, rate: float) -> int:
    return min(n, max(0, math.ceil(n * rate)))
