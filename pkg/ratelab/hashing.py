"""Toeplitz-hash privacy amplification and exact secrecy audits on small states."""

import logging
import math
from dataclasses import dataclass
from functools import reduce

import numpy as np
from scipy import linalg

from .channels import ChoiOperator
from .errors import BudgetExceededError, DomainError
from .oneway import key_blocks
from .quantum import UNDEFINED, CcqState, classical_min_entropy, min_entropy

logger = logging.getLogger(__name__)

MAX_EXHAUSTIVE_SEEDS = 1 << 20
SUBSAMPLE_SEEDS = 4096
MAX_QUANTUM_BITS = 5
MAX_QUANTUM_DIM = 1024
MAX_CLASSICAL_BITS = 16
CLASSICAL_TOL = 1e-14


@dataclass(frozen=True, eq=False)
class ToeplitzHash:
    """ell x n Toeplitz matrix T[i, j] = seed[i - j + n - 1] over F2."""

    n: int
    ell: int
    seed: np.ndarray

    def __post_init__(self):
        if self.n < 1 or not 0 <= self.ell <= self.n:
            raise DomainError(f"need 0 <= ell <= n and n >= 1, got n={self.n}, ell={self.ell}")
        seed = np.asarray(self.seed, dtype=np.uint8).ravel()
        if seed.size != self.seed_length(self.n, self.ell):
            raise DomainError(f"seed must have {self.seed_length(self.n, self.ell)} bits, got {seed.size}")
        object.__setattr__(self, "seed", seed)

    @staticmethod
    def seed_length(n: int, ell: int) -> int:
        return n + ell - 1 if ell else 0

    @classmethod
    def from_index(cls, n: int, ell: int, index: int) -> "ToeplitzHash":
        """The index-th member of the family, seed bits big-endian."""
        length = cls.seed_length(n, ell)
        bits = [(index >> (length - 1 - i)) & 1 for i in range(length)]
        return cls(n, ell, np.array(bits, dtype=np.uint8))

    @classmethod
    def random(cls, n: int, ell: int, rng: np.random.Generator) -> "ToeplitzHash":
        return cls(n, ell, rng.integers(0, 2, size=cls.seed_length(n, ell)))

    def matrix(self) -> np.ndarray:
        if self.ell == 0:
            return np.zeros((0, self.n), dtype=np.uint8)
        i = np.arange(self.ell)[:, None]
        j = np.arange(self.n)[None, :]
        return self.seed[i - j + self.n - 1]


def family_size(n: int, ell: int) -> int:
    return 2 ** ToeplitzHash.seed_length(n, ell)


def toeplitz_apply(h: ToeplitzHash, x) -> np.ndarray:
    v = np.asarray(x, dtype=np.int64).ravel()
    if v.size != h.n:
        raise DomainError(f"hash input must have {h.n} bits, got {v.size}")
    return ((h.matrix().astype(np.int64) @ v) % 2).astype(np.uint8)


def collision_probability(n: int, ell: int, x, x_prime) -> float:
    """Fraction of the whole family with h(x) = h(x'), by enumeration."""
    size = family_size(n, ell)
    if size > MAX_EXHAUSTIVE_SEEDS:
        raise BudgetExceededError(f"family of {size} seeds is too large to enumerate")
    diff = np.asarray(x, dtype=np.int64) ^ np.asarray(x_prime, dtype=np.int64)
    hits = sum(not toeplitz_apply(ToeplitzHash.from_index(n, ell, s), diff).any() for s in range(size))
    return hits / size


# --- test states ---

def iid_classical_joint(single, n: int) -> np.ndarray:
    """P(x, e) of n independent copies of a single-symbol joint, x and e as big-endian integers."""
    p = np.asarray(single, dtype=float)
    joint = reduce(np.kron, [p] * n)
    return joint


def iid_key_state(choi: ChoiOperator, n: int, direction: str = "direct", key_basis: str = "z") -> CcqState:
    """n independent key bits with Eve holding every purifying system."""
    single = key_blocks(choi, direction, key_basis)
    r = single.shape[-1]
    if 2**n * r**n > MAX_QUANTUM_DIM or n > MAX_QUANTUM_BITS:
        raise BudgetExceededError(
            f"{n} key bits with Eve dimension {r}**{n} exceed the quantum audit budget")
    blocks = np.empty((2**n, r**n, r**n), dtype=complex)
    for x in range(2**n):
        bits = [(x >> (n - 1 - i)) & 1 for i in range(n)]
        blocks[x] = reduce(np.kron, [single[b] for b in bits])
    return CcqState.from_weighted([("X", 2**n)], blocks)


# --- audit ---

@dataclass(frozen=True)
class AuditResult:
    distance: float
    bound: float
    min_entropy: float
    seeds: int
    exhaustive: bool

    @property
    def holds(self) -> bool:
        return self.distance <= self.bound + 1e-9

    def to_dict(self) -> dict:
        return {
            "distance": self.distance,
            "bound": self.bound,
            "minEntropy": self.min_entropy,
            "seeds": self.seeds,
            "exhaustive": self.exhaustive,
            "holds": self.holds,
        }


def _input_bits(size: int) -> int:
    n = int(round(math.log2(size))) if size > 0 else 0
    if n < 1 or 2**n != size:
        raise DomainError(f"register size {size} is not a positive power of two")
    return n


def _seed_indices(n: int, ell: int, max_exhaustive: int, subsample: int) -> tuple[np.ndarray, bool]:
    size = family_size(n, ell)
    if size <= max_exhaustive:
        return np.arange(size), True
    stride = size // subsample
    logger.warning("audit visits %d of %d hash seeds (stride %d)", subsample, size, stride)
    return np.arange(subsample) * stride, False


def _hashed_keys(n: int, ell: int, index: int) -> np.ndarray:
    """Key value (as an integer) of every input x under the index-th hash."""
    if ell == 0:
        return np.zeros(2**n, dtype=np.int64)
    xs = (np.arange(2**n)[:, None] >> np.arange(n)[::-1]) & 1
    bits = (xs @ ToeplitzHash.from_index(n, ell, index).matrix().astype(np.int64).T) % 2
    return bits @ (2 ** np.arange(ell)[::-1])


def classical_secrecy_audit(joint_xe, ell: int, max_exhaustive: int = MAX_EXHAUSTIVE_SEEDS,
                            subsample: int = SUBSAMPLE_SEEDS) -> AuditResult:
    """Audit against classical side information given as P(x, e) (axis 0 is X)."""
    p = np.asarray(joint_xe, dtype=float)
    n = _input_bits(p.shape[0])
    if n > MAX_CLASSICAL_BITS:
        raise BudgetExceededError(f"classical audit supports at most {MAX_CLASSICAL_BITS} input bits")
    if not 0 <= ell <= n:
        raise DomainError(f"output length must lie in [0, {n}], got {ell}")
    h_min = classical_min_entropy(p)
    target = p.sum(axis=0) / 2**ell
    indices, exhaustive = _seed_indices(n, ell, max_exhaustive, subsample)
    total = 0.0
    for index in indices:
        grouped = np.zeros((2**ell, p.shape[1]))
        np.add.at(grouped, _hashed_keys(n, ell, int(index)), p)
        total += float(np.abs(grouped - target).sum())
    return _finish(n, ell, total / len(indices), h_min, len(indices), exhaustive)


def secrecy_audit(state: CcqState, ell: int, max_exhaustive: int = MAX_EXHAUSTIVE_SEEDS,
                  subsample: int = SUBSAMPLE_SEEDS) -> AuditResult:
    """Distance of the hashed key from uniform, averaged over the Toeplitz family.

    The distance is (1/|F|) sum_f sum_k || sum_{x: f(x)=k} P(x) rho_E^x - rho_E / 2^ell ||_1
    and the bound is 2^(-(H_min(X|E) - ell)/2). Families larger than
    ``max_exhaustive`` are visited with a fixed stride. States whose Eve
    operators are all diagonal take the classical path.
    """
    if len(state.registers) != 1:
        raise DomainError("secrecy audit needs a state with a single classical register")
    blocks = state.weighted
    diag = np.einsum("xii->xi", blocks).real
    off = blocks - diag[..., None] * np.eye(state.eve_dim)
    if np.max(np.abs(off)) < CLASSICAL_TOL:
        return classical_secrecy_audit(diag, ell, max_exhaustive, subsample)

    n = _input_bits(state.registers[0][1])
    if n > MAX_QUANTUM_BITS or 2**n * state.eve_dim > MAX_QUANTUM_DIM:
        raise BudgetExceededError(
            f"quantum audit supports at most {MAX_QUANTUM_BITS} input bits and dimension {MAX_QUANTUM_DIM}")
    if not 0 <= ell <= n:
        raise DomainError(f"output length must lie in [0, {n}], got {ell}")
    rho_e = blocks.sum(axis=0)
    h_min = min_entropy(state.total_operator(), rho_e, (2**n, state.eve_dim))
    if h_min is UNDEFINED:
        raise DomainError("H_min(X|E) is undefined: the state leaves the support of id ⊗ rho_E")
    target = rho_e / 2**ell
    indices, exhaustive = _seed_indices(n, ell, max_exhaustive, subsample)
    total = 0.0
    for index in indices:
        grouped = np.zeros((2**ell, state.eve_dim, state.eve_dim), dtype=complex)
        np.add.at(grouped, _hashed_keys(n, ell, int(index)), blocks)
        total += float(sum(np.abs(linalg.eigvalsh(g - target)).sum() for g in grouped))
    return _finish(n, ell, total / len(indices), h_min, len(indices), exhaustive)


def _finish(n: int, ell: int, distance: float, h_min: float, seeds: int, exhaustive: bool) -> AuditResult:
    bound = 2 ** (-(h_min - ell) / 2)
    logger.info("audit n=%d ell=%d: distance %.3g, bound %.3g over %d seeds", n, ell, distance, bound, seeds)
    return AuditResult(distance=distance, bound=bound, min_entropy=h_min, seeds=seeds, exhaustive=exhaustive)
