"""Dense linear algebra and entropy functionals on small Hilbert spaces.

Every logarithm is base 2, so entropies are in bits. Operators are plain
``numpy`` arrays; the only structured value is :class:`CcqState`, a state that
is classical on a set of named registers and quantum on Eve's system.
"""

import enum
import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy import linalg

from .errors import DomainError, UnknownRegisterError

logger = logging.getLogger(__name__)

HERMITIAN_TOL = 1e-12
PSD_TOL = 1e-10
TRACE_TOL = 1e-10
RANK_TOL = 1e-12
NORM_TOL = 1e-10
SUPPORT_TOL = 1e-10


class Undefined(enum.Enum):
    """Result marker for a min-entropy whose support condition fails."""

    UNDEFINED = "undefined"

    def __repr__(self) -> str:
        return "UNDEFINED"


UNDEFINED = Undefined.UNDEFINED


# --- validation ---

def check_distribution(probs, tol: float = NORM_TOL) -> np.ndarray:
    p = np.asarray(probs, dtype=float)
    if p.size == 0 or np.any(~np.isfinite(p)):
        raise DomainError("distribution must be a non-empty list of finite numbers")
    if np.any(p < -tol):
        raise DomainError(f"distribution has a negative entry ({p.min():.3g})")
    if abs(p.sum() - 1.0) > tol:
        raise DomainError(f"distribution sums to {p.sum():.12g}, not 1")
    return p


def check_hermitian(op, tol: float = HERMITIAN_TOL) -> np.ndarray:
    m = np.asarray(op, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DomainError(f"operator must be square, got shape {m.shape}")
    if m.size and np.max(np.abs(m - m.conj().T)) > tol:
        raise DomainError("operator is not Hermitian")
    return m


def check_density_operator(rho, tol: float = PSD_TOL) -> np.ndarray:
    m = check_hermitian(rho)
    evals = linalg.eigvalsh(m)
    if evals.min() < -tol:
        raise DomainError(f"operator is not positive semidefinite (min eigenvalue {evals.min():.3g})")
    if abs(np.trace(m).real - 1.0) > TRACE_TOL:
        raise DomainError(f"density operator has trace {np.trace(m).real:.12g}")
    return m


# --- entropies ---

def entropy_bits(values) -> float:
    v = np.asarray(values, dtype=float).ravel()
    v = v[v > 0]
    return float(-np.sum(v * np.log2(v)))


def binary_entropy(p: float) -> float:
    """h(p) = -p log p - (1-p) log(1-p), with 0 log 0 = 0.

    Examples:
        binary_entropy(0.5) -> 1.0
        binary_entropy(0.25) -> 0.811278...
    """
    if not -1e-12 <= p <= 1 + 1e-12:
        raise DomainError(f"binary entropy argument must lie in [0, 1], got {p}")
    p = min(max(float(p), 0.0), 1.0)
    if p == 0.0 or p == 1.0:
        return 0.0
    return -p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p)


def shannon_entropy(probs) -> float:
    return entropy_bits(check_distribution(probs))


def von_neumann_entropy(rho, validate: bool = True) -> float:
    """-sum(l log l) over the eigenvalues of ``rho``; tiny negative eigenvalues count as 0."""
    m = check_density_operator(rho) if validate else np.asarray(rho, dtype=complex)
    evals = linalg.eigvalsh(m)
    return entropy_bits(np.where(evals < 0, 0.0, evals))


def partial_trace(rho, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Reduce ``rho`` on the tensor product ``dims`` to the subsystems in ``keep``."""
    dims = [int(d) for d in dims]
    m = np.asarray(rho)
    total = math.prod(dims)
    if m.shape != (total, total):
        raise DomainError(f"operator shape {m.shape} does not match subsystem dims {dims}")
    keep = sorted(set(int(k) for k in keep))
    if any(k < 0 or k >= len(dims) for k in keep):
        raise DomainError(f"keep indices {keep} out of range for {len(dims)} subsystems")

    n = len(dims)
    rows = list(range(n))
    cols = list(range(n, 2 * n))
    for i in range(n):
        if i not in keep:
            cols[i] = rows[i]
    out = [rows[i] for i in keep] + [cols[i] for i in keep]
    reduced = np.einsum(m.reshape(dims + dims), rows + cols, out)
    d = math.prod(dims[i] for i in keep)
    return reduced.reshape(d, d)


@dataclass(frozen=True, eq=False)
class PureState:
    """A vector on system ⊗ environment, row-major over (system, environment)."""

    amplitudes: np.ndarray
    dims: tuple[int, int]

    def __post_init__(self):
        norm = float(np.vdot(self.amplitudes, self.amplitudes).real)
        if abs(norm - 1.0) > NORM_TOL:
            raise DomainError(f"pure state has squared norm {norm:.12g}")

    def projector(self) -> np.ndarray:
        return np.outer(self.amplitudes, self.amplitudes.conj())

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape(self.dims)


def purify(rho) -> PureState:
    """Purification with environment dimension equal to the rank of ``rho``."""
    m = check_density_operator(rho)
    evals, vecs = linalg.eigh(m)
    mask = evals > RANK_TOL
    weights = np.sqrt(evals[mask])
    amplitudes = (vecs[:, mask] * weights).ravel()
    amplitudes = amplitudes / np.linalg.norm(amplitudes)
    return PureState(amplitudes=amplitudes, dims=(m.shape[0], int(mask.sum())))


# --- classical-quantum states ---

@dataclass(frozen=True, eq=False)
class CcqState:
    """State classical on named registers with a conditional Eve operator per outcome.

    ``joint`` has one axis per register; ``conditionals`` adds two trailing
    axes for Eve's operator. Zero-probability outcomes carry the maximally
    mixed operator.
    """

    registers: tuple[tuple[str, int], ...]
    joint: np.ndarray
    conditionals: np.ndarray

    @classmethod
    def from_weighted(cls, registers, weighted) -> "CcqState":
        """Build from unnormalised blocks ``P(c) * rho^c``."""
        registers = tuple((str(name), int(size)) for name, size in registers)
        w = np.asarray(weighted, dtype=complex)
        sizes = tuple(size for _, size in registers)
        if w.ndim != len(sizes) + 2 or w.shape[:-2] != sizes or w.shape[-1] != w.shape[-2]:
            raise DomainError(f"weighted blocks of shape {w.shape} do not match registers {registers}")
        d = w.shape[-1]
        joint = np.trace(w, axis1=-2, axis2=-1).real
        joint = np.where(joint < 0, 0.0, joint)
        safe = np.where(joint > 0, joint, 1.0)[..., None, None]
        mixed = np.eye(d, dtype=complex) / d
        conditionals = np.where((joint > 0)[..., None, None], w / safe, mixed)
        return cls(registers=registers, joint=joint, conditionals=conditionals)

    @property
    def names(self) -> list[str]:
        return [name for name, _ in self.registers]

    @property
    def eve_dim(self) -> int:
        return self.conditionals.shape[-1]

    @cached_property
    def weighted(self) -> np.ndarray:
        return self.joint[..., None, None] * self.conditionals

    def validate(self, tol: float = PSD_TOL) -> None:
        check_distribution(self.joint.ravel())
        blocks = self.conditionals.reshape(-1, self.eve_dim, self.eve_dim)
        mask = self.joint.ravel() > 0
        for block in blocks[mask]:
            check_density_operator(block, tol)

    def axes(self, names: Sequence[str]) -> list[int]:
        index = {name: i for i, name in enumerate(self.names)}
        try:
            return [index[name] for name in names]
        except KeyError as exc:
            raise UnknownRegisterError(f"unknown register {exc.args[0]!r}; have {self.names}") from None

    def marginal(self, names: Sequence[str]) -> "CcqState":
        keep = self.axes(names)
        drop = tuple(i for i in range(len(self.registers)) if i not in keep)
        blocks = self.weighted.sum(axis=drop) if drop else self.weighted
        order = sorted(keep)
        registers = tuple(self.registers[i] for i in order)
        return CcqState.from_weighted(registers, blocks)

    def total_operator(self) -> np.ndarray:
        """sum_c P(c) |c><c| ⊗ rho^c as a dense matrix."""
        blocks = self.weighted.reshape(-1, self.eve_dim, self.eve_dim)
        return linalg.block_diag(*blocks)

    def block_entropy(self, names: Sequence[str], with_eve: bool = True) -> float:
        keep = self.axes(names)
        drop = tuple(i for i in range(len(self.registers)) if i not in keep)
        if not with_eve:
            probs = self.joint.sum(axis=drop) if drop else self.joint
            return entropy_bits(probs)
        blocks = self.weighted.sum(axis=drop) if drop else self.weighted
        blocks = blocks.reshape(-1, self.eve_dim, self.eve_dim)
        return entropy_bits(np.linalg.eigvalsh(blocks))


def conditional_entropy(state: CcqState, target: Sequence[str], given: Sequence[str] = (),
                        with_eve: bool = True) -> float:
    """H(target | given, E), or H(target | given) when ``with_eve`` is False."""
    target = list(target)
    given = list(given)
    union = list(dict.fromkeys(given + target))
    return state.block_entropy(union, with_eve) - state.block_entropy(given, with_eve)


# --- one-shot entropies ---

def _min_entropy_lambda(rho_ab, sigma_b, dims) -> float | None:
    d_a, d_b = (int(d) for d in dims)
    rho = np.asarray(rho_ab, dtype=complex)
    sigma = np.asarray(sigma_b, dtype=complex)
    if rho.shape != (d_a * d_b, d_a * d_b) or sigma.shape != (d_b, d_b):
        raise DomainError(f"shapes {rho.shape} and {sigma.shape} do not match dims {(d_a, d_b)}")
    reference = np.kron(np.eye(d_a), sigma)
    evals, vecs = linalg.eigh(reference)
    support = evals > RANK_TOL
    basis = vecs[:, support]
    outside = np.eye(d_a * d_b) - basis @ basis.conj().T
    if np.linalg.norm(outside @ rho @ outside) > SUPPORT_TOL or not support.any():
        return None
    scale = 1.0 / np.sqrt(evals[support])
    restricted = basis.conj().T @ rho @ basis
    whitened = scale[:, None] * restricted * scale[None, :]
    lam = float(linalg.eigvalsh(whitened).max())
    return lam if lam > 0 else None


def min_entropy(rho_ab, sigma_b, dims) -> float | Undefined:
    """-log of the least l with l * (id ⊗ sigma_b) - rho_ab >= 0.

    Computed as the largest generalized eigenvalue on the support of
    id ⊗ sigma_b; returns UNDEFINED when rho_ab leaves that support.
    """
    lam = _min_entropy_lambda(rho_ab, sigma_b, dims)
    if lam is None:
        return UNDEFINED
    return -math.log2(lam)


def classical_min_entropy(joint_xe) -> float:
    """H_min(X|E) = -log sum_e max_x P(x, e) for classical E (axis 0 is X)."""
    p = np.asarray(joint_xe, dtype=float)
    return -math.log2(float(p.max(axis=0).sum()))


def max_entropy_rank(rho) -> float:
    evals = linalg.eigvalsh(check_density_operator(rho))
    return math.log2(int(np.sum(evals > RANK_TOL)))


def product_bound_delta(hmax_x: float, n: int, eps: float) -> float:
    if n < 1:
        raise DomainError(f"block length must be positive, got {n}")
    if not 0 < eps < 1:
        raise DomainError(f"smoothing parameter must lie in (0, 1), got {eps}")
    return (2 * hmax_x + 3) * math.sqrt(math.log2(2 / eps) / n)


def smooth_min_entropy_product_bound(hxb: float, hb: float, hmax_x: float, n: int, eps: float) -> float:
    """Per-symbol lower bound on the smooth min-entropy of an n-fold product state."""
    return (hxb - hb) - product_bound_delta(hmax_x, n, eps)


def trace_distance(rho, sigma) -> float:
    """Tr|rho - sigma| (no factor 1/2)."""
    a = np.asarray(rho, dtype=complex)
    b = np.asarray(sigma, dtype=complex)
    if a.shape != b.shape:
        raise DomainError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(np.abs(linalg.eigvalsh(a - b)).sum())
