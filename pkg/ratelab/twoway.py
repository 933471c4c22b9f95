"""Two-way postprocessing rates on blocks of two channel uses.

Alice and Bob first exchange the parities U1 = X1 + X2 and V1 = Y1 + Y2
(publicly revealing W1 = U1 + V1), then each keeps or zeroes the second bit
according to block functions chi_A(U1, V1) and chi_B(U1, V1).
"""

import logging
import math
from dataclasses import dataclass
from itertools import product
from typing import Callable, Iterator

import numpy as np

from .channels import (
    BASIS_VECTORS,
    BellDistribution,
    ChoiOperator,
    ParameterSlice,
    as_choi,
    bell_completion_interval,
    bell_distribution_of,
    candidate_set_bounds,
    is_bell_diagonal,
    omega_completion,
    stokes_to_choi,
)
from .errors import BudgetExceededError, DomainError
from .oneway import COLLAPSED_WIDTH, PRESCAN_POINTS, XATOL, RateResult, minimize_on_interval
from .quantum import CcqState, binary_entropy, conditional_entropy, entropy_bits, purify
from .workers import map_in_order

logger = logging.getLogger(__name__)

TABLES = tuple(product((0, 1), repeat=4))
EVE_REGISTERS = (("U1", 2), ("U2", 2), ("V2", 2), ("W1", 2))
CLASSICAL_REGISTERS = tuple((name, 2) for name in ("X1", "X2", "Y1", "Y2", "U1", "U2", "V1", "V2", "W1"))
MAX_COSET_LENGTH = 4


@dataclass(frozen=True)
class BlockFunctions:
    """Truth tables of chi_A and chi_B indexed by 2*u1 + v1.

    A value of 1 zeroes the party's second bit.
    """

    chi_a: tuple[int, int, int, int]
    chi_b: tuple[int, int, int, int]

    def __post_init__(self):
        for name in ("chi_a", "chi_b"):
            table = tuple(int(v) for v in getattr(self, name))
            if len(table) != 4 or any(v not in (0, 1) for v in table):
                raise DomainError(f"{name} must be four bits, got {getattr(self, name)!r}")
            object.__setattr__(self, name, table)

    def alice(self, u1: int, v1: int) -> int:
        return self.chi_a[2 * u1 + v1]

    def bob(self, u1: int, v1: int) -> int:
        return self.chi_b[2 * u1 + v1]

    @property
    def label(self) -> str:
        return "".join(map(str, self.chi_a)) + "/" + "".join(map(str, self.chi_b))

    @classmethod
    def parse(cls, text: str) -> "BlockFunctions":
        try:
            a, b = text.split("/")
            return cls(tuple(int(c) for c in a), tuple(int(c) for c in b))
        except ValueError:
            raise DomainError(f"block functions must look like 0110/1111, got {text!r}") from None

    @classmethod
    def advantage_distillation(cls) -> "BlockFunctions":
        """Alice keeps her second bit only when the parities agree; Bob never keeps his."""
        return cls((0, 1, 1, 0), (1, 1, 1, 1))

    @classmethod
    def amplitude_damping_optimal(cls) -> "BlockFunctions":
        return cls((1, 1, 1, 1), (0, 1, 1, 0))

    @classmethod
    def all_pairs(cls) -> Iterator["BlockFunctions"]:
        """All 256 pairs in lexicographic (chi_a, chi_b) order."""
        for a, b in product(TABLES, TABLES):
            yield cls(a, b)


def zeta(bit: int, discard: int) -> int:
    return 0 if discard else bit


@dataclass(frozen=True, eq=False)
class TwoWayState:
    """Registers after the parity exchange for two uses of the channel.

    ``eve`` holds (U1, U2, V2, W1) with Eve's two-copy system; ``classical``
    holds every bit of both parties without Eve.
    """

    eve: CcqState
    classical: CcqState
    functions: BlockFunctions

    def eve_entropy(self, target, given=()) -> float:
        return conditional_entropy(self.eve, target, given)

    def cost(self, target, given=()) -> float:
        return conditional_entropy(self.classical, target, given, with_eve=False)


def derive_two_way_state(choi: ChoiOperator, functions: BlockFunctions, key_basis: str = "z") -> TwoWayState:
    state = purify(choi.op)
    r = state.dims[1]
    amp = state.amplitudes.reshape(2, 2, r)
    alice = BASIS_VECTORS[key_basis]
    bob = BASIS_VECTORS[key_basis].conj()
    phi = np.einsum("xa,yb,abe->xye", alice, bob, amp)
    single = np.einsum("xye,xyf->xyef", phi, phi.conj())

    eve_blocks = np.zeros((2, 2, 2, 2, r * r, r * r), dtype=complex)
    classical = np.zeros((2,) * 9)
    for x1, x2, y1, y2 in product((0, 1), repeat=4):
        block = np.kron(single[x1, y1], single[x2, y2])
        u1, v1 = x1 ^ x2, y1 ^ y2
        w1 = u1 ^ v1
        u2 = zeta(x2, functions.alice(u1, v1))
        v2 = zeta(y2, functions.bob(u1, v1))
        eve_blocks[u1, u2, v2, w1] += block
        classical[x1, x2, y1, y2, u1, u2, v1, v2, w1] += np.trace(block).real

    return TwoWayState(
        eve=CcqState.from_weighted(EVE_REGISTERS, eve_blocks),
        classical=CcqState.from_weighted(CLASSICAL_REGISTERS, classical[..., None, None]),
        functions=functions,
    )


def syndrome_costs(state: TwoWayState, direction: str = "direct") -> tuple[float, float, float]:
    """Per-block rates of the three syndromes: the first parity, then U2 and V2."""
    if direction == "direct":
        first = state.cost(["U1"], ["Y1", "Y2"])
    else:
        first = state.cost(["V1"], ["X1", "X2"])
    return first, state.cost(["U2"], ["W1", "Y1", "Y2"]), state.cost(["V2"], ["W1", "X1", "X2"])


def two_way_terms(state: TwoWayState, direction: str = "direct") -> dict[str, float]:
    """Eve and reconciliation terms of both branches (before the factor 1/2).

    V1 = U1 + W1, so conditioned on W1 the registers U1 and V1 carry the same
    information and Eve's terms are shared by both directions.
    """
    first, cost_a2, cost_b2 = syndrome_costs(state, direction)
    return {
        "eve_a": state.eve_entropy(["U1", "U2", "V2"], ["W1"]),
        "cost_a": first + cost_a2 + cost_b2,
        "eve_b": state.eve_entropy(["U2", "V2"], ["U1", "W1"]),
        "cost_b": cost_a2 + cost_b2,
    }


def _result_from_terms(terms: dict[str, float], worst: ChoiOperator) -> RateResult:
    a = terms["eve_a"] - terms["cost_a"]
    b = terms["eve_b"] - terms["cost_b"]
    branch = "a" if a >= b else "b"
    return RateResult.from_terms(
        terms[f"eve_{branch}"] / 2, terms[f"cost_{branch}"] / 2,
        worst_case=worst, branches=(a / 2, b / 2),
    )


def _omega_family(channel) -> tuple[float, float, Callable[[float], ChoiOperator]]:
    if isinstance(channel, ParameterSlice):
        omega = channel if channel.kind == "bb84-omega" else ParameterSlice.of("bb84-omega", channel.to_stokes())
    else:
        omega = ParameterSlice.of("bb84-omega", as_choi(channel))
    interval = candidate_set_bounds(omega)
    lo, hi = interval.lo, interval.hi
    if interval.width < COLLAPSED_WIDTH:
        lo = hi = interval.anchor
    return lo, hi, lambda ryy: stokes_to_choi(omega_completion(omega, ryy))


def _minimize_over_omega(channel, evaluate, prescan: int, xatol: float):
    lo, hi, completion = _omega_family(channel)
    arg, value = minimize_on_interval(lambda r: evaluate(completion(r)), lo, hi, prescan, xatol)
    return completion(arg), value


def _choi_of(channel) -> ChoiOperator:
    if isinstance(channel, ParameterSlice):
        if channel.kind != "full":
            raise DomainError(f"six-state two-way rates need the full channel, got a {channel.kind} slice")
        return stokes_to_choi(channel.to_stokes())
    return as_choi(channel)


def rate_twoway(channel, protocol: str = "sixstate", direction: str = "direct",
                functions: BlockFunctions | None = None, key_basis: str = "z",
                prescan: int = PRESCAN_POINTS, xatol: float = XATOL) -> RateResult:
    """Two-way rate 1/2 max[branch A, branch B]; BB84 minimises over the omega candidate set."""
    functions = functions or BlockFunctions.advantage_distillation()
    if direction not in ("direct", "reverse"):
        raise DomainError(f"unknown direction {direction!r}")

    def evaluate(choi: ChoiOperator) -> RateResult:
        return _result_from_terms(two_way_terms(derive_two_way_state(choi, functions, key_basis), direction), choi)

    if protocol == "sixstate":
        return evaluate(_choi_of(channel))
    if protocol != "bb84":
        raise DomainError(f"unknown protocol {protocol!r}")
    worst, _ = _minimize_over_omega(channel, lambda c: evaluate(c).raw, prescan, xatol)
    return evaluate(worst)


def _eve_terms(choi: ChoiOperator, functions: BlockFunctions, key_basis: str) -> tuple[float, float]:
    state = derive_two_way_state(choi, functions, key_basis)
    return (state.eve_entropy(["U1", "U2", "V2"], ["W1"]),
            state.eve_entropy(["U2", "V2"], ["U1", "W1"]))


def two_way_eve_entropies(channel, protocol: str = "sixstate", functions: BlockFunctions | None = None,
                          key_basis: str = "z", prescan: int = PRESCAN_POINTS,
                          xatol: float = XATOL) -> tuple[float, float]:
    """H(U1U2V2|W1E) and H(U2V2|U1W1E); BB84 minimises each over the omega candidate set."""
    functions = functions or BlockFunctions.advantage_distillation()
    if protocol == "sixstate":
        return _eve_terms(_choi_of(channel), functions, key_basis)
    if protocol != "bb84":
        raise DomainError(f"unknown protocol {protocol!r}")
    _, h_a = _minimize_over_omega(channel, lambda c: _eve_terms(c, functions, key_basis)[0], prescan, xatol)
    _, h_b = _minimize_over_omega(channel, lambda c: _eve_terms(c, functions, key_basis)[1], prescan, xatol)
    return h_a, h_b


def two_way_syndrome_costs(channel, protocol: str = "sixstate", direction: str = "direct",
                           functions: BlockFunctions | None = None,
                           key_basis: str = "z") -> tuple[float, float, float]:
    """Syndrome rates of the estimated channel.

    The key-basis statistics are fixed on the omega candidate set, so any
    completion gives the same costs.
    """
    functions = functions or BlockFunctions.advantage_distillation()
    if protocol == "sixstate":
        choi = _choi_of(channel)
    elif protocol == "bb84":
        lo, hi, completion = _omega_family(channel)
        choi = completion((lo + hi) / 2)
    else:
        raise DomainError(f"unknown protocol {protocol!r}")
    return syndrome_costs(derive_two_way_state(choi, functions, key_basis), direction)


# --- closed forms and comparison yields ---

def pauli_closed_form(bell: BellDistribution) -> float:
    """Two-way rate of a Pauli channel with the advantage-distillation block functions."""
    p00, p10, p01, p11 = bell.probabilities()
    pk0, pk1 = p00 + p01, p10 + p11
    bar0, bar1 = pk0**2 + pk1**2, 2 * pk0 * pk1
    if pk0 > 0 and pk1 > 0:
        mixed = binary_entropy(min((p00 * p10 + p01 * p11) / (pk0 * pk1), 1.0))
    else:
        mixed = 0.0
    first = 1 - entropy_bits(bell.probabilities()) + bar1 / 2 * mixed
    if bar0 > 0:
        primed = np.array([p00**2 + p01**2, 2 * p00 * p01, p10**2 + p11**2, 2 * p10 * p11]) / bar0
        second = bar0 / 2 * (1 - entropy_bits(primed))
    else:
        second = -math.inf
    return max(first, second)


def conventional_twoway(slice_: ParameterSlice, prescan: int = PRESCAN_POINTS, xatol: float = XATOL) -> RateResult:
    """Two-way rate when only matched-basis error rates are estimated.

    The worst case over such channels is Bell diagonal; an upsilon slice
    leaves e_y free within its Bell-completion interval.
    """
    v = slice_.values()
    if slice_.kind == "sixstate-gamma":
        bell = BellDistribution.from_stokes_diagonal(v["Rzz"], v["Rxx"], v["Ryy"])
        value = pauli_closed_form(bell)
    elif slice_.kind == "bb84-upsilon":
        lo, hi = bell_completion_interval(v["Rzz"], v["Rxx"])
        ey, value = minimize_on_interval(
            lambda e: pauli_closed_form(BellDistribution.from_stokes_diagonal(v["Rzz"], v["Rxx"], e)),
            lo, hi, prescan, xatol)
        bell = BellDistribution.from_stokes_diagonal(v["Rzz"], v["Rxx"], ey)
    else:
        raise DomainError(f"conventional two-way rates need a gamma or upsilon slice, got {slice_.kind}")
    # closed form only: the whole rate is carried in the ambiguity term
    return RateResult.from_terms(value, 0.0, worst_case=bell.choi(), extra={"bell": bell.to_dict()})


def vollbrecht_yield(bell: BellDistribution) -> float:
    p00, p10, p01, p11 = bell.probabilities()
    pk0, pk1 = p00 + p01, p10 + p11
    bar1 = 2 * pk0 * pk1
    h0 = binary_entropy(p01 / pk0) if pk0 > 0 else 0.0
    h1 = binary_entropy(p11 / pk1) if pk1 > 0 else 0.0
    return 1 - entropy_bits(bell.probabilities()) + bar1 / 4 * (h0 + h1)


def advantage_distillation_rate(state: TwoWayState) -> float:
    return (state.eve_entropy(["U2"], ["U1", "W1"]) - state.cost(["U2"], ["W1", "Y1", "Y2"])) / 2


def gohari_rate(state: TwoWayState) -> float:
    total = (
        state.eve_entropy(["U1"]) - state.cost(["U1"], ["Y1", "Y2"])
        + state.eve_entropy(["W1"], ["U1"]) - state.cost(["W1"], ["U1", "X1", "X2"])
        + state.eve_entropy(["U2"], ["U1", "W1"]) - state.cost(["U2"], ["U1", "W1", "Y1", "Y2"])
        + state.eve_entropy(["V2"], ["U1", "W1", "U2"]) - state.cost(["V2"], ["U1", "W1", "U2", "X1", "X2"])
    )
    return total / 2


@dataclass(frozen=True)
class ComparisonRates:
    advantage_distillation: float
    gohari: float
    vollbrecht: float | None

    def to_dict(self) -> dict:
        return {
            "advantageDistillation": self.advantage_distillation,
            "gohari": self.gohari,
            "vollbrecht": self.vollbrecht,
        }


def comparison_rates(channel, protocol: str = "sixstate", functions: BlockFunctions | None = None,
                     prescan: int = PRESCAN_POINTS, xatol: float = XATOL) -> ComparisonRates:
    """Advantage distillation, Gohari-style and Vollbrecht yields for the same channel."""
    functions = functions or BlockFunctions.advantage_distillation()
    ad_functions = BlockFunctions.advantage_distillation()

    def vollbrecht_of(choi):
        return vollbrecht_yield(bell_distribution_of(choi)) if is_bell_diagonal(choi) else None

    if protocol == "sixstate":
        choi = _choi_of(channel)
        return ComparisonRates(
            advantage_distillation=advantage_distillation_rate(derive_two_way_state(choi, ad_functions)),
            gohari=gohari_rate(derive_two_way_state(choi, functions)),
            vollbrecht=vollbrecht_of(choi),
        )
    if protocol != "bb84":
        raise DomainError(f"unknown protocol {protocol!r}")

    _, ad = _minimize_over_omega(
        channel, lambda c: advantage_distillation_rate(derive_two_way_state(c, ad_functions)), prescan, xatol)
    _, gohari = _minimize_over_omega(
        channel, lambda c: gohari_rate(derive_two_way_state(c, functions)), prescan, xatol)
    vollbrecht = None
    lo, hi, completion = _omega_family(channel)
    if is_bell_diagonal(completion((lo + hi) / 2)):
        _, vollbrecht = minimize_on_interval(
            lambda r: vollbrecht_yield(bell_distribution_of(completion(r))), lo, hi, prescan, xatol)
    return ComparisonRates(advantage_distillation=ad, gohari=gohari, vollbrecht=vollbrecht)


# --- coset mixtures ---

@dataclass(frozen=True)
class CosetSpectrum:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    representatives: tuple[tuple[int, ...], ...]
    mixture: np.ndarray


def _bits(m: int) -> list[tuple[int, ...]]:
    return list(product((0, 1), repeat=m))


def _dot(a, b) -> int:
    return sum(x & y for x, y in zip(a, b)) & 1


def _add(a, b) -> tuple[int, ...]:
    return tuple(x ^ y for x, y in zip(a, b))


def coset_mixture_eigendecomposition(code, a, k, bell: BellDistribution) -> CosetSpectrum:
    """Spectral data of the uniform mixture of Eve's states over a coset a + C.

    Eve's space has basis |k, l> per position (dimension 4^m). Eigenvectors
    are indexed by representatives j of F2^m modulo the dual code; only
    components with positive weight are returned.
    """
    codewords = sorted({tuple(int(b) for b in c) for c in code})
    a = tuple(int(b) for b in a)
    k = tuple(int(b) for b in k)
    m = len(a)
    if m > MAX_COSET_LENGTH:
        raise BudgetExceededError(f"coset length {m} exceeds {MAX_COSET_LENGTH}")
    if len(k) != m or any(len(c) != m for c in codewords):
        raise DomainError("code, shift and k vectors must share one length")
    words = set(codewords)
    if (0,) * m not in words or any(_add(c1, c2) not in words for c1 in words for c2 in words):
        raise DomainError("code is not a linear subspace")

    table = bell.as_kl()
    pk = np.prod([table[ki].sum() for ki in k])
    if pk <= 0:
        raise DomainError(f"k = {k} has zero probability")

    def weight(l):
        return float(np.prod([table[ki, li] for ki, li in zip(k, l)]))

    def index(l):
        return sum((2 * ki + li) * 4 ** (m - 1 - i) for i, (ki, li) in enumerate(zip(k, l)))

    def phi(x):
        vec = np.zeros(4**m)
        for l in _bits(m):
            vec[index(l)] = (-1) ** _dot(x, l) * math.sqrt(weight(l))
        return vec / math.sqrt(pk)

    mixture = sum(np.outer(v, v) for v in (phi(_add(c, a)) for c in codewords)) / len(codewords)

    dual = [v for v in _bits(m) if all(_dot(v, c) == 0 for c in codewords)]
    covered: set[tuple[int, ...]] = set()
    reps, values, vectors = [], [], []
    for j in _bits(m):
        if j in covered:
            continue
        coset = [_add(j, c) for c in dual]
        covered.update(coset)
        reps.append(j)
        total = sum(weight(l) for l in coset)
        if total <= 0:
            continue
        vec = np.zeros(4**m)
        for c, l in zip(dual, coset):
            vec[index(l)] = (-1) ** _dot(a, c) * math.sqrt(weight(l))
        values.append(total / pk)
        vectors.append(vec / math.sqrt(total))
    eigenvectors = np.array(vectors).T if vectors else np.zeros((4**m, 0))
    return CosetSpectrum(np.array(values), eigenvectors, tuple(reps), mixture)


# --- block-function search ---

@dataclass(frozen=True)
class BlockSearchResult:
    functions: BlockFunctions
    result: RateResult
    table: tuple[tuple[BlockFunctions, float], ...]


def optimize_block_functions(channel, protocol: str = "sixstate", direction: str = "direct",
                             threads: int = 1, prescan: int = PRESCAN_POINTS,
                             xatol: float = XATOL) -> BlockSearchResult:
    """Exhaustive search over all 256 block-function pairs; ties go to the first pair."""
    candidates = list(BlockFunctions.all_pairs())
    results = map_in_order(
        lambda f: rate_twoway(channel, protocol, direction, f, prescan=prescan, xatol=xatol),
        candidates, threads)
    best = 0
    for i, res in enumerate(results):
        if res.raw > results[best].raw + 1e-12:
            best = i
    logger.info("best block functions %s with rate %.9f", candidates[best].label, results[best].raw)
    table = tuple((f, r.raw) for f, r in zip(candidates, results))
    return BlockSearchResult(candidates[best], results[best], table)
