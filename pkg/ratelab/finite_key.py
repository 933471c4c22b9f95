"""Finite-key lengths and an end-to-end protocol simulation at desk scale."""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .channels import ChoiOperator, joint_distribution, joint_from_stokes
from .codes import LinearCode, one_way_ir, sample_pairs, syndrome_length, two_way_ir
from .errors import DomainError
from .hashing import ToeplitzHash, toeplitz_apply
from .oneway import PRESCAN_POINTS, XATOL, reconciliation_cost
from .tomography import EstimationReport, draw_samples, estimated_ambiguity, eta_hat, ml_estimate
from .twoway import BlockFunctions, two_way_eve_entropies, two_way_syndrome_costs

logger = logging.getLogger(__name__)

SIMULATION_MODES = {"sixstate": "full-sixstate", "bb84": "bb84-omega"}


@dataclass(frozen=True)
class FiniteKeyParams:
    """Block length n, sample count m, security parameter eps and the estimation slack.

    One-way runs use ``k``; two-way runs use ``k1``, ``ka2`` and ``kb2`` with
    ``n`` counting blocks of two channel uses.
    """

    n: int
    eps: float = 1e-9
    eta: float = 0.0
    m: int = 0
    alpha: float = 0.01
    delta: float = 1e-9
    k: int = 0
    k1: int = 0
    ka2: int = 0
    kb2: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise DomainError(f"block length must be positive, got {self.n}")
        for name in ("eps", "delta", "alpha"):
            value = getattr(self, name)
            if not 0 < value < 1:
                raise DomainError(f"{name} must lie in (0, 1), got {value}")
        if self.eta < 0 or self.m < 0:
            raise DomainError("eta and m must be non-negative")
        if min(self.k, self.k1, self.ka2, self.kb2) < 0:
            raise DomainError("syndrome lengths must be non-negative")


def nu_oneway(n: int, eps: float) -> float:
    return 5 * math.sqrt(math.log2(3 / eps) / n) + 2 * math.log2(3 / (2 * eps)) / n


def nu_twoway(n: int, eps: float) -> float:
    return 5 * math.sqrt(math.log2(36 / eps**2) / n) + 2 * math.log2(3 / eps) / n


@dataclass(frozen=True)
class FiniteKeyResult:
    length: int
    bound: float
    nu: float
    abort: bool

    def to_dict(self) -> dict:
        return {"length": self.length, "bound": self.bound, "nu": self.nu, "abort": self.abort}


def finite_key_length(params: FiniteKeyParams, h_hat, mode: str = "oneway") -> FiniteKeyResult:
    """Largest key length strictly below the security bound.

    ``h_hat`` is the estimated ambiguity for one-way runs, or the pair
    (H(U1U2V2|W1E), H(U2V2|U1W1E)) for two-way runs.
    """
    n = params.n
    if mode == "oneway":
        nu = nu_oneway(n, params.eps)
        bound = n * (float(h_hat) - params.eta - nu) - params.k
    elif mode == "twoway":
        h_a, h_b = (float(h) for h in h_hat)
        nu = nu_twoway(n, params.eps)
        first = h_a - params.eta - (params.k1 + params.ka2 + params.kb2) / n
        second = h_b - params.eta - (params.ka2 + params.kb2) / n
        bound = 2 * n * (max(first, second) / 2 - nu)
    else:
        raise DomainError(f"unknown finite-key mode {mode!r}")
    if bound <= 0:
        return FiniteKeyResult(length=0, bound=bound, nu=nu, abort=True)
    return FiniteKeyResult(length=math.ceil(bound) - 1, bound=bound, nu=nu, abort=False)


def twoway_entropies(choi: ChoiOperator, functions: BlockFunctions | None = None) -> tuple[float, float]:
    """The two Eve terms feeding the two-way finite-key bound."""
    return two_way_eve_entropies(choi, "sixstate", functions)


# --- simulation ---

@dataclass
class DeskRun:
    block: int
    syndrome_bits: int
    key_bits: int
    reconciled: bool
    keys_agree: bool

    def to_dict(self) -> dict:
        return {
            "block": self.block,
            "syndromeBits": self.syndrome_bits,
            "keyBits": self.key_bits,
            "reconciled": self.reconciled,
            "keysAgree": self.keys_agree,
        }


def _listed(value):
    return list(value) if isinstance(value, tuple) else value


@dataclass
class SimulationReport:
    """Outcome of one simulated run.

    Two-way runs carry the pair (H(U1U2V2|W1E), H(U2V2|U1W1E)) in ``h_hat``
    and one cost and syndrome rate per reconciliation round.
    """

    estimate: EstimationReport
    h_hat: float | tuple[float, float]
    eta: float
    cost: float | tuple[float, float, float]
    syndrome_rate: float | tuple[float, float, float]
    finite_key: FiniteKeyResult
    desk: DeskRun
    scheme: str = "one-way"
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme,
            "estimate": self.estimate.to_dict(),
            "hHat": _listed(self.h_hat),
            "eta": self.eta,
            "cost": _listed(self.cost),
            "syndromeRate": _listed(self.syndrome_rate),
            "finiteKey": self.finite_key.to_dict(),
            "desk": self.desk.to_dict(),
            "notes": self.notes,
        }


def _estimated_key_joint(report: EstimationReport) -> np.ndarray:
    v = report.params
    R = np.zeros((3, 3))
    R[0, 0] = v["Rzz"]
    return joint_from_stokes(R, [v["tz"], 0.0, 0.0], "z", "z")


def _hash_agreement(alice: np.ndarray, bob: np.ndarray, key_bits: int, rng: np.random.Generator) -> bool:
    h = ToeplitzHash.random(alice.size, key_bits, rng)
    return bool(np.array_equal(toeplitz_apply(h, alice), toeplitz_apply(h, bob)))


def _desk_run(choi: ChoiOperator, direction: str, syndrome_rate: float, key_fraction: float,
              block: int, rng: np.random.Generator) -> DeskRun:
    joint = joint_distribution(choi, "z", "z")
    x, y = sample_pairs(joint, block, rng)
    if direction == "reverse":
        x, y = y, x
    k = syndrome_length(block, syndrome_rate)
    code = LinearCode.random(block, k, rng)
    outcome = one_way_ir(x, y, code)
    key_bits = max(0, min(block, math.floor(block * key_fraction)))
    if key_bits == 0:
        return DeskRun(block, k, 0, outcome.matches(x), outcome.matches(x))
    return DeskRun(block, k, key_bits, outcome.matches(x), _hash_agreement(x, outcome.estimate, key_bits, rng))


def _exchange_roles(functions: BlockFunctions) -> BlockFunctions:
    """The same block functions seen with Bob in Alice's seat; the table index 2*u1 + v1 swaps its bits."""
    order = (0, 2, 1, 3)
    return BlockFunctions(tuple(functions.chi_b[i] for i in order), tuple(functions.chi_a[i] for i in order))


def _desk_run_two_way(choi: ChoiOperator, direction: str, rates: tuple[float, float, float],
                      key_fraction: float, block: int, functions: BlockFunctions,
                      rng: np.random.Generator) -> DeskRun:
    """Two-way IR on ``block`` pairs of channel uses, then PA of (U1, U2, V2).

    ``rates`` are (first parity, U2, V2). Reverse runs exchange the parties.
    """
    joint = joint_distribution(choi, "z", "z")
    x, y = sample_pairs(joint, 2 * block, rng)
    if direction == "reverse":
        x, y = y, x
        functions = _exchange_roles(functions)
        rates = (rates[0], rates[2], rates[1])
    codes = tuple(LinearCode.random(block, syndrome_length(block, r), rng) for r in rates)
    outcome = two_way_ir(x, y, codes, functions)
    syndrome_bits = sum(code.k for code in codes)
    key_bits = max(0, min(3 * block, math.floor(2 * block * key_fraction)))
    if key_bits == 0:
        return DeskRun(block, syndrome_bits, 0, outcome.success, outcome.success)
    agree = _hash_agreement(np.concatenate(outcome.alice), np.concatenate(outcome.bob), key_bits, rng)
    return DeskRun(block, syndrome_bits, key_bits, outcome.success, agree)


def _simulate_two_way(choi: ChoiOperator, report: EstimationReport, protocol: str, n: int, m: int,
                      seed: int, direction: str, eps: float, alpha: float, ir_margin: float,
                      desk_block: int, functions: BlockFunctions, prescan: int, xatol: float,
                      notes: list[str]) -> SimulationReport:
    def entropies(slice_):
        return two_way_eve_entropies(slice_, protocol, functions, prescan=prescan, xatol=xatol)

    h_hat = entropies(report.slice())
    eta = eta_hat(report, alpha, direction, quantity=entropies)
    costs = two_way_syndrome_costs(report.slice(), protocol, direction, functions)
    rates = tuple(min(1.0, c + ir_margin) for c in costs)
    k1, ka2, kb2 = (syndrome_length(n, r) for r in rates)
    params = FiniteKeyParams(n=n, m=m, eps=eps, alpha=alpha, eta=eta, k1=k1, ka2=ka2, kb2=kb2)
    result = finite_key_length(params, h_hat, mode="twoway")
    if result.abort:
        notes.append("estimated parameters fall outside the acceptable region")

    rng = np.random.default_rng([seed, 1])
    desk = _desk_run_two_way(choi, direction, rates, result.length / (2 * n), desk_block, functions, rng)
    logger.info("simulated two-way %s (%s, %s): H=(%.4f, %.4f) eta=%.4f key %d/%d, desk agree=%s",
                protocol, direction, functions.label, *h_hat, eta, result.length, 2 * n, desk.keys_agree)
    return SimulationReport(estimate=report, h_hat=h_hat, eta=eta, cost=costs, syndrome_rate=rates,
                            finite_key=result, desk=desk, scheme="two-way", notes=notes)


def simulate_protocol(choi: ChoiOperator, protocol: str, n: int, m: int, seed: int,
                      direction: str = "direct", eps: float = 1e-9, alpha: float = 0.01,
                      ir_margin: float = 0.05, desk_block: int = 16, two_way: bool = False,
                      functions: BlockFunctions | None = None, prescan: int = PRESCAN_POINTS,
                      xatol: float = XATOL) -> SimulationReport:
    """Sample, estimate, size the syndromes and key, then run IR and PA on one desk block.

    With ``two_way`` the postprocessing works on ``n`` blocks of two channel
    uses and the key length counts bits over all 2n uses.
    """
    if protocol not in SIMULATION_MODES:
        raise DomainError(f"unknown protocol {protocol!r}")
    if direction not in ("direct", "reverse"):
        raise DomainError(f"unknown direction {direction!r}")
    if m < 1:
        raise DomainError(f"sample count must be positive, got {m}")
    mode = SIMULATION_MODES[protocol]
    samples = draw_samples(choi, protocol, m, seed)
    report = ml_estimate(samples, mode)
    notes = []
    if not report.converged:
        notes.append("estimation did not converge")
    if two_way:
        return _simulate_two_way(choi, report, protocol, n, m, seed, direction, eps, alpha, ir_margin,
                                 desk_block, functions or BlockFunctions.advantage_distillation(),
                                 prescan, xatol, notes)

    h_hat = estimated_ambiguity(report, direction)
    eta = eta_hat(report, alpha, direction)
    cost = reconciliation_cost(_estimated_key_joint(report), direction)
    syndrome_rate = min(1.0, cost + ir_margin)
    params = FiniteKeyParams(n=n, m=m, eps=eps, alpha=alpha, eta=eta, k=syndrome_length(n, syndrome_rate))
    result = finite_key_length(params, h_hat)
    if result.abort:
        notes.append("estimated parameters fall outside the acceptable region")

    rng = np.random.default_rng([seed, 1])
    desk = _desk_run(choi, direction, syndrome_rate, result.length / n, desk_block, rng)
    logger.info("simulated %s (%s): H=%.4f eta=%.4f key %d/%d, desk agree=%s",
                protocol, direction, h_hat, eta, result.length, n, desk.keys_agree)
    return SimulationReport(estimate=report, h_hat=h_hat, eta=eta, cost=cost, syndrome_rate=syndrome_rate,
                            finite_key=result, desk=desk, notes=notes)
