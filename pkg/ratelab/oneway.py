"""Asymptotic one-way key rates for the BB84 and six-state protocols.

The rate is Eve's ambiguity about the key bit minus the reconciliation cost.
"Proposed" estimation uses every observed Stokes component; "conventional"
estimation only the matched-basis error rates, whose worst case is a Pauli
channel.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .channels import (
    BASIS_VECTORS,
    PROTOCOL_BASES,
    BellDistribution,
    ChoiOperator,
    CompletionSampler,
    ParameterSlice,
    RyyInterval,
    as_choi,
    bell_completion_interval,
    candidate_set_bounds,
    choi_min_eigenvalue,
    joint_distribution,
    joint_from_stokes,
    omega_completion,
    stokes_to_choi,
)
from .errors import DomainError
from .quantum import CcqState, entropy_bits, binary_entropy, conditional_entropy, purify

logger = logging.getLogger(__name__)

DIRECTIONS = ("direct", "reverse")
ESTIMATIONS = ("proposed", "conventional")
PRESCAN_POINTS = 200
XATOL = 1e-7
FLIP_GRID_STEP = 1e-3
COLLAPSED_WIDTH = 1e-7
CROSS_CHECK_TOL = 1e-6
INFEASIBLE_PENALTY = 10.0


@dataclass(frozen=True)
class RateQuery:
    channel: object
    protocol: str = "sixstate"
    estimation: str = "proposed"
    direction: str = "direct"
    key_basis: str = "z"
    noisy_preprocessing: float | None = None
    optimize_flip: bool = False

    def __post_init__(self):
        if self.protocol not in PROTOCOL_BASES:
            raise DomainError(f"unknown protocol {self.protocol!r}")
        if self.estimation not in ESTIMATIONS:
            raise DomainError(f"unknown estimation mode {self.estimation!r}")
        if self.direction not in DIRECTIONS:
            raise DomainError(f"unknown direction {self.direction!r}")
        if self.key_basis not in PROTOCOL_BASES[self.protocol]:
            raise DomainError(f"key basis {self.key_basis!r} is not measured in {self.protocol}")
        q = self.noisy_preprocessing
        if q is not None and not 0.0 <= q <= 0.5:
            raise DomainError(f"flip probability must lie in [0, 0.5], got {q}")

    @property
    def flip(self) -> float:
        return self.noisy_preprocessing or 0.0


@dataclass
class RateResult:
    rate: float
    raw: float
    eve_ambiguity: float
    reconciliation_cost: float
    worst_case: ChoiOperator | None = None
    optimal_q: float | None = None
    branches: tuple[float, float] | None = None
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_terms(cls, eve: float, cost: float, **kwargs) -> "RateResult":
        raw = eve - cost
        return cls(rate=max(0.0, raw), raw=raw, eve_ambiguity=eve, reconciliation_cost=cost, **kwargs)

    def to_dict(self) -> dict:
        out = {
            "rate": self.rate,
            "raw": self.raw,
            "eveAmbiguity": self.eve_ambiguity,
            "cost": self.reconciliation_cost,
        }
        if self.worst_case is not None:
            out["worstCase"] = self.worst_case.stokes.to_dict()
        if self.optimal_q is not None:
            out["optimalQ"] = self.optimal_q
        if self.branches is not None:
            out["branches"] = list(self.branches)
        out.update(self.extra)
        return out


# --- Eve's ambiguity ---

def key_blocks(choi: ChoiOperator, direction: str = "direct", key_basis: str = "z",
               flip: float = 0.0) -> np.ndarray:
    """Weighted Eve operators P(u) rho_E^u for the (possibly flipped) key bit."""
    state = purify(choi.op)
    psi = state.amplitudes.reshape(2, 2, state.dims[1])
    vecs = BASIS_VECTORS[key_basis]
    if direction == "direct":
        phi = np.einsum("xa,abe->xbe", vecs, psi)
    else:
        phi = np.einsum("yb,abe->yae", vecs.conj(), psi)
    blocks = np.einsum("xoe,xof->xef", phi, phi.conj())
    if flip:
        blocks = (1 - flip) * blocks + flip * blocks[::-1]
    return blocks


def eve_ambiguity(choi: ChoiOperator, direction: str = "direct", key_basis: str = "z",
                  flip: float = 0.0) -> float:
    """H(X|E) (direct) or H(Y|E) (reverse) after measuring ``key_basis``."""
    state = CcqState.from_weighted([("K", 2)], key_blocks(choi, direction, key_basis, flip))
    return conditional_entropy(state, ["K"])


def _oriented_joint(joint: np.ndarray, direction: str) -> np.ndarray:
    """Axis 0 is the key holder's bit."""
    return joint if direction == "direct" else joint.T


def reconciliation_cost(joint: np.ndarray, direction: str = "direct", flip: float = 0.0) -> float:
    """H(U|Y) (direct) or H(U|X) (reverse) with U the key bit flipped with probability ``flip``."""
    p = _oriented_joint(np.asarray(joint, dtype=float), direction)
    if flip:
        p = (1 - flip) * p + flip * p[::-1]
    return entropy_bits(p) - entropy_bits(p.sum(axis=0))


# --- closed forms ---

def _bell_from_signed(e: np.ndarray) -> np.ndarray:
    ez, ex, ey = e
    return np.array([1 + ez + ex + ey, 1 - ez + ex - ey, 1 + ez - ex - ey, 1 - ez - ex + ey]) / 4


def unital_sixstate_ambiguity(R, direction: str = "direct", key_basis: str = "z") -> float:
    """H(X|E) of a unital channel from its signed singular values."""
    R = np.asarray(R, dtype=float)
    s = np.linalg.svd(R, compute_uv=False)
    if np.linalg.det(R) < 0:
        s[-1] = -s[-1]
    k = "zxy".index(key_basis)
    norm = np.linalg.norm(R[:, k]) if direction == "direct" else np.linalg.norm(R[k, :])
    return 1 - entropy_bits(np.clip(_bell_from_signed(s), 0, None)) + binary_entropy((1 + min(norm, 1.0)) / 2)


def unital_bb84_bound(omega: ParameterSlice, direction: str = "direct", key_basis: str = "z") -> float:
    """Worst-case H(X|E) of an omega slice with t = 0, attained by a unital completion."""
    v = omega.values()
    block = np.array([[v["Rzz"], v["Rzx"]], [v["Rxz"], v["Rxx"]]])
    dz, dx = np.linalg.svd(block, compute_uv=False)
    k = 0 if key_basis == "z" else 1
    norm = math.hypot(*block[:, k]) if direction == "direct" else math.hypot(*block[k, :])
    return (1 - binary_entropy((1 + min(dz, 1.0)) / 2) - binary_entropy((1 + min(dx, 1.0)) / 2)
            + binary_entropy((1 + min(norm, 1.0)) / 2))


def conventional_closed_form(slice_: ParameterSlice) -> float:
    """1 - H[p] for a gamma slice, 1 - h((1+R_zz)/2) - h((1+R_xx)/2) for an upsilon slice."""
    v = slice_.values()
    if slice_.kind == "sixstate-gamma":
        bell = BellDistribution.from_stokes_diagonal(v["Rzz"], v["Rxx"], v["Ryy"])
        return 1 - entropy_bits(bell.probabilities())
    if slice_.kind == "bb84-upsilon":
        return 1 - binary_entropy((1 + v["Rzz"]) / 2) - binary_entropy((1 + v["Rxx"]) / 2)
    raise DomainError(f"no conventional closed form for a {slice_.kind} slice")


# --- one-dimensional minimisation ---

def minimize_on_interval(f, lo: float, hi: float, prescan: int = PRESCAN_POINTS,
                         xatol: float = XATOL) -> tuple[float, float]:
    """Global-ish minimum of a scalar function: grid prescan, bounded refinement, endpoints."""
    if hi - lo < COLLAPSED_WIDTH:
        mid = (lo + hi) / 2
        return mid, f(mid)
    grid = np.linspace(lo, hi, max(prescan, 3))
    values = np.array([f(x) for x in grid])
    i = int(np.argmin(values))
    candidates = [(float(values[i]), float(grid[i])), (float(values[0]), lo), (float(values[-1]), hi)]
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    res = optimize.minimize_scalar(f, bounds=(a, b), method="bounded", options={"xatol": xatol})
    if res.success:
        candidates.append((float(res.fun), float(res.x)))
    value, arg = min(candidates)
    return arg, value


def maximize_flip(objective, grid_step: float = FLIP_GRID_STEP) -> tuple[float, float]:
    """Best flip probability in [0, 1/2]: grid search then bounded refinement."""
    grid = np.linspace(0.0, 0.5, int(round(0.5 / grid_step)) + 1)
    values = np.array([objective(q) for q in grid])
    i = int(np.argmax(values))
    best = (float(values[i]), float(grid[i]))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    if b > a:
        res = optimize.minimize_scalar(lambda q: -objective(q), bounds=(a, b), method="bounded",
                                       options={"xatol": 1e-9})
        if res.success and -res.fun > best[0]:
            best = (float(-res.fun), float(res.x))
    return best[1], best[0]


# --- worst cases over candidate sets ---

def _slice_of(channel, kind: str) -> ParameterSlice:
    if isinstance(channel, ParameterSlice):
        if channel.kind == kind:
            return channel
        if channel.kind == "full":
            return ParameterSlice.of(kind, channel.to_stokes())
        return channel.reduce(kind)
    return ParameterSlice.of(kind, as_choi(channel))


def _require_choi(channel) -> ChoiOperator:
    if isinstance(channel, ParameterSlice):
        if channel.kind != "full":
            raise DomainError(f"six-state proposed estimation needs the full channel, got a {channel.kind} slice")
        return stokes_to_choi(channel.to_stokes())
    return as_choi(channel)


def worst_case_ambiguity(slice_: ParameterSlice, direction: str = "direct", key_basis: str = "z",
                         flip: float = 0.0, prescan: int = PRESCAN_POINTS,
                         xatol: float = XATOL) -> tuple[float, ChoiOperator]:
    """Minimum of Eve's ambiguity over the channels consistent with ``slice_``."""
    if slice_.kind == "full":
        choi = stokes_to_choi(slice_.to_stokes())
        return eve_ambiguity(choi, direction, key_basis, flip), choi

    if slice_.kind == "sixstate-gamma":
        choi = stokes_to_choi(CompletionSampler(slice_).twirled())
        return eve_ambiguity(choi, direction, key_basis, flip), choi

    if slice_.kind == "bb84-upsilon":
        v = slice_.values()
        lo, hi = bell_completion_interval(v["Rzz"], v["Rxx"])

        def completion(ey):
            return BellDistribution.from_stokes_diagonal(v["Rzz"], v["Rxx"], ey).choi()
    else:
        interval: RyyInterval = candidate_set_bounds(slice_)
        lo, hi = interval.lo, interval.hi
        if interval.width < COLLAPSED_WIDTH:
            lo = hi = interval.anchor

        def completion(ryy):
            return stokes_to_choi(omega_completion(slice_, ryy))

    arg, value = minimize_on_interval(
        lambda r: eve_ambiguity(completion(r), direction, key_basis, flip), lo, hi, prescan, xatol)
    return value, completion(arg)


def numeric_conventional_minimum(slice_: ParameterSlice, rng: np.random.Generator,
                                 direction: str = "direct", key_basis: str = "z",
                                 starts: int = 4, maxiter: int = 2000) -> tuple[float, ChoiOperator]:
    """Multi-start Nelder-Mead over every completion of a gamma or upsilon slice."""
    sampler = CompletionSampler(slice_)

    def objective(free):
        s = sampler.complete(free)
        lam = choi_min_eigenvalue(s.R, s.t)
        if lam < -1e-12:
            return INFEASIBLE_PENALTY - lam
        return eve_ambiguity(stokes_to_choi(s), direction, key_basis)

    starting_points = [np.zeros(sampler.dimension)]
    for _ in range(max(starts - 1, 0)):
        sample = sampler.sample(rng)
        free = np.concatenate([[sample.R[i, j] for i, j in sampler.OFF_DIAGONAL], sample.t])
        if sampler.dimension == 10:
            free = np.append(free, sample.R[2, 2] - sampler.twirled().R[2, 2])
        starting_points.append(free)

    best_value, best_free = math.inf, starting_points[0]
    for x0 in starting_points:
        res = optimize.minimize(objective, x0, method="Nelder-Mead",
                                options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": maxiter})
        logger.debug("conventional restart: %.12g after %d iterations", res.fun, res.nit)
        if res.fun < best_value:
            best_value, best_free = float(res.fun), res.x
    return best_value, stokes_to_choi(sampler.complete(best_free))


# --- rates ---

def rate_sixstate(query: RateQuery, grid_step: float = FLIP_GRID_STEP) -> RateResult:
    choi = _require_choi(query.channel)
    joint = joint_distribution(choi, query.key_basis, query.key_basis)

    def terms(q):
        return (eve_ambiguity(choi, query.direction, query.key_basis, q),
                reconciliation_cost(joint, query.direction, q))

    def raw_rate(q):
        eve, cost = terms(q)
        return eve - cost

    q = query.flip
    if query.optimize_flip:
        q, _ = maximize_flip(raw_rate, grid_step)
    eve, cost = terms(q)
    return RateResult.from_terms(eve, cost, worst_case=choi,
                                 optimal_q=q if query.optimize_flip or query.noisy_preprocessing else None)


def rate_bb84(query: RateQuery, grid_step: float = FLIP_GRID_STEP, prescan: int = PRESCAN_POINTS,
              xatol: float = XATOL) -> RateResult:
    omega = _slice_of(query.channel, "bb84-omega")
    v = omega.values()
    R = np.array([[v["Rzz"], v["Rzx"], 0.0], [v["Rxz"], v["Rxx"], 0.0], [0.0, 0.0, 0.0]])
    joint = joint_from_stokes(R, np.array([v["tz"], v["tx"], 0.0]), query.key_basis, query.key_basis)

    def terms(q):
        eve, worst = worst_case_ambiguity(omega, query.direction, query.key_basis, q, prescan, xatol)
        return eve, reconciliation_cost(joint, query.direction, q), worst

    def raw_rate(q):
        eve, cost, _ = terms(q)
        return eve - cost

    q = query.flip
    if query.optimize_flip:
        q, _ = maximize_flip(raw_rate, grid_step)
    eve, cost, worst = terms(q)

    if q == 0.0 and abs(v["tz"]) < 1e-12 and abs(v["tx"]) < 1e-12:
        bound = unital_bb84_bound(omega, query.direction, query.key_basis)
        if abs(bound - eve) > CROSS_CHECK_TOL:
            logger.warning("BB84 worst case %.9f disagrees with unital closed form %.9f for %s",
                           eve, bound, v)
    return RateResult.from_terms(eve, cost, worst_case=worst,
                                 optimal_q=q if query.optimize_flip or query.noisy_preprocessing else None)


def rate_conventional(query: RateQuery, grid_step: float = FLIP_GRID_STEP, numeric: bool = False,
                      rng: np.random.Generator | None = None, starts: int = 4) -> RateResult:
    """Rate from matched-basis error rates only.

    Without noisy preprocessing the closed form is returned (``numeric=True``
    re-derives Eve's term by direct minimisation instead). With noisy
    preprocessing the worst case over the Bell-diagonal completions is used.
    """
    kind = "sixstate-gamma" if query.protocol == "sixstate" else "bb84-upsilon"
    slice_ = _slice_of(query.channel, kind)
    v = slice_.values()
    error = (1 - v[f"R{query.key_basis}{query.key_basis}"]) / 2

    def cost(q):
        return binary_entropy(error * (1 - q) + (1 - error) * q)

    noisy = query.optimize_flip or query.noisy_preprocessing
    if noisy:
        def rate_at(q):
            return worst_case_ambiguity(slice_, query.direction, query.key_basis, q)[0] - cost(q)

        q = maximize_flip(rate_at, grid_step)[0] if query.optimize_flip else query.flip
        eve, worst = worst_case_ambiguity(slice_, query.direction, query.key_basis, q)
        return RateResult.from_terms(eve, cost(q), worst_case=worst, optimal_q=q)

    if numeric:
        rng = rng if rng is not None else np.random.default_rng()
        eve, worst = numeric_conventional_minimum(slice_, rng, query.direction, query.key_basis, starts)
        return RateResult.from_terms(eve, cost(0.0), worst_case=worst)

    raw = conventional_closed_form(slice_)
    worst = stokes_to_choi(CompletionSampler(slice_).twirled())
    return RateResult.from_terms(raw + cost(0.0), cost(0.0), worst_case=worst)


def compute_rate(query: RateQuery, grid_step: float = FLIP_GRID_STEP, prescan: int = PRESCAN_POINTS,
                 xatol: float = XATOL) -> RateResult:
    """Dispatch on estimation mode and protocol."""
    if query.estimation == "conventional":
        return rate_conventional(query, grid_step=grid_step)
    if query.protocol == "sixstate":
        return rate_sixstate(query, grid_step=grid_step)
    return rate_bb84(query, grid_step=grid_step, prescan=prescan, xatol=xatol)


@dataclass(frozen=True)
class ImprovementCheck:
    classification: str
    predicted: str
    delta: float
    proposed: float
    conventional: float

    @property
    def matches(self) -> bool:
        return self.classification == self.predicted


def strict_improvement_check(channel, direction: str = "direct", tol: float = 1e-8) -> ImprovementCheck:
    """Compare proposed and conventional BB84 rates on an omega slice.

    Strict improvement is expected exactly when t or the z-x off-diagonal
    entries are nonzero.
    """
    omega = _slice_of(channel, "bb84-omega")
    v = omega.values()
    if abs(v["Rzz"]) < 1e-12 or abs(v["Rxx"]) < 1e-12:
        return ImprovementCheck("degenerate", "degenerate", 0.0, math.nan, math.nan)
    proposed = rate_bb84(RateQuery(omega, "bb84", direction=direction)).raw
    conventional = conventional_closed_form(omega.reduce("bb84-upsilon"))
    delta = proposed - conventional
    if delta > tol:
        classification = "strict"
    elif abs(delta) <= tol:
        classification = "equal"
    else:
        classification = "violation"
    off = max(abs(v["tz"]), abs(v["tx"]), abs(v["Rzx"]), abs(v["Rxz"]))
    predicted = "strict" if off > 1e-12 else "equal"
    return ImprovementCheck(classification, predicted, delta, proposed, conventional)
