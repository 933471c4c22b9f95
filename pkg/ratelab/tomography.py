"""Channel estimation from measurement samples.

Every estimation mode is a linear model: the probability of each observed
symbol is ``base + A @ theta`` where ``theta`` lists the Stokes components of
the mode's parameter slice. The estimator maximises the log-likelihood with
Nelder-Mead from a moment-matching start, rejecting parameters that no valid
channel can reproduce.
"""

import csv
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

from .channels import (
    AXES,
    PROTOCOL_BASES,
    SLICE_KEYS,
    ChoiOperator,
    ParameterSlice,
    golden_maximize,
    choi_min_eigenvalue,
    omega_completion,
    sample_distribution,
    sample_outcomes,
    stokes_to_choi,
)
from .errors import DomainError, EmptyCandidateSetError
from .oneway import eve_ambiguity, worst_case_ambiguity
from .workers import map_in_order

logger = logging.getLogger(__name__)

MODES = {
    "full-sixstate": ("sixstate", "full"),
    "bb84-omega": ("bb84", "bb84-omega"),
    "degraded-gamma": ("sixstate", "sixstate-gamma"),
    "degraded-upsilon": ("bb84", "bb84-upsilon"),
}
MAX_ITERATIONS = 5000
STEP_TOLERANCE = 1e-8
FEASIBILITY_TOL = 1e-9
ETA_DIRECTIONS = 26
BARRIER = 1e6
CSV_HEADER = ["x", "basisA", "y", "basisB", "count"]


@dataclass(frozen=True, eq=False)
class SampleSet:
    """Histogram over the outcome space in ``sample_outcomes(protocol)`` order."""

    protocol: str
    counts: np.ndarray
    seed: int | tuple[int, ...] | None = None

    def __post_init__(self):
        j = len(PROTOCOL_BASES[self.protocol])
        counts = np.asarray(self.counts, dtype=float).reshape(2, j, 2, j)
        if np.any(counts < 0):
            raise DomainError("sample counts must be non-negative")
        object.__setattr__(self, "counts", counts)

    @property
    def m(self) -> float:
        return float(self.counts.sum())

    def count(self, x: int, basis_a: str, y: int, basis_b: str) -> float:
        bases = PROTOCOL_BASES[self.protocol]
        return float(self.counts[x, bases.index(basis_a), y, bases.index(basis_b)])

    def to_csv(self, path: str) -> None:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(CSV_HEADER)
            for outcome, n in zip(sample_outcomes(self.protocol), self.counts.ravel()):
                value = int(n) if float(n).is_integer() else float(n)
                writer.writerow([outcome.x, outcome.basis_a, outcome.y, outcome.basis_b, value])

    @classmethod
    def from_csv(cls, path: str) -> "SampleSet":
        try:
            with open(path, newline="") as f:
                rows = list(csv.DictReader(f))
        except OSError as exc:
            raise DomainError(f"cannot read sample file {path}: {exc}") from exc
        if not rows or list(rows[0].keys()) != CSV_HEADER:
            raise DomainError(f"sample file {path} must have header {','.join(CSV_HEADER)}")
        protocol = "sixstate" if any("y" in (r["basisA"], r["basisB"]) for r in rows) else "bb84"
        outcomes = sample_outcomes(protocol)
        position = {(o.x, o.basis_a, o.y, o.basis_b): i for i, o in enumerate(outcomes)}
        counts = np.zeros(len(outcomes))
        for r in rows:
            try:
                key = (int(r["x"]), r["basisA"], int(r["y"]), r["basisB"])
                counts[position[key]] += float(r["count"])
            except (KeyError, ValueError):
                raise DomainError(f"bad sample row {r}") from None
        return cls(protocol=protocol, counts=counts)


def draw_samples(choi: ChoiOperator, protocol: str, m: int, seed: int | Sequence[int]) -> SampleSet:
    """m i.i.d. outcomes by inverse-CDF sampling with a seeded PCG64 generator."""
    if m < 1:
        raise DomainError(f"sample size must be positive, got {m}")
    probs = sample_distribution(choi, protocol).ravel()
    cdf = np.cumsum(probs)
    cdf[-1] = 1.0
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    idx = np.searchsorted(cdf, rng.random(int(m)), side="right")
    counts = np.bincount(idx, minlength=len(probs))
    seed_value = seed if isinstance(seed, int) else tuple(int(s) for s in seed)
    return SampleSet(protocol=protocol, counts=counts, seed=seed_value)


# --- linear models ---

@dataclass(frozen=True, eq=False)
class LinearModel:
    mode: str
    keys: tuple[str, ...]
    base: np.ndarray
    design: np.ndarray
    fold: np.ndarray  # symbol x raw-outcome incidence

    def probabilities(self, theta) -> np.ndarray:
        return self.base + self.design @ np.asarray(theta, dtype=float)

    def symbol_counts(self, samples: SampleSet) -> np.ndarray:
        return self.fold @ samples.counts.ravel()


@lru_cache(maxsize=None)
def linear_model(mode: str) -> LinearModel:
    try:
        protocol, kind = MODES[mode]
    except KeyError:
        raise DomainError(f"unknown estimation mode {mode!r}; expected one of {sorted(MODES)}") from None
    keys = SLICE_KEYS[kind]
    index = {key: i for i, key in enumerate(keys)}
    bases = PROTOCOL_BASES[protocol]
    j2 = len(bases) ** 2
    outcomes = sample_outcomes(protocol)

    if mode in ("full-sixstate", "bb84-omega"):
        base = np.full(len(outcomes), 1 / (4 * j2))
        design = np.zeros((len(outcomes), len(keys)))
        for row, (x, a, y, b) in enumerate(outcomes):
            design[row, index[f"R{b}{a}"]] += (-1) ** (x + y) / (4 * j2)
            design[row, index[f"t{b}"]] += (-1) ** y / (4 * j2)
        return LinearModel(mode, keys, base, design, np.eye(len(outcomes)))

    symbols = [(e, b, b) for b in bases for e in (0, 1)] + [(a, b) for a in bases for b in bases if a != b]
    base = np.zeros(len(symbols))
    design = np.zeros((len(symbols), len(keys)))
    fold = np.zeros((len(symbols), len(outcomes)))
    position = {s: i for i, s in enumerate(symbols)}
    for s, symbol in enumerate(symbols):
        if len(symbol) == 3:
            e, b, _ = symbol
            base[s] = 1 / (2 * j2)
            design[s, index[f"R{b}{b}"]] = (-1) ** e / (2 * j2)
        else:
            base[s] = 1 / j2
    for col, (x, a, y, b) in enumerate(outcomes):
        fold[position[(x ^ y, a, b) if a == b else (a, b)], col] = 1
    return LinearModel(mode, keys, base, design, fold)


def log_likelihood(samples: SampleSet, mode: str, theta) -> float:
    model = linear_model(mode)
    n = model.symbol_counts(samples)
    p = model.probabilities(theta)
    used = n > 0
    if np.any(p[used] <= 0):
        return -math.inf
    return float(np.sum(n[used] * np.log(p[used])))


def slice_violation(mode: str, theta) -> float:
    """How far ``theta`` is from the set of slices some valid channel reproduces (0 if feasible)."""
    _, kind = MODES[mode]
    sl = dict(zip(SLICE_KEYS[kind], (float(v) for v in theta)))
    if kind == "full":
        t = np.array([sl[f"t{b}"] for b in AXES])
        R = np.array([[sl[f"R{b}{a}"] for a in AXES] for b in AXES])
        return max(0.0, -choi_min_eigenvalue(R, t))
    if kind == "sixstate-gamma":
        ez, ex, ey = sl["Rzz"], sl["Rxx"], sl["Ryy"]
        bell = np.array([1 + ez + ex + ey, 1 - ez + ex - ey, 1 + ez - ex - ey, 1 - ez - ex + ey]) / 4
        return max(0.0, -float(bell.min()))
    if kind == "bb84-upsilon":
        ez, ex = sl["Rzz"], sl["Rxx"]
        lo = max(-1 - ez - ex, -1 + ez + ex)
        hi = min(1 + ez - ex, 1 - ez + ex)
        return max(0.0, (lo - hi) / 4)
    if any(abs(v) > 1 for v in sl.values()):
        return max(abs(v) for v in sl.values()) - 1
    omega = ParameterSlice(kind, tuple(sl.values()))

    def lam(ryy):
        s = omega_completion(omega, ryy)
        return choi_min_eigenvalue(s.R, s.t)

    _, best = golden_maximize(lam, -1.0, 1.0, tol=1e-9)
    return max(0.0, -best)


def moment_estimate(samples: SampleSet, mode: str) -> np.ndarray:
    """Invert empirical frequencies through the linear Stokes relations."""
    model = linear_model(mode)
    bases = PROTOCOL_BASES[samples.protocol]
    c = samples.counts
    sign = np.array([1.0, -1.0])
    values = {}
    for ib, b in enumerate(bases):
        column = c[:, :, :, ib]
        total = column.sum()
        values[f"t{b}"] = float(np.einsum("xay,y->", column, sign) / total) if total else 0.0
        for ia, a in enumerate(bases):
            block = c[:, ia, :, ib]
            n = block.sum()
            values[f"R{b}{a}"] = float(np.einsum("xy,x,y->", block, sign, sign) / n) if n else 0.0
    return np.array([values[key] for key in model.keys])


def _shrink_to_feasible(mode: str, theta: np.ndarray) -> np.ndarray:
    scale = 1.0
    while scale > 0 and slice_violation(mode, scale * theta) > FEASIBILITY_TOL:
        scale = round(scale - 0.01, 10)
    return max(scale, 0.0) * theta


@dataclass
class EstimationReport:
    mode: str
    protocol: str
    params: dict[str, float]
    log_likelihood: float
    initial_log_likelihood: float
    converged: bool
    iterations: int
    m: float
    notes: list[str] = field(default_factory=list)

    @property
    def theta(self) -> np.ndarray:
        return np.array(list(self.params.values()))

    def slice(self) -> ParameterSlice:
        return ParameterSlice(MODES[self.mode][1], tuple(self.params.values()))

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "protocol": self.protocol,
            "estimate": self.params,
            "logLikelihood": self.log_likelihood,
            "converged": self.converged,
            "iterations": self.iterations,
            "m": self.m,
        }


def ml_estimate(samples: SampleSet, mode: str, max_iterations: int = MAX_ITERATIONS,
                step_tolerance: float = STEP_TOLERANCE) -> EstimationReport:
    """Maximum-likelihood estimate of the mode's parameter slice."""
    model = linear_model(mode)
    protocol = MODES[mode][0]
    if samples.protocol != protocol:
        raise DomainError(f"mode {mode} needs {protocol} samples, got {samples.protocol}")
    if samples.m <= 0:
        raise DomainError("sample set is empty")

    start = _shrink_to_feasible(mode, moment_estimate(samples, mode))
    start_ll = log_likelihood(samples, mode, start)

    def objective(theta):
        violation = slice_violation(mode, theta)
        if violation > FEASIBILITY_TOL:
            return BARRIER * (1 + violation)
        ll = log_likelihood(samples, mode, theta)
        return -ll / samples.m if math.isfinite(ll) else BARRIER

    res = optimize.minimize(objective, start, method="Nelder-Mead",
                            options={"xatol": step_tolerance, "fatol": 1e-14, "maxiter": max_iterations})
    theta, ll = start, start_ll
    if res.fun < BARRIER:
        candidate_ll = log_likelihood(samples, mode, res.x)
        if candidate_ll >= start_ll:
            theta, ll = res.x, candidate_ll
    if not res.success:
        logger.warning("ML estimation (%s) did not converge after %d iterations", mode, res.nit)
    logger.info("ML estimate (%s, m=%g): log-likelihood %.6f", mode, samples.m, ll)
    return EstimationReport(
        mode=mode,
        protocol=protocol,
        params=dict(zip(model.keys, (float(v) for v in theta))),
        log_likelihood=ll,
        initial_log_likelihood=start_ll,
        converged=bool(res.success),
        iterations=int(res.nit),
        m=samples.m,
    )


def ambiguity_of_slice(slice_: ParameterSlice, direction: str = "direct", key_basis: str = "z") -> float:
    if slice_.kind == "full":
        return eve_ambiguity(stokes_to_choi(slice_.to_stokes()), direction, key_basis)
    return worst_case_ambiguity(slice_, direction, key_basis)[0]


def estimated_ambiguity(report: EstimationReport, direction: str = "direct", key_basis: str = "z") -> float:
    """Plug-in estimate of Eve's ambiguity, worst case over the estimated slice."""
    return ambiguity_of_slice(report.slice(), direction, key_basis)


def _directions(dim: int, count: int) -> np.ndarray:
    axes = np.vstack([np.eye(dim), -np.eye(dim)])
    if count <= len(axes):
        return axes[:count]
    extra = np.random.default_rng(0).normal(size=(count - len(axes), dim))
    extra /= np.linalg.norm(extra, axis=1, keepdims=True)
    return np.vstack([axes, extra])


def eta_hat(report: EstimationReport, alpha: float, direction: str = "direct", key_basis: str = "z",
            directions: int = ETA_DIRECTIONS,
            quantity: Callable[[ParameterSlice], float | Sequence[float]] | None = None) -> float:
    """Largest change of the ambiguity estimate over a fixed sample of the alpha-sphere.

    Points outside the feasible region are pulled back along their direction
    to the boundary. ``quantity`` replaces the ambiguity; for a vector of
    estimates the largest change of any component counts.
    """
    if alpha <= 0:
        raise DomainError(f"alpha must be positive, got {alpha}")
    if quantity is None:
        def quantity(slice_):
            return ambiguity_of_slice(slice_, direction, key_basis)
    theta = report.theta
    kind = MODES[report.mode][1]
    centre = np.atleast_1d(quantity(report.slice()))
    worst = 0.0
    for u in _directions(len(theta), directions):
        reach = alpha
        if slice_violation(report.mode, theta + reach * u) > FEASIBILITY_TOL:
            lo, hi = 0.0, alpha
            for _ in range(40):
                mid = (lo + hi) / 2
                if slice_violation(report.mode, theta + mid * u) > FEASIBILITY_TOL:
                    hi = mid
                else:
                    lo = mid
            reach = lo
        point = np.clip(theta + reach * u, -1.0, 1.0)
        try:
            value = np.atleast_1d(quantity(ParameterSlice(kind, tuple(point))))
        except EmptyCandidateSetError:
            continue
        worst = max(worst, float(np.max(np.abs(value - centre))))
    return worst


# --- consistency ---

@dataclass(frozen=True)
class ConsistencyRow:
    m: int
    trials: int
    failures: int

    @property
    def mu_hat(self) -> float:
        return self.failures / self.trials


def true_parameters(choi: ChoiOperator, mode: str) -> np.ndarray:
    return np.array(ParameterSlice.of(MODES[mode][1], choi).observed)


def consistency_report(choi: ChoiOperator, mode: str, alpha: float, m_list: Sequence[int], trials: int,
                       seed: int, threads: int = 1) -> list[ConsistencyRow]:
    """Fraction of trials whose estimate misses the true slice by more than alpha, per m."""
    if alpha <= 0:
        raise DomainError(f"alpha must be positive, got {alpha}")
    if trials < 1:
        raise DomainError(f"trials must be positive, got {trials}")
    protocol = MODES[mode][0]
    truth = true_parameters(choi, mode)
    rows = []
    for m in m_list:
        def trial(i, m=m):
            samples = draw_samples(choi, protocol, m, (seed, m, i))
            return float(np.linalg.norm(ml_estimate(samples, mode).theta - truth))

        errors = map_in_order(trial, range(trials), threads)
        failures = sum(err > alpha for err in errors)
        logger.info("consistency m=%d: %d/%d trials beyond alpha=%g", m, failures, trials, alpha)
        rows.append(ConsistencyRow(m=int(m), trials=trials, failures=failures))
    return rows
