"""Qubit channels: Stokes and Choi representations, the channel zoo, outcome distributions.

Coordinates are ordered (z, x, y) everywhere. Alice's side of the Choi
operator carries the complex-conjugated Paulis, so her measurement in basis
``a`` uses the projectors (I + (-1)^x conj(sigma_a)) / 2.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from itertools import product
from typing import NamedTuple, Sequence

import numpy as np
from scipy import linalg
from scipy.spatial.transform import Rotation

from .errors import DomainError, EmptyCandidateSetError, InvalidChannelError
from .quantum import partial_trace

logger = logging.getLogger(__name__)

AXES = ("z", "x", "y")
AXIS_INDEX = {name: i for i, name in enumerate(AXES)}
PROTOCOL_BASES = {"bb84": ("z", "x"), "sixstate": ("z", "x", "y")}

CHOI_PSD_TOL = 1e-9
CHOI_TRACE_TOL = 1e-9
BOUNDARY_TOL = 1e-12
STOKES_TOL = 1e-10

I2 = np.eye(2, dtype=complex)
PAULI = {
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
}

# Rows are the eigenvectors for outcome 0 (+1) and outcome 1 (-1).
BASIS_VECTORS = {
    "z": np.array([[1, 0], [0, 1]], dtype=complex),
    "x": np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2),
    "y": np.array([[1, 1j], [1, -1j]], dtype=complex) / math.sqrt(2),
}

# _PAIR_BASIS[a, b] = conj(sigma_a) ⊗ sigma_b, _BOB_BASIS[b] = I ⊗ sigma_b
_PAIR_BASIS = np.array([[np.kron(PAULI[a].conj(), PAULI[b]) for b in AXES] for a in AXES])
_BOB_BASIS = np.array([np.kron(I2, PAULI[b]) for b in AXES])

# Bell vectors psi(k, l): k flips the bit, l flips the phase.
BELL_VECTORS = {
    (0, 0): np.array([1, 0, 0, 1], dtype=complex) / math.sqrt(2),
    (1, 0): np.array([0, 1, 1, 0], dtype=complex) / math.sqrt(2),
    (0, 1): np.array([1, 0, 0, -1], dtype=complex) / math.sqrt(2),
    (1, 1): np.array([0, 1, -1, 0], dtype=complex) / math.sqrt(2),
}

DELTA = "delta"


def _check_basis(basis: str) -> str:
    if basis not in AXIS_INDEX:
        raise DomainError(f"unknown basis {basis!r}; expected one of {AXES}")
    return basis


def _check_protocol(protocol: str) -> tuple[str, ...]:
    try:
        return PROTOCOL_BASES[protocol]
    except KeyError:
        raise DomainError(f"unknown protocol {protocol!r}; expected bb84 or sixstate") from None


# --- representations ---

@dataclass(frozen=True, eq=False)
class StokesParams:
    """Affine Bloch-sphere map r -> R r + t."""

    R: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.R, dtype=float)
        t = np.asarray(self.t, dtype=float)
        if R.shape != (3, 3) or t.shape != (3,):
            raise DomainError(f"Stokes parameters need a 3x3 R and a 3-vector t, got {R.shape} and {t.shape}")
        if not (np.all(np.isfinite(R)) and np.all(np.isfinite(t))):
            raise DomainError("Stokes parameters must be finite")
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "t", t)

    def entry(self, b: str, a: str) -> float:
        """R_ba: Bob's axis ``b`` against Alice's axis ``a``."""
        return float(self.R[AXIS_INDEX[b], AXIS_INDEX[a]])

    def is_unital(self, tol: float = STOKES_TOL) -> bool:
        return bool(np.all(np.abs(self.t) < tol))

    def to_dict(self) -> dict:
        return {"R": self.R.tolist(), "t": self.t.tolist()}


def _choi_matrix(R, t) -> np.ndarray:
    op = np.eye(4, dtype=complex)
    op += np.einsum("b,bij->ij", np.asarray(t, dtype=float), _BOB_BASIS)
    op += np.einsum("ba,abij->ij", np.asarray(R, dtype=float), _PAIR_BASIS)
    return op / 4


def choi_min_eigenvalue(R, t) -> float:
    return float(linalg.eigvalsh(_choi_matrix(R, t)).min())


@dataclass(frozen=True, eq=False)
class ChoiOperator:
    """Normalised Choi operator rho_AB on A⊗B, basis order 00, 01, 10, 11."""

    op: np.ndarray
    tol: float = field(default=CHOI_PSD_TOL, repr=False)

    def __post_init__(self):
        op = np.asarray(self.op, dtype=complex)
        if op.shape != (4, 4):
            raise DomainError(f"Choi operator must be 4x4, got {op.shape}")
        if np.max(np.abs(op - op.conj().T)) > STOKES_TOL:
            raise InvalidChannelError("Choi operator is not Hermitian")
        op = (op + op.conj().T) / 2
        if abs(np.trace(op).real - 1.0) > CHOI_TRACE_TOL:
            raise InvalidChannelError(f"Choi operator has trace {np.trace(op).real:.12g}")
        min_eig = float(linalg.eigvalsh(op).min())
        if min_eig < -self.tol:
            raise InvalidChannelError(f"invalid channel: Choi operator has eigenvalue {min_eig:.3g}", min_eig)
        if np.max(np.abs(partial_trace(op, [2, 2], [0]) - I2 / 2)) > CHOI_TRACE_TOL:
            raise InvalidChannelError("invalid channel: Alice marginal is not I/2")
        if min_eig < 0:
            evals, vecs = linalg.eigh(op)
            op = (vecs * np.clip(evals, 0.0, None)) @ vecs.conj().T
            op /= np.trace(op).real
        object.__setattr__(self, "op", op)

    @cached_property
    def stokes(self) -> StokesParams:
        return choi_to_stokes(self)

    @cached_property
    def min_eigenvalue(self) -> float:
        return float(linalg.eigvalsh(self.op).min())


def stokes_to_choi(s: StokesParams, tol: float = CHOI_PSD_TOL) -> ChoiOperator:
    """rho = 1/4 [I⊗I + sum_b t_b I⊗sigma_b + sum_ab R_ba conj(sigma_a)⊗sigma_b].

    Eigenvalues down to ``-tol`` are accepted and clipped to zero.
    """
    return ChoiOperator(_choi_matrix(s.R, s.t), tol)


def choi_to_stokes(choi: ChoiOperator) -> StokesParams:
    op = choi.op
    R = np.einsum("ij,abji->ba", op, _PAIR_BASIS).real
    t = np.einsum("ij,bji->b", op, _BOB_BASIS).real
    return StokesParams(R=R, t=t)


def as_choi(channel) -> ChoiOperator:
    """Accept a ChoiOperator, StokesParams or BellDistribution."""
    if isinstance(channel, ChoiOperator):
        return channel
    if isinstance(channel, StokesParams):
        return stokes_to_choi(channel)
    if isinstance(channel, BellDistribution):
        return channel.choi()
    raise DomainError(f"cannot interpret {type(channel).__name__} as a channel")


@dataclass(frozen=True)
class BellDistribution:
    """Weights of the Bell vectors psi(k, l) in a Pauli channel's Choi operator."""

    p00: float
    p10: float
    p01: float
    p11: float

    def __post_init__(self):
        values = self.probabilities()
        if np.any(~np.isfinite(values)) or np.any(values < -BOUNDARY_TOL) or abs(values.sum() - 1) > STOKES_TOL:
            raise DomainError(f"Bell weights {values.tolist()} are not a probability distribution")
        for name in ("p00", "p10", "p01", "p11"):
            object.__setattr__(self, name, max(float(getattr(self, name)), 0.0))

    def probabilities(self) -> np.ndarray:
        return np.array([self.p00, self.p10, self.p01, self.p11], dtype=float)

    def as_kl(self) -> np.ndarray:
        """2x2 array indexed [k, l]."""
        return np.array([[self.p00, self.p01], [self.p10, self.p11]], dtype=float)

    @classmethod
    def from_kl(cls, table) -> "BellDistribution":
        t = np.asarray(table, dtype=float)
        return cls(p00=t[0, 0], p10=t[1, 0], p01=t[0, 1], p11=t[1, 1])

    @classmethod
    def from_stokes_diagonal(cls, ez: float, ex: float, ey: float) -> "BellDistribution":
        return cls(
            p00=(1 + ez + ex + ey) / 4,
            p10=(1 - ez + ex - ey) / 4,
            p01=(1 + ez - ex - ey) / 4,
            p11=(1 - ez - ex + ey) / 4,
        )

    def stokes_diagonal(self) -> tuple[float, float, float]:
        p00, p10, p01, p11 = self.probabilities()
        return (p00 + p01 - p10 - p11, p00 - p01 + p10 - p11, p00 - p01 - p10 + p11)

    def stokes(self) -> StokesParams:
        return StokesParams(R=np.diag(self.stokes_diagonal()), t=np.zeros(3))

    def choi(self) -> ChoiOperator:
        weights = {(0, 0): self.p00, (1, 0): self.p10, (0, 1): self.p01, (1, 1): self.p11}
        op = sum(w * np.outer(BELL_VECTORS[kl], BELL_VECTORS[kl].conj()) for kl, w in weights.items())
        return ChoiOperator(op)

    def to_dict(self) -> dict:
        return {"p00": self.p00, "p10": self.p10, "p01": self.p01, "p11": self.p11}


def is_bell_diagonal(channel, tol: float = 1e-9) -> bool:
    s = channel.stokes if isinstance(channel, ChoiOperator) else channel
    off = s.R - np.diag(np.diag(s.R))
    return bool(np.all(np.abs(off) < tol) and np.all(np.abs(s.t) < tol))


def bell_distribution_of(channel) -> BellDistribution:
    s = channel.stokes if isinstance(channel, ChoiOperator) else channel
    if not is_bell_diagonal(s):
        raise DomainError("channel is not a Pauli channel")
    return BellDistribution.from_stokes_diagonal(*np.diag(s.R))


def bell_completion_interval(ez: float, ex: float) -> tuple[float, float]:
    """Feasible e_y for Bell-diagonal completions of an observed (R_zz, R_xx)."""
    lo = max(-1 - ez - ex, -1 + ez + ex)
    hi = min(1 + ez - ex, 1 - ez + ex)
    if lo > hi + BOUNDARY_TOL:
        raise EmptyCandidateSetError(f"no Bell-diagonal channel has R_zz={ez}, R_xx={ex}")
    return lo, max(lo, hi)


def depolarizing_bell_family(e: float, kappa: float) -> BellDistribution:
    """Bell-diagonal channels sharing R_zz = R_xx = 1 - 2e, parameterised by kappa in [0, e]."""
    if not 0 <= kappa <= e + BOUNDARY_TOL:
        raise DomainError(f"kappa must lie in [0, {e}], got {kappa}")
    return BellDistribution(p00=1 - 2 * e + kappa, p10=e - kappa, p01=e - kappa, p11=kappa)


# --- channel zoo ---

def _rotation_block(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _in_range(name: str, value, lo: float, hi: float) -> float:
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise DomainError(f"{name} must be a number, got {value!r}") from None
    if not lo <= v <= hi:
        raise DomainError(f"{name} must lie in [{lo}, {hi}], got {v}")
    return v


def _identity():
    return np.eye(3), np.zeros(3)


def _pauli(bell):
    if not isinstance(bell, BellDistribution):
        if len(bell) != 4:
            raise DomainError("pauli channel needs four Bell weights p00, p10, p01, p11")
        bell = BellDistribution(*(float(v) for v in bell))
    return np.diag(bell.stokes_diagonal()), np.zeros(3)


def _depolarizing(e):
    e = _in_range("e", e, 0.0, 0.5)
    return (1 - 2 * e) * np.eye(3), np.zeros(3)


def _amplitude_damping(p):
    p = _in_range("p", p, 0.0, 1.0)
    r = math.sqrt(1 - p)
    return np.diag([1 - p, r, r]), np.array([p, 0.0, 0.0])


def _rotation(theta):
    theta = _in_range("theta", theta, -2 * math.pi, 2 * math.pi)
    return _rotation_block(theta), np.zeros(3)


def _rotated_depolarizing(e, angle=math.pi / 4):
    e = _in_range("e", e, 0.0, 0.5)
    angle = _in_range("angle", angle, -2 * math.pi, 2 * math.pi)
    return _rotation_block(angle) @ ((1 - 2 * e) * np.eye(3)), np.zeros(3)


def _unital(R):
    return np.asarray(R, dtype=float), np.zeros(3)


def _raw(R, t):
    return np.asarray(R, dtype=float), np.asarray(t, dtype=float)


CHANNEL_KINDS = {
    "identity": (_identity, ()),
    "pauli": (_pauli, ("bell",)),
    "depolarizing": (_depolarizing, ("e",)),
    "amplitude_damping": (_amplitude_damping, ("p",)),
    "rotation": (_rotation, ("theta",)),
    "rotated_depolarizing": (_rotated_depolarizing, ("e", "angle")),
    "unital": (_unital, ("R",)),
    "raw": (_raw, ("R", "t")),
}


def make_channel(kind: str, *, tol: float = CHOI_PSD_TOL, **params) -> StokesParams:
    """Build a named channel and validate it.

    Examples:
        make_channel("amplitude_damping", p=0.2)
        make_channel("rotated_depolarizing", e=0.1, angle=math.pi / 4)
    """
    try:
        builder, names = CHANNEL_KINDS[kind]
    except KeyError:
        raise DomainError(f"unknown channel kind {kind!r}; expected one of {sorted(CHANNEL_KINDS)}") from None
    unknown = set(params) - set(names)
    if unknown:
        raise DomainError(f"unknown parameter(s) for {kind}: {sorted(unknown)}")
    try:
        R, t = builder(**params)
    except TypeError as exc:
        raise DomainError(f"bad parameters for {kind}: {exc}") from None
    s = StokesParams(R=R, t=t)
    stokes_to_choi(s, tol)
    return s


def channel_from_document(doc: dict, tol: float = CHOI_PSD_TOL) -> StokesParams:
    """Parse {"kind": ..., "params": {...}} or {"kind": "raw"|"unital", "R": ..., "t": ...}."""
    if not isinstance(doc, dict) or "kind" not in doc:
        raise DomainError("channel document must be an object with a 'kind' field")
    kind = doc["kind"]
    if kind in ("raw", "unital") and "params" not in doc:
        allowed = {"kind", "R", "t"} if kind == "raw" else {"kind", "R"}
        unknown = set(doc) - allowed
        if unknown:
            raise DomainError(f"unknown field(s) in channel document: {sorted(unknown)}")
        params = {k: v for k, v in doc.items() if k != "kind"}
    else:
        unknown = set(doc) - {"kind", "params"}
        if unknown:
            raise DomainError(f"unknown field(s) in channel document: {sorted(unknown)}")
        params = doc.get("params", {})
        if not isinstance(params, dict):
            raise DomainError("'params' must be an object")
    return make_channel(kind, tol=tol, **params)


def load_channel_file(path: str, tol: float = CHOI_PSD_TOL) -> StokesParams:
    try:
        with open(path) as f:
            doc = json.load(f)
    except OSError as exc:
        raise DomainError(f"cannot read channel file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DomainError(f"channel file {path} is not valid JSON: {exc}") from exc
    return channel_from_document(doc, tol)


def channel_from_string(text: str, tol: float = CHOI_PSD_TOL) -> StokesParams:
    """Parse CLI shorthand such as ``depolarizing:0.1`` or ``raw:@channel.json``."""
    text = text.strip()
    if text.startswith("@"):
        return load_channel_file(text[1:], tol)
    kind, _, rest = text.partition(":")
    if rest.startswith("@"):
        s = load_channel_file(rest[1:], tol)
        if kind == "unital" and not s.is_unital():
            raise DomainError("unital channel file has nonzero t")
        return s
    values = [v for v in rest.split(",") if v.strip()] if rest else []
    try:
        numbers = [float(v) for v in values]
    except ValueError:
        raise DomainError(f"cannot parse channel parameters {rest!r}") from None
    if kind == "pauli":
        return make_channel("pauli", tol=tol, bell=numbers)
    if kind not in CHANNEL_KINDS or kind in ("raw", "unital"):
        raise DomainError(f"channel kind {kind!r} cannot be given inline")
    names = CHANNEL_KINDS[kind][1]
    if len(numbers) > len(names):
        raise DomainError(f"{kind} takes at most {len(names)} parameter(s)")
    return make_channel(kind, tol=tol, **dict(zip(names, numbers)))


def random_choi(rng: np.random.Generator, rank: int = 4) -> ChoiOperator:
    """A random channel: a random state on A⊗B reshaped to Alice marginal I/2."""
    g = rng.normal(size=(4, rank)) + 1j * rng.normal(size=(4, rank))
    w = g @ g.conj().T
    w /= np.trace(w).real
    evals, vecs = linalg.eigh(partial_trace(w, [2, 2], [0]))
    inv_sqrt = vecs @ np.diag(1 / np.sqrt(2 * evals)) @ vecs.conj().T
    k = np.kron(inv_sqrt, I2)
    op = k @ w @ k.conj().T
    return ChoiOperator((op + op.conj().T) / 2)


def random_unital(rng: np.random.Generator) -> StokesParams:
    """O1 · diag(Bell diagonal) · O2 with Haar-random proper rotations."""
    bell = BellDistribution(*rng.dirichlet(np.ones(4)))
    outer, inner = Rotation.random(2, random_state=rng).as_matrix()
    R = outer @ np.diag(bell.stokes_diagonal()) @ inner
    return StokesParams(R=R, t=np.zeros(3))


# --- outcome distributions ---

def joint_distribution(choi: ChoiOperator, basis_a: str, basis_b: str) -> np.ndarray:
    """P[x, y] for Alice measuring ``basis_a`` and Bob measuring ``basis_b``."""
    va = BASIS_VECTORS[_check_basis(basis_a)].conj()
    vb = BASIS_VECTORS[_check_basis(basis_b)]
    probs = np.empty((2, 2))
    for x, y in product((0, 1), repeat=2):
        phi = np.kron(va[x], vb[y])
        probs[x, y] = np.vdot(phi, choi.op @ phi).real
    return np.clip(probs, 0.0, None)


def joint_from_stokes(R, t, basis_a: str, basis_b: str) -> np.ndarray:
    """P(x, y) = 1/4 [1 + (-1)^y t_b + (-1)^(x+y) R_ba] without building the Choi operator."""
    a = AXIS_INDEX[_check_basis(basis_a)]
    b = AXIS_INDEX[_check_basis(basis_b)]
    R = np.asarray(R, dtype=float)
    t = np.asarray(t, dtype=float)
    sign = np.array([1.0, -1.0])
    probs = (1 + sign[None, :] * t[b] + np.outer(sign, sign) * R[b, a]) / 4
    return np.clip(probs, 0.0, None)


class SampleOutcome(NamedTuple):
    x: int
    basis_a: str
    y: int
    basis_b: str


def sample_outcomes(protocol: str) -> list[SampleOutcome]:
    """Outcome space in the fixed order (x, basisA, y, basisB)."""
    bases = _check_protocol(protocol)
    return [SampleOutcome(x, a, y, b) for x, a, y, b in product((0, 1), bases, (0, 1), bases)]


def sample_distribution(choi: ChoiOperator, protocol: str) -> np.ndarray:
    """P[x, a, y, b] = joint_distribution(a, b)[x, y] / |J|^2, axes in protocol basis order."""
    bases = _check_protocol(protocol)
    j = len(bases)
    probs = np.empty((2, j, 2, j))
    for ia, a in enumerate(bases):
        for ib, b in enumerate(bases):
            probs[:, ia, :, ib] = joint_distribution(choi, a, b) / j**2
    return probs


def degrade(outcome: SampleOutcome) -> tuple:
    """(x xor y, a, b) for matched bases, (DELTA, a, b) otherwise."""
    x, a, y, b = outcome
    if a == b:
        return (x ^ y, a, b)
    return (DELTA, a, b)


# --- parameter slices and candidate sets ---

FULL_KEYS = tuple(f"R{b}{a}" for b in AXES for a in AXES) + ("tz", "tx", "ty")
SLICE_KEYS = {
    "full": FULL_KEYS,
    "bb84-omega": ("Rzz", "Rzx", "Rxz", "Rxx", "tz", "tx"),
    "sixstate-gamma": ("Rzz", "Rxx", "Ryy"),
    "bb84-upsilon": ("Rzz", "Rxx"),
}


@dataclass(frozen=True)
class ParameterSlice:
    """The Stokes components a protocol observes; the rest are free."""

    kind: str
    observed: tuple[float, ...]

    def __post_init__(self):
        if self.kind not in SLICE_KEYS:
            raise DomainError(f"unknown slice kind {self.kind!r}; expected one of {sorted(SLICE_KEYS)}")
        observed = tuple(float(v) for v in self.observed)
        if len(observed) != len(SLICE_KEYS[self.kind]):
            raise DomainError(f"{self.kind} slice needs {len(SLICE_KEYS[self.kind])} values, got {len(observed)}")
        if any(not -1 - BOUNDARY_TOL <= v <= 1 + BOUNDARY_TOL for v in observed):
            raise DomainError(f"observed Stokes components must lie in [-1, 1], got {observed}")
        object.__setattr__(self, "observed", observed)

    def values(self) -> dict[str, float]:
        return dict(zip(SLICE_KEYS[self.kind], self.observed))

    @classmethod
    def of(cls, kind: str, channel) -> "ParameterSlice":
        s = channel.stokes if isinstance(channel, ChoiOperator) else as_choi(channel).stokes
        lookup = {f"R{b}{a}": s.entry(b, a) for b in AXES for a in AXES}
        lookup.update({f"t{b}": float(s.t[i]) for i, b in enumerate(AXES)})
        if kind not in SLICE_KEYS:
            raise DomainError(f"unknown slice kind {kind!r}")
        return cls(kind=kind, observed=tuple(lookup[key] for key in SLICE_KEYS[kind]))

    def to_stokes(self) -> StokesParams:
        if self.kind != "full":
            raise DomainError(f"a {self.kind} slice does not determine the channel")
        v = np.array(self.observed)
        return StokesParams(R=v[:9].reshape(3, 3), t=v[9:])

    def reduce(self, kind: str) -> "ParameterSlice":
        """Project onto a coarser slice (e.g. omega -> upsilon)."""
        values = self.values()
        missing = [key for key in SLICE_KEYS[kind] if key not in values]
        if missing:
            raise DomainError(f"cannot reduce {self.kind} to {kind}: missing {missing}")
        return ParameterSlice(kind, tuple(values[key] for key in SLICE_KEYS[kind]))


def omega_completion(omega: ParameterSlice, ryy: float) -> StokesParams:
    """The symmetric completion of an omega slice with free coordinate R_yy."""
    v = omega.values()
    R = np.array([[v["Rzz"], v["Rzx"], 0.0], [v["Rxz"], v["Rxx"], 0.0], [0.0, 0.0, ryy]])
    return StokesParams(R=R, t=np.array([v["tz"], v["tx"], 0.0]))


def golden_maximize(f, lo: float, hi: float, tol: float = 1e-13) -> tuple[float, float]:
    """Maximise a concave f on [lo, hi]; endpoints are always checked."""
    inv_phi = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c, d = b - inv_phi * (b - a), a + inv_phi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = f(d)
    candidates = [(f(lo), lo), (f(hi), hi), (fc, c), (fd, d)]
    value, arg = max(candidates)
    return arg, value


def _bisect_boundary(feasible, inside: float, outside: float, tol: float = 1e-12) -> float:
    while abs(outside - inside) > tol:
        mid = (inside + outside) / 2
        if feasible(mid):
            inside = mid
        else:
            outside = mid
    return inside


@dataclass(frozen=True)
class RyyInterval:
    """Feasible R_yy values for an omega slice; ``anchor`` is the most interior point."""

    lo: float
    hi: float
    anchor: float

    @property
    def width(self) -> float:
        return self.hi - self.lo


@dataclass(frozen=True)
class CompletionSampler:
    """Feasible completions of a gamma or upsilon slice.

    Free coordinates: the six off-diagonal R entries, the three t entries and,
    for upsilon, the offset of R_yy from R_zz * R_xx. The zero vector is the
    Bell-diagonal (twirled) completion.
    """

    slice: ParameterSlice

    OFF_DIAGONAL = ((0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1))

    @property
    def dimension(self) -> int:
        return 9 if self.slice.kind == "sixstate-gamma" else 10

    def twirled(self) -> StokesParams:
        v = self.slice.values()
        ryy = v["Ryy"] if self.slice.kind == "sixstate-gamma" else v["Rzz"] * v["Rxx"]
        return StokesParams(R=np.diag([v["Rzz"], v["Rxx"], ryy]), t=np.zeros(3))

    def complete(self, free) -> StokesParams:
        free = np.asarray(free, dtype=float)
        if free.shape != (self.dimension,):
            raise DomainError(f"expected {self.dimension} free coordinates, got {free.shape}")
        base = self.twirled()
        R = base.R.copy()
        for value, (i, j) in zip(free[:6], self.OFF_DIAGONAL):
            R[i, j] = value
        if self.dimension == 10:
            R[2, 2] += free[9]
        return StokesParams(R=R, t=free[6:9].copy())

    def violation(self, free) -> float:
        s = self.complete(free)
        return max(0.0, -choi_min_eigenvalue(s.R, s.t))

    def sample(self, rng: np.random.Generator) -> StokesParams:
        direction = rng.normal(size=self.dimension)
        direction /= np.linalg.norm(direction)
        def feasible(scale):
            return self.violation(scale * direction) <= BOUNDARY_TOL
        reach = _bisect_boundary(feasible, 0.0, 2.0 * math.sqrt(self.dimension), tol=1e-9)
        return self.complete(reach * rng.random() * direction)


def candidate_set_bounds(slice_: ParameterSlice, psd_tol: float = CHOI_PSD_TOL,
                         boundary_tol: float = BOUNDARY_TOL):
    """Feasible region of the free coordinates.

    bb84-omega slices return the R_yy interval of the symmetric completion;
    sixstate-gamma and bb84-upsilon slices return a CompletionSampler.
    """
    if slice_.kind in ("sixstate-gamma", "bb84-upsilon"):
        sampler = CompletionSampler(slice_)
        if slice_.kind == "bb84-upsilon":
            v = slice_.values()
            bell_completion_interval(v["Rzz"], v["Rxx"])
        elif choi_min_eigenvalue(sampler.twirled().R, np.zeros(3)) < -psd_tol:
            raise EmptyCandidateSetError(f"no channel matches {slice_.values()}")
        return sampler
    if slice_.kind != "bb84-omega":
        raise DomainError(f"a {slice_.kind} slice has no free coordinates")

    def lam(ryy):
        s = omega_completion(slice_, ryy)
        return choi_min_eigenvalue(s.R, s.t)

    anchor, best = golden_maximize(lam, -1.0, 1.0)
    if best < -psd_tol:
        raise EmptyCandidateSetError(
            f"no channel matches {slice_.values()} (best Choi eigenvalue {best:.3g})")
    if best < -boundary_tol:
        return RyyInterval(lo=anchor, hi=anchor, anchor=anchor)

    def feasible(ryy):
        return lam(ryy) >= -boundary_tol

    lo = -1.0 if feasible(-1.0) else _bisect_boundary(feasible, anchor, -1.0)
    hi = 1.0 if feasible(1.0) else _bisect_boundary(feasible, anchor, 1.0)
    logger.debug("R_yy interval for %s: [%.12g, %.12g]", slice_.values(), lo, hi)
    return RyyInterval(lo=lo, hi=hi, anchor=anchor)
