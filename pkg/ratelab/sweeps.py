"""Parameter sweeps over channel families and the stock figure curve sets."""

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .channels import PROTOCOL_BASES, ParameterSlice, StokesParams, make_channel, stokes_to_choi
from .errors import DomainError
from .oneway import DIRECTIONS, ESTIMATIONS, FLIP_GRID_STEP, PRESCAN_POINTS, XATOL, RateQuery, compute_rate
from .twoway import (
    BlockFunctions,
    comparison_rates,
    conventional_twoway,
    rate_twoway,
)
from .workers import map_in_order

logger = logging.getLogger(__name__)

TWOWAY_PREFIX = "twoway-"
NOISY_SUFFIX = "+noisy"

# family -> (parameter name, lower, upper)
FAMILIES = {
    "amplitude_damping": ("p", 0.0, 1.0),
    "depolarizing": ("e", 0.0, 0.5),
    "rotation": ("theta", -2 * math.pi, 2 * math.pi),
    "rotated_depolarizing": ("e", 0.0, 0.5),
}


@dataclass(frozen=True)
class Settings:
    grid_step: float = FLIP_GRID_STEP
    prescan: int = PRESCAN_POINTS
    xatol: float = XATOL

    @classmethod
    def from_config(cls, config: dict) -> "Settings":
        return cls(
            grid_step=config["noisy_preprocessing"]["grid_step"],
            prescan=config["minimizer"]["prescan_points"],
            xatol=config["minimizer"]["xatol"],
        )


@dataclass(frozen=True)
class Variant:
    """One rate curve, written ``[twoway-]protocol[:estimation[:direction[:basis]]][@chiA/chiB][+noisy]``."""

    protocol: str
    estimation: str = "proposed"
    direction: str = "direct"
    key_basis: str = "z"
    twoway: bool = False
    functions: BlockFunctions | None = None
    noisy: bool = False

    @classmethod
    def parse(cls, text: str) -> "Variant":
        body = text.strip()
        noisy = body.endswith(NOISY_SUFFIX)
        if noisy:
            body = body[: -len(NOISY_SUFFIX)]
        body, _, chi = body.partition("@")
        twoway = body.startswith(TWOWAY_PREFIX)
        if twoway:
            body = body[len(TWOWAY_PREFIX):]
        parts = body.split(":")
        if len(parts) > 4 or not parts[0]:
            raise DomainError(f"cannot parse rate variant {text!r}")
        defaults = ["", "proposed", "direct", "z"]
        protocol, estimation, direction, key_basis = parts + defaults[len(parts):]
        if protocol not in PROTOCOL_BASES:
            raise DomainError(f"unknown protocol {protocol!r} in variant {text!r}")
        if estimation not in ESTIMATIONS or direction not in DIRECTIONS:
            raise DomainError(f"unknown estimation or direction in variant {text!r}")
        if chi and not twoway:
            raise DomainError(f"block functions only apply to two-way variants: {text!r}")
        if twoway and noisy:
            raise DomainError(f"noisy preprocessing is not defined for two-way variants: {text!r}")
        return cls(protocol, estimation, direction, key_basis, twoway,
                   BlockFunctions.parse(chi) if chi else None, noisy)

    def evaluate(self, stokes: StokesParams, settings: Settings = Settings()) -> float:
        choi = stokes_to_choi(stokes)
        if not self.twoway:
            query = RateQuery(choi, self.protocol, self.estimation, self.direction, self.key_basis,
                              optimize_flip=self.noisy)
            return compute_rate(query, settings.grid_step, settings.prescan, settings.xatol).rate
        if self.estimation == "conventional":
            kind = "sixstate-gamma" if self.protocol == "sixstate" else "bb84-upsilon"
            return conventional_twoway(ParameterSlice.of(kind, choi), settings.prescan, settings.xatol).rate
        return rate_twoway(choi, self.protocol, self.direction, self.functions, self.key_basis,
                           settings.prescan, settings.xatol).rate


@dataclass(frozen=True)
class FamilyGrid:
    """Evenly spaced parameter values of one channel family."""

    family: str
    start: float
    stop: float
    steps: int
    angle: float = math.pi / 4

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise DomainError(f"unknown channel family {self.family!r}; expected one of {sorted(FAMILIES)}")
        if self.steps < 2:
            raise DomainError(f"a sweep needs at least 2 steps, got {self.steps}")
        _, lo, hi = FAMILIES[self.family]
        if not (lo <= self.start <= hi and lo <= self.stop <= hi):
            raise DomainError(f"{self.family} parameter range must lie in [{lo}, {hi}]")

    @property
    def param(self) -> str:
        return FAMILIES[self.family][0]

    @property
    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.steps)

    def channel(self, value: float) -> StokesParams:
        params = {self.param: float(value)}
        if self.family == "rotated_depolarizing":
            params["angle"] = self.angle
        return make_channel(self.family, **params)


@dataclass(frozen=True)
class SweepSpec:
    grid: FamilyGrid
    variants: tuple[str, ...]

    def __post_init__(self):
        if not self.variants:
            raise DomainError("a sweep needs at least one rate variant")
        for v in self.variants:
            Variant.parse(v)


@dataclass
class SweepTable:
    param: str
    columns: list[str]
    rows: list[list[float]] = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        i = self.columns.index(name)
        return np.array([row[i] for row in self.rows])

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["param", *self.columns])
        for row in self.rows:
            writer.writerow(["%.12g" % v for v in row])
        return buf.getvalue()

    def to_records(self) -> list[dict]:
        return [dict(zip(["param", *self.columns], row)) for row in self.rows]


def _tabulate(grid: FamilyGrid, curves: list[tuple[str, Callable[[StokesParams], float]]],
              threads: int) -> SweepTable:
    def row(value):
        stokes = grid.channel(value)
        return [float(value)] + [float(curve(stokes)) for _, curve in curves]

    rows = map_in_order(row, grid.values, threads)
    logger.info("tabulated %d curves over %d points", len(curves), len(rows))
    return SweepTable(param=grid.param, columns=[name for name, _ in curves], rows=rows)


def run_sweep(spec: SweepSpec, threads: int = 1, settings: Settings = Settings()) -> SweepTable:
    curves = []
    for text in spec.variants:
        variant = Variant.parse(text)
        curves.append((text, lambda stokes, v=variant: v.evaluate(stokes, settings)))
    return _tabulate(spec.grid, curves, threads)


# --- stock figures ---

def _comparison(field_name: str, protocol: str, settings: Settings) -> Callable[[StokesParams], float]:
    def curve(stokes):
        rates = comparison_rates(stokes_to_choi(stokes), protocol, prescan=settings.prescan, xatol=settings.xatol)
        value = getattr(rates, field_name)
        return max(0.0, value) if value is not None else math.nan
    return curve


@dataclass(frozen=True)
class Figure:
    family: str
    start: float
    stop: float
    curves: tuple[str, ...]

    def curve(self, name: str, settings: Settings) -> Callable[[StokesParams], float]:
        if name.startswith("advantage-distillation-"):
            return _comparison("advantage_distillation", name.rsplit("-", 1)[1], settings)
        if name.startswith("vollbrecht-"):
            return _comparison("vollbrecht", name.rsplit("-", 1)[1], settings)
        variant = Variant.parse(name)
        return lambda stokes: variant.evaluate(stokes, settings)


def _one_way_set(basis: str) -> tuple[str, ...]:
    return (
        f"sixstate:proposed:direct:{basis}",
        f"sixstate:proposed:reverse:{basis}",
        f"bb84:proposed:direct:{basis}",
        f"bb84:proposed:reverse:{basis}",
        f"sixstate:conventional:direct:{basis}+noisy",
        f"bb84:conventional:direct:{basis}+noisy",
    )


FIGURES = {
    "amp-damping-z": Figure("amplitude_damping", 0.0, 1.0, _one_way_set("z")),
    "amp-damping-x": Figure("amplitude_damping", 0.0, 1.0, _one_way_set("x")),
    "depolarizing-sixstate": Figure("depolarizing", 0.0, 0.25, (
        "sixstate:proposed:direct:z",
        "sixstate:proposed:direct:z+noisy",
        "twoway-sixstate:proposed:direct:z",
        "advantage-distillation-sixstate",
        "vollbrecht-sixstate",
    )),
    "depolarizing-bb84": Figure("depolarizing", 0.0, 0.25, (
        "bb84:proposed:direct:z",
        "bb84:proposed:direct:z+noisy",
        "twoway-bb84:proposed:direct:z",
        "twoway-bb84:conventional:direct:z",
        "advantage-distillation-bb84",
        "vollbrecht-bb84",
    )),
    "quarter-rotated-bb84": Figure("rotated_depolarizing", 0.0, 0.25, (
        "bb84:proposed:direct:z",
        "bb84:conventional:direct:z",
        "twoway-bb84:proposed:direct:z",
        "twoway-bb84:conventional:direct:z",
    )),
    "quarter-rotated-sixstate": Figure("rotated_depolarizing", 0.0, 0.25, (
        "sixstate:proposed:direct:z",
        "sixstate:conventional:direct:z",
        "twoway-sixstate:proposed:direct:z",
        "twoway-sixstate:conventional:direct:z",
    )),
    "amp-damping-twoway": Figure("amplitude_damping", 0.0, 1.0, (
        "sixstate:proposed:reverse:z",
        "twoway-sixstate:proposed:direct:z",
        "twoway-sixstate:proposed:reverse:z",
        "twoway-sixstate:proposed:direct:z@1111/0110",
        "twoway-sixstate:proposed:reverse:z@1111/0110",
    )),
}


def run_figure(name: str, points: int = 200, threads: int = 1, settings: Settings = Settings()) -> SweepTable:
    """Rate curves of a stock figure over an evenly spaced parameter grid."""
    try:
        figure = FIGURES[name]
    except KeyError:
        raise DomainError(f"unknown figure {name!r}; expected one of {sorted(FIGURES)}") from None
    grid = FamilyGrid(figure.family, figure.start, figure.stop, points)
    curves = [(curve_name, figure.curve(curve_name, settings)) for curve_name in figure.curves]
    return _tabulate(grid, curves, threads)
