"""Observation geometry and single observation-equation rows.

Bearings are measured clockwise from grid north, so a bearing is
atan2(dE, dN) normalized to [0, 2*pi).  For a leg of bearing theta and
horizontal length l the linearized observables use

    p = cos(theta) / l      q = sin(theta) / l      (1/metres)
    r = sin(theta)          s = cos(theta)          (unitless)

A distance row for a leg A->B is

    v = r*(dE_B - dE_A) + s*(dN_B - dN_A) - dl

and an angle row for the angle at A from backsight B to foresight C is

    v = (p_AB - p_AC)*dE_A + (q_AC - q_AB)*dN_A
        - p_AB*dE_B + q_AB*dN_B + p_AC*dE_C - q_AC*dN_C - dtheta

with fixed stations' differential terms struck out.  Unknowns are laid
out two columns per free station: dE at 2*index - 1, dN at 2*index
(1-based), stations indexed in sorted id order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Mapping

from .errors import CoincidentStations, FixedOrUnknownStation, MissingCoordinates

if TYPE_CHECKING:
    from .fieldbook import CompiledObservation

TWO_PI = 2.0 * math.pi


def normalize_angle(angle: float) -> float:
    """Wrap an angle into [0, 2*pi)."""
    return angle % TWO_PI


def normalize_signed(angle: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    a = angle % TWO_PI
    if a > math.pi:
        a -= TWO_PI
    return a


@dataclass(frozen=True)
class Coordinates:
    """Plane coordinates in metres."""

    easting: float
    northing: float


def bearing(frm: Coordinates, to: Coordinates) -> float:
    """Full-circle bearing of `to` from `frm`, clockwise from north, in [0, 2*pi)."""
    de = to.easting - frm.easting
    dn = to.northing - frm.northing
    if de == 0.0 and dn == 0.0:
        raise CoincidentStations("bearing undefined for coincident positions")
    return math.atan2(de, dn) % TWO_PI


def distance(frm: Coordinates, to: Coordinates) -> float:
    """Euclidean leg length in metres (overflow-safe)."""
    return math.hypot(to.easting - frm.easting, to.northing - frm.northing)


@dataclass(frozen=True)
class PolarElements:
    """Bearing, length and the four linearization coefficients of a leg."""

    bearing: float
    length: float
    p: float  # cos(theta)/l, 1/m
    q: float  # sin(theta)/l, 1/m
    r: float  # sin(theta)
    s: float  # cos(theta)


def polar_elements(frm: Coordinates, to: Coordinates) -> PolarElements:
    theta = bearing(frm, to)
    length = distance(frm, to)
    sin_t = math.sin(theta)
    cos_t = math.cos(theta)
    return PolarElements(
        bearing=theta,
        length=length,
        p=cos_t / length,
        q=sin_t / length,
        r=sin_t,
        s=cos_t,
    )


@dataclass
class StationIndex:
    """1-based index of free stations; dE column = 2i-1, dN column = 2i."""

    order: list[str]
    index_of: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.index_of:
            self.index_of = {name: i + 1 for i, name in enumerate(self.order)}

    @classmethod
    def from_free(cls, stations: Iterable[str]) -> "StationIndex":
        return cls(order=sorted(stations))

    @property
    def parameter_count(self) -> int:
        return 2 * len(self.order)

    def __contains__(self, station: str) -> bool:
        return station in self.index_of


def column_of(index: StationIndex, station: str, component: str) -> int:
    """1-based coefficient-matrix column of a free station's dE or dN."""
    if station not in index.index_of:
        raise FixedOrUnknownStation(f"station {station!r} carries no unknowns")
    if component not in ("dE", "dN"):
        raise ValueError(f"component must be 'dE' or 'dN', got {component!r}")
    i = index.index_of[station]
    return 2 * i - 1 if component == "dE" else 2 * i


@dataclass
class EquationRow:
    """One observation equation: sparse coefficients, right-hand side and weight."""

    entries: dict[int, float]
    rhs: float
    weight: float
    kind: str
    tag: str


def _coords_of(coords: Mapping[str, Coordinates], station: str) -> Coordinates:
    try:
        return coords[station]
    except KeyError:
        raise MissingCoordinates(f"no coordinates for station {station!r}") from None


def _put(entries: dict[int, float], index: StationIndex, station: str,
         de_coef: float, dn_coef: float) -> None:
    # fixed stations: differential terms are dropped (dE = dN = 0)
    if station not in index.index_of:
        return
    i = index.index_of[station]
    entries[2 * i - 1] = entries.get(2 * i - 1, 0.0) + de_coef
    entries[2 * i] = entries.get(2 * i, 0.0) + dn_coef


def distance_row(obs: "CompiledObservation", coords: Mapping[str, Coordinates],
                 index: StationIndex, sigma0_sq: float = 1.0) -> EquationRow:
    """Build the linearized row for a distance observation from `at` to `from_target`."""
    at = _coords_of(coords, obs.at)
    far = _coords_of(coords, obs.from_target)
    pe = polar_elements(at, far)
    entries: dict[int, float] = {}
    _put(entries, index, obs.at, -pe.r, -pe.s)
    _put(entries, index, obs.from_target, pe.r, pe.s)
    return EquationRow(
        entries=entries,
        rhs=obs.value - pe.length,
        weight=sigma0_sq / obs.sigma**2,
        kind="distance",
        tag=f"{obs.at}-{obs.from_target}",
    )


def angle_row(obs: "CompiledObservation", coords: Mapping[str, Coordinates],
              index: StationIndex, sigma0_sq: float = 1.0) -> EquationRow:
    """Build the linearized row for the angle at `at` from `from_target` to `to_target`.

    The right-hand side is observed minus computed, wrapped into (-pi, pi]
    so a 2*pi crossing cannot corrupt the equation.
    """
    if obs.from_target == obs.to_target:
        raise CoincidentStations("angle backsight equals foresight")
    vertex = _coords_of(coords, obs.at)
    back = _coords_of(coords, obs.from_target)
    fore = _coords_of(coords, obs.to_target)
    pe_b = polar_elements(vertex, back)
    pe_f = polar_elements(vertex, fore)
    computed = normalize_angle(pe_f.bearing - pe_b.bearing)
    entries: dict[int, float] = {}
    _put(entries, index, obs.at, pe_b.p - pe_f.p, pe_f.q - pe_b.q)
    _put(entries, index, obs.from_target, -pe_b.p, pe_b.q)
    _put(entries, index, obs.to_target, pe_f.p, -pe_f.q)
    return EquationRow(
        entries=entries,
        rhs=normalize_signed(obs.value - computed),
        weight=sigma0_sq / obs.sigma**2,
        kind="angle",
        tag=f"{obs.from_target}-{obs.at}-{obs.to_target}",
    )
