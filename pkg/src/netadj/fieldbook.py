"""Field-book parsing and compilation into mean reduced observations.

File format (one record per line, '#' starts a comment):

    SIGMA DISTANCE <const_m> <ppm>      optional header overrides
    SIGMA ANGLE <arcseconds>
    STN <id>                            begins an instrument setup
    OBS <target> <D M S>                a round: direction only
    OBS <target> <D M S> <slope_m>      direction + slope distance (horizontal)
    OBS <target> <D M S> <slope_m> <D M S>
                                        direction + slope + zenith angle

D-M-S fields are three whitespace-separated numbers.  Directions are
normalized to [0, 360); zeniths must lie strictly inside (0, 180) and
reduce slope distances to horizontal via l = s * sin(zenith).

Compilation means repeated rounds per target (directions circularly,
distances arithmetically), forms angles between consecutive distinct
targets in round order, and assigns sigmas from the sigma policy divided
by sqrt(rounds meaned).  The compiled dataset lists all angles first
(setup order), then all distances (setup order), which is the layout the
solver's coefficient matrix follows.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

from .equations import TWO_PI, normalize_angle
from .errors import EmptySetup, NonpositiveDistance, ParseError, UnitError

ARCSEC = math.pi / (180.0 * 3600.0)


@dataclass
class Round:
    """One pointing from a setup: direction and optional slope/zenith."""

    target_id: str
    direction: float  # radians in [0, 2*pi)
    slope_distance: float | None = None  # metres
    zenith: float | None = None  # radians in (0, pi)


@dataclass
class StationSetup:
    station_id: str
    rounds: list[Round] = field(default_factory=list)


@dataclass
class SigmaPolicy:
    """A-priori observation standard deviations.

    Distances: constant + ppm term, in metres.  Angles: arc-seconds.
    """

    distance_const: float = 0.003
    distance_ppm: float = 2.0
    angle_seconds: float = 5.0

    def distance_sigma(self, length: float) -> float:
        return self.distance_const + self.distance_ppm * 1e-6 * length

    def angle_sigma(self) -> float:
        return self.angle_seconds * ARCSEC


@dataclass
class FieldBook:
    setups: list[StationSetup] = field(default_factory=list)
    sigma_policy: SigmaPolicy | None = None  # header overrides, if any


@dataclass(frozen=True)
class CompiledObservation:
    """One mean reduced observation.

    kind 'distance': at -> from_target leg, value metres, no to_target.
    kind 'angle': at vertex, from_target backsight, to_target foresight,
    value radians in [0, 2*pi).  sigma shares the value's unit.
    """

    kind: str
    at: str
    from_target: str
    to_target: str | None
    value: float
    sigma: float

    @property
    def tag(self) -> str:
        if self.kind == "angle":
            return f"{self.from_target}-{self.at}-{self.to_target}"
        return f"{self.at}-{self.from_target}"


@dataclass
class DataSet:
    observations: list[CompiledObservation] = field(default_factory=list)

    @property
    def stations(self) -> set[str]:
        names: set[str] = set()
        for obs in self.observations:
            names.add(obs.at)
            names.add(obs.from_target)
            if obs.to_target is not None:
                names.add(obs.to_target)
        return names

    def distances(self) -> list[CompiledObservation]:
        return [o for o in self.observations if o.kind == "distance"]

    def angles(self) -> list[CompiledObservation]:
        return [o for o in self.observations if o.kind == "angle"]


def dms_to_radians(deg: float, minutes: float, seconds: float) -> float:
    return math.radians(deg + minutes / 60.0 + seconds / 3600.0)


def radians_to_dms(angle: float) -> tuple[int, int, float]:
    total = math.degrees(angle)
    deg = int(total)
    rem = (total - deg) * 60.0
    minutes = int(rem)
    seconds = (rem - minutes) * 60.0
    return deg, minutes, seconds


def _parse_dms(tokens: list[str], line_no: int, what: str) -> float:
    try:
        d, m, s = (float(t) for t in tokens)
    except ValueError:
        raise ParseError(f"non-numeric {what} field {tokens!r}", line_no) from None
    return dms_to_radians(d, m, s)


def parse_fieldbook(source) -> FieldBook:
    """Parse field-book text (a string or a readable stream) into a FieldBook."""
    if hasattr(source, "read"):
        text = source.read()
    else:
        text = source
    book = FieldBook()
    current: StationSetup | None = None

    for line_no, raw in enumerate(io.StringIO(text), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        keyword = tokens[0].upper()

        if keyword == "SIGMA":
            if current is not None:
                raise ParseError("SIGMA overrides must precede the first STN", line_no)
            if book.sigma_policy is None:
                book.sigma_policy = SigmaPolicy()
            if len(tokens) == 4 and tokens[1].upper() == "DISTANCE":
                try:
                    book.sigma_policy.distance_const = float(tokens[2])
                    book.sigma_policy.distance_ppm = float(tokens[3])
                except ValueError:
                    raise ParseError("non-numeric SIGMA DISTANCE values", line_no) from None
            elif len(tokens) == 3 and tokens[1].upper() == "ANGLE":
                try:
                    book.sigma_policy.angle_seconds = float(tokens[2])
                except ValueError:
                    raise ParseError("non-numeric SIGMA ANGLE value", line_no) from None
            else:
                raise ParseError(f"malformed SIGMA record {line!r}", line_no)

        elif keyword == "STN":
            if len(tokens) != 2:
                raise ParseError(f"malformed STN record {line!r}", line_no)
            if current is not None and not current.rounds:
                raise ParseError(f"setup {current.station_id!r} has no rounds", line_no)
            current = StationSetup(station_id=tokens[1])
            book.setups.append(current)

        elif keyword == "OBS":
            if current is None:
                raise ParseError("OBS record before any STN", line_no)
            if len(tokens) not in (5, 6, 9):
                raise ParseError(f"malformed OBS record {line!r}", line_no)
            target = tokens[1]
            direction = normalize_angle(_parse_dms(tokens[2:5], line_no, "direction"))
            slope = None
            zenith = None
            if len(tokens) >= 6:
                try:
                    slope = float(tokens[5])
                except ValueError:
                    raise ParseError(f"non-numeric slope distance {tokens[5]!r}", line_no) from None
                if slope <= 0.0:
                    raise ParseError(f"slope distance must be positive, got {slope}", line_no)
            if len(tokens) == 9:
                zenith = _parse_dms(tokens[6:9], line_no, "zenith")
                if not 0.0 < zenith < math.pi:
                    raise UnitError(
                        f"zenith {math.degrees(zenith):.4f} deg outside (0, 180)", line_no
                    )
            current.rounds.append(
                Round(target_id=target, direction=direction,
                      slope_distance=slope, zenith=zenith)
            )

        else:
            raise ParseError(f"unknown record keyword {tokens[0]!r}", line_no)

    if current is not None and not current.rounds:
        raise ParseError(f"setup {current.station_id!r} has no rounds")
    if not any(setup.rounds for setup in book.setups):
        raise ParseError("field book contains no rounds")
    return book


def _circular_mean(values: list[float], weights: list[float] | None = None) -> float:
    if weights is None:
        weights = [1.0] * len(values)
    sin_sum = sum(w * math.sin(v) for v, w in zip(values, weights))
    cos_sum = sum(w * math.cos(v) for v, w in zip(values, weights))
    return math.atan2(sin_sum, cos_sum) % TWO_PI


def _reduce_horizontal(rnd: Round) -> float | None:
    if rnd.slope_distance is None:
        return None
    if rnd.zenith is None:
        horizontal = rnd.slope_distance
    else:
        horizontal = rnd.slope_distance * math.sin(rnd.zenith)
    if horizontal <= 0.0:
        raise NonpositiveDistance(
            f"reduction of slope {rnd.slope_distance} to target "
            f"{rnd.target_id!r} yields {horizontal}"
        )
    return horizontal


def compile(fieldbook: FieldBook, sigma_policy: SigmaPolicy | None = None) -> DataSet:
    """Compile a field book into a dataset of mean reduced observations.

    Precedence for sigmas: explicit argument, then the field book's header
    overrides, then the policy defaults.  Duplicate observations arising
    from repeated occupations are merged by round-count-weighted means and
    their sigma divided by sqrt(total rounds).
    """
    policy = sigma_policy or fieldbook.sigma_policy or SigmaPolicy()

    # accumulated per (kind, at, from, to): list of (value, rounds)
    angle_acc: dict[tuple[str, str, str], list[tuple[float, int]]] = {}
    angle_order: list[tuple[str, str, str]] = []
    dist_acc: dict[tuple[str, str], list[tuple[float, int]]] = {}
    dist_order: list[tuple[str, str]] = []

    for setup in fieldbook.setups:
        if not setup.rounds:
            raise EmptySetup(f"setup {setup.station_id!r} has no rounds")
        targets: list[str] = []
        directions: dict[str, list[float]] = {}
        lengths: dict[str, list[float]] = {}
        for rnd in setup.rounds:
            if rnd.target_id not in directions:
                targets.append(rnd.target_id)
                directions[rnd.target_id] = []
                lengths[rnd.target_id] = []
            directions[rnd.target_id].append(rnd.direction)
            horizontal = _reduce_horizontal(rnd)
            if horizontal is not None:
                lengths[rnd.target_id].append(horizontal)

        mean_dir = {t: _circular_mean(directions[t]) for t in targets}
        produced = 0

        for back, fore in zip(targets, targets[1:]):
            value = normalize_angle(mean_dir[fore] - mean_dir[back])
            rounds = min(len(directions[back]), len(directions[fore]))
            key = (setup.station_id, back, fore)
            if key not in angle_acc:
                angle_acc[key] = []
                angle_order.append(key)
            angle_acc[key].append((value, rounds))
            produced += 1

        for target in targets:
            if not lengths[target]:
                continue
            value = sum(lengths[target]) / len(lengths[target])
            key = (setup.station_id, target)
            if key not in dist_acc:
                dist_acc[key] = []
                dist_order.append(key)
            dist_acc[key].append((value, len(lengths[target])))
            produced += 1

        if produced == 0:
            raise EmptySetup(
                f"setup {setup.station_id!r} yields no observations "
                "(single target, no distance)"
            )

    observations: list[CompiledObservation] = []
    for at, back, fore in angle_order:
        entries = angle_acc[(at, back, fore)]
        total_rounds = sum(k for _, k in entries)
        value = _circular_mean([v for v, _ in entries], [float(k) for _, k in entries])
        sigma = policy.angle_sigma() / math.sqrt(total_rounds)
        observations.append(
            CompiledObservation(kind="angle", at=at, from_target=back,
                                to_target=fore, value=value, sigma=sigma)
        )
    for at, target in dist_order:
        entries = dist_acc[(at, target)]
        total_rounds = sum(k for _, k in entries)
        value = sum(v * k for v, k in entries) / total_rounds
        sigma = policy.distance_sigma(value) / math.sqrt(total_rounds)
        observations.append(
            CompiledObservation(kind="distance", at=at, from_target=target,
                                to_target=None, value=value, sigma=sigma)
        )
    return DataSet(observations=observations)


def dataset_to_json_rows(dataset: DataSet) -> list[dict]:
    """JSON-friendly rows; angles (value and sigma) in decimal degrees for audit."""
    rows = []
    for obs in dataset.observations:
        if obs.kind == "angle":
            value = math.degrees(obs.value)
            sigma = math.degrees(obs.sigma)
        else:
            value = obs.value
            sigma = obs.sigma
        rows.append(
            {
                "kind": obs.kind,
                "at": obs.at,
                "from": obs.from_target,
                "to": obs.to_target,
                "value": value,
                "sigma": sigma,
            }
        )
    return rows


def dataset_from_json_rows(rows: list[dict]) -> DataSet:
    observations = []
    for row in rows:
        if row["kind"] == "angle":
            value = math.radians(row["value"])
            sigma = math.radians(row["sigma"])
        else:
            value = row["value"]
            sigma = row["sigma"]
        observations.append(
            CompiledObservation(kind=row["kind"], at=row["at"], from_target=row["from"],
                                to_target=row.get("to"), value=value, sigma=sigma)
        )
    return DataSet(observations=observations)


def _format_dms(angle: float) -> str:
    deg, minutes, seconds = radians_to_dms(normalize_angle(angle))
    return f"{deg} {minutes} {seconds:.9f}"


def dataset_to_fieldbook_text(dataset: DataSet) -> str:
    """Re-serialize a compiled dataset as a one-round field book.

    Each observation becomes its own setup block (repeated occupation is
    allowed): an angle as a zero backsight plus a foresight at the angle
    value, a distance as a single round carrying the length.  Compiling
    the result reproduces the dataset (compilation is idempotent).
    """
    lines = []
    ordered = [o for o in dataset.observations if o.kind == "angle"]
    ordered += [o for o in dataset.observations if o.kind == "distance"]
    for obs in ordered:
        lines.append(f"STN {obs.at}")
        if obs.kind == "angle":
            lines.append(f"OBS {obs.from_target} 0 0 0")
            lines.append(f"OBS {obs.to_target} {_format_dms(obs.value)}")
        else:
            lines.append(f"OBS {obs.from_target} 0 0 0 {obs.value:.12f}")
    return "\n".join(lines) + "\n"
