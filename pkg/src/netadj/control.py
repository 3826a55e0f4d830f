"""Control point register, station classification and datum re-listing.

The control database is a CSV register `id,datum,easting,northing,height`
(height optional).  Classification intersects the dataset's stations with
the register for the working datum; everything else is free.  Results can
be listed in another datum through a planar 4-parameter similarity
transform estimated from common points by least squares.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Mapping

import numpy as np

from .equations import Coordinates
from .errors import (
    DegenerateGeometry,
    DuplicateControlPoint,
    InsufficientOverlap,
    NoFixedStationsWarning,
    SingularNormalMatrix,
    UnknownDatum,
)

if TYPE_CHECKING:
    from .adjust import AdjustmentResult
    from .fieldbook import DataSet


@dataclass(frozen=True)
class ControlPoint:
    id: str
    datum: str
    easting: float
    northing: float
    height: float | None = None


class ControlDatabase:
    """Immutable register of known points, unique per (id, datum)."""

    def __init__(self, points: Iterable[ControlPoint]):
        self.points: list[ControlPoint] = []
        self._by_key: dict[tuple[str, str], ControlPoint] = {}
        for point in points:
            key = (point.id, point.datum)
            if key in self._by_key:
                raise DuplicateControlPoint(
                    f"duplicate control point {point.id!r} in datum {point.datum!r}"
                )
            self._by_key[key] = point
            self.points.append(point)

    @property
    def datums(self) -> set[str]:
        return {p.datum for p in self.points}

    def ids_in(self, datum: str) -> set[str]:
        return {p.id for p in self.points if p.datum == datum}

    def coordinates_in(self, datum: str) -> dict[str, Coordinates]:
        return {
            p.id: Coordinates(p.easting, p.northing)
            for p in self.points
            if p.datum == datum
        }

    def heights_in(self, datum: str) -> dict[str, float]:
        return {
            p.id: p.height
            for p in self.points
            if p.datum == datum and p.height is not None
        }

    @classmethod
    def load(cls, source) -> "ControlDatabase":
        """Load from CSV text or a readable stream with the standard header."""
        if hasattr(source, "read"):
            text = source.read()
        else:
            text = source
        reader = csv.DictReader(io.StringIO(text))
        points = []
        for row in reader:
            height = row.get("height")
            points.append(
                ControlPoint(
                    id=row["id"].strip(),
                    datum=row["datum"].strip(),
                    easting=float(row["easting"]),
                    northing=float(row["northing"]),
                    height=float(height) if height not in (None, "") else None,
                )
            )
        return cls(points)

    def dump(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out)
        writer.writerow(["id", "datum", "easting", "northing", "height"])
        for p in self.points:
            writer.writerow(
                [p.id, p.datum, f"{p.easting:.4f}", f"{p.northing:.4f}",
                 "" if p.height is None else f"{p.height:.4f}"]
            )
        return out.getvalue()


@dataclass
class StationClassification:
    """Fixed/free partition of a dataset's stations."""

    fixed: set[str]
    free: set[str]


def scan_stations(dataset: "DataSet", db: ControlDatabase,
                  datum: str) -> StationClassification:
    """Classify dataset stations by intersection with the control register.

    Emits a NoFixedStationsWarning when the intersection is empty (the
    network would be datum-free).
    """
    if datum not in db.datums:
        raise UnknownDatum(f"datum {datum!r} has no control points")
    stations = dataset.stations
    fixed = stations & db.ids_in(datum)
    if not fixed:
        warnings.warn(
            f"no dataset station appears in datum {datum!r}; network is datum-free",
            NoFixedStationsWarning,
            stacklevel=2,
        )
    return StationClassification(fixed=fixed, free=stations - fixed)


@dataclass(frozen=True)
class SimilarityTransform:
    """Planar 4-parameter similarity: scale, rotation and two translations."""

    scale: float
    rotation: float
    translate_e: float
    translate_n: float
    rms_fit: float = 0.0

    @classmethod
    def identity(cls) -> "SimilarityTransform":
        return cls(scale=1.0, rotation=0.0, translate_e=0.0, translate_n=0.0)

    def apply(self, point: Coordinates) -> Coordinates:
        a = self.scale * math.cos(self.rotation)
        b = self.scale * math.sin(self.rotation)
        return Coordinates(
            self.translate_e + a * point.easting - b * point.northing,
            self.translate_n + b * point.easting + a * point.northing,
        )

    def inverted(self) -> "SimilarityTransform":
        a = self.scale * math.cos(self.rotation)
        b = self.scale * math.sin(self.rotation)
        s_sq = a * a + b * b
        inv_a = a / s_sq
        inv_b = -b / s_sq
        return SimilarityTransform(
            scale=1.0 / self.scale,
            rotation=-self.rotation,
            translate_e=-(inv_a * self.translate_e - inv_b * self.translate_n),
            translate_n=-(inv_b * self.translate_e + inv_a * self.translate_n),
            rms_fit=self.rms_fit / self.scale,
        )


def estimate_datum_transform(db: ControlDatabase, from_datum: str,
                             to_datum: str) -> SimilarityTransform:
    """Least-squares similarity between two datums from their common points.

    Uses the linear parameterization E' = tE + a*E - b*N,
    N' = tN + b*E + a*N with a = s*cos(alpha), b = s*sin(alpha); rms_fit is
    the root-mean-square residual over the common points.
    """
    source = db.coordinates_in(from_datum)
    target = db.coordinates_in(to_datum)
    common = sorted(set(source) & set(target))
    if len(common) < 2:
        raise InsufficientOverlap(
            f"need >= 2 common points between {from_datum!r} and {to_datum!r}, "
            f"found {len(common)}"
        )
    k = len(common)
    a_mat = np.zeros((2 * k, 4))
    b_vec = np.zeros(2 * k)
    for i, name in enumerate(common):
        s = source[name]
        t = target[name]
        a_mat[2 * i] = [1.0, 0.0, s.easting, -s.northing]
        b_vec[2 * i] = t.easting
        a_mat[2 * i + 1] = [0.0, 1.0, s.northing, s.easting]
        b_vec[2 * i + 1] = t.northing

    # unit-weight normal equations; singular only for coincident sources
    from .adjust import DesignSystem, solve_normal

    system = DesignSystem(a_matrix=a_mat, b_vector=b_vec, w_matrix=np.eye(2 * k))
    try:
        te, tn, a, b = solve_normal(system)
    except SingularNormalMatrix as exc:
        raise DegenerateGeometry(
            f"common points are coincident between {from_datum!r} and {to_datum!r}"
        ) from exc
    scale = math.hypot(a, b)
    if scale <= 0.0:
        raise DegenerateGeometry("estimated scale is zero")
    v = a_mat @ np.array([te, tn, a, b]) - b_vec
    rms = math.sqrt(float(v @ v) / k)
    return SimilarityTransform(
        scale=scale, rotation=math.atan2(b, a),
        translate_e=te, translate_n=tn, rms_fit=rms,
    )


@dataclass(frozen=True)
class ListingRow:
    number: int
    station: str
    easting: float
    northing: float
    height: float | None = None


def list_in_datum(results: "AdjustmentResult", transform: SimilarityTransform,
                  heights: Mapping[str, float] | None = None) -> list[ListingRow]:
    """Map every adjusted and fixed station through the transform.

    Rows come out alphabetically by station id; heights (when supplied)
    pass through untransformed.
    """
    heights = heights or {}
    rows = []
    for number, station in enumerate(sorted(results.coordinates), start=1):
        mapped = transform.apply(results.coordinates[station])
        rows.append(
            ListingRow(
                number=number,
                station=station,
                easting=mapped.easting,
                northing=mapped.northing,
                height=heights.get(station),
            )
        )
    return rows


def format_listing(rows: list[ListingRow], datum: str | None = None) -> str:
    """Fixed-width results list: Nos, Station, Easting, Northing, Height (4 dp)."""
    lines = []
    if datum is not None:
        lines.append(f"Datum: {datum}")
    lines.append(f"{'Nos':>4} {'Station':<10} {'Easting':>13} {'Northing':>13} {'Height':>10}")
    for row in rows:
        height = f"{row.height:.4f}" if row.height is not None else ""
        lines.append(
            f"{row.number:>4} {row.station:<10} {row.easting:>13.4f} "
            f"{row.northing:>13.4f} {height:>10}"
        )
    return "\n".join(lines) + "\n"
