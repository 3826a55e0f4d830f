"""Synthetic networks and field books for tests and demos.

The flagship fixture is a traverse between two pairs of control stations:
P, Q near the start, R, S at the far end, with free stations A, B, C, D
chained between them.  It carries 8 angles and 8 distances over 8 unknown
coordinates.  A smaller six-node loop fixture exercises the spanning-tree
and cycle machinery.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Mapping

import numpy as np

from .control import ControlDatabase, ControlPoint, SimilarityTransform
from .equations import Coordinates, bearing, distance, normalize_angle
from .fieldbook import (
    CompiledObservation,
    DataSet,
    SigmaPolicy,
    radians_to_dms,
)

TRAVERSE_TRUTH: dict[str, Coordinates] = {
    "P": Coordinates(0.0, 0.0),
    "Q": Coordinates(-200.0, 250.0),
    "A": Coordinates(150.0, 80.0),
    "B": Coordinates(400.0, 220.0),
    "C": Coordinates(680.0, 140.0),
    "D": Coordinates(950.0, 260.0),
    "R": Coordinates(1200.0, 180.0),
    "S": Coordinates(1150.0, 520.0),
}

TRAVERSE_FIXED = ("P", "Q", "R", "S")
TRAVERSE_FREE = ("A", "B", "C", "D")

# setup -> (target chain, targets carrying distances)
TRAVERSE_PLAN: list[tuple[str, list[str], set[str]]] = [
    ("A", ["Q", "P", "B"], {"Q", "P", "B"}),
    ("B", ["A", "C", "D"], {"C", "D"}),
    ("C", ["B", "D"], {"D"}),
    ("D", ["C", "R", "S", "B"], {"R", "S"}),
]

DEFAULT_POLICY = SigmaPolicy()


def traverse_dataset(rng: np.random.Generator | None = None,
                     policy: SigmaPolicy = DEFAULT_POLICY,
                     truth: Mapping[str, Coordinates] = TRAVERSE_TRUTH) -> DataSet:
    """Compiled observations of the traverse fixture, optionally noisy.

    With an rng, every value is perturbed by zero-mean gaussian noise of
    exactly its assigned sigma, so the dataset's stochastic model matches
    the generating process.
    """
    observations: list[CompiledObservation] = []
    for at, chain, _ in TRAVERSE_PLAN:
        for back, fore in zip(chain, chain[1:]):
            value = normalize_angle(
                bearing(truth[at], truth[fore]) - bearing(truth[at], truth[back])
            )
            sigma = policy.angle_sigma()
            if rng is not None:
                value = normalize_angle(value + rng.normal(0.0, sigma))
            observations.append(
                CompiledObservation(kind="angle", at=at, from_target=back,
                                    to_target=fore, value=value, sigma=sigma)
            )
    for at, chain, measured in TRAVERSE_PLAN:
        for target in chain:
            if target not in measured:
                continue
            value = distance(truth[at], truth[target])
            sigma = policy.distance_sigma(value)
            if rng is not None:
                value += rng.normal(0.0, sigma)
            observations.append(
                CompiledObservation(kind="distance", at=at, from_target=target,
                                    to_target=None, value=value, sigma=sigma)
            )
    return DataSet(observations=observations)


def traverse_controls(datum: str = "LOCAL",
                      second_datum: str | None = "NATIONAL",
                      transform: SimilarityTransform | None = None) -> ControlDatabase:
    """Control register for the traverse fixture, optionally in two datums."""
    if transform is None:
        transform = SimilarityTransform(
            scale=1.0000165, rotation=math.radians(0.75),
            translate_e=12000.0, translate_n=7000.0,
        )
    heights = {"P": 100.12, "Q": 101.45, "R": 99.87, "S": 102.33}
    points = [
        ControlPoint(name, datum, TRAVERSE_TRUTH[name].easting,
                     TRAVERSE_TRUTH[name].northing, heights[name])
        for name in TRAVERSE_FIXED
    ]
    if second_datum is not None:
        for name in TRAVERSE_FIXED:
            mapped = transform.apply(TRAVERSE_TRUTH[name])
            points.append(
                ControlPoint(name, second_datum, mapped.easting,
                             mapped.northing, heights[name])
            )
    return ControlDatabase(points)


def _dms_text(angle: float, seconds_format: str = "{:.6f}") -> str:
    deg, minutes, seconds = radians_to_dms(normalize_angle(angle))
    return f"{deg} {minutes} " + seconds_format.format(seconds)


def traverse_fieldbook_text(rng: np.random.Generator | None = None,
                            policy: SigmaPolicy = DEFAULT_POLICY,
                            rounds: int = 1) -> str:
    """Raw field-book text for the traverse fixture.

    Directions take noise of angle_sigma/sqrt(2) so compiled angles
    (direction differences) carry the policy's angle sigma.  Two legs are
    written as slope distance + zenith to exercise horizontal reduction.
    """
    slope_zeniths = {("A", "B"): math.radians(85.0), ("B", "C"): math.radians(93.5)}
    dir_sigma = policy.angle_sigma() / math.sqrt(2.0)
    lines = [
        "# synthetic traverse fixture",
        f"SIGMA DISTANCE {policy.distance_const} {policy.distance_ppm}",
        f"SIGMA ANGLE {policy.angle_seconds}",
    ]
    for at, chain, measured in TRAVERSE_PLAN:
        lines.append(f"STN {at}")
        for _ in range(rounds):
            for target in chain:
                direction = bearing(TRAVERSE_TRUTH[at], TRAVERSE_TRUTH[target])
                if rng is not None:
                    direction = normalize_angle(direction + rng.normal(0.0, dir_sigma))
                entry = f"OBS {target} {_dms_text(direction)}"
                if target in measured:
                    horizontal = distance(TRAVERSE_TRUTH[at], TRAVERSE_TRUTH[target])
                    if rng is not None:
                        horizontal += rng.normal(0.0, policy.distance_sigma(horizontal))
                    zenith = slope_zeniths.get((at, target))
                    if zenith is None:
                        entry += f" {horizontal:.6f}"
                    else:
                        slope = horizontal / math.sin(zenith)
                        entry += f" {slope:.6f} {_dms_text(zenith, '{:.4f}')}"
                lines.append(entry)
    return "\n".join(lines) + "\n"


def loop_survey_dataset() -> DataSet:
    """Six-node loop survey: a run X-A-B-Y with check sights to C and D.

    Ten observed legs in survey order; lengths are nominal (the fixture
    exists for graph analysis, not adjustment).
    """
    legs = [
        ("X", "A"), ("A", "B"), ("B", "Y"), ("X", "B"), ("B", "C"),
        ("A", "C"), ("D", "C"), ("Y", "X"), ("Y", "C"), ("Y", "D"),
    ]
    return DataSet(
        observations=[
            CompiledObservation(kind="distance", at=u, from_target=v,
                                to_target=None, value=100.0, sigma=0.01)
            for u, v in legs
        ]
    )


def square_dataset(blunder_leg: tuple[str, str] | None = None,
                   blunder: float = 0.0) -> tuple[DataSet, dict[str, Coordinates]]:
    """Closed four-leg loop with exact distances, optionally one planted blunder."""
    coords = {
        "A": Coordinates(0.0, 0.0),
        "B": Coordinates(120.0, 10.0),
        "C": Coordinates(130.0, 130.0),
        "D": Coordinates(5.0, 120.0),
    }
    legs = [("A", "B"), ("B", "C"), ("C", "D"), ("D", "A")]
    observations = []
    for u, v in legs:
        value = distance(coords[u], coords[v])
        if blunder_leg is not None and frozenset((u, v)) == frozenset(blunder_leg):
            value += blunder
        observations.append(
            CompiledObservation(kind="distance", at=u, from_target=v,
                                to_target=None, value=value, sigma=0.003)
        )
    return DataSet(observations=observations), coords


def write_fixture(directory: str | Path, seed: int | None = None) -> dict[str, Path]:
    """Write fieldbook.txt and controls.csv for the traverse fixture.

    Without a seed the observations are exact; with one they carry noise
    at the default sigma policy.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed) if seed is not None else None
    fieldbook_path = directory / "fieldbook.txt"
    controls_path = directory / "controls.csv"
    fieldbook_path.write_text(traverse_fieldbook_text(rng))
    controls_path.write_text(traverse_controls().dump())
    return {"fieldbook": fieldbook_path, "controls": controls_path}
