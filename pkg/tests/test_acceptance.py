"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines alongside pytest's own verdicts.
"""

import json
import math
import time

import numpy as np
import pytest

from netadj import synthetic
from netadj.adjust import (
    form_equations,
    iterate_adjustment,
    normal_equations,
    solve_normal,
)
from netadj.cli import main
from netadj.control import (
    ControlDatabase,
    ControlPoint,
    SimilarityTransform,
    StationClassification,
    estimate_datum_transform,
    format_listing,
    list_in_datum,
)
from netadj.equations import (
    Coordinates,
    StationIndex,
    angle_row,
    bearing,
    distance_row,
)
from netadj.fieldbook import CompiledObservation
from netadj.graph import (
    bfs_spanning_tree,
    build_graph,
    cycle_misclosure,
    dfs_spanning_tree,
    fundamental_cycles,
)
from netadj.regress import fit_basis, fit_simple_line, linearize_fit

from oracles import (
    TRAVERSE_PATTERN,
    angle_fn,
    central_difference,
    central_difference_angular,
    distance_fn,
    grid_minimize,
    weighted_objective,
)

TRUTH = synthetic.TRAVERSE_TRUTH
CLASSIFICATION = StationClassification(
    fixed=set(synthetic.TRAVERSE_FIXED), free=set(synthetic.TRAVERSE_FREE)
)
FIXED_COORDS = {s: TRUTH[s] for s in synthetic.TRAVERSE_FIXED}


def announce(number, text):
    print(f"PASS  criterion {number:>2}: {text}")


def test_criterion_01_coefficient_table_structure():
    started = time.perf_counter()
    ds = synthetic.traverse_dataset()
    assert len(ds.angles()) == 8 and len(ds.distances()) == 8
    system = form_equations(ds, CLASSIFICATION, dict(TRUTH))
    assert system.a_matrix.shape == (16, 8)
    for i, tag in enumerate(system.tags):
        nonzero = {j + 1 for j in range(8) if system.a_matrix[i, j] != 0.0}
        assert nonzero == TRAVERSE_PATTERN[tag], f"row {tag} pattern mismatch"
    # station C is third in the index, so its corrections live in columns 5, 6
    assert system.index.index_of["C"] == 3
    row = system.tags.index("B-C-D")
    assert system.a_matrix[row, 4] != 0.0 and system.a_matrix[row, 5] != 0.0
    elapsed = time.perf_counter() - started
    assert elapsed < 1.0
    announce(1, f"16x8 system matches the coefficient-table layout "
                f"cell-for-cell ({elapsed:.3f}s)")


def test_criterion_02_cycle_reproduction():
    started = time.perf_counter()
    g = build_graph(synthetic.loop_survey_dataset())
    dfs_cycles = fundamental_cycles(dfs_spanning_tree(g, "X"))
    expected = {
        frozenset("XAB"), frozenset("ABC"), frozenset("BYC"),
        frozenset("YDC"), frozenset("XBY"),
    }
    assert {c.node_set for c in dfs_cycles} == expected
    bfs_cycles = fundamental_cycles(bfs_spanning_tree(g, "X"))
    assert len(bfs_cycles) == 5
    assert frozenset("XBY") in {c.node_set for c in bfs_cycles}
    elapsed = time.perf_counter() - started
    assert elapsed < 1.0
    announce(2, "DFS yields XABX, ABCA, BYCB, YDCY, XBYX; BFS yields "
                f"5 cycles incl. XBYX ({elapsed:.3f}s)")


def test_criterion_03_solver_matches_brute_force():
    from netadj.adjust import DesignSystem

    rng = np.random.default_rng(321)
    cases = [
        (np.array([[1.0], [1.0]]), np.array([3.0, 4.0]), np.array([2.0, 3.0])),
        (rng.uniform(-2, 2, (5, 2)), rng.uniform(-6, 6, 5), rng.uniform(0.5, 2, 5)),
        (rng.uniform(-2, 2, (8, 3)), rng.uniform(-6, 6, 8), rng.uniform(0.5, 2, 8)),
    ]
    for a, b, w in cases:
        system = DesignSystem(a_matrix=a, b_vector=b, w_matrix=np.diag(w))
        x = solve_normal(system)
        oracle = grid_minimize(weighted_objective(a, b, w), dim=a.shape[1])
        assert np.max(np.abs(x - oracle)) < 1e-6
    announce(3, "solve_normal matches nested-grid minimizer on 3 systems "
                "to 1e-6 per component")


def test_criterion_04_self_consistency():
    ds = synthetic.traverse_dataset()
    perturbed = dict(TRUTH)
    for name in synthetic.TRAVERSE_FREE:
        base = TRUTH[name]
        perturbed[name] = Coordinates(base.easting + 0.5, base.northing - 0.5)
    result = iterate_adjustment(ds, CLASSIFICATION, FIXED_COORDS,
                                provisionals=perturbed)
    assert result.converged and result.iterations <= 3
    assert result.unit_variance < 1e-12
    worst = max(
        max(abs(result.coordinates[n].easting - TRUTH[n].easting),
            abs(result.coordinates[n].northing - TRUTH[n].northing))
        for n in synthetic.TRAVERSE_FREE
    )
    assert worst < 1e-6
    announce(4, f"truth recovered to {worst:.2e} m in {result.iterations} "
                f"iterations, unit variance {result.unit_variance:.2e}")


def test_criterion_05_monte_carlo_covariance():
    started = time.perf_counter()
    exact = synthetic.traverse_dataset()
    system = form_equations(exact, CLASSIFICATION, dict(TRUTH))
    n_mat, _ = normal_equations(system)
    predicted = np.linalg.inv(n_mat)  # a-priori unit variance of 1

    replicates = 500
    seeds = np.random.SeedSequence(20250810).spawn(replicates)
    estimates = np.zeros((replicates, 8))
    unit_variances = np.zeros(replicates)
    for k, seed in enumerate(seeds):
        noisy = synthetic.traverse_dataset(rng=np.random.default_rng(seed))
        result = iterate_adjustment(noisy, CLASSIFICATION, FIXED_COORDS,
                                    provisionals=dict(TRUTH))
        for name, i in result.index.index_of.items():
            estimates[k, 2 * i - 2] = result.coordinates[name].easting
            estimates[k, 2 * i - 1] = result.coordinates[name].northing
        unit_variances[k] = result.unit_variance

    sample = np.cov(estimates.T)
    rel = np.linalg.norm(sample - predicted) / np.linalg.norm(predicted)
    assert rel < 0.15
    mean_uv = float(np.mean(unit_variances))
    assert 0.9 < mean_uv < 1.1
    elapsed = time.perf_counter() - started
    assert elapsed < 30.0
    announce(5, f"500-replicate covariance within {rel:.1%} Frobenius, "
                f"mean unit variance {mean_uv:.3f} ({elapsed:.1f}s)")


def test_criterion_06_jacobian_against_finite_differences():
    rng = np.random.default_rng(606)
    checked = 0
    index3 = StationIndex.from_free({"A", "B", "C"})
    index2 = StationIndex.from_free({"A", "B"})
    while checked < 100:
        pts = rng.uniform(0.0, 1000.0, (3, 2))
        coords = {
            "A": Coordinates(*pts[0]), "B": Coordinates(*pts[1]),
            "C": Coordinates(*pts[2]),
        }
        if min(
            math.hypot(pts[i][0] - pts[j][0], pts[i][1] - pts[j][1])
            for i in range(3) for j in range(i + 1, 3)
        ) < 5.0:
            continue

        obs_d = CompiledObservation("distance", "A", "B", None, 100.0, 0.01)
        row = distance_row(obs_d, coords, index2)
        base = [coords["A"].easting, coords["A"].northing,
                coords["B"].easting, coords["B"].northing]
        for col, i in ((1, 0), (2, 1), (3, 2), (4, 3)):
            fd = central_difference(distance_fn, base, i)
            assert abs(row.entries[col] - fd) <= 1e-6 * abs(fd)

        value = angle_fn([pts[1][0], pts[1][1], pts[0][0], pts[0][1],
                          pts[2][0], pts[2][1]])
        obs_a = CompiledObservation("angle", "B", "A", "C", value, 2.4e-5)
        arow = angle_row(obs_a, coords, index3)
        base6 = [pts[0][0], pts[0][1], pts[1][0], pts[1][1], pts[2][0], pts[2][1]]

        def vertex_angle(values):
            ea, na, eb, nb, ec, nc = values
            return angle_fn([eb, nb, ea, na, ec, nc])

        for col, i in ((1, 0), (2, 1), (3, 2), (4, 3), (5, 4), (6, 5)):
            fd = central_difference_angular(vertex_angle, base6, i)
            assert abs(arow.entries[col] - fd) <= 1e-6 * abs(fd) + 1e-12
        checked += 1
    announce(6, "row coefficients match central differences over "
                "100 random geometries to 1e-6 relative")


def test_criterion_07_misclosure_blunder():
    ds, coords = synthetic.square_dataset(blunder_leg=("A", "B"), blunder=0.010)
    (cycle,) = fundamental_cycles(dfs_spanning_tree(build_graph(ds), "A"))
    de, dn, _ = cycle_misclosure(cycle, ds, coords)
    magnitude = math.hypot(de, dn)
    assert magnitude == pytest.approx(0.010, abs=1e-6)
    theta = bearing(coords["A"], coords["B"])
    assert de == pytest.approx(0.010 * math.sin(theta), abs=1e-6)
    assert dn == pytest.approx(0.010 * math.cos(theta), abs=1e-6)
    announce(7, f"planted 10 mm blunder produces {magnitude * 1000:.6f} mm "
                "misclosure along the blundered leg")


def test_criterion_08_regression_fixtures():
    line = fit_simple_line([(0, 1), (1, 3), (2, 5)])
    assert line.intercept_a == pytest.approx(1.0, abs=1e-12)
    assert line.gradient_b == pytest.approx(2.0, abs=1e-12)
    assert line.std_error_estimate == pytest.approx(0.0, abs=1e-12)

    xs = np.linspace(-2.0, 3.0, 9)
    poly = fit_basis([[1.0, x, x * x] for x in xs],
                     [1.0 + 2.0 * x + 3.0 * x * x for x in xs])
    assert np.max(np.abs(poly.coefficients - [1.0, 2.0, 3.0])) < 1e-12

    alpha, beta = linearize_fit(
        "exponential", [(x, 2.0 * math.exp(0.5 * x)) for x in np.linspace(0, 4, 9)]
    )
    assert alpha == pytest.approx(2.0, abs=1e-9)
    assert beta == pytest.approx(0.5, abs=1e-9)
    alpha, beta = linearize_fit("power", [(x, 3.0 * x**1.5) for x in (1, 2, 4, 8)])
    assert alpha == pytest.approx(3.0, abs=1e-9)
    assert beta == pytest.approx(1.5, abs=1e-9)

    pts = [(0.0, 1.1), (1.0, 2.9), (2.0, 5.2), (3.0, 6.8)]
    from_line = fit_simple_line(pts)
    from_basis = fit_basis([[1.0, x] for x, _ in pts], [y for _, y in pts])
    assert from_basis.coefficients[0] == pytest.approx(from_line.intercept_a, abs=1e-12)
    assert from_basis.coefficients[1] == pytest.approx(from_line.gradient_b, abs=1e-12)
    announce(8, "line/polynomial exact to 1e-12, linearized models round-trip "
                "to 1e-9, basis fit reduces to the simple line")


def test_criterion_09_datum_round_trip():
    true_transform = SimilarityTransform(
        scale=1.5, rotation=math.radians(30.0),
        translate_e=100.0, translate_n=-50.0,
    )
    points = {
        "P1": Coordinates(120.0, 40.0),
        "P2": Coordinates(-80.0, 310.0),
        "P3": Coordinates(400.0, -90.0),
    }
    rows = []
    for name, coord in points.items():
        rows.append(ControlPoint(name, "A", coord.easting, coord.northing))
        mapped = true_transform.apply(coord)
        rows.append(ControlPoint(name, "B", mapped.easting, mapped.northing))
    estimated = estimate_datum_transform(ControlDatabase(rows), "A", "B")
    assert estimated.scale == pytest.approx(1.5, abs=1e-9)
    assert estimated.rotation == pytest.approx(math.radians(30.0), abs=1e-9)
    assert estimated.translate_e == pytest.approx(100.0, abs=1e-9)
    assert estimated.translate_n == pytest.approx(-50.0, abs=1e-9)

    ds = synthetic.traverse_dataset()
    result = iterate_adjustment(ds, CLASSIFICATION, FIXED_COORDS,
                                provisionals=dict(TRUTH))
    there = list_in_datum(result, estimated)
    mapped_result = iterate_adjustment(ds, CLASSIFICATION, FIXED_COORDS,
                                       provisionals=dict(TRUTH))
    mapped_result.coordinates.update(
        {r.station: Coordinates(r.easting, r.northing) for r in there}
    )
    back = list_in_datum(mapped_result, estimated.inverted())
    for row in back:
        original = result.coordinates[row.station]
        assert row.easting == pytest.approx(original.easting, abs=1e-9)
        assert row.northing == pytest.approx(original.northing, abs=1e-9)

    from netadj.adjust import AdjustmentResult

    p1 = AdjustmentResult(
        corrections=np.zeros(2), coordinates={"P1": Coordinates(10379.0710, 5546.7395)},
        residuals=np.zeros(0), unit_variance=None, covariance=None, iterations=1,
        converged=True, redundancy=0, index=StationIndex.from_free(["P1"]),
    )
    listing = format_listing(
        list_in_datum(p1, SimilarityTransform.identity(), heights={"P1": 100.1301}),
        datum="CENTRAL",
    )
    assert "10379.0710" in listing
    assert "5546.7395" in listing
    assert "100.1301" in listing
    announce(9, "similarity recovered to 1e-9, listings round-trip to 1e-9 m, "
                "identity listing renders 10379.0710 / 5546.7395 at 4 dp")


def test_criterion_10_deterministic_reports(tmp_path):
    fixture_dir = tmp_path / "fixture"
    synthetic.write_fixture(fixture_dir, seed=11)
    outputs = []
    for run in ("one", "two"):
        outdir = tmp_path / run
        code = main([
            "compute",
            "--fieldbook", str(fixture_dir / "fieldbook.txt"),
            "--controls", str(fixture_dir / "controls.csv"),
            "--datum", "LOCAL",
            "--list-datum", "NATIONAL",
            "--out", str(outdir),
            "--no-figures",
            "--format", "json",
        ])
        assert code == 0
        outputs.append((outdir / "report.json").read_bytes())
    assert outputs[0] == outputs[1]
    payload = json.loads(outputs[0])
    assert payload["adjustment"]["statistics"]["converged"] is True
    assert len(payload["adjustment"]["observations"]) == 16
    free = [n for n, e in payload["adjustment"]["stations"].items() if not e["fixed"]]
    assert sorted(free) == ["A", "B", "C", "D"]
    announce(10, "two pipeline runs emit byte-identical JSON reports")
