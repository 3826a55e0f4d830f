"""Report payloads, text rendering, CSV and figure output."""

import json

import numpy as np
import pytest

from netadj.adjust import form_equations, iterate_adjustment
from netadj.control import StationClassification
from netadj.graph import build_graph, dfs_spanning_tree, fundamental_cycles
from netadj.report import (
    adjustment_payload,
    coordinates_csv,
    dataset_payload,
    dump_matrix_text,
    format_ratio,
    network_payload,
    render_figures,
    render_text_report,
)
from netadj import synthetic

TRUTH = synthetic.TRAVERSE_TRUTH
CLASSIFICATION = StationClassification(
    fixed=set(synthetic.TRAVERSE_FIXED), free=set(synthetic.TRAVERSE_FREE)
)
FIXED_COORDS = {s: TRUTH[s] for s in synthetic.TRAVERSE_FIXED}


@pytest.fixture(scope="module")
def payload():
    ds = synthetic.traverse_dataset(rng=np.random.default_rng(5))
    result = iterate_adjustment(ds, CLASSIFICATION, FIXED_COORDS,
                                provisionals=dict(TRUTH))
    g = build_graph(ds)
    tree = dfs_spanning_tree(g, "P")
    cycles = fundamental_cycles(tree)
    misclosures = [None for _ in cycles]
    return {
        "dataset": dataset_payload(ds),
        "classification": {"fixed": sorted(CLASSIFICATION.fixed),
                           "free": sorted(CLASSIFICATION.free)},
        "network": network_payload(g, tree, cycles, misclosures),
        "adjustment": adjustment_payload(result),
    }, result


def test_payload_is_json_safe(payload):
    data, _ = payload
    text = json.dumps(data, sort_keys=True)
    assert json.loads(text) == data


def test_text_report_sections(payload):
    data, _ = payload
    text = render_text_report(data)
    assert "NETWORK ADJUSTMENT REPORT" in text
    assert "ADJUSTED COORDINATES" in text
    assert "OBSERVATION RESIDUALS" in text
    assert "NETWORK ANALYSIS" in text
    for name in "ABCD":
        assert name in text


def test_coordinates_csv_four_decimals(payload):
    data, _ = payload
    csv_text = coordinates_csv(data)
    lines = csv_text.strip().splitlines()
    assert lines[0] == "station,easting,northing,sigma_e,sigma_n,fixed"
    assert len(lines) == 9
    a_line = next(l for l in lines if l.startswith("A,"))
    cells = a_line.split(",")
    assert len(cells[1].split(".")[1]) == 4


def test_dump_matrix_blank_cells(payload):
    ds = synthetic.traverse_dataset()
    system = form_equations(ds, CLASSIFICATION, dict(TRUTH))
    text = dump_matrix_text(system)
    lines = text.splitlines()
    assert lines[0].startswith("OBS")
    assert "dE_A" in lines[0] and "dN_D" in lines[0]
    # the first angle row involves only station A: columns for B-D stay blank
    qap = next(l for l in lines if l.startswith("Q-A-P"))
    assert qap[12:34].strip() != ""
    assert qap[34:100].strip() == ""


def test_format_ratio():
    assert format_ratio(0.0, 400.0) == "exact"
    assert format_ratio(0.01, 400.0) == "1:40 000"
    assert format_ratio(1e-12, 400.0) == "exact"


def test_render_figures(tmp_path, payload):
    data, result = payload
    written = render_figures(tmp_path, data, result.coordinates)
    names = {p.name for p in written}
    assert names == {"network.png", "residuals.png"}
    for path in written:
        assert path.stat().st_size > 5000
