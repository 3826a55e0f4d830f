"""Command-line pipeline, per-stage subcommands and exit codes."""

import json

import pytest

from netadj.cli import main
from netadj import synthetic


@pytest.fixture()
def fixture_dir(tmp_path):
    path = tmp_path / "fixture"
    synthetic.write_fixture(path, seed=11)
    return path


def run(capsys, argv):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestCompute:
    def test_full_pipeline_exit_zero(self, capsys, fixture_dir, tmp_path):
        out_dir = tmp_path / "report"
        code, out, _ = run(capsys, [
            "compute",
            "--fieldbook", str(fixture_dir / "fieldbook.txt"),
            "--controls", str(fixture_dir / "controls.csv"),
            "--datum", "LOCAL",
            "--out", str(out_dir),
        ])
        assert code == 0
        assert "NETWORK ADJUSTMENT REPORT" in out
        assert (out_dir / "report.json").exists()
        assert (out_dir / "report.txt").exists()
        assert (out_dir / "coordinates.csv").exists()
        assert (out_dir / "network.png").exists()
        assert (out_dir / "residuals.png").exists()
        payload = json.loads((out_dir / "report.json").read_text())
        assert payload["adjustment"]["statistics"]["converged"] is True
        assert len(payload["adjustment"]["observations"]) == 16
        adjusted = [
            n for n, e in payload["adjustment"]["stations"].items() if not e["fixed"]
        ]
        assert sorted(adjusted) == ["A", "B", "C", "D"]

    def test_parse_error_exit_2_with_line(self, capsys, tmp_path, fixture_dir):
        bad = tmp_path / "bad.txt"
        lines = (fixture_dir / "fieldbook.txt").read_text().splitlines()
        lines[6] = "OBS broken record"
        bad.write_text("\n".join(lines) + "\n")
        code, _, err = run(capsys, [
            "compute", "--fieldbook", str(bad),
            "--controls", str(fixture_dir / "controls.csv"),
            "--datum", "LOCAL",
        ])
        assert code == 2
        assert "line 7" in err
        assert "parse" in err

    def test_unknown_datum_exit_3(self, capsys, fixture_dir):
        code, _, err = run(capsys, [
            "compute", "--fieldbook", str(fixture_dir / "fieldbook.txt"),
            "--controls", str(fixture_dir / "controls.csv"),
            "--datum", "MARS",
        ])
        assert code == 3
        assert "classification" in err

    def test_insufficient_overlap_exit_6(self, capsys, fixture_dir, tmp_path):
        controls = fixture_dir / "controls.csv"
        text = controls.read_text().splitlines()
        # leave only one NATIONAL point so the overlap drops below two
        kept = [text[0]] + [
            t for t in text[1:]
            if "NATIONAL" not in t or t.startswith("P,")
        ]
        crippled = tmp_path / "controls.csv"
        crippled.write_text("\n".join(kept) + "\n")
        code, _, err = run(capsys, [
            "compute", "--fieldbook", str(fixture_dir / "fieldbook.txt"),
            "--controls", str(crippled),
            "--datum", "LOCAL",
            "--list-datum", "NATIONAL",
        ])
        assert code == 6
        assert "transform" in err

    def test_not_converged_exit_5(self, capsys, fixture_dir):
        code, _, err = run(capsys, [
            "compute", "--fieldbook", str(fixture_dir / "fieldbook.txt"),
            "--controls", str(fixture_dir / "controls.csv"),
            "--datum", "LOCAL",
            "--tolerance", "1e-15",
            "--max-iter", "1",
        ])
        assert code == 5
        assert "adjustment" in err

    def test_dump_matrix(self, capsys, fixture_dir):
        code, out, _ = run(capsys, [
            "compute", "--fieldbook", str(fixture_dir / "fieldbook.txt"),
            "--controls", str(fixture_dir / "controls.csv"),
            "--datum", "LOCAL",
            "--dump-matrix",
        ])
        assert code == 0
        assert "dE_A" in out and "dN_D" in out


class TestStageIsolation:
    def test_stage_outputs_match_compute_sections(self, capsys, fixture_dir, tmp_path):
        out_dir = tmp_path / "report"
        code, _, _ = run(capsys, [
            "compute", "--fieldbook", str(fixture_dir / "fieldbook.txt"),
            "--controls", str(fixture_dir / "controls.csv"),
            "--datum", "LOCAL", "--list-datum", "NATIONAL",
            "--out", str(out_dir), "--no-figures",
        ])
        assert code == 0
        combined = json.loads((out_dir / "report.json").read_text())

        stages = {
            "dataset": ["compile", "--fieldbook", str(fixture_dir / "fieldbook.txt")],
            "classification": [
                "scan", "--fieldbook", str(fixture_dir / "fieldbook.txt"),
                "--controls", str(fixture_dir / "controls.csv"), "--datum", "LOCAL",
            ],
            "network": [
                "analyze", "--fieldbook", str(fixture_dir / "fieldbook.txt"),
                "--controls", str(fixture_dir / "controls.csv"), "--datum", "LOCAL",
            ],
            "adjustment": [
                "adjust", "--fieldbook", str(fixture_dir / "fieldbook.txt"),
                "--controls", str(fixture_dir / "controls.csv"), "--datum", "LOCAL",
                "--no-figures",
            ],
        }
        for section, argv in stages.items():
            code, out, _ = run(capsys, argv + ["--format", "json"])
            assert code == 0
            assert json.loads(out) == combined[section], section


class TestSubcommands:
    def test_scan_roles(self, capsys, fixture_dir):
        code, out, _ = run(capsys, [
            "scan", "--fieldbook", str(fixture_dir / "fieldbook.txt"),
            "--controls", str(fixture_dir / "controls.csv"), "--datum", "LOCAL",
        ])
        assert code == 0
        assert "fixed: P, Q, R, S" in out
        assert "free : A, B, C, D" in out

    def test_analyze_prints_cycles(self, capsys, tmp_path):
        book = tmp_path / "loop.txt"
        from netadj.fieldbook import dataset_to_fieldbook_text

        book.write_text(dataset_to_fieldbook_text(synthetic.loop_survey_dataset()))
        # the survey runs from control X and closes at control Y
        controls = tmp_path / "controls.csv"
        controls.write_text(
            "id,datum,easting,northing,height\n"
            "X,LOCAL,0.0,0.0,\nY,LOCAL,300.0,120.0,\n"
        )
        code, out, _ = run(capsys, [
            "analyze", "--fieldbook", str(book),
            "--controls", str(controls), "--datum", "LOCAL",
        ])
        assert code == 0
        assert "Cycles:" in out
        assert out.count("  5.") == 1  # five numbered cycles
        cycle_lines = [l for l in out.splitlines() if l.strip() and l.strip()[0].isdigit()]
        printed_sets = {
            frozenset(l.split(".", 1)[1].strip().split("-")) for l in cycle_lines
        }
        assert frozenset("XBY") in printed_sets

    def test_transform_recovers_fixture_datum(self, capsys, fixture_dir):
        code, out, _ = run(capsys, [
            "transform", "--controls", str(fixture_dir / "controls.csv"),
            "--datum", "LOCAL", "--list-datum", "NATIONAL", "--format", "json",
        ])
        assert code == 0
        payload = json.loads(out)
        # the register stores coordinates at 4 dp, bounding the recovery
        assert payload["scale"] == pytest.approx(1.0000165, abs=1e-6)
        assert payload["rotation_deg"] == pytest.approx(0.75, abs=1e-4)
        assert payload["translate_e"] == pytest.approx(12000.0, abs=1e-3)

    def test_regress_exact_line(self, capsys, tmp_path):
        data = tmp_path / "line.csv"
        data.write_text("x,y\n0,1\n1,3\n2,5\n")
        code, out, _ = run(capsys, ["regress", "--data", str(data)])
        assert code == 0
        payload = json.loads(out)
        assert payload["intercept"] == pytest.approx(1.0, abs=1e-12)
        assert payload["gradient"] == pytest.approx(2.0, abs=1e-12)
        assert payload["std_error_estimate"] == pytest.approx(0.0, abs=1e-12)

    def test_regress_power_model(self, capsys, tmp_path):
        data = tmp_path / "power.csv"
        data.write_text("1,1\n2,4\n4,16\n")
        code, out, _ = run(capsys, [
            "regress", "--data", str(data), "--model", "power",
        ])
        assert code == 0
        payload = json.loads(out)
        assert payload["alpha"] == pytest.approx(1.0, abs=1e-9)
        assert payload["beta"] == pytest.approx(2.0, abs=1e-9)

    def test_compile_json(self, capsys, fixture_dir):
        code, out, _ = run(capsys, [
            "compile", "--fieldbook", str(fixture_dir / "fieldbook.txt"),
            "--format", "json",
        ])
        assert code == 0
        payload = json.loads(out)
        assert len(payload["observations"]) == 16

    def test_fixture_writes_files(self, capsys, tmp_path):
        code, out, _ = run(capsys, ["fixture", "--out", str(tmp_path / "fx")])
        assert code == 0
        assert (tmp_path / "fx" / "fieldbook.txt").exists()
        assert (tmp_path / "fx" / "controls.csv").exists()
