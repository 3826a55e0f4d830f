"""Command-line front door: one-instruction pipeline plus per-stage subcommands.

`netadj compute` chains compile -> scan -> analyze -> adjust (-> datum
listing) and writes the report artifacts; the other subcommands expose
the individual stages.  Exit codes identify the failing stage: 2 parse,
3 classification, 4 graph, 5 adjustment, 6 transform.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import adjust, control, fieldbook, graph, regress, report, synthetic
from .errors import (
    CoincidentStations,
    DegenerateGeometry,
    DegenerateInput,
    DimensionMismatch,
    DisconnectedNetwork,
    DomainError,
    DuplicateControlPoint,
    EmptySetup,
    InsufficientOverlap,
    MissingLegObservation,
    MissingProvisional,
    NetadjError,
    NoFreeStations,
    NonpositiveDistance,
    NonpositiveSigma,
    NotConverged,
    ParseError,
    RankDeficient,
    RootUnknown,
    SingularNormalMatrix,
    UnitError,
    UnknownDatum,
    UnreachableStation,
)

EXIT_PARSE = 2
EXIT_CLASSIFY = 3
EXIT_GRAPH = 4
EXIT_ADJUST = 5
EXIT_TRANSFORM = 6

_STAGE_OF = {
    ParseError: ("parse", EXIT_PARSE),
    UnitError: ("parse", EXIT_PARSE),
    EmptySetup: ("parse", EXIT_PARSE),
    NonpositiveDistance: ("parse", EXIT_PARSE),
    DegenerateInput: ("parse", EXIT_PARSE),
    DomainError: ("parse", EXIT_PARSE),
    DuplicateControlPoint: ("classification", EXIT_CLASSIFY),
    UnknownDatum: ("classification", EXIT_CLASSIFY),
    DisconnectedNetwork: ("graph", EXIT_GRAPH),
    RootUnknown: ("graph", EXIT_GRAPH),
    MissingLegObservation: ("graph", EXIT_GRAPH),
    InsufficientOverlap: ("transform", EXIT_TRANSFORM),
    DegenerateGeometry: ("transform", EXIT_TRANSFORM),
    RankDeficient: ("adjustment", EXIT_ADJUST),
    SingularNormalMatrix: ("adjustment", EXIT_ADJUST),
    MissingProvisional: ("adjustment", EXIT_ADJUST),
    NoFreeStations: ("adjustment", EXIT_ADJUST),
    UnreachableStation: ("adjustment", EXIT_ADJUST),
    NonpositiveSigma: ("adjustment", EXIT_ADJUST),
    DimensionMismatch: ("adjustment", EXIT_ADJUST),
    CoincidentStations: ("adjustment", EXIT_ADJUST),
    NotConverged: ("adjustment", EXIT_ADJUST),
}


def _stage_of(exc: NetadjError) -> tuple[str, int]:
    for klass in type(exc).__mro__:
        if klass in _STAGE_OF:
            return _STAGE_OF[klass]
    return ("pipeline", 1)


def _fail(exc: NetadjError) -> int:
    stage, code = _stage_of(exc)
    print(f"error [{stage}]: {exc}", file=sys.stderr)
    return code


@dataclass
class PipelineConfig:
    """Everything `compute` needs for one run."""

    fieldbook_path: str
    control_db_path: str
    datum: str
    output_datum: str | None = None
    sigma_policy: fieldbook.SigmaPolicy | None = None
    tolerance: float = 1e-6
    max_iterations: int = 10
    output_format: str = "text"
    report_path: str | None = None
    dump_matrix: bool = False
    figures: bool = True


@dataclass
class PipelineArtifacts:
    dataset: fieldbook.DataSet | None = None
    classification: control.StationClassification | None = None
    network: graph.NetworkGraph | None = None
    tree: graph.SpanningTree | None = None
    cycles: list[graph.Cycle] = field(default_factory=list)
    result: adjust.AdjustmentResult | None = None
    payload: dict = field(default_factory=dict)
    exit_code: int = 0


def _sigma_policy_from_args(args) -> fieldbook.SigmaPolicy | None:
    if args.sigma_distance is None and args.sigma_angle is None:
        return None
    policy = fieldbook.SigmaPolicy()
    if args.sigma_distance is not None:
        policy.distance_const, policy.distance_ppm = args.sigma_distance
    if args.sigma_angle is not None:
        policy.angle_seconds = args.sigma_angle
    return policy


def _load_dataset(config: PipelineConfig) -> fieldbook.DataSet:
    text = Path(config.fieldbook_path).read_text()
    book = fieldbook.parse_fieldbook(text)
    return fieldbook.compile(book, config.sigma_policy)


def _load_controls(config: PipelineConfig) -> control.ControlDatabase:
    return control.ControlDatabase.load(Path(config.control_db_path).read_text())


def _analysis_root(classification: control.StationClassification,
                   nodes: set[str]) -> str:
    fixed = sorted(classification.fixed & nodes)
    return fixed[0] if fixed else sorted(nodes)[0]


def _analyze(dataset: fieldbook.DataSet,
             classification: control.StationClassification,
             coords: dict | None) -> tuple:
    net = graph.build_graph(dataset)
    graph.require_connected(net)
    root = _analysis_root(classification, net.nodes)
    tree = graph.dfs_spanning_tree(net, root)
    cycles = graph.fundamental_cycles(tree)
    misclosures = []
    for cycle in cycles:
        if coords is None:
            misclosures.append(None)
            continue
        try:
            misclosures.append(graph.cycle_misclosure(cycle, dataset, coords))
        except MissingLegObservation:
            misclosures.append(None)
    return net, tree, cycles, misclosures


def run_pipeline(config: PipelineConfig) -> PipelineArtifacts:
    """Run the whole computation; on failure artifacts carry the exit code."""
    art = PipelineArtifacts()
    try:
        art.dataset = _load_dataset(config)
    except NetadjError as exc:
        art.exit_code = _fail(exc)
        return art
    art.payload["dataset"] = report.dataset_payload(art.dataset)

    try:
        db = _load_controls(config)
        art.classification = control.scan_stations(art.dataset, db, config.datum)
    except NetadjError as exc:
        art.exit_code = _fail(exc)
        return art
    art.payload["classification"] = report.classification_payload(art.classification)

    control_coords = db.coordinates_in(config.datum)
    try:
        provisionals = adjust.provisional_coordinates(
            art.dataset,
            {s: control_coords[s] for s in art.classification.fixed},
        )
    except NetadjError as exc:
        art.exit_code = _fail(exc)
        return art

    try:
        art.network, art.tree, art.cycles, misclosures = _analyze(
            art.dataset, art.classification, provisionals
        )
    except NetadjError as exc:
        art.exit_code = _fail(exc)
        return art
    art.payload["network"] = report.network_payload(
        art.network, art.tree, art.cycles, misclosures
    )

    options = adjust.AdjustmentOptions(
        tolerance=config.tolerance, max_iterations=config.max_iterations
    )
    try:
        art.result = adjust.iterate_adjustment(
            art.dataset, art.classification, control_coords,
            options=options, provisionals=provisionals,
        )
    except NotConverged as exc:
        art.result = exc.result
        art.exit_code = _fail(exc)
    except NetadjError as exc:
        art.exit_code = _fail(exc)
        return art
    art.payload["adjustment"] = report.adjustment_payload(art.result)

    if config.dump_matrix:
        system = adjust.form_equations(
            art.dataset, art.classification, art.result.coordinates
        )
        print(report.dump_matrix_text(system))

    if config.output_datum:
        try:
            transform = control.estimate_datum_transform(
                db, config.datum, config.output_datum
            )
            rows = control.list_in_datum(
                art.result, transform, db.heights_in(config.datum)
            )
        except NetadjError as exc:
            art.exit_code = _fail(exc)
            return art
        art.payload["listing"] = report.listing_payload(
            rows, transform, config.output_datum
        )
    return art


def _write_artifacts(config: PipelineConfig, art: PipelineArtifacts) -> None:
    if config.report_path is None:
        return
    outdir = Path(config.report_path)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "report.json").write_text(
        json.dumps(art.payload, indent=2, sort_keys=True) + "\n"
    )
    (outdir / "report.txt").write_text(report.render_text_report(art.payload))
    if "adjustment" in art.payload:
        (outdir / "coordinates.csv").write_text(report.coordinates_csv(art.payload))
        if config.figures and art.result is not None:
            report.render_figures(outdir, art.payload, art.result.coordinates)


def _print_json(payload) -> None:
    print(json.dumps(payload, indent=2, sort_keys=True))


# --- subcommand handlers -------------------------------------------------


def _cmd_compute(args) -> int:
    if args.tolerance <= 0.0:
        print("error [parse]: tolerance must be positive", file=sys.stderr)
        return EXIT_PARSE
    config = PipelineConfig(
        fieldbook_path=args.fieldbook,
        control_db_path=args.controls,
        datum=args.datum,
        output_datum=args.list_datum,
        sigma_policy=_sigma_policy_from_args(args),
        tolerance=args.tolerance,
        max_iterations=args.max_iter,
        output_format=args.format,
        report_path=args.out,
        dump_matrix=args.dump_matrix,
        figures=not args.no_figures,
    )
    art = run_pipeline(config)
    if art.payload:
        _write_artifacts(config, art)
        if config.output_format == "json":
            _print_json(art.payload)
        elif config.output_format == "csv" and "adjustment" in art.payload:
            print(report.coordinates_csv(art.payload), end="")
        else:
            print(report.render_text_report(art.payload), end="")
    return art.exit_code


def _cmd_compile(args) -> int:
    try:
        book = fieldbook.parse_fieldbook(Path(args.fieldbook).read_text())
        dataset = fieldbook.compile(book, _sigma_policy_from_args(args))
    except NetadjError as exc:
        return _fail(exc)
    payload = report.dataset_payload(dataset)
    if args.format == "json":
        _print_json(payload)
    else:
        print(f"stations: {', '.join(payload['stations'])}")
        for row in payload["observations"]:
            target = f" to {row['to']}" if row["to"] else ""
            unit = "deg" if row["kind"] == "angle" else "m"
            print(f"{row['kind']:<9} at {row['at']} from {row['from']}{target}: "
                  f"{row['value']:.6f} {unit} (sigma {row['sigma']:.6g})")
    return 0


def _cmd_scan(args) -> int:
    config = PipelineConfig(
        fieldbook_path=args.fieldbook, control_db_path=args.controls,
        datum=args.datum, sigma_policy=_sigma_policy_from_args(args),
    )
    try:
        dataset = _load_dataset(config)
        db = _load_controls(config)
        classification = control.scan_stations(dataset, db, args.datum)
    except NetadjError as exc:
        return _fail(exc)
    payload = report.classification_payload(classification)
    if args.format == "json":
        _print_json(payload)
    else:
        print(f"fixed: {', '.join(payload['fixed']) or '(none)'}")
        print(f"free : {', '.join(payload['free']) or '(none)'}")
    return 0


def _cmd_analyze(args) -> int:
    config = PipelineConfig(
        fieldbook_path=args.fieldbook,
        control_db_path=args.controls or "",
        datum=args.datum or "",
        sigma_policy=_sigma_policy_from_args(args),
    )
    try:
        dataset = _load_dataset(config)
    except NetadjError as exc:
        return _fail(exc)

    coords = None
    classification = control.StationClassification(fixed=set(), free=dataset.stations)
    if args.controls and args.datum:
        try:
            db = _load_controls(config)
            classification = control.scan_stations(dataset, db, args.datum)
        except NetadjError as exc:
            return _fail(exc)
        try:
            coords = adjust.provisional_coordinates(
                dataset,
                {s: db.coordinates_in(args.datum)[s] for s in classification.fixed},
            )
        except UnreachableStation as exc:
            # analysis still works without coordinates; misclosures are skipped
            print(f"warning: {exc}; misclosures skipped", file=sys.stderr)

    try:
        net, tree, cycles, misclosures = _analyze(dataset, classification, coords)
    except NetadjError as exc:
        return _fail(exc)
    payload = report.network_payload(net, tree, cycles, misclosures)
    if args.format == "json":
        _print_json(payload)
    else:
        print(report.render_text_report({"network": payload}), end="")
    return 0


def _cmd_adjust(args) -> int:
    if args.tolerance <= 0.0:
        print("error [parse]: tolerance must be positive", file=sys.stderr)
        return EXIT_PARSE
    config = PipelineConfig(
        fieldbook_path=args.fieldbook, control_db_path=args.controls,
        datum=args.datum, sigma_policy=_sigma_policy_from_args(args),
        tolerance=args.tolerance, max_iterations=args.max_iter,
        dump_matrix=args.dump_matrix, report_path=args.out,
        figures=not args.no_figures,
    )
    art = run_pipeline(config)
    if art.payload:
        _write_artifacts(config, art)
        if args.format == "json":
            _print_json(art.payload.get("adjustment", {}))
        elif args.format == "csv" and "adjustment" in art.payload:
            print(report.coordinates_csv(art.payload), end="")
        else:
            print(report.render_text_report(art.payload), end="")
    return art.exit_code


def _cmd_transform(args) -> int:
    try:
        db = control.ControlDatabase.load(Path(args.controls).read_text())
        transform = control.estimate_datum_transform(db, args.datum, args.list_datum)
    except NetadjError as exc:
        return _fail(exc)
    payload = {
        "from_datum": args.datum,
        "to_datum": args.list_datum,
        "scale": transform.scale,
        "rotation_deg": math.degrees(transform.rotation),
        "translate_e": transform.translate_e,
        "translate_n": transform.translate_n,
        "rms_fit": transform.rms_fit,
    }
    if args.format == "json":
        _print_json(payload)
    else:
        print(f"scale       : {transform.scale:.9f}")
        print(f"rotation    : {math.degrees(transform.rotation):.7f} deg")
        print(f"translate E : {transform.translate_e:.4f} m")
        print(f"translate N : {transform.translate_n:.4f} m")
        print(f"rms fit     : {transform.rms_fit:.6f} m")
    return 0


def _cmd_regress(args) -> int:
    try:
        rows = []
        with open(args.data, newline="") as handle:
            for record in csv.reader(handle):
                if not record or record[0].strip().startswith("#"):
                    continue
                try:
                    values = [float(cell) for cell in record[: 3 if len(record) > 2 else 2]]
                except ValueError:
                    continue  # header row
                rows.append(values)
        if not rows:
            raise DegenerateInput("no numeric (x, y[, weight]) rows found")
        xs = [r[0] for r in rows]
        ys = [r[1] for r in rows]
        weights = [r[2] for r in rows] if all(len(r) > 2 for r in rows) else None

        if args.model == "line":
            fit = regress.fit_simple_line(list(zip(xs, ys)))
            payload = {
                "model": "line",
                "intercept": fit.intercept_a,
                "gradient": fit.gradient_b,
                "std_error_estimate": fit.std_error_estimate,
                "n": fit.n,
            }
        elif args.model in ("exponential", "power"):
            alpha, beta = regress.linearize_fit(args.model, list(zip(xs, ys)))
            payload = {"model": args.model, "alpha": alpha, "beta": beta}
        else:  # poly
            basis = [[x**k for k in range(args.degree + 1)] for x in xs]
            fit = regress.fit_basis(basis, ys, weights)
            payload = {
                "model": f"poly{args.degree}",
                "coefficients": list(fit.coefficients),
                "residual_sum_squares": fit.residual_sum_squares,
            }
    except NetadjError as exc:
        return _fail(exc)
    print(json.dumps(payload, indent=2, sort_keys=True))
    return 0


def _cmd_fixture(args) -> int:
    paths = synthetic.write_fixture(args.out, seed=args.seed)
    for name, path in paths.items():
        print(f"{name}: {path}")
    return 0


def _add_common_io(parser, controls_required=True, datum_required=True):
    parser.add_argument("--fieldbook", required=True, help="field-book text file")
    parser.add_argument("--controls", required=controls_required,
                        help="control database CSV")
    parser.add_argument("--datum", required=datum_required,
                        help="working datum name")
    _add_sigma_flags(parser)


def _add_sigma_flags(parser):
    parser.add_argument("--sigma-distance", nargs=2, type=float,
                        metavar=("CONST_M", "PPM"),
                        help="distance sigma model override")
    parser.add_argument("--sigma-angle", type=float, metavar="ARCSEC",
                        help="angle sigma override (arc-seconds)")


def _add_format_flag(parser):
    parser.add_argument("--format", choices=("text", "json", "csv"),
                        default="text", help="stdout format")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="netadj",
        description="Weighted least-squares adjustment of horizontal survey networks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compute", help="full pipeline in one instruction")
    _add_common_io(p)
    p.add_argument("--list-datum", help="also list results in this datum")
    p.add_argument("--tolerance", type=float, default=1e-6,
                   help="convergence tolerance in metres")
    p.add_argument("--max-iter", type=int, default=10)
    p.add_argument("--out", help="directory for report artifacts")
    p.add_argument("--dump-matrix", action="store_true",
                   help="print the coefficient matrix layout")
    p.add_argument("--no-figures", action="store_true",
                   help="skip figure rendering")
    _add_format_flag(p)
    p.set_defaults(func=_cmd_compute)

    p = sub.add_parser("compile", help="parse and compile a field book")
    p.add_argument("--fieldbook", required=True)
    _add_sigma_flags(p)
    _add_format_flag(p)
    p.set_defaults(func=_cmd_compile)

    p = sub.add_parser("scan", help="classify stations fixed/free")
    _add_common_io(p)
    _add_format_flag(p)
    p.set_defaults(func=_cmd_scan)

    p = sub.add_parser("analyze", help="graph, spanning tree, cycles, misclosures")
    p.add_argument("--fieldbook", required=True)
    p.add_argument("--controls", help="control CSV (enables misclosures)")
    p.add_argument("--datum", help="datum for provisional coordinates")
    _add_sigma_flags(p)
    _add_format_flag(p)
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("adjust", help="run the adjustment and report")
    _add_common_io(p)
    p.add_argument("--tolerance", type=float, default=1e-6)
    p.add_argument("--max-iter", type=int, default=10)
    p.add_argument("--out", help="directory for report artifacts")
    p.add_argument("--dump-matrix", action="store_true")
    p.add_argument("--no-figures", action="store_true")
    _add_format_flag(p)
    p.set_defaults(func=_cmd_adjust)

    p = sub.add_parser("transform", help="estimate a datum similarity transform")
    p.add_argument("--controls", required=True)
    p.add_argument("--datum", required=True, help="source datum")
    p.add_argument("--list-datum", required=True, help="target datum")
    _add_format_flag(p)
    p.set_defaults(func=_cmd_transform)

    p = sub.add_parser("regress", help="fit CSV (x, y[, weight]) samples")
    p.add_argument("--data", required=True, help="CSV sample file")
    p.add_argument("--model", choices=("line", "exponential", "power", "poly"),
                   default="line")
    p.add_argument("--degree", type=int, default=2, help="poly model degree")
    p.set_defaults(func=_cmd_regress)

    p = sub.add_parser("fixture", help="generate a synthetic fixture dataset")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, help="noise seed (omit for exact data)")
    p.set_defaults(func=_cmd_fixture)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
