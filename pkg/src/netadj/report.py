"""Rendering of pipeline results: JSON payloads, text report, CSV, figures.

Payload builders return plain dicts of JSON-safe values; the same
builders feed the per-stage CLI output and the combined compute report,
so a stage run on its own produces byte-identical content to its section
of the full report.
"""

from __future__ import annotations

import csv
import io
import math
from pathlib import Path
from typing import TYPE_CHECKING

from .control import ListingRow, SimilarityTransform, format_listing
from .fieldbook import dataset_to_json_rows

if TYPE_CHECKING:
    from .adjust import AdjustmentResult, DesignSystem
    from .control import StationClassification
    from .equations import Coordinates
    from .fieldbook import DataSet
    from .graph import Cycle, NetworkGraph, SpanningTree


def dataset_payload(dataset: "DataSet") -> dict:
    return {
        "stations": sorted(dataset.stations),
        "observations": dataset_to_json_rows(dataset),
    }


def classification_payload(classification: "StationClassification") -> dict:
    return {
        "fixed": sorted(classification.fixed),
        "free": sorted(classification.free),
    }


def network_payload(graph: "NetworkGraph", tree: "SpanningTree",
                    cycles: list["Cycle"],
                    misclosures: list[tuple[float, float, float] | None]) -> dict:
    cycle_entries = []
    for cycle, mis in zip(cycles, misclosures):
        entry: dict = {"nodes": cycle.node_sequence}
        if mis is not None:
            de, dn, ratio = mis
            entry["misclosure_e"] = de
            entry["misclosure_n"] = dn
            entry["misclosure"] = math.hypot(de, dn)
            entry["closure_ratio"] = ratio
        cycle_entries.append(entry)
    return {
        "nodes": sorted(graph.nodes),
        "edge_count": len(graph.edges),
        "edges": [[e.u, e.v, sorted(e.kinds)] for e in graph.edges],
        "root": tree.root,
        "tree_edges": [[e.u, e.v] for e in tree.span_tree],
        "back_edges": [[e.u, e.v] for e in tree.back_edges],
        "cycles": cycle_entries,
    }


def adjustment_payload(result: "AdjustmentResult") -> dict:
    stations = {}
    for name in sorted(result.coordinates):
        coord = result.coordinates[name]
        entry = {
            "easting": coord.easting,
            "northing": coord.northing,
            "fixed": name in result.fixed,
        }
        sigmas = result.coordinate_sigmas(name)
        if sigmas is not None:
            entry["sigma_e"], entry["sigma_n"] = sigmas
        stations[name] = entry

    sigma0 = math.sqrt(result.unit_variance) if result.unit_variance is not None else None
    observations = []
    for i, tag in enumerate(result.tags):
        weight = float(result.weights[i]) if result.weights is not None else None
        residual = float(result.residuals[i])
        row = {
            "tag": tag,
            "kind": result.kinds[i],
            "residual": residual,
            "weight": weight,
        }
        if sigma0 and weight is not None:
            row["standardized"] = residual * math.sqrt(weight) / sigma0
        observations.append(row)

    return {
        "stations": stations,
        "observations": observations,
        "statistics": {
            "converged": result.converged,
            "iterations": result.iterations,
            "redundancy": result.redundancy,
            "unit_variance": result.unit_variance,
            "sigma0": sigma0,
        },
        "iteration_log": [float(c) for c in result.iteration_log],
    }


def listing_payload(rows: list[ListingRow], transform: SimilarityTransform,
                    datum: str) -> dict:
    return {
        "datum": datum,
        "transform": {
            "scale": transform.scale,
            "rotation_deg": math.degrees(transform.rotation),
            "translate_e": transform.translate_e,
            "translate_n": transform.translate_n,
            "rms_fit": transform.rms_fit,
        },
        "rows": [
            {
                "nos": r.number,
                "station": r.station,
                "easting": r.easting,
                "northing": r.northing,
                "height": r.height,
            }
            for r in rows
        ],
    }


def format_ratio(misclosure: float, total_length: float) -> str:
    if misclosure <= 0.0 or total_length <= 0.0:
        return "exact"
    ratio = total_length / misclosure
    if ratio > 1e9:
        return "exact"
    return f"1:{ratio:,.0f}".replace(",", " ")


def render_text_report(payload: dict) -> str:
    """Human-readable report over a full pipeline payload."""
    out = io.StringIO()
    w = out.write
    w("NETWORK ADJUSTMENT REPORT\n")
    w("=========================\n\n")

    cls = payload.get("classification")
    if cls:
        w(f"Fixed stations : {', '.join(cls['fixed']) or '(none)'}\n")
        w(f"Free stations  : {', '.join(cls['free']) or '(none)'}\n")
    data = payload.get("dataset")
    if data:
        kinds = [row["kind"] for row in data["observations"]]
        w(f"Observations   : {len(kinds)} "
          f"({kinds.count('angle')} angles, {kinds.count('distance')} distances)\n")
    w("\n")

    adj = payload.get("adjustment")
    if adj:
        stats = adj["statistics"]
        w(f"Convergence    : {'yes' if stats['converged'] else 'NO'} "
          f"in {stats['iterations']} iterations\n")
        w(f"Redundancy     : {stats['redundancy']}\n")
        if stats["unit_variance"] is not None:
            w(f"Unit variance  : {stats['unit_variance']:.6f}  "
              f"(sigma0 = {stats['sigma0']:.6f})\n")
        else:
            w("Unit variance  : undefined (zero redundancy); covariance suppressed\n")
        if adj["iteration_log"]:
            w("Iteration log (max |correction|, m): ")
            w("  ".join(f"{c:.3e}" for c in adj["iteration_log"]))
            w("\n")
        w("\nADJUSTED COORDINATES (m)\n")
        w(f"{'Station':<10} {'Easting':>13} {'Northing':>13} "
          f"{'sig E':>8} {'sig N':>8}  fixed\n")
        for name, entry in adj["stations"].items():
            sig_e = f"{entry['sigma_e']:.4f}" if "sigma_e" in entry else "-"
            sig_n = f"{entry['sigma_n']:.4f}" if "sigma_n" in entry else "-"
            w(f"{name:<10} {entry['easting']:>13.4f} {entry['northing']:>13.4f} "
              f"{sig_e:>8} {sig_n:>8}  {'yes' if entry['fixed'] else 'no'}\n")
        w("\nOBSERVATION RESIDUALS\n")
        w(f"{'Tag':<12} {'Kind':<9} {'Residual':>13} {'Weight':>13} {'Std res':>9}\n")
        for row in adj["observations"]:
            std = f"{row['standardized']:.3f}" if "standardized" in row else "-"
            w(f"{row['tag']:<12} {row['kind']:<9} {row['residual']:>13.6e} "
              f"{row['weight']:>13.4e} {std:>9}\n")
        w("\n")

    net = payload.get("network")
    if net:
        w("NETWORK ANALYSIS\n")
        w(f"Nodes: {len(net['nodes'])}   Edges: {net['edge_count']}   "
          f"Root: {net['root']}\n")
        w("Tree edges : " + "  ".join(f"{u}-{v}" for u, v in net["tree_edges"]) + "\n")
        w("Back edges : " + ("  ".join(f"{u}-{v}" for u, v in net["back_edges"]) or "(none)") + "\n")
        if net["cycles"]:
            w("Cycles:\n")
            for i, cyc in enumerate(net["cycles"], start=1):
                nodes = "-".join(cyc["nodes"])
                if "misclosure" in cyc:
                    mis = cyc["misclosure"]
                    total = mis / cyc["closure_ratio"] if cyc["closure_ratio"] > 0 else 0.0
                    w(f"  {i:>2}. {nodes:<24} dE {cyc['misclosure_e']:>10.4f}  "
                      f"dN {cyc['misclosure_n']:>10.4f}  "
                      f"closure {format_ratio(mis, total)}\n")
                else:
                    w(f"  {i:>2}. {nodes}\n")
        else:
            w("Cycles: none (tree network)\n")
        w("\n")

    listing = payload.get("listing")
    if listing:
        w(f"RESULTS LIST (datum {listing['datum']})\n")
        rows = [
            ListingRow(number=r["nos"], station=r["station"], easting=r["easting"],
                       northing=r["northing"], height=r["height"])
            for r in listing["rows"]
        ]
        w(format_listing(rows))
        w("\n")
    return out.getvalue()


def coordinates_csv(payload: dict) -> str:
    """Delimited station listing from an adjustment payload."""
    adj = payload["adjustment"]
    out = io.StringIO()
    writer = csv.writer(out)
    writer.writerow(["station", "easting", "northing", "sigma_e", "sigma_n", "fixed"])
    for name, entry in adj["stations"].items():
        writer.writerow(
            [
                name,
                f"{entry['easting']:.4f}",
                f"{entry['northing']:.4f}",
                f"{entry['sigma_e']:.4f}" if "sigma_e" in entry else "",
                f"{entry['sigma_n']:.4f}" if "sigma_n" in entry else "",
                "yes" if entry["fixed"] else "no",
            ]
        )
    return out.getvalue()


def dump_matrix_text(system: "DesignSystem") -> str:
    """Coefficient matrix in a row-per-observation text layout (blank = zero)."""
    index = system.index
    header = ["OBS".ljust(12)]
    for name in index.order:
        header.append(f"dE_{name}".rjust(11))
        header.append(f"dN_{name}".rjust(11))
    header.append("rhs".rjust(13))
    lines = ["".join(header)]
    for i, tag in enumerate(system.tags):
        cells = [tag.ljust(12)]
        for j in range(system.parameter_count):
            value = system.a_matrix[i, j]
            cells.append(f"{value:11.5f}" if value != 0.0 else " " * 11)
        cells.append(f"{system.b_vector[i]:13.6e}")
        lines.append("".join(cells))
    return "\n".join(lines) + "\n"


def render_figures(outdir: str | Path, payload: dict,
                   coords: dict[str, "Coordinates"],
                   ellipse_scale: float | None = None) -> list[Path]:
    """Write network and residual figures next to the delimited output.

    The network plot shows legs, stations and (when a covariance was
    computed) exaggerated one-sigma error ellipses.  Returns the paths
    written.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    from matplotlib.patches import Ellipse

    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []

    adj = payload.get("adjustment")
    net = payload.get("network")

    fig, ax = plt.subplots(figsize=(8, 6))
    if net:
        for u, v, _ in net["edges"]:
            ax.plot(
                [coords[u].easting, coords[v].easting],
                [coords[u].northing, coords[v].northing],
                color="0.6", lw=0.8, zorder=1,
            )
    fixed_names = set(adj and [n for n, e in adj["stations"].items() if e["fixed"]] or [])
    for name, c in coords.items():
        is_fixed = name in fixed_names
        ax.plot(
            c.easting, c.northing,
            marker="^" if is_fixed else "o",
            color="tab:red" if is_fixed else "tab:blue",
            ms=7, zorder=3,
        )
        ax.annotate(name, (c.easting, c.northing),
                    textcoords="offset points", xytext=(6, 6), fontsize=9)

    if adj:
        spans = [e for s in adj["stations"].values()
                 for e in (s.get("sigma_e"), s.get("sigma_n")) if e]
        if spans:
            if ellipse_scale is None:
                extent = max(
                    max(c.easting for c in coords.values())
                    - min(c.easting for c in coords.values()),
                    max(c.northing for c in coords.values())
                    - min(c.northing for c in coords.values()),
                    1.0,
                )
                ellipse_scale = 0.03 * extent / max(spans)
            for name, entry in adj["stations"].items():
                if "sigma_e" not in entry:
                    continue
                c = coords[name]
                ax.add_patch(
                    Ellipse(
                        (c.easting, c.northing),
                        width=2 * entry["sigma_e"] * ellipse_scale,
                        height=2 * entry["sigma_n"] * ellipse_scale,
                        fill=False, color="tab:green", lw=1.2, zorder=2,
                    )
                )
            ax.set_title(f"Network (error ellipses x{ellipse_scale:.0f})")
        else:
            ax.set_title("Network")
    else:
        ax.set_title("Network")
    ax.set_xlabel("Easting (m)")
    ax.set_ylabel("Northing (m)")
    ax.set_aspect("equal", adjustable="datalim")
    ax.grid(True, lw=0.3, alpha=0.5)
    network_png = outdir / "network.png"
    fig.savefig(network_png, dpi=120, bbox_inches="tight")
    plt.close(fig)
    written.append(network_png)

    if adj:
        fig, ax = plt.subplots(figsize=(8, 4))
        tags = [row["tag"] for row in adj["observations"]]
        values = [row.get("standardized", row["residual"]) for row in adj["observations"]]
        standardized = all("standardized" in row for row in adj["observations"])
        ax.bar(range(len(values)), values, color="tab:blue")
        ax.axhline(0.0, color="k", lw=0.8)
        ax.set_xticks(range(len(tags)))
        ax.set_xticklabels(tags, rotation=60, ha="right", fontsize=8)
        ax.set_ylabel("standardized residual" if standardized else "residual")
        ax.set_title("Observation residuals")
        ax.grid(True, axis="y", lw=0.3, alpha=0.5)
        residuals_png = outdir / "residuals.png"
        fig.savefig(residuals_png, dpi=120, bbox_inches="tight")
        plt.close(fig)
        written.append(residuals_png)
    return written
