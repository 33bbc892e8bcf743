"""Framework documents, catalog/snappability reports, trajectory export.

Documents are JSON. Unknown keys are rejected with the offending JSON path;
malformed text carries line/column. Reports keep a fixed field order and
full-precision floats so equal inputs serialize byte-identically.
"""

from __future__ import annotations

import csv
import io
import json
import math

import numpy as np

from .catalog import CriticalPoint, RealizationCatalog
from .errors import DocumentSemanticError, DocumentSyntaxError, EmptyPath
from .framework import Framework, Material, Realization, build_framework, build_realization
from .snapping import DeformationPath, SnappabilityReport

_AXES = "xyz"


def _reject_unknown(obj: dict, allowed: set[str], path: str):
    for key in obj:
        if key not in allowed:
            raise DocumentSemanticError(f"unknown key {key!r}", path=f"{path}.{key}" if path else key)


def _require(obj: dict, key: str, path: str):
    if key not in obj:
        raise DocumentSemanticError(f"missing required key {key!r}", path=path or key)
    return obj[key]


def parse_framework(text: str) -> tuple[Framework, dict[str, Realization]]:
    """Parse a framework document; returns the framework and named realizations."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DocumentSyntaxError(exc.msg, exc.lineno, exc.colno) from exc
    if not isinstance(doc, dict):
        raise DocumentSemanticError("document root must be an object")
    _reject_unknown(doc, {"dimension", "knots", "edges", "material", "named_realizations"}, "")

    dimension = _require(doc, "dimension", "dimension")
    if not isinstance(dimension, int) or dimension not in (2, 3):
        raise DocumentSemanticError("dimension must be the integer 2 or 3", path="dimension")

    knots_spec = _require(doc, "knots", "knots")
    if not isinstance(knots_spec, list) or not knots_spec:
        raise DocumentSemanticError("knots must be a non-empty array", path="knots")
    names: list[str] = []
    pins: dict[int, list[float]] = {}
    for i, item in enumerate(knots_spec):
        path = f"knots[{i}]"
        if not isinstance(item, dict):
            raise DocumentSemanticError("knot entries must be objects", path=path)
        _reject_unknown(item, {"id", "pin"}, path)
        kid = _require(item, "id", f"{path}.id")
        if not isinstance(kid, str):
            raise DocumentSemanticError("knot id must be a string", path=f"{path}.id")
        if kid in names:
            raise DocumentSemanticError(f"duplicate knot id {kid!r}", path=f"{path}.id")
        names.append(kid)
        if "pin" in item:
            pin = item["pin"]
            if (not isinstance(pin, list)
                    or not all(isinstance(v, (int, float)) for v in pin)):
                raise DocumentSemanticError("pin must be an array of numbers", path=f"{path}.pin")
            pins[i + 1] = [float(v) for v in pin]

    index = {name: i + 1 for i, name in enumerate(names)}
    edges_spec = _require(doc, "edges", "edges")
    if not isinstance(edges_spec, list) or not edges_spec:
        raise DocumentSemanticError("edges must be a non-empty array", path="edges")
    edges = []
    for i, item in enumerate(edges_spec):
        path = f"edges[{i}]"
        if not isinstance(item, dict):
            raise DocumentSemanticError("edge entries must be objects", path=path)
        _reject_unknown(item, {"from", "to", "length"}, path)
        a = _require(item, "from", f"{path}.from")
        b = _require(item, "to", f"{path}.to")
        length = _require(item, "length", f"{path}.length")
        for end, label in ((a, "from"), (b, "to")):
            if end not in index:
                raise DocumentSemanticError(f"edge references unknown knot id {end!r}",
                                            path=f"{path}.{label}")
        if not isinstance(length, (int, float)):
            raise DocumentSemanticError("length must be a number", path=f"{path}.length")
        edges.append((index[a], index[b], float(length)))

    material = Material()
    if "material" in doc:
        mat = doc["material"]
        if not isinstance(mat, dict):
            raise DocumentSemanticError("material must be an object", path="material")
        _reject_unknown(mat, {"A", "E"}, "material")
        material = Material(
            modulus=float(mat.get("E", 1.0)),
            area=float(mat.get("A", 1.0)),
        )

    from .errors import FramesnapError

    try:
        framework = build_framework(dimension, names, edges, pins, material)
    except FramesnapError as exc:
        raise DocumentSemanticError(str(exc)) from exc

    named: dict[str, Realization] = {}
    for name, coords in (doc.get("named_realizations") or {}).items():
        path = f"named_realizations.{name}"
        if not isinstance(coords, dict):
            raise DocumentSemanticError("a named realization maps knot ids to coordinates",
                                        path=path)
        arr = np.zeros((len(names), dimension))
        for kid, vec in coords.items():
            if kid not in index:
                raise DocumentSemanticError(f"unknown knot id {kid!r}", path=f"{path}.{kid}")
            if not isinstance(vec, list) or len(vec) != dimension:
                raise DocumentSemanticError(
                    f"coordinates must be arrays of {dimension} numbers",
                    path=f"{path}.{kid}")
            arr[index[kid] - 1] = vec
        missing = set(names) - set(coords)
        if missing:
            raise DocumentSemanticError(f"missing coordinates for {sorted(missing)}", path=path)
        try:
            named[name] = build_realization(framework, arr)
        except FramesnapError as exc:
            raise DocumentSemanticError(str(exc), path=path) from exc
    return framework, named


def framework_to_document(framework: Framework,
                          named: dict[str, Realization] | None = None) -> str:
    doc = {
        "dimension": framework.dimension,
        "knots": [
            {"id": name, **({"pin": list(framework.pins[i + 1])}
                            if (i + 1) in framework.pins else {})}
            for i, name in enumerate(framework.knots)
        ],
        "edges": [
            {"from": framework.knots[i - 1], "to": framework.knots[j - 1],
             "length": framework.rest_lengths[e]}
            for e, (i, j) in enumerate(framework.edges)
        ],
        "material": {"E": framework.material.modulus, "A": framework.material.area},
    }
    if named:
        doc["named_realizations"] = {
            name: {kid: list(map(float, r.coordinates[k]))
                   for k, kid in enumerate(framework.knots)}
            for name, r in named.items()
        }
    return json.dumps(doc, indent=2)


def _coords_map(framework: Framework, realization: Realization) -> dict:
    return {name: [float(v) for v in realization.coordinates[i]]
            for i, name in enumerate(framework.knots)}


def _point_record(framework: Framework, p: CriticalPoint) -> dict:
    return {
        "classification": p.classification,
        "coordinates": _coords_map(framework, p.realization),
        "free_coordinates": [float(v) for v in p.free_coordinates],
        "edge_lengths": [float(v) for v in p.lengths],
        "energy": p.energy,
        "density": p.density,
        "gradient_norm": p.gradient_norm,
        "hessian_eigenvalues": [float(v) for v in p.hessian_eigenvalues],
        "self_stress": {
            "omega": [float(v) for v in p.stress.omega],
            "residual": p.stress.residual,
        },
        "auxiliary_lengths": [float(v) for v in p.q],
        "multipliers": [float(v) for v in p.multipliers],
    }


def _finite_or_text(v: float):
    return "infinity" if math.isinf(v) else v


def report_document(framework: Framework, catalog: RealizationCatalog,
                    snappability: SnappabilityReport | None = None) -> dict:
    doc = {
        "framework": {
            "dimension": framework.dimension,
            "knots": list(framework.knots),
            "edges": [
                {"from": framework.knots[i - 1], "to": framework.knots[j - 1],
                 "length": float(framework.rest_lengths[e])}
                for e, (i, j) in enumerate(framework.edges)
            ],
            "pins": {framework.knots[k - 1]: [float(v) for v in vec]
                     for k, vec in sorted(framework.pins.items())},
            "material": {"E": framework.material.modulus, "A": framework.material.area},
            "total_rest_length": framework.total_rest_length,
        },
        "solver": {
            "backend": catalog.stats.backend,
            "paths_tracked": catalog.stats.paths_tracked,
            "failures": catalog.stats.failures,
            "raw_solutions": catalog.stats.raw_solutions,
            "deduplicated": catalog.stats.deduplicated,
        },
        "stable": [_point_record(framework, p) for p in catalog.stable],
        "unstable": [_point_record(framework, p) for p in catalog.unstable],
    }
    if snappability is not None:
        doc["snappability"] = {
            "per_stable": [
                {
                    "stable_index": e.stable_index,
                    "index": _finite_or_text(e.value),
                    "saddle_index": e.saddle_index,
                    "attempts": [
                        {"saddle_index": a.saddle_index, "outcome": a.outcome,
                         **({"status": a.status} if a.status else {})}
                        for a in e.attempts
                    ],
                    **({"relaxation": _relaxation_record(framework, e.relaxation)}
                       if e.relaxation is not None else {}),
                }
                for e in snappability.entries
            ],
            "framework_index": _finite_or_text(snappability.framework_index),
        }
    return doc


def _relaxation_record(framework: Framework, relaxation) -> dict:
    state = relaxation.gradient_flow
    record = {
        "classification": state.classification,
        "final_coordinates": _coords_map(framework, state.realization),
        "final_energy": state.energy,
        "self_stress_norm": state.stress_norm,
        "self_stress_residual": state.stress_residual,
        "continuation_status": relaxation.continuation.status,
    }
    boundary = relaxation.continuation.boundary
    if boundary is not None:
        record["boundary"] = {
            "t": boundary.t,
            "coordinates": _coords_map(framework, boundary.realization),
            "sigma_min": boundary.sigma_min,
        }
    return record


def _text_table(rows: list[list[str]], header: list[str]) -> str:
    table = [header] + rows
    widths = [max(len(r[c]) for r in table) for c in range(len(header))]
    lines = []
    for i, row in enumerate(table):
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)


def emit_report(framework: Framework, catalog: RealizationCatalog,
                snappability: SnappabilityReport | None = None,
                format: str = "json") -> str:
    """Serialize catalog (+ optional snappability report) as JSON or text."""
    doc = report_document(framework, catalog, snappability)
    if format == "json":
        return json.dumps(doc, indent=2)
    if format != "text":
        raise DocumentSemanticError(f"unknown report format {format!r}")

    out = io.StringIO()
    fw = doc["framework"]
    out.write(f"framework: {len(fw['knots'])} knots, {len(fw['edges'])} edges, "
              f"dimension {fw['dimension']}, total rest length {fw['total_rest_length']:.6g}\n")
    out.write(f"solver: {doc['solver']['backend']}, paths tracked "
              f"{doc['solver']['paths_tracked']}, failures {doc['solver']['failures']}\n\n")
    for title, key in (("stable realizations", "stable"), ("unstable realizations", "unstable")):
        out.write(f"{title} ({len(doc[key])})\n")
        rows = []
        for i, p in enumerate(doc[key]):
            rows.append([
                str(i),
                p["classification"],
                "%.9g" % p["energy"],
                "%.9g" % p["density"],
                " ".join("%.6g" % v for v in p["free_coordinates"]),
            ])
        out.write(_text_table(rows, ["#", "class", "energy", "density", "free coordinates"]))
        out.write("\n\n")
    if "snappability" in doc:
        snap = doc["snappability"]
        rows = []
        for e in snap["per_stable"]:
            idx = e["index"]
            rows.append([
                str(e["stable_index"]),
                idx if isinstance(idx, str) else "%.9g" % idx,
                str(e["saddle_index"]) if e["saddle_index"] is not None else "-",
                str(len(e["attempts"])),
            ])
        out.write("snappability\n")
        out.write(_text_table(rows, ["stable", "index", "via saddle", "attempts"]))
        fi = snap["framework_index"]
        fi_text = fi if isinstance(fi, str) else "%.9g" % fi
        out.write(f"\n\nframework snappability index: {fi_text}\n")
    return out.getvalue()


def export_trajectory(framework: Framework, path: DeformationPath,
                      destination=None) -> str:
    """CSV with one row per path sample: t, energy, density, knot coordinates."""
    if len(path.samples) < 2:
        raise EmptyPath("a deformation path needs at least two samples to export")
    axes = _AXES[:framework.dimension]
    header = ["t", "U", "density"]
    for name in framework.knots:
        header += [f"{name}_{a}" for a in axes]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for s in path.samples:
        row = [_fmt(s.t), _fmt(s.energy), _fmt(s.density)]
        for k in range(framework.num_knots):
            row += [_fmt(v) for v in s.realization.coordinates[k]]
        writer.writerow(row)
    text = buf.getvalue()
    if destination is not None:
        with open(destination, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text


def _fmt(v: float) -> str:
    return "%.12g" % float(v)
