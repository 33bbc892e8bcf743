"""Command-line interface.

Subcommands: catalog (stable/unstable realizations), snappability (indices
plus framework index), snap-path (export one deformation as CSV), render
(SVG). Reports go to --output or stdout; --figure renders a matplotlib
figure alongside the main output.

Exit codes: 0 success, 2 input error, 3 solver failure, 4 no undeformed
realization.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .catalog import SolverConfig, build_catalog
from .documents import emit_report, export_trajectory, parse_framework
from .errors import (
    DocumentSemanticError,
    DocumentSyntaxError,
    FramesnapError,
    NoUndeformedRealization,
    SolverFailure,
)
from .snapping import (
    CONTINUE,
    FORWARD,
    SnapConfig,
    snappability_report,
    track_segment,
)
from .svgrender import render_catalog_svg, render_svg

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_SOLVER = 3
EXIT_NO_UNDEFORMED = 4


def _common_flags(p: argparse.ArgumentParser):
    p.add_argument("--input", required=True, help="framework document (JSON)")
    p.add_argument("--output", help="output file (default: stdout)")
    p.add_argument("--solver", default="total-degree",
                   choices=["total-degree", "multistart", "both"])
    p.add_argument("--seed", type=int, default=0, help="solver RNG seed")
    p.add_argument("--steps", type=int, default=200,
                   help="segment discretization (default 200)")
    p.add_argument("--tol-real", type=float, default=1e-8,
                   help="imaginary-part filter for solver endpoints")
    p.add_argument("--tol-energy", type=float, default=1e-10,
                   help="undeformed-energy floor, relative to A*L")
    p.add_argument("--format", default="json", choices=["json", "text"])
    p.add_argument("--starts", type=int, default=4000,
                   help="multistart sample count")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--max-paths", type=int, default=500_000,
                   help="homotopy path budget")
    p.add_argument("--start-structure", default="grouped",
                   choices=["grouped", "total"],
                   help="homotopy start system structure")
    p.add_argument("--figure", help="also render a matplotlib figure to this file")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="framesnap",
        description="Critical points, stability and snappability of elastic "
                    "bar-joint frameworks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("catalog", help="compute stable and unstable realizations")
    _common_flags(p)

    p = sub.add_parser("snappability", help="catalog plus snappability indices")
    _common_flags(p)

    p = sub.add_parser("snap-path", help="export one snap deformation as CSV")
    _common_flags(p)
    p.add_argument("--start", default="stable:0",
                   help="named realization or stable:<i> (default stable:0)")
    p.add_argument("--target", default="saddle:0",
                   help="named realization or saddle:<i> (default saddle:0)")
    p.add_argument("--mode", default="forward", choices=["forward", "continue"])

    p = sub.add_parser("render", help="render realizations as SVG")
    _common_flags(p)
    p.add_argument("--include", default="all", choices=["all", "stable", "unstable", "named"])
    return parser


def _solver_config(args) -> SolverConfig:
    return SolverConfig(
        backend=args.solver,
        seed=args.seed,
        workers=args.workers,
        starts=args.starts,
        start_structure=args.start_structure,
        max_paths=args.max_paths,
        tol_real=args.tol_real,
        tol_energy_factor=args.tol_energy,
    )


def _read_input(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise DocumentSemanticError(f"cannot read {path}: {exc}") from exc
    return parse_framework(text)


def _write_output(args, text: str):
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")


def _resolve_realization(spec: str, named, catalog):
    if spec.startswith("stable:"):
        idx = int(spec.split(":", 1)[1])
        return catalog.stable[idx].realization, None
    if spec.startswith("saddle:"):
        idx = int(spec.split(":", 1)[1])
        return catalog.unstable[idx].realization, catalog.unstable[idx]
    if spec in named:
        return named[spec], None
    raise DocumentSemanticError(
        f"unknown realization {spec!r}; use a named realization, stable:<i> or saddle:<i>"
    )


def _needs_catalog(args) -> bool:
    if args.command in ("catalog", "snappability"):
        return True
    if args.command == "snap-path":
        return args.start.startswith(("stable:", "saddle:")) \
            or args.target.startswith(("stable:", "saddle:"))
    return args.include != "named"


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        framework, named = _read_input(args.input)
        config = _solver_config(args)
        snap_config = SnapConfig(steps=args.steps)
        catalog = build_catalog(framework, config) if _needs_catalog(args) else None
        figure = None

        if args.command == "catalog":
            _write_output(args, emit_report(framework, catalog, None, args.format))
            if args.figure:
                from . import figures
                figure = figures.plot_catalog(framework, catalog)

        elif args.command == "snappability":
            report = snappability_report(framework, catalog, snap_config, config)
            _write_output(args, emit_report(framework, catalog, report, args.format))
            if args.figure:
                from . import figures
                figure = figures.plot_catalog(framework, catalog)

        elif args.command == "snap-path":
            start, _ = _resolve_realization(args.start, named, catalog)
            target_r, _ = _resolve_realization(args.target, named, catalog)
            from .framework import edge_lengths
            from .snapping import REACHED_TARGET, _branch_hints

            target = edge_lengths(framework, target_r)
            mode = FORWARD if args.mode == "forward" else CONTINUE
            path = None
            for hint in _branch_hints(framework, start, snap_config):
                path = track_segment(framework, start, target, steps=args.steps,
                                     mode=mode, branch_hint=hint,
                                     config=snap_config)
                if path.status == REACHED_TARGET:
                    break
            text = export_trajectory(framework, path)
            _write_output(args, text)
            sys.stderr.write(f"status: {path.status}\n")
            if args.figure:
                from . import figures
                figure = figures.plot_deformation(framework, path)

        elif args.command == "render":
            if args.include == "named":
                svg = render_svg(framework, list(named.values()),
                                 labels=list(named.keys()))
            else:
                svg = render_catalog_svg(framework, catalog, include=args.include)
            _write_output(args, svg)

        if figure is not None:
            from . import figures
            figures.save_figure(figure, args.figure)
        return EXIT_OK

    except NoUndeformedRealization as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_NO_UNDEFORMED
    except SolverFailure as exc:
        sys.stderr.write(f"solver failure: {exc}\n")
        return EXIT_SOLVER
    except (DocumentSyntaxError, DocumentSemanticError, FramesnapError, OSError) as exc:
        sys.stderr.write(f"input error: {exc}\n")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
