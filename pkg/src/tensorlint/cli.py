"""Command-line driver: parse, lower, analyze, check, report."""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

from .analysis import build, callgraph_json
from .frontend import FrontendError, lower_module, parse_module
from .models import DEFAULT_MODEL, ModelError, load_models, resolve_model
from .shapes import ShapeConfig
from .tensor_analysis import (
    DEFAULT_CAP, DeclarationError, Diagnostic, SiteVerdict, TypeLine, check, load_declarations,
    propagate, type_listing,
)

EXIT_OK, EXIT_FINDINGS, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    files: List[str]
    models: List[str] = field(default_factory=lambda: [DEFAULT_MODEL])
    annotations: Optional[str] = None
    format: str = "text"
    fail_on_error: bool = False
    dump_types: bool = False
    dump_callgraph: bool = False
    hw_order: str = "strict"
    numeric_labels: Optional[List[str]] = None
    widen_cap: int = DEFAULT_CAP

    def shape_config(self) -> ShapeConfig:
        cfg = ShapeConfig(strict_order=self.hw_order == "strict")
        if self.numeric_labels is not None:
            cfg = ShapeConfig(strict_order=cfg.strict_order, numeric_labels=frozenset(self.numeric_labels))
        return cfg


@dataclass
class Report:
    diagnostics: List[Diagnostic]
    types: List[TypeLine] = field(default_factory=list)
    callgraph: Optional[dict] = None
    verdicts: List[SiteVerdict] = field(default_factory=list)
    exit_code: int = 0

    @property
    def summary(self) -> dict:
        return {"errors": sum(d.severity == "error" for d in self.diagnostics),
                "warnings": sum(d.severity == "warning" for d in self.diagnostics)}

    def to_json(self, dump_types: bool = False) -> dict:
        out = {"diagnostics": [d.to_json() for d in self.diagnostics], "summary": self.summary}
        if dump_types:
            out["types"] = [t.to_json() for t in self.types]
        if self.callgraph is not None:
            out["callgraph"] = self.callgraph
        return out


def exit_code(summary: dict, fail_on_error: bool) -> int:
    """Errors always fail; with ``fail_on_error`` warnings fail too."""
    if summary["errors"]:
        return EXIT_FINDINGS
    if fail_on_error and summary["warnings"]:
        return EXIT_FINDINGS
    return EXIT_OK


def run(config: RunConfig) -> Report:
    if not config.files:
        raise UsageError("no source files given")
    for path in config.files:
        if not os.path.isfile(path):
            raise UsageError(f"no such file: {path}")
    if config.annotations and not os.path.isfile(config.annotations):
        raise UsageError(f"no such file: {config.annotations}")
    if config.widen_cap < 1:
        raise UsageError("--widen-cap must be at least 1")
    try:
        models = load_models([resolve_model(m) for m in config.models])
    except FileNotFoundError as exc:
        raise UsageError(f"model not found: {exc.args[0]}") from None
    except ModelError as exc:
        raise UsageError(f"bad model: {exc}") from None
    try:
        decls = load_declarations(config.annotations) if config.annotations else []
    except (DeclarationError, json.JSONDecodeError) as exc:
        raise UsageError(f"bad annotations file {config.annotations}: {exc}") from None

    shape_config = config.shape_config()
    report = Report([])
    graphs = []
    for path in config.files:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
        try:
            module = lower_module(parse_module(text, path))
        except FrontendError as exc:
            raise UsageError(str(exc)) from None
        cg, g = build([module], models)
        est = propagate(g, cg, decls, models, shape_config, config.widen_cap)
        report.diagnostics.extend(check(g, cg, est, models, report.verdicts))
        if config.dump_types:
            report.types.extend(type_listing(g, est))
        if config.dump_callgraph:
            graphs.append(callgraph_json(cg, g))
    # a declaration only has to match in one of the files
    if len(config.files) > 1:
        report.diagnostics = _merge_selector_warnings(report.diagnostics, len(config.files))
    report.diagnostics.sort(key=Diagnostic.sort_key)
    if config.dump_callgraph:
        report.callgraph = _merge_graphs(graphs)
    report.exit_code = exit_code(report.summary, config.fail_on_error)
    return report


def _merge_selector_warnings(diags: List[Diagnostic], n_files: int) -> List[Diagnostic]:
    counts = {}
    for d in diags:
        if d.code == "ARI009":
            counts[d.message] = counts.get(d.message, 0) + 1
    out, seen = [], set()
    for d in diags:
        if d.code == "ARI009":
            if counts[d.message] < n_files or d.message in seen:
                continue
            seen.add(d.message)
        out.append(d)
    return out


def _merge_graphs(graphs: List[dict]) -> dict:
    if len(graphs) == 1:
        return graphs[0]
    out = {"nodes": [], "edges": [], "unresolved": [], "points_to": []}
    for g in graphs:
        out["nodes"] = sorted(set(out["nodes"]) | set(g["nodes"]))
        for key in ("edges", "unresolved", "points_to"):
            out[key].extend(g.get(key, []))
    return out


def dump_types(config: RunConfig) -> List[str]:
    config = RunConfig(**{**config.__dict__, "dump_types": True})
    return [t.format() for t in run(config).types]


def render(report: Report, config: RunConfig) -> str:
    if config.format == "json":
        return json.dumps(report.to_json(config.dump_types), indent=2, sort_keys=True) + "\n"
    lines = []
    if config.dump_types:
        lines.extend(t.format() for t in report.types)
    lines.extend(d.format() for d in report.diagnostics)
    if report.callgraph is not None:
        lines.append(json.dumps(report.callgraph, indent=2, sort_keys=True))
    return "".join(line + "\n" for line in lines)


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tensorlint",
                                 description="Check tensor shapes in TensorFlow programs.")
    ap.add_argument("files", nargs="+", metavar="FILES")
    ap.add_argument("--model", action="append", dest="models", metavar="PATH",
                    help=f"library model file (repeatable; default {DEFAULT_MODEL})")
    ap.add_argument("--annotations", metavar="PATH", help="sidecar JSON with input declarations")
    ap.add_argument("--format", choices=("text", "json"), default="text")
    ap.add_argument("--fail-on-error", action="store_true",
                    help="exit non-zero on warnings as well as errors")
    ap.add_argument("--dump-types", action="store_true")
    ap.add_argument("--dump-callgraph", action="store_true")
    ap.add_argument("--hw-order", choices=("strict", "loose"), default="strict")
    ap.add_argument("--numeric-labels", metavar="a,b,c",
                    help="element labels treated as numeric (replaces the default set)")
    ap.add_argument("--widen-cap", type=int, default=DEFAULT_CAP, metavar="N")
    return ap


def config_from_args(argv: Optional[Sequence[str]] = None) -> RunConfig:
    args = _parser().parse_args(argv)
    labels = None
    if args.numeric_labels is not None:
        labels = [s.strip() for s in args.numeric_labels.split(",") if s.strip()]
    return RunConfig(files=args.files, models=args.models or [DEFAULT_MODEL],
                     annotations=args.annotations, format=args.format,
                     fail_on_error=args.fail_on_error, dump_types=args.dump_types,
                     dump_callgraph=args.dump_callgraph, hw_order=args.hw_order,
                     numeric_labels=labels, widen_cap=args.widen_cap)


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        config = config_from_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        report = run(config)
    except UsageError as exc:
        print(f"tensorlint: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    sys.stdout.write(render(report, config))
    s = report.summary
    if config.format == "text":
        print(f"{s['errors']} error(s), {s['warnings']} warning(s)", file=sys.stderr)
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
