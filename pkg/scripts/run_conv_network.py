"""Run the checker on the vendored conv_network example and its variants.

    python scripts/run_conv_network.py

Prints the inferred type at every expected point, then the diagnostics for
the two reshape mutants and the swapped-axes declaration.
"""

import json
import os
import sys
import tempfile
import time

from tensorlint.cli import RunConfig, run
from tensorlint.tensor_types import parse_type, type_equal

HERE = os.path.dirname(os.path.abspath(__file__))
CORPUS = os.path.join(HERE, "..", "corpus")
SOURCE = os.path.join(CORPUS, "conv_network.py")
SIDECAR = os.path.join(CORPUS, "conv_network.annotations.json")
RESHAPE = "shape=[-1, 28, 28, 1]"


def regression():
    with open(os.path.join(CORPUS, "conv_network.expected.json"), encoding="utf-8") as fh:
        expected = json.load(fh)
    t0 = time.perf_counter()
    report = run(RunConfig(files=[SOURCE], annotations=SIDECAR, dump_types=True))
    elapsed = time.perf_counter() - t0
    got = {t.line: t.text for t in report.types}
    ok = True
    for p in expected["points"] + expected["additional"]:
        text = got.get(p["line"])
        same = text is not None and type_equal(parse_type(text), parse_type(p["type"]))
        ok &= same
        print(f"  {'ok ' if same else 'BAD'} line {p['line']:>3} {p['name']:<20} {text}")
    print(f"  errors: {report.summary['errors']}  time: {elapsed:.2f}s")
    return ok and not report.summary["errors"]


def variant(label, source_text, sidecar_text=None, hw_order="strict"):
    with tempfile.TemporaryDirectory() as tmp:
        src = os.path.join(tmp, "conv_network.py")
        with open(src, "w", encoding="utf-8") as fh:
            fh.write(source_text)
        ann = SIDECAR
        if sidecar_text is not None:
            ann = os.path.join(tmp, "sidecar.json")
            with open(ann, "w", encoding="utf-8") as fh:
                fh.write(sidecar_text)
        report = run(RunConfig(files=[src], annotations=ann, hw_order=hw_order))
    print(f"{label}:")
    for d in report.diagnostics:
        print(f"  {d.span.line_start}:{d.span.col_start} {d.severity} {d.code}: {d.message}")
    if not report.diagnostics:
        print("  (no diagnostics)")
    return report


def main():
    with open(SOURCE, encoding="utf-8") as fh:
        text = fh.read()
    with open(SIDECAR, encoding="utf-8") as fh:
        sidecar = fh.read()
    print("conv_network types:")
    ok = regression()
    variant("reshape to [-1, 56, 14, 1]", text.replace(RESHAPE, "shape=[-1, 56, 14, 1]"))
    variant("reshape to [-1, 28, 27, 1]", text.replace(RESHAPE, "shape=[-1, 28, 27, 1]"))
    swapped = sidecar.replace("y(28)*x(28)", "x(28)*y(28)")
    variant("x/y swapped, strict order", text, swapped, "strict")
    variant("x/y swapped, loose order", text, swapped, "loose")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
