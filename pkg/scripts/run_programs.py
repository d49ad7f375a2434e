"""Rebuild the verified-API matrix over the vendored example programs.

    python scripts/run_programs.py [--manifest corpus/programs/manifest.json] [--json]

A tick means at least one call to that API was checked and passed; a cross
means no call passed (for these programs: the API is not called at all).
Exits 1 if the matrix differs from the manifest or any program has errors.
"""

import argparse
import json
import os
import sys

from tensorlint.cli import RunConfig, run
from tensorlint.tensor_analysis import verified_apis

HERE = os.path.dirname(os.path.abspath(__file__))
DEFAULT_MANIFEST = os.path.join(HERE, "..", "corpus", "programs", "manifest.json")


def analyze(manifest_path):
    with open(manifest_path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    base = os.path.dirname(os.path.abspath(manifest_path))
    rows = []
    for prog in manifest["programs"]:
        ann = prog.get("annotations")
        report = run(RunConfig(files=[os.path.join(base, prog["file"])],
                               annotations=os.path.join(base, ann) if ann else None))
        verified = verified_apis(report.verdicts)
        called = {v.tag for v in report.verdicts}
        rows.append({
            "name": prog["name"],
            "verified": {c: c in verified for c in manifest["columns"]},
            "called": {c: c in called for c in manifest["columns"]},
            "expected": prog["expected"],
            "errors": report.summary["errors"],
            "warnings": report.summary["warnings"],
        })
    return manifest["columns"], rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--manifest", default=DEFAULT_MANIFEST)
    ap.add_argument("--json", action="store_true")
    args = ap.parse_args(argv)
    columns, rows = analyze(args.manifest)
    if args.json:
        print(json.dumps(rows, indent=2))
    else:
        print(f"{'program':<15}" + "".join(f"{c:>13}" for c in columns) + "   errors  match")
        for r in rows:
            cells = "".join(f"{'yes' if r['verified'][c] else 'no':>13}" for c in columns)
            ok = r["verified"] == r["expected"]
            print(f"{r['name']:<15}{cells}   {r['errors']:>6}  {'ok' if ok else 'DIFF'}")
    bad = [r for r in rows if r["verified"] != r["expected"] or r["errors"]]
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main())
