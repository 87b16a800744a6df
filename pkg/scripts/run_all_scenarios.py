"""Run every shipped scenario with default parameters into one output tree.

Covers both polarities of the two scenarios that have an expected-violation
mode, so a full pass exercises all nine report flavors.
"""

import argparse
import sys
import time

from levicheck.cli import run_scenario

RUNS = [
    ("levi-check-ball", {"scenario": "levi-check"}),
    (
        "levi-check-g2",
        {
            "scenario": "levi-check",
            "expect_violation": True,
            "params": {"model": "g2"},
        },
    ),
    ("mollify-sweep", {"scenario": "mollify-sweep"}),
    ("staircase-build", {"scenario": "staircase-build"}),
    ("hartogs-scan-ball", {"scenario": "hartogs-scan"}),
    (
        "hartogs-scan-staircase",
        {
            "scenario": "hartogs-scan",
            "expect_violation": True,
            "params": {"cap": "staircase"},
        },
    ),
    ("cantor-potential", {"scenario": "cantor-potential"}),
    ("green-identity", {"scenario": "green-identity"}),
    ("slice-check", {"scenario": "slice-check"}),
]


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--outdir", default="out", help="root for per-run outputs")
    parser.add_argument(
        "--only", default=None, help="run only the configs whose name contains this"
    )
    args = parser.parse_args()

    failed = []
    for name, config in RUNS:
        if args.only and args.only not in name:
            continue
        config = dict(config, outdir=f"{args.outdir}/{name}")
        start = time.perf_counter()
        report, outdir = run_scenario(config)
        status = "pass" if report["passed"] else "FAIL"
        print(
            f"{name:24s} {status}  {len(report['assertions'])} assertions  "
            f"{time.perf_counter() - start:6.2f}s  {outdir}"
        )
        if not report["passed"]:
            failed.append(name)
    if failed:
        print("failed: " + ", ".join(failed), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
