#!/usr/bin/env python3
"""End-to-end demo run against the built-in stub models.

Generates a synthetic cohort, runs `predict` for a base and a
context-enriched ("best") prompt configuration with a deterministic
noise stub, then merges the two reports. Everything lands under the
chosen output directory; no network access is needed.

Usage:
    python scripts/run_stub_benchmark.py --output-dir /tmp/stub_run \
        [--model noise-42] [--n-patients 60] [--seed 0]
"""

import argparse
import json
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from ehrbench.cli import main as cli_main
from ehrbench.synthetic import (
    synthetic_cohort,
    write_catalog_csv,
    write_cohort_jsonl,
)


def run_config(args, data_dir, label, prompt):
    config = {
        "label": label,
        "data": {
            "cohort": os.path.join(data_dir, "cohort.jsonl"),
            "catalog": os.path.join(data_dir, "catalog.csv"),
            "task": "mortality",
        },
        "split": {"train_frac": 0.6, "val_frac": 0.1, "test_frac": 0.3,
                  "seed": args.seed},
        "prompt": prompt,
        "endpoint": {"base_url": "stub", "model_name": args.model},
        "bootstrap": {"n": 10, "seed": args.seed},
        "output_dir": os.path.join(args.output_dir, label),
    }
    path = os.path.join(args.output_dir, f"{label}.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(config, fh, indent=2)
    code = cli_main(["predict", "--config", path])
    if code != 0:
        raise SystemExit(code)
    return os.path.join(config["output_dir"], "report.json")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--output-dir", required=True)
    parser.add_argument("--model", default="noise-42",
                        help="stub model name (echo-<p>, refuse, garbage, "
                             "noise-<seed>)")
    parser.add_argument("--n-patients", type=int, default=60)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    os.makedirs(args.output_dir, exist_ok=True)
    data_dir = os.path.join(args.output_dir, "data")
    os.makedirs(data_dir, exist_ok=True)
    cohort = synthetic_cohort(n_patients=args.n_patients, seed=args.seed)
    write_catalog_csv(cohort.catalog, os.path.join(data_dir, "catalog.csv"))
    write_cohort_jsonl(cohort, os.path.join(data_dir, "cohort.jsonl"))

    reports = [
        run_config(args, data_dir, "base", {}),
        run_config(args, data_dir, "best",
                   {"include_units": True, "include_ranges": True,
                    "n_icl_examples": 2}),
    ]
    code = cli_main(["report-merge", *reports,
                     "--output-dir", os.path.join(args.output_dir, "merged")])
    if code != 0:
        raise SystemExit(code)
    print(f"merged comparison written to "
          f"{os.path.join(args.output_dir, 'merged', 'merged.csv')}")


if __name__ == "__main__":
    main()
