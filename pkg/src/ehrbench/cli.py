"""Command-line entry points: predict, prompt-preview, eval-sentences,
eval-icd, report-merge.

A run is described by one JSON config with sections {label, data, split,
prompt, endpoint, bootstrap, decode, output_dir}. The config is fingerprinted
(sha256 of its key-sorted JSON) and echoed into every report so results stay
attributable. Report writes are atomic (temp file + rename).
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
import tempfile
import time

from . import ehr, gateway, icd, metrics, prompts
from .errors import (
    EhrBenchError,
    InvariantViolation,
    ParseError,
    UnknownCode,
    UnknownSample,
)


def config_fingerprint(config_dict):
    """sha256 of the key-sorted compact JSON form; insensitive to key order."""
    blob = json.dumps(config_dict, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _dataclass_kwargs(section, allowed):
    unknown = set(section) - set(allowed)
    if unknown:
        raise InvariantViolation(f"unknown config keys {sorted(unknown)}")
    return dict(section)


def load_run_config(path):
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    required = {"data", "split", "prompt", "endpoint", "output_dir"}
    missing = required - raw.keys()
    if missing:
        raise InvariantViolation(f"config missing sections {sorted(missing)}")
    for p in (raw["data"].get("cohort"), raw["data"].get("catalog"),
              raw["data"].get("labels")):
        if p is not None and not os.path.exists(p):
            raise InvariantViolation(f"referenced path does not exist: {p}")
    if "seed" not in raw["split"]:
        raise InvariantViolation("split.seed is required")
    return raw


def _build_config_objects(raw):
    prompt_cfg = prompts.PromptConfig(
        **_dataclass_kwargs(raw["prompt"], prompts.PromptConfig.__dataclass_fields__)
    )
    endpoint_cfg = gateway.EndpointConfig(
        **_dataclass_kwargs(raw["endpoint"],
                            gateway.EndpointConfig.__dataclass_fields__)
    )
    split_spec = ehr.SplitSpec(
        **_dataclass_kwargs(raw["split"], ehr.SplitSpec.__dataclass_fields__)
    )
    return prompt_cfg, endpoint_cfg, split_spec


def _load_data(raw):
    data = raw["data"]
    catalog = ehr.load_catalog(data["catalog"])
    cohort = ehr.load_cohort(
        data["cohort"], catalog, data["task"], labels_path=data.get("labels")
    )
    return cohort


def _atomic_write(path, content):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(content)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


def _write_json(path, payload):
    _atomic_write(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _write_csv(path, header, rows):
    import io

    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(header)
    writer.writerows(rows)
    _atomic_write(path, buf.getvalue())


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    return x


def cmd_predict(args):
    raw = load_run_config(args.config)
    fingerprint = config_fingerprint(raw)
    prompt_cfg, endpoint_cfg, split_spec = _build_config_objects(raw)
    cohort = _load_data(raw)
    splits = ehr.split_cohort(cohort, split_spec)
    t0 = time.monotonic()

    icl_spec = None
    if prompt_cfg.n_icl_examples > 0:
        time_kind = (
            splits.test.records[0].time_kind if splits.test.records
            else ehr.TIME_ORDINAL
        )
        icl_spec = prompts.icl_spec_from_cohort(
            splits.train, seed=split_spec.seed, time_kind=time_kind
        )

    rendered = {
        rec.patient_id: prompts.build_prompt(
            rec, cohort.catalog, prompt_cfg, icl_spec=icl_spec
        )
        for rec in splits.test.records
    }
    raw_results = gateway.complete_batch(rendered, endpoint_cfg)

    outcomes = {}
    n_errors = 0
    for sid, result in raw_results.items():
        if isinstance(result, Exception):
            n_errors += 1
            outcomes[sid] = gateway.PredictionOutcome(
                sid, "missing", None, f"<error: {result}>"
            )
        else:
            outcomes[sid] = gateway.decode_probability(result, sample_id=sid)

    count_unknown = raw.get("decode", {}).get("count_unknown_as_missing", False)
    rate = gateway.missing_rate(
        list(outcomes.values()), count_unknown_as_missing=count_unknown
    )

    labels = {rec.patient_id: rec.label for rec in splits.test.records}
    samples = [
        metrics.ScoredSample(
            sample_id=sid,
            score=o.probability if o.probability is not None else 0.5,
            label=labels[sid],
        )
        for sid, o in sorted(outcomes.items())
    ]
    boot = raw.get("bootstrap", {"n": 10, "seed": 0})
    metric_results = {}
    for name, fn in (("auroc", metrics.auroc), ("auprc", metrics.auprc)):
        try:
            result = metrics.bootstrap(
                fn, samples, n=boot.get("n", 10), seed=boot.get("seed", 0)
            )
            metric_results[name] = {"mean": result.mean, "std": result.std,
                                    "n_resamples": result.n_resamples,
                                    "seed": result.seed}
        except (metrics.SingleClass, metrics.NoPositives) as exc:
            metric_results[name] = {"error": str(exc)}

    out_dir = raw["output_dir"]
    os.makedirs(out_dir, exist_ok=True)
    transcript_lines = []
    for sid in sorted(outcomes):
        o = outcomes[sid]
        transcript_lines.append(json.dumps({
            "sample_id": sid,
            "prompt_sha256": hashlib.sha256(
                rendered[sid].text.encode("utf-8")).hexdigest(),
            "raw_text": o.raw_text,
            "status": o.status,
            "probability": o.probability,
        }, sort_keys=True))
    _atomic_write(os.path.join(out_dir, "transcript.jsonl"),
                  "".join(line + "\n" for line in transcript_lines))

    status_counts = {}
    for o in outcomes.values():
        status_counts[o.status] = status_counts.get(o.status, 0) + 1
    elapsed = time.monotonic() - t0
    report = {
        "label": raw.get("label", ""),
        "fingerprint": fingerprint,
        "config": raw,
        "missing_rate": {
            "n_test": rate.n_test,
            "n_decoded": rate.n_decoded,
            "percent": rate.missing_rate_percent,
        },
        "status_counts": status_counts,
        "metrics": metric_results,
        "n_errors": n_errors,
        "timing": {"seconds": elapsed},
    }
    _write_json(os.path.join(out_dir, "report.json"), report)
    _write_csv(
        os.path.join(out_dir, "report.csv"),
        ["label", "fingerprint", "n_test", "n_decoded", "missing_rate_percent",
         "auroc_mean", "auroc_std", "auprc_mean", "auprc_std"],
        [[report["label"], fingerprint, rate.n_test, rate.n_decoded,
          rate.missing_rate_percent,
          _fmt(metric_results["auroc"].get("mean")),
          _fmt(metric_results["auroc"].get("std")),
          _fmt(metric_results["auprc"].get("mean")),
          _fmt(metric_results["auprc"].get("std"))]],
    )
    error_frac = n_errors / len(outcomes) if outcomes else 0.0
    if error_frac > args.max_error_frac:
        print(f"error fraction {error_frac:.3f} exceeds "
              f"--max-error-frac {args.max_error_frac}", file=sys.stderr)
        return 1
    print(f"wrote {out_dir}/report.json "
          f"(missing rate {rate.missing_rate_percent:.2f}%)")
    return 0


def cmd_prompt_preview(args):
    raw = load_run_config(args.config)
    prompt_cfg, _, split_spec = _build_config_objects(raw)
    cohort = _load_data(raw)
    record = cohort.get(args.sample_id)
    if record is None:
        raise UnknownSample(args.sample_id)
    icl_spec = None
    if prompt_cfg.n_icl_examples > 0:
        icl_spec = prompts.icl_spec_from_cohort(
            cohort, seed=split_spec.seed, time_kind=record.time_kind
        )
    rendered = prompts.build_prompt(
        record, cohort.catalog, prompt_cfg, icl_spec=icl_spec
    )
    print(rendered.text)
    return 0


def _load_sentence_pairs(path):
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            cells = line.split("\t")
            if len(cells) != 3:
                raise ParseError(f"expected 3 tab-separated fields, got "
                                 f"{len(cells)}", line=lineno)
            try:
                gold = float(cells[2])
            except ValueError:
                raise ParseError(f"bad gold score {cells[2]!r}", line=lineno)
            pairs.append((cells[0], cells[1], gold))
    return pairs


def _load_embedding_file(path):
    """JSONL of {"text": ..., "embedding": [...]} -> dict."""
    table = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(str(exc), line=lineno) from exc
            table[obj["text"]] = obj["embedding"]
    return table


def cmd_eval_sentences(args):
    raw_pairs = _load_sentence_pairs(args.pairs)
    texts = []
    for s1, s2, _ in raw_pairs:
        for s in (s1, s2):
            if s not in texts:
                texts.append(s)
    if args.embeddings_file:
        table = _load_embedding_file(args.embeddings_file)
        missing = [t for t in texts if t not in table]
        if missing:
            raise InvariantViolation(
                f"{len(missing)} sentences lack embeddings, e.g. {missing[0]!r}"
            )
    else:
        cfg = gateway.EndpointConfig(base_url=args.base_url,
                                     model_name=args.model)
        vectors = gateway.embed(texts, cfg)
        table = {t: vectors[i].tolist() for i, t in enumerate(texts)}
    pairs = [
        metrics.SimilarityPair(vec_a=table[s1], vec_b=table[s2], gold_score=g)
        for s1, s2, g in raw_pairs
    ]
    grid = metrics.sentence_matching_eval(pairs)
    os.makedirs(args.output_dir, exist_ok=True)
    _write_json(os.path.join(args.output_dir, "report.json"),
                {"n_pairs": len(pairs), "grid": grid})
    rows = [
        [measure, row["pearson_distance"], row["pearson"], row["spearman"],
         row["kendall"]]
        for measure, row in grid.items()
    ]
    _write_csv(os.path.join(args.output_dir, "report.csv"),
               ["measure", "pearson_distance", "pearson", "spearman",
                "kendall"], rows)
    print(f"wrote {args.output_dir}/report.json ({len(pairs)} pairs)")
    return 0


def _load_code_embeddings(path):
    """JSONL of {"code": ..., "embedding": [...]} -> dict."""
    table = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(str(exc), line=lineno) from exc
            table[obj["code"]] = obj["embedding"]
    return table


def cmd_eval_icd(args):
    entries = icd.filter_broad_codes(icd.parse_order_file(args.order_file))
    tree = icd.build_tree(entries)
    codes = [e.code for e in entries]
    if args.embeddings_file:
        table = _load_code_embeddings(args.embeddings_file)
        missing = [c for c in codes if c not in table]
        if missing:
            raise UnknownCode(
                f"{len(missing)} codes lack embeddings, e.g. {missing[0]}"
            )
        embeddings = [table[c] for c in codes]
    else:
        cfg = gateway.EndpointConfig(base_url=args.base_url,
                                     model_name=args.model)
        embeddings = gateway.embed([e.long_desc or e.short_desc
                                    for e in entries], cfg)
    ks = tuple(int(k) for k in args.ks.split(","))
    result = icd.hierarchy_benchmark(tree, codes, embeddings, ks=ks,
                                     seed=args.seed)
    os.makedirs(args.output_dir, exist_ok=True)
    _write_json(os.path.join(args.output_dir, "report.json"), {
        "n_codes": len(codes),
        "seed": args.seed,
        "per_k": {str(k): v for k, v in result["per_k"].items()},
        "mean": result["mean"],
    })
    rows = [[k, _fmt(v)] for k, v in result["per_k"].items()]
    rows.append(["mean", _fmt(result["mean"])])
    _write_csv(os.path.join(args.output_dir, "report.csv"),
               ["k", "avg_code_distance"], rows)
    print(f"wrote {args.output_dir}/report.json ({len(codes)} codes)")
    return 0


def cmd_report_merge(args):
    merged = []
    for path in args.reports:
        with open(path, encoding="utf-8") as fh:
            merged.append(json.load(fh))
    os.makedirs(args.output_dir, exist_ok=True)
    _write_json(os.path.join(args.output_dir, "merged.json"), merged)
    rows = []
    for report in merged:
        mr = report.get("missing_rate", {})
        ms = report.get("metrics", {})
        rows.append([
            report.get("label", ""), report.get("fingerprint", ""),
            mr.get("n_test", ""), mr.get("n_decoded", ""),
            mr.get("percent", ""),
            _fmt(ms.get("auroc", {}).get("mean")),
            _fmt(ms.get("auroc", {}).get("std")),
            _fmt(ms.get("auprc", {}).get("mean")),
            _fmt(ms.get("auprc", {}).get("std")),
        ])
    _write_csv(os.path.join(args.output_dir, "merged.csv"),
               ["label", "fingerprint", "n_test", "n_decoded",
                "missing_rate_percent", "auroc_mean", "auroc_std",
                "auprc_mean", "auprc_std"], rows)
    print(f"wrote {args.output_dir}/merged.csv ({len(merged)} reports)")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ehrbench",
        description="Benchmark LLM endpoints on structured-EHR prediction.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("predict", help="run the full predict pipeline")
    p.add_argument("--config", required=True, help="run config JSON path")
    p.add_argument("--max-error-frac", type=float, default=0.05,
                   help="nonzero exit if hard endpoint errors exceed this "
                        "fraction (default 0.05)")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("prompt-preview",
                       help="print the exact prompt for one sample")
    p.add_argument("--config", required=True)
    p.add_argument("--sample-id", required=True)
    p.set_defaults(func=cmd_prompt_preview)

    p = sub.add_parser("eval-sentences",
                       help="sentence-similarity correlation grid")
    p.add_argument("--pairs", required=True,
                   help="TSV: sentence1<TAB>sentence2<TAB>gold")
    p.add_argument("--embeddings-file",
                   help='JSONL of {"text", "embedding"} (default: endpoint)')
    p.add_argument("--base-url", default=gateway.STUB_BASE_URL)
    p.add_argument("--model", default="hash-embed-64")
    p.add_argument("--output-dir", required=True)
    p.set_defaults(func=cmd_eval_sentences)

    p = sub.add_parser("eval-icd",
                       help="diagnosis-code clustering distance report")
    p.add_argument("--order-file", required=True,
                   help="fixed-width code order file")
    p.add_argument("--embeddings-file",
                   help='JSONL of {"code", "embedding"} (default: endpoint '
                        "embeds code descriptions)")
    p.add_argument("--base-url", default=gateway.STUB_BASE_URL)
    p.add_argument("--model", default="hash-embed-64")
    p.add_argument("--ks", default="10,20,30,40,50",
                   help="comma-separated cluster counts")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output-dir", required=True)
    p.set_defaults(func=cmd_eval_icd)

    p = sub.add_parser("report-merge", help="merge run reports into one table")
    p.add_argument("reports", nargs="+", help="report.json paths")
    p.add_argument("--output-dir", required=True)
    p.set_defaults(func=cmd_report_merge)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except EhrBenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
