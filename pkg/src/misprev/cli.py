"""Command-line interface.

Exit codes: 0 success, 1 fatal input error, 2 when some cells produced no
estimate.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from misprev.ingest import IngestError, load_corpus
from misprev.labels import AnalysisUnit, PrevalenceDefinition
from misprev.report import (
    METHODS,
    EstimationParams,
    emit_report,
    export_distribution,
    matrices_markdown,
    matrices_report,
    run_estimation,
)
from misprev.stats import RandomStream

logger = logging.getLogger("misprev")

UNIT_FAMILIES = ("language", "platform", "platform-language")


def _methods(text: str) -> list[str]:
    methods = [m.strip() for m in text.split(",") if m.strip()]
    for m in methods:
        if m not in METHODS:
            raise argparse.ArgumentTypeError(f"unknown method {m!r}; choose from {', '.join(METHODS)}")
    return methods


def _seed(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _units(corpus_units: str, keys: str | None):
    if not keys:
        return corpus_units
    return [AnalysisUnit.parse(f"{corpus_units}:{k.strip()}") for k in keys.split(",") if k.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="misprev", description="Mis/disinformation prevalence with uncertainty intervals.")
    parser.add_argument("-v", "--verbose", action="store_true", help="progress messages on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", help="prevalence estimates per analysis unit")
    est.add_argument("--input", required=True, type=Path)
    est.add_argument("--unit", choices=UNIT_FAMILIES, default="language")
    est.add_argument("--keys", help="comma-separated unit keys to restrict to (e.g. fr,pl or TikTok/sk)")
    est.add_argument("--method", type=_methods, default=list(METHODS))
    est.add_argument("--definition", choices=[d.value for d in PrevalenceDefinition], default="restricted")
    est.add_argument("--alpha", type=float, default=0.05)
    est.add_argument("--seed", type=_seed, default=0)
    est.add_argument("--b-kw", type=int, help="keyword replicates (default 500 retrieval, 100 joint)")
    est.add_argument("--b-post", type=int, help="post replicates (default 500 retrieval, 100 joint)")
    est.add_argument("--sims", type=int, help="annotation runs (default 500 annotation, 100 joint)")
    est.add_argument("--format", choices=["json", "csv", "md"], default="json")
    est.add_argument("--out", type=Path, help="output file (default stdout)")
    est.add_argument("--workers", type=int, default=1, help="worker processes (0 = all CPUs)")
    est.add_argument("--export-dist", type=Path, help="directory for raw sample CSVs of simulated cells")
    est.add_argument("--max-points", type=int, default=1000)

    mat = sub.add_parser("matrices", help="reference and mean correction matrices per unit")
    mat.add_argument("--input", required=True, type=Path)
    mat.add_argument("--unit", choices=UNIT_FAMILIES, default="language")
    mat.add_argument("--keys")
    mat.add_argument("--sims", type=int, default=500)
    mat.add_argument("--seed", type=_seed, default=0)
    mat.add_argument("--format", choices=["json", "md"], default="json")
    mat.add_argument("--out", type=Path)

    val = sub.add_parser("validate", help="synthetic coverage experiments and oracle checks")
    val.add_argument("mode", choices=["coverage", "oracle"])
    val.add_argument("--spec", required=True, type=Path, help="SynthSpec JSON file")
    val.add_argument("--method", choices=METHODS, default="baseline")
    val.add_argument("--definition", choices=[d.value for d in PrevalenceDefinition], default="restricted")
    val.add_argument("--trials", type=int, default=1000)
    val.add_argument("--runs", type=int, default=100_000, help="simulation runs for the oracle check")
    val.add_argument("--seed", type=_seed, help="master seed (default: the seed stored in the SynthSpec file)")
    val.add_argument("--out", type=Path)
    return parser


def _write(text: str, out: Path | None):
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text, encoding="utf-8")


def _cmd_estimate(args) -> int:
    corpus = load_corpus(args.input)
    logger.info(
        "read %d rows, kept %d (R1 dropped %d, R2 dropped %d)",
        corpus.provenance.rows_read,
        corpus.provenance.rows_kept,
        corpus.provenance.dropped_r1,
        corpus.provenance.dropped_r2,
    )
    defaults = EstimationParams()
    params = EstimationParams(
        alpha=args.alpha,
        s=args.sims or defaults.s,
        b_kw=args.b_kw or defaults.b_kw,
        b_post=args.b_post or defaults.b_post,
        joint_b_kw=args.b_kw or defaults.joint_b_kw,
        joint_b_post=args.b_post or defaults.joint_b_post,
        joint_s=args.sims or defaults.joint_s,
    )
    workers = args.workers or os.cpu_count() or 1
    reports = run_estimation(
        corpus,
        _units(args.unit, args.keys),
        args.method,
        PrevalenceDefinition.parse(args.definition),
        params,
        args.seed,
        workers=workers,
        keep_samples=args.export_dist is not None,
    )
    _write(emit_report(reports, args.format), args.out)
    if args.export_dist is not None:
        args.export_dist.mkdir(parents=True, exist_ok=True)
        root = RandomStream(args.seed).derive("export", 0)
        for r in reports:
            if r.samples is None or r.samples.size == 0:
                continue
            name = f"{r.unit_type}_{r.unit_key.replace('/', '-')}_{r.method}_{r.definition}.csv"
            n = export_distribution(
                r.samples, args.max_points, root.derive(f"{r.unit_type}:{r.unit_key}:{r.method}", 0), args.export_dist / name
            )
            logger.info("wrote %d samples to %s", n, args.export_dist / name)
    return 2 if any(not r.has_estimate for r in reports) else 0


def _cmd_matrices(args) -> int:
    corpus = load_corpus(args.input)
    entries = matrices_report(corpus, _units(args.unit, args.keys), s=args.sims, seed=args.seed)
    if args.format == "json":
        text = json.dumps(entries, indent=2) + "\n"
    else:
        text = matrices_markdown(entries)
    _write(text, args.out)
    return 2 if any(e["n_posts"] == 0 for e in entries) else 0


def _cmd_validate(args) -> int:
    from misprev import validation

    spec = validation.SynthSpec.from_json(args.spec)
    seed = spec.seed if args.seed is None else args.seed
    stream = RandomStream(seed)
    definition = PrevalenceDefinition.parse(args.definition)
    if args.mode == "coverage":
        report = validation.coverage_experiment(spec, args.trials, args.method, stream, definition)
        result = report.to_dict()
        ok = True
    else:
        result = validation.oracle_check(spec, stream, definition, runs=args.runs)
        ok = all(c.get("passed", True) for c in result["checks"])
    _write(json.dumps(result, indent=2) + "\n", args.out)
    return 0 if ok else 2


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(message)s",
        stream=sys.stderr,
    )
    try:
        if args.command == "estimate":
            return _cmd_estimate(args)
        if args.command == "matrices":
            return _cmd_matrices(args)
        return _cmd_validate(args)
    except (IngestError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
