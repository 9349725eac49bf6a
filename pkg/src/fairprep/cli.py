"""Command-line entry point.

Subcommands: debias (rewrite a CSV), audit (score a standalone estimates
file), run-study (reproduce a bundled case study), synth-check (ground-truth
harness). Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical
failure. All outputs are written atomically and are byte-identical across
reruns with the same inputs and seed.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import audit as audit_mod
from .debias import (
    DebiasConfig,
    leakage_probe,
    save_debias_model,
    train_debiaser,
    transform,
    write_trace_csv,
)
from .ioutil import write_json
from .mlcore import SingularSystemError, TrainingDivergedError
from .studies import StudyConfig, run_study
from .synth import SyntheticSpec, synth_check
from .tabular import (
    ColumnSpec,
    DataError,
    DataTable,
    SchemaError,
    drop_columns,
    load_csv,
    load_schema,
    write_csv,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

DATA_DIR_ENV = "FAIRPREP_DATA_DIR"


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; the contract here is exit 1
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(message)


class _UsageError(Exception):
    pass


def _build_parser() -> _Parser:
    parser = _Parser(prog="fairprep", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("debias", parents=[], help="rewrite a CSV so a protected column is unrecoverable")
    p.add_argument("--input", required=True, help="input CSV")
    p.add_argument("--schema", required=True, help="schema JSON (list of column specs)")
    p.add_argument("--protected", required=True,
                   help="comma-separated protected column name(s); overrides schema roles")
    p.add_argument("--output", required=True, help="debiased CSV path")
    p.add_argument("--model-out", help="fitted model JSON path")
    p.add_argument("--report", help="report JSON path (training trace, probe AUCs)")
    p.add_argument("--trace-csv", help="training trace CSV path")
    p.add_argument("--lambda", dest="adversary_weight", type=float, default=1.0,
                   help="adversary weight (0 = plain autoencoder)")
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--latent", type=int, default=None)
    p.add_argument("--adversary-steps", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("audit", help="bias table from a standalone estimates CSV")
    p.add_argument("--estimates", required=True,
                   help="CSV with an 'estimate' column plus group/stratum columns")
    p.add_argument("--groups", required=True, help="name of the group column")
    p.add_argument("--strata", help="name of the stratum column (omit for a single stratum)")
    p.add_argument("--group-pair", help="comma-separated pair of groups to compare")
    p.add_argument("--bins", type=int, default=20)
    p.add_argument("--range", dest="value_range", default="0,1", help="histogram range lo,hi")
    p.add_argument("--report", help="report JSON path")

    p = sub.add_parser("run-study", help="run a case-study config end to end")
    p.add_argument("--config", required=True, help="study config JSON")
    p.add_argument("--seeds", type=int, default=None,
                   help="run seeds 0..n-1 instead of the config's seed list")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--offline", action="store_true",
                   help="never fetch the real dataset; use cache or bundled data")
    p.add_argument("--data-dir", default=None,
                   help=f"dataset cache directory (default ${DATA_DIR_ENV})")

    p = sub.add_parser("synth-check", help="ground-truth check on synthetic biased data")
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--beta", type=float, default=0.3, help="label-corruption strength")
    p.add_argument("--rho", type=float, default=0.8, help="proxy correlation strength")
    p.add_argument("--prevalence", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report", help="report JSON path")
    return parser


def _cmd_debias(args) -> int:
    schema = load_schema(args.schema)
    protected = [s.strip() for s in args.protected.split(",") if s.strip()]
    if not protected:
        raise _UsageError("--protected needs at least one column name")
    names = {s.name for s in schema}
    for name in protected:
        if name not in names:
            raise SchemaError(f"--protected column {name!r} not in schema")
    relabeled = []
    for s in schema:
        if s.name in protected:
            role = "protected"
        elif s.role == "protected":
            role = "feature"
        else:
            role = s.role
        relabeled.append(ColumnSpec(s.name, s.kind, role,
                                    s.categories if s.kind == "categorical" else ()))
    full_table = load_csv(args.input, relabeled)
    # drop-role columns (ids, free text) stay out of the model but pass through
    # to the output so the debiased CSV keeps the input header
    carried = [s.name for s in relabeled if s.role == "drop"]
    table = drop_columns(full_table, carried) if carried else full_table

    cfg = DebiasConfig(
        latent_dim=args.latent,
        adversary_weight=args.adversary_weight,
        epochs=args.epochs,
        adversary_steps=args.adversary_steps,
        seed=args.seed,
    )
    report = {
        "config": asdict(cfg),
        "input": os.path.basename(args.input),
        "protected": protected,
        "n_rows": table.n_rows,
    }
    try:
        model, trace = train_debiaser(table, cfg)
    except TrainingDivergedError as exc:
        if args.report and exc.trace is not None:
            report["error"] = str(exc)
            report["trace"] = {
                "reconstruction_loss": exc.trace.reconstruction_loss,
                "adversary_loss": exc.trace.adversary_loss,
                "combined_loss": exc.trace.combined_loss,
            }
            write_json(args.report, report)
        raise

    debiased = transform(model, table)
    if carried:
        debiased = DataTable(
            list(full_table.schema),
            {s.name: (full_table.columns[s.name] if s.name in carried
                      else debiased.columns[s.name])
             for s in full_table.schema},
        )
    write_csv(debiased, args.output)
    if args.model_out:
        save_debias_model(model, args.model_out)
    if args.trace_csv:
        write_trace_csv(trace, args.trace_csv)
    if args.report:
        probes = {}
        for name in protected:
            probes[name] = {
                "pre": leakage_probe(table, name, args.seed),
                "post": leakage_probe(debiased, name, args.seed),
            }
        report["leakage_probe_auc"] = probes
        report["trace"] = {
            "reconstruction_loss": trace.reconstruction_loss,
            "adversary_loss": trace.adversary_loss,
            "combined_loss": trace.combined_loss,
        }
        write_json(args.report, report)
    return EXIT_OK


def _cmd_audit(args) -> int:
    path = Path(args.estimates)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise DataError(f"{path}: no data rows")
    for col in ["estimate", args.groups] + ([args.strata] if args.strata else []):
        if col not in rows[0]:
            raise DataError(f"{path}: missing column {col!r}")
    try:
        estimates = [float(r["estimate"]) for r in rows]
    except ValueError as exc:
        raise DataError(f"{path}: unparseable estimate: {exc}") from None
    groups = [r[args.groups] for r in rows]
    strata = [r[args.strata] for r in rows] if args.strata else ["all"] * len(rows)
    pair = None
    if args.group_pair:
        parts = [p.strip() for p in args.group_pair.split(",")]
        if len(parts) != 2:
            raise _UsageError("--group-pair needs exactly two comma-separated labels")
        pair = tuple(parts)
    try:
        lo, hi = (float(v) for v in args.value_range.split(","))
    except ValueError:
        raise _UsageError("--range must be lo,hi") from None
    report = audit_mod.audit(
        estimates,
        groups,
        strata,
        group_pair=pair,
        bins=args.bins,
        value_range=(lo, hi),
        metadata={
            "estimates": os.path.basename(args.estimates),
            "groups_column": args.groups,
            "strata_column": args.strata,
            "group_pair": list(pair) if pair else None,
            "bins": args.bins,
            "range": [lo, hi],
        },
    )
    sys.stdout.write(audit_mod.render_bias_table(report.bias_table))
    if args.report:
        write_json(args.report, audit_mod.report_jsonable(report))
    return EXIT_OK


def _cmd_run_study(args) -> int:
    cfg = StudyConfig.from_json(args.config)
    seeds = list(range(args.seeds)) if args.seeds is not None else None
    data_dir = args.data_dir or os.environ.get(DATA_DIR_ENV)
    result = run_study(cfg, out_dir=args.out, data_dir=data_dir, offline=args.offline, seeds=seeds)
    agg = result.aggregate
    for stratum, scores in agg["bias_scores"].items():
        sys.stdout.write(
            f"{cfg.name} [{stratum}] bias median: "
            f"{scores['pre']['median']:.3f} -> {scores['post']['median']:.3f}\n"
        )
    perf = agg["performance"]
    sys.stdout.write(
        f"{cfg.name} {perf['metric']} median: "
        f"{perf['pre']['median']:.3f} -> {perf['post']['median']:.3f}\n"
    )
    if result.source.get("warning"):
        sys.stdout.write(f"warning: {result.source['warning']}\n")
    return EXIT_OK


def _cmd_synth_check(args) -> int:
    spec = SyntheticSpec(
        n=args.n, prevalence=args.prevalence,
        proxy_strength=args.rho, bias_strength=args.beta, seed=args.seed,
    )
    result = synth_check(spec)
    sys.stdout.write(
        f"probe AUC {result.probe_auc_pre:.3f} -> {result.probe_auc_post:.3f}\n"
        f"fair-label accuracy {result.fair_accuracy_pre:.3f} -> {result.fair_accuracy_post:.3f}\n"
    )
    pre = sum(result.bias_scores_pre.values()) / len(result.bias_scores_pre)
    post = sum(result.bias_scores_post.values()) / len(result.bias_scores_post)
    sys.stdout.write(f"bias score (mean over strata) {pre:.3f} -> {post:.3f}\n")
    if args.beta == 0.0 and args.rho == 0.0:
        sys.stdout.write("no bias injected: pre and post should match\n")
    if args.report:
        write_json(args.report, result.to_jsonable())
    return EXIT_OK


_HANDLERS = {
    "debias": _cmd_debias,
    "audit": _cmd_audit,
    "run-study": _cmd_run_study,
    "synth-check": _cmd_synth_check,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    try:
        return _HANDLERS[args.command](args)
    except _UsageError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except (SchemaError, DataError, FileNotFoundError, json.JSONDecodeError, KeyError) as exc:
        sys.stderr.write(f"data error: {exc}\n")
        return EXIT_DATA
    except (TrainingDivergedError, SingularSystemError, np.linalg.LinAlgError) as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
