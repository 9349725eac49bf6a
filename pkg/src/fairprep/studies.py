"""Declarative case-study recipes: load a dataset, apply its preparation
transforms, fit the downstream model with the protected column excluded,
audit the estimates, then debias the table and push it through the exact same
pipeline. Pre and post runs share one code path (`_downstream`); only the
table differs, and both reports carry the same config digest as proof.
"""

from __future__ import annotations

import hashlib
import json
import statistics
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import audit as audit_mod
from . import mlcore
from .debias import DebiasConfig, train_debiaser, transform
from .ioutil import canonical_json, to_jsonable, write_json, atomic_write_text
from .mlcore import TrainConfig
from .tabular import (
    ColumnSpec,
    DataError,
    DataTable,
    SchemaError,
    apply_encoding,
    binarize_threshold,
    bucket_numeric,
    drop_columns,
    drop_sparse_columns,
    encode,
    filter_rows,
    load_csv,
    load_schema,
    quartile_binarize,
    split_indices,
)

MODEL_KINDS = ("logistic", "linear", "ridge")


def _apply_transform(table: DataTable, step: dict) -> DataTable:
    op = step.get("op")
    if op == "filter_rows":
        return filter_rows(table, step["column"], step["keep"])
    if op == "quartile_binarize":
        return quartile_binarize(table, step["column"])
    if op == "bucket_numeric":
        return bucket_numeric(table, step["column"], step["edges"])
    if op == "binarize_threshold":
        return binarize_threshold(
            table, step["column"], step["threshold"], step.get("strict", False)
        )
    if op == "drop_sparse_columns":
        return drop_sparse_columns(table, step["k"])
    if op == "drop_columns":
        return drop_columns(table, step["names"])
    raise SchemaError(f"unknown transform op {op!r}")


def apply_transforms(table: DataTable, transforms) -> DataTable:
    for step in transforms:
        table = _apply_transform(table, step)
    return table


@dataclass
class StudyConfig:
    name: str
    source: dict
    schema: list
    transforms: list
    protected: str
    target: str
    model: dict
    debias: dict
    seeds: list
    audit: dict = field(default_factory=dict)
    fit_debias_on: str = "full"  # "full": debiaser sees the whole table; "train": the train split only
    test_fraction: float = 0.3
    base_dir: Path = field(default_factory=Path)
    raw: dict = field(default_factory=dict, repr=False)

    def digest(self) -> str:
        return hashlib.sha256(canonical_json(self.raw).encode("utf-8")).hexdigest()

    @classmethod
    def from_json(cls, path) -> "StudyConfig":
        path = Path(path)
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        base = path.parent
        schema = load_schema(base / data["schema"])
        model = data["model"]
        if model.get("kind") not in MODEL_KINDS:
            raise SchemaError(f"model kind must be one of {MODEL_KINDS}")
        return cls(
            name=data["name"],
            source=data.get("source", {}),
            schema=schema,
            transforms=data.get("transforms", []),
            protected=data["protected"],
            target=data["target"],
            model=model,
            debias=data.get("debias", {}),
            seeds=list(data.get("seeds", [0, 1, 2, 3, 4])),
            audit=data.get("audit", {}),
            fit_debias_on=data.get("fit_debias_on", "full"),
            test_fraction=float(data.get("test_fraction", 0.3)),
            base_dir=base,
            raw=data,
        )

    def debias_config(self, seed: int) -> DebiasConfig:
        return DebiasConfig(seed=seed, **self.debias)


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def load_study_table(cfg: StudyConfig, data_dir=None, offline: bool = True):
    """Load the study's dataset, preferring the real source when present.

    Looks for `source.filename` under `data_dir`, optionally downloading it
    when offline=False. Falls back to the bundled subsample with a warning
    recorded in the returned source info.
    """
    info = {"url": cfg.source.get("url"), "warning": None}
    filename = cfg.source.get("filename")
    if data_dir and filename:
        candidate = Path(data_dir) / filename
        if not candidate.exists() and not offline and cfg.source.get("url"):
            try:
                candidate.parent.mkdir(parents=True, exist_ok=True)
                urllib.request.urlretrieve(cfg.source["url"], candidate)  # pragma: no cover
            except Exception as exc:  # noqa: BLE001 - fall back to bundled data
                info["warning"] = f"download failed: {exc}"
        if candidate.exists():
            digest = _sha256(candidate)
            expected = cfg.source.get("sha256")
            if expected and digest != expected:
                raise DataError(
                    f"{candidate}: checksum mismatch (expected {expected}, got {digest})"
                )
            info.update({"path": str(candidate), "sha256": digest, "bundled": False})
            return load_csv(candidate, cfg.schema), info
    bundled = cfg.source.get("bundled")
    if not bundled:
        raise DataError(f"study {cfg.name!r}: dataset unavailable and no bundled subsample")
    bundled_path = cfg.base_dir / bundled
    if not bundled_path.exists():
        raise DataError(f"study {cfg.name!r}: bundled subsample missing at {bundled_path}")
    if info["warning"] is None and cfg.source.get("url"):
        info["warning"] = "real dataset not present; fell back to the bundled subsample"
    info.update({"path": str(bundled_path), "sha256": _sha256(bundled_path), "bundled": True})
    return load_csv(bundled_path, cfg.schema), info


def prepare_table(cfg: StudyConfig, table: DataTable) -> DataTable:
    dropped = [s.name for s in table.specs_with_role("drop")]
    if dropped:
        table = drop_columns(table, dropped)
    table = apply_transforms(table, cfg.transforms)
    # sanity: the recipe must leave the declared protected/target columns behind
    if table.spec(cfg.protected).role != "protected":
        raise SchemaError(f"column {cfg.protected!r} is not role=protected after transforms")
    if table.spec(cfg.target).role != "target":
        raise SchemaError(f"column {cfg.target!r} is not role=target after transforms")
    return table


def _feature_table(table: DataTable) -> DataTable:
    specs = [s for s in table.schema if s.role == "feature"]
    return DataTable(
        [ColumnSpec(s.name, s.kind, "feature", s.categories if s.kind == "categorical" else ())
         for s in specs],
        {s.name: table.columns[s.name] for s in specs},
    )


def _fit_model(cfg: StudyConfig, X_train, y_train, seed: int):
    kind = cfg.model["kind"]
    if kind == "logistic":
        tc = TrainConfig(
            learning_rate=cfg.model.get("learning_rate", 0.1),
            epochs=cfg.model.get("epochs", 500),
            l2=cfg.model.get("l2", 1e-4),
            seed=seed,
        )
        return mlcore.fit_logistic(X_train, y_train, tc)
    lam = float(cfg.model.get("ridge_lambda", 1.0 if kind == "ridge" else 0.0))
    return mlcore.fit_linear(X_train, y_train, lam)


def _downstream(cfg: StudyConfig, table: DataTable, seed: int) -> audit_mod.AuditReport:
    """The downstream pipeline shared verbatim by pre- and post-debias runs."""
    train_idx, test_idx = split_indices(table, cfg.test_fraction, seed)
    feat = _feature_table(table)
    fitted = encode(feat.take_rows(train_idx), fit_scaler=True)
    X = apply_encoding(feat, fitted.column_map, fitted.scaler).values
    y = np.array([float(v) for v in table.column(cfg.target)])
    model = _fit_model(cfg, X[train_idx], y[train_idx], seed)
    estimates = mlcore.predict(model, X)

    classification = cfg.model["kind"] == "logistic"
    if classification:
        perf_value = mlcore.accuracy(estimates[test_idx], y[test_idx])
        metric = "accuracy"
    else:
        perf_value = mlcore.r_squared(estimates[test_idx], y[test_idx])
        metric = "r_squared"
    performance = {
        "metric": metric,
        "value": perf_value,
        "split": f"{int(round(cfg.test_fraction * 100))}% held-out test, seed {seed}",
    }

    audit_cfg = cfg.audit
    audit_on = audit_cfg.get("on", "all")
    rows = list(range(table.n_rows)) if audit_on == "all" else list(test_idx)
    group_labels = audit_cfg.get("group_labels", {})
    stratum_labels = audit_cfg.get("stratum_labels", {})
    groups = [group_labels.get(str(v), v) for v in table.column(cfg.protected)]
    groups = [groups[i] for i in rows]
    if classification:
        strata = [stratum_labels.get(str(v), str(v)) for v in table.column(cfg.target)]
        strata = [strata[i] for i in rows]
        true_values = None
    else:
        strata = ["all"] * len(rows)
        true_values = y[rows]

    pair = audit_cfg.get("groups")
    if pair is not None:
        pair = tuple(pair)
    lo, hi = audit_cfg.get("range", (0.0, 1.0))
    return audit_mod.audit(
        estimates[rows],
        groups,
        strata,
        group_pair=pair,
        performance=performance,
        bins=int(audit_cfg.get("bins", 20)),
        value_range=(float(lo), float(hi)),
        true_values=true_values,
        metadata={"seed": seed, "config_digest": cfg.digest(), "audit_on": audit_on},
    )


@dataclass
class StudyRun:
    seed: int
    pre: audit_mod.AuditReport
    post: audit_mod.AuditReport

    def to_jsonable(self) -> dict:
        return {
            "seed": self.seed,
            "pre": audit_mod.report_jsonable(self.pre),
            "post": audit_mod.report_jsonable(self.post),
        }


@dataclass
class StudyResult:
    study: str
    config_digest: str
    config: dict  # the effective configuration, echoed for reproducibility
    source: dict
    runs: list
    aggregate: dict

    def to_jsonable(self) -> dict:
        return to_jsonable(
            {
                "study": self.study,
                "config_digest": self.config_digest,
                "config": self.config,
                "source": self.source,
                "runs": [r.to_jsonable() for r in self.runs],
                "aggregate": self.aggregate,
            }
        )


def _spread(values) -> dict:
    return {
        "median": statistics.median(values),
        "min": min(values),
        "max": max(values),
    }


def _aggregate(cfg: StudyConfig, runs) -> dict:
    strata = [str(r.stratum) for r in runs[0].pre.bias_table.rows]
    bias = {}
    for st in strata:
        bias[st] = {
            "pre": _spread([r.pre.bias_table.scores()[st] for r in runs]),
            "post": _spread([r.post.bias_table.scores()[st] for r in runs]),
        }
    out = {
        "bias_scores": bias,
        "performance": {
            "metric": runs[0].pre.performance["metric"],
            "pre": _spread([r.pre.performance["value"] for r in runs]),
            "post": _spread([r.post.performance["value"] for r in runs]),
        },
    }
    if runs[0].pre.true_table is not None:
        out["true_bias_scores"] = {
            st: _spread([r.pre.true_table.scores()[st] for r in runs]) for st in strata
        }
    return out


def run_study(cfg: StudyConfig, out_dir=None, data_dir=None, offline: bool = True,
              seeds=None) -> StudyResult:
    """Run every seed of a study: prepare, model, audit, debias, repeat, aggregate."""
    table, source_info = load_study_table(cfg, data_dir=data_dir, offline=offline)
    table = prepare_table(cfg, table)
    seeds = list(cfg.seeds if seeds is None else seeds)
    runs = []
    for seed in seeds:
        if cfg.fit_debias_on == "train":
            train_idx, _ = split_indices(table, cfg.test_fraction, seed)
            fit_table = table.take_rows(train_idx)
        else:
            fit_table = table
        dmodel, _ = train_debiaser(fit_table, cfg.debias_config(seed))
        debiased = transform(dmodel, table)
        pre = _downstream(cfg, table, seed)
        post = _downstream(cfg, debiased, seed)
        runs.append(StudyRun(seed, pre, post))
    effective = dict(cfg.raw, seeds=seeds)
    result = StudyResult(cfg.name, cfg.digest(), effective, source_info, runs, _aggregate(cfg, runs))
    if out_dir is not None:
        write_study_outputs(result, out_dir)
    return result


def write_study_outputs(result: StudyResult, out_dir) -> None:
    out_dir = Path(out_dir)
    write_json(out_dir / f"{result.study}_result.json", result.to_jsonable())
    for run in result.runs:
        prefix = out_dir / f"{result.study}_seed{run.seed}"
        atomic_write_text(f"{prefix}_pre_bias.csv", audit_mod.bias_table_csv(run.pre.bias_table))
        atomic_write_text(f"{prefix}_post_bias.csv", audit_mod.bias_table_csv(run.post.bias_table))
        atomic_write_text(f"{prefix}_pre_hist.csv", audit_mod.histograms_csv(run.pre))
        atomic_write_text(f"{prefix}_post_hist.csv", audit_mod.histograms_csv(run.post))
