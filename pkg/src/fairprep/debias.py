"""Adversarial debiasing of tabular data.

An encoder maps the (standardized, one-hot) feature block to a latent code, a
decoder reconstructs the features from it, and an adversary tries to predict
the protected category from the code. Training alternates:

  1. adversary phase: `adversary_steps` gradient steps minimizing the
     adversary's cross-entropy on the current latent codes;
  2. encoder/decoder phase: one step on
        reconstruction_loss - adversary_weight * adversary_cross_entropy,
     realized with a single backward pass that routes the adversary's input
     gradient into the encoder with a flipped sign (gradient reversal).

Reconstruction loss is squared error on numeric design columns plus
cross-entropy on each one-hot group. The debiased dataset is the decoded
reconstruction in the original schema: protected and target columns pass
through untouched (they are carried for auditing; downstream modeling
excludes them anyway), every other column is rewritten so the protected
characteristic can no longer be recovered from it.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import mlcore
from .ioutil import write_json, atomic_write_text
from .mlcore import (
    Mlp,
    TrainConfig,
    TrainingDivergedError,
    adam_init,
    adam_step,
    derive_rng,
    mlp_backward,
    mlp_forward,
    mlp_init,
    softmax,
    log_sum_exp,
)
from .tabular import (
    ColumnSpec,
    DataError,
    DataTable,
    DesignMatrix,
    SchemaError,
    apply_encoding,
    decode,
    encode,
    split_indices,
)


@dataclass(frozen=True)
class DebiasConfig:
    latent_dim: int | None = None  # None: max(2, ceil(d/2)) once d is known
    adversary_weight: float = 1.0
    epochs: int = 200
    adversary_steps: int = 3
    learning_rate: float = 1e-2
    batch_size: int = 4096  # full batch whenever n <= batch_size
    seed: int = 0
    encoder_hidden: int | None = None  # None: 2*d
    adversary_hidden: int | None = None  # None: latent_dim

    def __post_init__(self):
        if self.latent_dim is not None and self.latent_dim < 1:
            raise ValueError("latent_dim must be >= 1")
        if self.adversary_weight < 0:
            raise ValueError("adversary_weight must be nonnegative")
        if self.epochs < 1 or self.adversary_steps < 1:
            raise ValueError("epochs and adversary_steps must be >= 1")
        if self.learning_rate <= 0 or self.batch_size < 1:
            raise ValueError("learning_rate must be positive and batch_size >= 1")


@dataclass
class TrainingTrace:
    reconstruction_loss: list = field(default_factory=list)
    adversary_loss: list = field(default_factory=list)
    combined_loss: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.combined_loss)

    def to_csv(self) -> str:
        lines = ["epoch,recon_loss,adv_loss,combined"]
        for i, (r, a, c) in enumerate(
            zip(self.reconstruction_loss, self.adversary_loss, self.combined_loss)
        ):
            lines.append(f"{i},{r!r},{a!r},{c!r}")
        return "\n".join(lines) + "\n"


@dataclass
class DebiasModel:
    encoder: Mlp
    decoder: Mlp
    adversary: Mlp
    column_map: tuple
    scaler: tuple
    schema: list
    protected_names: list
    config: DebiasConfig


@dataclass(frozen=True)
class _Layout:
    """Where the numeric columns and one-hot groups sit inside the design matrix."""

    numeric: tuple  # column indices
    groups: tuple  # (start, stop) slices, one per one-hot group


def _design_layout(column_map) -> _Layout:
    numeric = []
    groups = []
    j = 0
    while j < len(column_map):
        if column_map[j].category is None:
            numeric.append(j)
            j += 1
            continue
        start = j
        source = column_map[j].source
        while j < len(column_map) and column_map[j].source == source:
            j += 1
        groups.append((start, j))
    return _Layout(tuple(numeric), tuple(groups))


def _reconstruction_loss(pred, x, layout: _Layout):
    """Squared error on numeric columns + per-group softmax cross-entropy.

    `pred` holds raw decoder outputs: reconstructed standardized values for
    numeric columns, logits for one-hot groups. Returns (loss, d loss/d pred).
    """
    n = x.shape[0]
    grad = np.zeros_like(pred)
    loss = 0.0
    if layout.numeric:
        cols = list(layout.numeric)
        diff = pred[:, cols] - x[:, cols]
        loss += float(np.sum(diff * diff) / n)
        grad[:, cols] = 2.0 * diff / n
    for start, stop in layout.groups:
        logits = pred[:, start:stop]
        onehot = x[:, start:stop]
        loss += float(np.sum(log_sum_exp(logits) - np.sum(logits * onehot, axis=1)) / n)
        grad[:, start:stop] = (softmax(logits) - onehot) / n
    return loss, grad


def _protected_targets(table: DataTable, names) -> tuple:
    """One-hot adversary targets, one block per protected column, concatenated."""
    blocks = []
    slices = []
    start = 0
    for name in names:
        spec = table.spec(name)
        cats = list(spec.categories)
        col = table.column(name)
        if any(v is None for v in col):
            raise DataError(f"protected column {name!r} has missing cells")
        idx = [cats.index(v) for v in col]
        if len(set(idx)) < 2:
            raise DataError(f"protected column {name!r} is constant; nothing to debias")
        block = np.zeros((len(col), len(cats)))
        block[np.arange(len(col)), idx] = 1.0
        blocks.append(block)
        slices.append((start, start + len(cats)))
        start += len(cats)
    return np.hstack(blocks), tuple(slices)


def _adversary_loss(logits, targets, slices):
    """Concatenated cross-entropy: one softmax head per protected column."""
    n = logits.shape[0]
    grad = np.zeros_like(logits)
    loss = 0.0
    for start, stop in slices:
        z = logits[:, start:stop]
        y = targets[:, start:stop]
        loss += float(np.sum(log_sum_exp(z) - np.sum(z * y, axis=1)) / n)
        grad[:, start:stop] = (softmax(z) - y) / n
    return loss, grad


def resolve_latent_dim(cfg: DebiasConfig, d: int) -> int:
    return cfg.latent_dim if cfg.latent_dim is not None else max(2, math.ceil(d / 2))


def train_debiaser(table: DataTable, cfg: DebiasConfig):
    """Fit the encoder/decoder/adversary triple on a table. Returns (model, trace).

    Only role=feature columns enter the encoder; the table needs at least one
    categorical/binary protected column and 50 rows. Fully deterministic for
    a given (table, cfg).
    """
    if table.n_rows < 50:
        raise DataError(f"need >= 50 rows to train a debiaser, have {table.n_rows}")
    protected_specs = table.specs_with_role("protected")
    if not protected_specs:
        raise SchemaError("no role=protected column")
    for s in protected_specs:
        if s.kind == "numeric":
            raise SchemaError(f"protected column {s.name!r} must be categorical or binary")
    names = [s.name for s in protected_specs]

    mat = encode(table, fit_scaler=True)
    X = mat.values
    n, d = X.shape
    if d == 0:
        raise SchemaError("no feature columns to debias")
    targets, slices = _protected_targets(table, names)

    latent = resolve_latent_dim(cfg, d)
    if latent >= d:
        warnings.warn(
            f"latent_dim {latent} >= feature dim {d}: the encoder can pass features "
            "through unchanged, which defeats debiasing",
            stacklevel=2,
        )
    hidden = cfg.encoder_hidden if cfg.encoder_hidden is not None else 2 * d
    adv_hidden = cfg.adversary_hidden if cfg.adversary_hidden is not None else latent
    n_classes = targets.shape[1]

    encoder = mlp_init([d, hidden, latent], "tanh", "identity", derive_rng(cfg.seed, "encoder"))
    decoder = mlp_init([latent, hidden, d], "tanh", "identity", derive_rng(cfg.seed, "decoder"))
    adversary = mlp_init(
        [latent, adv_hidden, n_classes], "tanh", "identity", derive_rng(cfg.seed, "adversary")
    )
    st_enc, st_dec, st_adv = adam_init(encoder), adam_init(decoder), adam_init(adversary)
    layout = _design_layout(mat.column_map)
    shuffler = derive_rng(cfg.seed, "batches")
    lam = cfg.adversary_weight

    trace = TrainingTrace()
    for epoch in range(cfg.epochs):
        if n <= cfg.batch_size:
            batches = [np.arange(n)]
        else:
            order = shuffler.permutation(n)
            batches = [order[i : i + cfg.batch_size] for i in range(0, n, cfg.batch_size)]
        ep_recon = ep_adv = 0.0
        rows_seen = 0
        for idx in batches:
            Xb, Yb = X[idx], targets[idx]
            for _ in range(cfg.adversary_steps):
                _, z = mlp_forward(encoder, Xb)
                cache_a, logits = mlp_forward(adversary, z)
                _, g_adv = _adversary_loss(logits, Yb, slices)
                grads_a, _ = mlp_backward(adversary, cache_a, g_adv)
                adam_step(adversary, grads_a, st_adv, cfg.learning_rate)

            cache_e, z = mlp_forward(encoder, Xb)
            cache_d, recon = mlp_forward(decoder, z)
            loss_r, g_r = _reconstruction_loss(recon, Xb, layout)
            grads_d, dz_recon = mlp_backward(decoder, cache_d, g_r)
            cache_a, logits = mlp_forward(adversary, z)
            loss_a, g_adv = _adversary_loss(logits, Yb, slices)
            _, dz_adv = mlp_backward(adversary, cache_a, g_adv)  # adversary params frozen here
            grads_e, _ = mlp_backward(encoder, cache_e, dz_recon - lam * dz_adv)
            adam_step(decoder, grads_d, st_dec, cfg.learning_rate)
            adam_step(encoder, grads_e, st_enc, cfg.learning_rate)

            ep_recon += loss_r * len(idx)
            ep_adv += loss_a * len(idx)
            rows_seen += len(idx)
        recon_epoch = ep_recon / rows_seen
        adv_epoch = ep_adv / rows_seen
        combined = recon_epoch - lam * adv_epoch
        trace.reconstruction_loss.append(recon_epoch)
        trace.adversary_loss.append(adv_epoch)
        trace.combined_loss.append(combined)
        if not (math.isfinite(recon_epoch) and math.isfinite(adv_epoch)):
            raise TrainingDivergedError(
                f"debias training loss became non-finite at epoch {epoch}", epoch, trace
            )

    model = DebiasModel(
        encoder,
        decoder,
        adversary,
        mat.column_map,
        mat.scaler,
        list(table.schema),
        names,
        cfg,
    )
    return model, trace


def _check_schema_match(model: DebiasModel, table: DataTable) -> None:
    if len(model.schema) != len(table.schema):
        raise SchemaError("table schema does not match the fitted schema")
    for a, b in zip(model.schema, table.schema):
        if (a.name, a.kind, a.role, a.categories) != (b.name, b.kind, b.role, b.categories):
            raise SchemaError(
                f"column {b.name!r} does not match the fitted schema "
                f"(fitted {a.name!r}/{a.kind}/{a.role})"
            )


def transform(model: DebiasModel, table: DataTable) -> DataTable:
    """Rewrite a table through the fitted encoder/decoder; schema and rows preserved."""
    _check_schema_match(model, table)
    mat = apply_encoding(table, model.column_map, model.scaler)
    _, z = mlp_forward(model.encoder, mat.values)
    _, recon = mlp_forward(model.decoder, z)
    out = DesignMatrix(
        values=recon,
        column_map=model.column_map,
        scaler=model.scaler,
        schema=list(table.schema),
        protected=mat.protected,
        target=mat.target,
    )
    return decode(out)


def leakage_probe(table: DataTable, protected: str, seed: int, probe_cfg: TrainConfig | None = None) -> float:
    """Test AUC of a fresh logistic probe predicting the protected column from the features.

    Trains on a 70/30 split (stratified on the protected column). Near 0.5
    means the features carry no recoverable signal. Multi-category columns are
    scored one-vs-rest and averaged.
    """
    spec = table.spec(protected)
    if spec.kind == "numeric":
        raise SchemaError(f"protected column {protected!r} must be categorical or binary")
    col = table.column(protected)
    present = [c for c in spec.categories if c in set(col)]
    if len(present) < 2:
        raise DataError(f"protected column {protected!r} is single-class")
    if probe_cfg is None:
        probe_cfg = TrainConfig(learning_rate=0.1, epochs=500, l2=1e-4, seed=seed)

    # relabel the protected column as the split target so the 70/30 split stratifies on it
    relabeled = DataTable(
        [
            ColumnSpec(
                s.name,
                s.kind,
                "target" if s.name == protected else ("feature" if s.role == "target" else s.role),
                s.categories if s.kind == "categorical" else (),
            )
            for s in table.schema
        ],
        dict(table.columns),
    )
    train_idx, test_idx = split_indices(relabeled, 0.3, derive_rng(seed, "probe").integers(2**31))

    feature_specs = [
        s for s in table.schema if s.role == "feature"
    ]
    probe_table = DataTable(
        [ColumnSpec(s.name, s.kind, "feature", s.categories if s.kind == "categorical" else ())
         for s in feature_specs],
        {s.name: table.columns[s.name] for s in feature_specs},
    )
    train_tab = probe_table.take_rows(train_idx)
    fitted = encode(train_tab, fit_scaler=True)
    X_all = apply_encoding(probe_table, fitted.column_map, fitted.scaler).values
    X_train, X_test = X_all[train_idx], X_all[test_idx]

    aucs = []
    pairs = present if len(present) > 2 else present[1:]
    for positive in pairs:
        y = np.array([1.0 if v == positive else 0.0 for v in col])
        y_train, y_test = y[train_idx], y[test_idx]
        if len(set(y_train)) < 2 or len(set(y_test)) < 2:
            raise DataError(f"probe split left a single class for category {positive!r}")
        probe = mlcore.fit_logistic(X_train, y_train, probe_cfg)
        aucs.append(mlcore.auc(mlcore.predict(probe, X_test), y_test))
    return float(np.mean(aucs))


# ---------------------------------------------------------------------------
# persistence


def _net_jsonable(net: Mlp) -> dict:
    return {
        "dims": list(net.dims),
        "hidden_activation": net.hidden_activation,
        "output_activation": net.output_activation,
        "weights": [w.ravel().tolist() for w in net.weights],
        "biases": [b.tolist() for b in net.biases],
    }


def _net_from_jsonable(data) -> Mlp:
    dims = tuple(data["dims"])
    weights = [
        np.asarray(flat, dtype=float).reshape(dims[i], dims[i + 1])
        for i, flat in enumerate(data["weights"])
    ]
    biases = [np.asarray(b, dtype=float) for b in data["biases"]]
    return Mlp(dims, weights, biases, data["hidden_activation"], data["output_activation"])


def save_debias_model(model: DebiasModel, path) -> None:
    from .tabular import schema_to_jsonable

    write_json(
        path,
        {
            "schema": schema_to_jsonable(model.schema),
            "column_map": [
                {"source": c.source, "category": c.category} for c in model.column_map
            ],
            "scaler": [[m, s] for m, s in model.scaler],
            "encoder": _net_jsonable(model.encoder),
            "decoder": _net_jsonable(model.decoder),
            "adversary": _net_jsonable(model.adversary),
            "protected": list(model.protected_names),
            "config": {
                "latent_dim": model.config.latent_dim,
                "adversary_weight": model.config.adversary_weight,
                "epochs": model.config.epochs,
                "adversary_steps": model.config.adversary_steps,
                "learning_rate": model.config.learning_rate,
                "batch_size": model.config.batch_size,
                "seed": model.config.seed,
                "encoder_hidden": model.config.encoder_hidden,
                "adversary_hidden": model.config.adversary_hidden,
            },
        },
    )


def load_debias_model(path) -> DebiasModel:
    from .tabular import DesignColumn, schema_from_jsonable

    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    schema = schema_from_jsonable(data["schema"])
    by_name = {s.name: s for s in schema}
    column_map = []
    for entry in data["column_map"]:
        cat = entry["category"]
        # JSON stringifies nothing here, but binary categories round-trip as ints
        if cat is not None and by_name[entry["source"]].kind == "binary":
            cat = int(cat)
        column_map.append(DesignColumn(entry["source"], cat))
    return DebiasModel(
        encoder=_net_from_jsonable(data["encoder"]),
        decoder=_net_from_jsonable(data["decoder"]),
        adversary=_net_from_jsonable(data["adversary"]),
        column_map=tuple(column_map),
        scaler=tuple((float(m), float(s)) for m, s in data["scaler"]),
        schema=schema,
        protected_names=list(data["protected"]),
        config=DebiasConfig(**data["config"]),
    )


def write_trace_csv(trace: TrainingTrace, path) -> None:
    atomic_write_text(path, trace.to_csv())
