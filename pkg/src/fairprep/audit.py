"""Bias auditing of model estimates.

The core quantity is the stratified bias score: within each stratum (usually
the true outcome), take the two protected groups' estimate distributions and
divide the absolute difference of their means by the average of their
standard deviations. A score near zero means the model treats the groups
alike once the true outcome is held fixed.
"""

from __future__ import annotations

import io
import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .ioutil import atomic_write_text, to_jsonable
from .tabular import DataError


@dataclass(frozen=True)
class GroupStats:
    """Estimate distribution for one (group, stratum) cell."""

    group: object
    stratum: object
    n: int
    mu: float
    sigma: float  # population standard deviation


@dataclass
class StratumRow:
    """One stratum of a two-group bias table."""

    stratum: object
    a: GroupStats
    b: GroupStats
    mu_diff: float
    sigma_avg: float
    score: float


@dataclass
class BiasTable:
    """Per-stratum group means/stds and bias scores for exactly two groups."""

    group_a: object
    group_b: object
    rows: list

    def scores(self) -> dict:
        return {str(r.stratum): r.score for r in self.rows}


@dataclass
class Histogram:
    """Equal-width binned counts; out-of-range values are clamped into the edge bins."""

    lo: float
    hi: float
    counts: list
    clamped_low: int = 0
    clamped_high: int = 0


@dataclass
class AuditReport:
    bias_table: BiasTable
    stats: list  # every (group, stratum) GroupStats, including uncompared groups
    histograms: list  # (group, stratum, Histogram)
    performance: dict | None
    metadata: dict = field(default_factory=dict)
    true_table: BiasTable | None = None  # group stats of the true values (regression)


def group_stats(estimates, groups, strata) -> list:
    """Per-(group, stratum) mean and population std of the estimates.

    Groups and strata keep first-appearance order. Every observed group must
    appear in every observed stratum; an empty cell is an error naming it.
    """
    estimates = np.asarray(estimates, dtype=float).ravel()
    groups = list(groups)
    strata = list(strata)
    if not (len(estimates) == len(groups) == len(strata)):
        raise DataError(
            f"length mismatch: {len(estimates)} estimates, {len(groups)} groups, {len(strata)} strata"
        )
    if len(estimates) == 0:
        raise DataError("no estimates to audit")
    group_order = list(dict.fromkeys(groups))
    stratum_order = list(dict.fromkeys(strata))
    out = []
    for st in stratum_order:
        for g in group_order:
            vals = estimates[[i for i in range(len(groups)) if groups[i] == g and strata[i] == st]]
            if vals.size == 0:
                raise DataError(f"empty cell: group {g!r} in stratum {st!r}")
            out.append(GroupStats(g, st, int(vals.size), float(vals.mean()), float(vals.std())))
    return out


def bias_score(a: GroupStats, b: GroupStats) -> float:
    """|mu_a - mu_b| divided by the average of the two standard deviations.

    When both stds are zero the score is 0 for identical means and +inf
    otherwise (reported as an "infinite bias" sentinel).
    """
    mu_diff = abs(a.mu - b.mu)
    sigma_avg = 0.5 * (a.sigma + b.sigma)
    if sigma_avg == 0.0:
        return 0.0 if mu_diff == 0.0 else float("inf")
    return mu_diff / sigma_avg


def _pair_rows(stats, group_a, group_b) -> BiasTable:
    by_cell = {(s.group, s.stratum): s for s in stats}
    strata = list(dict.fromkeys(s.stratum for s in stats))
    rows = []
    for st in strata:
        if (group_a, st) not in by_cell or (group_b, st) not in by_cell:
            raise DataError(f"stratum {st!r} lacks one of the compared groups")
        a, b = by_cell[(group_a, st)], by_cell[(group_b, st)]
        rows.append(
            StratumRow(
                stratum=st,
                a=a,
                b=b,
                mu_diff=abs(a.mu - b.mu),
                sigma_avg=0.5 * (a.sigma + b.sigma),
                score=bias_score(a, b),
            )
        )
    return BiasTable(group_a, group_b, rows)


def histogram(estimates, bins: int, lo: float, hi: float) -> Histogram:
    """Equal-width histogram on [lo, hi]; values at hi land in the last bin.

    Out-of-range values are clamped into the edge bins and counted, so the
    counts always sum to n.
    """
    estimates = np.asarray(estimates, dtype=float).ravel()
    if estimates.size == 0:
        raise DataError("histogram of empty input")
    if bins < 1:
        raise DataError(f"bins must be >= 1, got {bins}")
    if not hi > lo:
        raise DataError(f"need hi > lo, got [{lo}, {hi}]")
    width = (hi - lo) / bins
    counts = [0] * bins
    clamped_low = clamped_high = 0
    for v in estimates:
        if v < lo:
            counts[0] += 1
            clamped_low += 1
        elif v >= hi:
            counts[bins - 1] += 1
            if v > hi:
                clamped_high += 1
        else:
            counts[int((v - lo) / width)] += 1
    return Histogram(lo, hi, counts, clamped_low, clamped_high)


def audit(
    estimates,
    groups,
    strata,
    group_pair=None,
    performance=None,
    bins: int = 20,
    value_range=(0.0, 1.0),
    true_values=None,
    metadata=None,
) -> AuditReport:
    """Assemble the full report: bias table, per-cell histograms, performance.

    `group_pair` picks the two groups to score (defaults to the only two
    groups present). For regression studies pass the true target values as
    `true_values` to record the data's own group gap alongside the model's.
    """
    stats = group_stats(estimates, groups, strata)
    group_order = list(dict.fromkeys(groups))
    if group_pair is None:
        if len(group_order) != 2:
            raise DataError(
                f"found {len(group_order)} groups; pass group_pair to pick the two to compare"
            )
        group_pair = tuple(group_order)
    ga, gb = group_pair
    if ga not in group_order or gb not in group_order:
        raise DataError(f"group_pair {group_pair!r} not present in the data")
    table = _pair_rows(stats, ga, gb)

    estimates = np.asarray(estimates, dtype=float).ravel()
    lo, hi = value_range
    hists = []
    for s in stats:
        vals = estimates[
            [i for i in range(len(groups)) if groups[i] == s.group and strata[i] == s.stratum]
        ]
        hists.append((s.group, s.stratum, histogram(vals, bins, lo, hi)))

    true_table = None
    if true_values is not None:
        true_stats = group_stats(true_values, groups, strata)
        true_table = _pair_rows(true_stats, ga, gb)

    return AuditReport(table, stats, hists, performance, dict(metadata or {}), true_table)


# ---------------------------------------------------------------------------
# rendering / export


def _fmt(v: float) -> str:
    if math.isinf(v):
        return "inf"
    return f"{v:.4f}"


def render_bias_table(table: BiasTable) -> str:
    """Aligned-text table: one column per stratum, the classic mu/sigma/score rows."""
    labels = [
        f"mu {table.group_a}",
        f"mu {table.group_b}",
        "mu diff",
        f"sigma {table.group_a}",
        f"sigma {table.group_b}",
        "sigma average",
        "mu diff / sigma average",
    ]
    cols = {}
    for r in table.rows:
        cols[str(r.stratum)] = [r.a.mu, r.b.mu, r.mu_diff, r.a.sigma, r.b.sigma, r.sigma_avg, r.score]
    head_w = max(len(l) for l in labels)
    col_names = list(cols)
    widths = [max(len(c), 8) for c in col_names]
    lines = [" " * head_w + "  " + "  ".join(c.rjust(w) for c, w in zip(col_names, widths))]
    for i, label in enumerate(labels):
        cells = [_fmt(cols[c][i]).rjust(w) for c, w in zip(col_names, widths)]
        lines.append(label.ljust(head_w) + "  " + "  ".join(cells))
    return "\n".join(lines) + "\n"


def bias_table_csv(table: BiasTable) -> str:
    sink = io.StringIO()
    w = csv.writer(sink, lineterminator="\n")
    strata = [str(r.stratum) for r in table.rows]
    w.writerow(["row"] + strata)
    grid = {
        f"mu {table.group_a}": [r.a.mu for r in table.rows],
        f"mu {table.group_b}": [r.b.mu for r in table.rows],
        "mu diff": [r.mu_diff for r in table.rows],
        f"sigma {table.group_a}": [r.a.sigma for r in table.rows],
        f"sigma {table.group_b}": [r.b.sigma for r in table.rows],
        "sigma average": [r.sigma_avg for r in table.rows],
        "mu diff / sigma average": [r.score for r in table.rows],
    }
    for label, vals in grid.items():
        w.writerow([label] + [_fmt(v) for v in vals])
    return sink.getvalue()


def histograms_csv(report: AuditReport) -> str:
    """Plot-ready long format: bin_lo, bin_hi, group, stratum, count."""
    sink = io.StringIO()
    w = csv.writer(sink, lineterminator="\n")
    w.writerow(["bin_lo", "bin_hi", "group", "stratum", "count"])
    for group, stratum, h in report.histograms:
        width = (h.hi - h.lo) / len(h.counts)
        for i, c in enumerate(h.counts):
            w.writerow([repr(h.lo + i * width), repr(h.lo + (i + 1) * width), group, stratum, c])
    return sink.getvalue()


def bias_table_jsonable(table: BiasTable) -> dict:
    return {
        "group_a": table.group_a,
        "group_b": table.group_b,
        "strata": [
            {
                "stratum": r.stratum,
                "n_a": r.a.n,
                "n_b": r.b.n,
                "mu_a": r.a.mu,
                "mu_b": r.b.mu,
                "mu_diff": r.mu_diff,
                "sigma_a": r.a.sigma,
                "sigma_b": r.b.sigma,
                "sigma_avg": r.sigma_avg,
                "bias_score": r.score,
            }
            for r in table.rows
        ],
    }


def report_jsonable(report: AuditReport) -> dict:
    out = {
        "bias_table": bias_table_jsonable(report.bias_table),
        "group_stats": [
            {"group": s.group, "stratum": s.stratum, "n": s.n, "mu": s.mu, "sigma": s.sigma}
            for s in report.stats
        ],
        "histograms": [
            {
                "group": g,
                "stratum": st,
                "lo": h.lo,
                "hi": h.hi,
                "counts": h.counts,
                "clamped_low": h.clamped_low,
                "clamped_high": h.clamped_high,
            }
            for g, st, h in report.histograms
        ],
        "performance": report.performance,
        "metadata": report.metadata,
    }
    if report.true_table is not None:
        out["true_values"] = bias_table_jsonable(report.true_table)
    return to_jsonable(out)


def write_report_csvs(report: AuditReport, prefix) -> None:
    atomic_write_text(f"{prefix}_bias.csv", bias_table_csv(report.bias_table))
    atomic_write_text(f"{prefix}_hist.csv", histograms_csv(report))
