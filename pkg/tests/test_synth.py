import numpy as np
import pytest

from fairprep.debias import leakage_probe
from fairprep.synth import PROTECTED_COLUMN, TARGET_COLUMN, SyntheticSpec, make_synthetic, synth_check
from fairprep.tabular import DataError


def test_spec_validation():
    with pytest.raises(ValueError):
        SyntheticSpec(prevalence=0.0)
    with pytest.raises(ValueError):
        SyntheticSpec(bias_strength=1.0)
    with pytest.raises(ValueError):
        SyntheticSpec(proxy_strength=1.5)
    with pytest.raises(DataError, match="degenerate"):
        make_synthetic(SyntheticSpec(n=50, prevalence=0.1))


def test_no_bias_means_observed_equals_fair():
    spec = SyntheticSpec(n=600, bias_strength=0.0, proxy_strength=0.0, seed=3)
    table, fair = make_synthetic(spec)
    assert table.column(TARGET_COLUMN) == [int(v) for v in fair]


def test_no_proxy_probe_in_null_band():
    spec = SyntheticSpec(n=2000, bias_strength=0.0, proxy_strength=0.0, seed=5)
    table, _ = make_synthetic(spec)
    assert 0.45 <= leakage_probe(table, PROTECTED_COLUMN, seed=5) <= 0.58


def test_perfect_proxy_probe_saturates():
    spec = SyntheticSpec(n=1000, bias_strength=0.0, proxy_strength=1.0, seed=1)
    table, _ = make_synthetic(spec)
    # at full strength the proxy is an affine copy of the protected flag
    proxy = np.array(table.column("proxy1"))
    flag = np.array(table.column(PROTECTED_COLUMN), dtype=float)
    assert len(set(np.round(proxy[flag == 1], 9))) == 1
    assert leakage_probe(table, PROTECTED_COLUMN, seed=1) >= 0.95


def test_flip_counts_match_spec():
    spec = SyntheticSpec(n=2000, prevalence=0.5, bias_strength=0.3, proxy_strength=0.0, seed=7)
    table, fair = make_synthetic(spec)
    observed = np.array(table.column(TARGET_COLUMN))
    flag = np.array(table.column(PROTECTED_COLUMN))
    flipped = observed != fair
    # flips only move protected-group members toward the adverse outcome
    assert np.all(flag[flipped] == 1)
    assert np.all(fair[flipped] == 0) and np.all(observed[flipped] == 1)
    eligible = int(((flag == 1) & (fair == 0)).sum())
    expected = spec.bias_strength * eligible
    sigma = np.sqrt(eligible * spec.bias_strength * (1 - spec.bias_strength))
    assert abs(int(flipped.sum()) - expected) <= 3 * sigma


def test_fair_labels_invariant_to_beta():
    _, fair_a = make_synthetic(SyntheticSpec(n=500, bias_strength=0.0, seed=11))
    _, fair_b = make_synthetic(SyntheticSpec(n=500, bias_strength=0.4, seed=11))
    assert np.array_equal(fair_a, fair_b)


def test_make_synthetic_deterministic():
    spec = SyntheticSpec(n=300, seed=13)
    t1, f1 = make_synthetic(spec)
    t2, f2 = make_synthetic(spec)
    assert t1.columns == t2.columns
    assert np.array_equal(f1, f2)


def test_synth_check_null_case_pre_post_match():
    spec = SyntheticSpec(n=1200, bias_strength=0.0, proxy_strength=0.0, seed=2)
    result = synth_check(spec)
    assert abs(result.fair_accuracy_pre - result.fair_accuracy_post) <= 0.03


def test_synth_check_directional_improvements():
    spec = SyntheticSpec(n=2000, bias_strength=0.3, proxy_strength=0.8, seed=4)
    result = synth_check(spec)
    assert result.probe_auc_pre >= 0.75
    assert result.probe_auc_post <= 0.60
    mean_pre = sum(result.bias_scores_pre.values()) / len(result.bias_scores_pre)
    mean_post = sum(result.bias_scores_post.values()) / len(result.bias_scores_post)
    assert mean_post < mean_pre
    assert result.fair_accuracy_post >= result.fair_accuracy_pre - 0.02


def test_synth_check_jsonable():
    import json

    spec = SyntheticSpec(n=600, seed=8)
    json.dumps(synth_check(spec).to_jsonable())
