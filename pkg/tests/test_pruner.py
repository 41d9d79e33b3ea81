from __future__ import annotations

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

import ssmprune as sp
from ssmprune.exceptions import ValidationError


def test_get_set_params_round_trip():
    pr = sp.StatePruner(method="aire", ratio=0.3, epsilon=1e-10)
    params = pr.get_params()
    assert params["method"] == "aire" and params["ratio"] == 0.3
    pr.set_params(ratio=0.7, method="magnitude")
    assert pr.ratio == 0.7 and pr.method == "magnitude"


def test_clone_keeps_hyperparameters_drops_state():
    st = sp.synth(seed=1, layers=2, modes=5, channels=2)
    pr = sp.StatePruner(ratio=0.4).fit(st)
    assert hasattr(pr, "decision_")
    fresh = clone(pr)
    assert fresh.ratio == 0.4
    assert not hasattr(fresh, "decision_")


def test_transform_before_fit_raises():
    st = sp.synth(seed=1, layers=2, modes=5, channels=2)
    with pytest.raises(NotFittedError):
        sp.StatePruner().transform(st)


def test_fit_transform_matches_functional_path():
    st = sp.synth(seed=2, layers=3, modes=7, channels=2)
    pr = sp.StatePruner(method="aire", ratio=0.5, seed=0)
    red = pr.fit_transform(st)
    tab = sp.score_table(st, method="aire", policy="prefix")
    dec = sp.select_global_prefix(tab, ratio=0.5)
    want = sp.materialize(dec, st)
    assert [l.name for l in red] == [l.name for l in want]
    for a, b in zip(red, want):
        np.testing.assert_array_equal(a.lam, b.lam)
        np.testing.assert_array_equal(a.B, b.B)


def test_uniform_and_global_policies_dispatch():
    st = sp.synth(seed=3, layers=2, modes=6, channels=2)
    uni = sp.StatePruner(method="magnitude", ratio=0.5).fit(st)
    assert uni.decision_.policy == "uniform_ratio"
    glob = sp.StatePruner(method="aire", policy="global", ratio=0.5).fit(st)
    assert glob.decision_.policy == "global_raw"


def test_threshold_requires_prefix_policy():
    st = sp.synth(seed=4, layers=2, modes=5, channels=2)
    pr = sp.StatePruner(method="aire", ratio=None, threshold=0.05)
    pr.fit(st)
    assert pr.decision_.tau == 0.05
    bad = sp.StatePruner(method="magnitude", ratio=None, threshold=0.05)
    with pytest.raises(ValidationError):
        bad.fit(st)


def test_continuous_input_scored_discrete_but_output_stays_continuous():
    st = sp.synth(seed=5, layers=2, modes=6, channels=2, time_domain="continuous")
    pr = sp.StatePruner(ratio=0.5)
    red = pr.fit_transform(st)
    for lay in red:
        assert lay.time_domain == "continuous"
        assert lay.delta is not None
    # the fitted decision still refers to the original mode indexing
    kept_total = sum(len(l.kept) for l in pr.decision_.layers)
    assert red.total_modes() == kept_total


def test_refitting_updates_state():
    st = sp.synth(seed=6, layers=2, modes=6, channels=2)
    pr = sp.StatePruner(ratio=0.2).fit(st)
    n_light = sum(len(l.kept) for l in pr.decision_.layers)
    pr.set_params(ratio=0.8)
    pr.fit(st)
    n_heavy = sum(len(l.kept) for l in pr.decision_.layers)
    assert n_heavy < n_light


def test_invalid_stack_rejected_at_fit():
    bad = sp.ModelStack([sp.DiagonalLayer("x", [1.5], [[1.0]], [[1.0]])])
    with pytest.raises(ValidationError):
        sp.StatePruner().fit(bad)
