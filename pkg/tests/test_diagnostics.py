from dataclasses import replace

import numpy as np
import pytest

from amfcc import charting, diagnostics, simgen
from amfcc.errors import DataError
from amfcc.mfpca import destandardize, project_scores, standardize
from amfcc.smoothing import SmoothedObservation, smooth_batch


def test_decomposition_identity(small_chart):
    chart, _, _ = small_chart
    obs = simgen.generate(simgen.ScenarioSpec(seed=41, shift="B", severity=2), 100)
    res = charting.score_batch(chart, obs)
    total = res.raw_contributions.sum(axis=1)
    np.testing.assert_allclose(total, res.partials, rtol=1e-8, atol=1e-12)
    np.testing.assert_allclose(
        chart.diag_reference.raw.sum(axis=1), chart.reference_partials, rtol=1e-8, atol=1e-12
    )


def test_single_contributions(small_chart, basis20):
    chart, train, _ = small_chart
    model = chart.models[3]
    obs = smooth_batch(basis20, train[:1], model.lambda_)[0]
    sv = project_scores(model, obs)
    for L in (1, 4, model.rank):
        c = diagnostics.contributions(model, obs, sv, L)
        assert c.sum() == pytest.approx(charting.partial_t2(model, sv, L), rel=1e-8)

    mean_obs = replace(obs, coeffs=model.mean_coeffs.copy())
    np.testing.assert_allclose(diagnostics.contributions(model, mean_obs, project_scores(model, mean_obs), 5), 0, atol=1e-12)

    ct = standardize(model, obs.coeffs)
    ct[1] = 0.0
    zeroed = replace(obs, coeffs=destandardize(model, ct))
    c = diagnostics.contributions(model, zeroed, project_scores(model, zeroed), 6)
    assert abs(c[1]) < 1e-10 and abs(c[0]) > 1e-6
    with pytest.raises(DataError):
        diagnostics.contributions(model, obs, sv, model.rank + 1)


def test_minimum_row_not_flagged(small_chart):
    chart, _, _ = small_chart
    ref = chart.diag_reference
    row = ref.raw.min(axis=0)  # (p, T)
    combined, flags = diagnostics.combine_contributions(chart, row)
    np.testing.assert_allclose(combined, 0.0, atol=0)
    assert not flags.any()


def test_flags_follow_limits(small_chart):
    chart, _, _ = small_chart
    obs = simgen.generate(simgen.ScenarioSpec(seed=42, shift="C", severity=2), 60)
    tables = diagnostics.diagnose_batch(chart, obs)
    for tab in tables:
        assert np.array_equal(tab.flags, tab.combined > chart.diag_reference.limits)
        assert tab.raw.shape == tab.pvalues.shape == (5, chart.grid.T)
        assert tab.pvalues.min() >= 1 / (chart.n_tune + 1)
    single = diagnostics.diagnose(chart, obs[0])
    np.testing.assert_allclose(single.combined, tables[0].combined, rtol=1e-12)


def test_signal_and_flags_are_independent_states(small_chart):
    chart, _, _ = small_chart
    obs = simgen.generate(simgen.ScenarioSpec(seed=43), 300)
    obs += simgen.generate(simgen.ScenarioSpec(seed=44, shift="A", severity=1), 300)
    res = charting.score_batch(chart, obs)
    any_flag = res.flagged.any(axis=1)
    assert np.any(res.signal & ~any_flag), "a signal without any flagged component should occur"
    assert np.any(~res.signal & any_flag), "a flag without a signal should occur"


def test_reference_limits(small_chart):
    chart, _, _ = small_chart
    ref = chart.diag_reference
    for k in range(ref.limits.size):
        assert np.mean(ref.combined[:, k] > ref.limits[k]) <= ref.alpha


def test_missing_reference_and_shape(small_chart):
    chart, _, _ = small_chart
    with pytest.raises(DataError):
        diagnostics.combine_contributions(replace(chart, diag_reference=None), np.zeros((5, chart.grid.T)))
    with pytest.raises(DataError):
        diagnostics.combine_contributions(chart, np.zeros((4, chart.grid.T)))
