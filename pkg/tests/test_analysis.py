import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import least_squares

from rb422 import analysis, code
from rb422.analysis import (DegenerateDataError, FidelityEstimate, NAIVE_FIT_FLAGS, bootstrap_infidelities,
                            fidelity_from_params, fit_decay, fit_standard_phased, no_postselection_analysis,
                            percentile_interval)
from rb422.protocol import SurvivalRecord, SurvivalSeries, default_lengths, estimate_survival

LENGTHS = np.array(default_lengths(), float)


def exact_series(q, m=LENGTHS, n=1000.0):
    q = np.asarray(q, float)
    acc = np.full(len(m), n)
    return SurvivalSeries(np.asarray(m, float), q * acc, acc, acc)


def synthetic_records(run_type, q_fn, rng, lengths=LENGTHS, seqs=12, shots=500, accept=1.0):
    recs = []
    for m in lengths:
        p = q_fn(m)
        for r in range(seqs):
            total = shots
            acc = rng.binomial(total, accept) if accept < 1 else total
            recs.append(SurvivalRecord(run_type, int(m), r, 0, total, int(acc), int(rng.binomial(acc, p))))
    return recs


def test_exact_reduced_recovery():
    fit = fit_decay(exact_series(0.25 + 0.75 * 0.9 ** LENGTHS))
    assert fit.params["b"] == pytest.approx(0.9, abs=1e-9)
    assert fit.params["B"] == pytest.approx(0.75, abs=1e-9)


def test_exact_full_recovery():
    q = 0.25 + 0.3 * 0.97 ** LENGTHS + 0.4 * 0.9 ** LENGTHS
    fit = fit_decay(exact_series(q), "full")
    got = sorted([(fit.params["b"], fit.params["B"]), (fit.params["c"], fit.params["C"])])
    assert got[0] == pytest.approx((0.9, 0.4), abs=1e-6)
    assert got[1] == pytest.approx((0.97, 0.3), abs=1e-6)


def test_reduced_c_names():
    fit = fit_decay(exact_series(0.25 + 0.5 * 0.8 ** LENGTHS), "reduced_c")
    assert set(fit.params) == {"C", "c"}
    assert fit.predict([0])[0] == pytest.approx(0.75, abs=1e-9)
    with pytest.raises(ValueError):
        fit_decay(exact_series(0.25 + 0.5 * 0.8 ** LENGTHS), "cubic")


def test_noiseless_fit_is_exact():
    fit = fit_decay(exact_series(np.ones(len(LENGTHS))))
    assert fit.params["b"] == 1.0 and fit.stderr["b"] == 0.0


def test_degenerate_data():
    with pytest.raises(DegenerateDataError):
        fit_decay(exact_series(np.full(len(LENGTHS), 0.25)))
    with pytest.raises(DegenerateDataError):
        fit_decay(exact_series([0.9, 0.8], m=[2, 5]))


def test_standard_errors_calibrated():
    # [DERIVED] with binomial noise at b = 0.95, the fitted b should lie within 3 SE almost always
    rng = np.random.default_rng(2024)
    m = LENGTHS
    shots = np.full(len(m), 4000.0)
    truth = 0.25 + 0.75 * 0.95 ** m
    hits = 0
    for _ in range(100):
        s = rng.binomial(shots.astype(int), truth).astype(float)
        fit = fit_decay(SurvivalSeries(m, s, shots, shots))
        hits += abs(fit.params["b"] - 0.95) < 3 * fit.stderr["b"]
    assert hits >= 95


@pytest.mark.parametrize("b, c, f", [(1, 1, 1.0), (0, 0, 0.25), (0.9, 0.8, (8.1 + 4.8 + 5) / 20),
                                     (-1, -1, -0.5)])
def test_fidelity_formula(b, c, f):
    assert fidelity_from_params(b, c) == pytest.approx(f)


@given(st.floats(-1, 1))
def test_fidelity_equal_rates(b):
    # [DERIVED] for depolarizing noise on d = 4, F = 1 - (1 - b)(d - 1)/d
    assert fidelity_from_params(b, b) == pytest.approx((3 * b + 1) / 4)


def test_fidelity_range_checked():
    with pytest.raises(ValueError):
        fidelity_from_params(1.2, 0.9)
    est = FidelityEstimate.from_params(0.9, 0.9, ci_low=0.05, ci_high=0.1)
    assert est.infidelity == pytest.approx(0.075)
    assert est.ci_width == pytest.approx(0.05)
    assert set(est.to_dict()) == {"b", "c", "fidelity", "infidelity", "ci_low", "ci_high", "stderr"}


def test_kappa_ratio():
    assert analysis.phased_amplitude_ratio(code.LOGICAL) == pytest.approx(1 / 3)
    assert analysis.phased_amplitude_ratio(code.BARE) == pytest.approx(1 / 3)


def test_joint_fit_exact():
    k = 1 / 3
    std = exact_series(0.25 + 0.75 * 0.96 ** LENGTHS)
    ph = exact_series(0.25 + k * 0.75 * 0.96 ** LENGTHS + 0.5 * 0.9 ** LENGTHS)
    fit = fit_standard_phased(std, ph)
    assert fit.params["b"] == pytest.approx(0.96, abs=1e-8)
    assert fit.params["c"] == pytest.approx(0.9, abs=1e-8)
    assert fit.params["C"] == pytest.approx(0.5, abs=1e-8)
    assert fit.predict_phased([0])[0] == pytest.approx(1.0, abs=1e-8)


def test_joint_fit_zero_kappa_reduces_to_c():
    std = exact_series(0.25 + 0.75 * 0.96 ** LENGTHS)
    ph = exact_series(0.25 + 0.6 * 0.9 ** LENGTHS)
    fit = fit_standard_phased(std, ph, kappa=0.0)
    assert fit.params["c"] == pytest.approx(0.9, abs=1e-8)


def test_batched_lm_matches_least_squares():
    rng = np.random.default_rng(1)
    m = LENGTHS
    qs = 0.25 + 0.7 * 0.93 ** m + rng.normal(0, 0.01, size=(5, len(m)))
    ws = np.full_like(qs, 100.0)
    lower, upper = np.array([-0.25, -1.0]), np.array([0.75, 1.0])
    got = analysis._batched_lm(lambda t: analysis._single_model(t, m), np.tile([0.7, 0.93], (5, 1)),
                               qs, ws, lower, upper)
    for row, q in zip(got, qs):
        ref = least_squares(lambda t: (0.25 + t[0] * t[1] ** m - q), [0.7, 0.93], bounds=(lower, upper),
                            xtol=1e-15, ftol=1e-15, gtol=1e-15).x
        assert row == pytest.approx(ref, abs=1e-7)


def test_batched_lm_with_pinned_amplitude():
    # the noiseless standard amplitude sits on its upper bound; the free rates must still converge
    rng = np.random.default_rng(4)
    m, k = LENGTHS, 1 / 3
    clean = np.hstack([0.25 + 0.75 * 0.99 ** m, 0.25 + k * 0.75 * 0.99 ** m + 0.5 * 0.97 ** m])
    qs = np.clip(clean + rng.normal(0, 0.002, size=(6, 2 * len(m))), 0, 1)
    qs[:, 0] = 1.0
    ws = np.full_like(qs, 1000.0)
    lower, upper = np.array([-0.25, -1.0] * 2), np.array([0.75, 1.0] * 2)
    fn = lambda t: analysis._joint_model(t, m, m, k)
    theta0 = np.array([0.75, 0.99, k * 0.75 + 0.5, 0.97])
    got = analysis._batched_lm(fn, np.tile(theta0, (6, 1)), qs, ws, lower, upper)
    for row, q in zip(got, qs):
        ref = least_squares(lambda t: fn(t[None, :])[0][0] - q, theta0, bounds=(lower, upper),
                            xtol=1e-15, ftol=1e-15, gtol=1e-15).x
        assert row == pytest.approx(ref, abs=1e-7)


def test_percentile_ranks():
    s = np.arange(1, 10000, dtype=float)[::-1]
    assert percentile_interval(s) == (250.0, 9750.0)


def test_bootstrap_noiseless_collapses():
    recs = synthetic_records("physical_standard", lambda m: 1.0, np.random.default_rng(0), seqs=3)
    inf = bootstrap_infidelities(recs, resamples=200)
    assert np.all(inf == 0.0)


def test_bootstrap_reproducible():
    rng = np.random.default_rng(5)
    recs = synthetic_records("physical_standard", lambda m: 0.25 + 0.75 * 0.97 ** m, rng, seqs=4)
    a = bootstrap_infidelities(recs, resamples=300, seed=9, chunk=128)
    assert np.array_equal(a, bootstrap_infidelities(recs, resamples=300, seed=9, chunk=128))
    assert not np.array_equal(a, bootstrap_infidelities(recs, resamples=300, seed=10, chunk=128))


def test_bootstrap_width_matches_stderr():
    rng = np.random.default_rng(6)
    recs = synthetic_records("physical_standard", lambda m: 0.25 + 0.75 * 0.97 ** m, rng, seqs=8)
    fit = fit_decay(estimate_survival(recs))
    lo, hi = percentile_interval(bootstrap_infidelities(recs, resamples=999, seed=1))
    se = 0.75 * fit.stderr["b"]
    assert 1.5 * se < hi - lo < 8 * se


def test_bootstrap_needs_two_sequences():
    recs = synthetic_records("physical_standard", lambda m: 0.9, np.random.default_rng(0), seqs=1)
    with pytest.raises(ValueError):
        bootstrap_infidelities(recs, resamples=10)
    with pytest.raises(ValueError):
        bootstrap_infidelities(recs, resamples=0)


def test_bootstrap_coverage():
    # [DERIVED] the 95% interval should cover the true infidelity in >= 90% of synthetic experiments
    truth_b = 0.97
    truth = 1 - fidelity_from_params(truth_b, truth_b)
    rng = np.random.default_rng(77)
    lengths = LENGTHS[::3]
    covered = 0
    for i in range(200):
        recs = synthetic_records("physical_standard", lambda m: 0.25 + 0.75 * truth_b ** m, rng,
                                 lengths=lengths, seqs=6, shots=200)
        lo, hi = percentile_interval(bootstrap_infidelities(recs, resamples=499, seed=i))
        covered += lo <= truth <= hi
    assert covered >= 180


def test_joint_bootstrap_runs():
    rng = np.random.default_rng(8)
    std = synthetic_records("logical_standard", lambda m: 0.25 + 0.75 * 0.97 ** m, rng, seqs=4)
    ph = synthetic_records("logical_phased", lambda m: 0.25 + 0.25 * 0.97 ** m + 0.5 * 0.95 ** m, rng, seqs=4)
    fit, est = analysis.estimate_fidelity(std, ph, resamples=400, seed=3)
    assert est.ci_low <= est.infidelity <= est.ci_high
    assert fit.params["c"] == pytest.approx(0.95, abs=0.01)


def test_no_postselection_noiseless_matches():
    rng = np.random.default_rng(0)
    std = synthetic_records("logical_standard", lambda m: 1.0, rng, seqs=2)
    ph = synthetic_records("logical_phased", lambda m: 1.0, rng, seqs=2)
    _, post = analysis.estimate_fidelity(std, ph, resamples=0)
    naive = no_postselection_analysis(std, ph)
    assert naive.estimate.infidelity == post.infidelity == 0.0
    assert set(NAIVE_FIT_FLAGS) <= set(naive.flags)
    only = no_postselection_analysis(std)
    assert "c_assumed_equal_b" in only.flags


def test_no_postselection_counts_rejections_as_failures():
    rng = np.random.default_rng(1)
    std = synthetic_records("logical_standard", lambda m: 0.25 + 0.75 * 0.98 ** m, rng, accept=0.9)
    post = fit_decay(estimate_survival(std))
    naive = no_postselection_analysis(std)
    assert naive.estimate.infidelity > 1 - fidelity_from_params(post.params["b"], post.params["b"])
