import itertools

import numpy as np
import pytest

from scramwatch.autoencoder import Autoencoder
from scramwatch.errors import ConfigError, DataError
from scramwatch.explain import (
    BaselineTrajectory,
    PerSecondAttribution,
    ShapleyAttribution,
    aggregate_per_second,
    build_baseline,
    calibrate_tau,
    coalition_payoffs,
    exact_shapley,
    localize,
    read_attribution_csv,
    replay_signature_score,
    sampled_shapley,
    shapley_from_payoffs,
    write_attribution_csv,
    write_localization_report,
)
from scramwatch.pipeline import Scaler, encode, fit_scaler
from scramwatch.signals import CONTINUOUS_SIGNALS, SIGNALS
from scramwatch.simulate import ScramProfile, generate_scram

from conftest import tiny_architecture

NO_NOISE = {name: 0.0 for name in CONTINUOUS_SIGNALS}


def brute_force_shapley(payoffs, p):
    """Average marginal gain over every one of the p! orderings."""
    phi = np.zeros(p)
    orders = list(itertools.permutations(range(p)))
    for order in orders:
        mask = 0
        for i in order:
            phi[i] += payoffs[mask | (1 << i)] - payoffs[mask]
            mask |= 1 << i
    return phi / len(orders)


def test_two_player_game_by_hand():
    # v(empty)=0, v({a})=1, v({b})=2, v({a,b})=4
    phi = shapley_from_payoffs(np.array([0.0, 1.0, 2.0, 4.0]), 2)
    assert phi == pytest.approx([1.5, 2.5], abs=1e-15)


def test_additive_game_recovers_weights():
    weights = np.array([0.3, 1.1, -0.4, 2.0])
    masks = np.arange(16)
    member = ((masks[:, None] >> np.arange(4)) & 1).astype(bool)
    payoffs = member @ weights
    phi = shapley_from_payoffs(payoffs, 4)
    assert np.max(np.abs(phi - weights)) <= 1e-12


def test_symmetric_game_gives_equal_shares():
    masks = np.arange(32)
    sizes = np.bitwise_count(masks.astype(np.uint32))
    payoffs = (sizes.astype(float)) ** 2  # depends on coalition size only
    phi = shapley_from_payoffs(payoffs, 5)
    assert np.max(np.abs(phi - phi[0])) <= 1e-12
    assert phi.sum() == pytest.approx(25.0, abs=1e-12)  # efficiency: v(full) - v(empty)


def test_exact_matches_permutation_brute_force():
    rng = np.random.default_rng(5)
    payoffs = rng.random(2 ** 5)
    phi = shapley_from_payoffs(payoffs, 5)
    want = brute_force_shapley(payoffs, 5)
    assert np.max(np.abs(phi - want)) <= 1e-12


def test_payoff_table_shape_checked():
    with pytest.raises(DataError, match="2\\^3"):
        shapley_from_payoffs(np.zeros(7), 3)


@pytest.fixture
def model():
    m = Autoencoder(tiny_architecture(), seed=11)
    m.scaler = Scaler(lo=np.zeros(9), hi=np.ones(9))
    return m


def test_coalition_payoffs_endpoints_and_hybrids(model):
    rng = np.random.default_rng(0)
    window = rng.random((6, 9))
    base = rng.random((6, 9))
    payoffs = coalition_payoffs(model, window, base)
    assert payoffs.shape == (512,)

    from scramwatch.detector import window_errors
    assert payoffs[0] == window_errors(model, base[None])[0]
    assert payoffs[511] == window_errors(model, window[None])[0]
    # single-member coalition: that column observed, the rest baseline
    mask = 1 << 3
    hybrid = base.copy()
    hybrid[:, 3] = window[:, 3]
    assert payoffs[mask] == window_errors(model, hybrid[None])[0]


def test_exact_shapley_efficiency_and_null(model):
    rng = np.random.default_rng(1)
    window = rng.random((6, 9))
    base = window.copy()
    tampered = [0, 2, 5]
    for j in tampered:
        base[:, j] = rng.random(6)
    attr = exact_shapley(model, window, base, end_second=42)
    assert attr.end_second == 42
    assert attr.phi.sum() == pytest.approx(attr.v_full - attr.v_empty, abs=1e-12)
    for j in range(9):
        if j not in tampered:
            # bit-identical column: exactly zero, not merely small
            assert attr.phi[j] == 0.0


def test_exhaustive_limit_enforced(model):
    window = np.zeros((6, 17))
    with pytest.raises(ConfigError, match="exhaustive"):
        coalition_payoffs(model, window, window.copy())


def test_window_shape_checks(model):
    with pytest.raises(DataError, match="one window"):
        coalition_payoffs(model, np.zeros((2, 6, 9)), np.zeros((6, 9)))
    with pytest.raises(DataError, match="align"):
        coalition_payoffs(model, np.zeros((6, 9)), np.zeros((5, 9)))


def test_sampled_estimator_agrees_with_exact():
    rng = np.random.default_rng(2)
    table = rng.random(16)
    calls = []

    def payoff(mask):
        calls.append(mask)
        return table[mask]

    phi, stderr = sampled_shapley(payoff, 4, permutations=3000, rng=np.random.default_rng(3))
    exact = shapley_from_payoffs(table, 4)
    assert np.all(np.abs(phi - exact) <= 3 * stderr + 1e-12)
    # memoized: distinct masks only, never one evaluation per permutation step
    assert len(set(calls)) == len(calls)
    assert len(calls) <= 16


def test_sampled_rejects_zero_permutations():
    with pytest.raises(ConfigError):
        sampled_shapley(lambda m: 0.0, 3, permutations=0, rng=np.random.default_rng(0))


# --- baseline ---------------------------------------------------------------


def scram_series(seed, initial_power, duration=120, onset=60):
    return generate_scram(ScramProfile(duration=duration, onset=onset,
                                       initial_power=initial_power, noise=NO_NOISE,
                                       outlier_rate=0.0, null_rate=0.0, seed=seed))


def test_baseline_is_aligned_arithmetic_mean():
    corpus = [scram_series(0, 72.0), scram_series(1, 78.0)]
    scaler = fit_scaler([encode(s) for s in corpus])
    lb = 10
    got = build_baseline(corpus, scaler, lookback=lb)

    mats = [scaler.transform(encode(s)) for s in corpus]
    onsets = [s.scram_onset() for s in corpus]
    tail = min(m.shape[0] - o for m, o in zip(mats, onsets))
    for k in range(-lb, tail):
        want = np.mean([m[o + k] for m, o in zip(mats, onsets)], axis=0)
        row = got.table[k + lb]
        assert np.max(np.abs(row - want)) <= 1e-12
    assert got.first_offset == -lb
    assert got.last_offset == tail - 1
    assert got.source_count == 2


def test_baseline_identity_on_duplicate_corpus():
    s = scram_series(4, 75.0)
    scaler = fit_scaler([encode(s)])
    b = build_baseline([s, s], scaler, lookback=5)
    m = scaler.transform(encode(s))
    onset = s.scram_onset()
    np.testing.assert_allclose(b.table, m[onset - 5:], atol=1e-15)


def test_baseline_slice_row_selection():
    table = np.arange(10, dtype=np.float64)[:, None] * np.ones((1, 2))
    plateau = np.full(2, -1.0)
    b = BaselineTrajectory(first_offset=-3, table=table, plateau=plateau, source_count=1)
    # onset 100: coverage spans absolute seconds 97..106
    s = b.slice(onset=100, end_second=100, width=6)
    # seconds 95,96 precede coverage -> plateau; 97..100 -> rows 0..3
    assert (s[0] == -1.0).all() and (s[1] == -1.0).all()
    np.testing.assert_array_equal(s[2:, 0], [0.0, 1.0, 2.0, 3.0])
    tail = b.slice(onset=100, end_second=108, width=3)
    # seconds 106,107,108 -> row 9, then settled row repeated
    np.testing.assert_array_equal(tail[:, 0], [9.0, 9.0, 9.0])


def test_baseline_requires_pre_event_history():
    s = scram_series(0, 75.0, duration=60, onset=5)
    scaler = fit_scaler([encode(s)])
    with pytest.raises(DataError, match="pre-event"):
        build_baseline([s], scaler, lookback=10)
    with pytest.raises(DataError, match="empty"):
        build_baseline([], scaler)


def test_global_mean_fallback_is_flat():
    means = np.linspace(0.1, 0.9, 9)
    b = BaselineTrajectory.global_mean(means)
    s = b.slice(onset=0, end_second=500, width=4)
    assert np.max(np.abs(s - means)) == 0.0
    assert b.kind == "global_mean"


# --- aggregation and localization -------------------------------------------


def attribution(end, phi):
    arr = np.zeros(9)
    arr[:len(phi)] = phi
    return ShapleyAttribution(end_second=end, phi=arr, v_full=float(arr.sum()), v_empty=0.0)


def test_aggregate_single_window_spreads_phi():
    per = aggregate_per_second([attribution(9, [2.0])], width=4)
    np.testing.assert_array_equal(per.seconds, [6, 7, 8, 9])
    assert (per.phi[:, 0] == 2.0).all()
    assert (per.counts == 1).all()


def test_aggregate_overlapping_windows_average():
    per = aggregate_per_second([attribution(3, [1.0]), attribution(4, [3.0])], width=3)
    np.testing.assert_array_equal(per.seconds, [1, 2, 3, 4])
    np.testing.assert_allclose(per.phi[:, 0], [1.0, 2.0, 2.0, 3.0])
    np.testing.assert_array_equal(per.counts, [1, 2, 2, 1])


def test_aggregate_empty_is_empty():
    per = aggregate_per_second([], width=5)
    assert len(per.seconds) == 0
    assert per.phi.shape == (0, 9)


def make_per_second(curve, signal_index=0, start=0):
    n = len(curve)
    phi = np.zeros((n, 9))
    phi[:, signal_index] = curve
    return PerSecondAttribution(seconds=start + np.arange(n), phi=phi,
                                counts=np.ones(n, dtype=np.int64))


def test_localize_run_semantics():
    curve = np.zeros(20)
    curve[3:10] = 1.0   # 7-second run, qualifies
    curve[15] = 1.0     # isolated spike, does not
    report = localize(make_per_second(curve, start=100), tau=0.5, min_run=5)
    v = report.verdicts[0]
    assert v.replayed
    assert (v.start, v.end, v.duration) == (103, 109, 7)
    assert v.marked == 8  # spike still counted as marked
    assert report.replayed_signals == (SIGNALS[0],)
    assert report.attack_start == 103 and report.attack_end == 109
    for other in report.verdicts[1:]:
        assert not other.replayed and other.start is None


def test_localize_short_run_rejected():
    curve = np.zeros(20)
    curve[3:7] = 1.0  # 4 < min_run
    report = localize(make_per_second(curve), tau=0.5, min_run=5)
    assert not report.verdicts[0].replayed
    assert report.attack_start is None


def test_localize_two_runs_span_both():
    curve = np.zeros(30)
    curve[2:8] = 1.0
    curve[14:20] = 1.0
    report = localize(make_per_second(curve), tau=0.5, min_run=5)
    v = report.verdicts[0]
    assert (v.start, v.end) == (2, 19)


def test_localize_gap_in_seconds_breaks_run():
    # 4 marked seconds, then a hole in coverage, then 4 more: never 5 consecutive
    phi = np.ones((8, 9))
    seconds = np.array([0, 1, 2, 3, 10, 11, 12, 13])
    per = PerSecondAttribution(seconds=seconds, phi=phi, counts=np.ones(8, dtype=np.int64))
    report = localize(per, tau=0.5, min_run=5)
    assert not any(v.replayed for v in report.verdicts)


def test_localize_threshold_is_strict():
    curve = np.full(10, 0.5)
    report = localize(make_per_second(curve), tau=0.5, min_run=5)
    assert not report.verdicts[0].replayed
    with pytest.raises(ConfigError):
        localize(make_per_second(curve), tau=0.0)


def test_signature_score_periodic_vs_noise():
    rng = np.random.default_rng(6)
    pattern = rng.normal(0.0, 0.1, 20)
    periodic = 1.0 + np.tile(pattern, 5)
    per = make_per_second(periodic, signal_index=2)
    assert replay_signature_score(per, SIGNALS[2], period_hint=20) > 0.5

    noise = 1.0 + rng.normal(0.0, 0.1, 100)
    assert replay_signature_score(make_per_second(noise), SIGNALS[0], period_hint=20) < 0.3


def test_signature_score_guards():
    per = make_per_second(np.ones(10))
    with pytest.raises(ConfigError):
        replay_signature_score(per, SIGNALS[0], period_hint=0)
    with pytest.raises(DataError, match="unknown signal"):
        replay_signature_score(per, "coolant_flow", period_hint=5)
    with pytest.raises(DataError, match="too short"):
        replay_signature_score(make_per_second(np.ones(5) + np.arange(5) * 0.01),
                               SIGNALS[0], period_hint=10)
    # flat plateau detrends to nothing: defined as zero, not an error
    assert replay_signature_score(make_per_second(np.ones(40)), SIGNALS[0], period_hint=10) == 0.0


def test_signal_curve_lookup():
    per = make_per_second(np.arange(5.0), signal_index=3)
    np.testing.assert_array_equal(per.signal_curve(SIGNALS[3]), np.arange(5.0))
    with pytest.raises(DataError):
        per.signal_curve("nope")


# --- calibration and io -----------------------------------------------------


def test_calibrate_tau_on_clean_event(model):
    s = scram_series(7, 75.0)
    model.scaler = fit_scaler([encode(s)])
    b = build_baseline([s], model.scaler, lookback=5)
    tau = calibrate_tau(model, [s], b, quantile=0.999, stride=4)
    assert tau >= 0.0
    with pytest.raises(DataError):
        calibrate_tau(model, [], b)
    with pytest.raises(DataError):
        calibrate_tau(model, [s], b, quantile=1.5)


def test_attribution_csv_round_trip(tmp_path):
    rng = np.random.default_rng(8)
    per = PerSecondAttribution(seconds=np.arange(50, 55), phi=rng.random((5, 9)),
                               counts=np.ones(5, dtype=np.int64))
    path = tmp_path / "attrib.csv"
    write_attribution_csv(path, per)
    back = read_attribution_csv(path)
    np.testing.assert_array_equal(back.seconds, per.seconds)
    np.testing.assert_array_equal(back.phi, per.phi)  # repr round trip is exact


def test_localization_report_file(tmp_path):
    curve = np.zeros(20)
    curve[3:10] = 1.0
    report = localize(make_per_second(curve, start=100), tau=0.5, min_run=5)
    path = tmp_path / "report.txt"
    write_localization_report(path, report)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "signal,replayed,start,end,duration"
    assert f"{SIGNALS[0]},yes,103,109,7" in lines
    assert lines[-1] == "signals_replayed=1,attack_start=103,attack_end=109"
