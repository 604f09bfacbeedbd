"""Tests for byte-progress extraction, Spearman matching, and intervals."""

import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from routelens.correlation import (
    AccuracyReport,
    ByteProgressSeries,
    ConstantInputError,
    Direction,
    EmptyDirectionError,
    EndpointTrace,
    LengthMismatchError,
    MatchResult,
    PacketObservation,
    SignalKind,
    clopper_pearson,
    correlate_all,
    evaluate,
    extract_progress,
    match,
    observation_from_record,
    observation_to_record,
    spearman,
    unwrap_cumulative,
)

WRAP = 2**32


# --- independent oracles -----------------------------------------------------


def brute_ranks(values):
    """O(n^2) average ranks: 1 + (#smaller) + (#equal - 1)/2."""
    return [
        1 + sum(1 for u in values if u < x) + (sum(1 for u in values if u == x) - 1) / 2
        for x in values
    ]


def brute_spearman(x, y):
    """Pearson of brute-force ranks, computed with explicit sums."""
    rx, ry = brute_ranks(x), brute_ranks(y)
    n = len(x)
    mx, my = sum(rx) / n, sum(ry) / n
    num = math.fsum((a - mx) * (b - my) for a, b in zip(rx, ry))
    den = math.sqrt(
        math.fsum((a - mx) ** 2 for a in rx) * math.fsum((b - my) ** 2 for b in ry)
    )
    return num / den


# --- unwrap ------------------------------------------------------------------


def test_unwrap_no_wrap():
    assert unwrap_cumulative([100, 200, 300]) == [100, 200, 300]


def test_unwrap_forced_wraparound():
    assert unwrap_cumulative([WRAP - 10, 5]) == [WRAP - 10, WRAP + 5]


def test_unwrap_recovers_random_walk():
    rng = random.Random(11)
    walk = [rng.randrange(0, WRAP)]
    for _ in range(5000):
        walk.append(walk[-1] + rng.randrange(0, 2**20))
    reduced = [v % WRAP for v in walk]
    recovered = unwrap_cumulative(reduced)
    # anchored at the first reduced value, so shift by whole wraps of walk[0]
    shift = walk[0] - reduced[0]
    assert [v + shift for v in recovered] == walk


def test_unwrap_empty_rejected():
    with pytest.raises(ValueError):
        unwrap_cumulative([])


# --- extract_progress --------------------------------------------------------


def _trace(obs, vantage="v0"):
    return EndpointTrace(vantage, ("a:1", "b:2"), obs)


def test_extract_data_progress_single_bin():
    trace = _trace(
        [
            PacketObservation(0.1, Direction.TO_RELAY, 1000, 0, 500),
            PacketObservation(0.4, Direction.TO_RELAY, 1500, 0, 500),
        ]
    )
    series = extract_progress(trace, SignalKind.DATA, Direction.TO_RELAY, bin_width=1.0)
    assert series.deltas.tolist() == [1000.0]


def test_extract_ack_progress_with_leading_zero_bin():
    trace = _trace(
        [
            PacketObservation(0.2, Direction.FROM_RELAY, 0, 1000, 0),
            PacketObservation(1.5, Direction.FROM_RELAY, 0, 3000, 0),
        ]
    )
    series = extract_progress(
        trace, SignalKind.ACK, Direction.FROM_RELAY, bin_width=1.0, window=2.0, t0=0.0
    )
    assert series.deltas.tolist() == [0.0, 2000.0]


def test_extract_counts_retransmission_once():
    trace = _trace(
        [
            PacketObservation(0.1, Direction.TO_RELAY, 1000, 0, 500),
            PacketObservation(0.3, Direction.TO_RELAY, 1000, 0, 500),
            PacketObservation(0.5, Direction.TO_RELAY, 1500, 0, 500),
        ]
    )
    series = extract_progress(trace, SignalKind.DATA, Direction.TO_RELAY, bin_width=1.0)
    assert series.total_bytes == 1000.0


def test_extract_ignores_syn_fin_payload():
    trace = _trace(
        [
            PacketObservation(0.0, Direction.TO_RELAY, 999, 0, 1, frozenset({"SYN"})),
            PacketObservation(0.1, Direction.TO_RELAY, 1000, 0, 500),
            PacketObservation(0.4, Direction.TO_RELAY, 1500, 0, 500),
            PacketObservation(0.6, Direction.TO_RELAY, 2000, 0, 1, frozenset({"FIN"})),
        ]
    )
    series = extract_progress(trace, SignalKind.DATA, Direction.TO_RELAY, bin_width=1.0)
    assert series.total_bytes == 1001.0  # seq span, not the flag bytes


def test_extract_empty_direction_errors():
    trace = _trace([PacketObservation(0.1, Direction.TO_RELAY, 1, 0, 10)])
    with pytest.raises(EmptyDirectionError):
        extract_progress(trace, SignalKind.ACK, Direction.FROM_RELAY)


def test_extract_auto_direction_picks_payload_side():
    trace = _trace(
        [
            PacketObservation(0.1, Direction.TO_RELAY, 100, 7, 500),
            PacketObservation(0.2, Direction.FROM_RELAY, 7, 600, 0),
            PacketObservation(0.6, Direction.TO_RELAY, 600, 7, 500),
            PacketObservation(0.7, Direction.FROM_RELAY, 7, 1100, 0),
        ]
    )
    data = extract_progress(trace, SignalKind.DATA, bin_width=1.0, t0=0.0)
    ack = extract_progress(trace, SignalKind.ACK, bin_width=1.0, t0=0.0)
    assert data.total_bytes == 1000.0
    assert ack.total_bytes == 500.0  # acks advance 600 -> 1100


@settings(max_examples=60)
@given(
    st.lists(
        st.tuples(st.floats(0, 250), st.integers(0, 2**20)), min_size=1, max_size=60
    ),
    st.sampled_from([0.5, 1.0, 2.0, 7.0]),
)
def test_extract_totals_independent_of_bin_width(raw, other_width):
    times = sorted(t for t, _ in raw)
    payloads = [p for _, p in raw]
    seq = 1234
    obs = []
    for t, payload in zip(times, payloads):
        obs.append(PacketObservation(t, Direction.TO_RELAY, seq, 0, payload))
        seq = (seq + payload) % WRAP
    trace = _trace(obs)
    base = extract_progress(
        trace, SignalKind.DATA, Direction.TO_RELAY, bin_width=1.0, window=260.0, t0=0.0
    )
    other = extract_progress(
        trace, SignalKind.DATA, Direction.TO_RELAY, bin_width=other_width, window=260.0, t0=0.0
    )
    assert np.all(base.deltas >= 0)
    assert base.total_bytes == other.total_bytes == sum(payloads)


# --- spearman ----------------------------------------------------------------


def test_spearman_perfect_and_reversed():
    assert spearman([1, 2, 3, 4], [10, 20, 30, 40]) == pytest.approx(1.0)
    assert spearman([1, 2, 3, 4], [9, 7, 5, 3]) == pytest.approx(-1.0)


def test_spearman_hand_computed_case():
    # brute_spearman([1,2,3,4,5], [2,1,4,3,5]) == 1 - 6*4/(5*24) == 0.8
    expected = brute_spearman([1, 2, 3, 4, 5], [2, 1, 4, 3, 5])
    assert expected == pytest.approx(0.8)
    assert spearman([1, 2, 3, 4, 5], [2, 1, 4, 3, 5]) == pytest.approx(expected)


def test_spearman_ties_match_oracle():
    x = [1, 1, 2, 3, 3, 3]
    y = [10, 20, 20, 30, 10, 30]
    assert spearman(x, y) == pytest.approx(brute_spearman(x, y), abs=1e-12)


def test_spearman_errors():
    with pytest.raises(ConstantInputError):
        spearman([1, 1, 1, 1], [1, 2, 3, 4])
    with pytest.raises(ConstantInputError):
        spearman([1, 2, 3, 4], [5, 5, 5, 5])
    with pytest.raises(LengthMismatchError):
        spearman([1, 2, 3], [1, 2, 3, 4])
    with pytest.raises(LengthMismatchError):
        spearman([1, 2], [2, 1])


vectors = st.lists(st.integers(-1000, 1000), min_size=3, max_size=40)


@settings(max_examples=80)
@given(vectors, vectors)
def test_spearman_symmetric_and_matches_oracle(x, y):
    if len(x) != len(y):
        x, y = x[: min(len(x), len(y))], y[: min(len(x), len(y))]
    if len(x) < 3 or len(set(x)) < 2 or len(set(y)) < 2:
        return
    left = spearman(x, y)
    assert left == pytest.approx(spearman(y, x), abs=1e-12)
    assert left == pytest.approx(brute_spearman(x, y), abs=1e-9)
    assert -1.0 <= left <= 1.0


@settings(max_examples=60)
@given(vectors)
def test_spearman_invariant_under_monotone_transform(x):
    if len(set(x)) < 2:
        return
    y = [v * 3 + 17 for v in x]
    base = spearman(x, y)
    transformed = spearman([math.exp(v / 500) for v in x], [v**3 for v in y])
    assert transformed == pytest.approx(base, abs=1e-9)


# --- correlate_all / match / evaluate ---------------------------------------


def _series(deltas):
    return ByteProgressSeries(1.0, 0.0, np.asarray(deltas, dtype=np.float64))


def test_correlate_all_identity_and_reverse():
    client = _series([1, 2, 3, 4])
    assert correlate_all([client], [_series([1, 2, 3, 4])])[0, 0] == pytest.approx(1.0)
    assert correlate_all([client], [_series([4, 3, 2, 1])])[0, 0] == pytest.approx(-1.0)


def test_correlate_all_marks_constant_series_not_comparable():
    matrix = correlate_all([_series([5, 5, 5, 5])], [_series([1, 2, 3, 4])])
    assert np.isnan(matrix[0, 0])


def test_correlate_all_matches_pairwise_spearman():
    rng = random.Random(3)
    clients = [_series([rng.randrange(50) for _ in range(20)]) for _ in range(4)]
    servers = [_series([rng.randrange(50) for _ in range(20)]) for _ in range(5)]
    matrix = correlate_all(clients, servers)
    for i, c in enumerate(clients):
        for j, s in enumerate(servers):
            assert matrix[i, j] == pytest.approx(
                spearman(c.deltas, s.deltas), abs=1e-9
            )


def test_correlate_all_max_lag_recovers_shifted_pair():
    rng = random.Random(5)
    base = [rng.randrange(1000) for _ in range(40)]
    client = _series(base)
    shifted = _series([0, 0] + base[:-2])
    assert correlate_all([client], [shifted])[0, 0] < 0.9
    assert correlate_all([client], [shifted], max_lag_bins=3)[0, 0] == pytest.approx(1.0)


def test_match_threshold_and_tie():
    results = match(np.array([[0.9, 0.2]]), 0.5, ["c0"], ["s0", "s1"])
    assert results[0].matched_server_id == "s0"
    assert results[0].coefficient == pytest.approx(0.9)
    below = match(np.array([[0.3, 0.2]]), 0.5, ["c0"], ["s0", "s1"])
    assert below[0].matched_server_id is None and below[0].coefficient is None
    tied = match(np.array([[0.8, 0.8]]), 0.5, ["c0"], ["s0", "s1"])
    assert tied[0].matched_server_id == "s0" and tied[0].tie


def test_match_with_floor_threshold_always_matches():
    rng = np.random.default_rng(9)
    matrix = rng.uniform(-1, 1, size=(6, 6))
    for result in match(matrix, -1.0):
        assert result.matched_server_id is not None


def test_raising_threshold_only_converts_matches_to_none():
    rng = np.random.default_rng(10)
    matrix = rng.uniform(-1, 1, size=(8, 8))
    low = match(matrix, 0.1)
    high = match(matrix, 0.6)
    for a, b in zip(low, high):
        assert b.matched_server_id in (a.matched_server_id, None)


def test_evaluate_paper_style_rates():
    truth = {f"c{i}": f"s{i}" for i in range(50)}
    all_correct = [MatchResult(f"c{i}", f"s{i}", 0.9, "") for i in range(50)]
    report = evaluate(all_correct, truth)
    assert (report.accuracy, report.false_negative_rate, report.false_positive_rate) == (
        1.0,
        0.0,
        0.0,
    )

    two_unmatched = [
        MatchResult(f"c{i}", None if i < 2 else f"s{i}", None if i < 2 else 0.9, "")
        for i in range(50)
    ]
    report = evaluate(two_unmatched, truth)
    assert report.accuracy == pytest.approx(0.96)
    assert report.false_negative_rate == pytest.approx(0.04)
    assert report.false_positive_rate == 0.0

    one_wrong = [
        MatchResult(f"c{i}", "s49" if i == 0 else f"s{i}", 0.9, "") for i in range(50)
    ]
    report = evaluate(one_wrong, truth)
    assert report.false_positive_rate == pytest.approx(0.02)
    assert report.accuracy + report.false_negative_rate + report.false_positive_rate == pytest.approx(1.0)


# --- clopper_pearson ---------------------------------------------------------


def beta_quantile_oracle(successes, trials, confidence):
    from scipy import stats

    alpha = 1 - confidence
    lower = 0.0 if successes == 0 else stats.beta.ppf(alpha / 2, successes, trials - successes + 1)
    upper = 1.0 if successes == trials else stats.beta.ppf(
        1 - alpha / 2, successes + 1, trials - successes
    )
    return float(lower), float(upper)


def test_clopper_pearson_reference_intervals():
    lower, upper = clopper_pearson(2, 50, 0.95)
    assert lower == pytest.approx(0.0049, abs=5e-4)
    assert upper == pytest.approx(0.1371, abs=5e-4)

    lower3, upper3 = clopper_pearson(3, 50, 0.95)
    assert lower3 == pytest.approx(0.0125, abs=5e-4)
    assert upper3 == pytest.approx(0.1654, abs=5e-4)

    zero_lo, zero_hi = clopper_pearson(0, 2450, 0.95)
    assert zero_lo == 0.0
    assert zero_hi == pytest.approx(0.0015, abs=2e-4)


@pytest.mark.parametrize(
    "successes,trials", [(0, 10), (1, 10), (2, 50), (3, 50), (0, 2450), (23, 23), (7, 23)]
)
def test_clopper_pearson_matches_beta_quantile_oracle(successes, trials):
    ours = clopper_pearson(successes, trials, 0.95)
    oracle = beta_quantile_oracle(successes, trials, 0.95)
    assert ours[0] == pytest.approx(oracle[0], abs=5e-4)
    assert ours[1] == pytest.approx(oracle[1], abs=5e-4)


@settings(max_examples=60)
@given(st.integers(0, 80), st.integers(0, 80), st.sampled_from([0.8, 0.9, 0.95, 0.99]))
def test_clopper_pearson_contains_point_estimate(a, b, confidence):
    successes, trials = min(a, b), max(a, b)
    if trials == 0:
        return
    lower, upper = clopper_pearson(successes, trials, confidence)
    estimate = successes / trials
    assert lower <= estimate <= upper
    assert 0.0 <= lower <= upper <= 1.0


# --- serialization -----------------------------------------------------------


def test_observation_record_roundtrip():
    obs = PacketObservation(1.25, Direction.FROM_SERVER, 42, 99, 1460, frozenset({"SYN"}))
    assert observation_from_record(observation_to_record(obs)) == obs
