"""Stochastic engine tests: dead-time filtering, determinism, and agreement
with the analytic detector response."""

import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from threepath import sim
from threepath.model import (
    ALL_COMBINATIONS,
    TRIPLE_ABC,
    DetectorModel,
    InterferometerConfig,
    PathSet,
    PhasePoint,
    SumRuleInputs,
    detector_forward,
    epsilon,
    incident_rate,
)
from threepath.sim import (
    EventBudgetError,
    SimulationRun,
    SourceStatistics,
    derive_seed,
    inject_violation,
    simulate_combination,
    simulate_event_times,
    simulate_stream,
)


class TestDeadTimeFilter:
    def test_crafted_cases(self):
        tau = 1.0
        cases = [
            # (arrivals, expected survivors)
            ([0.0, 0.5, 1.2], [0.0, 1.2]),          # second hides, third clears
            ([0.0, 0.5, 0.8], [0.0]),               # chain of shadowed arrivals
            ([0.0, 1.0, 1.5], [0.0, 1.0]),          # boundary: exactly tau passes
            ([0.0, 0.6, 1.7, 2.2], [0.0, 1.7]),
            ([], []),
        ]
        for arrivals, expected in cases:
            got = sim._filter_dead_time(np.array(arrivals, dtype=float), tau)
            assert got.tolist() == expected, arrivals

    def test_carry_in_blocks_start_of_window(self):
        times = np.array([0.1, 0.4, 1.3])
        got = sim._filter_dead_time(times, 1.0, last_detection=0.0)
        assert got.tolist() == [1.3]

    def test_zero_dead_time_keeps_everything(self):
        times = np.array([0.0, 0.0, 0.1])
        assert sim._filter_dead_time(times, 0.0).tolist() == [0.0, 0.0, 0.1]

    @given(
        gaps=st.lists(st.floats(1e-4, 3.0), max_size=120),
        tau=st.floats(0.0, 2.5),
        carry=st.one_of(st.none(), st.floats(-1.0, 1.0)),
    )
    def test_matches_scalar_reference(self, gaps, tau, carry):
        times = np.cumsum(np.asarray(gaps, dtype=float))
        last = -math.inf if carry is None else carry
        fast = sim._filter_dead_time(times.copy(), tau, last)
        slow = sim._filter_dead_time_scalar(times, tau, last)
        assert np.array_equal(fast, slow)

    def test_regular_train_shorter_than_dead_time(self):
        # worst case for the pass-based algorithm: every gap is shadowed
        times = np.arange(5000) * 0.3
        fast = sim._filter_dead_time(times.copy(), 1.0)
        slow = sim._filter_dead_time_scalar(times, 1.0)
        assert np.array_equal(fast, slow)


class TestDeterminism:
    def test_equal_seeds_equal_streams(self, apd):
        run = SimulationRun(5e4, apd, 1.0, seed=424242)
        a = simulate_event_times(run)
        b = simulate_event_times(run)
        assert np.array_equal(a, b)
        assert simulate_stream(run) == simulate_stream(run)

    def test_different_seeds_differ(self, apd):
        a = simulate_event_times(SimulationRun(5e4, apd, 1.0, seed=1))
        b = simulate_event_times(SimulationRun(5e4, apd, 1.0, seed=2))
        assert a.size != b.size or not np.array_equal(a, b)

    def test_windowing_does_not_change_the_stream(self, apd, monkeypatch):
        run = SimulationRun(2e5, apd, 1.0, seed=77)
        whole = simulate_event_times(run)
        monkeypatch.setattr(sim, "_WINDOW_EVENTS", 10_000)
        chunked = simulate_event_times(run)
        assert np.array_equal(whole, chunked)

    def test_derive_seed_is_stable_and_keyed(self):
        assert derive_seed(5, 1, 2) == derive_seed(5, 1, 2)
        assert derive_seed(5, 1, 2) != derive_seed(5, 2, 1)
        assert derive_seed(5, 1) != derive_seed(6, 1)
        with pytest.raises(ValueError):
            derive_seed(5, -1)
        with pytest.raises(ValueError):
            derive_seed(-5, 1)


class TestStreamStatistics:
    def test_unfiltered_poisson_mean(self):
        # tau=0, R0=0: plain Poisson counting
        free = DetectorModel()
        counts = [
            simulate_stream(SimulationRun(1e4, free, 10.0, derive_seed(3, k))).detected_count
            for k in range(10)
        ]
        mean = np.mean(counts)
        sigma_of_mean = math.sqrt(1e5 / len(counts))
        assert abs(mean - 1e5) < 4 * sigma_of_mean

    def test_detected_rate_matches_transfer_function(self, apd):
        rates = [
            simulate_stream(SimulationRun(1e6, apd, 0.5, derive_seed(8, k))).detected_rate
            for k in range(16)
        ]
        mean = np.mean(rates)
        sem = np.std(rates, ddof=1) / math.sqrt(len(rates))
        assert abs(mean - detector_forward(1e6, apd)) < 3 * sem

    def test_no_two_detections_closer_than_dead_time(self, apd):
        times = simulate_event_times(SimulationRun(2e6, apd, 0.2, seed=99))
        assert times.size > 1
        assert float(np.diff(times).min()) >= apd.dead_time

    def test_count_bounded_by_dead_time(self):
        model = DetectorModel(dead_time=1e-6)
        record = simulate_stream(SimulationRun(1e8, model, 0.01, seed=4, ),
                                 event_cap=2e6)
        assert record.detected_count <= math.ceil(0.01 / 1e-6) + 1

    def test_merge_adds_in_distribution(self):
        # photon stream r1 + dark stream r2 at tau=0 vs single stream r1+r2
        r1, r2, duration, n = 3e4, 1.5e4, 1.0, 24
        split = DetectorModel(dead_time=0.0, dark_rate=r2)
        joint = DetectorModel(dead_time=0.0, dark_rate=0.0)
        a = [simulate_stream(SimulationRun(r1, split, duration, derive_seed(10, k))).detected_count
             for k in range(n)]
        b = [simulate_stream(SimulationRun(r1 + r2, joint, duration, derive_seed(11, k))).detected_count
             for k in range(n)]
        pooled_sigma = math.sqrt((np.var(a, ddof=1) + np.var(b, ddof=1)) / n)
        assert abs(np.mean(a) - np.mean(b)) < 4 * pooled_sigma

    def test_event_budget_guard(self, apd):
        with pytest.raises(EventBudgetError):
            simulate_stream(SimulationRun(1e6, apd, 10.0, seed=1), event_cap=1e5)

    def test_dump_event_times(self, apd):
        run = SimulationRun(1e3, apd, 0.1, seed=21)
        buffer = io.StringIO()
        n = sim.dump_event_times(run, buffer)
        lines = buffer.getvalue().strip().splitlines()
        assert len(lines) == n == simulate_stream(run).detected_count
        parsed = np.array([float(line) for line in lines])
        assert np.array_equal(parsed, simulate_event_times(run))


class TestRegularEmitter:
    def test_full_train_counts_every_pulse(self):
        # period longer than the dead time: no loss at all
        period = 100e-9
        model = DetectorModel(dead_time=47e-9, dark_rate=0.0)
        for k in range(5):
            run = SimulationRun(1.0 / period, model, 0.001, derive_seed(12, k),
                                statistics=SourceStatistics.regular_emitter(period))
            count = simulate_stream(run).detected_count
            assert abs(count - math.floor(0.001 / period)) <= 1

    def test_thinned_train_is_linear_through_dead_time(self):
        # mean detected rate equals the incident rate despite tau > 0
        model = DetectorModel(dead_time=47e-9, dark_rate=0.0)
        stats = SourceStatistics.regular_emitter(150e-9)
        rate = 3e5
        counts = [
            simulate_stream(SimulationRun(rate, model, 1.0, derive_seed(13, k),
                                          statistics=stats)).detected_count
            for k in range(16)
        ]
        mean = np.mean(counts)
        sem = np.std(counts, ddof=1) / math.sqrt(len(counts))
        assert abs(mean - rate) < 4 * sem
        # the Poissonian source at the same rate does lose counts
        assert detector_forward(rate, model) < rate - 10 * sem

    def test_rate_above_pulse_rate_rejected(self):
        model = DetectorModel()
        with pytest.raises(ValueError):
            SimulationRun(2e7, model, 1.0, seed=1,
                          statistics=SourceStatistics.regular_emitter(100e-9))

    def test_statistics_validation(self):
        with pytest.raises(ValueError):
            SourceStatistics(mode="regular_emitter")
        with pytest.raises(ValueError):
            SourceStatistics(mode="poissonian", period=1e-6)
        with pytest.raises(ValueError):
            SourceStatistics(mode="chaotic")


class TestSimulateCombination:
    def test_background_combination_counts_dark_only(self, apd, fig_config):
        records = [
            simulate_combination(fig_config, PathSet.NONE, apd, 1.0, derive_seed(14, k))
            for k in range(16)
        ]
        mean = np.mean([r.detected_rate for r in records])
        expected = apd.dark_rate / (1.0 + apd.dark_rate * apd.dead_time)
        assert abs(mean - expected) < 4 * math.sqrt(expected / 16)
        assert records[0].path_set == PathSet.NONE

    def test_single_path_linear_detector(self, fig_config):
        model = DetectorModel(dead_time=0.0, dark_rate=100.0)
        records = [
            simulate_combination(fig_config, PathSet.A, model, 1.0, derive_seed(15, k))
            for k in range(16)
        ]
        mean = np.mean([r.detected_rate for r in records])
        expected = fig_config.rate_a + 100.0
        assert abs(mean - expected) < 4 * math.sqrt(expected / 16)

    def test_three_path_against_transfer_function(self, apd, fig_config):
        rates = [
            simulate_combination(fig_config, TRIPLE_ABC, apd, 1.0, derive_seed(16, k)).detected_rate
            for k in range(16)
        ]
        expected = detector_forward(incident_rate(fig_config, TRIPLE_ABC), apd)
        sem = np.std(rates, ddof=1) / math.sqrt(len(rates))
        assert abs(np.mean(rates) - expected) < 3 * sem


class TestInjectedViolation:
    def test_zero_strength_is_identity(self, fig_config):
        fn = inject_violation(fig_config, 0.0)
        for paths in ALL_COMBINATIONS:
            assert fn(paths) == incident_rate(fig_config, paths)

    def test_epsilon_equals_the_injected_term(self, fig_config):
        strength = 0.01
        fn = inject_violation(fig_config, strength)
        inputs = SumRuleInputs.from_mapping({p: fn(p) for p in ALL_COMBINATIONS})
        expected = strength * (2080.0 * 5760.0 * 1990.0) ** (1.0 / 3.0)
        assert epsilon(inputs) == pytest.approx(expected, rel=1e-9)

    @given(phi_a=st.floats(0, 2 * math.pi), phi_c=st.floats(0, 2 * math.pi),
           strength=st.floats(-0.05, 0.05))
    @settings(max_examples=40)
    def test_epsilon_tracks_phases(self, phi_a, phi_c, strength):
        config = InterferometerConfig(1000.0, 2000.0, 1500.0,
                                      phase=PhasePoint(phi_a, phi_c))
        fn = inject_violation(config, strength)
        inputs = SumRuleInputs.from_mapping({p: max(fn(p), 0.0) for p in ALL_COMBINATIONS})
        expected = (strength * (1000.0 * 2000.0 * 1500.0) ** (1.0 / 3.0)
                    * math.cos(phi_a) * math.cos(phi_c))
        assert epsilon(inputs) == pytest.approx(expected, rel=1e-6, abs=1e-6)

    def test_negative_rate_rejected(self, fig_config):
        with pytest.raises(ValueError):
            inject_violation(fig_config, -1e9)
