"""Stochastic photon-counting engine.

Generates timestamped arrival streams (Poissonian source or a thinned
regular pulse train, merged with an independent Poisson dark-event stream)
and applies nonparalyzable dead-time filtering to produce detected counts.
This is the Monte Carlo counterpart of the analytic transfer function in
:mod:`threepath.model` and serves as its independent cross-check.

Determinism contract: identical simulation parameters (seed included)
produce bit-identical event streams.  Streams are generated with
numpy's PCG64 generator; child seeds derive from ``SeedSequence(base,
spawn_key=...)`` so batch runs can be reproduced serially or in parallel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .model import DetectorModel, InterferometerConfig, PathSet, TRIPLE_ABC, incident_rate

#: Hard ceiling on the expected number of generated events per run.
DEFAULT_EVENT_CAP = 1_000_000_000

# events per streaming window; runs larger than this never hold the full
# stream in memory
_WINDOW_EVENTS = 4_000_000
# exponential draws per refill of a walker
_CHUNK = 1 << 19
# vectorized dead-time passes before falling back to the scalar filter
_MAX_FILTER_PASSES = 512


class EventBudgetError(RuntimeError):
    """Expected event count exceeds the configured cap."""


@dataclass(frozen=True)
class SourceStatistics:
    """Arrival statistics of the light source.

    ``poissonian`` models any stationary attenuated-laser-like source.
    ``regular_emitter`` models a pulsed single emitter: excitations at fixed
    spacing ``period``, each delivering a photon with probability
    eta * rate * period (so the requested mean rate is realized exactly).
    """

    mode: str = "poissonian"
    period: float | None = None   # seconds, regular_emitter only

    def __post_init__(self) -> None:
        if self.mode not in ("poissonian", "regular_emitter"):
            raise ValueError(f"unknown source statistics mode {self.mode!r}")
        if self.mode == "regular_emitter":
            if self.period is None or not math.isfinite(self.period) or self.period <= 0.0:
                raise ValueError(f"regular_emitter needs a period > 0, got {self.period!r}")
        elif self.period is not None:
            raise ValueError("period is only meaningful for regular_emitter")

    @classmethod
    def poissonian(cls) -> "SourceStatistics":
        return cls()

    @classmethod
    def regular_emitter(cls, period: float) -> "SourceStatistics":
        return cls(mode="regular_emitter", period=float(period))


POISSONIAN = SourceStatistics()


@dataclass(frozen=True)
class SimulationRun:
    """Everything needed to reproduce one counting window exactly."""

    incident_rate: float          # photons/s
    detector: DetectorModel
    duration: float               # seconds
    seed: int
    statistics: SourceStatistics = POISSONIAN

    def __post_init__(self) -> None:
        if not math.isfinite(self.incident_rate) or self.incident_rate < 0.0:
            raise ValueError(f"incident_rate must be finite and >= 0, got {self.incident_rate!r}")
        if not math.isfinite(self.duration) or self.duration <= 0.0:
            raise ValueError(f"duration must be finite and > 0, got {self.duration!r}")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")
        if self.statistics.mode == "regular_emitter":
            p = self.detector.efficiency * self.incident_rate * self.statistics.period
            if p > 1.0 + 1e-12:
                raise ValueError(
                    f"incident rate {self.incident_rate!r} exceeds the pulse rate "
                    f"1/period = {1.0 / self.statistics.period!r}"
                )

    def expected_events(self) -> float:
        """Expected number of generated (pre-dead-time) events."""
        if self.statistics.mode == "regular_emitter":
            source = self.duration / self.statistics.period
        else:
            source = self.detector.efficiency * self.incident_rate * self.duration
        return source + self.detector.dark_rate * self.duration


@dataclass(frozen=True)
class CountRecord:
    """Detected counts for one integration window."""

    path_set: PathSet | None
    detected_count: int
    duration: float
    seed: int

    @property
    def detected_rate(self) -> float:
        """counts/s"""
        return self.detected_count / self.duration


def derive_seed(base_seed: int, *key: int) -> int:
    """Deterministic 64-bit child seed for batch run ``key`` under ``base_seed``.

    Mixing function: ``SeedSequence(base_seed, spawn_key=key)``; the same key
    always yields the same child, independent of evaluation order.
    """
    if not 0 <= base_seed < 2**64:
        raise ValueError(f"base_seed must be a 64-bit unsigned integer, got {base_seed!r}")
    parts = tuple(int(k) for k in key)
    if any(k < 0 for k in parts):
        raise ValueError(f"seed key indices must be >= 0, got {parts!r}")
    ss = np.random.SeedSequence(base_seed, spawn_key=parts)
    return int(ss.generate_state(1, np.uint64)[0])


class _PoissonWalker:
    """Lazily yields homogeneous-Poisson arrival times on [0, duration)."""

    def __init__(self, rng: np.random.Generator, rate: float, duration: float):
        self._rng = rng
        self._scale = 1.0 / rate if rate > 0.0 else math.inf
        self._duration = duration
        self._t = 0.0
        self._pending = np.empty(0)
        self._exhausted = rate <= 0.0
        # first draw sized to cover the window in one go for typical runs
        expected = rate * duration
        self._chunk = int(min(_CHUNK, max(64, expected + 6.0 * math.sqrt(expected + 1.0))))

    def _refill(self) -> None:
        gaps = self._rng.exponential(self._scale, self._chunk)
        self._chunk = min(_CHUNK, 2 * self._chunk)
        times = self._t + np.cumsum(gaps)
        self._t = float(times[-1])
        keep = times[times < self._duration]
        if keep.size < times.size:
            self._exhausted = True
        self._pending = np.concatenate((self._pending, keep)) if self._pending.size else keep

    def take_until(self, t_end: float) -> np.ndarray:
        while not self._exhausted and self._t < t_end:
            self._refill()
        cut = int(np.searchsorted(self._pending, t_end, side="left"))
        out = self._pending[:cut]
        self._pending = self._pending[cut:]
        return out


class _RegularWalker:
    """Thinned periodic pulse train on [0, duration).

    Pulse k arrives at offset + k*period with offset ~ U[0, period) (so the
    train is stationary); each pulse is kept with probability ``keep_prob``.
    """

    def __init__(self, rng: np.random.Generator, keep_prob: float, period: float, duration: float):
        self._rng = rng
        self._p = keep_prob
        self._period = period
        self._duration = duration
        self._offset = float(rng.uniform(0.0, period))
        self._next_k = 0

    def take_until(self, t_end: float) -> np.ndarray:
        horizon = min(t_end, self._duration)
        # pulses with offset + k*period < horizon
        n_total = max(0, math.ceil((horizon - self._offset) / self._period))
        n_new = n_total - self._next_k
        if n_new <= 0:
            return np.empty(0)
        times = self._offset + np.arange(self._next_k, n_total, dtype=np.float64) * self._period
        self._next_k = n_total
        if self._p >= 1.0:
            return times
        return times[self._rng.random(n_new) < self._p]


def _filter_dead_time_scalar(times: np.ndarray, dead_time: float,
                             last_detection: float = -math.inf) -> np.ndarray:
    """Reference nonparalyzable filter: plain sequential scan.  Exact, slow."""
    out = []
    last = last_detection
    for t in times:
        if t - last >= dead_time:
            out.append(t)
            last = t
    return np.asarray(out, dtype=np.float64)


def _filter_dead_time(times: np.ndarray, dead_time: float,
                      last_detection: float = -math.inf) -> np.ndarray:
    """Nonparalyzable dead-time filter on sorted arrival times.

    An arrival is detected iff it occurs at least ``dead_time`` after the
    previous detection.  Vectorized by iterated passes: in each pass, any
    arrival whose predecessor gap is >= dead_time is provably detected, so
    the arrival right after it inside the shadow is provably lost and can be
    removed; repeating until no short gap remains yields exactly the
    sequential result.  Pathologically long drop chains (possible only when
    many arrivals cluster inside one dead time) fall back to the scalar scan.
    """
    if times.size == 0 or dead_time <= 0.0:
        return times
    if last_detection > -math.inf:
        start = int(np.searchsorted(times, last_detection + dead_time, side="left"))
        times = times[start:]
    t = times
    for _ in range(_MAX_FILTER_PASSES):
        if t.size <= 1:
            return t
        shadowed = np.diff(t) < dead_time
        if not shadowed.any():
            return t
        lead = shadowed.copy()
        lead[1:] &= ~shadowed[:-1]
        t = np.delete(t, np.nonzero(lead)[0] + 1)
    return _filter_dead_time_scalar(t, dead_time)


def _detected_windows(run: SimulationRun, event_cap: float) -> Iterator[np.ndarray]:
    """Yield detected event times window by window, in time order."""
    expected = run.expected_events()
    if expected > event_cap:
        raise EventBudgetError(
            f"expected {expected:.3g} events exceeds the cap {event_cap:.3g}; "
            "reduce rate or duration, or raise event_cap"
        )
    ss = np.random.SeedSequence(run.seed)
    source_ss, dark_ss = ss.spawn(2)
    eta = run.detector.efficiency
    if run.statistics.mode == "regular_emitter":
        source = _RegularWalker(
            np.random.Generator(np.random.PCG64(source_ss)),
            keep_prob=eta * run.incident_rate * run.statistics.period,
            period=run.statistics.period,
            duration=run.duration,
        )
    else:
        source = _PoissonWalker(
            np.random.Generator(np.random.PCG64(source_ss)),
            rate=eta * run.incident_rate,
            duration=run.duration,
        )
    dark = _PoissonWalker(
        np.random.Generator(np.random.PCG64(dark_ss)),
        rate=run.detector.dark_rate,
        duration=run.duration,
    )
    n_windows = max(1, math.ceil(expected / _WINDOW_EVENTS))
    last_detection = -math.inf
    for w in range(n_windows):
        t_end = run.duration * (w + 1) / n_windows
        arrivals = np.concatenate((source.take_until(t_end), dark.take_until(t_end)))
        arrivals.sort()
        detected = _filter_dead_time(arrivals, run.detector.dead_time, last_detection)
        if detected.size:
            last_detection = float(detected[-1])
        yield detected


def simulate_stream(run: SimulationRun, *, event_cap: float = DEFAULT_EVENT_CAP,
                    path_set: PathSet | None = None) -> CountRecord:
    """Simulate one counting window and return the detected count."""
    count = 0
    for detected in _detected_windows(run, event_cap):
        count += detected.size
    return CountRecord(path_set=path_set, detected_count=count,
                       duration=run.duration, seed=run.seed)


def simulate_event_times(run: SimulationRun, *, event_cap: float = DEFAULT_EVENT_CAP) -> np.ndarray:
    """Detected event timestamps (seconds) for one run.

    Debug/inspection helper; materializes the whole detected stream, so keep
    the expected event count modest.
    """
    windows = list(_detected_windows(run, event_cap))
    if not windows:
        return np.empty(0)
    return np.concatenate(windows)


def dump_event_times(run: SimulationRun, stream, *, event_cap: float = DEFAULT_EVENT_CAP) -> int:
    """Write detected timestamps to a text stream, one float (seconds) per line."""
    n = 0
    for detected in _detected_windows(run, event_cap):
        for t in detected:
            stream.write(f"{float(t)!r}\n")
        n += detected.size
    return n


def simulate_combination(
    config: InterferometerConfig,
    paths: PathSet,
    detector: DetectorModel,
    duration: float,
    seed: int,
    statistics: SourceStatistics = POISSONIAN,
    *,
    event_cap: float = DEFAULT_EVENT_CAP,
) -> CountRecord:
    """Simulate one shutter combination at its incident interference rate."""
    run = SimulationRun(
        incident_rate=incident_rate(config, paths),
        detector=detector,
        duration=duration,
        seed=seed,
        statistics=statistics,
    )
    return simulate_stream(run, event_cap=event_cap, path_set=paths)


@dataclass(frozen=True)
class InjectedViolation:
    """Rate function equal to the configured interference rates except for a
    genuine three-path term added to the all-open combination only."""

    config: InterferometerConfig
    strength: float

    @property
    def three_path_term(self) -> float:
        """The added rate (counts/s) on the all-open combination."""
        cfg = self.config
        scale = (cfg.rate_a * cfg.rate_b * cfg.rate_c) ** (1.0 / 3.0)
        return (
            self.strength * scale
            * math.cos(cfg.phase.phi_a) * math.cos(cfg.phase.phi_c)
        )

    def __call__(self, paths: PathSet) -> float:
        rate = incident_rate(self.config, paths)
        if paths == TRIPLE_ABC:
            rate += self.three_path_term
        return rate


def inject_violation(config: InterferometerConfig, strength: float) -> InjectedViolation:
    """Build a rate function with a genuine second-order interference term.

    epsilon over the returned incident rates equals exactly
    strength * (Ra Rb Rc)^(1/3) * cos(phi_a) * cos(phi_c), so kappa becomes
    nonzero even through a perfectly linear detector.
    """
    fn = InjectedViolation(config=config, strength=float(strength))
    if incident_rate(config, TRIPLE_ABC) + fn.three_path_term < 0.0:
        raise ValueError(
            f"strength {strength!r} drives the all-open rate negative"
        )
    return fn
