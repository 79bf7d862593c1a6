"""Deterministic desk-scale stand-in for a physical testbed.

Walkers follow a random-waypoint model inside a rectangular room; the RF
side turns proximity to the link's line-of-sight segment into a down pulse
on top of a gaussian multipath floor. Every agent draws from its own rng
stream keyed by ``rng_seed + agent_index``, so simulating the same agents
separately or jointly yields identical trajectories and crossing times.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from itertools import chain

import numpy as np

from .core import (
    BlockageSequence,
    ConfigError,
    FileFormatError,
    RssTrace,
    atomic_write_text,
    timestamps_to_sequence,
)

_WALK_STREAM = 1
_NOISE_STREAM = 2

Point = tuple[float, float]


@dataclass(frozen=True)
class SimScenario:
    """Geometry, agents, and RF-noise parameters for one synthetic window.

    The line-of-sight segment may lie outside the room (transceivers can
    sit behind walls). Defaults are desk-scale inventions chosen so the
    default detection threshold separates pulses from multipath noise.
    """

    # Off-center link (like a wall-mounted transceiver pair): random-waypoint
    # density peaks mid-room, and a mid-room link would be occupied so often
    # at high counts that the window mean drifts down to the pulse level.
    room: tuple[float, float, float, float] = (0.0, 0.0, 7.0, 7.0)
    los: tuple[Point, Point] = ((0.0, 1.0), (7.0, 1.0))
    agents: int = 1
    speed_range: tuple[float, float] = (1.0, 2.0)
    duration: float = 300.0
    baseline_dbm: float = -40.0
    multipath_sigma: float = 1.5
    pulse_depth: float = 8.0
    pulse_halfwidth: float = 0.3
    sample_rate: float = 20.0
    rng_seed: int = 0

    def __post_init__(self):
        xmin, ymin, xmax, ymax = self.room
        if xmax < xmin or ymax < ymin:
            raise ValueError("room corners must satisfy xmin <= xmax, ymin <= ymax")
        (ax, ay), (bx, by) = self.los
        if ax == bx and ay == by:
            raise ValueError("los endpoints must be distinct")
        if self.agents < 0:
            raise ValueError("agents must be non-negative")
        lo, hi = self.speed_range
        if not 0 < lo <= hi:
            raise ValueError("speed_range must satisfy 0 < min <= max")
        if not self.duration > 0:
            raise ValueError("duration must be positive")
        if self.multipath_sigma < 0:
            raise ValueError("multipath_sigma must be non-negative")
        if self.pulse_depth < 0:
            raise ValueError("pulse_depth must be non-negative")
        # pulse_depth == 0 (no pulses at all) is allowed for noise-floor studies
        if 0 < self.pulse_depth <= self.multipath_sigma:
            raise ValueError(
                "pulse_depth must exceed multipath_sigma for pulses to be detectable"
            )
        if not self.pulse_halfwidth > 0:
            raise ValueError("pulse_halfwidth must be positive")
        if not self.sample_rate > 0:
            raise ValueError("sample_rate must be positive")

    @property
    def n_samples(self) -> int:
        return round(self.duration * self.sample_rate)

    def sample_times(self) -> np.ndarray:
        return np.arange(self.n_samples) / self.sample_rate


def _walk_one(
    scenario: SimScenario, rng: np.random.Generator, times: np.ndarray
) -> np.ndarray:
    xmin, ymin, xmax, ymax = scenario.room
    low = np.array([xmin, ymin])
    high = np.array([xmax, ymax])
    lo_speed, hi_speed = scenario.speed_range
    rate = scenario.sample_rate
    n = times.size

    out = np.empty((n, 2))
    pos = rng.uniform(low, high)
    t = 0.0
    k = 0
    while k < n:
        waypoint = rng.uniform(low, high)
        delta = waypoint - pos
        dist = math.hypot(delta[0], delta[1])
        if dist < 1e-12:
            continue  # waypoint coincided with the current position; redraw
        speed = rng.uniform(lo_speed, hi_speed)
        t_end = t + dist / speed
        k_end = min(n, math.ceil(t_end * rate))
        if k_end > k:
            out[k:k_end] = pos + (times[k:k_end] - t)[:, None] * (delta / dist * speed)
            k = k_end
        pos = waypoint
        t = t_end
    np.clip(out, low, high, out=out)  # shave float overshoot at segment ends
    return out


def simulate_walk(scenario: SimScenario) -> tuple[np.ndarray, np.ndarray]:
    """Random-waypoint trajectories sampled on the RSS clock.

    Returns (times, paths) with times of shape (n,) and paths of shape
    (agents, n, 2). Agent ``a`` depends only on ``rng_seed + a``, never on
    how many other agents share the scenario.
    """
    xmin, ymin, xmax, ymax = scenario.room
    if xmax - xmin == 0 or ymax - ymin == 0:
        raise ValueError("room has zero area")
    times = scenario.sample_times()
    paths = np.empty((scenario.agents, times.size, 2))
    for agent in range(scenario.agents):
        rng = np.random.default_rng([scenario.rng_seed + agent, _WALK_STREAM])
        paths[agent] = _walk_one(scenario, rng, times)
    return times, paths


def crossings(
    times: np.ndarray, points: np.ndarray, los: tuple[Point, Point]
) -> list[float]:
    """Timestamps at which a sampled trajectory crosses the LoS segment.

    A crossing requires consecutive samples strictly on opposite sides of
    the segment's supporting line and the connecting step to intersect the
    segment itself (crossing the line beyond an endpoint does not count).
    Timestamps are linearly interpolated within the step.
    """
    a = np.asarray(los[0], dtype=np.float64)
    b = np.asarray(los[1], dtype=np.float64)
    d = b - a
    rel = points - a
    side = rel[:, 0] * d[1] - rel[:, 1] * d[0]
    s0, s1 = side[:-1], side[1:]
    candidates = np.nonzero(((s0 > 0) & (s1 < 0)) | ((s0 < 0) & (s1 > 0)))[0]
    if candidates.size == 0:
        return []
    u = s0[candidates] / (s0[candidates] - s1[candidates])
    hit = points[candidates] + u[:, None] * (points[candidates + 1] - points[candidates])
    along = (hit - a) @ d / (d @ d)
    on_segment = (along >= 0.0) & (along <= 1.0)
    t_hit = times[candidates] + u * (times[candidates + 1] - times[candidates])
    return [float(t) for t in t_hit[on_segment]]


def _distance_to_segment(points: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = b - a
    length_sq = float(d @ d)
    along = np.clip((points - a) @ d / length_sq, 0.0, 1.0)
    closest = a + along[..., None] * d
    return np.linalg.norm(points - closest, axis=-1)


def synthesize_rss(paths: np.ndarray, scenario: SimScenario) -> RssTrace:
    """Gaussian multipath floor plus a down pulse while any agent is on the LoS.

    A pulse is active at a sample whenever some agent is within
    ``pulse_halfwidth`` meters of the LoS segment, so pulses have realistic
    width instead of being instantaneous. The noise stream depends only on
    the scenario seed, not on the agents.
    """
    times = scenario.sample_times()
    rng = np.random.default_rng([scenario.rng_seed, _NOISE_STREAM])
    rss = scenario.baseline_dbm + rng.normal(0.0, scenario.multipath_sigma, times.size)
    if paths.shape[0] and scenario.pulse_depth > 0:
        a = np.asarray(scenario.los[0], dtype=np.float64)
        b = np.asarray(scenario.los[1], dtype=np.float64)
        distances = _distance_to_segment(paths, a, b)  # (agents, n)
        blocked = (distances <= scenario.pulse_halfwidth).any(axis=0)
        rss = rss - scenario.pulse_depth * blocked
    return RssTrace(times, rss, scenario.duration)


@dataclass(frozen=True, eq=False)
class GroundTruth:
    """One simulated window: the RSS trace with its label and true bits."""

    trace: RssTrace
    count: int
    sequence: BlockageSequence
    crossing_times: tuple[tuple[float, ...], ...]  # per agent

    @property
    def all_crossings(self) -> list[float]:
        return sorted(chain.from_iterable(self.crossing_times))


def generate_ground_truth(scenario: SimScenario, slot_duration: float = 1.0) -> GroundTruth:
    """Simulate one window end to end: walk, cross, and synthesize RSS."""
    w_float = scenario.duration / slot_duration
    if not math.isclose(w_float, round(w_float), abs_tol=1e-9):
        raise ValueError("duration must be an integer number of slots")
    times, paths = simulate_walk(scenario)
    per_agent = tuple(
        tuple(crossings(times, paths[agent], scenario.los))
        for agent in range(scenario.agents)
    )
    sequence = timestamps_to_sequence(
        sorted(chain.from_iterable(per_agent)), round(w_float), slot_duration
    )
    trace = synthesize_rss(paths, scenario)
    return GroundTruth(trace, scenario.agents, sequence, per_agent)


# ---------------------------------------------------------------------------
# Scenario file format (flat key=value)
# ---------------------------------------------------------------------------

_SCENARIO_KEYS = (
    "room", "los", "agents", "speed_min", "speed_max", "duration",
    "baseline_dbm", "multipath_sigma", "pulse_depth", "pulse_halfwidth",
    "sample_rate", "rng_seed",
)


def save_scenario(path: str | os.PathLike, scenario: SimScenario) -> None:
    (ax, ay), (bx, by) = scenario.los
    lines = [
        "room=" + ",".join(repr(v) for v in scenario.room),
        f"los={ax!r},{ay!r},{bx!r},{by!r}",
        f"agents={scenario.agents}",
        f"speed_min={scenario.speed_range[0]!r}",
        f"speed_max={scenario.speed_range[1]!r}",
        f"duration={scenario.duration!r}",
        f"baseline_dbm={scenario.baseline_dbm!r}",
        f"multipath_sigma={scenario.multipath_sigma!r}",
        f"pulse_depth={scenario.pulse_depth!r}",
        f"pulse_halfwidth={scenario.pulse_halfwidth!r}",
        f"sample_rate={scenario.sample_rate!r}",
        f"rng_seed={scenario.rng_seed}",
    ]
    atomic_write_text(path, "\n".join(lines) + "\n")


def load_scenario(path: str | os.PathLike) -> SimScenario:
    try:
        with open(path) as handle:
            lines = handle.read().splitlines()
    except OSError as exc:
        raise FileFormatError(f"cannot read scenario file {path}: {exc}") from exc
    values: dict[str, str] = {}
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise FileFormatError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _SCENARIO_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown scenario key {key!r}")
        values[key] = value.strip()

    defaults = SimScenario()
    try:
        kwargs: dict = {}
        if "room" in values:
            kwargs["room"] = tuple(float(v) for v in values["room"].split(","))
        if "los" in values:
            x1, y1, x2, y2 = (float(v) for v in values["los"].split(","))
            kwargs["los"] = ((x1, y1), (x2, y2))
        if "speed_min" in values or "speed_max" in values:
            kwargs["speed_range"] = (
                float(values.get("speed_min", defaults.speed_range[0])),
                float(values.get("speed_max", defaults.speed_range[1])),
            )
        for key, cast in (
            ("agents", int), ("duration", float), ("baseline_dbm", float),
            ("multipath_sigma", float), ("pulse_depth", float),
            ("pulse_halfwidth", float), ("sample_rate", float), ("rng_seed", int),
        ):
            if key in values:
                kwargs[key] = cast(values[key])
        return SimScenario(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: invalid scenario value ({exc})") from exc
