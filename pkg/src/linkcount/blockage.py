"""RSS-to-blockage detection by window-relative thresholding.

A blockage is declared whenever a reading deviates from the window mean by
at least the threshold tau. The default ``attenuation`` mode tests
``r <= mean - tau``: a body on the line of sight shows up as a down pulse
in dBm. ``elevation`` tests the opposite direction (``r >= mean + tau``)
and ``deviation`` tests the magnitude, covering both.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .core import (
    DETECTOR_MODES,
    BlockageSequence,
    FileFormatError,
    RssTrace,
    SystemConfig,
    atomic_write_text,
)


@dataclass(frozen=True)
class DetectorParams:
    """Threshold, direction mode, and the slot grid to emit bits on."""

    tau: float
    mode: str = "attenuation"
    slot_duration: float = 1.0
    w: int = 300

    def __post_init__(self):
        if self.tau < 0:
            raise ValueError("tau must be non-negative")
        if self.mode not in DETECTOR_MODES:
            raise ValueError(f"mode must be one of {DETECTOR_MODES}")
        if not self.slot_duration > 0:
            raise ValueError("slot_duration must be positive")
        if self.w < 1:
            raise ValueError("w must be at least 1")

    @property
    def window_length(self) -> float:
        return self.w * self.slot_duration

    @classmethod
    def from_config(cls, config: SystemConfig) -> "DetectorParams":
        return cls(
            tau=config.tau,
            mode=config.detector_mode,
            slot_duration=config.slot_duration,
            w=config.w,
        )


def mean_rss(trace: RssTrace) -> float:
    """Arithmetic mean of all readings in the window, in dBm."""
    if len(trace) == 0:
        raise ValueError("cannot take the mean of an empty trace")
    return float(trace.rss.mean())


def detect_blockages(trace: RssTrace, params: DetectorParams) -> BlockageSequence:
    """Threshold a trace against its own mean and slot the hits.

    Bit ``i`` is set iff some reading in slot ``i`` satisfies the mode
    condition relative to the whole-window mean. The mean is always taken
    over the window being classified, never a running history, so the
    detector is invariant to a constant dBm shift of the trace.
    """
    if len(trace) == 0:
        raise ValueError("cannot detect blockages on an empty trace")
    if not math.isclose(trace.window_length, params.window_length, abs_tol=1e-9):
        raise ValueError(
            f"trace covers {trace.window_length} s but the detector expects "
            f"{params.w} slots of {params.slot_duration} s"
        )
    center = mean_rss(trace)
    if params.mode == "attenuation":
        hits = trace.rss <= center - params.tau
    elif params.mode == "elevation":
        hits = trace.rss >= center + params.tau
    else:
        hits = np.abs(trace.rss - center) >= params.tau
    slots = (trace.times // params.slot_duration).astype(np.intp)
    np.minimum(slots, params.w - 1, out=slots)  # guard float edge at the horizon
    bits = np.zeros(params.w, dtype=np.uint8)
    bits[slots[hits]] = 1
    return BlockageSequence(bits, params.slot_duration)


# ---------------------------------------------------------------------------
# RSS trace file format
# ---------------------------------------------------------------------------

def save_trace(path: str | os.PathLike, trace: RssTrace) -> None:
    """Trace file: ``# window_s=<float>`` header, then ``t_seconds,rss_dbm`` rows."""
    lines = [f"# window_s={trace.window_length!r}"]
    lines.extend(f"{t!r},{r!r}" for t, r in zip(trace.times, trace.rss))
    atomic_write_text(path, "\n".join(lines) + "\n")


def load_trace(path: str | os.PathLike) -> RssTrace:
    try:
        with open(path) as handle:
            lines = handle.read().splitlines()
    except OSError as exc:
        raise FileFormatError(f"cannot read trace file {path}: {exc}") from exc
    if not lines or not lines[0].startswith("# window_s="):
        raise FileFormatError(f"{path}: missing '# window_s=' header")
    try:
        window_length = float(lines[0].split("=", 1)[1])
    except ValueError as exc:
        raise FileFormatError(f"{path}: bad window header {lines[0]!r}") from exc
    times, rss = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            t_text, r_text = line.split(",", 1)
            times.append(float(t_text))
            rss.append(float(r_text))
        except ValueError as exc:
            raise FileFormatError(f"{path}:{lineno}: bad reading {line!r}") from exc
    try:
        return RssTrace(np.array(times), np.array(rss), window_length)
    except ValueError as exc:
        raise FileFormatError(f"{path}: {exc}") from exc
