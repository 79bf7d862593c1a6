"""Domain types, time discretization, and windowing shared by all modules.

Time is discretized into fixed slots. A counting window covers ``w`` slots;
a blockage sequence is one binary vector over those slots (1 = the link's
line of sight was blocked at least once inside the slot). Slot assignment
always uses half-open intervals ``[i*slot, (i+1)*slot)`` so a timestamp on
a boundary belongs to the later slot and is never counted twice.
"""

from __future__ import annotations

import math
import os
import tempfile
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

ORIGINS = ("collected", "superposed", "noised")
DETECTOR_MODES = ("attenuation", "deviation", "elevation")


class LinkCountError(Exception):
    """Base class for errors raised by this package."""

    exit_code = 1


class FileFormatError(LinkCountError):
    """A data file is missing, truncated, or malformed."""

    exit_code = 2


class ConfigError(LinkCountError):
    """A configuration value is out of range, mistyped, or unknown."""

    exit_code = 3


class ModelMismatchError(LinkCountError):
    """Model metadata does not match the data it is applied to."""

    exit_code = 4


def _readonly(array: np.ndarray, dtype) -> np.ndarray:
    out = np.ascontiguousarray(array, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class BlockageSequence:
    """Fixed-length binary stream, one bit per time slot."""

    bits: np.ndarray
    slot_duration: float = 1.0

    def __post_init__(self):
        bits = np.asarray(self.bits)
        if bits.ndim != 1 or bits.size == 0:
            raise ValueError("bits must be a non-empty 1-D vector")
        if not np.isin(bits, (0, 1)).all():
            raise ValueError("bits must contain only 0 and 1")
        if not self.slot_duration > 0:
            raise ValueError("slot_duration must be positive")
        object.__setattr__(self, "bits", _readonly(bits, np.uint8))

    @property
    def w(self) -> int:
        return self.bits.size

    @property
    def popcount(self) -> int:
        return int(self.bits.sum())

    def __eq__(self, other):
        if not isinstance(other, BlockageSequence):
            return NotImplemented
        return self.slot_duration == other.slot_duration and np.array_equal(
            self.bits, other.bits
        )

    def to_bitstring(self) -> str:
        return "".join("1" if b else "0" for b in self.bits)

    @classmethod
    def from_bitstring(cls, text: str, slot_duration: float = 1.0) -> "BlockageSequence":
        if not text or set(text) - {"0", "1"}:
            raise ValueError(f"invalid bitstring {text!r}")
        return cls(np.frombuffer(text.encode(), np.uint8) - ord("0"), slot_duration)


@dataclass(frozen=True, eq=False)
class RssTrace:
    """Timestamped received-signal-strength readings over one window.

    ``times`` are seconds since the window start, strictly increasing and
    contained in ``[0, window_length)``. ``rss`` values are in dBm. A trace
    may be empty on construction but not when fed to the detector.
    """

    times: np.ndarray
    rss: np.ndarray
    window_length: float

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.float64)
        rss = np.asarray(self.rss, dtype=np.float64)
        if times.shape != rss.shape or times.ndim != 1:
            raise ValueError("times and rss must be 1-D arrays of equal length")
        if not self.window_length > 0:
            raise ValueError("window_length must be positive")
        if times.size:
            if np.any(np.diff(times) <= 0):
                raise ValueError("reading timestamps must be strictly increasing")
            if times[0] < 0 or times[-1] >= self.window_length:
                raise ValueError("reading timestamps must lie in [0, window_length)")
        object.__setattr__(self, "times", _readonly(times, np.float64))
        object.__setattr__(self, "rss", _readonly(rss, np.float64))

    def __len__(self) -> int:
        return self.times.size

    def shifted(self, offset_dbm: float) -> "RssTrace":
        """Same trace with every reading shifted by a constant (in dBm)."""
        return RssTrace(self.times, self.rss + offset_dbm, self.window_length)


@dataclass(frozen=True, eq=False)
class LabeledSample:
    """One blockage sequence with its count-class label and provenance.

    ``combo`` records the original-sequence indices a superposed (or, for
    the single-person class, collected) sample was built from. ``source``
    and ``flipped_bit`` record how a noised sample was derived.
    """

    sequence: BlockageSequence
    label: int
    origin: str
    combo: tuple[int, ...] | None = None
    source: int | None = None
    flipped_bit: int | None = None

    def __post_init__(self):
        if self.origin not in ORIGINS:
            raise ValueError(f"unknown origin {self.origin!r}")
        if self.label < 0:
            raise ValueError("label must be a non-negative count class")
        if self.origin == "collected" and self.label > 1:
            raise ValueError("collected samples exist only for classes 0 and 1")
        if self.combo is not None:
            object.__setattr__(self, "combo", tuple(int(i) for i in self.combo))


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """Balanced collection of labeled blockage sequences for classes 0..N."""

    samples: tuple[LabeledSample, ...]
    classes: int  # maximum count class N; labels run 0..N
    w: int

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))
        for s in self.samples:
            if s.sequence.w != self.w:
                raise ValueError("all sequences in a dataset must share length w")
            if s.label > self.classes:
                raise ValueError(f"label {s.label} exceeds maximum class {self.classes}")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def slot_duration(self) -> float:
        return self.samples[0].sequence.slot_duration

    def class_samples(self, label: int) -> list[LabeledSample]:
        return [s for s in self.samples if s.label == label]

    def class_sizes(self) -> dict[int, int]:
        sizes = {n: 0 for n in range(self.classes + 1)}
        for s in self.samples:
            sizes[s.label] += 1
        return sizes

    def origin_counts(self, label: int) -> dict[str, int]:
        counts = {origin: 0 for origin in ORIGINS}
        for s in self.class_samples(label):
            counts[s.origin] += 1
        return counts


@dataclass(frozen=True)
class SystemConfig:
    """Operating parameters with their documented default values and ranges.

    ``w`` (slots per window) is derived: window_minutes * 60 / slot_duration,
    which must come out a positive integer.
    """

    tau: float = 5.0
    window_minutes: float = 5.0
    slot_duration: float = 1.0
    max_count: int = 10
    lstm_hidden: int = 100
    epochs: int = 120
    batch_size: int = 15
    learning_rate: float = 0.01
    momentum: float = 0.9
    rng_seed: int = 0
    detector_mode: str = "attenuation"

    def __post_init__(self):
        checks = [
            (0.0 <= self.tau <= 10.0, "tau must be in [0, 10] dBm"),
            (1.0 <= self.window_minutes <= 5.0, "window_minutes must be in [1, 5]"),
            (self.slot_duration > 0, "slot_duration must be positive"),
            (self.max_count >= 1, "max_count must be at least 1"),
            (10 <= self.lstm_hidden <= 100, "lstm_hidden must be in [10, 100]"),
            (10 <= self.epochs <= 150, "epochs must be in [10, 150]"),
            (1 <= self.batch_size <= 30, "batch_size must be in [1, 30]"),
            (self.learning_rate > 0, "learning_rate must be positive"),
            (0.0 <= self.momentum < 1.0, "momentum must be in [0, 1)"),
            (self.detector_mode in DETECTOR_MODES,
             f"detector_mode must be one of {DETECTOR_MODES}"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(message)
        w = self.window_minutes * 60.0 / self.slot_duration
        if not math.isclose(w, round(w), abs_tol=1e-9) or round(w) < 1:
            raise ConfigError(
                "window_minutes * 60 / slot_duration must be a positive integer"
            )

    @property
    def w(self) -> int:
        return round(self.window_minutes * 60.0 / self.slot_duration)

    @property
    def window_seconds(self) -> float:
        return self.window_minutes * 60.0

    @classmethod
    def testbed1(cls) -> "SystemConfig":
        """Clear-room preset: tau 5 dBm, 120 epochs, mini-batches of 15."""
        return cls()

    @classmethod
    def testbed2(cls) -> "SystemConfig":
        """Cluttered-hall preset: tau 5.5 dBm, 150 epochs, mini-batches of 3."""
        return cls(tau=5.5, epochs=150, batch_size=3)


# ---------------------------------------------------------------------------
# Windowing operations
# ---------------------------------------------------------------------------

def timestamps_to_sequence(
    crossing_times: Iterable[float], w: int, slot_duration: float = 1.0
) -> BlockageSequence:
    """Slot a list of LoS crossing timestamps into a binary sequence.

    Bit ``i`` is set iff at least one crossing falls in the half-open slot
    ``[i*slot_duration, (i+1)*slot_duration)``; repeated crossings inside a
    slot collapse into a single 1.
    """
    if w < 1:
        raise ValueError("w must be at least 1")
    if not slot_duration > 0:
        raise ValueError("slot_duration must be positive")
    horizon = w * slot_duration
    bits = np.zeros(w, dtype=np.uint8)
    for t in crossing_times:
        if not 0.0 <= t < horizon:
            raise ValueError(
                f"crossing time {t!r} outside the window [0, {horizon}) s"
            )
        # min() guards against float division landing exactly on w.
        bits[min(int(t // slot_duration), w - 1)] = 1
    return BlockageSequence(bits, slot_duration)


def split_into_windows(
    crossing_times: Sequence[float],
    total_duration: float,
    window_minutes: float,
    slot_duration: float = 1.0,
) -> list[BlockageSequence]:
    """Cut a long crossing log into fixed-length windows.

    Window ``k`` covers ``[k*L, (k+1)*L)`` seconds with crossing times
    re-based to the window start. A trailing partial window is discarded
    with a warning rather than padded: padding would fabricate
    zero-blockage time.
    """
    window_len = window_minutes * 60.0
    if total_duration < window_len:
        raise ValueError(
            f"total duration {total_duration} s is shorter than one "
            f"{window_len} s window"
        )
    w_float = window_len / slot_duration
    if not math.isclose(w_float, round(w_float), abs_tol=1e-9):
        raise ValueError("window length must be an integer number of slots")
    w = round(w_float)
    n_windows = int(total_duration // window_len)
    remainder = total_duration - n_windows * window_len
    if remainder > 1e-9:
        warnings.warn(
            f"discarding trailing {remainder:.3f} s (not a whole window)",
            stacklevel=2,
        )
    per_window: list[list[float]] = [[] for _ in range(n_windows)]
    for t in crossing_times:
        if not 0.0 <= t < total_duration:
            raise ValueError(f"crossing time {t!r} outside [0, {total_duration}) s")
        k = min(int(t // window_len), n_windows)
        if k >= n_windows:  # falls in the discarded remainder
            continue
        per_window[k].append(t - k * window_len)
    return [timestamps_to_sequence(ts, w, slot_duration) for ts in per_window]


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------

def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    """Write a file via temp-then-rename so readers never see partial output."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_crossing_log(
    path: str | os.PathLike, crossing_times: Iterable[float], duration: float
) -> None:
    """Crossing-log file: ``# duration_s=<float>`` header, one timestamp per line."""
    lines = [f"# duration_s={duration!r}"]
    lines.extend(repr(float(t)) for t in crossing_times)
    atomic_write_text(path, "\n".join(lines) + "\n")


def load_crossing_log(path: str | os.PathLike) -> tuple[list[float], float]:
    """Read a crossing log; returns (timestamps, declared duration)."""
    try:
        with open(path) as handle:
            lines = handle.read().splitlines()
    except OSError as exc:
        raise FileFormatError(f"cannot read crossing log {path}: {exc}") from exc
    if not lines or not lines[0].startswith("# duration_s="):
        raise FileFormatError(f"{path}: missing '# duration_s=' header")
    try:
        duration = float(lines[0].split("=", 1)[1])
    except ValueError as exc:
        raise FileFormatError(f"{path}: bad duration header {lines[0]!r}") from exc
    times = []
    for lineno, line in enumerate(lines[1:], start=2):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            times.append(float(line))
        except ValueError as exc:
            raise FileFormatError(f"{path}:{lineno}: bad timestamp {line!r}") from exc
    return times, duration


def save_sequences(
    path: str | os.PathLike, rows: Iterable[tuple[int, BlockageSequence]]
) -> None:
    """Sequence file: one ``<label>,<bitstring>`` row per sample."""
    lines = [f"{label},{seq.to_bitstring()}" for label, seq in rows]
    atomic_write_text(path, "\n".join(lines) + "\n")


def load_sequences(
    path: str | os.PathLike, slot_duration: float = 1.0
) -> list[tuple[int, BlockageSequence]]:
    try:
        with open(path) as handle:
            lines = handle.read().splitlines()
    except OSError as exc:
        raise FileFormatError(f"cannot read sequence file {path}: {exc}") from exc
    rows = []
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            label_text, bit_text = line.split(",", 1)
            rows.append(
                (int(label_text), BlockageSequence.from_bitstring(bit_text, slot_duration))
            )
        except ValueError as exc:
            raise FileFormatError(f"{path}:{lineno}: bad sequence row {line!r}") from exc
    return rows
