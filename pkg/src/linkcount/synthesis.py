"""Multi-class training-set generation from single-person sequences.

A k-person sequence is synthesized as the bitwise OR of k independently
collected single-person sequences (each walker blocks the link on their
own schedule). Every count class is then balanced to exactly ``w + 1``
samples: classes with too few distinct combinations are topped up with
single-bit-flip noised copies, classes with too many never materialize the
full combination space in the first place.
"""

from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import (
    BlockageSequence,
    FileFormatError,
    LabeledDataset,
    LabeledSample,
    atomic_write_text,
    load_sequences,
)

# Above this many total combinations, sampling without repetition is done by
# rejection instead of materializing and shuffling the whole space.
_ENUMERATION_CAP = 20_000


@dataclass(frozen=True)
class SynthesisPlan:
    """Sizes and seed governing one dataset build."""

    m: int  # number of original single-person sequences
    max_count: int  # largest count class N
    w: int  # slots per sequence
    rng_seed: int = 0

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be at least 1")
        if self.max_count < 1:
            raise ValueError("max_count must be at least 1")
        if self.w < 1:
            raise ValueError("w must be at least 1")

    @property
    def target_per_class(self) -> int:
        return self.w + 1


def superpose(sequences: Sequence[BlockageSequence]) -> BlockageSequence:
    """Bitwise OR of the input sequences (a joint multi-person pattern)."""
    if not sequences:
        raise ValueError("cannot superpose an empty list of sequences")
    first = sequences[0]
    for seq in sequences[1:]:
        if seq.w != first.w:
            raise ValueError(f"sequence length mismatch: {seq.w} != {first.w}")
        if seq.slot_duration != first.slot_duration:
            raise ValueError("sequences must share the same slot duration")
    bits = np.bitwise_or.reduce([seq.bits for seq in sequences])
    return BlockageSequence(bits, first.slot_duration)


def flip_random_bit(
    sequence: BlockageSequence, rng: np.random.Generator
) -> BlockageSequence:
    """Copy of the sequence with one uniformly chosen bit inverted."""
    index = int(rng.integers(sequence.w))
    return _flip_bit(sequence, index)


def _flip_bit(sequence: BlockageSequence, index: int) -> BlockageSequence:
    bits = sequence.bits.copy()
    bits[index] ^= 1
    return BlockageSequence(bits, sequence.slot_duration)


def zero_class_set(w: int, slot_duration: float = 1.0) -> list[LabeledSample]:
    """All w+1 samples of the empty-room class.

    One all-zeros sequence plus its w distinct single-bit-flip variants;
    flipping every position once is exactly the balancing target, so no
    random choice is involved.
    """
    if w < 1:
        raise ValueError("w must be at least 1")
    base = BlockageSequence(np.zeros(w, dtype=np.uint8), slot_duration)
    samples = [LabeledSample(base, 0, "collected")]
    for index in range(w):
        samples.append(
            LabeledSample(_flip_bit(base, index), 0, "noised", source=0,
                          flipped_bit=index)
        )
    return samples


def unbalanced_class_size(m: int, n: int) -> int:
    """Samples the superposition step alone would yield for class n: C(m, n)."""
    if m < 0 or n < 0:
        raise ValueError("m and n must be non-negative")
    if n > m:
        return 0
    return math.comb(m, n)


def _distinct_combinations(
    m: int, n: int, k: int, rng: np.random.Generator
) -> list[tuple[int, ...]]:
    """k combinations of n indices out of m, random, without repetition."""
    total = math.comb(m, n)
    if total <= max(4 * k, _ENUMERATION_CAP):
        combos = list(itertools.combinations(range(m), n))
        order = rng.permutation(total)[:k]
        return [combos[i] for i in order]
    seen: set[tuple[int, ...]] = set()
    out: list[tuple[int, ...]] = []
    while len(out) < k:
        combo = tuple(sorted(rng.choice(m, size=n, replace=False).tolist()))
        if combo not in seen:
            seen.add(combo)
            out.append(combo)
    return out


def balance_class(
    n: int,
    originals: Sequence[BlockageSequence],
    plan: SynthesisPlan,
    rng: np.random.Generator,
) -> list[LabeledSample]:
    """Exactly w+1 samples for count class n (1 <= n <= N).

    Superposed samples are built from distinct combinations of n originals;
    no combination is used twice, but identical bit vectors arising from
    different combinations are kept. If the C(m, n) combinations run out
    before reaching w+1 samples, the rest are noised copies of uniformly
    chosen already-generated samples (noised samples are never themselves
    used as a noising source). For n = 1 the "superposed" samples are the
    originals, kept with their collected origin.
    """
    m = len(originals)
    if not 1 <= n <= plan.max_count:
        raise ValueError(f"class index {n} outside 1..{plan.max_count}")
    if n > m:
        raise ValueError(f"class {n} needs {n} distinct originals but only {m} exist")
    target = plan.target_per_class
    base_count = min(math.comb(m, n), target)

    samples: list[LabeledSample] = []
    for combo in _distinct_combinations(m, n, base_count, rng):
        if n == 1:
            samples.append(
                LabeledSample(originals[combo[0]], 1, "collected", combo=combo)
            )
        else:
            superposed = superpose([originals[i] for i in combo])
            samples.append(LabeledSample(superposed, n, "superposed", combo=combo))

    while len(samples) < target:
        source = int(rng.integers(base_count))
        noised = flip_random_bit(samples[source].sequence, rng)
        flipped = int(np.nonzero(noised.bits != samples[source].sequence.bits)[0][0])
        samples.append(
            LabeledSample(noised, n, "noised", source=source, flipped_bit=flipped)
        )
    return samples


def build_dataset(
    originals: Sequence[BlockageSequence], plan: SynthesisPlan
) -> LabeledDataset:
    """Balanced dataset for classes 0..N, deterministic in plan.rng_seed.

    Each class draws from its own rng stream seeded by (rng_seed, class),
    so classes could be generated in parallel without changing the result.
    """
    if len(originals) != plan.m:
        raise ValueError(f"plan declares m={plan.m} but {len(originals)} originals given")
    for seq in originals:
        if seq.w != plan.w:
            raise ValueError(f"original of length {seq.w} does not match plan w={plan.w}")
    infeasible = [n for n in range(1, plan.max_count + 1) if n > plan.m]
    if infeasible:
        raise ValueError(
            f"classes {infeasible} need more than the m={plan.m} available originals"
        )
    slot_duration = originals[0].slot_duration
    samples = zero_class_set(plan.w, slot_duration)
    for n in range(1, plan.max_count + 1):
        rng = np.random.default_rng([plan.rng_seed, n])
        samples.extend(balance_class(n, originals, plan, rng))
    return LabeledDataset(tuple(samples), classes=plan.max_count, w=plan.w)


# ---------------------------------------------------------------------------
# Dataset file format (sequence file + provenance sidecar)
# ---------------------------------------------------------------------------

def _sidecar_path(path: str | os.PathLike) -> str:
    return f"{path}.provenance"


def save_dataset(path: str | os.PathLike, dataset: LabeledDataset) -> None:
    """Write the sequence file plus a ``<path>.provenance`` sidecar.

    Sidecar rows are ``index,label,origin,detail`` where detail is the
    ``+``-joined constituent indices for collected/superposed samples or
    ``src=<sample>;bit=<slot>`` for noised ones.
    """
    rows = []
    sidecar = []
    for index, sample in enumerate(dataset.samples):
        rows.append((sample.label, sample.sequence))
        if sample.origin == "noised":
            detail = f"src={sample.source};bit={sample.flipped_bit}"
        elif sample.combo is not None:
            detail = "+".join(str(i) for i in sample.combo)
        else:
            detail = ""
        sidecar.append(f"{index},{sample.label},{sample.origin},{detail}")
    from .core import save_sequences

    save_sequences(path, rows)
    atomic_write_text(_sidecar_path(path), "\n".join(sidecar) + "\n")


def load_dataset(path: str | os.PathLike, slot_duration: float = 1.0) -> LabeledDataset:
    rows = load_sequences(path, slot_duration)
    if not rows:
        raise FileFormatError(f"{path}: dataset file is empty")
    sidecar_file = _sidecar_path(path)
    try:
        with open(sidecar_file) as handle:
            lines = [line for line in handle.read().splitlines() if line.strip()]
    except OSError as exc:
        raise FileFormatError(f"cannot read provenance sidecar {sidecar_file}: {exc}") from exc
    if len(lines) != len(rows):
        raise FileFormatError(
            f"{sidecar_file}: {len(lines)} provenance rows for {len(rows)} samples"
        )
    samples = []
    for lineno, (line, (label, sequence)) in enumerate(zip(lines, rows), start=1):
        try:
            index_text, label_text, origin, detail = line.split(",", 3)
            if int(index_text) != lineno - 1 or int(label_text) != label:
                raise ValueError("provenance row does not match its sample")
            combo = source = flipped = None
            if origin == "noised":
                src_part, bit_part = detail.split(";")
                source = int(src_part.removeprefix("src="))
                flipped = int(bit_part.removeprefix("bit="))
            elif detail:
                combo = tuple(int(i) for i in detail.split("+"))
            samples.append(
                LabeledSample(sequence, label, origin, combo=combo,
                              source=source, flipped_bit=flipped)
            )
        except ValueError as exc:
            raise FileFormatError(f"{sidecar_file}:{lineno}: {exc}") from exc
    classes = max(label for label, _ in rows)
    return LabeledDataset(tuple(samples), classes=classes, w=rows[0][1].w)
