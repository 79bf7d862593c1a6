"""Counting-accuracy metrics: absolute error, exact accuracy, error CDF."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence


def absolute_counting_error(pairs: Sequence[tuple[int, int]]) -> int:
    """Sum of |real - estimated| over all evaluation cases."""
    if not pairs:
        raise ValueError("no evaluation pairs given")
    return sum(abs(real - estimated) for real, estimated in pairs)


def exact_accuracy(pairs: Sequence[tuple[int, int]]) -> float:
    """Fraction of cases with a perfectly correct count."""
    if not pairs:
        raise ValueError("no evaluation pairs given")
    return sum(1 for real, estimated in pairs if real == estimated) / len(pairs)


def error_cdf(pairs: Sequence[tuple[int, int]]) -> list[tuple[int, float]]:
    """Points (k, fraction of cases with |error| <= k) for k = 0..max|error|."""
    if not pairs:
        raise ValueError("no evaluation pairs given")
    errors = sorted(abs(real - estimated) for real, estimated in pairs)
    return [
        (k, sum(1 for e in errors if e <= k) / len(errors))
        for k in range(errors[-1] + 1)
    ]


@dataclass(frozen=True)
class EvalReport:
    """Per-window counting results plus the summary metrics derived from them.

    All metrics are recomputed from the rows on access, so the summary can
    never disagree with the table it came from.
    """

    rows: tuple[tuple[int, int, int], ...]  # (real, estimated, signed error)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[int, int]]) -> "EvalReport":
        rows = tuple(
            (int(real), int(estimated), int(estimated) - int(real))
            for real, estimated in pairs
        )
        if not rows:
            raise ValueError("no evaluation pairs given")
        return cls(rows)

    @property
    def pairs(self) -> list[tuple[int, int]]:
        return [(real, estimated) for real, estimated, _ in self.rows]

    @property
    def epsilon(self) -> int:
        return absolute_counting_error(self.pairs)

    @property
    def exact_accuracy(self) -> float:
        return exact_accuracy(self.pairs)

    @property
    def cdf(self) -> list[tuple[int, float]]:
        return error_cdf(self.pairs)

    def to_csv(self) -> str:
        lines = ["real,estimated,error"]
        lines.extend(f"{r},{e},{err:+d}" for r, e, err in self.rows)
        return "\n".join(lines) + "\n"

    def to_table(self) -> str:
        lines = [
            f"{'real':>6} {'estimated':>10} {'error':>6}",
        ]
        lines.extend(f"{r:>6} {e:>10} {err:>+6d}" for r, e, err in self.rows)
        lines.append("")
        lines.append(f"absolute counting error: {self.epsilon}")
        lines.append(f"exact accuracy: {self.exact_accuracy:.1%}")
        cdf_text = ", ".join(f"<={k}: {frac:.1%}" for k, frac in self.cdf)
        lines.append(f"error CDF: {cdf_text}")
        return "\n".join(lines) + "\n"
