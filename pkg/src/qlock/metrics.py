"""Distances and corruption scores over sampled distributions."""
from __future__ import annotations

from .simulator import Distribution


class MetricError(ValueError):
    pass


class ShotMismatch(MetricError):
    pass


class ZeroShots(MetricError):
    pass


def _shots(d: Distribution) -> int:
    if d.shots <= 0:
        raise ZeroShots("distribution has no shots")
    return d.shots


def tvd(a: Distribution, b: Distribution) -> float:
    """Sum of absolute count differences over the shot total; ranges over [0, 2]."""
    shots = _shots(a)
    if b.shots != shots:
        raise ShotMismatch(f"{a.shots} != {b.shots} shots")
    keys = set(a.counts) | set(b.counts)
    return sum(abs(a.counts.get(k, 0) - b.counts.get(k, 0)) for k in keys) / shots


def dfc(d: Distribution, correct: str) -> float:
    """Correct count minus the largest incorrect count, over shots; in [-1, 1]."""
    shots = _shots(d)
    good = d.counts.get(correct, 0)
    worst = max((n for k, n in d.counts.items() if k != correct), default=0)
    return (good - worst) / shots


def fidelity(d: Distribution, correct: str) -> float:
    return d.counts.get(correct, 0) / _shots(d)
