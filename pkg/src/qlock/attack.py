"""The pruning attack on an obfuscated circuit, and its search-space accounting.

The adversary removes gates next to the marker barrier (or a circuit edge,
or any subset), simulates each candidate, and discards those whose output
is too close to the obfuscated circuit's.
"""
from __future__ import annotations

import csv
import enum
import io
import json
from collections.abc import Sequence
from dataclasses import dataclass

from .circuit import Barrier, Circuit, Gate
from .metrics import tvd
from .rng import derive_seed
from .simulator import DEFAULT_NOISE, NoiseModel, ideal_outcome, outcome_probabilities, sample


class AttackError(ValueError):
    pass


class DomainError(AttackError):
    pass


class NoBarrier(AttackError):
    pass


class Scenario(enum.Enum):
    MIDDLE_BARRIER = "middle-barrier"
    UNKNOWN_EDGE = "unknown-edge"
    UNKNOWN_COUNT = "unknown-count"

    @classmethod
    def parse(cls, text: str) -> "Scenario":
        key = text.strip().lower().replace("_", "-")
        for s in cls:
            if s.value == key or s.name.lower().replace("_", "-") == key:
                return s
        raise ValueError(f"unknown scenario {text!r}; use {', '.join(s.value for s in cls)}")


def candidate_count(n: int, scenario: Scenario) -> int:
    """Number of pruned circuits the adversary must consider for ``n`` gates."""
    if scenario is Scenario.MIDDLE_BARRIER:
        if n < 3:
            raise DomainError("the barrier scenario needs at least 3 gates")
        return n - 2
    if n < 2:
        raise DomainError("need at least 2 gates")
    if scenario is Scenario.UNKNOWN_EDGE:
        return 2 * (n - 1)
    return 2**n - 2


@dataclass(frozen=True)
class PruneCandidate:
    removed_side: str  # left | right | front | back | subset
    removed_count: int
    removed: tuple[int, ...]  # gate ordinals removed
    pruned: Circuit
    tvd_vs_obfuscated: float | None = None
    discarded: bool | None = None
    functionally_correct: bool | None = None


def _prune(obf: Circuit, drop: set[int]) -> Circuit:
    out, ordinal = [], 0
    for inst in obf.instructions:
        if isinstance(inst, Gate):
            if ordinal not in drop:
                out.append(inst)
            ordinal += 1
        else:
            out.append(inst)
    return obf.replace(instructions=out)


def _tagged_barrier_split(obf: Circuit) -> int:
    """Number of gates before the first tagged barrier."""
    seen = 0
    for inst in obf.instructions:
        if isinstance(inst, Barrier) and inst.tag:
            return seen
        if isinstance(inst, Gate):
            seen += 1
    raise NoBarrier("no tagged barrier in the circuit")


class CandidateSet(Sequence):
    """Lazy, indexable list of pruned circuits for one scenario."""

    def __init__(self, obf: Circuit, scenario: Scenario):
        self.obf = obf
        self.scenario = scenario
        self.n = obf.gate_count()
        if scenario is Scenario.MIDDLE_BARRIER:
            self.left = _tagged_barrier_split(obf)
            self.right = self.n - self.left
            self._len = max(self.left - 1, 0) + max(self.right - 1, 0)
        elif scenario is Scenario.UNKNOWN_EDGE:
            self._len = 2 * (self.n - 1) if self.n >= 1 else 0
        else:
            self._len = max(2**self.n - 2, 0)

    def __len__(self) -> int:
        return self._len

    def _spec(self, i: int) -> tuple[str, tuple[int, ...]]:
        n = self.n
        if self.scenario is Scenario.MIDDLE_BARRIER:
            n_left = max(self.left - 1, 0)
            if i < n_left:
                k = i + 1
                return "left", tuple(range(self.left - k, self.left))
            k = i - n_left + 1
            return "right", tuple(range(self.left, self.left + k))
        if self.scenario is Scenario.UNKNOWN_EDGE:
            if i < n - 1:
                return "front", tuple(range(i + 1))
            k = i - (n - 1) + 1
            return "back", tuple(range(n - k, n))
        mask = i + 1
        return "subset", tuple(b for b in range(n) if (mask >> b) & 1)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(len(self)))]
        if i < 0:
            i += len(self)
        if not 0 <= i < len(self):
            raise IndexError(i)
        side, removed = self._spec(i)
        return PruneCandidate(side, len(removed), removed, _prune(self.obf, set(removed)))


def enumerate_candidates(obf: Circuit, scenario: Scenario) -> CandidateSet:
    return CandidateSet(obf, scenario)


def same_function(a: Circuit, b: Circuit, input: str) -> bool:
    """Noiseless output distributions agree on ``input``."""
    if a.is_classical() and b.is_classical():
        return ideal_outcome(a, input) == ideal_outcome(b, input)
    pa, pb = outcome_probabilities(a, input), outcome_probabilities(b, input)
    keys = set(pa) | set(pb)
    return all(abs(pa.get(k, 0.0) - pb.get(k, 0.0)) < 1e-9 for k in keys)


@dataclass(frozen=True)
class AttackReport:
    candidates: tuple[PruneCandidate, ...]
    n_total_gates: int
    choices_before: int
    choices_after: int
    threshold: float
    scenario: Scenario
    evaluated: int

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario.value,
            "threshold": self.threshold,
            "n_total_gates": self.n_total_gates,
            "choices_before": self.choices_before,
            "choices_after": self.choices_after,
            "evaluated": self.evaluated,
            "candidates": [
                {
                    "side": c.removed_side,
                    "k": c.removed_count,
                    "removed": list(c.removed),
                    "tvd": c.tvd_vs_obfuscated,
                    "discarded": c.discarded,
                    "correct": c.functionally_correct,
                }
                for c in self.candidates
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "side", "tvd", "correct", "discarded"])
        for c in self.candidates:
            correct = "" if c.functionally_correct is None else ("correct" if c.functionally_correct else "incorrect")
            w.writerow([c.removed_count, c.removed_side, f"{c.tvd_vs_obfuscated:.4f}", correct, int(bool(c.discarded))])
        return buf.getvalue()


def run_attack(
    obf: Circuit,
    input: str | None = None,
    shots: int = 10_000,
    noise: NoiseModel = DEFAULT_NOISE,
    threshold: float = 0.5,
    scenario: Scenario = Scenario.MIDDLE_BARRIER,
    seed: int = 0,
    *,
    original: Circuit | None = None,
    max_candidates: int | None = 4096,
) -> AttackReport:
    """Simulate every candidate and discard those with TVD below ``threshold``.

    ``original`` is ground truth for labelling candidates; the attack itself
    never looks at it. When the candidate space exceeds ``max_candidates``
    only the first ``max_candidates`` are evaluated and ``choices_after`` counts
    survivors among those.
    """
    if not obf.measures:
        raise AttackError("the obfuscated circuit has no measurements")
    cands = enumerate_candidates(obf, scenario)
    d_obf = sample(obf, input, shots, noise, seed=derive_seed(seed, "attack", "obfuscated"))
    limit = len(cands) if max_candidates is None else min(len(cands), max_candidates)
    evaluated = []
    for i in range(limit):
        c = cands[i]
        d = sample(c.pruned, input, shots, noise, seed=derive_seed(seed, "attack", "candidate", i))
        t = tvd(d_obf, d)
        correct = same_function(c.pruned, original, input) if original is not None else None
        evaluated.append(PruneCandidate(c.removed_side, c.removed_count, c.removed, c.pruned, t, t < threshold, correct))
    after = sum(1 for c in evaluated if not c.discarded)
    return AttackReport(tuple(evaluated), cands.n, len(cands), after, threshold, scenario, limit)
