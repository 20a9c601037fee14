"""Pinyin syllable structure and pronunciation edit distance for fuzzy matching.

The distance is a transparent cost-table edit distance over (initial, final,
tone) decompositions.  Confusable initial/final pairs carry reduced
substitution cost; tone mismatches add a small constant.  Phrase distance is
a Levenshtein DP normalized by the longer sequence length, so a single
threshold applies across keyword lengths.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

from .errors import BadSyllable

# Longest-match order matters: digraphs before their single-letter prefixes.
INITIALS = ("zh", "ch", "sh",
            "b", "p", "m", "f", "d", "t", "n", "l", "g", "k", "h",
            "j", "q", "x", "r", "z", "c", "s", "y", "w")

DEFAULT_INITIAL_GROUPS = ((frozenset({"zh", "z"}), 0.5),
                          (frozenset({"ch", "c"}), 0.5),
                          (frozenset({"sh", "s"}), 0.5),
                          (frozenset({"n", "l"}), 0.5),
                          (frozenset({"f", "h"}), 0.5))
DEFAULT_FINAL_GROUPS = ((frozenset({"in", "ing"}), 0.5),
                        (frozenset({"en", "eng"}), 0.5),
                        (frozenset({"an", "ang"}), 0.5))


@dataclass(frozen=True)
class Syllable:
    initial: str
    final: str
    tone: int

    def __post_init__(self):
        if not self.final:
            raise BadSyllable("empty final")
        if not 0 <= self.tone <= 4:
            raise BadSyllable(f"tone {self.tone} out of range")


@dataclass(frozen=True)
class CostTable:
    initial_groups: tuple = DEFAULT_INITIAL_GROUPS
    final_groups: tuple = DEFAULT_FINAL_GROUPS
    tone_cost: float = 0.2
    substitution_cost: float = 1.0
    indel_cost: float = 1.0

    def _group_cost(self, a: str, b: str, groups) -> float:
        if a == b:
            return 0.0
        for members, cost in groups:
            if a in members and b in members:
                return cost
        return self.substitution_cost

    def initial_cost(self, a: str, b: str) -> float:
        return self._group_cost(a, b, self.initial_groups)

    def final_cost(self, a: str, b: str) -> float:
        return self._group_cost(a, b, self.final_groups)


def load_cost_table(path) -> CostTable:
    """Sectioned key-value file: [initial_groups], [final_groups], [costs].

    Group lines are space-separated members followed by ':cost'; cost lines
    are 'name = value' for tone_cost, substitution_cost, indel_cost.
    """
    init_groups, final_groups = [], []
    costs = {"tone_cost": 0.2, "substitution_cost": 1.0, "indel_cost": 1.0}
    section = None
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("[") and line.endswith("]"):
                section = line[1:-1]
                continue
            if section in ("initial_groups", "final_groups"):
                members, _, cost = line.rpartition(":")
                group = (frozenset(members.split()), float(cost))
                (init_groups if section == "initial_groups" else final_groups).append(group)
            elif section == "costs":
                key, _, val = line.partition("=")
                costs[key.strip()] = float(val)
    return CostTable(initial_groups=tuple(init_groups),
                     final_groups=tuple(final_groups), **costs)


@lru_cache(maxsize=None)
def parse_syllable(s: str) -> Syllable:
    """'zhong1' -> Syllable(zh, ong, 1); longest-match initial, trailing tone digit."""
    if not s or not s[-1].isdigit():
        raise BadSyllable(f"missing tone digit: {s!r}")
    tone = int(s[-1])
    if tone > 4:
        raise BadSyllable(f"tone out of range: {s!r}")
    body = s[:-1]
    initial = ""
    for cand in INITIALS:
        if body.startswith(cand):
            initial = cand
            break
    final = body[len(initial):]
    if not final:
        raise BadSyllable(f"empty final: {s!r}")
    return Syllable(initial=initial, final=final, tone=tone)


def syllable_distance(a: Syllable, b: Syllable, table: CostTable) -> float:
    d = table.initial_cost(a.initial, b.initial) + table.final_cost(a.final, b.final)
    if a.tone != b.tone:
        d += table.tone_cost
    return d


def phrase_distance(a: list[Syllable], b: list[Syllable], table: CostTable) -> float:
    """Levenshtein with syllable_distance substitutions, normalized by max length."""
    if not a and not b:
        return 0.0
    la, lb = len(a), len(b)
    prev = [j * table.indel_cost for j in range(lb + 1)]
    for i in range(1, la + 1):
        cur = [i * table.indel_cost] + [0.0] * lb
        for j in range(1, lb + 1):
            # substitution capped at one indel so the normalized result
            # stays in [0, 1]
            sub = prev[j - 1] + min(
                syllable_distance(a[i - 1], b[j - 1], table), table.indel_cost)
            cur[j] = min(sub, prev[j] + table.indel_cost, cur[j - 1] + table.indel_cost)
        prev = cur
    return prev[lb] / max(la, lb)
