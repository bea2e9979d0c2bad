"""Rule-based weak labelling of candidate mention-UMLS pairs.

Two rules per candidate: the mention-length rule (true when the mention has
more than `l` characters, i.e. m_end - m_start > l) and the corpus
"prevalence" rule (true when the CUI's share of all candidate links is
below `p`, i.e. Freq(c)/|L| < p). A candidate enters the weak training set
only when the rules agree (XNOR selection); its label is their conjunction
(AND labelling). Disagreeing candidates stay unlabelled and are scored at
inference time only.

The prevalence comparison is exact rational arithmetic, so threshold-adjacent
counts never depend on float rounding.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Sequence

from .nerl import MentionCandidate

DEFAULT_LENGTH_THRESHOLD = 3
DEFAULT_PREVALENCE_THRESHOLD = 0.005

# 7 x 3 tuning grid
GRID_PREVALENCE = (1e-4, 5e-4, 1e-3, 5e-3, 1e-2, 5e-2, 1e-1)
GRID_LENGTH = (2, 3, 4)


def _as_fraction(p: float | str | Fraction) -> Fraction:
    if isinstance(p, Fraction):
        return p
    # decimal-literal route: str(0.005) == "0.005", so the comparison stays exact
    return Fraction(str(p))


@dataclass(frozen=True)
class WeakRuleParams:
    l: int = DEFAULT_LENGTH_THRESHOLD
    p: float = DEFAULT_PREVALENCE_THRESHOLD

    def __post_init__(self):
        if self.l < 0:
            raise ValueError("length threshold must be >= 0")
        frac = _as_fraction(self.p)
        if not (0 < frac <= 1):
            raise ValueError("prevalence threshold must be in (0, 1]")


@dataclass(frozen=True)
class RuleEvaluation:
    lambda1: bool
    lambda2: bool

    @property
    def selected(self) -> bool:
        return self.lambda1 == self.lambda2

    @property
    def y_weak(self) -> int | None:
        if not self.selected:
            return None
        return int(self.lambda1 and self.lambda2)


@dataclass
class WeakDataset:
    labeled: list[tuple[MentionCandidate, int]]
    unlabeled: list[MentionCandidate]
    evaluations: dict[tuple, RuleEvaluation]  # candidate key -> rule record
    params: WeakRuleParams
    total_links: int

    @property
    def n_positive(self) -> int:
        return sum(1 for _, y in self.labeled if y == 1)

    @property
    def n_negative(self) -> int:
        return sum(1 for _, y in self.labeled if y == 0)

    def counts(self) -> dict[str, int]:
        return {
            "total_links": self.total_links,
            "positive": self.n_positive,
            "negative": self.n_negative,
            "unlabeled": len(self.unlabeled),
        }


def rule_length(candidate: MentionCandidate, l: int) -> bool:
    return candidate.mention_length() > l


def rule_prevalence(freq: int, total: int, p: float | str | Fraction) -> bool:
    if total <= 0:
        raise ValueError("total candidate count must be positive")
    if not 0 <= freq <= total:
        raise ValueError("frequency must be between 0 and the total")
    return Fraction(freq, total) < _as_fraction(p)


def cui_frequencies(candidates: Iterable[MentionCandidate]) -> Counter:
    return Counter(c.cui for c in candidates)


def weak_label(
    candidates: Sequence[MentionCandidate],
    params: WeakRuleParams,
    freq_candidates: Sequence[MentionCandidate] | None = None,
) -> WeakDataset:
    """Evaluate both rules on every candidate and partition by agreement.

    The frequency table defaults to the candidate list itself;
    `freq_candidates` lets the caller compute prevalence over a different
    scope (e.g. pre-filter matches) while labelling the filtered list.
    """
    if not candidates:
        raise ValueError("no candidates to label")
    base = candidates if freq_candidates is None else freq_candidates
    freq = cui_frequencies(base)
    total = len(base)
    labeled: list[tuple[MentionCandidate, int]] = []
    unlabeled: list[MentionCandidate] = []
    evaluations: dict[tuple, RuleEvaluation] = {}
    for cand in candidates:
        ev = RuleEvaluation(
            lambda1=rule_length(cand, params.l),
            lambda2=rule_prevalence(freq.get(cand.cui, 0), total, params.p),
        )
        evaluations[cand.key()] = ev
        if ev.selected:
            labeled.append((cand, ev.y_weak))
        else:
            unlabeled.append(cand)
    return WeakDataset(labeled, unlabeled, evaluations, params, total)


def default_grid() -> list[WeakRuleParams]:
    return [WeakRuleParams(l=l, p=p) for p in GRID_PREVALENCE for l in GRID_LENGTH]


def grid_search(
    candidates: Sequence[MentionCandidate],
    params_grid: Sequence[WeakRuleParams],
    scorer: Callable[[WeakRuleParams, WeakDataset], float],
    freq_candidates: Sequence[MentionCandidate] | None = None,
) -> tuple[WeakRuleParams, list[tuple[WeakRuleParams, float]]]:
    """Score every parameter pair; ties break to smaller p, then smaller l."""
    if not params_grid:
        raise ValueError("empty parameter grid")
    table = []
    for params in params_grid:
        dataset = weak_label(candidates, params, freq_candidates=freq_candidates)
        table.append((params, float(scorer(params, dataset))))
    best = max(table, key=lambda row: (row[1], -_as_fraction(row[0].p), -row[0].l))
    return best[0], table
