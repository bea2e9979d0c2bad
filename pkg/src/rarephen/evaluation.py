"""Metrics and analysis.

Mention-level precision/recall/F1 against a gold file keyed by
(doc_id, m_start, m_end, cui); seen/unseen splits by weak-rule agreement;
admission-level micro metrics pooling every (admission, ORDO) decision into
one confusion matrix; screening accuracy for manually reviewed case lists;
and UMLS-to-ORDO matching accuracy in unique-concept and mention-weighted
form.

Zero-denominator conventions: precision and recall are 0 when their
denominator is 0, F1 is 0 when P+R is 0, and screening accuracy over an
empty list is None (undefined, not zero).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import DataFormatError

MentionKey = tuple[str, int, int, str]  # (doc_id, m_start, m_end, cui)


@dataclass(frozen=True)
class GoldMentionLabel:
    key: MentionKey
    label_umls: bool
    ordo_id: str | None = None
    label_ordo: bool | None = None


@dataclass(frozen=True)
class MetricsReport:
    tp: int
    fp: int
    fn: int
    n_pos: int
    n_total: int

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0

    def to_dict(self) -> dict:
        return {
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "n_pos": self.n_pos,
            "n_total": self.n_total,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
        }


def mention_metrics(
    predictions: Mapping[MentionKey, bool], gold: Iterable[GoldMentionLabel]
) -> MetricsReport:
    """Binary confusion over gold keys; a gold key with no prediction counts
    as a negative prediction (manually found mentions the extractor missed)."""
    seen: set[MentionKey] = set()
    tp = fp = fn = n_pos = 0
    total = 0
    for row in gold:
        if row.key in seen:
            raise DataFormatError(f"duplicate gold key {row.key}")
        seen.add(row.key)
        total += 1
        pred = bool(predictions.get(row.key, False))
        if row.label_umls:
            n_pos += 1
            if pred:
                tp += 1
            else:
                fn += 1
        elif pred:
            fp += 1
    return MetricsReport(tp=tp, fp=fp, fn=fn, n_pos=n_pos, n_total=total)


def seen_unseen_split(
    keys: Iterable[MentionKey], rule_evaluations: Mapping[MentionKey, object]
) -> dict[str, set[MentionKey]]:
    """Partition gold keys by weak-rule agreement. `rule_evaluations` maps a
    key to anything with boolean `lambda1`/`lambda2` attributes."""
    splits: dict[str, set[MentionKey]] = {
        "seen": set(),
        "unseen": set(),
        "unseen_lambda1": set(),
        "unseen_lambda2": set(),
    }
    for key in keys:
        if key not in rule_evaluations:
            raise DataFormatError(f"no rule evaluation recorded for {key}")
        ev = rule_evaluations[key]
        l1, l2 = bool(ev.lambda1), bool(ev.lambda2)
        if l1 == l2:
            splits["seen"].add(key)
        else:
            splits["unseen"].add(key)
            splits["unseen_lambda1" if l1 else "unseen_lambda2"].add(key)
    return splits


def micro_admission_metrics(
    predicted: Mapping[str, set[str]],
    gold: Mapping[str, set[str]],
    label_universe: Iterable[str],
) -> MetricsReport:
    """Each (admission, ORDO concept) pair is one binary instance; the pooled
    confusion matrix gives micro precision/recall/F1."""
    universe = set(label_universe)
    used = set()
    for sets in (predicted, gold):
        for labels in sets.values():
            used.update(labels)
    if not used <= universe:
        raise ValueError(f"labels outside the declared universe: {sorted(used - universe)[:5]}")
    admissions = set(predicted) | set(gold)
    tp = fp = fn = 0
    n_pos = 0
    for adm in admissions:
        pred_labels = predicted.get(adm, set())
        gold_labels = gold.get(adm, set())
        n_pos += len(gold_labels)
        tp += len(pred_labels & gold_labels)
        fp += len(pred_labels - gold_labels)
        fn += len(gold_labels - pred_labels)
    return MetricsReport(tp=tp, fp=fp, fn=fn, n_pos=n_pos, n_total=len(admissions) * len(universe))


def screening_accuracy(flagged: Sequence, judgments: Sequence[bool]) -> float | None:
    """Fraction of flagged cases judged correct; None when nothing was flagged."""
    if len(flagged) != len(judgments):
        raise ValueError(f"{len(flagged)} flagged cases vs {len(judgments)} judgments")
    if not flagged:
        return None
    return sum(1 for j in judgments if j) / len(flagged)


@dataclass(frozen=True)
class MatchJudgment:
    """Human verdict on one unique UMLS-ORDO correspondence, with the number
    of evaluated mentions that used it."""

    cui: str
    ordo_id: str
    n_mentions: int
    correct: bool


def matching_accuracy(judgments: Sequence[MatchJudgment]) -> tuple[float, float]:
    """(unique-concept accuracy, mention-weighted accuracy)."""
    if not judgments:
        raise ValueError("no matching judgments")
    unique_correct = sum(1 for j in judgments if j.correct)
    total_mentions = sum(j.n_mentions for j in judgments)
    if total_mentions <= 0:
        raise ValueError("mention counts must be positive")
    weighted_correct = sum(j.n_mentions for j in judgments if j.correct)
    return unique_correct / len(judgments), weighted_correct / total_mentions


# -- file formats --------------------------------------------------------------


def read_gold_csv(path: str | Path) -> list[GoldMentionLabel]:
    """Gold CSV: doc_id,m_start,m_end,cui,label_umls[,ordo_id,label_ordo]."""
    rows: list[GoldMentionLabel] = []
    try:
        with open(path, newline="", encoding="utf-8") as handle:
            reader = csv.DictReader(handle)
            required = {"doc_id", "m_start", "m_end", "cui", "label_umls"}
            if reader.fieldnames is None or not required <= set(reader.fieldnames):
                raise DataFormatError(f"{path}: gold CSV must have columns {sorted(required)}")
            for lineno, row in enumerate(reader, start=2):
                try:
                    key = (row["doc_id"], int(row["m_start"]), int(row["m_end"]), row["cui"])
                    ordo_id = (row.get("ordo_id") or "").strip() or None
                    raw_ordo_label = (row.get("label_ordo") or "").strip()
                    rows.append(
                        GoldMentionLabel(
                            key=key,
                            label_umls=_parse_bool(row["label_umls"]),
                            ordo_id=ordo_id,
                            label_ordo=_parse_bool(raw_ordo_label) if raw_ordo_label else None,
                        )
                    )
                except (KeyError, ValueError) as exc:
                    raise DataFormatError(f"{path}:{lineno}: {exc}") from exc
    except OSError as exc:
        raise DataFormatError(f"cannot read gold file {path}: {exc}") from exc
    return rows


def read_match_judgments_csv(path: str | Path) -> list[MatchJudgment]:
    """Judgment CSV: cui,ordo_id,n_mentions,correct."""
    rows: list[MatchJudgment] = []
    try:
        with open(path, newline="", encoding="utf-8") as handle:
            reader = csv.DictReader(handle)
            required = {"cui", "ordo_id", "n_mentions", "correct"}
            if reader.fieldnames is None or not required <= set(reader.fieldnames):
                raise DataFormatError(f"{path}: judgment CSV must have columns {sorted(required)}")
            for lineno, row in enumerate(reader, start=2):
                try:
                    rows.append(
                        MatchJudgment(
                            cui=row["cui"],
                            ordo_id=row["ordo_id"],
                            n_mentions=int(row["n_mentions"]),
                            correct=_parse_bool(row["correct"]),
                        )
                    )
                except (KeyError, ValueError) as exc:
                    raise DataFormatError(f"{path}:{lineno}: {exc}") from exc
    except OSError as exc:
        raise DataFormatError(f"cannot read judgment file {path}: {exc}") from exc
    return rows


def _parse_bool(raw: str) -> bool:
    value = str(raw).strip().lower()
    if value in ("1", "true", "t", "yes"):
        return True
    if value in ("0", "false", "f", "no"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")
