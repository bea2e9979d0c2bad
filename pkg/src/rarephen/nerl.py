"""Gazetteer NER+L over clinical notes.

Builds a synonym dictionary restricted to the rare-disease UMLS set, scans
documents with the multi-pattern matcher, resolves ambiguous surfaces with a
corpus-frequency prior (the most frequent CUI wins, ties to the
lexicographically smallest), attaches a token context window and the
enclosing document-structure name to each mention, and drops mentions whose
window shows a negation, hypothetical, or other-experiencer trigger.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from . import tokenization
from .errors import DataFormatError, EmptyDictionaryError
from .matcher import DictionaryMatcher
from .ontology import OntologyStore
from .tokenization import contains_phrase, normalize_phrase, tokenize

FAMILY_HISTORY_SECTION = "Family_History"
BASIC_SECTION = "basic"

DEFAULT_WINDOW_TOKENS = 5

DEFAULT_NEGATION_TRIGGERS = (
    "no evidence of",
    "no signs of",
    "negative for",
    "negative",
    "denies",
    "denied",
    "without",
    "ruled out",
    "free of",
)
DEFAULT_HYPOTHETICAL_TRIGGERS = (
    "concern of",
    "concern for",
    "rule out",
    "r/o",
    "suggesting",
    "suggestive of",
    "possible",
    "questionable",
)
DEFAULT_EXPERIENCER_TRIGGERS = (
    "mother",
    "father",
    "brother",
    "sister",
    "grandmother",
    "grandfather",
    "family history",
    "relative",
)
DEFAULT_SECTION_HEADERS = (
    ("Chief Complaint:", "Chief_Complaint"),
    ("History of Present Illness:", "History_of_Present_Illness"),
    ("Past Medical History:", "History_of_Past_Illness"),
    ("Family History:", FAMILY_HISTORY_SECTION),
    ("Social History:", "Social_History"),
    ("Medications on Admission:", "Admission_Medications"),
    ("Pertinent Results:", "pertinent_results"),
    ("Hospital Course:", "Hospital_course"),
    ("Brief Hospital Course:", "Hospital_course"),
    ("Discharge Diagnosis:", "Discharge_Diagnosis"),
    ("Impression:", "impression"),
)


@dataclass(frozen=True)
class Section:
    """A document-structure span; offsets are Unicode scalar indices."""

    name: str
    start: int
    end: int

    def __post_init__(self):
        if not (0 <= self.start < self.end):
            raise ValueError(f"bad section span [{self.start}, {self.end})")


@dataclass
class Document:
    doc_id: str
    text: str
    admission_id: str | None = None
    sections: list[Section] = field(default_factory=list)


@dataclass(frozen=True)
class SynonymEntry:
    surface: str  # normalized
    cui: str


@dataclass(frozen=True)
class MentionCandidate:
    """One surviving dictionary match: the mention span, its linked CUI, the
    context window, and the enclosing structure name if any."""

    doc_id: str
    m_start: int
    m_end: int
    surface: str  # document text between m_start and m_end
    cui: str
    context: str
    window_start: int
    window_end: int
    mention_start_in_context: int
    mention_end_in_context: int
    structure_name: str | None = None

    def key(self) -> tuple[str, int, int, str]:
        return (self.doc_id, self.m_start, self.m_end, self.cui)

    def mention_length(self) -> int:
        return self.m_end - self.m_start

    def to_dict(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "m_start": self.m_start,
            "m_end": self.m_end,
            "surface": self.surface,
            "cui": self.cui,
            "context": self.context,
            "window_start": self.window_start,
            "window_end": self.window_end,
            "mention_in_context": [self.mention_start_in_context, self.mention_end_in_context],
            "structure_name": self.structure_name,
        }

    @classmethod
    def from_dict(cls, row: Mapping) -> "MentionCandidate":
        try:
            mic = row["mention_in_context"]
            return cls(
                doc_id=row["doc_id"],
                m_start=int(row["m_start"]),
                m_end=int(row["m_end"]),
                surface=row["surface"],
                cui=row["cui"],
                context=row["context"],
                window_start=int(row["window_start"]),
                window_end=int(row["window_end"]),
                mention_start_in_context=int(mic[0]),
                mention_end_in_context=int(mic[1]),
                structure_name=row.get("structure_name"),
            )
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise DataFormatError(f"bad candidate row: {exc}") from exc


@dataclass
class TriggerConfig:
    """Editable trigger lists for the context filters plus the section-header
    patterns used to segment documents."""

    negation: tuple[str, ...] = DEFAULT_NEGATION_TRIGGERS
    hypothetical: tuple[str, ...] = DEFAULT_HYPOTHETICAL_TRIGGERS
    experiencer: tuple[str, ...] = DEFAULT_EXPERIENCER_TRIGGERS
    section_headers: tuple[tuple[str, str], ...] = DEFAULT_SECTION_HEADERS

    @classmethod
    def from_json(cls, path: str | Path) -> "TriggerConfig":
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise DataFormatError(f"cannot read trigger config {path}: {exc}") from exc
        cfg = cls()
        for key in ("negation", "hypothetical", "experiencer"):
            if key in raw:
                values = raw[key]
                if not isinstance(values, list) or not all(isinstance(v, str) for v in values):
                    raise DataFormatError(f"trigger config key {key!r} must be a list of strings")
                setattr(cfg, key, tuple(values))
        if "section_headers" in raw:
            try:
                cfg.section_headers = tuple((str(p), str(n)) for p, n in raw["section_headers"])
            except (TypeError, ValueError) as exc:
                raise DataFormatError("section_headers must be a list of [pattern, name] pairs") from exc
        return cfg


# -- dictionary and matcher ---------------------------------------------------


def read_synonym_rows(path: str | Path) -> list[tuple[str, str]]:
    """Synonym TSV: header row, then `surface<TAB>cui` rows."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise DataFormatError(f"{path}: missing header row")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise DataFormatError(f"{path}:{lineno}: expected 2 tab-separated columns")
        rows.append((parts[0], parts[1].strip()))
    return rows


def build_dictionary(store: OntologyStore, synonym_rows: Iterable[tuple[str, str]]) -> list[SynonymEntry]:
    """Normalize synonym surfaces and keep only rows whose CUI is in the
    rare-disease set. Duplicates collapse. An empty result is an error."""
    rare = store.rare_umls_codes()
    seen: set[tuple[str, str]] = set()
    entries: list[SynonymEntry] = []
    for surface, cui in synonym_rows:
        if cui not in rare:
            continue
        norm = normalize_phrase(surface)
        if not norm or (norm, cui) in seen:
            continue
        seen.add((norm, cui))
        entries.append(SynonymEntry(norm, cui))
    if not entries:
        raise EmptyDictionaryError("no synonym rows survive the rare-disease filter")
    return entries


def build_matcher(dictionary: Sequence[SynonymEntry]) -> DictionaryMatcher:
    surface_to_cuis: dict[str, set[str]] = {}
    for entry in dictionary:
        surface_to_cuis.setdefault(entry.surface, set()).add(entry.cui)
    return DictionaryMatcher(surface_to_cuis)


# -- sections -----------------------------------------------------------------


def split_sections(text: str, header_patterns: Sequence[tuple[str, str]]) -> list[Section]:
    """Segment text at header matches (case-insensitive literal search).
    A section runs from its header to the next header or end of text; any
    text before the first header is the "basic" section."""
    folded = tokenization.fold_case(text)
    starts: dict[int, str] = {}
    for pattern, name in header_patterns:
        needle = tokenization.fold_case(pattern)
        if not needle:
            continue
        pos = 0
        while True:
            i = folded.find(needle, pos)
            if i < 0:
                break
            starts.setdefault(i, name)  # first pattern in config order wins
            pos = i + 1
    if not text:
        return []
    if not starts:
        return [Section(BASIC_SECTION, 0, len(text))]
    offsets = sorted(starts)
    sections: list[Section] = []
    if offsets[0] > 0:
        sections.append(Section(BASIC_SECTION, 0, offsets[0]))
    for idx, off in enumerate(offsets):
        end = offsets[idx + 1] if idx + 1 < len(offsets) else len(text)
        if off < end:
            sections.append(Section(starts[off], off, end))
    return sections


def section_name_at(sections: Sequence[Section], offset: int) -> str | None:
    for section in sections:
        if section.start <= offset < section.end:
            return section.name
    return None


# -- candidate extraction -------------------------------------------------------


def build_prior(docs: Iterable[Document], matcher: DictionaryMatcher) -> dict[str, dict[str, int]]:
    """First corpus pass: corpus-frequency disambiguation prior.

    Every raw (pre-filter) match of a surface counts once toward each CUI
    that surface can denote; a surface's table then holds the corpus-wide
    counts of its own CUIs, so the most frequent reading across the corpus
    wins at resolution time.
    """
    global_counts: dict[str, int] = {}
    surfaces_seen: set[str] = set()
    for doc in docs:
        for match in matcher.find(doc.text):
            surfaces_seen.add(match.surface)
            for cui in matcher.cuis_for(match.surface):
                global_counts[cui] = global_counts.get(cui, 0) + 1
    return {
        surface: {cui: global_counts.get(cui, 0) for cui in matcher.cuis_for(surface)}
        for surface in surfaces_seen
    }


def resolve_cui(surface: str, cuis: Sequence[str], prior: Mapping[str, Mapping[str, int]]) -> str:
    """Most frequent CUI under the prior; ties break to the smallest CUI."""
    if len(cuis) == 1:
        return cuis[0]
    table = prior.get(surface, {})
    return min(cuis, key=lambda c: (-table.get(c, 0), c))


def extract_candidates(
    doc: Document,
    matcher: DictionaryMatcher,
    prior: Mapping[str, Mapping[str, int]] | None = None,
    window_tokens: int = DEFAULT_WINDOW_TOKENS,
) -> list[MentionCandidate]:
    """Second pass: one candidate per surviving match, with the ambiguity
    prior applied and the context window and structure name attached."""
    prior = prior or {}
    tokens = tokenize(doc.text)
    candidates = []
    for match in matcher.find(doc.text):
        cui = resolve_cui(match.surface, matcher.cuis_for(match.surface), prior)
        w_start, w_end = tokenization.word_window(tokens, match.start, match.end, window_tokens)
        candidates.append(
            MentionCandidate(
                doc_id=doc.doc_id,
                m_start=match.start,
                m_end=match.end,
                surface=doc.text[match.start : match.end],
                cui=cui,
                context=doc.text[w_start:w_end],
                window_start=w_start,
                window_end=w_end,
                mention_start_in_context=match.start - w_start,
                mention_end_in_context=match.end - w_start,
                structure_name=section_name_at(doc.sections, match.start),
            )
        )
    return candidates


def apply_context_filters(
    candidates: Iterable[MentionCandidate], triggers: TriggerConfig
) -> list[MentionCandidate]:
    """Drop candidates with a negation or hypothetical trigger in the context
    window, an experiencer trigger in the window, or a position inside a
    Family_History section. Retained candidates pass through unchanged."""
    kept = []
    for cand in candidates:
        if cand.structure_name == FAMILY_HISTORY_SECTION:
            continue
        window = cand.context
        if any(contains_phrase(window, t) for t in triggers.negation):
            continue
        if any(contains_phrase(window, t) for t in triggers.hypothetical):
            continue
        if any(contains_phrase(window, t) for t in triggers.experiencer):
            continue
        kept.append(cand)
    return kept
