"""Ontology mapping tables and rare-disease concept lookups.

Loads flat TSV extracts of the ORDO<->UMLS and ORDO<->ICD-10 correspondence
tables, ICD-9<->ICD-10 and ICD-9<->UMLS code pairs, and ORDO concept
metadata, then answers three questions:

  * which UMLS concepts denote rare diseases (rare_umls_set),
  * which ORDO concepts a UMLS concept maps to (umls_to_ordo),
  * which ORDO concepts an ICD-9 code reaches through either the ICD-10 or
    the UMLS route (icd9_to_ordo).

Correspondences carry one of three relations: E (exact), BTNT (broader term
to narrower term), NTBT (narrower term to broader term). Phenotyping keeps
E and BTNT only; NTBT links point at broader, usually non-rare concepts.
ORDO concepts flagged as a group of disorders are excluded everywhere
("isNotGroupOfDisorders" filter).
"""

from __future__ import annotations

import csv
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .errors import OntologyLoadError

log = logging.getLogger(__name__)

UMLS = "UMLS-CUI"
ORDO = "ORDO"
ICD10 = "ICD10"
ICD9 = "ICD9"

RELATIONS = frozenset({"E", "BTNT", "NTBT"})
PHENOTYPING_RELATIONS = frozenset({"E", "BTNT"})

_UMLS_RE = re.compile(r"^C\d{7}$")
_ORDO_RE = re.compile(r"^Orphanet_\d+$")


@dataclass(frozen=True)
class ConceptId:
    """A concept identifier in one coding scheme; equality is exact on
    (scheme, code)."""

    scheme: str
    code: str

    def __post_init__(self):
        if self.scheme not in (UMLS, ORDO, ICD10, ICD9):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if not self.code:
            raise ValueError("empty concept code")
        if self.scheme == UMLS and not _UMLS_RE.match(self.code):
            raise ValueError(f"malformed UMLS CUI {self.code!r}")
        if self.scheme == ORDO and not _ORDO_RE.match(self.code):
            raise ValueError(f"malformed ORDO id {self.code!r}")

    @classmethod
    def umls(cls, code: str) -> "ConceptId":
        return cls(UMLS, code)

    @classmethod
    def ordo(cls, code: str) -> "ConceptId":
        return cls(ORDO, code)

    @classmethod
    def icd10(cls, code: str) -> "ConceptId":
        return cls(ICD10, code)

    @classmethod
    def icd9(cls, code: str) -> "ConceptId":
        return cls(ICD9, code)


@dataclass(frozen=True)
class MappingTriple:
    source: ConceptId
    target: ConceptId
    relation: str

    def __post_init__(self):
        if self.relation not in RELATIONS:
            raise ValueError(f"unknown relation {self.relation!r}")


@dataclass(frozen=True)
class OrdoMeta:
    ordo_id: ConceptId
    preferred_label: str
    is_group_of_disorders: bool


@dataclass(frozen=True)
class OntologyStore:
    """Immutable after load; all lookups are pure functions of the tables.

    Indexes are precomputed with the phenotyping relation set (E, BTNT) and
    the group-of-disorders filter already applied.
    """

    ordo_umls: frozenset[MappingTriple]
    ordo_icd10: frozenset[MappingTriple]
    icd9_icd10: dict[str, frozenset[str]]
    icd9_umls: dict[str, frozenset[str]]
    ordo_meta: dict[str, OrdoMeta]
    _umls_index: dict[str, frozenset[str]] = field(repr=False, default_factory=dict)
    _icd10_index: dict[str, frozenset[str]] = field(repr=False, default_factory=dict)

    def _is_group(self, ordo_code: str) -> bool:
        meta = self.ordo_meta.get(ordo_code)
        return meta is not None and meta.is_group_of_disorders

    def rare_umls_set(self) -> frozenset[ConceptId]:
        """UMLS concepts reachable from a non-group ORDO concept by E or BTNT."""
        return frozenset(ConceptId.umls(code) for code in self._umls_index)

    def rare_umls_codes(self) -> frozenset[str]:
        return frozenset(self._umls_index)

    def umls_to_ordo(self, cui: ConceptId) -> frozenset[ConceptId]:
        if cui.scheme != UMLS:
            raise ValueError(f"expected a UMLS CUI, got scheme {cui.scheme!r}")
        return frozenset(ConceptId.ordo(c) for c in self._umls_index.get(cui.code, ()))

    def umls_code_to_ordo_codes(self, cui_code: str) -> frozenset[str]:
        return self._umls_index.get(cui_code, frozenset())

    def icd9_to_ordo(self, code: ConceptId) -> frozenset[ConceptId]:
        """Union of ICD-9 -> ICD-10 -> ORDO and ICD-9 -> UMLS -> ORDO."""
        if code.scheme != ICD9:
            raise ValueError(f"expected an ICD-9 code, got scheme {code.scheme!r}")
        ordo_codes: set[str] = set()
        for icd10_code in self.icd9_icd10.get(code.code, ()):
            ordo_codes.update(self._icd10_index.get(icd10_code, ()))
        for cui_code in self.icd9_umls.get(code.code, ()):
            ordo_codes.update(self._umls_index.get(cui_code, ()))
        return frozenset(ConceptId.ordo(c) for c in sorted(ordo_codes))


def _phenotyping_index(triples: Iterable[MappingTriple], store_meta: dict[str, OrdoMeta]) -> dict[str, frozenset[str]]:
    """target code -> ORDO codes linked by E/BTNT with non-group ORDO side."""
    index: dict[str, set[str]] = {}
    for t in triples:
        if t.relation not in PHENOTYPING_RELATIONS:
            continue
        meta = store_meta.get(t.source.code)
        if meta is not None and meta.is_group_of_disorders:
            continue
        index.setdefault(t.target.code, set()).add(t.source.code)
    return {k: frozenset(v) for k, v in index.items()}


def _read_tsv(path: str | Path, n_cols: int) -> Iterable[tuple[int, list[str]]]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise OntologyLoadError(path, 0, f"cannot read file: {exc}") from exc
    reader = csv.reader(text.splitlines(), delimiter="\t")
    rows = list(reader)
    if not rows:
        raise OntologyLoadError(path, 1, "missing header row")
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != n_cols:
            raise OntologyLoadError(path, lineno, f"expected {n_cols} tab-separated columns, got {len(row)}")
        yield lineno, [cell.strip() for cell in row]


def _load_triples(path: str | Path, target_scheme: str) -> frozenset[MappingTriple]:
    triples = set()
    for lineno, (ordo_code, other_code, relation) in _read_tsv(path, 3):
        if relation not in RELATIONS:
            raise OntologyLoadError(path, lineno, f"unknown relation {relation!r}")
        try:
            triples.add(MappingTriple(ConceptId.ordo(ordo_code), ConceptId(target_scheme, other_code), relation))
        except ValueError as exc:
            raise OntologyLoadError(path, lineno, str(exc)) from exc
    return frozenset(triples)


def _load_pairs(path: str | Path) -> dict[str, frozenset[str]]:
    pairs: dict[str, set[str]] = {}
    for _lineno, (left, right) in _read_tsv(path, 2):
        pairs.setdefault(left, set()).add(right)
    return {k: frozenset(v) for k, v in pairs.items()}


def _load_meta(path: str | Path) -> dict[str, OrdoMeta]:
    meta: dict[str, OrdoMeta] = {}
    for lineno, (ordo_code, label, flag) in _read_tsv(path, 3):
        if flag not in ("0", "1"):
            raise OntologyLoadError(path, lineno, f"is_group_of_disorders must be 0 or 1, got {flag!r}")
        try:
            meta[ordo_code] = OrdoMeta(ConceptId.ordo(ordo_code), label, flag == "1")
        except ValueError as exc:
            raise OntologyLoadError(path, lineno, str(exc)) from exc
    return meta


def load_store(
    ordo_umls: str | Path,
    ordo_icd10: str | Path,
    icd9_icd10: str | Path,
    icd9_umls: str | Path,
    ordo_meta: str | Path,
) -> OntologyStore:
    """Load the five mapping files and build the filtered lookup indexes.
    Duplicate rows collapse to single triples."""
    meta = _load_meta(ordo_meta)
    umls_triples = _load_triples(ordo_umls, UMLS)
    icd10_triples = _load_triples(ordo_icd10, ICD10)
    return OntologyStore(
        ordo_umls=umls_triples,
        ordo_icd10=icd10_triples,
        icd9_icd10=_load_pairs(icd9_icd10),
        icd9_umls=_load_pairs(icd9_umls),
        ordo_meta=meta,
        _umls_index=_phenotyping_index(umls_triples, meta),
        _icd10_index=_phenotyping_index(icd10_triples, meta),
    )


def parse_icd9_code(raw: str) -> ConceptId | None:
    """Lenient ICD-9 parsing for coded admission data: blank or unusable
    codes are skipped with a warning rather than failing the run."""
    code = raw.strip()
    if not code:
        log.warning("skipping empty ICD-9 code")
        return None
    try:
        return ConceptId.icd9(code)
    except ValueError:
        log.warning("skipping unparseable ICD-9 code %r", raw)
        return None
