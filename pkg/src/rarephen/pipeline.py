"""End-to-end orchestration.

Per-document inference runs the whole chain: dictionary matching with
corpus-prior disambiguation, context filtering, contextual mention pooling,
phenotype-confirmation scoring, and UMLS-to-ORDO mapping, yielding one ORDO
set per document plus per-mention evidence. Corpus-level entry points cover
weak training-data creation, weak vs strong model training, admission-level
aggregation, and the ICD-9 code baseline.
"""

from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import model as model_mod
from . import nerl, weaklabel
from .errors import DataFormatError, EmptyCandidateSetError
from .model import LogRegModel, TrainConfig
from .nerl import Document, MentionCandidate, TriggerConfig
from .ontology import OntologyStore, load_store, parse_icd9_code
from .represent import (
    EncodingOptions,
    HashEmbeddingProvider,
    RemoteEmbeddingProvider,
    encode_mention,
)
from .weaklabel import WeakDataset, WeakRuleParams

log = logging.getLogger(__name__)

FREQ_SCOPE_FILTERED = "filtered"
FREQ_SCOPE_PREFILTER = "prefilter"


# -- configuration -------------------------------------------------------------


@dataclass
class OntologyPaths:
    ordo_umls: str
    ordo_icd10: str
    icd9_icd10: str
    icd9_umls: str
    ordo_meta: str
    synonyms: str

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, row: Mapping) -> "OntologyPaths":
        missing = [k for k in ("ordo_umls", "ordo_icd10", "icd9_icd10", "icd9_umls", "ordo_meta", "synonyms") if k not in row]
        if missing:
            raise DataFormatError(f"config key 'ontology' is missing {missing}")
        return cls(**{k: str(row[k]) for k in cls.__dataclass_fields__})


@dataclass
class ProviderConfig:
    kind: str = "baseline"  # baseline | remote
    dim: int = 64
    url: str | None = None
    timeout: float = 10.0
    max_in_flight: int = 4
    batch_size: int = 16

    def __post_init__(self):
        if self.kind not in ("baseline", "remote"):
            raise DataFormatError(f"provider kind must be baseline or remote, got {self.kind!r}")
        if self.kind == "remote" and not self.url:
            raise DataFormatError("provider.url is required when provider is remote")

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class PipelineConfig:
    corpus: str
    ontology: OntologyPaths
    triggers: str | None = None
    rules: WeakRuleParams = field(default_factory=WeakRuleParams)
    freq_scope: str = FREQ_SCOPE_FILTERED
    encoding: EncodingOptions = field(default_factory=EncodingOptions)
    provider: ProviderConfig = field(default_factory=ProviderConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    seed: int = 13

    def snapshot(self) -> dict:
        """Canonical dict form, used for manifests and the params hash."""
        return {
            "corpus": self.corpus,
            "ontology": self.ontology.to_dict(),
            "triggers": self.triggers,
            "rules": {"l": self.rules.l, "p": self.rules.p, "freq_scope": self.freq_scope},
            "encoding": {
                "mask": self.encoding.mask_mention,
                "use_structure": self.encoding.use_structure,
                "window": self.encoding.window_tokens,
            },
            "provider": self.provider.to_dict(),
            "train": self.train.to_dict(),
            "seed": self.seed,
        }

    def params_hash(self) -> str:
        blob = json.dumps(self.snapshot(), sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()[:16]

    def validate_files(self) -> None:
        paths = {"corpus": self.corpus, **{f"ontology.{k}": v for k, v in self.ontology.to_dict().items()}}
        if self.triggers:
            paths["triggers"] = self.triggers
        for key, value in paths.items():
            if not Path(value).is_file():
                raise DataFormatError(f"config key {key!r} points at a missing file: {value}")

    @classmethod
    def from_json(cls, path: str | Path) -> "PipelineConfig":
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise DataFormatError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(raw, base_dir=Path(path).parent)

    @classmethod
    def from_dict(cls, raw: Mapping, base_dir: Path | None = None) -> "PipelineConfig":
        def resolve(p):
            if p is None:
                return None
            p = str(p)
            if base_dir is not None and not Path(p).is_absolute():
                return str(base_dir / p)
            return p

        if "corpus" not in raw or "ontology" not in raw:
            raise DataFormatError("config must define 'corpus' and 'ontology'")
        seed = int(raw.get("seed", 13))
        rules_raw = raw.get("rules", {})
        enc_raw = raw.get("encoding", {})
        train_raw = dict(raw.get("train", {}))
        train_raw.setdefault("seed", seed)
        ontology = OntologyPaths.from_dict({k: resolve(v) for k, v in dict(raw["ontology"]).items()})
        freq_scope = rules_raw.get("freq_scope", FREQ_SCOPE_FILTERED)
        if freq_scope not in (FREQ_SCOPE_FILTERED, FREQ_SCOPE_PREFILTER):
            raise DataFormatError(f"rules.freq_scope must be filtered or prefilter, got {freq_scope!r}")
        return cls(
            corpus=resolve(raw["corpus"]),
            ontology=ontology,
            triggers=resolve(raw.get("triggers")),
            rules=WeakRuleParams(
                l=int(rules_raw.get("l", weaklabel.DEFAULT_LENGTH_THRESHOLD)),
                p=float(rules_raw.get("p", weaklabel.DEFAULT_PREVALENCE_THRESHOLD)),
            ),
            freq_scope=freq_scope,
            encoding=EncodingOptions(
                mask_mention=bool(enc_raw.get("mask", False)),
                use_structure=bool(enc_raw.get("use_structure", True)),
                window_tokens=int(enc_raw.get("window", nerl.DEFAULT_WINDOW_TOKENS)),
            ),
            provider=ProviderConfig(
                kind=raw.get("provider", {}).get("kind", "baseline"),
                dim=int(raw.get("provider", {}).get("dim", 64)),
                url=raw.get("provider", {}).get("url"),
                timeout=float(raw.get("provider", {}).get("timeout", 10.0)),
                max_in_flight=int(raw.get("provider", {}).get("max_in_flight", 4)),
                batch_size=int(raw.get("provider", {}).get("batch_size", 16)),
            ),
            train=TrainConfig.from_dict(train_raw),
            seed=seed,
        )


def make_provider(config: PipelineConfig):
    if config.provider.kind == "baseline":
        return HashEmbeddingProvider(dim=config.provider.dim, seed=config.seed)
    provider = RemoteEmbeddingProvider(
        base_url=config.provider.url,
        dim=config.provider.dim,
        timeout=config.provider.timeout,
        max_in_flight=config.provider.max_in_flight,
        batch_size=config.provider.batch_size,
    )
    provider.check_health()
    return provider


# -- corpus io -------------------------------------------------------------------


def load_corpus(path: str | Path) -> list[Document]:
    """Corpus JSONL: one object per line with doc_id, optional admission_id,
    and text."""
    docs: list[Document] = []
    seen: set[str] = set()
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataFormatError(f"cannot read corpus {path}: {exc}") from exc
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
            doc = Document(
                doc_id=str(row["doc_id"]),
                text=str(row["text"]),
                admission_id=None if row.get("admission_id") is None else str(row["admission_id"]),
            )
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise DataFormatError(f"{path}:{lineno}: bad corpus row: {exc}") from exc
        if doc.doc_id in seen:
            raise DataFormatError(f"{path}:{lineno}: duplicate doc_id {doc.doc_id!r}")
        seen.add(doc.doc_id)
        docs.append(doc)
    return docs


def write_jsonl(path: str | Path, rows: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for row in rows:
            handle.write(json.dumps(row, sort_keys=True, ensure_ascii=False, separators=(",", ":")))
            handle.write("\n")


def read_jsonl(path: str | Path) -> list[dict]:
    rows = []
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataFormatError(f"cannot read {path}: {exc}") from exc
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            rows.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"{path}:{lineno}: bad JSON: {exc}") from exc
    return rows


# -- results types ---------------------------------------------------------------


@dataclass
class Evidence:
    candidate: MentionCandidate
    probability: float
    ordo_ids: tuple[str, ...]

    def to_dict(self) -> dict:
        row = self.candidate.to_dict()
        row["probability"] = self.probability
        row["ordo_ids"] = list(self.ordo_ids)
        row["unmapped"] = not self.ordo_ids
        return row


@dataclass
class ScoredCandidate:
    candidate: MentionCandidate
    probability: float
    accepted: bool
    ordo_ids: tuple[str, ...]

    def to_dict(self) -> dict:
        row = self.candidate.to_dict()
        row["probability"] = self.probability
        row["accepted"] = self.accepted
        row["ordo_ids"] = list(self.ordo_ids)
        return row

    def to_evidence(self) -> Evidence:
        return Evidence(self.candidate, self.probability, self.ordo_ids)


@dataclass
class DocInference:
    doc_id: str
    admission_id: str | None
    ordo_ids: frozenset[str]
    evidence: list[Evidence]


@dataclass
class AdmissionResult:
    admission_id: str
    ordo_ids: frozenset[str]
    evidence: list[Evidence]

    def to_dict(self) -> dict:
        return {
            "admission_id": self.admission_id,
            "ordo": sorted(self.ordo_ids),
            "evidence": [e.to_dict() for e in self.evidence],
        }


@dataclass
class ExtractionResult:
    candidates: list[MentionCandidate]  # after context filtering
    prefilter_candidates: list[MentionCandidate]
    prior: dict[str, dict[str, int]]


# -- the pipeline ----------------------------------------------------------------


class Pipeline:
    """Loads the ontology store, dictionary, matcher, triggers, and embedding
    provider once; all methods then share that immutable state."""

    def __init__(self, config: PipelineConfig, store: OntologyStore | None = None, provider=None):
        self.config = config
        self.store = store or load_store(
            ordo_umls=config.ontology.ordo_umls,
            ordo_icd10=config.ontology.ordo_icd10,
            icd9_icd10=config.ontology.icd9_icd10,
            icd9_umls=config.ontology.icd9_umls,
            ordo_meta=config.ontology.ordo_meta,
        )
        self.triggers = TriggerConfig.from_json(config.triggers) if config.triggers else TriggerConfig()
        synonym_rows = nerl.read_synonym_rows(config.ontology.synonyms)
        self.dictionary = nerl.build_dictionary(self.store, synonym_rows)
        self.matcher = nerl.build_matcher(self.dictionary)
        self.provider = provider or make_provider(config)

    # -- extraction --

    def attach_sections(self, docs: Sequence[Document]) -> None:
        for doc in docs:
            doc.sections = nerl.split_sections(doc.text, self.triggers.section_headers)

    def extract_corpus(self, docs: Sequence[Document]) -> ExtractionResult:
        """Two passes: corpus prior from raw matches, then candidate
        extraction and context filtering. Candidates come out ordered by
        (document order, m_start), so reruns are byte-identical."""
        self.attach_sections(docs)
        prior = nerl.build_prior(docs, self.matcher)
        prefilter: list[MentionCandidate] = []
        filtered: list[MentionCandidate] = []
        for doc in docs:
            cands = nerl.extract_candidates(
                doc, self.matcher, prior, window_tokens=self.config.encoding.window_tokens
            )
            prefilter.extend(cands)
            filtered.extend(nerl.apply_context_filters(cands, self.triggers))
        return ExtractionResult(candidates=filtered, prefilter_candidates=prefilter, prior=prior)

    # -- weak data and training --

    def create_weak_training_data(self, docs: Sequence[Document]) -> WeakDataset:
        extraction = self.extract_corpus(docs)
        if not extraction.candidates:
            raise EmptyCandidateSetError("corpus produced no mention candidates")
        freq_candidates = (
            extraction.prefilter_candidates
            if self.config.freq_scope == FREQ_SCOPE_PREFILTER
            else None
        )
        return weaklabel.weak_label(extraction.candidates, self.config.rules, freq_candidates=freq_candidates)

    def mention_vectors(self, candidates: Sequence[MentionCandidate], threads: int = 1) -> np.ndarray:
        """Embed and pool every candidate; rows align with the input order."""
        if not candidates:
            return np.zeros((0, self.provider.dim))

        def encode_chunk(chunk: Sequence[MentionCandidate]) -> list[np.ndarray]:
            return [
                encode_mention(
                    cand.context,
                    (cand.mention_start_in_context, cand.mention_end_in_context),
                    cand.structure_name,
                    self.provider,
                    self.config.encoding,
                ).values
                for cand in chunk
            ]

        if threads <= 1 or len(candidates) < 2 * threads:
            rows = encode_chunk(candidates)
        else:
            size = (len(candidates) + threads - 1) // threads
            chunks = [candidates[i : i + size] for i in range(0, len(candidates), size)]
            with ThreadPoolExecutor(max_workers=threads) as pool:
                rows = [vec for part in pool.map(encode_chunk, chunks) for vec in part]
        return np.stack(rows)

    def _train(self, pairs: Sequence[tuple[MentionCandidate, int]], kind: str, threads: int = 1) -> LogRegModel:
        candidates = [c for c, _ in pairs]
        labels = np.array([y for _, y in pairs], dtype=float)
        X = self.mention_vectors(candidates, threads=threads)
        provenance = {
            "training_kind": kind,
            "params_hash": self.config.params_hash(),
            "provider_id": self.provider.provider_id,
            "options": self.config.encoding.to_dict(),
        }
        return model_mod.train(X, labels, self.config.train, provenance=provenance)

    def train_weak_model(self, weak: WeakDataset, threads: int = 1) -> LogRegModel:
        return self._train(weak.labeled, "weak", threads=threads)

    def train_strong_model(
        self, gold_pairs: Sequence[tuple[MentionCandidate, int]], cap: int | None = None, threads: int = 1
    ) -> LogRegModel:
        pairs = list(gold_pairs[:cap]) if cap else list(gold_pairs)
        return self._train(pairs, "strong", threads=threads)

    # -- inference --

    def score_candidates(
        self, candidates: Sequence[MentionCandidate], mdl: LogRegModel, threads: int = 1
    ) -> list[ScoredCandidate]:
        """Probability, 0.5-threshold decision, and ORDO mapping for every
        candidate (the mapping is attached only to accepted ones)."""
        X = self.mention_vectors(candidates, threads=threads)
        scored = []
        for cand, row in zip(candidates, X):
            prob = model_mod.predict(mdl, row)
            accepted = prob >= 0.5
            ordo = tuple(sorted(self.store.umls_code_to_ordo_codes(cand.cui))) if accepted else ()
            scored.append(ScoredCandidate(cand, prob, accepted, ordo))
        return scored

    def infer_document(
        self,
        doc: Document,
        mdl: LogRegModel,
        prior: dict[str, dict[str, int]] | None = None,
    ) -> DocInference:
        """Full chain on one document. Without an explicit corpus prior the
        document itself is the prior scope."""
        self.attach_sections([doc])
        if prior is None:
            prior = nerl.build_prior([doc], self.matcher)
        cands = nerl.extract_candidates(doc, self.matcher, prior, self.config.encoding.window_tokens)
        cands = nerl.apply_context_filters(cands, self.triggers)
        scored = self.score_candidates(cands, mdl)
        evidence = [s.to_evidence() for s in scored if s.accepted]
        ordo_ids = frozenset(code for ev in evidence for code in ev.ordo_ids)
        return DocInference(doc.doc_id, doc.admission_id, ordo_ids, evidence)

    def infer_corpus(
        self, docs: Sequence[Document], mdl: LogRegModel, threads: int = 1
    ) -> tuple[list[ScoredCandidate], list[AdmissionResult]]:
        """Returns (all scored candidates, admission-level results)."""
        extraction = self.extract_corpus(docs)
        scored = self.score_candidates(extraction.candidates, mdl, threads=threads)
        by_doc: dict[str, DocInference] = {}
        for doc in docs:
            by_doc[doc.doc_id] = DocInference(doc.doc_id, doc.admission_id, frozenset(), [])
        for s in scored:
            if not s.accepted:
                continue
            inf = by_doc[s.candidate.doc_id]
            inf.evidence.append(s.to_evidence())
            inf.ordo_ids = inf.ordo_ids | frozenset(s.ordo_ids)
        admissions = aggregate_admissions(by_doc.values())
        return scored, admissions


def aggregate_admissions(doc_results: Iterable[DocInference]) -> list[AdmissionResult]:
    """Union per admission; documents without an admission id aggregate under
    their own doc id. Deterministic ordering by admission id."""
    grouped: dict[str, AdmissionResult] = {}
    for inf in doc_results:
        key = inf.admission_id or inf.doc_id
        if key not in grouped:
            grouped[key] = AdmissionResult(key, frozenset(), [])
        result = grouped[key]
        result.ordo_ids = result.ordo_ids | inf.ordo_ids
        result.evidence.extend(inf.evidence)
    for result in grouped.values():
        result.evidence.sort(key=lambda ev: (ev.candidate.doc_id, ev.candidate.m_start))
    return [grouped[k] for k in sorted(grouped)]


# -- ICD baseline ------------------------------------------------------------------


def read_admission_icd_csv(path: str | Path) -> dict[str, list[str]]:
    """Admission ICD CSV: admission_id,icd9_code (one code per row)."""
    import csv as csv_mod

    table: dict[str, list[str]] = {}
    try:
        with open(path, newline="", encoding="utf-8") as handle:
            reader = csv_mod.DictReader(handle)
            if reader.fieldnames is None or not {"admission_id", "icd9_code"} <= set(reader.fieldnames):
                raise DataFormatError(f"{path}: expected columns admission_id,icd9_code")
            for row in reader:
                table.setdefault(row["admission_id"], []).append(row["icd9_code"])
    except OSError as exc:
        raise DataFormatError(f"cannot read admission ICD file {path}: {exc}") from exc
    return table


def icd_admission_baseline(
    admission_codes: Mapping[str, Sequence[str]], store: OntologyStore
) -> dict[str, frozenset[str]]:
    """ORDO set per admission from coded data alone; unusable codes are
    skipped with a warning."""
    out: dict[str, frozenset[str]] = {}
    for admission_id, codes in admission_codes.items():
        ordo: set[str] = set()
        for raw in codes:
            concept = parse_icd9_code(raw)
            if concept is None:
                continue
            ordo.update(c.code for c in store.icd9_to_ordo(concept))
        out[admission_id] = frozenset(ordo)
    return out


def merge_admission_ordo(
    a: Mapping[str, frozenset[str]], b: Mapping[str, frozenset[str]]
) -> dict[str, frozenset[str]]:
    """Per-admission union of two ORDO assignments (e.g. NLP plus ICD)."""
    return {
        adm: frozenset(a.get(adm, frozenset())) | frozenset(b.get(adm, frozenset()))
        for adm in set(a) | set(b)
    }


def compare_icd_nlp(
    nlp: Mapping[str, frozenset[str]], icd: Mapping[str, frozenset[str]]
) -> dict[str, dict[str, int]]:
    """Per-ORDO admission counts split into NLP-only / ICD-only / both."""
    labels = {code for sets in (nlp, icd) for s in sets.values() for code in s}
    out: dict[str, dict[str, int]] = {}
    for label in sorted(labels):
        nlp_adms = {adm for adm, s in nlp.items() if label in s}
        icd_adms = {adm for adm, s in icd.items() if label in s}
        out[label] = {
            "nlp_only": len(nlp_adms - icd_adms),
            "icd_only": len(icd_adms - nlp_adms),
            "both": len(nlp_adms & icd_adms),
        }
    return out
