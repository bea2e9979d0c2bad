"""Regenerate the committed test fixtures under tests/data.

The fixture corpus is six short notes with hand-placed mentions; this script
computes the mention offsets, cross-checks them against a real extraction
run (so the committed gold file can never drift from the matcher), and
writes the gold mention CSV plus a synthetic ontology-matching judgment file
with 83/95 unique and 876/1073 mention-weighted correct pairs.

Run from the repository root:  python3 scripts/make_test_fixtures.py
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

from rarephen import nerl, pipeline as pl
from rarephen.ontology import load_store

DATA = Path(__file__).resolve().parent.parent / "tests" / "data"

DOCS = [
    {
        "doc_id": "d1",
        "admission_id": "A1",
        "text": (
            "Past Medical History:\n1. h/o of rheumatic fever with Sydenham chorea\n"
            "2. hypertension\n\nHospital Course:\nCT scan on HD9 showed stable findings. "
            "A temporary HD line was pulled."
        ),
    },
    {
        "doc_id": "d2",
        "admission_id": "A1",
        "text": (
            "Chief Complaint:\nchorea\n\nPast Medical History:\nhuntington disease diagnosed "
            "1998 with genetic confirmation\n\nFamily History:\nMother with huntington disease."
        ),
    },
    {
        "doc_id": "d3",
        "admission_id": "A2",
        "text": (
            "Hospital Course:\nUrinary legionella antigen was also negative today in final "
            "culture review. The RP bleed stabilized after 48 hrs."
        ),
    },
    {
        "doc_id": "d4",
        "admission_id": "A2",
        "text": (
            "Pertinent Results:\nPrior chest CT suggesting a propensity to "
            "tracheobronchomalacia was reviewed.\n\nDischarge Diagnosis:\nretinitis pigmentosa"
        ),
    },
    {
        "doc_id": "d5",
        "admission_id": "A3",
        "text": (
            "Past Medical History:\nprogressive multifocal leukoencephalopathy with PML noted "
            "previously. Acute rheumatic fever in childhood."
        ),
    },
    {
        "doc_id": "d6",
        "admission_id": None,
        "text": (
            "Hospital Course:\nCalciphylaxis lesions were debrided. Necrotizing enterocolitis "
            "was managed conservatively in the neonate. Asbestosis noted on imaging."
        ),
    },
]

# surviving mentions in document order: (doc_id, literal surface, gold label, ordo)
GOLD_PLAN = [
    ("d1", "rheumatic fever", 1, "Orphanet_3099"),
    ("d1", "HD", 0, "Orphanet_399"),
    ("d2", "huntington disease", 1, "Orphanet_399"),
    ("d3", "RP", 0, "Orphanet_791"),
    ("d4", "retinitis pigmentosa", 1, "Orphanet_791"),
    ("d5", "progressive multifocal leukoencephalopathy", 1, "Orphanet_217260"),
    ("d5", "PML", 1, "Orphanet_217260"),
    ("d5", "Acute rheumatic fever", 1, "Orphanet_3099"),
    ("d6", "Calciphylaxis", 1, "Orphanet_280062"),
    ("d6", "Necrotizing enterocolitis", 1, "Orphanet_391673"),
    ("d6", "Asbestosis", 0, "Orphanet_2302"),
]


def write_corpus() -> None:
    with open(DATA / "corpus.jsonl", "w", encoding="utf-8") as handle:
        for doc in DOCS:
            handle.write(json.dumps(doc, ensure_ascii=False, sort_keys=True) + "\n")


def write_triggers() -> None:
    cfg = nerl.TriggerConfig()
    payload = {
        "negation": list(cfg.negation),
        "hypothetical": list(cfg.hypothetical),
        "experiencer": list(cfg.experiencer),
        "section_headers": [list(pair) for pair in cfg.section_headers],
    }
    (DATA / "triggers.json").write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def write_gold() -> None:
    store = load_store(
        ordo_umls=DATA / "ontology/ordo_umls.tsv",
        ordo_icd10=DATA / "ontology/ordo_icd10.tsv",
        icd9_icd10=DATA / "ontology/icd9_icd10.tsv",
        icd9_umls=DATA / "ontology/icd9_umls.tsv",
        ordo_meta=DATA / "ontology/ordo_meta.tsv",
    )
    dictionary = nerl.build_dictionary(store, nerl.read_synonym_rows(DATA / "ontology/synonyms.tsv"))
    matcher = nerl.build_matcher(dictionary)
    triggers = nerl.TriggerConfig.from_json(DATA / "triggers.json")
    docs = pl.load_corpus(DATA / "corpus.jsonl")
    for doc in docs:
        doc.sections = nerl.split_sections(doc.text, triggers.section_headers)
    prior = nerl.build_prior(docs, matcher)
    survivors = []
    for doc in docs:
        cands = nerl.extract_candidates(doc, matcher, prior)
        survivors.extend(nerl.apply_context_filters(cands, triggers))

    texts = {d["doc_id"]: d["text"] for d in DOCS}
    rows = []
    for doc_id, surface, label, ordo in GOLD_PLAN:
        start = _find_standalone(texts[doc_id], surface)
        assert start >= 0, f"{surface!r} not found standalone in {doc_id}"
        rows.append((doc_id, start, start + len(surface), surface, label, ordo))

    planned = {(d, s, e) for d, s, e, *_ in rows}
    extracted = {(c.doc_id, c.m_start, c.m_end) for c in survivors}
    assert planned == extracted, (
        f"fixture drift:\n  planned-only={sorted(planned - extracted)}\n"
        f"  extracted-only={sorted(extracted - planned)}"
    )

    cui_by_span = {(c.doc_id, c.m_start, c.m_end): c.cui for c in survivors}
    with open(DATA / "gold_mentions.csv", "w", encoding="utf-8") as handle:
        handle.write("doc_id,m_start,m_end,cui,label_umls,ordo_id,label_ordo\n")
        for doc_id, start, end, _surface, label, ordo in rows:
            cui = cui_by_span[(doc_id, start, end)]
            handle.write(f"{doc_id},{start},{end},{cui},{label},{ordo},{label}\n")
    print(f"gold: {len(rows)} rows ({sum(r[4] for r in rows)} positive)")


def _find_standalone(text: str, surface: str) -> int:
    """First occurrence not embedded in an alphanumeric run."""
    pos = 0
    while True:
        i = text.find(surface, pos)
        if i < 0:
            return -1
        j = i + len(surface)
        left_ok = i == 0 or not (text[i - 1].isalnum() and text[i].isalnum())
        right_ok = j == len(text) or not (text[j - 1].isalnum() and text[j].isalnum())
        if left_ok and right_ok:
            return i
        pos = i + 1


def write_match_judgments() -> None:
    """95 unique pairs, 83 correct; mention counts 1073 total, 876 correct."""
    rows = []
    for i in range(95):
        cui = f"C05{i:05d}"
        ordo = f"Orphanet_5{i:04d}"
        if i < 83:
            n = 56 if i == 0 else 10
            correct = 1
        else:
            n = 21 if i == 83 else 16
            correct = 0
        rows.append((cui, ordo, n, correct))
    total = sum(r[2] for r in rows)
    correct_total = sum(r[2] for r in rows if r[3])
    assert (total, correct_total) == (1073, 876), (total, correct_total)
    with open(DATA / "match_judgments.csv", "w", encoding="utf-8") as handle:
        handle.write("cui,ordo_id,n_mentions,correct\n")
        for cui, ordo, n, correct in rows:
            handle.write(f"{cui},{ordo},{n},{correct}\n")
    print(f"judgments: 95 pairs, {total} mentions")


if __name__ == "__main__":
    write_corpus()
    write_triggers()
    write_gold()
    write_match_judgments()
    print("fixtures written to", DATA)
    sys.exit(0)
