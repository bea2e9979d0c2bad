"""Synthetic desk-scale corpus with planted mentions and known labels.

Generates a few hundred note-like documents containing long-form
rare-disease mentions in diagnostic contexts (true phenotypes), ambiguous
short-form mentions in device/medication/telemetry contexts (false
positives for a dictionary matcher), plus a handful of negated,
hypothetical, and family-history plants that the context filters must drop.
Every planted span is registered with its intended label so extraction
output can be turned into a gold standard, and matching ontology tables,
synonym rows, admission ICD codes, and a run config are emitted alongside.

The long/short split is arranged so that, at the default rule thresholds,
long forms are weak-labelled positive, short forms weak-labelled negative,
one frequent long form stays unlabelled (rules disagree, gold true), and one
rare short form stays unlabelled (gold false).
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path

from .nerl import Document

CORE_DISEASES = (
    "alkaptonuria",
    "fabry disease",
    "gaucher disease",
    "pompe disease",
    "marfan syndrome",
    "noonan syndrome",
    "alport syndrome",
    "behcet disease",
    "castleman disease",
    "erdheim chester disease",
    "hereditary angioedema",
    "kawasaki disease",
    "moyamoya disease",
    "niemann pick disease",
    "osteogenesis imperfecta",
    "phenylketonuria",
    "prader willi syndrome",
    "rett syndrome",
    "sturge weber syndrome",
    "takayasu arteritis",
    "tuberous sclerosis",
    "von hippel lindau disease",
    "williams syndrome",
    "zellweger syndrome",
    "fibrodysplasia ossificans progressiva",
    "eosinophilic granulomatosis",
    "lambert eaton syndrome",
    "mccune albright syndrome",
    "ollier disease",
    "peutz jeghers syndrome",
    "stiff person syndrome",
    "susac syndrome",
    "thromboangiitis obliterans",
    "whipple disease",
    "wolman disease",
    "x linked agammaglobulinemia",
    "young simpson syndrome",
    "familial mediterranean fever",
    "hirschsprung disease",
    "kearns sayre syndrome",
)

UNSEEN_TRUE_DISEASE = "wilson disease"  # frequent enough that the rules disagree

SHORT_FORMS = ("hd", "rp", "pml")  # ambiguous abbreviations, one negative doc flavor each
UNSEEN_FALSE_SHORT = "ema"  # rare short form: rules disagree, gold false

POSITIVE_COURSES = (
    "Vitals remained stable throughout the stay.",
    "Plan for outpatient followup in two weeks.",
    "Tolerated a regular diet on the day of discharge.",
    "Physical therapy cleared the patient for home.",
)

NEGATIVE_BODIES = {
    "hd": (
        "A temporary HD line was placed at the bedside and later pulled.",
        "Continued HD sessions three times weekly per the renal service.",
    ),
    "rp": (
        "The RP drain output remained minimal overnight.",
        "Serial checks of the RP region showed stable findings.",
    ),
    "pml": (
        "Telemetry captured paced PML complexes twice overnight.",
        "The PML reading normalized after lead repositioning.",
    ),
}

EMA_BODY = "Immunostains for EMA and cd34 were examined by pathology."

HEADER = "Admission Note\n\nChief Complaint:\nshortness of breath\n\n"


@dataclass
class PlantedSpan:
    doc_id: str
    start: int
    end: int
    label: bool  # true phenotype or planted false positive


@dataclass
class Workspace:
    docs: list[Document] = field(default_factory=list)
    planted: dict[tuple[str, int, int], bool] = field(default_factory=dict)
    filtered_spans: set[tuple[str, int, int]] = field(default_factory=set)
    synonym_rows: list[tuple[str, str]] = field(default_factory=list)
    ordo_umls_rows: list[tuple[str, str, str]] = field(default_factory=list)
    ordo_icd10_rows: list[tuple[str, str, str]] = field(default_factory=list)
    icd9_icd10_rows: list[tuple[str, str]] = field(default_factory=list)
    icd9_umls_rows: list[tuple[str, str]] = field(default_factory=list)
    ordo_meta_rows: list[tuple[str, str, str]] = field(default_factory=list)
    admission_icd: dict[str, list[str]] = field(default_factory=dict)
    gold_admission_ordo: dict[str, set[str]] = field(default_factory=dict)
    disease_ordo: dict[str, str] = field(default_factory=dict)  # surface -> ORDO code


def _cui(n: int) -> str:
    return f"C0{n:06d}"


def _ordo(n: int) -> str:
    return f"Orphanet_{n}"


def build_workspace(
    seed: int = 7,
    mentions_per_disease: int = 5,
    short_doc_counts: dict[str, int] | None = None,
) -> Workspace:
    rng = random.Random(seed)
    ws = Workspace()
    short_doc_counts = short_doc_counts or {"hd": 200, "rp": 150, "pml": 120}

    # ontology tables: one CUI/ORDO/ICD identity per long-form disease
    disease_cui: dict[str, str] = {}
    for i, name in enumerate(CORE_DISEASES):
        cui, ordo = _cui(910000 + i), _ordo(910000 + i)
        icd10, icd9 = f"Q9{i:02d}", f"75{i:02d}"
        disease_cui[name] = cui
        ws.disease_ordo[name] = ordo
        ws.ordo_umls_rows.append((ordo, cui, "E"))
        ws.ordo_meta_rows.append((ordo, name, "0"))
        ws.ordo_icd10_rows.append((ordo, icd10, "E" if i % 2 == 0 else "BTNT"))
        ws.icd9_icd10_rows.append((icd9, icd10))
        if i % 3 == 0:
            ws.icd9_umls_rows.append((icd9, cui))
        ws.synonym_rows.append((name, cui))

    cui, ordo = _cui(920001), _ordo(920001)
    disease_cui[UNSEEN_TRUE_DISEASE] = cui
    ws.disease_ordo[UNSEEN_TRUE_DISEASE] = ordo
    ws.ordo_umls_rows.append((ordo, cui, "E"))
    ws.ordo_meta_rows.append((ordo, UNSEEN_TRUE_DISEASE, "0"))
    ws.synonym_rows.append((UNSEEN_TRUE_DISEASE, cui))

    # each abbreviation is ambiguous between two rare-linked CUIs
    for j, short in enumerate(SHORT_FORMS):
        for k in (1, 2):
            cui, ordo = _cui(930000 + 10 * j + k), _ordo(930000 + 10 * j + k)
            ws.ordo_umls_rows.append((ordo, cui, "E"))
            ws.ordo_meta_rows.append((ordo, f"{short} linked disorder {k}", "0"))
            ws.synonym_rows.append((short, cui))
    ema_cui, ema_ordo = _cui(930091), _ordo(930091)
    ws.ordo_umls_rows.append((ema_ordo, ema_cui, "E"))
    ws.ordo_meta_rows.append((ema_ordo, "ema linked disorder", "0"))
    ws.synonym_rows.append((UNSEEN_FALSE_SHORT, ema_cui))

    # distractors: a group-of-disorders link and an NTBT-only link, both of
    # which must be dropped from the dictionary by the rare-set filter
    ws.ordo_umls_rows.append((_ordo(940001), _cui(940001), "E"))
    ws.ordo_meta_rows.append((_ordo(940001), "common lipid disorder group", "1"))
    ws.synonym_rows.append(("hyperlipidemia", _cui(940001)))
    ws.ordo_umls_rows.append((_ordo(940002), _cui(940002), "NTBT"))
    ws.ordo_meta_rows.append((_ordo(940002), "broad seizure disorder", "0"))
    ws.synonym_rows.append(("epilepsy", _cui(940002)))

    doc_serial = 0
    adm_serial = 0

    def next_ids(share_with: str | None = None) -> tuple[str, str]:
        nonlocal doc_serial, adm_serial
        doc_serial += 1
        if share_with is None:
            adm_serial += 1
            return f"note-{doc_serial:04d}", f"stay-{adm_serial:04d}"
        return f"note-{doc_serial:04d}", share_with

    def note_true_admission(adm: str, surface: str) -> None:
        ws.gold_admission_ordo.setdefault(adm, set()).add(ws.disease_ordo[surface])

    # -- diagnostic (true) mentions --
    last_adm = None
    for i, name in enumerate(CORE_DISEASES):
        for k in range(mentions_per_disease):
            share = last_adm if (i * mentions_per_disease + k) % 10 == 9 else None
            doc_id, adm = next_ids(share)
            last_adm = adm
            text, spans = _diagnostic_doc(name, rng)
            ws.docs.append(Document(doc_id, text, admission_id=adm))
            for s, e in spans:
                ws.planted[(doc_id, s, e)] = True
            note_true_admission(adm, name)
            if k == 0 and i < 20:
                ws.admission_icd.setdefault(adm, []).append(f"75{i:02d}")

    for _ in range(12):
        doc_id, adm = next_ids()
        text, spans = _diagnostic_doc(UNSEEN_TRUE_DISEASE, rng)
        ws.docs.append(Document(doc_id, text, admission_id=adm))
        for s, e in spans:
            ws.planted[(doc_id, s, e)] = True
        note_true_admission(adm, UNSEEN_TRUE_DISEASE)

    # -- short-form (false) mentions, two per document --
    for short, n_docs in short_doc_counts.items():
        for _ in range(n_docs):
            doc_id, adm = next_ids()
            text, spans = _short_form_doc(short)
            ws.docs.append(Document(doc_id, text, admission_id=adm))
            for s, e in spans:
                ws.planted[(doc_id, s, e)] = False

    for _ in range(3):
        doc_id, adm = next_ids()
        text, spans = _body_doc(EMA_BODY, UNSEEN_FALSE_SHORT.upper())
        ws.docs.append(Document(doc_id, text, admission_id=adm))
        for s, e in spans:
            ws.planted[(doc_id, s, e)] = False

    # -- plants the context filters must remove (their admissions keep an ICD
    #    code, so the code-vs-text comparison has an ICD-only bucket) --
    flavors = ("negation", "family", "hypothetical")
    for n in range(12):
        doc_id, adm = next_ids()
        name = CORE_DISEASES[rng.randrange(len(CORE_DISEASES))]
        text, spans = _filtered_doc(name, flavors[n % 3])
        ws.docs.append(Document(doc_id, text, admission_id=adm))
        for s, e in spans:
            ws.filtered_spans.add((doc_id, s, e))
        idx = CORE_DISEASES.index(name)
        ws.admission_icd.setdefault(adm, []).append(f"75{idx:02d}")

    # dirty coded rows exercise the skip-with-warning path
    ws.admission_icd.setdefault("stay-0002", []).append("  ")
    return ws


def _diagnostic_doc(surface: str, rng: random.Random) -> tuple[str, list[tuple[int, int]]]:
    year = rng.randrange(1988, 2016)
    pre = HEADER + "Past Medical History:\n1. "
    post = (
        f" diagnosed {year}\n2. hypertension\n3. osteoarthritis\n\nHospital Course:\n"
        + POSITIVE_COURSES[year % len(POSITIVE_COURSES)]
        + "\n"
    )
    start = len(pre)
    return pre + surface + post, [(start, start + len(surface))]


def _short_form_doc(short: str) -> tuple[str, list[tuple[int, int]]]:
    body1, body2 = NEGATIVE_BODIES[short]
    pre = HEADER + "Hospital Course:\nAdmitted for volume overload. "
    text = pre + body1 + "\n" + body2 + "\nTolerated the course well.\n"
    spans = []
    upper = short.upper()
    cursor = len(HEADER)
    while True:
        i = text.find(upper, cursor)
        if i < 0:
            break
        spans.append((i, i + len(upper)))
        cursor = i + 1
    return text, spans


def _body_doc(body: str, marker: str) -> tuple[str, list[tuple[int, int]]]:
    pre = HEADER + "Pertinent Results:\n"
    text = pre + body + "\n"
    i = text.find(marker)
    return text, [(i, i + len(marker))]


def _filtered_doc(surface: str, flavor: str) -> tuple[str, list[tuple[int, int]]]:
    if flavor == "negation":
        pre = HEADER + "Hospital Course:\nWorkup was negative for "
        post = " and cultures cleared.\n"
    elif flavor == "family":
        pre = HEADER + "Family History:\nMother with "
        post = " managed elsewhere.\n"
    else:
        pre = HEADER + "Hospital Course:\nThere was concern of "
        post = " pending further testing.\n"
    start = len(pre)
    return pre + surface + post, [(start, start + len(surface))]


# -- writing a runnable workspace ------------------------------------------------


def write_workspace(
    ws: Workspace,
    out_dir: str | Path,
    epochs: int = 1000,
    seed: int = 13,
    rules: dict | None = None,
) -> dict[str, str]:
    """Write corpus, ontology tables, synonyms, triggers, admission ICD codes,
    and a run config under `out_dir`. Returns the path map. Smaller corpora
    need a larger prevalence threshold for the long/short split to hold."""
    out = Path(out_dir)
    (out / "ontology").mkdir(parents=True, exist_ok=True)

    def tsv(name: str, header: list[str], rows) -> str:
        path = out / "ontology" / name
        lines = ["\t".join(header)] + ["\t".join(row) for row in rows]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return str(path)

    paths = {
        "ordo_umls": tsv("ordo_umls.tsv", ["ordo_id", "other_id", "relation"], ws.ordo_umls_rows),
        "ordo_icd10": tsv("ordo_icd10.tsv", ["ordo_id", "other_id", "relation"], ws.ordo_icd10_rows),
        "icd9_icd10": tsv("icd9_icd10.tsv", ["icd9", "icd10"], ws.icd9_icd10_rows),
        "icd9_umls": tsv("icd9_umls.tsv", ["icd9", "cui"], ws.icd9_umls_rows),
        "ordo_meta": tsv("ordo_meta.tsv", ["ordo_id", "preferred_label", "is_group_of_disorders"], ws.ordo_meta_rows),
        "synonyms": tsv("synonyms.tsv", ["surface", "cui"], ws.synonym_rows),
    }

    corpus_path = out / "corpus.jsonl"
    with open(corpus_path, "w", encoding="utf-8") as handle:
        for doc in ws.docs:
            handle.write(
                json.dumps(
                    {"doc_id": doc.doc_id, "admission_id": doc.admission_id, "text": doc.text},
                    ensure_ascii=False,
                    sort_keys=True,
                )
                + "\n"
            )

    icd_path = out / "admissions_icd.csv"
    with open(icd_path, "w", encoding="utf-8") as handle:
        handle.write("admission_id,icd9_code\n")
        for adm in sorted(ws.admission_icd):
            for code in ws.admission_icd[adm]:
                handle.write(f"{adm},{code}\n")

    gold_adm_path = out / "gold_admissions.csv"
    with open(gold_adm_path, "w", encoding="utf-8") as handle:
        handle.write("admission_id,ordo_id\n")
        for adm in sorted(ws.gold_admission_ordo):
            for ordo in sorted(ws.gold_admission_ordo[adm]):
                handle.write(f"{adm},{ordo}\n")

    config = {
        "corpus": "corpus.jsonl",
        "ontology": {
            "ordo_umls": "ontology/ordo_umls.tsv",
            "ordo_icd10": "ontology/ordo_icd10.tsv",
            "icd9_icd10": "ontology/icd9_icd10.tsv",
            "icd9_umls": "ontology/icd9_umls.tsv",
            "ordo_meta": "ontology/ordo_meta.tsv",
            "synonyms": "ontology/synonyms.tsv",
        },
        "rules": rules or {"l": 3, "p": 0.005},
        "encoding": {"mask": False, "use_structure": True, "window": 5},
        "provider": {"kind": "baseline", "dim": 64},
        "train": {"learning_rate": 0.1, "epochs": epochs, "l2": 1.0},
        "seed": seed,
    }
    config_path = out / "config.json"
    config_path.write_text(json.dumps(config, indent=2) + "\n", encoding="utf-8")

    paths.update(
        corpus=str(corpus_path),
        admissions_icd=str(icd_path),
        gold_admissions=str(gold_adm_path),
        config=str(config_path),
    )
    return paths


def gold_rows_for_candidates(ws: Workspace, candidates) -> list[dict]:
    """Label extracted candidates from the planted-span registry. A candidate
    at an unregistered span means the generator and matcher disagree, which is
    a bug worth failing loudly over."""
    rows = []
    for cand in candidates:
        span = (cand.doc_id, cand.m_start, cand.m_end)
        if span in ws.filtered_spans:
            raise AssertionError(f"span {span} should have been dropped by the context filters")
        if span not in ws.planted:
            raise AssertionError(f"unplanted candidate span {span} ({cand.surface!r})")
        label = ws.planted[span]
        ordo = ws.disease_ordo.get(" ".join(cand.surface.lower().split()), "")
        rows.append(
            {
                "doc_id": cand.doc_id,
                "m_start": cand.m_start,
                "m_end": cand.m_end,
                "cui": cand.cui,
                "label_umls": int(label),
                "ordo_id": ordo,
                "label_ordo": int(label) if ordo else "",
            }
        )
    return rows


def write_gold_csv(rows: list[dict], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("doc_id,m_start,m_end,cui,label_umls,ordo_id,label_ordo\n")
        for row in rows:
            handle.write(
                f'{row["doc_id"]},{row["m_start"]},{row["m_end"]},{row["cui"]},'
                f'{row["label_umls"]},{row["ordo_id"]},{row["label_ordo"]}\n'
            )
