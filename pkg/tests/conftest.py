from pathlib import Path

import pytest

from rarephen import nerl, pipeline as pl
from rarephen.ontology import load_store

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA


@pytest.fixture(scope="session")
def store():
    return load_store(
        ordo_umls=DATA / "ontology/ordo_umls.tsv",
        ordo_icd10=DATA / "ontology/ordo_icd10.tsv",
        icd9_icd10=DATA / "ontology/icd9_icd10.tsv",
        icd9_umls=DATA / "ontology/icd9_umls.tsv",
        ordo_meta=DATA / "ontology/ordo_meta.tsv",
    )


@pytest.fixture(scope="session")
def dictionary(store):
    return nerl.build_dictionary(store, nerl.read_synonym_rows(DATA / "ontology/synonyms.tsv"))


@pytest.fixture(scope="session")
def matcher(dictionary):
    return nerl.build_matcher(dictionary)


@pytest.fixture(scope="session")
def triggers():
    return nerl.TriggerConfig.from_json(DATA / "triggers.json")


@pytest.fixture()
def corpus_docs(triggers):
    docs = pl.load_corpus(DATA / "corpus.jsonl")
    for doc in docs:
        doc.sections = nerl.split_sections(doc.text, triggers.section_headers)
    return docs


@pytest.fixture()
def extraction(corpus_docs, matcher, triggers):
    prior = nerl.build_prior(corpus_docs, matcher)
    prefilter, filtered = [], []
    for doc in corpus_docs:
        cands = nerl.extract_candidates(doc, matcher, prior)
        prefilter.extend(cands)
        filtered.extend(nerl.apply_context_filters(cands, triggers))
    return prefilter, filtered, prior


@pytest.fixture(scope="session")
def fixture_config_dict():
    """Pipeline config pointing at the committed fixtures."""
    return {
        "corpus": str(DATA / "corpus.jsonl"),
        "ontology": {
            "ordo_umls": str(DATA / "ontology/ordo_umls.tsv"),
            "ordo_icd10": str(DATA / "ontology/ordo_icd10.tsv"),
            "icd9_icd10": str(DATA / "ontology/icd9_icd10.tsv"),
            "icd9_umls": str(DATA / "ontology/icd9_umls.tsv"),
            "ordo_meta": str(DATA / "ontology/ordo_meta.tsv"),
            "synonyms": str(DATA / "ontology/synonyms.tsv"),
        },
        "triggers": str(DATA / "triggers.json"),
        "rules": {"l": 3, "p": 0.15},
        "encoding": {"mask": False, "use_structure": True, "window": 5},
        "provider": {"kind": "baseline", "dim": 64},
        "train": {"learning_rate": 0.1, "epochs": 400, "l2": 1.0},
        "seed": 13,
    }


@pytest.fixture()
def fixture_pipeline(fixture_config_dict):
    config = pl.PipelineConfig.from_dict(fixture_config_dict)
    return pl.Pipeline(config)
