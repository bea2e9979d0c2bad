"""Rare-disease phenotyping from clinical notes.

Batch pipeline: dictionary NER+L against a rare-disease UMLS subset,
rule-based weak supervision over contextual mention embeddings to train a
phenotype confirmation model, and ontology matching from UMLS to ORDO,
plus evaluation tooling (mention-level and admission-level metrics).
"""

__version__ = "0.1.0"
