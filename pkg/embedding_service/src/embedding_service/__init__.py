"""Embedding microservice: per-token second-to-last-layer vectors with
character offsets from a configurable contextual encoder."""

__version__ = "0.1.0"
