"""Contextual mention representation.

Composes the encoder input (context window, optional "[SEP]" + structure
name, optional mention masking), maps the mention's character span onto
token offsets, and mean-pools the mention-span token vectors into one
fixed-width mention vector. Token vectors come from a pluggable provider:

  * HashEmbeddingProvider - deterministic desk-scale stand-in. Each token
    gets a pseudo-random unit vector seeded from a hash of its lower-cased
    text, so the whole pipeline runs with no encoder while keeping every
    structural property (determinism, offsets, pooling).
  * RemoteEmbeddingProvider - HTTP client for an embedding service exposing
    per-token second-to-last-layer vectors with character offsets.
"""

from __future__ import annotations

import hashlib
import threading
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import requests

from .errors import (
    DimensionMismatchError,
    OffsetValidationError,
    SpanMappingError,
    TransportError,
)
from .tokenization import tokenize

SEP_TOKEN = "[SEP]"
MASK_TOKEN = "[MASK]"
SPECIAL_TOKENS = (SEP_TOKEN, MASK_TOKEN)


@dataclass(frozen=True)
class EncodingOptions:
    mask_mention: bool = False
    use_structure: bool = True
    window_tokens: int = 5

    def __post_init__(self):
        if self.window_tokens < 0:
            raise ValueError("window_tokens must be >= 0")

    def to_dict(self) -> dict:
        return {
            "mask_mention": self.mask_mention,
            "use_structure": self.use_structure,
            "window_tokens": self.window_tokens,
        }

    @classmethod
    def from_dict(cls, row: dict) -> "EncodingOptions":
        return cls(
            mask_mention=bool(row.get("mask_mention", False)),
            use_structure=bool(row.get("use_structure", True)),
            window_tokens=int(row.get("window_tokens", 5)),
        )


@dataclass(frozen=True)
class EmbeddedToken:
    text: str
    start: int
    end: int
    vector: np.ndarray


@dataclass
class TokenEmbeddingSequence:
    tokens: list[EmbeddedToken]
    dim: int

    def __post_init__(self):
        if self.dim <= 0:
            raise ValueError("embedding dimension must be positive")
        prev_end = -1
        for tok in self.tokens:
            if not (0 <= tok.start < tok.end):
                raise ValueError(f"bad token offsets [{tok.start}, {tok.end})")
            if tok.start < prev_end:
                raise ValueError("token offsets overlap or go backwards")
            if len(tok.vector) != self.dim:
                raise DimensionMismatchError(
                    f"token vector has length {len(tok.vector)}, expected {self.dim}"
                )
            prev_end = tok.end


@dataclass
class MentionVector:
    values: np.ndarray
    provider_id: str
    options: EncodingOptions


def compose_input(
    context: str,
    structure_name: str | None,
    mention_span: tuple[int, int],
    options: EncodingOptions,
) -> tuple[str, tuple[int, int]]:
    """Build the encoder input text and the mention span within it."""
    s, e = mention_span
    if not (0 <= s < e <= len(context)):
        raise ValueError(f"mention span [{s}, {e}) outside context of length {len(context)}")
    text = context
    if options.mask_mention:
        text = context[:s] + MASK_TOKEN + context[e:]
        s, e = s, s + len(MASK_TOKEN)
    if options.use_structure and structure_name:
        text = f"{text} {SEP_TOKEN} {structure_name}"
    return text, (s, e)


def char_span_to_token_span(seq: TokenEmbeddingSequence, m_start: int, m_end: int) -> tuple[int, int]:
    """Indices of the smallest contiguous token run covering [m_start, m_end);
    tokens that only partially overlap the span are included."""
    if m_start >= m_end:
        raise ValueError("empty character span")
    overlapping = [
        i for i, tok in enumerate(seq.tokens) if tok.start < m_end and tok.end > m_start
    ]
    if not overlapping:
        raise SpanMappingError(f"span [{m_start}, {m_end}) covers no token")
    return overlapping[0], overlapping[-1]


def mention_vector(
    seq: TokenEmbeddingSequence,
    token_span: tuple[int, int],
    provider_id: str,
    options: EncodingOptions,
) -> MentionVector:
    """Component-wise arithmetic mean of the span's token vectors."""
    first, last = token_span
    if not (0 <= first <= last < len(seq.tokens)):
        raise ValueError(f"token span ({first}, {last}) out of range")
    stacked = np.stack([seq.tokens[i].vector for i in range(first, last + 1)])
    return MentionVector(stacked.mean(axis=0), provider_id, options)


def encode_mention(
    context: str,
    mention_in_context: tuple[int, int],
    structure_name: str | None,
    provider,
    options: EncodingOptions,
) -> MentionVector:
    """compose -> embed -> span-map -> pool, in one call."""
    text, span = compose_input(context, structure_name, mention_in_context, options)
    seq = provider.embed(text)
    token_span = char_span_to_token_span(seq, *span)
    return mention_vector(seq, token_span, provider.provider_id, options)


# -- providers ---------------------------------------------------------------


class HashEmbeddingProvider:
    """Deterministic provider: each token's vector is a seeded pseudo-random
    unit vector derived from a hash of its lower-cased text; identical across
    calls and processes. "[SEP]" and "[MASK]" get reserved basis vectors."""

    def __init__(self, dim: int = 64, seed: int = 13):
        if dim < 2:
            raise ValueError("dim must be >= 2 (two basis vectors are reserved)")
        self.dim = dim
        self.seed = seed
        self.provider_id = f"hash-unit:d{dim}:s{seed}"
        self._cache: dict[str, np.ndarray] = {}
        self._reserved = {SEP_TOKEN: 0, MASK_TOKEN: 1}

    def _vector(self, token_text: str) -> np.ndarray:
        if token_text in self._reserved:
            vec = np.zeros(self.dim)
            vec[self._reserved[token_text]] = 1.0
            return vec
        key = token_text.casefold()
        cached = self._cache.get(key)
        if cached is None:
            digest = hashlib.blake2b(
                key.encode("utf-8"), digest_size=16, person=b"rarephen", salt=str(self.seed).encode()[:16]
            ).digest()
            rng = np.random.Generator(np.random.PCG64(int.from_bytes(digest, "big")))
            raw = rng.standard_normal(self.dim)
            cached = raw / np.linalg.norm(raw)
            self._cache[key] = cached
        return cached

    def embed(self, text: str) -> TokenEmbeddingSequence:
        tokens = [
            EmbeddedToken(tok.text, tok.start, tok.end, self._vector(tok.text))
            for tok in tokenize(text, specials=SPECIAL_TOKENS)
        ]
        return TokenEmbeddingSequence(tokens, self.dim)

    def embed_many(self, texts: Sequence[str]) -> list[TokenEmbeddingSequence]:
        return [self.embed(t) for t in texts]


class RemoteEmbeddingProvider:
    """Client for the embedding service wire protocol.

    POST {base_url}/embed  {"texts": [...]}  ->
      {"model_id": ..., "dim": ..., "sequences": [{"tokens": [
          {"text": ..., "start": ..., "end": ..., "vector": [...]}], ...}]}

    In-flight requests are bounded by a semaphore; offsets in every response
    are validated against the text that was sent.
    """

    def __init__(
        self,
        base_url: str,
        dim: int,
        timeout: float = 10.0,
        max_in_flight: int = 4,
        batch_size: int = 16,
        session: requests.Session | None = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.dim = dim
        self.timeout = timeout
        self.batch_size = batch_size
        self.provider_id = f"remote:{self.base_url}"
        self._session = session or requests.Session()
        self._gate = threading.BoundedSemaphore(max_in_flight)

    def check_health(self) -> dict:
        payload = self._get_json("/health")
        advertised = payload.get("dim")
        if advertised != self.dim:
            raise DimensionMismatchError(
                f"service advertises dim {advertised}, client configured for {self.dim}"
            )
        model_id = payload.get("model_id", "unknown")
        self.provider_id = f"remote:{model_id}:d{self.dim}"
        return payload

    def embed(self, text: str) -> TokenEmbeddingSequence:
        return self.embed_many([text])[0]

    def embed_many(self, texts: Sequence[str]) -> list[TokenEmbeddingSequence]:
        out: list[TokenEmbeddingSequence] = []
        for i in range(0, len(texts), self.batch_size):
            batch = list(texts[i : i + self.batch_size])
            payload = self._post_json("/embed", {"texts": batch})
            out.extend(self._parse_response(batch, payload))
        return out

    def _get_json(self, path: str) -> dict:
        try:
            with self._gate:
                resp = self._session.get(self.base_url + path, timeout=self.timeout)
        except requests.RequestException as exc:
            raise TransportError(f"GET {path} failed: {exc}") from exc
        return self._decode(resp, path)

    def _post_json(self, path: str, body: dict) -> dict:
        try:
            with self._gate:
                resp = self._session.post(self.base_url + path, json=body, timeout=self.timeout)
        except requests.RequestException as exc:
            raise TransportError(f"POST {path} failed: {exc}") from exc
        return self._decode(resp, path)

    @staticmethod
    def _decode(resp: requests.Response, path: str) -> dict:
        if resp.status_code != 200:
            raise TransportError(f"{path} returned status {resp.status_code}: {resp.text[:200]}")
        try:
            return resp.json()
        except ValueError as exc:
            raise TransportError(f"{path} returned non-JSON body") from exc

    def _parse_response(self, texts: list[str], payload: dict) -> list[TokenEmbeddingSequence]:
        if payload.get("dim") != self.dim:
            raise DimensionMismatchError(
                f"response dim {payload.get('dim')} != configured dim {self.dim}"
            )
        sequences = payload.get("sequences")
        if not isinstance(sequences, list) or len(sequences) != len(texts):
            raise TransportError("response sequence count does not match request")
        out = []
        for text, seq in zip(texts, sequences):
            tokens = []
            prev_end = 0
            for row in seq.get("tokens", []):
                start, end = int(row["start"]), int(row["end"])
                vector = np.asarray(row["vector"], dtype=float)
                if len(vector) != self.dim:
                    raise DimensionMismatchError(
                        f"token vector length {len(vector)} != configured dim {self.dim}"
                    )
                if not (0 <= start < end <= len(text)) or start < prev_end:
                    raise OffsetValidationError(
                        f"token offsets [{start}, {end}) invalid for text of length {len(text)}"
                    )
                if not _token_matches_slice(row.get("text", ""), text[start:end]):
                    raise OffsetValidationError(
                        f"token text {row.get('text')!r} does not match slice {text[start:end]!r}"
                    )
                prev_end = end
                tokens.append(EmbeddedToken(row.get("text", text[start:end]), start, end, vector))
            out.append(TokenEmbeddingSequence(tokens, self.dim))
        return out


def _token_matches_slice(token_text: str, source_slice: str) -> bool:
    stripped = token_text[2:] if token_text.startswith("##") else token_text
    return stripped.casefold() == source_slice.casefold()
