"""Contextual encoder wrapper.

Runs a transformer encoder in inference mode and exposes, per input text,
the second-to-last hidden layer vector of every token together with the
token's character offsets into the source text. The layer choice is fixed
here, not a request parameter, so clients can never silently diverge.

Two encoder sources:

  * "builtin-tiny" (default): a small randomly initialized BERT built from a
    fixed seed with a character-level WordPiece vocabulary, constructed
    entirely offline. It makes no semantic claims; it exists so the wire
    contract (offsets, determinism, dimensionality) can run anywhere.
  * any other model id / local path: loaded with transformers Auto classes;
    pick a clinically pre-trained encoder at deploy time.

Determinism: the model runs under no_grad in eval mode on a single CPU
thread, so identical requests return bitwise-identical vectors. On runtimes
where single-threaded inference is not configured, tolerance is 1e-6.
"""

from __future__ import annotations

import os
import string
from dataclasses import dataclass

import torch

BUILTIN_MODEL_ID = "builtin-tiny"
LAYER_NAME = "second_to_last"


@dataclass
class EncoderConfig:
    model_id: str = BUILTIN_MODEL_ID
    dim: int = 32  # builtin only; external models bring their own width
    seed: int = 0
    max_tokens: int = 128
    batch_cap: int = 32
    max_chars: int = 2000
    port: int = 8800

    @classmethod
    def from_env(cls) -> "EncoderConfig":
        return cls(
            model_id=os.environ.get("EMBED_MODEL", BUILTIN_MODEL_ID),
            dim=int(os.environ.get("EMBED_DIM", "32")),
            seed=int(os.environ.get("EMBED_SEED", "0")),
            max_tokens=int(os.environ.get("EMBED_MAX_TOKENS", "128")),
            batch_cap=int(os.environ.get("EMBED_BATCH_CAP", "32")),
            max_chars=int(os.environ.get("EMBED_MAX_CHARS", "2000")),
            port=int(os.environ.get("EMBED_PORT", "8800")),
        )


@dataclass
class TokenVector:
    text: str  # the source slice [start, end)
    start: int
    end: int
    vector: list[float]


@dataclass
class SequenceEncoding:
    tokens: list[TokenVector]
    truncated: bool


def _char_wordpiece_vocab() -> dict[str, int]:
    vocab = {"[PAD]": 0, "[UNK]": 1, "[CLS]": 2, "[SEP]": 3, "[MASK]": 4}
    for ch in string.ascii_lowercase + string.digits + string.punctuation:
        vocab.setdefault(ch, len(vocab))
        vocab.setdefault("##" + ch, len(vocab))
    return vocab


class HiddenStateEncoder:
    def __init__(self, config: EncoderConfig | None = None):
        self.config = config or EncoderConfig()
        torch.set_num_threads(1)
        if self.config.model_id == BUILTIN_MODEL_ID:
            self._init_builtin()
        else:
            self._init_pretrained(self.config.model_id)
        self.model.eval()

    def _init_builtin(self) -> None:
        from tokenizers.implementations import BertWordPieceTokenizer
        from transformers import BertConfig, BertModel

        vocab = _char_wordpiece_vocab()
        self._tok = BertWordPieceTokenizer(vocab=vocab, lowercase=True)
        torch.manual_seed(self.config.seed)
        bert_config = BertConfig(
            vocab_size=len(vocab),
            hidden_size=self.config.dim,
            num_hidden_layers=2,
            num_attention_heads=4,
            intermediate_size=4 * self.config.dim,
            max_position_embeddings=self.config.max_tokens,
        )
        self.model = BertModel(bert_config)
        self.dim = self.config.dim
        self.model_id = BUILTIN_MODEL_ID
        self._pretrained = False

    def _init_pretrained(self, model_id: str) -> None:
        from transformers import AutoModel, AutoTokenizer

        self._tok = AutoTokenizer.from_pretrained(model_id, use_fast=True)
        self.model = AutoModel.from_pretrained(model_id)
        self.dim = int(self.model.config.hidden_size)
        self.model_id = model_id
        self._pretrained = True

    def encode(self, texts: list[str]) -> list[SequenceEncoding]:
        return [self._encode_one(text) for text in texts]

    def _encode_one(self, text: str) -> SequenceEncoding:
        if self._pretrained:
            enc = self._tok(
                text,
                return_offsets_mapping=True,
                truncation=True,
                max_length=self.config.max_tokens,
                return_tensors=None,
            )
            ids = enc["input_ids"]
            offsets = enc["offset_mapping"]
            full_len = len(self._tok(text, return_offsets_mapping=False)["input_ids"])
            truncated = full_len > len(ids)
        else:
            enc = self._tok.encode(text)
            ids, offsets = list(enc.ids), list(enc.offsets)
            truncated = len(ids) > self.config.max_tokens
            if truncated:
                ids = ids[: self.config.max_tokens]
                offsets = offsets[: self.config.max_tokens]
        if not ids:
            return SequenceEncoding(tokens=[], truncated=False)
        with torch.no_grad():
            out = self.model(torch.tensor([ids]), output_hidden_states=True)
        layer = out.hidden_states[-2][0]  # second-to-last, batch row 0
        tokens = []
        for (start, end), vector in zip(offsets, layer):
            if start == end:  # special token with no source offsets
                continue
            tokens.append(
                TokenVector(text=text[start:end], start=start, end=end, vector=vector.tolist())
            )
        return SequenceEncoding(tokens=tokens, truncated=truncated)
