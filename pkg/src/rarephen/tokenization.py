"""Offset-preserving tokenization shared by the matcher, context windows,
and the hash embedding provider.

Tokens are maximal runs of alphanumeric characters ("word" tokens) or of
non-alphanumeric, non-whitespace characters ("punct" tokens). Whitespace
separates tokens and is never part of one. Offsets are Unicode scalar-value
indices into the input string. Only word tokens count toward window sizes;
punctuation rides along inside the window span.
"""

from __future__ import annotations

from dataclasses import dataclass

WORD = "word"
PUNCT = "punct"
SPECIAL = "special"


@dataclass(frozen=True)
class Token:
    text: str
    start: int
    end: int
    kind: str = WORD


def fold_case(text: str) -> str:
    """Length-preserving lower-casing (chars whose lowercase form would change
    the string length, e.g. 'İ', are left as-is so offsets stay valid)."""
    out = []
    for ch in text:
        low = ch.lower()
        out.append(low if len(low) == 1 else ch)
    return "".join(out)


def tokenize(text: str, specials: tuple[str, ...] = ()) -> list[Token]:
    """Split text into word/punct tokens with character offsets.

    Any literal string in `specials` (e.g. "[SEP]", "[MASK]") is emitted as a
    single token of kind "special" wherever it occurs, taking precedence over
    the run-based split.
    """
    if not text:
        return []
    spans: list[tuple[int, int, str]] = []
    if specials:
        i = 0
        while i < len(text):
            hit = None
            for marker in specials:
                if text.startswith(marker, i):
                    hit = marker
                    break
            if hit is not None:
                spans.append((i, i + len(hit), SPECIAL))
                i += len(hit)
            else:
                i += 1
    tokens: list[Token] = []
    pos = 0
    for s, e, _kind in spans + [(len(text), len(text), SPECIAL)]:
        _tokenize_plain(text, pos, s, tokens)
        if s < e:
            tokens.append(Token(text[s:e], s, e, SPECIAL))
        pos = e
    return tokens


def _tokenize_plain(text: str, start: int, end: int, out: list[Token]) -> None:
    i = start
    while i < end:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        kind = WORD if ch.isalnum() else PUNCT
        j = i + 1
        while j < end and not text[j].isspace() and (text[j].isalnum() == (kind == WORD)):
            j += 1
        out.append(Token(text[i:j], i, j, kind))
        i = j


def word_window(tokens: list[Token], m_start: int, m_end: int, n_words: int) -> tuple[int, int]:
    """Character span of the context window: `n_words` word tokens on each
    side of [m_start, m_end) plus the mention itself. Punctuation between the
    boundary words comes along but does not count. Truncates at text edges."""
    if n_words < 0:
        raise ValueError("window size must be >= 0")
    left = [t for t in tokens if t.kind == WORD and t.end <= m_start]
    right = [t for t in tokens if t.kind == WORD and t.start >= m_end]
    w_start = left[-n_words].start if n_words and len(left) >= n_words else (left[0].start if left and n_words else m_start)
    w_end = right[n_words - 1].end if n_words and len(right) >= n_words else (right[-1].end if right and n_words else m_end)
    return min(w_start, m_start), max(w_end, m_end)


def normalize_phrase(text: str) -> str:
    """Case-fold and collapse internal whitespace to single spaces."""
    return " ".join(fold_case(text).split())


def contains_phrase(text: str, phrase: str) -> bool:
    """True when `phrase` occurs in `text` anchored at token boundaries
    (the occurrence may not start or end inside an alphanumeric run).
    Both sides are case-folded and whitespace-collapsed first."""
    hay = normalize_phrase(text)
    needle = normalize_phrase(phrase)
    if not needle:
        return False
    start = 0
    while True:
        i = hay.find(needle, start)
        if i < 0:
            return False
        j = i + len(needle)
        begins_inside = i > 0 and hay[i - 1].isalnum() and hay[i].isalnum()
        ends_inside = j < len(hay) and hay[j - 1].isalnum() and hay[j].isalnum()
        if not begins_inside and not ends_inside:
            return True
        start = i + 1
