"""Multi-pattern dictionary matching.

An Aho-Corasick automaton over case-folded text finds every dictionary
surface in one pass. Matches are then filtered to token boundaries (a match
may not begin or end inside an alphanumeric run) and reduced to a
non-overlapping leftmost-longest selection, the usual gazetteer convention.

Surfaces are stored normalized (case-folded, single-spaced); matching against
raw text is exact after case folding, so a line break inside a multi-word
surface defeats the match.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Mapping

from .tokenization import fold_case, normalize_phrase


@dataclass(frozen=True)
class Match:
    start: int
    end: int
    surface: str  # normalized dictionary surface, not the raw slice


class DictionaryMatcher:
    """Immutable multi-pattern matcher carrying a surface -> CUIs payload."""

    def __init__(self, surface_to_cuis: Mapping[str, Iterable[str]]):
        normalized: dict[str, tuple[str, ...]] = {}
        for surface, cuis in surface_to_cuis.items():
            key = normalize_phrase(surface)
            if not key:
                raise ValueError("empty surface after normalization")
            normalized[key] = tuple(sorted(set(cuis) | set(normalized.get(key, ()))))
        if not normalized:
            raise ValueError("matcher needs at least one pattern")
        self._surface_cuis = normalized
        self._patterns = sorted(normalized)
        self._build(self._patterns)

    # -- automaton ----------------------------------------------------------

    def _build(self, patterns: list[str]) -> None:
        goto: list[dict[str, int]] = [{}]
        out: list[list[str]] = [[]]
        for pat in patterns:
            node = 0
            for ch in pat:
                nxt = goto[node].get(ch)
                if nxt is None:
                    goto.append({})
                    out.append([])
                    nxt = len(goto) - 1
                    goto[node][ch] = nxt
                node = nxt
            out[node].append(pat)
        fail = [0] * len(goto)
        queue = deque()
        for child in goto[0].values():
            queue.append(child)
        while queue:
            node = queue.popleft()
            for ch, child in goto[node].items():
                queue.append(child)
                f = fail[node]
                while f and ch not in goto[f]:
                    f = fail[f]
                fail[child] = goto[f].get(ch, 0) if goto[f].get(ch, 0) != child else 0
                out[child] = out[child] + out[fail[child]]
        self._goto = goto
        self._fail = fail
        self._out = out

    def surfaces(self) -> list[str]:
        return list(self._patterns)

    def cuis_for(self, surface: str) -> tuple[str, ...]:
        return self._surface_cuis[surface]

    def find_raw(self, text: str) -> list[Match]:
        """Every occurrence of every pattern, before boundary filtering and
        overlap resolution. Ordered by (start, end)."""
        folded = fold_case(text)
        node = 0
        hits: list[Match] = []
        for i, ch in enumerate(folded):
            while node and ch not in self._goto[node]:
                node = self._fail[node]
            node = self._goto[node].get(ch, 0)
            for pat in self._out[node]:
                hits.append(Match(i + 1 - len(pat), i + 1, pat))
        hits.sort(key=lambda m: (m.start, m.end))
        return hits

    def find(self, text: str) -> list[Match]:
        """Boundary-anchored, non-overlapping leftmost-longest matches."""
        folded = fold_case(text)
        valid = [m for m in self.find_raw(text) if _boundary_ok(folded, m.start, m.end)]
        valid.sort(key=lambda m: (m.start, -(m.end - m.start)))
        selected: list[Match] = []
        cursor = 0
        for m in valid:
            if m.start >= cursor:
                selected.append(m)
                cursor = m.end
        return selected


def _boundary_ok(text: str, start: int, end: int) -> bool:
    if start > 0 and text[start - 1].isalnum() and text[start].isalnum():
        return False
    if end < len(text) and text[end - 1].isalnum() and text[end].isalnum():
        return False
    return True
