import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rarephen import represent as rep
from rarephen.errors import (
    DimensionMismatchError,
    OffsetValidationError,
    SpanMappingError,
    TransportError,
)


class TestComposeInput:
    def test_structure_appended_with_sep(self):
        text, span = rep.compose_input(
            "on HD line pulled", "Hospital_course", (3, 5), rep.EncodingOptions()
        )
        assert text == "on HD line pulled [SEP] Hospital_course"
        assert text[span[0] : span[1]] == "HD"

    def test_absent_structure_is_identity(self):
        text, span = rep.compose_input("on HD line pulled", None, (3, 5), rep.EncodingOptions())
        assert (text, span) == ("on HD line pulled", (3, 5))

    def test_mask_replaces_mention(self):
        opts = rep.EncodingOptions(mask_mention=True, use_structure=False)
        text, span = rep.compose_input("on HD line pulled", None, (3, 5), opts)
        assert text == "on [MASK] line pulled"
        assert text[span[0] : span[1]] == "[MASK]"

    def test_all_off_is_identity(self):
        opts = rep.EncodingOptions(mask_mention=False, use_structure=False)
        original = ("context words here", (8, 13))
        assert rep.compose_input(original[0], "Some_Section", original[1], opts) == original

    def test_bad_span_rejected(self):
        with pytest.raises(ValueError):
            rep.compose_input("short", None, (3, 99), rep.EncodingOptions())


def seq_from_layout(layout: str, dim: int = 4) -> rep.TokenEmbeddingSequence:
    """Layout string like 'aa bb cc': each run becomes a token with a
    distinctive constant vector."""
    tokens = []
    i = 0
    while i < len(layout):
        if layout[i] == " ":
            i += 1
            continue
        j = i
        while j < len(layout) and layout[j] != " ":
            j += 1
        vec = np.full(dim, float(len(tokens) + 1))
        tokens.append(rep.EmbeddedToken(layout[i:j], i, j, vec))
        i = j
    return rep.TokenEmbeddingSequence(tokens, dim)


class TestSpanMapping:
    def test_exact_single_token(self):
        seq = seq_from_layout("aa bb cc")
        assert rep.char_span_to_token_span(seq, 3, 5) == (1, 1)

    def test_multi_token_run(self):
        seq = seq_from_layout("aa bb cc dd ee ff")
        assert rep.char_span_to_token_span(seq, 9, 17) == (3, 5)

    def test_partial_overlap_included(self):
        seq = seq_from_layout("aaaa bbbb")
        assert rep.char_span_to_token_span(seq, 2, 6) == (0, 1)

    def test_whitespace_only_span_is_error(self):
        seq = seq_from_layout("aa  bb")
        with pytest.raises(SpanMappingError):
            rep.char_span_to_token_span(seq, 2, 3)

    def test_empty_span_rejected(self):
        seq = seq_from_layout("aa bb")
        with pytest.raises(ValueError):
            rep.char_span_to_token_span(seq, 3, 3)

    @settings(max_examples=200, deadline=None)
    @given(st.data())
    def test_minimal_covering_run_oracle(self, data):
        """Enumerate all contiguous token runs; the answer must be the unique
        minimal run containing every token that overlaps the span."""
        n_tokens = data.draw(st.integers(1, 20))
        gaps = data.draw(st.lists(st.integers(0, 2), min_size=n_tokens, max_size=n_tokens))
        widths = data.draw(st.lists(st.integers(1, 3), min_size=n_tokens, max_size=n_tokens))
        tokens, pos = [], 0
        for g, w in zip(gaps, widths):
            pos += g
            tokens.append(rep.EmbeddedToken("x" * w, pos, pos + w, np.zeros(2)))
            pos += w
        seq = rep.TokenEmbeddingSequence(tokens, 2)
        total = pos
        m_start = data.draw(st.integers(0, max(0, total - 1)))
        m_end = data.draw(st.integers(m_start + 1, total))
        overlapping = [i for i, t in enumerate(tokens) if t.start < m_end and t.end > m_start]
        if not overlapping:
            with pytest.raises(SpanMappingError):
                rep.char_span_to_token_span(seq, m_start, m_end)
            return
        first, last = rep.char_span_to_token_span(seq, m_start, m_end)
        assert (first, last) == (min(overlapping), max(overlapping))
        # minimality: no shorter contiguous run contains all overlapping tokens
        assert last - first + 1 == len(range(min(overlapping), max(overlapping) + 1))


class TestPooling:
    def test_mean_of_one(self):
        seq = seq_from_layout("aa bb")
        mv = rep.mention_vector(seq, (1, 1), "p", rep.EncodingOptions())
        assert np.array_equal(mv.values, seq.tokens[1].vector)

    def test_mean_of_two(self):
        seq = seq_from_layout("aa bb")
        mv = rep.mention_vector(seq, (0, 1), "p", rep.EncodingOptions())
        assert np.allclose(mv.values, (seq.tokens[0].vector + seq.tokens[1].vector) / 2)

    def test_mean_of_identical_vectors(self):
        tokens = [rep.EmbeddedToken("a", i * 2, i * 2 + 1, np.array([3.0, -1.0])) for i in range(5)]
        seq = rep.TokenEmbeddingSequence(tokens, 2)
        mv = rep.mention_vector(seq, (0, 4), "p", rep.EncodingOptions())
        assert np.array_equal(mv.values, np.array([3.0, -1.0]))

    @settings(max_examples=100, deadline=None)
    @given(
        st.integers(1, 8),
        st.integers(1, 6),
        st.integers(0, 10_000),
    )
    def test_pooling_matches_bruteforce(self, n_tokens, dim, seed):
        rng = np.random.default_rng(seed)
        tokens = [
            rep.EmbeddedToken("t", i * 2, i * 2 + 1, rng.normal(size=dim)) for i in range(n_tokens)
        ]
        seq = rep.TokenEmbeddingSequence(tokens, dim)
        first = int(rng.integers(0, n_tokens))
        last = int(rng.integers(first, n_tokens))
        mv = rep.mention_vector(seq, (first, last), "p", rep.EncodingOptions())
        # independent accumulation, component by component
        for d in range(dim):
            total = 0.0
            for i in range(first, last + 1):
                total += float(tokens[i].vector[d])
            assert abs(mv.values[d] - total / (last - first + 1)) < 1e-12


class TestHashProvider:
    def test_determinism_within_and_across_instances(self):
        a = rep.HashEmbeddingProvider(dim=16, seed=3)
        b = rep.HashEmbeddingProvider(dim=16, seed=3)
        s1 = a.embed("rheumatic fever rheumatic")
        s2 = b.embed("rheumatic fever rheumatic")
        for t1, t2 in zip(s1.tokens, s2.tokens):
            assert np.array_equal(t1.vector, t2.vector)
        # same token text, different positions -> identical vectors
        assert np.array_equal(s1.tokens[0].vector, s1.tokens[2].vector)

    def test_different_tokens_differ(self):
        p = rep.HashEmbeddingProvider(dim=32)
        seq = p.embed("alpha beta gamma delta epsilon zeta eta theta iota kappa")
        vecs = [t.vector for t in seq.tokens]
        for i in range(len(vecs)):
            for j in range(i + 1, len(vecs)):
                assert not np.array_equal(vecs[i], vecs[j])

    def test_seed_changes_vectors(self):
        a = rep.HashEmbeddingProvider(dim=16, seed=1).embed("word")
        b = rep.HashEmbeddingProvider(dim=16, seed=2).embed("word")
        assert not np.array_equal(a.tokens[0].vector, b.tokens[0].vector)

    def test_case_insensitive_hashing(self):
        p = rep.HashEmbeddingProvider(dim=16)
        s = p.embed("HD hd")
        assert np.array_equal(s.tokens[0].vector, s.tokens[1].vector)

    def test_unit_norm(self):
        p = rep.HashEmbeddingProvider(dim=16)
        for tok in p.embed("some words here").tokens:
            assert abs(np.linalg.norm(tok.vector) - 1.0) < 1e-12

    def test_empty_text(self):
        assert rep.HashEmbeddingProvider(dim=8).embed("").tokens == []

    def test_reserved_special_vectors(self):
        p = rep.HashEmbeddingProvider(dim=8)
        seq = p.embed("a [SEP] b [MASK]")
        by_text = {t.text: t.vector for t in seq.tokens}
        assert np.array_equal(by_text["[SEP]"], np.eye(8)[0])
        assert np.array_equal(by_text["[MASK]"], np.eye(8)[1])

    def test_dim_must_fit_reserved_vectors(self):
        with pytest.raises(ValueError):
            rep.HashEmbeddingProvider(dim=1)

    def test_masking_changes_only_mention_tokens(self):
        p = rep.HashEmbeddingProvider(dim=16)
        context, span = "on HD line pulled today", (3, 5)
        plain, _ = rep.compose_input(context, None, span, rep.EncodingOptions(use_structure=False))
        masked, _ = rep.compose_input(
            context, None, span, rep.EncodingOptions(mask_mention=True, use_structure=False)
        )
        plain_vecs = {t.text: t.vector for t in p.embed(plain).tokens}
        masked_vecs = {t.text: t.vector for t in p.embed(masked).tokens}
        for text in ("on", "line", "pulled", "today"):
            assert np.array_equal(plain_vecs[text], masked_vecs[text])
        assert "HD" not in masked_vecs


class TestEncodeMention:
    def test_end_to_end_pooling(self):
        p = rep.HashEmbeddingProvider(dim=16)
        mv = rep.encode_mention("on HD line", (3, 5), "Hospital_course", p, rep.EncodingOptions())
        direct = p.embed("on HD line [SEP] Hospital_course")
        hd_vec = next(t.vector for t in direct.tokens if t.text == "HD")
        assert np.allclose(mv.values, hd_vec)
        assert mv.provider_id == p.provider_id

    def test_multi_token_mention_pools_span(self):
        p = rep.HashEmbeddingProvider(dim=16)
        mv = rep.encode_mention(
            "severe rheumatic fever noted", (7, 22), None, p, rep.EncodingOptions(use_structure=False)
        )
        direct = {t.text: t.vector for t in p.embed("severe rheumatic fever noted").tokens}
        assert np.allclose(mv.values, (direct["rheumatic"] + direct["fever"]) / 2)


# -- remote provider against a canned HTTP double --------------------------------


class _CannedHandler(BaseHTTPRequestHandler):
    responses: dict = {}

    def do_GET(self):
        self._reply(self.responses.get(("GET", self.path)))

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        self.rfile.read(length)
        self._reply(self.responses.get(("POST", self.path)))

    def _reply(self, spec):
        if spec is None:
            self.send_response(404)
            self.end_headers()
            return
        status, payload = spec
        body = json.dumps(payload).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):
        pass


@pytest.fixture()
def canned_server():
    server = HTTPServer(("127.0.0.1", 0), _CannedHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield server
    server.shutdown()


def _token(text, start, end, dim=3, fill=0.5):
    return {"text": text, "start": start, "end": end, "vector": [fill] * dim}


def _url(server):
    return f"http://127.0.0.1:{server.server_address[1]}"


class TestRemoteProvider:
    def test_parses_known_three_token_response(self, canned_server):
        text = "acute rheumatic fever"
        _CannedHandler.responses = {
            ("POST", "/embed"): (
                200,
                {
                    "model_id": "m",
                    "dim": 3,
                    "sequences": [
                        {
                            "tokens": [
                                _token("acute", 0, 5),
                                _token("rheumatic", 6, 15, fill=0.25),
                                _token("fever", 16, 21, fill=1.0),
                            ]
                        }
                    ],
                },
            )
        }
        provider = rep.RemoteEmbeddingProvider(_url(canned_server), dim=3)
        seq = provider.embed(text)
        assert [t.text for t in seq.tokens] == ["acute", "rheumatic", "fever"]
        assert np.allclose(seq.tokens[1].vector, [0.25] * 3)

    def test_dimension_mismatch(self, canned_server):
        _CannedHandler.responses = {
            ("POST", "/embed"): (200, {"model_id": "m", "dim": 5, "sequences": [{"tokens": []}]})
        }
        provider = rep.RemoteEmbeddingProvider(_url(canned_server), dim=3)
        with pytest.raises(DimensionMismatchError):
            provider.embed("x")

    def test_vector_length_mismatch(self, canned_server):
        _CannedHandler.responses = {
            ("POST", "/embed"): (
                200,
                {"model_id": "m", "dim": 3, "sequences": [{"tokens": [_token("x", 0, 1, dim=2)]}]},
            )
        }
        provider = rep.RemoteEmbeddingProvider(_url(canned_server), dim=3)
        with pytest.raises(DimensionMismatchError):
            provider.embed("x")

    def test_offset_validation_failure(self, canned_server):
        _CannedHandler.responses = {
            ("POST", "/embed"): (
                200,
                {"model_id": "m", "dim": 3, "sequences": [{"tokens": [_token("xy", 0, 9)]}]},
            )
        }
        provider = rep.RemoteEmbeddingProvider(_url(canned_server), dim=3)
        with pytest.raises(OffsetValidationError):
            provider.embed("xy")

    def test_token_text_must_match_slice(self, canned_server):
        _CannedHandler.responses = {
            ("POST", "/embed"): (
                200,
                {"model_id": "m", "dim": 3, "sequences": [{"tokens": [_token("zz", 0, 2)]}]},
            )
        }
        provider = rep.RemoteEmbeddingProvider(_url(canned_server), dim=3)
        with pytest.raises(OffsetValidationError):
            provider.embed("xy")

    def test_wordpiece_continuation_accepted(self, canned_server):
        _CannedHandler.responses = {
            ("POST", "/embed"): (
                200,
                {
                    "model_id": "m",
                    "dim": 3,
                    "sequences": [{"tokens": [_token("fe", 0, 2), _token("##ver", 2, 5)]}],
                },
            )
        }
        provider = rep.RemoteEmbeddingProvider(_url(canned_server), dim=3)
        seq = provider.embed("fever")
        assert [t.text for t in seq.tokens] == ["fe", "##ver"]

    def test_unreachable_host_is_transport_error(self):
        provider = rep.RemoteEmbeddingProvider("http://127.0.0.1:1", dim=3, timeout=0.2)
        with pytest.raises(TransportError):
            provider.embed("x")

    def test_non_200_is_transport_error(self, canned_server):
        _CannedHandler.responses = {("POST", "/embed"): (500, {"detail": "boom"})}
        provider = rep.RemoteEmbeddingProvider(_url(canned_server), dim=3)
        with pytest.raises(TransportError):
            provider.embed("x")

    def test_health_check_sets_provider_id(self, canned_server):
        _CannedHandler.responses = {
            ("GET", "/health"): (200, {"model_id": "tiny", "dim": 3, "layer": "second_to_last"})
        }
        provider = rep.RemoteEmbeddingProvider(_url(canned_server), dim=3)
        provider.check_health()
        assert provider.provider_id == "remote:tiny:d3"

    def test_health_dim_mismatch(self, canned_server):
        _CannedHandler.responses = {("GET", "/health"): (200, {"model_id": "tiny", "dim": 99})}
        provider = rep.RemoteEmbeddingProvider(_url(canned_server), dim=3)
        with pytest.raises(DimensionMismatchError):
            provider.check_health()
