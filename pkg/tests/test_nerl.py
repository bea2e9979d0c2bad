import pytest

from rarephen import nerl
from rarephen.errors import EmptyDictionaryError
from rarephen.nerl import Document, Section, TriggerConfig


class TestDictionary:
    def test_rare_filter_and_dedup(self, store, dictionary):
        surfaces = {(e.surface, e.cui) for e in dictionary}
        assert ("tracheobronchomalacia", "C0340231") in surfaces
        assert ("hd", "C0020179") in surfaces  # length filtering happens later
        # CUI absent from the store entirely
        assert not any(e.cui == "C0036202" for e in dictionary)
        # CUI whose only ORDO link is a group of disorders
        assert not any(e.cui == "C0020473" for e in dictionary)
        # NTBT-only CUI
        assert not any(e.cui == "C0014544" for e in dictionary)
        # "Rheumatic  Fever" normalizes into the existing entry
        assert sum(1 for e in dictionary if e.cui == "C0035436") == 2

    def test_empty_dictionary_is_error(self, store):
        with pytest.raises(EmptyDictionaryError):
            nerl.build_dictionary(store, [("sarcoid", "C0036202")])


class TestSections:
    HEADERS = (("Past Medical History:", "History_of_Past_Illness"), ("Hospital Course:", "Hospital_course"))

    def test_two_headers_with_leading_basic(self):
        text = "intro line\nPast Medical History:\nitem\nHospital Course:\nstable"
        sections = nerl.split_sections(text, self.HEADERS)
        first = text.index("Past")
        second = text.index("Hospital")
        assert sections == [
            Section("basic", 0, first),
            Section("History_of_Past_Illness", first, second),
            Section("Hospital_course", second, len(text)),
        ]

    def test_no_headers_single_basic(self):
        text = "free text only"
        assert nerl.split_sections(text, self.HEADERS) == [Section("basic", 0, len(text))]

    def test_header_at_offset_zero_no_basic(self):
        text = "Past Medical History:\nitem"
        sections = nerl.split_sections(text, self.HEADERS)
        assert sections[0].name == "History_of_Past_Illness"
        assert sections[0].start == 0

    def test_empty_text(self):
        assert nerl.split_sections("", self.HEADERS) == []

    def test_case_insensitive_headers(self):
        text = "PAST MEDICAL HISTORY:\nitem"
        assert nerl.split_sections(text, self.HEADERS)[0].name == "History_of_Past_Illness"

    def test_section_name_at(self):
        sections = [Section("a", 0, 5), Section("b", 5, 10)]
        assert nerl.section_name_at(sections, 0) == "a"
        assert nerl.section_name_at(sections, 5) == "b"
        assert nerl.section_name_at(sections, 10) is None


class TestExtraction:
    def test_prior_resolves_ambiguous_surface(self, matcher):
        doc = Document("x", "male with ESRD on HD today")
        prior = {"hd": {"C0020179": 7, "C0019829": 2}}
        cands = nerl.extract_candidates(doc, matcher, prior)
        assert len(cands) == 1
        assert cands[0].surface == "HD"
        assert cands[0].cui == "C0020179"

    def test_tie_breaks_to_smallest_cui(self, matcher):
        doc = Document("x", "on HD now")
        cands = nerl.extract_candidates(doc, matcher, prior={})
        assert cands[0].cui == "C0019829"  # < C0020179

    def test_corpus_prior_prefers_globally_frequent_reading(self, matcher):
        docs = [
            Document("a", "huntington disease and huntington disease again"),
            Document("b", "on HD for three hours"),
        ]
        prior = nerl.build_prior(docs, matcher)
        assert prior["hd"]["C0020179"] > prior["hd"]["C0019829"]
        cands = nerl.extract_candidates(docs[1], matcher, prior)
        assert cands[0].cui == "C0020179"

    def test_no_matches_gives_empty_list(self, matcher):
        doc = Document("x", "completely unrelated text")
        assert nerl.extract_candidates(doc, matcher, {}) == []

    def test_window_truncated_at_document_start(self, matcher):
        doc = Document("x", "calciphylaxis was managed at the wound clinic")
        cands = nerl.extract_candidates(doc, matcher, {})
        cand = cands[0]
        assert cand.window_start == 0
        assert cand.mention_start_in_context == 0
        assert cand.context[cand.mention_start_in_context : cand.mention_end_in_context] == "calciphylaxis"

    def test_surface_equals_text_slice_and_window_contains_mention(self, extraction, corpus_docs):
        texts = {d.doc_id: d.text for d in corpus_docs}
        prefilter, filtered, _ = extraction
        for cand in prefilter + filtered:
            text = texts[cand.doc_id]
            assert text[cand.m_start : cand.m_end] == cand.surface
            assert cand.window_start <= cand.m_start < cand.m_end <= cand.window_end
            assert cand.context == text[cand.window_start : cand.window_end]
            inner = cand.context[cand.mention_start_in_context : cand.mention_end_in_context]
            assert inner == cand.surface

    def test_all_candidate_cuis_in_rare_set(self, extraction, store):
        rare = store.rare_umls_codes()
        prefilter, _, _ = extraction
        assert prefilter
        assert all(c.cui in rare for c in prefilter)

    def test_structure_names_attached(self, extraction):
        _, filtered, _ = extraction
        by_surface = {c.surface.lower(): c for c in filtered}
        assert by_surface["rheumatic fever"].structure_name == "History_of_Past_Illness"
        assert by_surface["hd"].structure_name == "Hospital_course"

    def test_extraction_deterministic(self, corpus_docs, matcher):
        prior = nerl.build_prior(corpus_docs, matcher)
        first = [nerl.extract_candidates(d, matcher, prior) for d in corpus_docs]
        second = [nerl.extract_candidates(d, matcher, prior) for d in corpus_docs]
        assert first == second


class TestContextFilters:
    def _candidate(self, context, mention="legionella", structure=None):
        start = context.index(mention)
        return nerl.MentionCandidate(
            doc_id="x",
            m_start=start,
            m_end=start + len(mention),
            surface=mention,
            cui="C0023241",
            context=context,
            window_start=0,
            window_end=len(context),
            mention_start_in_context=start,
            mention_end_in_context=start + len(mention),
            structure_name=structure,
        )

    def test_negation_trigger_drops(self, triggers):
        cand = self._candidate("urinary legionella antigen was also negative")
        assert nerl.apply_context_filters([cand], triggers) == []

    def test_hypothetical_trigger_drops(self, triggers):
        cand = self._candidate("some concern of legionella infection")
        assert nerl.apply_context_filters([cand], triggers) == []

    def test_experiencer_trigger_drops(self, triggers):
        cand = self._candidate("his mother has legionella history")
        assert nerl.apply_context_filters([cand], triggers) == []

    def test_family_history_section_drops(self, triggers):
        cand = self._candidate("legionella treated years ago", structure="Family_History")
        assert nerl.apply_context_filters([cand], triggers) == []

    def test_clean_candidate_retained_unchanged(self, triggers):
        cand = self._candidate("confirmed legionella infection treated fully")
        assert nerl.apply_context_filters([cand], triggers) == [cand]

    def test_monotone_and_idempotent(self, extraction, triggers):
        prefilter, filtered, _ = extraction
        assert set(filtered) <= set(prefilter)
        assert nerl.apply_context_filters(filtered, triggers) == filtered

    def test_trigger_config_from_json_rejects_bad_shapes(self, tmp_path):
        bad = tmp_path / "t.json"
        bad.write_text('{"negation": "nope"}')
        with pytest.raises(Exception):
            TriggerConfig.from_json(bad)


def test_fixture_corpus_hand_counts(extraction):
    """Hand-enumerated: 14 raw candidates, 3 dropped by the filters
    (negated legionella, hypothetical tracheobronchomalacia, family-history
    huntington disease), 11 survivors."""
    prefilter, filtered, _ = extraction
    assert len(prefilter) == 14
    assert len(filtered) == 11
    dropped = {c.surface.lower() for c in set(prefilter) - set(filtered)}
    assert dropped == {"legionella", "tracheobronchomalacia", "huntington disease"}
