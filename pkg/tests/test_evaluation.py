"""Metric arithmetic, including the reference-table reproductions and an
exhaustive instance-enumeration oracle for the admission-level micro scores."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rarephen import evaluation as ev
from rarephen.errors import DataFormatError
from rarephen.weaklabel import RuleEvaluation


def gold(n_pos: int, n_total: int) -> list[ev.GoldMentionLabel]:
    return [
        ev.GoldMentionLabel(key=(f"d{i}", 0, 5, "C0000001"), label_umls=i < n_pos)
        for i in range(n_total)
    ]


class TestMentionMetrics:
    def test_predict_all_positive_187_of_673(self):
        rows = gold(187, 673)
        report = ev.mention_metrics({g.key: True for g in rows}, rows)
        assert round(100 * report.precision, 1) == 27.8
        assert report.recall == 1.0
        assert round(100 * report.f1, 1) == 43.5

    def test_predict_all_positive_142_of_400(self):
        rows = gold(142, 400)
        report = ev.mention_metrics({g.key: True for g in rows}, rows)
        assert round(100 * report.precision, 1) == 35.5
        assert round(100 * report.f1, 1) == 52.4

    def test_small_confusion_by_hand(self):
        rows = [
            ev.GoldMentionLabel(("a", 0, 1, "C0000001"), True),
            ev.GoldMentionLabel(("b", 0, 1, "C0000001"), True),
            ev.GoldMentionLabel(("c", 0, 1, "C0000001"), True),
            ev.GoldMentionLabel(("d", 0, 1, "C0000001"), False),
        ]
        preds = {rows[0].key: True, rows[1].key: True, rows[2].key: False, rows[3].key: True}
        report = ev.mention_metrics(preds, rows)
        assert (report.tp, report.fp, report.fn) == (2, 1, 1)
        assert report.precision == report.recall == report.f1 == pytest.approx(2 / 3)

    def test_absent_prediction_counts_as_negative(self):
        rows = gold(1, 1)
        report = ev.mention_metrics({}, rows)
        assert (report.tp, report.fn) == (0, 1)
        assert report.recall == 0.0

    def test_duplicate_gold_keys_rejected(self):
        row = ev.GoldMentionLabel(("a", 0, 1, "C0000001"), True)
        with pytest.raises(DataFormatError):
            ev.mention_metrics({}, [row, row])

    def test_zero_denominator_conventions(self):
        report = ev.mention_metrics({}, gold(0, 3))
        assert report.precision == 0.0 and report.recall == 0.0 and report.f1 == 0.0

    def test_perfect_recall_whenever_gold_has_positives(self):
        for n_pos in (1, 5, 50):
            rows = gold(n_pos, 60)
            report = ev.mention_metrics({g.key: True for g in rows}, rows)
            assert report.recall == 1.0

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.tuples(st.booleans(), st.booleans()), min_size=1, max_size=60))
    def test_f1_identity(self, rows):
        labels = [
            ev.GoldMentionLabel((f"d{i}", 0, 1, "C0000001"), g) for i, (g, _) in enumerate(rows)
        ]
        preds = {labels[i].key: p for i, (_, p) in enumerate(rows)}
        report = ev.mention_metrics(preds, labels)
        p, r = report.precision, report.recall
        if p + r > 0:
            assert abs(report.f1 - 2 * p * r / (p + r)) < 1e-12
        else:
            assert report.f1 == 0.0


class TestSeenUnseenSplit:
    KEYS = [(f"d{i}", 0, 1, "C0000001") for i in range(4)]

    def test_four_way_partition(self):
        evals = {
            self.KEYS[0]: RuleEvaluation(True, True),
            self.KEYS[1]: RuleEvaluation(False, False),
            self.KEYS[2]: RuleEvaluation(True, False),
            self.KEYS[3]: RuleEvaluation(False, True),
        }
        splits = ev.seen_unseen_split(self.KEYS, evals)
        assert splits["seen"] == {self.KEYS[0], self.KEYS[1]}
        assert splits["unseen"] == {self.KEYS[2], self.KEYS[3]}
        assert splits["unseen_lambda1"] == {self.KEYS[2]}
        assert splits["unseen_lambda2"] == {self.KEYS[3]}
        assert splits["seen"] | splits["unseen"] == set(self.KEYS)
        assert not splits["seen"] & splits["unseen"]
        assert splits["unseen_lambda1"] | splits["unseen_lambda2"] == splits["unseen"]

    def test_missing_rule_record_rejected(self):
        with pytest.raises(DataFormatError):
            ev.seen_unseen_split(self.KEYS, {})


def oracle_micro(pred, gold_sets, universe):
    """Enumerate every (admission, label) instance and pool the confusion."""
    admissions = sorted(set(pred) | set(gold_sets))
    tp = fp = fn = 0
    for adm in admissions:
        for label in sorted(universe):
            p = label in pred.get(adm, set())
            g = label in gold_sets.get(adm, set())
            tp += p and g
            fp += p and not g
            fn += g and not p
    return tp, fp, fn


class TestMicroAdmissionMetrics:
    def test_partial_overlap_by_hand(self):
        report = ev.micro_admission_metrics(
            {"a1": {"X"}}, {"a1": {"X", "Y"}}, label_universe={"X", "Y"}
        )
        assert (report.tp, report.fn, report.fp) == (1, 1, 0)
        assert report.precision == 1.0 and report.recall == 0.5

    def test_identity(self):
        sets = {"a1": {"X"}, "a2": {"Y", "Z"}}
        report = ev.micro_admission_metrics(sets, sets, label_universe={"X", "Y", "Z"})
        assert report.precision == report.recall == report.f1 == 1.0

    def test_labels_outside_universe_rejected(self):
        with pytest.raises(ValueError):
            ev.micro_admission_metrics({"a": {"X"}}, {}, label_universe=set())

    @settings(max_examples=150, deadline=None)
    @given(st.data())
    def test_matches_enumeration_oracle(self, data):
        universe = [f"L{i}" for i in range(data.draw(st.integers(1, 6)))]
        n_adm = data.draw(st.integers(1, 8))
        subset = st.sets(st.sampled_from(universe))
        pred = {f"a{i}": data.draw(subset) for i in range(n_adm)}
        gold_sets = {f"a{i}": data.draw(subset) for i in range(n_adm)}
        report = ev.micro_admission_metrics(pred, gold_sets, universe)
        assert (report.tp, report.fp, report.fn) == oracle_micro(pred, gold_sets, universe)


class TestScreeningAccuracy:
    def test_reference_fraction(self):
        flagged = list(range(55))
        judgments = [True] * 14 + [False] * 41
        acc = ev.screening_accuracy(flagged, judgments)
        assert round(100 * acc, 1) == 25.5

    def test_all_correct(self):
        assert ev.screening_accuracy([1, 2], [True, True]) == 1.0

    def test_empty_is_undefined(self):
        assert ev.screening_accuracy([], []) is None

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            ev.screening_accuracy([1], [True, False])


class TestMatchingAccuracy:
    def test_reference_counts(self, data_dir):
        judgments = ev.read_match_judgments_csv(data_dir / "match_judgments.csv")
        assert len(judgments) == 95
        unique, weighted = ev.matching_accuracy(judgments)
        assert round(100 * unique, 1) == 87.4
        assert round(100 * weighted, 1) == 81.6
        assert sum(j.n_mentions for j in judgments) == 1073

    def test_all_correct(self):
        judgments = [ev.MatchJudgment("C0000001", "Orphanet_1", 3, True)]
        assert ev.matching_accuracy(judgments) == (1.0, 1.0)

    def test_repeated_wrong_pair_separates_the_two_scores(self):
        judgments = [
            ev.MatchJudgment("C0000001", "Orphanet_1", 1, True),
            ev.MatchJudgment("C0000002", "Orphanet_2", 1, True),
            ev.MatchJudgment("C0000003", "Orphanet_3", 8, False),
        ]
        unique, weighted = ev.matching_accuracy(judgments)
        assert unique == pytest.approx(2 / 3)
        assert weighted == pytest.approx(2 / 10)
        assert unique != weighted


class TestGoldCsv:
    def test_round_trip_fixture(self, data_dir):
        rows = ev.read_gold_csv(data_dir / "gold_mentions.csv")
        assert len(rows) == 11
        assert sum(r.label_umls for r in rows) == 8
        assert all(r.ordo_id and r.label_ordo is not None for r in rows)

    def test_missing_columns_rejected(self, tmp_path):
        bad = tmp_path / "gold.csv"
        bad.write_text("doc_id,m_start\n")
        with pytest.raises(DataFormatError):
            ev.read_gold_csv(bad)
