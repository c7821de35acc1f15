import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tamperloc.annotations import PredictionRecord, TimeSegment, validate_segment_set
from tamperloc.errors import UnknownUttError
from tamperloc.metrics import (
    count_accuracy,
    evaluate_dataset,
    greedy_match,
    iou_matrix,
    mean_iou,
    temporal_iou,
    utterance_metrics,
)

from conftest import make_record

# the worked example: two truths, three predictions
GT = [(1.5, 2.2), (4.8, 5.6)]
PRED = [(1.4, 2.3), (4.5, 5.0), (6.0, 6.5)]


def seg(a, b):
    return TimeSegment(a, b)


def segset(pairs, duration=8.0):
    return validate_segment_set([seg(a, b) for a, b in pairs], duration, require_disjoint=False)


class TestTemporalIou:
    def test_strong_overlap(self):
        assert temporal_iou(seg(1.4, 2.3), seg(1.5, 2.2)) == pytest.approx(0.7 / 0.9, abs=1e-9)

    def test_partial_overlap(self):
        assert temporal_iou(seg(4.5, 5.0), seg(4.8, 5.6)) == pytest.approx(0.2 / 1.1, abs=1e-9)

    def test_identity_and_disjoint(self):
        assert temporal_iou(seg(1.0, 2.0), seg(1.0, 2.0)) == 1.0
        assert temporal_iou(seg(1.0, 2.0), seg(3.0, 4.0)) == 0.0

    @given(
        st.floats(0, 50, allow_nan=False),
        st.floats(0.01, 5, allow_nan=False),
        st.floats(0, 50, allow_nan=False),
        st.floats(0.01, 5, allow_nan=False),
        st.floats(0, 20, allow_nan=False),
    )
    def test_symmetry_range_translation(self, s1, w1, s2, w2, shift):
        a, b = seg(s1, s1 + w1), seg(s2, s2 + w2)
        v = temporal_iou(a, b)
        assert 0.0 <= v <= 1.0
        assert v == temporal_iou(b, a)
        moved = temporal_iou(seg(s1 + shift, s1 + w1 + shift), seg(s2 + shift, s2 + w2 + shift))
        assert moved == pytest.approx(v, abs=1e-9)


class TestGreedyMatch:
    def matrix(self):
        return iou_matrix([seg(*p) for p in PRED], [seg(*g) for g in GT])

    def test_worked_example_at_half(self):
        match = greedy_match(self.matrix(), 0.5)
        assert match.pairs == ((0, 0),)

    def test_worked_example_lenient(self):
        # 0.18 < 0.3, still only the first pair matches
        match = greedy_match(self.matrix(), 0.3)
        assert match.pairs == ((0, 0),)

    def test_perfect_diagonal(self):
        matrix = [[1.0 if i == j else 0.0 for j in range(3)] for i in range(3)]
        match = greedy_match(matrix, 0.5)
        assert sorted(match.pairs) == [(0, 0), (1, 1), (2, 2)]

    def test_tie_breaks_lowest_indices(self):
        matrix = [[0.8, 0.8], [0.8, 0.8]]
        match = greedy_match(matrix, 0.5)
        assert match.pairs == ((0, 0), (1, 1))

    def test_threshold_inclusive(self):
        assert greedy_match([[0.5]], 0.5).pairs == ((0, 0),)
        assert greedy_match([[0.4999]], 0.5).pairs == ()


def brute_force_max_matching(matrix, tau):
    """Exhaustive maximum bipartite matching size on the >= tau graph."""
    n_pred, n_true = len(matrix), len(matrix[0]) if matrix else 0
    best = 0
    preds = range(n_pred)
    for k in range(min(n_pred, n_true), 0, -1):
        for chosen in itertools.combinations(preds, k):
            for perm in itertools.permutations(range(n_true), k):
                if all(matrix[m][n] >= tau for m, n in zip(chosen, perm)):
                    return k
    return best


class TestMatchingProperties:
    @given(
        st.integers(0, 4),
        st.integers(0, 4),
        st.integers(0, 2**32 - 1),
        st.floats(0.05, 1.0, allow_nan=False),
    )
    @settings(max_examples=300, deadline=None)
    def test_one_to_one_and_maximality_bound(self, n_pred, n_true, state, tau):
        rng = np.random.default_rng(state)
        matrix = rng.uniform(size=(n_pred, n_true)).tolist()
        match = greedy_match(matrix, tau) if n_pred and n_true else None
        pairs = match.pairs if match else ()
        assert len({m for m, _ in pairs}) == len(pairs)
        assert len({n for _, n in pairs}) == len(pairs)
        assert all(matrix[m][n] >= tau for m, n in pairs)
        assert len(pairs) <= min(n_pred, n_true)
        if n_pred and n_true:
            assert len(pairs) <= brute_force_max_matching(matrix, tau)
            # greedy is maximal: 1D-interval IoU graphs admit no augmenting
            # pair it could have taken at the same threshold
            for m in range(n_pred):
                if any(p == m for p, _ in pairs):
                    continue
                for n in range(n_true):
                    if any(q == n for _, q in pairs):
                        continue
                    assert matrix[m][n] < tau

    def test_match_count_non_increasing_in_tau(self):
        rng = np.random.default_rng(42)
        for _ in range(50):
            matrix = rng.uniform(size=(4, 3)).tolist()
            sizes = [len(greedy_match(matrix, t).pairs) for t in (0.1, 0.3, 0.5, 0.7, 0.9)]
            assert sizes == sorted(sizes, reverse=True)


class TestUtteranceMetrics:
    def test_worked_example(self):
        metrics = utterance_metrics(segset(GT), segset(PRED), tau=0.5)
        assert (metrics.tp, metrics.fp, metrics.fn) == (1, 2, 1)
        assert metrics.precision == pytest.approx(1 / 3)
        assert metrics.recall == pytest.approx(1 / 2)
        assert metrics.f1 == 0.40
        assert not metrics.count_correct

    def test_fake_with_no_predictions(self):
        metrics = utterance_metrics(segset(GT), segset([]), tau=0.5)
        assert metrics.tp == 0
        assert metrics.f1 == 0.0
        assert metrics.fn == 2

    def test_perfect_predictions(self):
        metrics = utterance_metrics(segset(GT), segset(GT), tau=0.5)
        assert metrics.f1 == 1.0
        assert metrics.count_correct

    def test_genuine_flagged_excluded(self):
        metrics = utterance_metrics(segset([]), segset([(1.0, 2.0)]), tau=0.5)
        assert metrics.excluded_from_f1
        assert metrics.n_pred == 1
        assert metrics.f1 == 0.0

    def test_counts_always_consistent(self):
        rng = np.random.default_rng(17)
        for _ in range(200):
            gt = segset(_random_pairs(rng, rng.integers(0, 4)), duration=None)
            pred = segset(_random_pairs(rng, rng.integers(0, 5)), duration=None)
            for tau in (0.3, 0.5):
                m = utterance_metrics(gt, pred, tau)
                assert m.tp + m.fp == m.n_pred
                assert m.tp + m.fn == m.n_true

    def test_f1_non_increasing_in_tau(self):
        rng = np.random.default_rng(23)
        for _ in range(100):
            gt = segset(_random_pairs(rng, rng.integers(1, 4)), duration=None)
            pred = segset(_random_pairs(rng, rng.integers(0, 5)), duration=None)
            values = [utterance_metrics(gt, pred, t).f1 for t in (0.1, 0.3, 0.5, 0.7, 0.9)]
            assert values == sorted(values, reverse=True)

    def test_anti_fragmentation(self):
        # splitting a correct prediction into fragments below tau hurts
        gt = segset([(1.0, 2.0)])
        whole = utterance_metrics(gt, segset([(1.0, 2.0)]), tau=0.6)
        split = utterance_metrics(gt, segset([(1.0, 1.5), (1.5, 2.0)]), tau=0.6)
        assert whole.f1 == 1.0
        assert split.f1 < whole.f1

    def test_anti_fragmentation_randomized(self):
        rng = np.random.default_rng(31)
        tau = 0.6
        for _ in range(100):
            start = float(rng.uniform(0, 5))
            width = float(rng.uniform(0.4, 1.5))
            cut = float(rng.uniform(0.3, 0.7))  # fragment fractions < tau
            gt = segset([(start, start + width)])
            whole = utterance_metrics(gt, segset([(start, start + width)]), tau)
            frag = segset(
                [(start, start + cut * width), (start + cut * width, start + width)]
            )
            split = utterance_metrics(gt, frag, tau)
            assert whole.f1 == 1.0
            assert split.f1 < 1.0


def _random_pairs(rng, n, span=10.0):
    pairs = []
    for _ in range(int(n)):
        s = float(rng.uniform(0, span - 0.2))
        w = float(rng.uniform(0.05, 2.0))
        pairs.append((s, min(span, s + w)))
    return pairs


class TestCountAccuracy:
    def test_worked_example_contributes_zero(self):
        assert count_accuracy([(2, 3)]) == 0.0

    def test_genuine_correct(self):
        assert count_accuracy([(0, 0)]) == 1.0

    def test_hand_counted_set(self):
        assert count_accuracy([(2, 2), (1, 0), (0, 0), (3, 3)]) == 0.75


class TestMeanIou:
    def test_worked_example(self):
        value = mean_iou(segset(GT), segset(PRED))
        assert value == pytest.approx((0.7 / 0.9 + 0.2 / 1.1) / 2, abs=1e-9)
        assert value == pytest.approx(0.479, abs=1e-3)

    def test_perfect(self):
        assert mean_iou(segset(GT), segset(GT)) == 1.0

    def test_no_predictions(self):
        assert mean_iou(segset(GT), segset([])) == 0.0

    def test_genuine_rejected(self):
        with pytest.raises(ValueError):
            mean_iou(segset([]), segset([]))


# --- independent reference implementation ------------------------------------------


def reference_macro_f1(gt_sets, pred_sets, tau):
    """Second implementation, kept deliberately naive: greedy matching by
    scanning for the max entry, F1 via precision/recall harmonic mean,
    macro average over utterances with at least one true segment."""
    totals = []
    for gts, preds in zip(gt_sets, pred_sets):
        if len(gts) == 0:
            continue
        iou = [
            [
                max(0.0, min(pe, ge) - max(ps, gs))
                / ((pe - ps) + (ge - gs) - max(0.0, min(pe, ge) - max(ps, gs)))
                for gs, ge in gts
            ]
            for ps, pe in preds
        ]
        matched_p, matched_g = set(), set()
        tp = 0
        while True:
            best_val, best_mn = None, None
            for m in range(len(preds)):
                if m in matched_p:
                    continue
                for n in range(len(gts)):
                    if n in matched_g:
                        continue
                    if best_val is None or iou[m][n] > best_val:
                        best_val, best_mn = iou[m][n], (m, n)
            if best_val is None or best_val < tau:
                break
            matched_p.add(best_mn[0])
            matched_g.add(best_mn[1])
            tp += 1
        if tp == 0:
            totals.append(0.0)
            continue
        precision = tp / len(preds)
        recall = tp / len(gts)
        totals.append(2 * precision * recall / (precision + recall))
    return sum(totals) / len(totals) if totals else 0.0


class TestEvaluateDataset:
    def worked_example_records(self):
        record = make_record("u1", 8.0, GT)
        pred = PredictionRecord("u1", segset(PRED))
        return [record], [pred]

    def test_worked_example_report(self):
        records, preds = self.worked_example_records()
        report = evaluate_dataset(records, preds, taus=(0.3, 0.5))
        assert report.overall.f1[0.5] == 0.40
        assert report.overall.f1[0.3] == 0.40
        assert report.overall.count_accuracy == 0.0

    def test_all_perfect(self):
        records, preds = [], []
        for i in range(10):
            r = make_record(f"f{i}", 10.0, [(1.0 + i * 0.1, 2.0), (5.0, 6.0)])
            records.append(r)
            preds.append(
                PredictionRecord(f"f{i}", r.ground_truth)
            )
        for i in range(5):
            records.append(make_record(f"g{i}", 10.0, []))
            preds.append(PredictionRecord(f"g{i}", segset([], 10.0)))
        report = evaluate_dataset(records, preds, taus=(0.3, 0.5))
        assert report.overall.f1[0.5] == 1.0
        assert report.overall.count_accuracy == 1.0
        assert report.overall.false_alarm_rate == 0.0
        assert report.overall.mean_iou == 1.0

    def test_missing_prediction_counts_as_empty(self):
        records, _ = self.worked_example_records()
        records.append(make_record("u2", 8.0, [(1.0, 2.0)]))
        explicit = [
            PredictionRecord("u1", segset(PRED)),
            PredictionRecord("u2", segset([])),
        ]
        with_missing = [PredictionRecord("u1", segset(PRED))]
        full = evaluate_dataset(records, explicit, taus=(0.5,))
        partial = evaluate_dataset(records, with_missing, taus=(0.5,))
        assert partial.missing_predictions == ("u2",)
        assert full.overall.f1 == partial.overall.f1
        assert full.overall.count_accuracy == partial.overall.count_accuracy

    def test_unknown_prediction_rejected(self):
        records, preds = self.worked_example_records()
        preds.append(PredictionRecord("ghost", segset([])))
        with pytest.raises(UnknownUttError):
            evaluate_dataset(records, preds)

    def test_false_alarm_rate(self):
        records = [make_record("g0", 10.0, []), make_record("g1", 10.0, [])]
        preds = [
            PredictionRecord("g0", segset([(1.0, 2.0)], 10.0)),
            PredictionRecord("g1", segset([], 10.0)),
        ]
        report = evaluate_dataset(records, preds, taus=(0.5,))
        assert report.overall.false_alarm_rate == 0.5
        # strict average: genuine utterances never enter the F1 pool
        assert report.overall.f1[0.5] == 0.0
        assert report.overall.n_fake == 0

    def test_genuine_fp_inclusion_switch(self):
        records = [make_record("f0", 10.0, [(1.0, 2.0)]), make_record("g0", 10.0, [])]
        preds = [
            PredictionRecord("f0", segset([(1.0, 2.0)], 10.0)),
            PredictionRecord("g0", segset([(3.0, 4.0)], 10.0)),
        ]
        strict = evaluate_dataset(records, preds, taus=(0.5,))
        folded = evaluate_dataset(records, preds, taus=(0.5,), include_genuine_fp=True)
        assert strict.overall.f1[0.5] == 1.0
        assert folded.overall.f1[0.5] == 0.5

    def test_matches_reference_on_random_instances(self):
        rng = np.random.default_rng(2718)
        for trial in range(200):
            n_utts = int(rng.integers(1, 6))
            records, preds = [], []
            gt_sets, pred_sets = [], []
            for u in range(n_utts):
                n_true = int(rng.integers(0, 4))  # manifest variants cap at 3
                n_pred = int(rng.integers(0, 5))
                gts = sorted(_disjoint_pairs(rng, n_true))
                ps = _random_pairs(rng, n_pred)
                records.append(make_record(f"u{trial}_{u}", 12.0, gts))
                preds.append(PredictionRecord(f"u{trial}_{u}", segset(ps, 12.0)))
                gt_sets.append(gts)
                pred_sets.append(ps)
            for tau in (0.3, 0.5, 0.7):
                report = evaluate_dataset(records, preds, taus=(tau,))
                expected = reference_macro_f1(gt_sets, pred_sets, tau)
                assert report.overall.f1[tau] == pytest.approx(expected, abs=1e-12)

    def test_report_shape(self):
        records, preds = self.worked_example_records()
        payload = evaluate_dataset(records, preds).as_dict()
        for key in ("overall", "per_tau", "per_language", "per_variant"):
            assert key in payload
        assert "EN" in payload["per_language"]
        assert "fake2w" in payload["per_variant"]
        assert payload["per_tau"]["0.5"]["segment_f1"] == 0.40


def _disjoint_pairs(rng, n, span=12.0):
    cuts = np.sort(rng.uniform(0, span, size=2 * n))
    pairs = []
    for i in range(n):
        a, b = float(cuts[2 * i]), float(cuts[2 * i + 1])
        if b - a < 1e-3:
            b = a + 1e-3
        pairs.append((a, b))
    return pairs
