import json
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from tamperloc.annotations import (
    PredictionRecord,
    TimeSegment,
    UtteranceRecord,
    fake_ratio,
    read_manifest,
    read_predictions,
    validate_segment_set,
    write_manifest,
    write_predictions,
)
from tamperloc.errors import DegenerateError, OutOfRangeError, OverlapError, ParseError

from conftest import make_record, make_segments


class TestTimeSegment:
    def test_inverted_interval_rejected(self):
        with pytest.raises(DegenerateError):
            TimeSegment(2.0, 1.0)

    def test_zero_length_rejected(self):
        with pytest.raises(DegenerateError):
            TimeSegment(1.0, 1.0)

    def test_non_finite_rejected(self):
        with pytest.raises(DegenerateError):
            TimeSegment(0.0, math.inf)
        with pytest.raises(DegenerateError):
            TimeSegment(math.nan, 1.0)

    def test_negative_start_rejected(self):
        with pytest.raises(OutOfRangeError):
            TimeSegment(-0.5, 1.0)


class TestValidateSegmentSet:
    def test_worked_example_is_valid(self):
        got = make_segments([(1.5, 2.2), (4.8, 5.6)], duration=8.0)
        assert got.count == 2

    def test_empty_set_is_genuine(self):
        assert make_segments([], duration=8.0).count == 0

    def test_sorting(self):
        got = make_segments([(4.8, 5.6), (1.5, 2.2)], duration=8.0)
        assert [s.start for s in got.segments] == [1.5, 4.8]

    def test_overlap_rejected_when_disjoint_required(self):
        with pytest.raises(OverlapError):
            make_segments([(1.0, 2.0), (1.5, 3.0)], duration=8.0)

    def test_touching_segments_allowed(self):
        got = make_segments([(1.0, 2.0), (2.0, 3.0)], duration=8.0)
        assert got.count == 2

    def test_overlap_allowed_for_predictions(self):
        got = validate_segment_set(
            [TimeSegment(1.0, 2.0), TimeSegment(1.5, 3.0)], 8.0, require_disjoint=False
        )
        assert got.count == 2

    def test_out_of_range_rejected(self):
        with pytest.raises(OutOfRangeError):
            make_segments([(7.0, 9.0)], duration=8.0)


class TestFakeRatio:
    def test_worked_example(self):
        gt = make_segments([(1.5, 2.2), (4.8, 5.6)], duration=8.0)
        assert fake_ratio(gt) == pytest.approx(1.5 / 8.0, abs=1e-12)

    def test_empty_is_zero(self):
        assert fake_ratio(make_segments([], duration=8.0)) == 0.0

    def test_fully_tampered(self):
        assert fake_ratio(make_segments([(0.0, 8.0)], duration=8.0)) == 1.0

    @given(
        st.lists(
            st.tuples(
                st.floats(0.0, 50.0, allow_nan=False), st.floats(0.01, 5.0, allow_nan=False)
            ),
            max_size=6,
        )
    )
    def test_invariant_under_reordering(self, raw):
        # lay segments out disjointly, then shuffle the input order
        pairs = []
        cursor = 0.0
        for offset, width in raw:
            start = cursor + offset
            pairs.append((start, start + width))
            cursor = start + width
        duration = cursor + 1.0
        forward = validate_segment_set(
            [TimeSegment(s, e) for s, e in pairs], duration, require_disjoint=True
        )
        backward = validate_segment_set(
            [TimeSegment(s, e) for s, e in reversed(pairs)], duration, require_disjoint=True
        )
        assert fake_ratio(forward) == fake_ratio(backward)


class TestRecordValidation:
    def test_variant_count_consistency(self):
        record = make_record("u1", 8.0, [(1.5, 2.2), (4.8, 5.6)])
        assert record.variant == "fake2w"

    def test_variant_mismatch_rejected(self):
        gt = make_segments([(1.0, 2.0)], duration=8.0)
        with pytest.raises(ParseError):
            UtteranceRecord("u1", "a.wav", 8.0, "EN", "fake2w", gt)

    def test_unknown_mode_rejected(self):
        with pytest.raises(ParseError):
            PredictionRecord("u1", make_segments([], 8.0), mode="bogus")


class TestManifestIo:
    def test_round_trip(self, tmp_path):
        records = [
            make_record("u1", 8.0, [(1.5, 2.2), (4.8, 5.6)]),
            make_record("u2", 10.0, [], language="VI"),
            make_record("u3", 9.25, [(0.123456789, 1.987654321)]),
        ]
        path = tmp_path / "manifest.jsonl"
        write_manifest(records, path)
        loaded = read_manifest(path)
        assert len(loaded) == len(records)
        for a, b in zip(records, loaded):
            assert a.utt_id == b.utt_id
            assert a.duration == b.duration
            assert a.variant == b.variant
            for sa, sb in zip(a.ground_truth.segments, b.ground_truth.segments):
                assert abs(sa.start - sb.start) < 1e-9
                assert abs(sa.end - sb.end) < 1e-9

    def test_single_line_manifest(self, tmp_path):
        path = tmp_path / "one.jsonl"
        write_manifest([make_record("u1", 8.0, [(1.5, 2.2), (4.8, 5.6)])], path)
        records = read_manifest(path)
        assert len(records) == 1
        assert records[0].ground_truth.count == 2

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("")
        assert read_manifest(path) == []

    def test_malformed_line_number(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        good = json.dumps(
            {
                "utt_id": "u1",
                "audio_path": "a.wav",
                "duration": 8.0,
                "language": "EN",
                "variant": "real",
                "segments": [],
            }
        )
        path.write_text(good + "\n" + good + "\n{not json\n")
        with pytest.raises(ParseError) as excinfo:
            read_manifest(path)
        assert excinfo.value.line == 3

    def test_missing_field_rejected(self, tmp_path):
        path = tmp_path / "schema.jsonl"
        path.write_text(json.dumps({"utt_id": "u1", "duration": 8.0}) + "\n")
        with pytest.raises(ParseError):
            read_manifest(path)

    def test_overlapping_ground_truth_rejected(self, tmp_path):
        path = tmp_path / "overlap.jsonl"
        path.write_text(
            json.dumps(
                {
                    "utt_id": "u1",
                    "audio_path": "a.wav",
                    "duration": 8.0,
                    "language": "EN",
                    "variant": "fake2w",
                    "segments": [[1.0, 2.0], [1.5, 3.0]],
                }
            )
            + "\n"
        )
        with pytest.raises(ParseError) as excinfo:
            read_manifest(path)
        assert excinfo.value.line == 1


class TestPredictionIo:
    def test_round_trip(self, tmp_path):
        preds = [
            PredictionRecord("u1", make_segments([(1.4, 2.3)], 8.0, disjoint=False)),
            PredictionRecord("u2", make_segments([], 8.0), mode="coarse_only"),
        ]
        path = tmp_path / "pred.jsonl"
        write_predictions(preds, path)
        loaded = read_predictions(path, durations={"u1": 8.0, "u2": 8.0})
        assert [p.utt_id for p in loaded] == ["u1", "u2"]
        assert loaded[0].mode == "isa"
        assert loaded[1].mode == "coarse_only"
        assert loaded[0].predictions.segments[0] == TimeSegment(1.4, 2.3)

    def test_byte_stability(self, tmp_path):
        preds = [PredictionRecord("u1", make_segments([(0.123456789, 7.5)], 8.0))]
        p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        write_predictions(preds, p1)
        write_predictions(read_predictions(p1, {"u1": 8.0}), p2)
        assert p1.read_bytes() == p2.read_bytes()
