import io
import itertools
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from metricconf.scores import (
    ScoreError,
    ScoreMatrix,
    ScoreRecord,
    build_score_set,
    load_scores,
    parse_scores,
    write_scores,
)


def _full_records(metrics=("m1", "m2"), systems=("A", "B"), inputs=("d1", "d2")):
    out = []
    for k, (m, s, d) in enumerate(itertools.product(metrics, systems, inputs)):
        out.append(ScoreRecord(m, s, d, float(k) / 3))
    return out


class TestParse:
    def test_single_jsonl_line(self):
        line = b'{"metric":"m1","system_id":"A","input_id":"d1","score":0.5}\n'
        assert parse_scores(line) == [ScoreRecord("m1", "A", "d1", 0.5)]

    def test_empty(self):
        assert parse_scores(b"") == []
        assert parse_scores(io.BytesIO(b""), "csv") == []

    def test_nan_string_names_line(self):
        line = b'{"metric":"m1","system_id":"A","input_id":"d1","score":"NaN"}'
        with pytest.raises(ScoreError, match="line 1"):
            parse_scores(line)

    @pytest.mark.parametrize("score", ["Infinity", "-Infinity", "true", "null", '"abc"'])
    def test_bad_scores(self, score):
        text = '{"metric":"m","system_id":"A","input_id":"d","score":%s}' % score
        with pytest.raises(ScoreError, match="line 1"):
            parse_scores(text.encode())

    def test_malformed_line_number(self):
        text = (b'{"metric":"m","system_id":"A","input_id":"d","score":1}\n'
                b'{"metric":"m","system_id":"B",\n')
        with pytest.raises(ScoreError, match="line 2"):
            parse_scores(text)

    def test_missing_field(self):
        with pytest.raises(ScoreError, match="system_id"):
            parse_scores(b'{"metric":"m","input_id":"d","score":1}')

    def test_numeric_string_accepted(self):
        recs = parse_scores(b'{"metric":"m","system_id":"A","input_id":"d","score":"0.25"}')
        assert recs[0].score == 0.25

    def test_file_order_and_duplicates_kept(self):
        lines = [b'{"metric":"m","system_id":"%s","input_id":"d","score":1}' % s for s in (b"B", b"A", b"B")]
        recs = parse_scores(b"\n".join(lines))
        assert [r.system_id for r in recs] == ["B", "A", "B"]

    def test_csv_crlf(self):
        text = b"metric,system_id,input_id,score\r\nm1,A,d1,0.5\r\nm1,B,d1,-2e3\r\n"
        recs = parse_scores(text, "csv")
        assert recs == [ScoreRecord("m1", "A", "d1", 0.5), ScoreRecord("m1", "B", "d1", -2000.0)]

    def test_jsonl_crlf_and_bom(self):
        text = '﻿{"metric":"m","system_id":"A","input_id":"d","score":3}\r\n'.encode()
        assert parse_scores(text)[0].score == 3.0

    def test_csv_bad_header(self):
        with pytest.raises(ScoreError, match="score"):
            parse_scores(b"metric,system_id,input_id\nm,A,d\n", "csv")

    def test_csv_nan_line_number(self):
        with pytest.raises(ScoreError, match="line 3"):
            parse_scores(b"metric,system_id,input_id,score\nm,A,d,1\nm,B,d,nan\n", "csv")

    def test_not_utf8(self):
        with pytest.raises(ScoreError):
            parse_scores(b"\xff\xfe\x00")

    def test_load_by_extension(self, tmp_path):
        p = tmp_path / "s.csv"
        p.write_text("metric,system_id,input_id,score\nm,A,d,1\n")
        assert load_scores(p) == [ScoreRecord("m", "A", "d", 1.0)]


class TestBuild:
    def test_complete(self):
        ss = build_score_set(_full_records(), ["m1", "m2"])
        assert ss.systems == ("A", "B") and ss.inputs == ("d1", "d2")
        assert ss["m1"].shape == ss["m2"].shape == (2, 2)
        assert ss["m2"].values[1, 0] == 6 / 3

    def test_strict_reports_missing_cell(self):
        recs = [r for r in _full_records() if (r.metric_name, r.system_id, r.input_id) != ("m2", "B", "d2")]
        with pytest.raises(ScoreError, match="m2/B/d2"):
            build_score_set(recs, ["m1", "m2"])

    def test_drop_incomplete_inputs(self):
        recs = [r for r in _full_records() if (r.metric_name, r.system_id, r.input_id) != ("m2", "B", "d2")]
        ss = build_score_set(recs, ["m1", "m2"], "drop-incomplete-inputs")
        # oracle: inputs scored by every metric for every system
        keep = [d for d in ("d1", "d2")
                if all(any(r.metric_name == m and r.system_id == s and r.input_id == d for r in recs)
                       for m in ("m1", "m2") for s in ("A", "B"))]
        assert list(ss.inputs) == keep == ["d1"]
        assert ss["m1"].shape == ss["m2"].shape == (2, 1)

    def test_drop_incomplete_systems_too_few(self):
        recs = [r for r in _full_records() if (r.metric_name, r.system_id, r.input_id) != ("m2", "B", "d2")]
        with pytest.raises(ScoreError, match="1 system"):
            build_score_set(recs, ["m1", "m2"], "drop-incomplete-systems")

    def test_drop_incomplete_systems(self):
        recs = _full_records(systems=("A", "B", "C"))
        recs = [r for r in recs if (r.metric_name, r.system_id, r.input_id) != ("m1", "C", "d1")]
        ss = build_score_set(recs, ["m1", "m2"], "drop-incomplete-systems")
        assert ss.systems == ("A", "B") and ss.inputs == ("d1", "d2")

    def test_duplicate(self):
        recs = _full_records() + [ScoreRecord("m1", "A", "d1", 9.0)]
        with pytest.raises(ScoreError, match="duplicate"):
            build_score_set(recs, ["m1"])

    def test_unknown_metric(self):
        with pytest.raises(ScoreError, match="m3"):
            build_score_set(_full_records(), ["m1", "m3"])

    def test_unrequested_metrics_ignored(self):
        recs = _full_records() + [ScoreRecord("other", "Z", "dz", 1.0)]
        ss = build_score_set(recs, ["m1"])
        assert ss.systems == ("A", "B")

    def test_bad_policy(self):
        with pytest.raises(ValueError):
            build_score_set(_full_records(), ["m1"], "lenient")

    def test_lexicographic_axes(self):
        recs = [ScoreRecord("m", s, d, 1.0) for s in ("b", "a", "c") for d in ("y", "x")]
        ss = build_score_set(recs, ["m"])
        assert ss.systems == ("a", "b", "c") and ss.inputs == ("x", "y")


class TestScoreMatrix:
    def test_validation(self):
        with pytest.raises(ScoreError):
            ScoreMatrix("m", ("a",), ("d",), [[1.0]])
        with pytest.raises(ScoreError):
            ScoreMatrix("m", ("a", "b"), ("d",), [[1.0], [np.nan]])
        with pytest.raises(ScoreError):
            ScoreMatrix("m", ("a", "b"), ("d",), [[1.0, 2.0]])

    def test_read_only(self):
        m = ScoreMatrix("m", ("a", "b"), ("d",), [[1.0], [2.0]])
        with pytest.raises(ValueError):
            m.values[0, 0] = 5


_ids = st.sampled_from(["a", "b", "c", "d", "e"])


@st.composite
def record_sets(draw):
    systems = draw(st.lists(_ids, min_size=2, max_size=4, unique=True))
    inputs = draw(st.lists(_ids, min_size=1, max_size=4, unique=True))
    metrics = draw(st.lists(st.sampled_from(["m1", "m2", "m3"]), min_size=1, max_size=3, unique=True))
    finite = st.floats(allow_nan=False, allow_infinity=False, width=64)
    recs = [ScoreRecord(m, s, d, draw(finite)) for m in metrics for s in systems for d in inputs]
    return metrics, recs


@settings(max_examples=60, deadline=None)
@given(record_sets(), st.randoms(use_true_random=False))
def test_build_is_permutation_invariant(data, rnd):
    metrics, recs = data
    shuffled = list(recs)
    rnd.shuffle(shuffled)
    assert build_score_set(recs, metrics) == build_score_set(shuffled, metrics)


@settings(max_examples=60, deadline=None)
@given(record_sets(), st.sampled_from(["jsonl", "csv"]))
def test_roundtrip_bit_exact(data, fmt):
    metrics, recs = data
    ss = build_score_set(recs, metrics)
    buf = io.StringIO()
    write_scores(ss.to_records(), buf, fmt)
    again = build_score_set(parse_scores(buf.getvalue().encode(), fmt), metrics)
    assert again == ss
    for m in metrics:
        assert again[m].values.tobytes() == ss[m].values.tobytes()


@settings(max_examples=40, deadline=None)
@given(record_sets())
def test_aligned_axes(data):
    metrics, recs = data
    random.Random(0).shuffle(recs)
    ss = build_score_set(recs, metrics)
    for m in ss.metrics:
        assert ss[m].systems == ss.systems and ss[m].inputs == ss.inputs
        assert ss[m].shape == (len(ss.systems), len(ss.inputs))
