import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from groundwork import corpus_io, engine
from groundwork.corpus_io import (
    BadTimestamp,
    FileFormat,
    InvariantViolation,
    ParseError,
    dumps_jsonl,
    dumps_tsv,
    format_timestamp,
    parse_timestamp,
    read_jsonl,
    read_tsv,
    write_jsonl,
    write_tsv,
)
from groundwork.model import (
    ActLabel,
    CorpusTag,
    Degree,
    DialogAnnotation,
    Flag,
    GroundingAct,
    Utterance,
)

from conftest import FIXTURES
from genlegal import gen_dialog


class TestTimestamps:
    @pytest.mark.parametrize(
        "stamp, seconds",
        [("[00:15]", 15), ("[00:00]", 0), ("[01:09]", 69), ("[1:09]", 69),
         ("[1:38]", 98), ("[120:00]", 7200), ("[1:01:05]", 3665)],
    )
    def test_examples(self, stamp, seconds):
        assert parse_timestamp(stamp) == seconds

    @pytest.mark.parametrize(
        "stamp", ["00:15", "[00:75]", "[:15]", "[0015]", "[1:2:3]", "[ab:cd]", ""]
    )
    def test_malformed(self, stamp):
        with pytest.raises(BadTimestamp):
            parse_timestamp(stamp)

    @given(st.integers(0, 300), st.integers(0, 59))
    def test_monotone_in_components(self, minutes, seconds):
        base = parse_timestamp(f"[{minutes:02d}:{seconds:02d}]")
        assert parse_timestamp(f"[{minutes + 1:02d}:{seconds:02d}]") > base
        if seconds < 59:
            assert parse_timestamp(f"[{minutes:02d}:{seconds + 1:02d}]") > base

    @given(st.integers(0, 20000))
    def test_format_parse_round_trip(self, seconds):
        assert parse_timestamp(format_timestamp(seconds)) == seconds

    def test_format_examples(self):
        assert format_timestamp(69) == "[01:09]"
        assert format_timestamp(0) == "[00:00]"
        assert format_timestamp(3665) == "[1:01:05]"


class TestJsonl:
    def test_fixture_shape(self, one_stone):
        assert len(one_stone.utterances) == 4
        assert len(one_stone.labels) == 4
        assert one_stone.corpus_tag is CorpusTag.SPOT_THE_DIFFERENCE

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("")
        corpus = read_jsonl(path)
        assert corpus.dialogs == ()
        assert corpus.format is FileFormat.JSONL

    def test_round_trip_fixtures(self, tmp_path, one_stone, bed_chair, lamp):
        path = tmp_path / "out.jsonl"
        dialogs = (one_stone, bed_chair, lamp)
        write_jsonl(dialogs, path)
        assert read_jsonl(path).dialogs == dialogs

    def test_round_trip_all_act_variants(self, tmp_path):
        # IO round trip only; the label sequence need not replay cleanly
        acts = list(GroundingAct)
        utterances = tuple(Utterance(i, "A", f"u{i}") for i in range(len(acts)))
        labels = tuple(
            ActLabel(i, act, None if act is GroundingAct.NONE else "c1")
            for i, act in enumerate(acts)
        )
        d = DialogAnnotation("acts", CorpusTag.OTHER, utterances, labels)
        path = tmp_path / "acts.jsonl"
        write_jsonl([d], path)
        assert read_jsonl(path).dialogs[0] == d

    def test_flags_preserved(self, tmp_path):
        d = DialogAnnotation(
            "flagged",
            CorpusTag.SPOT_THE_DIFFERENCE,
            (
                Utterance(0, "A", "mumble", flags=frozenset({Flag.MURMUR})),
                Utterance(
                    1, "B", "same time", flags=frozenset({Flag.OVERLAP, Flag.REVISED})
                ),
            ),
            (ActLabel(0, GroundingAct.NONE), ActLabel(1, GroundingAct.NONE)),
        )
        path = tmp_path / "flags.jsonl"
        write_jsonl([d], path)
        assert read_jsonl(path).dialogs[0] == d

    def test_override_and_link_preserved(self, tmp_path):
        d = DialogAnnotation(
            "ov",
            CorpusTag.MEETUP,
            (Utterance(0, "A", "x"), Utterance(1, "B", "y")),
            (
                ActLabel(0, GroundingAct.INITIATE, "c1"),
                ActLabel(
                    1,
                    GroundingAct.USE,
                    "c1",
                    degree_override=Degree.AMBIGUOUS,
                    link_cgu="c0",
                ),
            ),
        )
        path = tmp_path / "ov.jsonl"
        write_jsonl([d], path)
        assert read_jsonl(path).dialogs[0] == d

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.integers(0, 10**6), min_size=1, max_size=4, unique=True))
    def test_round_trip_generated(self, tmp_path_factory, seeds):
        dialogs = tuple(gen_dialog(seed) for seed in seeds)
        path = tmp_path_factory.mktemp("rt") / "gen.jsonl"
        write_jsonl(dialogs, path)
        assert read_jsonl(path).dialogs == dialogs

    def test_initiate_without_cgu_is_invariant_violation(self, tmp_path):
        line = {
            "format_version": 1,
            "dialog_id": "d",
            "corpus": "other",
            "utt_id": 0,
            "speaker": "A",
            "ts": None,
            "text": "x",
            "flags": [],
            "labels": [{"cgu": None, "act": "Initiate", "degree": None, "link": None}],
        }
        path = tmp_path / "bad.jsonl"
        path.write_text(json.dumps(line) + "\n")
        with pytest.raises(InvariantViolation):
            read_jsonl(path)

    def test_bad_json_is_parse_error_with_line(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"dialog_id": "d"\n')
        with pytest.raises(ParseError) as excinfo:
            read_jsonl(path)
        assert excinfo.value.line_no == 1

    def test_unknown_act_is_parse_error(self, tmp_path):
        line = {
            "dialog_id": "d", "corpus": "other", "utt_id": 0, "speaker": "A",
            "ts": None, "text": "x", "flags": [],
            "labels": [{"cgu": "c", "act": "Hold", "degree": None, "link": None}],
        }
        path = tmp_path / "bad.jsonl"
        path.write_text(json.dumps(line) + "\n")
        with pytest.raises(ParseError):
            read_jsonl(path)

    def test_non_dense_ids_rejected(self, tmp_path):
        lines = []
        for utt_id in (0, 2):
            lines.append(json.dumps({
                "dialog_id": "d", "corpus": "other", "utt_id": utt_id,
                "speaker": "A", "ts": None, "text": "x", "flags": [], "labels": [],
            }))
        path = tmp_path / "sparse.jsonl"
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(InvariantViolation):
            read_jsonl(path)

    def test_non_contiguous_dialogs_rejected(self, tmp_path):
        def line(dialog, utt):
            return json.dumps({
                "dialog_id": dialog, "corpus": "other", "utt_id": utt,
                "speaker": "A", "ts": None, "text": "x", "flags": [], "labels": [],
            })
        path = tmp_path / "mixed.jsonl"
        path.write_text("\n".join([line("a", 0), line("b", 0), line("a", 1)]) + "\n")
        with pytest.raises(InvariantViolation):
            read_jsonl(path)

    def test_decreasing_timestamps_rejected(self, tmp_path):
        def line(utt, ts):
            return json.dumps({
                "dialog_id": "d", "corpus": "other", "utt_id": utt,
                "speaker": "A", "ts": ts, "text": "x", "flags": [], "labels": [],
            })
        path = tmp_path / "ts.jsonl"
        path.write_text("\n".join([line(0, 9), line(1, 3)]) + "\n")
        with pytest.raises(InvariantViolation):
            read_jsonl(path)

    def test_bad_override_rejected_at_read(self, tmp_path):
        line = {
            "dialog_id": "d", "corpus": "other", "utt_id": 0, "speaker": "A",
            "ts": None, "text": "x", "flags": [],
            "labels": [{"cgu": "c", "act": "Use", "degree": "High", "link": None}],
        }
        path = tmp_path / "ov.jsonl"
        path.write_text(json.dumps(line) + "\n")
        with pytest.raises(InvariantViolation):
            read_jsonl(path)

    def test_byte_stable_output(self, one_stone, bed_chair):
        first = dumps_jsonl([one_stone, bed_chair])
        second = dumps_jsonl([one_stone, bed_chair])
        assert first == second


class TestTsv:
    def test_fixture_parses(self, bed_chair):
        corpus = read_tsv(FIXTURES / "bed_chair.tsv")
        assert len(corpus.dialogs) == 1
        dialog = corpus.dialogs[0]
        assert len(dialog.utterances) == 6
        assert {l.cgu_id for l in dialog.labels} == {"CGU 1", "CGU 2"}
        assert dialog.utterances == bed_chair.utterances
        assert dialog.labels == bed_chair.labels

    def test_header_only(self, tmp_path):
        path = tmp_path / "empty.tsv"
        path.write_text("\t".join(corpus_io.TSV_COLUMNS) + "\n")
        assert read_tsv(path).dialogs == ()

    def test_missing_header_rejected(self, tmp_path):
        path = tmp_path / "bad.tsv"
        path.write_text("[00:01]\tA\thi\tInitiate\tc1\tc1\t\t\t\n")
        with pytest.raises(ParseError):
            read_tsv(path)

    def test_derived_columns_checked_not_trusted(self, tmp_path, bed_chair):
        text = dumps_tsv([bed_chair])
        # corrupt the first row's open column
        lines = text.splitlines()
        cells = lines[2].split("\t")
        assert cells[5] == "CGU 1"
        cells[5] = "CGU 7"
        lines[2] = "\t".join(cells)
        path = tmp_path / "wrong.tsv"
        path.write_text("\n".join(lines) + "\n")
        dialog = read_tsv(path).dialogs[0]
        codes = [f.code for f in engine.validate(dialog)]
        assert codes == ["derived-column-mismatch"]

    def test_clean_table_validates_clean(self, bed_chair):
        dialog = read_tsv(FIXTURES / "bed_chair.tsv").dialogs[0]
        assert engine.validate(dialog) == []

    def test_writer_output_matches_fixture(self, bed_chair):
        generated = dumps_tsv([bed_chair])
        on_disk = (FIXTURES / "bed_chair.tsv").read_text(encoding="utf-8")
        assert generated == on_disk

    def test_dialog_without_marker_named_after_file(self, tmp_path):
        rows = [
            "\t".join(corpus_io.TSV_COLUMNS),
            "\tA\thello there\tInitiate\tc1\tc1\t\t\t",
        ]
        path = tmp_path / "solo.tsv"
        path.write_text("\n".join(rows) + "\n")
        corpus = read_tsv(path)
        assert corpus.dialogs[0].dialog_id == "solo"

    def test_ambiguous_degree_becomes_override(self, tmp_path):
        rows = [
            "\t".join(corpus_io.TSV_COLUMNS),
            "\tA\tquestion\tInitiate\tc1\tc1\t\t\t",
            "\tB\tno idea\tUse\tc1\t\tc1\tAmbiguous\t",
        ]
        path = tmp_path / "amb.tsv"
        path.write_text("\n".join(rows) + "\n")
        dialog = read_tsv(path).dialogs[0]
        assert dialog.labels[1].degree_override is Degree.AMBIGUOUS
        assert engine.validate(dialog) == []

    def test_multi_dialog_round_trip(self, tmp_path, one_stone, bed_chair):
        path = tmp_path / "two.tsv"
        write_tsv([one_stone, bed_chair], path)
        corpus = read_tsv(path)
        assert [d.dialog_id for d in corpus.dialogs] == ["one_stone", "bed_chair"]
        for original, parsed in zip((one_stone, bed_chair), corpus.dialogs):
            assert parsed.utterances == original.utterances
            assert parsed.labels == original.labels

    def test_timestamps_and_flags_round_trip(self, tmp_path):
        d = DialogAnnotation(
            "timed",
            CorpusTag.SPOT_THE_DIFFERENCE,
            (
                Utterance(0, "A", "look left", ts=5, flags=frozenset({Flag.REVISED})),
                Utterance(1, "B", "ok", ts=9, flags=frozenset({Flag.OVERLAP, Flag.MURMUR})),
            ),
            (
                ActLabel(0, GroundingAct.INITIATE, "c1"),
                ActLabel(1, GroundingAct.EXPLICIT_ACK, "c1"),
            ),
        )
        path = tmp_path / "timed.tsv"
        write_tsv([d], path)
        parsed = read_tsv(path).dialogs[0]
        assert parsed.utterances == d.utterances
        assert parsed.labels == d.labels


class TestTimelineExport:
    def test_rows_shape(self, bed_chair):
        timeline = engine.replay(bed_chair)
        text = corpus_io.dumps_timeline_jsonl(timeline)
        rows = [json.loads(line) for line in text.splitlines()]
        assert len(rows) == 6
        assert rows[1]["closed_here"] == [{"cgu": "CGU 1", "degree": "Medium"}]
        assert rows[4]["reopened_here"] == ["CGU 1"]
        assert rows[5]["open_after"] == []

    def test_deterministic(self, one_stone):
        timeline = engine.replay(one_stone)
        assert corpus_io.dumps_timeline_jsonl(timeline) == corpus_io.dumps_timeline_jsonl(
            engine.replay(one_stone)
        )
