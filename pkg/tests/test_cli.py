import json

import pytest
from click.testing import CliRunner

from groundwork.cli import main

from conftest import FIXTURES


@pytest.fixture
def runner():
    return CliRunner()


class TestValidate:
    def test_clean_fixture_exits_zero(self, runner):
        result = runner.invoke(main, ["validate", str(FIXTURES / "one_stone.jsonl")])
        assert result.exit_code == 0
        assert "0 errors, 0 warnings" in result.output

    def test_errors_exit_one(self, runner, tmp_path):
        bad = tmp_path / "bad.jsonl"
        bad.write_text(
            json.dumps(
                {
                    "dialog_id": "d", "corpus": "other", "utt_id": 0,
                    "speaker": "A", "ts": None, "text": "x", "flags": [],
                    "labels": [
                        {"cgu": "c1", "act": "Explicit-Ack", "degree": None, "link": None}
                    ],
                }
            )
            + "\n"
        )
        result = runner.invoke(main, ["validate", str(bad)])
        assert result.exit_code == 1
        assert "first-act-not-initiate" in result.output
        assert "1 errors, 0 warnings" in result.output

    def test_unreadable_file_is_failure(self, runner, tmp_path):
        bad = tmp_path / "broken.jsonl"
        bad.write_text("not json\n")
        result = runner.invoke(main, ["validate", str(bad)])
        assert result.exit_code == 1
        assert "line 1" in result.output

    def test_usage_error_exit_two(self, runner):
        result = runner.invoke(main, ["validate", "--no-such-flag"])
        assert result.exit_code == 2


class TestReplay:
    def test_timeline_jsonl(self, runner):
        result = runner.invoke(main, ["replay", str(FIXTURES / "one_stone.jsonl")])
        assert result.exit_code == 0
        rows = [json.loads(line) for line in result.output.splitlines()]
        assert len(rows) == 4
        assert rows[3]["closed_here"] == [{"cgu": "CGU 1", "degree": "Medium"}]
        assert rows[3]["open_after"] == []

    def test_tsv_output_matches_writer(self, runner, tmp_path):
        out = tmp_path / "out.tsv"
        result = runner.invoke(
            main,
            ["replay", str(FIXTURES / "bed_chair.jsonl"), "--format", "tsv",
             "--out", str(out)],
        )
        assert result.exit_code == 0
        assert out.read_text(encoding="utf-8") == (
            FIXTURES / "bed_chair.tsv"
        ).read_text(encoding="utf-8")

    def test_byte_identical_across_runs(self, runner, tmp_path):
        outputs = []
        for name in ("a.tsv", "b.tsv"):
            out = tmp_path / name
            runner.invoke(
                main,
                ["replay", str(FIXTURES / "bed_chair.jsonl"), "--format", "tsv",
                 "--out", str(out)],
            )
            outputs.append(out.read_bytes())
        assert outputs[0] == outputs[1]


class TestStats:
    def test_acts_table_shape(self, runner):
        result = runner.invoke(
            main, ["stats", str(FIXTURES / "one_stone.jsonl"), "--table", "acts"]
        )
        assert result.exit_code == 0
        lines = result.output.splitlines()
        assert lines[0].split() == ["act", "count", "percent"]
        by_name = {line.split()[0]: line.split()[1:] for line in lines[1:-1] if line}
        assert by_name["Initiate"] == ["1", "25.00"]
        assert by_name["Continue"] == ["0", "0.00"]
        assert by_name["total"] == ["4"]
        assert "non-None act counts" in result.output

    def test_json_output(self, runner):
        result = runner.invoke(
            main, ["stats", str(FIXTURES / "bed_chair.jsonl"), "--json"]
        )
        assert result.exit_code == 0
        payload = json.loads(result.output)
        assert payload["acts"]["counts"]["Initiate"] == 2
        assert payload["trajectory"]["revisits"] == 1
        assert payload["trajectory"]["grounded_in_next"] == 2

    def test_trajectory_table(self, runner):
        result = runner.invoke(
            main, ["stats", str(FIXTURES / "bed_chair.jsonl"), "--table", "trajectory"]
        )
        assert result.exit_code == 0
        assert "revisits after grounding    1" in result.output

    def test_reads_tsv_inputs(self, runner):
        result = runner.invoke(
            main, ["stats", str(FIXTURES / "bed_chair.tsv"), "--json"]
        )
        assert result.exit_code == 0
        assert json.loads(result.output)["acts"]["counts"]["Use"] == 2


class TestKappa:
    def test_identical_files(self, runner):
        path = str(FIXTURES / "one_stone.jsonl")
        result = runner.invoke(main, ["kappa", path, path])
        assert result.exit_code == 0
        assert "kappa: 1.0000" in result.output
        assert "(n=4)" in result.output

    def test_disagreeing_annotations(self, runner, tmp_path):
        def write(path, act_for_u3):
            lines = []
            acts = ["Initiate", "Request-Repair", "Repair", act_for_u3]
            for i, act in enumerate(acts):
                lines.append(json.dumps({
                    "dialog_id": "d", "corpus": "std", "utt_id": i,
                    "speaker": "AB"[i % 2], "ts": None, "text": f"u{i}",
                    "flags": [],
                    "labels": [{"cgu": "c1", "act": act, "degree": None, "link": None}],
                }))
            path.write_text("\n".join(lines) + "\n")

        a = tmp_path / "a.jsonl"
        b = tmp_path / "b.jsonl"
        write(a, "Explicit-Ack")
        write(b, "Move-On")
        result = runner.invoke(main, ["kappa", str(a), str(b)])
        assert result.exit_code == 0
        value = float(result.output.split()[1])
        assert 0.0 < value < 1.0

    def test_different_dialogs_rejected(self, runner):
        result = runner.invoke(
            main,
            ["kappa", str(FIXTURES / "one_stone.jsonl"), str(FIXTURES / "bed_chair.jsonl")],
        )
        assert result.exit_code == 1


class TestEncode:
    def test_instance_lines(self, runner, tmp_path):
        out = tmp_path / "inst.jsonl"
        result = runner.invoke(
            main, ["encode", str(FIXTURES / "lamp.jsonl"), "-o", str(out)]
        )
        assert result.exit_code == 0
        rows = [json.loads(line) for line in out.read_text().splitlines()]
        assert len(rows) == 6  # 1 + 2 + 3 instances over the three utterances
        assert rows[-1]["focal"] is None
        assert rows[3]["input"].startswith("<special_token>")
        assert {row["label"] for row in rows} >= {"Use", "None", "Initiate"}

    def test_custom_tokens(self, runner, tmp_path):
        out = tmp_path / "inst.jsonl"
        runner.invoke(
            main,
            ["encode", str(FIXTURES / "lamp.jsonl"), "-o", str(out),
             "--special-token", "@@", "--separator", "%%"],
        )
        rows = [json.loads(line) for line in out.read_text().splitlines()]
        assert rows[3]["input"].startswith("@@")
        assert "%%" in rows[3]["input"]


class TestSplit:
    def write_instances(self, path, spec):
        with open(path, "w") as handle:
            i = 0
            for label, count in spec.items():
                for _ in range(count):
                    handle.write(json.dumps({"input": f"x{i}", "label": label}) + "\n")
                    i += 1

    def test_split_files_and_weights(self, runner, tmp_path):
        src = tmp_path / "inst.jsonl"
        self.write_instances(src, {"Use": 40, "Initiate": 60})
        out_dir = tmp_path / "splits"
        result = runner.invoke(
            main, ["split", str(src), "--out", str(out_dir), "--seed", "3"]
        )
        assert result.exit_code == 0
        train = (out_dir / "train.jsonl").read_text().splitlines()
        dev = (out_dir / "dev.jsonl").read_text().splitlines()
        test = (out_dir / "test.jsonl").read_text().splitlines()
        assert len(train) == 70 and len(dev) == 15 and len(test) == 15
        weights = json.loads((out_dir / "class_weights.json").read_text())
        # train carries 42 Initiate and 28 Use of its 70 instances
        assert weights["Initiate"] == pytest.approx(70 / (2 * 42))
        assert weights["Use"] == pytest.approx(70 / (2 * 28))

    def test_deterministic_for_seed(self, runner, tmp_path):
        src = tmp_path / "inst.jsonl"
        self.write_instances(src, {"a": 23, "b": 9, "c": 41})
        blobs = []
        for d in ("one", "two"):
            out_dir = tmp_path / d
            runner.invoke(main, ["split", str(src), "--out", str(out_dir), "--seed", "11"])
            blobs.append(
                tuple((out_dir / f"{n}.jsonl").read_bytes() for n in ("train", "dev", "test"))
            )
        assert blobs[0] == blobs[1]

    def test_bad_ratios_usage_error(self, runner, tmp_path):
        src = tmp_path / "inst.jsonl"
        self.write_instances(src, {"a": 4})
        result = runner.invoke(
            main, ["split", str(src), "--out", str(tmp_path / "o"), "--ratios", "nope"]
        )
        assert result.exit_code == 2


class TestConfig:
    def test_config_file_sets_defaults_flags_override(self, runner, tmp_path):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"seed": 5, "ratios": "80:10:10"}))
        src = tmp_path / "inst.jsonl"
        TestSplit().write_instances(src, {"a": 100})
        out_dir = tmp_path / "out"
        result = runner.invoke(
            main,
            ["--config", str(config), "split", str(src), "--out", str(out_dir)],
        )
        assert result.exit_code == 0
        assert len((out_dir / "train.jsonl").read_text().splitlines()) == 80
        out_dir2 = tmp_path / "out2"
        result = runner.invoke(
            main,
            ["--config", str(config), "split", str(src), "--out", str(out_dir2),
             "--ratios", "70:15:15"],
        )
        assert result.exit_code == 0
        assert len((out_dir2 / "train.jsonl").read_text().splitlines()) == 70
