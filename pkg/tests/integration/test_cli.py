"""
Integration tests driving the pipeline through its command line with
scripted endpoints.
"""

import json

import pandas as pd
import pytest

from src.cli.pipeline_cli import EXIT_ENDPOINT, EXIT_INPUT, EXIT_OK, build_parser, main
from src.common.endpoints import EndpointAuthError
from tests.conftest import final_reply, tool_call_reply, vocabulary_document

ANSWER_SENTENCE = "In the end Pour Moi won the derby by a head."


def sample_document(seed: int, n_chars: int = 3000) -> str:
    text = vocabulary_document(n_chars, seed=seed)
    middle = text.index(" ", len(text) // 2)
    return f"{text[:middle]}. {ANSWER_SENTENCE} {text[middle + 1:]}"


def toml_value(value) -> str:
    if isinstance(value, dict):
        return "{ " + ", ".join(f"{k} = {toml_value(v)}" for k, v in value.items()) + " }"
    return json.dumps(value)


def write_config(path, endpoints=None, **sections) -> str:
    """TOML config with monospace metrics and the given endpoint tables."""
    lines = ['[render]', 'metrics = "monospace"']
    for section, values in sections.items():
        lines.append(f"[{section}]")
        lines.extend(f"{key} = {toml_value(value)}" for key, value in values.items())
    for role, values in (endpoints or {}).items():
        lines.append(f"[endpoints.{role}]")
        lines.extend(f"{key} = {toml_value(value)}" for key, value in values.items())
    path.write_text("\n".join(lines) + "\n")
    return str(path)


@pytest.fixture
def workspace(temp_dir, test_utils):
    """Raw input with three samples from two datasets."""
    records = [
        test_utils.raw_sample(f"s{i}", sample_document(i), "Pour Moi", question="Who won the derby?",
                              dataset="hotpot" if i < 2 else "squad")
        for i in range(3)
    ]
    input_path = test_utils.write_jsonl(temp_dir / "raw.jsonl", records)
    return {"dir": temp_dir, "input": str(input_path), "out": temp_dir / "out", "logs": str(temp_dir / "logs")}


def run_cli(workspace, *args, config=None):
    argv = ["--log-dir", workspace["logs"], "--input", workspace["input"], "--output-dir", str(workspace["out"])]
    if config:
        argv += ["--config", config]
    return main(argv + list(args))


class TestParser:
    """Test cases for argument parsing."""

    @pytest.mark.integration
    def test_subcommands(self):
        parser = build_parser()
        args = parser.parse_args(["--preset", "5x,10x", "score", "--budgets", "1,2,3"])
        assert args.command == "score"
        assert args.budgets == [1, 2, 3]

    @pytest.mark.integration
    def test_simulate_requires_errors(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["simulate", "--rates", "5"])


class TestRenderCommand:
    """Test cases for the render subcommand."""

    @pytest.mark.integration
    def test_render_writes_pages_and_manifest(self, workspace):
        config = write_config(workspace["dir"] / "lens.toml")
        assert run_cli(workspace, "--preset", "5x,15x", "render", config=config) == EXIT_OK

        manifest = json.loads((workspace["out"] / "render_manifest.json").read_text())
        assert manifest["documents"] == 3
        assert set(manifest["presets"]) == {"5x", "15x"}
        assert list((workspace["out"] / "pages" / "5x" / "s0").glob("page_*.png"))
        assert (workspace["out"] / "pages" / "15x" / "s2" / "manifest.json").exists()

    @pytest.mark.integration
    def test_empty_input(self, workspace, temp_dir):
        empty = temp_dir / "empty.jsonl"
        empty.write_text("")
        config = write_config(temp_dir / "lens.toml")
        code = main(["--log-dir", workspace["logs"], "--config", config, "--input", str(empty),
                     "--output-dir", str(workspace["out"]), "render"])
        assert code == EXIT_OK
        manifest = json.loads((workspace["out"] / "render_manifest.json").read_text())
        assert manifest["documents"] == 0

    @pytest.mark.integration
    def test_invalid_preset(self, workspace):
        assert run_cli(workspace, "--preset", "20x", "render") == EXIT_INPUT

    @pytest.mark.integration
    def test_missing_input_file(self, workspace):
        code = main(["--log-dir", workspace["logs"], "--input", str(workspace["dir"] / "absent.jsonl"),
                     "--output-dir", str(workspace["out"]), "render"])
        assert code == EXIT_INPUT

    @pytest.mark.integration
    def test_no_input_configured(self, workspace):
        assert main(["--log-dir", workspace["logs"], "--output-dir", str(workspace["out"]), "render"]) == EXIT_INPUT


class TestEpisodeCommands:
    """Test cases for run-episodes, score and report."""

    @pytest.mark.integration
    def test_run_episodes_report(self, workspace):
        """Expand page 1 then answer; the judge accepts 'pour moi'."""
        config = write_config(workspace["dir"] / "lens.toml", endpoints={
            "model": {"kind": "scripted", "replies": [tool_call_reply(1), final_reply("Pour Moi")]},
            "judge": {"kind": "scripted", "default_reply": "[[YES]]"},
        })
        assert run_cli(workspace, "run-episodes", config=config) == EXIT_OK

        out = workspace["out"]
        trajectories = [json.loads(line) for line in (out / "trajectories_5x.jsonl").read_text().splitlines()]
        assert [t["sample_id"] for t in trajectories] == ["s0", "s1", "s2"]
        assert all(t["status"] == "answered" for t in trajectories)

        report = pd.read_csv(out / "report_5x.csv")
        assert list(report["dataset"]) == ["hotpot", "squad", "macro"]
        assert {"qa_acc", "sel_acc", "ecr", "ecr_ratio_of_sums", "avg_expand_calls", "invalid"} <= set(report.columns)
        assert report["qa_acc"].tolist() == [100.0, 100.0, 100.0]
        assert report["avg_expand_calls"].iloc[0] == 1.0

        manifest = json.loads((out / "run_episodes_manifest.json").read_text())
        assert manifest["presets"]["5x"]["statuses"] == {"answered": 3}

        evidence = [json.loads(line) for line in (out / "evidence_5x.jsonl").read_text().splitlines()]
        assert all(item["evidence_pages"] for item in evidence)

    @pytest.mark.integration
    def test_always_expand_hits_budget(self, workspace):
        """A model that never answers makes five executed calls under six turns."""
        config = write_config(workspace["dir"] / "lens.toml", endpoints={
            "model": {"kind": "scripted", "default_reply": tool_call_reply(1)},
        })
        assert run_cli(workspace, "--max-turns", "6", "run-episodes", config=config) == EXIT_OK

        report = pd.read_csv(workspace["out"] / "report_5x.csv")
        assert report["avg_expand_calls"].tolist()[:2] == [5.0, 5.0]
        assert report["qa_acc"].isna().all()
        manifest = json.loads((workspace["out"] / "run_episodes_manifest.json").read_text())
        assert manifest["presets"]["5x"]["statuses"] == {"budget_exhausted": 3}

    @pytest.mark.integration
    def test_runs_are_deterministic(self, workspace):
        """Identical configuration and inputs give byte-identical trajectories."""
        config = write_config(workspace["dir"] / "lens.toml", endpoints={
            "model": {"kind": "scripted", "replies": [tool_call_reply(2), final_reply("Frankel")]},
        })
        first, second = workspace["dir"] / "run1", workspace["dir"] / "run2"
        for out in (first, second):
            code = main(["--log-dir", workspace["logs"], "--config", config, "--input", workspace["input"],
                         "--output-dir", str(out), "--parallelism", "3", "run-episodes"])
            assert code == EXIT_OK
        assert (first / "trajectories_5x.jsonl").read_bytes() == (second / "trajectories_5x.jsonl").read_bytes()

    @pytest.mark.integration
    def test_select_then_expand_flow_reports_selection_hits(self, workspace):
        """Untrained-endpoint flow: name a page, read it, answer; the selection hit rate is reported."""
        config = write_config(workspace["dir"] / "lens.toml", endpoints={
            "model": {"kind": "scripted", "replies": ["Image 1", "Pour Moi"]},
            "judge": {"kind": "scripted", "default_reply": "[[YES]]"},
        })
        code = run_cli(workspace, "run-episodes", "--flow", "select-then-expand", "--probe-selection",
                       config=config)
        assert code == EXIT_OK

        out = workspace["out"]
        trajectories = [json.loads(line) for line in (out / "trajectories_5x.jsonl").read_text().splitlines()]
        assert all(t["status"] == "answered" and t["final_answer"] == "Pour Moi" for t in trajectories)
        assert all([e["image_index"] for e in t["ledger"]["expansions"]] == [1] for t in trajectories)
        assert pd.read_csv(out / "report_5x.csv")["qa_acc"].iloc[-1] == 100.0

        probe = pd.read_csv(out / "selection_probe_5x.csv")
        assert probe["selected"].tolist() == [1, 1, 1]
        manifest = json.loads((out / "run_episodes_manifest.json").read_text())
        assert manifest["flow"] == "select-then-expand"
        assert manifest["presets"]["5x"]["probe_sel_acc"] == round(100.0 * probe["hit"].mean(), 1)

    @pytest.mark.integration
    def test_unknown_flow_is_rejected(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["run-episodes", "--flow", "retrieve"])

    @pytest.mark.integration
    def test_missing_secret_exits_with_endpoint_code(self, workspace, monkeypatch):
        monkeypatch.delenv("LENS_TEST_ABSENT_KEY", raising=False)
        config = write_config(workspace["dir"] / "lens.toml", endpoints={
            "model": {"kind": "http", "url": "http://127.0.0.1:9/v1/chat/completions",
                      "api_key_env": "LENS_TEST_ABSENT_KEY"},
        })
        assert run_cli(workspace, "run-episodes", config=config) == EXIT_ENDPOINT

    @pytest.mark.integration
    def test_missing_model_endpoint(self, workspace):
        assert run_cli(workspace, "run-episodes", config=write_config(workspace["dir"] / "lens.toml")) == EXIT_INPUT

    @pytest.mark.integration
    def test_score_with_budget_sweep_and_report(self, workspace, capsys):
        config = write_config(workspace["dir"] / "lens.toml", endpoints={
            "model": {"kind": "scripted", "replies": [tool_call_reply(1), final_reply("Pour Moi")]},
            "judge": {"kind": "scripted", "default_reply": "[[YES]]"},
        })
        assert run_cli(workspace, "run-episodes", config=config) == EXIT_OK
        assert run_cli(workspace, "score", "--budgets", "0,1", config=config) == EXIT_OK

        out = workspace["out"]
        assert pd.read_csv(out / "score_5x.csv")["qa_acc"].iloc[-1] == 100.0
        sweep = pd.read_csv(out / "budget_sweep_5x.csv")
        assert sweep["budget"].tolist() == [0, 1]

        capsys.readouterr()
        assert run_cli(workspace, "report", config=config) == EXIT_OK
        printed = capsys.readouterr().out
        assert "Ledger s0" in printed
        assert "-- report_5x.csv --" in printed
        summary = json.loads((out / "report_manifest.json").read_text())
        assert summary["bytes_per_token"] == 32768
        assert summary["files"]["trajectories_5x.jsonl"]["episodes"] == 3

    @pytest.mark.integration
    def test_score_without_trajectories(self, workspace):
        config = write_config(workspace["dir"] / "lens.toml", endpoints={
            "judge": {"kind": "scripted", "default_reply": "[[YES]]"},
        })
        assert run_cli(workspace, "score", config=config) == EXIT_INPUT


class TestDataCommands:
    """Test cases for build-data, filter-hard and synth-requests."""

    @pytest.mark.integration
    def test_build_filter_synth(self, workspace):
        pool_path = workspace["dir"] / "pool.jsonl"
        pool_path.write_text("\n".join(json.dumps(vocabulary_document(1500, seed=100 + i)) for i in range(10)))
        synth_reply = "---RESPONSE1---\n" + tool_call_reply(1) + "\n---RESPONSE2---\n" + final_reply("Pour Moi")
        config = write_config(
            workspace["dir"] / "lens.toml",
            endpoints={
                "model": {"kind": "scripted", "default_reply": "Frankel"},
                "judge": {"kind": "scripted", "default_reply": "[[NO]]"},
                "synth": {"kind": "scripted", "default_reply": synth_reply},
            },
            corpus={"distractor_min": 3000, "distractor_max": 3400, "distractor_pool": str(pool_path)},
        )
        out = workspace["out"]

        assert run_cli(workspace, "build-data", config=config) == EXIT_OK
        build = json.loads((out / "build_data_manifest.json").read_text())
        assert build["samples"] == 3
        assert build["padded"] is True
        for line in (out / "samples.jsonl").read_text().splitlines():
            record = json.loads(line)
            assert 11997 <= len(record["document"]) <= 13600
            for start, end in record["spans"]:
                assert record["document"][start:end] == "Pour Moi"

        assert run_cli(workspace, "filter-hard", config=config) == EXIT_OK
        report = pd.read_csv(out / "filter_report.csv")
        assert report.iloc[-1]["hard"] == 3
        assert report.iloc[-1]["keep_rate"] == 100.0
        assert len((out / "sft.jsonl").read_text().splitlines()) == 2
        assert len((out / "rl.jsonl").read_text().splitlines()) == 1

        assert run_cli(workspace, "synth-requests", config=config) == EXIT_OK
        synth = json.loads((out / "synth_requests_manifest.json").read_text())
        assert synth["requests"] == 2
        assert synth["accepted"] + synth["rejected"] == 2
        requests = [json.loads(line) for line in (out / "synthesis_requests.jsonl").read_text().splitlines()]
        assert all(request["expected_tool_calls"] >= 1 for request in requests)

    @pytest.mark.integration
    def test_synth_endpoint_failures_keep_the_batch(self, workspace):
        """A synthesis endpoint that fails every call still leaves requests and a manifest."""
        assert run_cli(workspace, "build-data", config=write_config(workspace["dir"] / "build.toml")) == EXIT_OK
        config = write_config(workspace["dir"] / "lens.toml", endpoints={"synth": {"kind": "scripted"}})

        assert run_cli(workspace, "synth-requests", config=config) == EXIT_OK
        out = workspace["out"]
        assert len((out / "synthesis_requests.jsonl").read_text().splitlines()) == 3
        manifest = json.loads((out / "synth_requests_manifest.json").read_text())
        assert manifest["failed"] == 3
        assert manifest["failed_ids"] == ["s0", "s1", "s2"]
        assert manifest["accepted"] == 0
        assert (out / "sft_conversations.jsonl").read_text() == ""

    @pytest.mark.integration
    def test_synth_auth_failure_writes_before_exit(self, workspace, mocker):
        """Rejected credentials stop synthesis calls; files are written, then exit 3."""
        assert run_cli(workspace, "build-data", config=write_config(workspace["dir"] / "build.toml")) == EXIT_OK
        endpoint = mocker.Mock()
        endpoint.complete.side_effect = EndpointAuthError("HTTP 401")
        mocker.patch("src.cli.pipeline_cli.create_chat_endpoint", return_value=endpoint)
        config = write_config(workspace["dir"] / "lens.toml", endpoints={"synth": {"kind": "scripted"}})

        assert run_cli(workspace, "synth-requests", config=config) == EXIT_ENDPOINT
        out = workspace["out"]
        assert len((out / "synthesis_requests.jsonl").read_text().splitlines()) == 3
        manifest = json.loads((out / "synth_requests_manifest.json").read_text())
        assert manifest["failed_ids"] == ["s0"]
        assert endpoint.complete.call_count == 1

    @pytest.mark.integration
    def test_accepted_traces_reference_written_images(self, workspace):
        """Every image an exported conversation names exists next to the conversations file."""
        assert run_cli(workspace, "build-data", config=write_config(workspace["dir"] / "build.toml")) == EXIT_OK
        out = workspace["out"]
        evidence = {item["sample_id"]: item for item in
                    map(json.loads, (out / "evidence.jsonl").read_text().splitlines())}
        pages = evidence["s0"]["evidence_pages"]
        parts = [f"---RESPONSE{i}---\n{tool_call_reply(page)}" for i, page in enumerate(pages, start=1)]
        parts.append(f"---RESPONSE{len(pages) + 1}---\n{final_reply('Pour Moi')}")
        config = write_config(workspace["dir"] / "lens.toml",
                              endpoints={"synth": {"kind": "scripted", "default_reply": "\n".join(parts)}})

        assert run_cli(workspace, "synth-requests", config=config) == EXIT_OK
        conversations = [json.loads(line) for line in (out / "sft_conversations.jsonl").read_text().splitlines()]
        assert "s0" in [record["id"] for record in conversations]
        for record in conversations:
            assert len(record["images"]) == evidence[record["id"]]["page_count"]
            assert record["images"][0] == f"sft_pages/5x/{record['id']}/page_0001.png"
            assert all((out / image).is_file() for image in record["images"])

    @pytest.mark.integration
    def test_build_data_without_pool(self, workspace):
        assert run_cli(workspace, "build-data", config=write_config(workspace["dir"] / "lens.toml")) == EXIT_OK
        manifest = json.loads((workspace["out"] / "build_data_manifest.json").read_text())
        assert manifest["padded"] is False


class TestSimulateCommand:
    """Test cases for the simulate subcommand."""

    @pytest.mark.integration
    def test_measured_points(self, workspace, capsys):
        code = main(["--log-dir", workspace["logs"], "--output-dir", str(workspace["out"]), "simulate",
                     "--rates", "5,10,15", "--qa-acc", "31.3,21.0,18.1", "--sel-acc", "76.8,71.0,52.1",
                     "--err-hit", "0.25", "--err-miss", "0.9", "--trials", "20000"])
        assert code == EXIT_OK
        table = pd.read_csv(workspace["out"] / "benefit.csv")
        assert (table["benefit"] > 0).all()
        assert "sim_with_tool_error" in table.columns
        manifest = json.loads((workspace["out"] / "simulate_manifest.json").read_text())
        assert manifest["crossover_rate"] == 5.0
        assert "Crossover rate: 5.0" in capsys.readouterr().out

    @pytest.mark.integration
    def test_curve_file(self, workspace):
        curve = workspace["dir"] / "curve.csv"
        curve.write_text("rho,d_no,p_hit\n1,0.1,0.9\n2,0.3,0.9\n3,0.6,0.9\n")
        code = main(["--log-dir", workspace["logs"], "--output-dir", str(workspace["out"]), "simulate",
                     "--curve", str(curve), "--err-hit", "0.2", "--err-miss", "0.9"])
        assert code == EXIT_OK
        assert json.loads((workspace["out"] / "simulate_manifest.json").read_text())["crossover_rate"] == 2.0

    @pytest.mark.integration
    def test_missing_curve_inputs(self, workspace):
        code = main(["--log-dir", workspace["logs"], "--output-dir", str(workspace["out"]), "simulate",
                     "--rates", "5,10", "--err-hit", "0.2", "--err-miss", "0.9"])
        assert code == EXIT_INPUT

    @pytest.mark.integration
    def test_invalid_probability(self, workspace):
        code = main(["--log-dir", workspace["logs"], "--output-dir", str(workspace["out"]), "simulate",
                     "--rates", "5", "--qa-acc", "31.3", "--sel-acc", "76.8", "--err-hit", "1.5",
                     "--err-miss", "0.9"])
        assert code == EXIT_INPUT
