"""
Command-line interface for the lens-vlm pipeline.

Subcommands run the pipeline stages in order:

    render -> build-data -> filter-hard -> synth-requests -> run-episodes -> score -> simulate -> report

Every subcommand reads the merged configuration (defaults, optional TOML
file, flags) and writes a JSON manifest next to its outputs.

Exit codes: 0 success, 2 configuration or input error, 3 endpoint error.
"""

import argparse
import json
import logging
import sys
from collections import Counter
from functools import partial
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import pandas as pd
from pydantic import ValidationError

from src.common.app_config import ConfigError, load_config
from src.common.endpoints import (
    ChatEndpoint,
    EndpointAuthError,
    EndpointError,
    create_chat_endpoint,
    create_ocr_endpoint,
)
from src.common.logging_config import LogPerformance, log_system_info, setup_logging
from src.common.models import PipelineConfig, RawSampleRecord
from src.corpus.evidence import map_spans_to_pages
from src.corpus.export import export_sft_dataset
from src.corpus.hardness import Hardness, classify_samples, split_sft_rl
from src.corpus.padding import pad_with_distractors
from src.corpus.samples import (
    CorpusError,
    EvidenceMap,
    Sample,
    SynthesisRejected,
    load_distractor_pool,
    load_samples,
    write_samples,
)
from src.corpus.synthesis import build_synthesis_request, parse_synthesized_trace
from src.ledger.budget import LedgerError, format_ledger_report, kv_bytes, kv_bytes_per_token, kv_mib
from src.ledger.tokens import get_token_counter
from src.protocol.episode import (
    EpisodeConfig,
    EpisodeJob,
    probe_selections,
    run_episode,
    run_episodes,
    run_select_then_expand,
)
from src.protocol.expand import Expander
from src.protocol.trajectory import Trajectory
from src.render.metrics import create_metrics
from src.render.paginate import PageSet, layout_pages, render_pages
from src.render.presets import RenderError, get_preset, get_profile
from src.render.storage import check_doc_id, write_page_set
from src.scoring.judge import ScoringError
from src.scoring.metrics import GoldAnswer, budget_sweep, score_trajectories
from src.simlab.decomposition import RegimeCurve, SimlabError, load_curve_csv
from src.simlab.sweep import simulate_episodes, sweep

# Initialize logger
logger = logging.getLogger("pipeline_cli")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_ENDPOINT = 3

SAMPLES_FILE = "samples.jsonl"
EVIDENCE_FILE = "evidence.jsonl"
SFT_PAGES_DIR = "sft_pages"

FLOW_RUNNERS = {"direct": run_episode, "select-then-expand": run_select_then_expand}

# Errors that mean the run was misconfigured or fed bad input
INPUT_ERRORS = (ConfigError, CorpusError, RenderError, LedgerError, ScoringError, SimlabError,
                ValidationError, ValueError, OSError, pd.errors.ParserError, pd.errors.EmptyDataError)


def _write_jsonl(path: Path, records: Sequence[Dict[str, Any]]):
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record, sort_keys=True, ensure_ascii=False) + "\n")


def _read_jsonl(path: Path) -> List[Dict[str, Any]]:
    with path.open(encoding="utf-8") as handle:
        return [json.loads(line) for line in handle if line.strip()]


def _parse_floats(text: str) -> List[float]:
    return [float(part) for part in text.split(",") if part.strip()]


class LensPipelineCLI:
    """
    Pipeline orchestrator behind the command line.

    Holds the effective configuration and the shared rendering and token
    counting resources; each ``cmd_*`` method returns an exit code.
    """

    def __init__(self, config: PipelineConfig):
        self.config = config
        self.output_dir = Path(config.paths.output_dir)
        self.metrics = create_metrics(config.render.metrics, config.render.font_path, config.render.advance_ratio)
        self.profile = get_profile(config.render.encoder_profile)
        self.counter = get_token_counter(config.tokenizer)

    # Shared helpers

    def write_manifest(self, name: str, data: Dict[str, Any]) -> Path:
        path = self.output_dir / f"{name}_manifest.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(data, indent=2, sort_keys=True, default=str), encoding="utf-8")
        logger.info(f"Wrote manifest {path}")
        return path

    def input_path(self) -> Path:
        if not self.config.paths.input:
            raise ConfigError("No input file configured; pass --input or set paths.input")
        return Path(self.config.paths.input)

    def samples_path(self) -> Path:
        """Padded samples from build-data when present, else the raw input."""
        built = self.output_dir / SAMPLES_FILE
        return built if built.exists() else self.input_path()

    def load_stage_samples(self, path: Optional[Path] = None) -> List[Sample]:
        samples, rejected = load_samples(path or self.samples_path())
        for message in rejected:
            logger.warning(f"Rejected sample: {message}")
        return samples

    def source_tokens(self, sample: Sample) -> int:
        return sample.source_tokens if sample.source_tokens is not None else self.counter.count(sample.document)

    def render(self, text: str, preset_name: str, rasterize: bool = True) -> PageSet:
        preset = get_preset(preset_name)
        if rasterize:
            return render_pages(text, preset, self.metrics, self.profile)
        return layout_pages(text, preset, self.metrics, self.profile)

    def expander(self) -> Expander:
        ocr_config = self.config.endpoints.get("ocr")
        ocr_factory = None
        if ocr_config and self.config.expand_kind == "ocr_text":
            create_ocr_endpoint(ocr_config)
            ocr_factory = partial(create_ocr_endpoint, ocr_config)
        settings = self.config.render
        return Expander(counter=self.counter, metrics=self.metrics, ocr_factory=ocr_factory,
                        zoom_scale=settings.zoom_scale, min_pixels=settings.min_pixels, max_pixels=settings.max_pixels)

    def endpoint_factory(self, role: str, required: bool = True) -> Optional[Callable[[], ChatEndpoint]]:
        """
        Factory for a configured endpoint role, checked once up front.

        Raises:
            ConfigError: If a required role is not configured
            EndpointAuthError: If its secret is missing
        """
        endpoint_config = self.config.endpoints.get(role)
        if endpoint_config is None:
            if required:
                raise ConfigError(f"No '{role}' endpoint configured")
            return None
        create_chat_endpoint(endpoint_config)
        return lambda: create_chat_endpoint(endpoint_config)

    def evidence_for(self, samples: Sequence[Sample], page_sets: Dict[str, PageSet]) -> Dict[str, EvidenceMap]:
        return {sample.id: map_spans_to_pages(sample.answer_spans, page_sets[sample.id], sample.id)
                for sample in samples}

    # Subcommands

    def cmd_render(self) -> int:
        """Render every input document at every configured preset."""
        path = self.input_path()
        records, rejected = [], 0
        with path.open(encoding="utf-8") as handle:
            for line in handle:
                if not line.strip():
                    continue
                try:
                    record = RawSampleRecord.model_validate_json(line)
                except ValidationError as e:
                    rejected += 1
                    logger.warning(f"Skipping unreadable record in {path}: {e.errors()[0]['msg']}")
                    continue
                try:
                    check_doc_id(record.id)
                except RenderError as e:
                    rejected += 1
                    logger.warning(f"Skipping record in {path}: {e}")
                    continue
                records.append(record)

        summary: Dict[str, Any] = {"input": str(path), "documents": len(records), "rejected": rejected,
                                   "presets": {}}
        for preset_name in self.config.presets:
            pages_dir = self.output_dir / "pages" / preset_name
            icrs, total_pages = [], 0
            with LogPerformance("render", preset=preset_name, documents=len(records)):
                for record in records:
                    tokens = record.source_tokens if record.source_tokens is not None else self.counter.count(record.document)
                    manifest = write_page_set(self.render(record.document, preset_name), pages_dir, record.id, tokens)
                    total_pages += len(manifest.pages)
                    if manifest.icr is not None:
                        icrs.append(manifest.icr)
            mean_icr = round(sum(icrs) / len(icrs), 2) if icrs else None
            summary["presets"][preset_name] = {"pages": total_pages, "mean_icr": mean_icr}
            print(f"[{preset_name}] documents: {len(records)}  pages: {total_pages}  mean ICR: {mean_icr}")

        self.write_manifest("render", summary)
        return EXIT_OK

    def cmd_build_data(self) -> int:
        """Pad samples with distractors and record their evidence pages."""
        samples = self.load_stage_samples(self.input_path())
        corpus = self.config.corpus
        pool = load_distractor_pool(corpus.distractor_pool) if corpus.distractor_pool else []
        if not pool:
            logger.warning("No distractor pool configured; samples are kept unpadded")

        padded, above_ceiling = [], 0
        for position, sample in enumerate(samples):
            if pool:
                sample = pad_with_distractors(sample, pool, (corpus.distractor_min, corpus.distractor_max),
                                              seed=self.config.seed * 1_000_003 + position, counter=self.counter)
                above_ceiling += bool(sample.warnings)
            padded.append(sample)

        preset_name = self.config.presets[0]
        page_sets = {sample.id: self.render(sample.document, preset_name, rasterize=False) for sample in padded}
        evidence = self.evidence_for(padded, page_sets)
        write_samples(padded, self.output_dir / SAMPLES_FILE)
        _write_jsonl(self.output_dir / EVIDENCE_FILE, [
            {"sample_id": item.sample_id, "preset": preset_name, "evidence_pages": item.ordered,
             "page_count": item.page_count} for item in evidence.values()
        ])

        self.write_manifest("build_data", {
            "samples": len(padded), "above_ceiling": above_ceiling, "preset": preset_name,
            "padded": bool(pool), "without_evidence": sum(1 for item in evidence.values() if not item.evidence_pages),
        })
        print(f"Built {len(padded)} samples ({above_ceiling} above ceiling) at preset {preset_name}")
        return EXIT_OK

    def cmd_filter_hard(self) -> int:
        """Classify samples as easy or hard and split hard ones between SFT and RL."""
        samples = self.load_stage_samples()
        model_factory = self.endpoint_factory("model")
        judge_factory = self.endpoint_factory("judge")
        preset_name = self.config.presets[0]
        items = [(sample, self.render(sample.document, preset_name)) for sample in samples]

        results, report = classify_samples(items, model_factory, judge_factory, self.config.parallelism)
        by_id = {sample.id: sample for sample in samples}
        groups: Dict[Hardness, List[Sample]] = {hardness: [] for hardness in Hardness}
        for result in results:
            groups[result.hardness].append(by_id[result.sample_id])

        sft, rl = split_sft_rl(groups[Hardness.HARD], groups[Hardness.EASY], self.config.seed,
                               self.config.corpus.sft_fraction)
        for name, group in (("hard", groups[Hardness.HARD]), ("easy", groups[Hardness.EASY]),
                            ("unclassified", groups[Hardness.UNCLASSIFIED]), ("sft", sft), ("rl", rl)):
            write_samples(group, self.output_dir / f"{name}.jsonl")
        report.to_frame().to_csv(self.output_dir / "filter_report.csv", index=False)

        self.write_manifest("filter_hard", {"preset": preset_name, "report": report.to_dict(),
                                            "sft": len(sft), "rl": len(rl)})
        print(report.to_frame().to_string(index=False))
        return EXIT_OK

    def cmd_synth_requests(self) -> int:
        """
        Write trace-generation requests; with a synth endpoint, also collect validated traces.

        Accepted traces are exported with their page images under
        ``sft_pages/<preset>/``, referenced relative to the conversations file.
        Endpoint failures are counted per sample; an authentication failure
        stops further synthesis calls and exits 3 once everything is written.
        """
        sft_path = self.output_dir / "sft.jsonl"
        samples = self.load_stage_samples(sft_path if sft_path.exists() else None)
        preset_name = self.config.presets[0]
        synth_factory = self.endpoint_factory("synth", required=False)
        expander = self.expander()
        image_root = f"{SFT_PAGES_DIR}/{preset_name}"

        requests, skipped, failed = [], [], []
        trajectories: List[Trajectory] = []
        rejected = 0
        auth_error: Optional[EndpointAuthError] = None
        for sample in samples:
            page_set = self.render(sample.document, preset_name, rasterize=False)
            evidence = map_spans_to_pages(sample.answer_spans, page_set, sample.id)
            texts = {k: page_set.page(k).text(sample.document) for k in evidence.ordered}
            try:
                request = build_synthesis_request(sample, texts, page_set.page_count)
            except CorpusError as e:
                skipped.append(sample.id)
                logger.warning(f"No synthesis request for {sample.id}: {e}")
                continue
            requests.append(request.to_dict())
            if synth_factory is None or auth_error is not None:
                continue
            try:
                raw = synth_factory().complete(request.messages())
                trajectory = parse_synthesized_trace(raw, request, sample, page_set, expander)
            except SynthesisRejected as e:
                rejected += 1
                logger.info(f"Rejected synthesized trace: {e}")
                continue
            except EndpointAuthError as e:
                auth_error = e
                failed.append(sample.id)
                logger.error(f"Synthesis endpoint rejected credentials at {sample.id}; no further calls")
                continue
            except EndpointError as e:
                failed.append(sample.id)
                logger.warning(f"Synthesis failed for {sample.id}: {e}")
                continue
            write_page_set(self.render(sample.document, preset_name), self.output_dir / image_root, sample.id,
                           self.source_tokens(sample))
            trajectories.append(trajectory)

        _write_jsonl(self.output_dir / "synthesis_requests.jsonl", requests)
        manifest: Dict[str, Any] = {"requests": len(requests), "skipped": skipped, "preset": preset_name}
        if synth_factory is not None:
            export = export_sft_dataset(trajectories, self.output_dir / "sft_conversations.jsonl",
                                        image_root=image_root)
            manifest.update({"accepted": export.written, "rejected": rejected, "failed": len(failed),
                             "failed_ids": failed, "images": image_root})
        self.write_manifest("synth_requests", manifest)
        print(f"Wrote {len(requests)} synthesis requests ({len(skipped)} samples without evidence)")
        if auth_error is not None:
            raise auth_error
        return EXIT_OK

    def cmd_run_episodes(self, flow: str = "direct", probe: bool = False) -> int:
        """
        Run episodes at every preset, then write trajectories and a benchmark report.

        ``flow`` picks the multi-turn tool protocol (``direct``) or the
        prompting-only ``select-then-expand`` flow for untrained endpoints.
        With ``probe`` each document is also put to the single-turn selection
        probe and its hit rate is written next to the report.
        """
        samples = self.load_stage_samples()
        model_factory = self.endpoint_factory("model")
        judge_factory = self.endpoint_factory("judge", required=False)
        expander = self.expander()
        runner = FLOW_RUNNERS[flow]
        gold = {sample.id: GoldAnswer(sample.question, sample.gold_answers) for sample in samples}

        manifest: Dict[str, Any] = {"samples": len(samples), "flow": flow, "presets": {}}
        auth_failures = 0
        for preset_name in self.config.presets:
            page_sets = {sample.id: self.render(sample.document, preset_name) for sample in samples}
            jobs = [EpisodeJob(sample.id, sample.question, page_sets[sample.id], sample.document,
                               self.source_tokens(sample), sample.dataset) for sample in samples]
            config = EpisodeConfig(max_turns=self.config.max_turns, expand_kind=self.config.expand_kind,
                                   preset=get_preset(preset_name), endpoint=self.config.endpoints["model"])

            with LogPerformance("run_episodes", preset=preset_name, episodes=len(jobs), flow=flow):
                trajectories = run_episodes(jobs, config, model_factory, expander, self.config.parallelism,
                                            runner=runner)
            _write_jsonl(self.output_dir / f"trajectories_{preset_name}.jsonl",
                         [trajectory.to_dict() for trajectory in trajectories])
            evidence = self.evidence_for(samples, page_sets)
            _write_jsonl(self.output_dir / f"evidence_{preset_name}.jsonl", [
                {"sample_id": item.sample_id, "preset": preset_name, "evidence_pages": item.ordered,
                 "page_count": item.page_count} for item in evidence.values()
            ])
            auth_failures += sum(1 for trajectory in trajectories if trajectory.error_type == "auth")

            report = score_trajectories(trajectories, gold, evidence, judge_factory,
                                        self.config.parallelism, self.config.force_extract)
            frame = report.to_frame()
            frame.to_csv(self.output_dir / f"report_{preset_name}.csv", index=False)
            manifest["presets"][preset_name] = {
                "episodes": len(trajectories),
                "statuses": dict(Counter(t.status.value for t in trajectories)),
                "report": frame.to_dict(orient="records"),
            }
            print(f"[{preset_name}]\n{report.to_text()}")

            if probe:
                probe_acc = self.selection_probe(jobs, evidence, model_factory, preset_name)
                manifest["presets"][preset_name]["probe_sel_acc"] = probe_acc
                print(f"[{preset_name}] selection probe accuracy: {probe_acc}")

        self.write_manifest("run_episodes", manifest)
        if auth_failures:
            logger.error(f"{auth_failures} episodes failed endpoint authentication")
            return EXIT_ENDPOINT
        return EXIT_OK

    def selection_probe(self, jobs: Sequence[EpisodeJob], evidence: Dict[str, EvidenceMap],
                        model_factory: Callable[[], ChatEndpoint], preset_name: str) -> Optional[float]:
        """Write per-sample probe selections and return the hit rate over samples with evidence."""
        selections = probe_selections(jobs, model_factory, self.config.parallelism)
        rows = []
        for job, selected in zip(jobs, selections):
            pages = evidence[job.sample_id].evidence_pages
            rows.append({"sample_id": job.sample_id, "dataset": job.dataset, "selected": selected,
                         "hit": (selected in pages) if pages else None})
        frame = pd.DataFrame(rows, columns=["sample_id", "dataset", "selected", "hit"])
        frame.to_csv(self.output_dir / f"selection_probe_{preset_name}.csv", index=False)
        hits = [row["hit"] for row in rows if row["hit"] is not None]
        return round(100.0 * sum(hits) / len(hits), 1) if hits else None

    def _load_trajectories(self, path: Path) -> List[Trajectory]:
        return [Trajectory.from_dict(record) for record in _read_jsonl(path)]

    def trajectory_files(self, explicit: Optional[str]) -> List[Path]:
        if explicit:
            return [Path(explicit)]
        files = sorted(self.output_dir.glob("trajectories_*.jsonl"))
        if not files:
            raise ConfigError(f"No trajectory files in {self.output_dir}; run run-episodes first")
        return files

    def cmd_score(self, trajectories_path: Optional[str] = None, budgets: Optional[List[int]] = None) -> int:
        """Judge stored trajectories; optionally sweep tool-call budgets."""
        judge_factory = self.endpoint_factory("judge")
        samples = self.load_stage_samples()
        gold = {sample.id: GoldAnswer(sample.question, sample.gold_answers) for sample in samples}

        manifest: Dict[str, Any] = {"files": {}}
        for path in self.trajectory_files(trajectories_path):
            trajectories = self._load_trajectories(path)
            label = path.stem.replace("trajectories_", "")
            evidence_path = path.with_name(f"evidence_{label}.jsonl")
            evidence = {}
            if evidence_path.exists():
                evidence = {item["sample_id"]: EvidenceMap(item["sample_id"], frozenset(item["evidence_pages"]),
                                                           item["page_count"])
                            for item in _read_jsonl(evidence_path)}

            report = score_trajectories(trajectories, gold, evidence, judge_factory,
                                        self.config.parallelism, self.config.force_extract)
            report.to_frame().to_csv(self.output_dir / f"score_{label}.csv", index=False)
            entry: Dict[str, Any] = {"report": report.to_frame().to_dict(orient="records")}
            print(f"[{label}]\n{report.to_text()}")

            if budgets:
                sweep_frame = budget_sweep(trajectories, gold, judge_factory, budgets, self.config.parallelism)
                sweep_frame.to_csv(self.output_dir / f"budget_sweep_{label}.csv", index=False)
                entry["budget_sweep"] = sweep_frame.to_dict(orient="records")
                print(sweep_frame.to_string(index=False))
            manifest["files"][str(path)] = entry

        self.write_manifest("score", manifest)
        return EXIT_OK

    def cmd_simulate(self, curve_path: Optional[str], rates: Optional[str], qa_acc: Optional[str],
                     sel_acc: Optional[str], err_hit: float, err_miss: float, trials: int = 0) -> int:
        """Sweep selective-expansion benefit over a regime curve."""
        if curve_path:
            curve = load_curve_csv(curve_path)
        elif rates and qa_acc and sel_acc:
            curve = RegimeCurve.from_measured_points(_parse_floats(rates), _parse_floats(qa_acc),
                                                     _parse_floats(sel_acc))
        else:
            raise ConfigError("simulate needs --curve or all of --rates, --qa-acc and --sel-acc")

        result = sweep(curve, err_hit, err_miss)
        table = result.table
        if trials:
            simulated = [simulate_episodes(curve.policy_at(i, err_hit, err_miss), curve.d_no[i], trials,
                                           seed=self.config.seed + i, parallelism=self.config.parallelism)
                         for i in range(len(curve.rates))]
            table = table.assign(sim_no_tool_error=[s.no_tool_error for s in simulated],
                                 sim_with_tool_error=[s.with_tool_error for s in simulated])

        out_path = self.output_dir / "benefit.csv"
        out_path.parent.mkdir(parents=True, exist_ok=True)
        table.to_csv(out_path, index=False)
        self.write_manifest("simulate", {"rates": list(curve.rates), "err_hit": err_hit, "err_miss": err_miss,
                                         "trials": trials, "crossover_rate": result.crossover_rate})
        print(table.to_string(index=False))
        print(f"Crossover rate: {result.crossover_rate}")
        return EXIT_OK

    def cmd_report(self, trajectories_path: Optional[str] = None) -> int:
        """Print per-sample ledger reports and stored benchmark tables."""
        kv = self.config.kv
        per_token = kv_bytes_per_token(kv.layers, kv.kv_heads, kv.head_dim, kv.dtype_bytes)
        summary: Dict[str, Any] = {"bytes_per_token": per_token, "files": {}}

        for path in self.trajectory_files(trajectories_path):
            trajectories = self._load_trajectories(path)
            print(f"== {path.name} ==")
            for trajectory in trajectories:
                print(format_ledger_report(trajectory.ledger, per_token, label=trajectory.sample_id))
            totals = [trajectory.ledger.reader_total for trajectory in trajectories]
            mean_total = sum(totals) / len(totals) if totals else 0.0
            summary["files"][path.name] = {
                "episodes": len(trajectories),
                "mean_reader_tokens": round(mean_total, 1),
                "mean_kv_mib": kv_mib(kv_bytes(round(mean_total), per_token)),
            }
            label = path.stem.replace("trajectories_", "")
            for table_name in (f"report_{label}.csv", f"score_{label}.csv"):
                table_path = self.output_dir / table_name
                if table_path.exists():
                    print(f"-- {table_name} --")
                    print(pd.read_csv(table_path).to_string(index=False))

        self.write_manifest("report", summary)
        return EXIT_OK

    def run(self, args: argparse.Namespace) -> int:
        """Dispatch a parsed command line to its subcommand."""
        if args.command == "render":
            return self.cmd_render()
        if args.command == "build-data":
            return self.cmd_build_data()
        if args.command == "filter-hard":
            return self.cmd_filter_hard()
        if args.command == "synth-requests":
            return self.cmd_synth_requests()
        if args.command == "run-episodes":
            return self.cmd_run_episodes(args.flow, args.probe_selection)
        if args.command == "score":
            return self.cmd_score(args.trajectories, args.budgets)
        if args.command == "simulate":
            return self.cmd_simulate(args.curve, args.rates, args.qa_acc, args.sel_acc,
                                     args.err_hit, args.err_miss, args.trials)
        if args.command == "report":
            return self.cmd_report(args.trajectories)
        raise ConfigError(f"Unknown command: {args.command}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lens-vlm", description="Compressed document reading pipeline")
    parser.add_argument("--config", help="TOML configuration file")
    parser.add_argument("--preset", help="Comma-separated preset names (e.g. 5x,10x)")
    parser.add_argument("--expand-kind", choices=["source_text", "ocr_text", "image_zoom"])
    parser.add_argument("--max-turns", type=int, help="Turn cap T")
    parser.add_argument("--parallelism", type=int, help="Bound on concurrent endpoint calls")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--tokenizer", help="char<N> or hf:<model>")
    parser.add_argument("--input", help="Raw sample JSONL")
    parser.add_argument("--output-dir", help="Directory for all stage outputs")
    parser.add_argument("--force-extract", action="store_true", default=None,
                        help="Judge budget-exhausted trajectories on their last reply")
    parser.add_argument("--log-dir", default="logs", help="Directory for log files")
    parser.add_argument("--verbose", "-v", action="store_true", help="Enable debug logging")

    subparsers = parser.add_subparsers(dest="command", required=True)
    subparsers.add_parser("render", help="Render documents to pages")
    subparsers.add_parser("build-data", help="Pad samples and map evidence pages")
    subparsers.add_parser("filter-hard", help="Split samples into easy and hard")
    subparsers.add_parser("synth-requests", help="Build synthetic trace requests")
    run = subparsers.add_parser("run-episodes", help="Run expansion episodes")
    run.add_argument("--flow", choices=sorted(FLOW_RUNNERS), default="direct",
                     help="Multi-turn tool protocol, or select-then-expand for untrained endpoints")
    run.add_argument("--probe-selection", action="store_true",
                     help="Also ask which page holds the answer and report the hit rate")

    score = subparsers.add_parser("score", help="Judge stored trajectories")
    score.add_argument("--trajectories", help="Trajectory JSONL (default: all in the output dir)")
    score.add_argument("--budgets", type=lambda text: [int(v) for v in text.split(",")],
                       help="Comma-separated tool-call budgets for a retroactive sweep")

    simulate = subparsers.add_parser("simulate", help="Benefit sweep over compression rates")
    simulate.add_argument("--curve", help="CSV with columns rho, d_no, p_hit")
    simulate.add_argument("--rates", help="Comma-separated compression rates")
    simulate.add_argument("--qa-acc", help="Comma-separated no-tool QA accuracy percentages")
    simulate.add_argument("--sel-acc", help="Comma-separated selection accuracy percentages")
    simulate.add_argument("--err-hit", type=float, required=True, help="Error when evidence is expanded")
    simulate.add_argument("--err-miss", type=float, required=True, help="Error when evidence is missed")
    simulate.add_argument("--trials", type=int, default=0, help="Monte-Carlo trials per rate (0 skips)")

    report = subparsers.add_parser("report", help="Print ledger reports and benchmark tables")
    report.add_argument("--trajectories", help="Trajectory JSONL (default: all in the output dir)")
    return parser


def overrides_from_args(args: argparse.Namespace) -> Dict[str, Any]:
    presets = [name.strip() for name in args.preset.split(",") if name.strip()] if args.preset else None
    return {
        "presets": presets,
        "expand_kind": args.expand_kind,
        "max_turns": args.max_turns,
        "parallelism": args.parallelism,
        "seed": args.seed,
        "tokenizer": args.tokenizer,
        "force_extract": args.force_extract,
        "paths.input": args.input,
        "paths.output_dir": args.output_dir,
    }


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main CLI entry point."""
    parser = build_parser()
    args = parser.parse_args(argv)

    setup_logging(debug_mode=args.verbose, log_dir=Path(args.log_dir))
    if args.verbose:
        log_system_info()

    try:
        config = load_config(args.config, overrides_from_args(args))
        cli = LensPipelineCLI(config)
        return cli.run(args)
    except EndpointAuthError as e:
        print(f"Endpoint authentication failed: {e}", file=sys.stderr)
        logger.error(f"Endpoint authentication failed: {e}")
        return EXIT_ENDPOINT
    except EndpointError as e:
        print(f"Endpoint error: {e}", file=sys.stderr)
        logger.error(f"Endpoint error: {e}")
        return EXIT_ENDPOINT
    except INPUT_ERRORS as e:
        print(f"Error: {e}", file=sys.stderr)
        logger.error(f"{args.command} failed: {e}")
        return EXIT_INPUT
    except KeyboardInterrupt:
        print("\nOperation cancelled by user", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
