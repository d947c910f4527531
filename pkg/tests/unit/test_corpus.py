"""
Unit tests for samples, evidence mapping, padding, the hard filter,
trace synthesis and SFT export.
"""

import json

import pytest

from src.common.endpoints import ScriptedEndpoint
from src.common.models import RawSampleRecord
from src.corpus.evidence import map_spans_to_pages
from src.corpus.export import conversation_record, export_sft_dataset, load_sft_dataset
from src.corpus.hardness import (
    FilterReport,
    Hardness,
    classify_hardness,
    classify_samples,
    split_sft_rl,
)
from src.corpus.padding import ABOVE_CEILING, pad_with_distractors
from src.corpus.samples import (
    CorpusError,
    EvidenceMap,
    InvalidSampleError,
    Sample,
    SpanRangeError,
    SynthesisRejected,
    load_distractor_pool,
    load_samples,
    locate_answer_spans,
    write_samples,
)
from src.corpus.synthesis import (
    TRACE_GENERATION_SYSTEM_PROMPT,
    build_synthesis_request,
    parse_synthesized_trace,
    split_responses,
)
from src.ledger.tokens import CharRatioTokenCounter
from src.protocol.grammar import ToolCall
from src.protocol.trajectory import Trajectory, TrajectoryStatus
from src.render.paginate import layout_pages
from src.render.presets import PRESETS
from tests.conftest import final_reply, page_aligned_document, tool_call_reply, vocabulary_document

WINNER_LINE = "The winner that year was Pour Moi, trained in France."


def make_sample(document, answer="Pour Moi", sample_id="s1", dataset="default"):
    return Sample.from_record(RawSampleRecord(id=sample_id, question="Who won the derby?", answers=[answer],
                                              document=document, dataset=dataset))


@pytest.fixture
def winner_document():
    """Three 5x pages with the winner named on page 2."""
    per_page = PRESETS["5x"].lines_per_page
    return page_aligned_document(3, per_page, {per_page + 4: WINNER_LINE})


@pytest.fixture
def winner_layout(winner_document, monospace_metrics):
    return layout_pages(winner_document, PRESETS["5x"], monospace_metrics)


class TestSamples:
    """Test cases for Sample construction and validation."""

    @pytest.mark.unit
    def test_locate_answer_spans(self):
        """Every case-insensitive occurrence, in order."""
        assert locate_answer_spans("pour moi and POUR MOI", ["Pour Moi"]) == [(0, 8), (13, 21)]
        assert locate_answer_spans("nothing", ["Pour Moi", ""]) == []

    @pytest.mark.unit
    def test_from_record_locates_spans(self, winner_document):
        sample = make_sample(winner_document)
        start, end = sample.answer_spans[0]
        assert winner_document[start:end] == "Pour Moi"

    @pytest.mark.unit
    def test_from_record_without_answer(self):
        with pytest.raises(InvalidSampleError):
            make_sample("no winner here")

    @pytest.mark.unit
    def test_span_outside_document(self):
        with pytest.raises(SpanRangeError):
            Sample("s", "q", ("x",), "short x", ((5, 50),)).validate()

    @pytest.mark.unit
    def test_span_without_answer(self):
        with pytest.raises(InvalidSampleError):
            Sample("s", "q", ("Pour Moi",), "Pour Moi won", ((9, 12),)).validate()

    @pytest.mark.unit
    def test_load_and_write_samples(self, temp_dir, test_utils, winner_document):
        """Invalid lines are rejected with a message; valid ones round-trip."""
        path = temp_dir / "raw.jsonl"
        test_utils.write_jsonl(path, [
            test_utils.raw_sample("ok", winner_document, "Pour Moi", dataset="hotpot"),
            {"id": "missing", "question": "q", "answers": ["Frankel"], "document": "no answer"},
        ])
        with path.open("a") as handle:
            handle.write("{not json}\n")

        samples, rejected = load_samples(path)
        assert [s.id for s in samples] == ["ok"]
        assert len(rejected) == 2
        assert rejected[0].startswith("line 2")

        out = temp_dir / "samples.jsonl"
        assert write_samples(samples, out) == 1
        reloaded, _ = load_samples(out)
        assert reloaded == samples
        assert reloaded[0].dataset == "hotpot"

    @pytest.mark.unit
    def test_load_distractor_pool(self, temp_dir):
        jsonl = temp_dir / "pool.jsonl"
        jsonl.write_text(json.dumps("first passage") + "\n" + json.dumps({"text": "second"}) + "\n\n")
        assert load_distractor_pool(jsonl) == ["first passage", "second"]

        text = temp_dir / "pool.txt"
        text.write_text("alpha beta\n\n\ngamma\ndelta\n\n")
        assert load_distractor_pool(text) == ["alpha beta", "gamma\ndelta"]

    @pytest.mark.unit
    def test_evidence_map_bounds(self):
        with pytest.raises(CorpusError):
            EvidenceMap("s", frozenset({0}), 3)
        assert EvidenceMap("s", frozenset({3, 1}), 3).ordered == [1, 3]


class TestEvidenceMapping:
    """Test cases for span-to-page mapping."""

    @pytest.mark.unit
    def test_span_on_one_page(self, winner_document, winner_layout):
        sample = make_sample(winner_document)
        evidence = map_spans_to_pages(sample.answer_spans, winner_layout, sample.id)
        assert evidence.evidence_pages == frozenset({2})
        assert evidence.page_count == 3

    @pytest.mark.unit
    def test_span_straddling_pages(self, winner_layout):
        """A span crossing a page boundary maps to both pages."""
        boundary = winner_layout.page(2).char_span[0]
        evidence = map_spans_to_pages([(boundary - 5, boundary + 5)], winner_layout)
        assert evidence.evidence_pages == frozenset({1, 2})

    @pytest.mark.unit
    def test_union_of_spans(self, winner_layout):
        """Several spans give the union of their pages."""
        last_start = winner_layout.page(3).char_span[0]
        evidence = map_spans_to_pages([(0, 4), (last_start, last_start + 3)], winner_layout)
        assert evidence.ordered == [1, 3]

    @pytest.mark.unit
    @pytest.mark.parametrize("span", [(-1, 3), (10, 10), (0, 10**6)])
    def test_invalid_spans(self, winner_layout, span):
        with pytest.raises(SpanRangeError):
            map_spans_to_pages([span], winner_layout)


class TestPadding:
    """Test cases for distractor padding."""

    @pytest.fixture
    def pool(self):
        return [vocabulary_document(1800, seed=s) for s in range(20)]

    @pytest.mark.unit
    def test_padded_length_in_range(self, pool):
        """Padded documents land inside the target range with valid spans."""
        counter = CharRatioTokenCounter()
        gold = make_sample("Early in June. " + WINNER_LINE + " The crowd cheered.")
        for seed in range(5):
            padded = pad_with_distractors(gold, pool, target=(3000, 3500), seed=seed)
            assert 3000 <= counter.count(padded.document) <= 3500
            assert gold.document in padded.document
            for start, end in padded.answer_spans:
                assert padded.document[start:end] == "Pour Moi"

    @pytest.mark.unit
    def test_padding_is_deterministic(self, pool):
        gold = make_sample(WINNER_LINE)
        first = pad_with_distractors(gold, pool, target=(3000, 4000), seed=11)
        second = pad_with_distractors(gold, pool, target=(3000, 4000), seed=11)
        assert first.document == second.document
        assert first.answer_spans == second.answer_spans

    @pytest.mark.unit
    def test_gold_above_ceiling(self, pool):
        """Long gold documents are kept unpadded with a warning."""
        gold = make_sample("Pour Moi " + "x" * 14000)
        padded = pad_with_distractors(gold, pool, target=(3000, 3000))
        assert padded.document == gold.document
        assert ABOVE_CEILING in padded.warnings

    @pytest.mark.unit
    def test_gold_at_ceiling(self, pool):
        gold = make_sample("Pour Moi" + "y" * 11992)
        padded = pad_with_distractors(gold, pool, target=(3000, 3000))
        assert padded == gold
        assert padded.warnings == ()

    @pytest.mark.unit
    def test_invalid_configuration(self, pool):
        gold = make_sample(WINNER_LINE)
        with pytest.raises(CorpusError):
            pad_with_distractors(gold, pool, target=(1000, 3000))
        with pytest.raises(CorpusError):
            pad_with_distractors(gold, pool, target=(5000, 4000))
        with pytest.raises(CorpusError):
            pad_with_distractors(gold, ["  ", ""])


class TestHardFilter:
    """Test cases for hardness classification and the keep-rate report."""

    @staticmethod
    def judge():
        def reply(messages):
            model_answer = messages[0]["content"].split("[MODEL ANSWER]\n\n")[1]
            return "[[YES]]" if model_answer.lower().startswith("pour moi") else "[[NO]]"
        return ScriptedEndpoint(reply)

    @pytest.mark.unit
    def test_classify_easy_and_hard(self, winner_document, monospace_metrics):
        from src.render.paginate import render_pages

        pages = render_pages(winner_document, PRESETS["5x"], monospace_metrics)
        sample = make_sample(winner_document)
        easy = classify_hardness(sample, pages, ScriptedEndpoint([final_reply("Pour Moi")]), self.judge())
        hard = classify_hardness(sample, pages, ScriptedEndpoint(["Frankel"]), self.judge())
        assert easy.hardness == Hardness.EASY
        assert hard.hardness == Hardness.HARD
        assert hard.answer == "Frankel"

    @pytest.mark.unit
    def test_failures_unclassified(self, small_page_set, winner_document):
        sample = make_sample(winner_document)
        result = classify_hardness(sample, small_page_set, ScriptedEndpoint(["x"]), ScriptedEndpoint(["maybe"]))
        assert result.hardness == Hardness.UNCLASSIFIED
        assert result.error

    @pytest.mark.unit
    def test_requires_rasters(self, winner_layout, winner_document):
        with pytest.raises(CorpusError):
            classify_hardness(make_sample(winner_document), winner_layout, ScriptedEndpoint(["x"]),
                              ScriptedEndpoint(["[[NO]]"]))

    @pytest.mark.unit
    def test_classify_samples_order_and_report(self, small_page_set, winner_document):
        samples = [make_sample(winner_document, sample_id=f"s{i}", dataset="nq") for i in range(6)]

        def model_factory():
            return ScriptedEndpoint(lambda messages: "Pour Moi")

        results, report = classify_samples([(s, small_page_set) for s in samples], model_factory, self.judge,
                                           parallelism=3)
        assert [r.sample_id for r in results] == [f"s{i}" for i in range(6)]
        assert report.generated("nq") == 6
        assert report.kept("nq") == 0
        assert report.keep_rate("nq") == 0.0

    @pytest.mark.unit
    def test_keep_rates(self):
        """Keep rate is hard over generated, per dataset and in total."""
        report = FilterReport()
        report.add("hotpot", Hardness.HARD, 12920)
        report.add("hotpot", Hardness.EASY, 14503 - 12920)
        report.add("others", Hardness.HARD, 105202 - 12920)
        report.add("others", Hardness.EASY, 143145 - 14503 - (105202 - 12920))

        assert report.keep_rate("hotpot") == 89.1
        assert report.total_keep_rate() == 73.5
        frame = report.to_frame()
        assert list(frame["dataset"]) == ["hotpot", "others", "total"]
        assert frame.iloc[-1]["generated"] == 143145
        assert report.to_dict()["total"]["hard"] == 105202

    @pytest.mark.unit
    def test_empty_report(self):
        report = FilterReport()
        assert report.total_keep_rate() == 0.0
        assert report.to_frame().empty

    @pytest.mark.unit
    def test_split_sft_rl(self, winner_document):
        hard = [make_sample(winner_document, sample_id=f"h{i}") for i in range(10)]
        easy = [make_sample(winner_document, sample_id=f"e{i}") for i in range(3)]
        sft, rl = split_sft_rl(hard, easy, seed=5)
        assert len(sft) == 8
        assert len(rl) == 5
        assert {s.id for s in sft}.isdisjoint({s.id for s in rl})
        assert all(s.id.startswith("h") for s in sft)
        assert split_sft_rl(hard, easy, seed=5) == (sft, rl)
        with pytest.raises(CorpusError):
            split_sft_rl(hard, easy, sft_fraction=1.5)


class TestSynthesis:
    """Test cases for synthetic trace requests and validation."""

    @pytest.fixture
    def setup(self, winner_document, winner_layout):
        sample = make_sample(winner_document)
        texts = {2: winner_layout.page(2).text(winner_document)}
        request = build_synthesis_request(sample, texts, winner_layout.page_count)
        return sample, request, winner_layout

    @staticmethod
    def reply(*bodies):
        return "\n".join(f"---RESPONSE{n}---\n{body}" for n, body in enumerate(bodies, start=1))

    @pytest.mark.unit
    def test_request(self, setup):
        _, request, _ = setup
        assert request.system_prompt == TRACE_GENERATION_SYSTEM_PROMPT
        assert request.expected_tool_calls == 1
        assert "Write 2 responses." in request.user_prompt
        assert "[Image 2]" in request.user_prompt
        assert "Answer: Pour Moi" in request.user_prompt
        assert request.to_dict()["messages"][0]["role"] == "system"

    @pytest.mark.unit
    def test_request_requires_evidence(self, winner_document):
        sample = make_sample(winner_document)
        with pytest.raises(InvalidSampleError):
            build_synthesis_request(sample, {}, 3)
        with pytest.raises(InvalidSampleError):
            build_synthesis_request(sample, {4: "x"}, 3)

    @pytest.mark.unit
    def test_accepted_trace(self, setup):
        """Tool responses come from the real page."""
        sample, request, pages = setup
        raw = self.reply(tool_call_reply(2, "The results are probably listed on image 2."),
                         final_reply("Pour Moi", "The text names Pour Moi as the winner."))
        trajectory = parse_synthesized_trace(raw, request, sample, pages)

        assert trajectory.status == TrajectoryStatus.ANSWERED
        assert trajectory.final_answer == "Pour Moi"
        assert trajectory.expanded_pages == [2]
        assert WINNER_LINE in trajectory.turns[0].tool_response
        assert len(trajectory.ledger.expansions) == 1

    @pytest.mark.unit
    @pytest.mark.parametrize("bodies", [
        (tool_call_reply(1), final_reply("Pour Moi")),
        (final_reply("Pour Moi"),),
        (tool_call_reply(2), tool_call_reply(2)),
        ("<think>x</think>no call", final_reply("Pour Moi")),
        (tool_call_reply(2), tool_call_reply(2), final_reply("Pour Moi")),
    ])
    def test_rejected_traces(self, setup, bodies):
        sample, request, pages = setup
        with pytest.raises(SynthesisRejected):
            parse_synthesized_trace(self.reply(*bodies), request, sample, pages)

    @pytest.mark.unit
    def test_split_responses(self):
        assert split_responses("---RESPONSE1---\na\n---RESPONSE2---\nb") == ["a", "b"]
        with pytest.raises(SynthesisRejected):
            split_responses("preamble ---RESPONSE1--- a")
        with pytest.raises(SynthesisRejected):
            split_responses("---RESPONSE1---\na\n---RESPONSE3---\nb")
        with pytest.raises(SynthesisRejected):
            split_responses("no delimiters")


class TestExport:
    """Test cases for SFT export."""

    @pytest.mark.unit
    def test_export_round_trip(self, temp_dir, winner_document, winner_layout):
        sample = make_sample(winner_document)
        request = build_synthesis_request(sample, {2: winner_layout.page(2).text(winner_document)}, 3)
        raw = TestSynthesis.reply(tool_call_reply(2), final_reply("Pour Moi"))
        good = parse_synthesized_trace(raw, request, sample, winner_layout)
        broken = Trajectory.from_dict({**good.to_dict(), "sample_id": "bad", "status": "protocol_error"})

        path = temp_dir / "sft.jsonl"
        report = export_sft_dataset([good, broken], path)
        assert report.to_dict() == {"written": 1, "skipped": 1, "skipped_ids": ["bad"]}

        line = json.loads(path.read_text().splitlines()[0])
        assert [m["loss"] for m in line["messages"]] == ["context", "context", "model", "context", "model"]
        assert line["images"] == ["s1/page_0001.png", "s1/page_0002.png", "s1/page_0003.png"]
        assert load_sft_dataset(path) == [good]

    @pytest.mark.unit
    def test_conversation_record(self, winner_document, winner_layout):
        sample = make_sample(winner_document)
        request = build_synthesis_request(sample, {2: "text"}, 3)
        trajectory = parse_synthesized_trace(
            TestSynthesis.reply(ToolCall("read_text", 2).to_markup(), "Pour Moi"), request, sample, winner_layout)
        record = conversation_record(trajectory)
        assert record["id"] == "s1"
        assert record["meta"]["status"] == "answered"
