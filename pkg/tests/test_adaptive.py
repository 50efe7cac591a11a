"""Rubric-based writing scores, checklist verification, and validation-plan
execution."""

import json
from fractions import Fraction

import pytest

from reval.adaptive import (
    RQ_DEDUCTION_SCHEDULE,
    WQ_RUBRIC,
    RqResult,
    RqTools,
    WqScores,
    evaluate_kic,
    evaluate_wq,
    execute_rq,
    execute_rq_items,
)
from reval.evidence import EvidenceCache, FixtureFetchBackend, FixtureSearchBackend
from reval.gateway import Gateway, ScriptedBackend
from reval.protocol import KicItem, Protocol, RqItem, ValidationPlan
from reval.report import parse_report
from reval.scoring import rq_score, wq_final

URL_A = "https://www.iea.org/reports/2024"


def gw(responses):
    return Gateway(ScriptedBackend(responses), mode="live")


def make_protocol(kic_questions=("Q1?", "Q2?", "Q3?"), n_rq=1):
    kic = tuple(KicItem(question=q, grounding=((URL_A, "snippet"),))
                for q in kic_questions)
    rq = tuple(RqItem(
        question=f"RQ{i}?",
        plan=ValidationPlan(extract_step="pull chains",
                            verify_step="check with web_search",
                            compare_step="compare to sources"),
        grounding=((URL_A, "snippet"),)) for i in range(n_rq))
    return Protocol(task_id="t", query="q", created_at="2026-08-20T00:00:00Z",
                    tools_selected=frozenset({"web_search", "url_fetch"}),
                    kic_items=kic, rq_items=rq)


class TestRubric:
    def test_sub_weights_sum_to_one(self):
        for dimension, subs in WQ_RUBRIC.items():
            assert sum(w for _, w, _ in subs) == 1

    def test_three_dimensions(self):
        assert list(WQ_RUBRIC) == ["IdeasContent", "Organization",
                                   "SentenceFluency"]
        assert [len(v) for v in WQ_RUBRIC.values()] == [4, 3, 3]


class TestEvaluateWq:
    @staticmethod
    def responses(ideas, org, fluency):
        def payload(dim, values):
            names = [n for n, _, _ in WQ_RUBRIC[dim]]
            return json.dumps({"sub_scores": dict(zip(names, values))})
        return [payload("IdeasContent", ideas), payload("Organization", org),
                payload("SentenceFluency", fluency)]

    def test_weighted_dimension_scores(self):
        report = parse_report("body", "t", "q")
        scores = evaluate_wq(report, gw(self.responses(
            [80, 80, 80, 80], [70, 90, 50], [60, 70, 80])))
        assert scores.dimension_scores["IdeasContent"] == 80
        # 0.3*70 + 0.4*90 + 0.3*50
        assert scores.dimension_scores["Organization"] == 72
        # 0.3*60 + 0.3*70 + 0.4*80
        assert scores.dimension_scores["SentenceFluency"] == 71
        assert wq_final(scores) == Fraction(223, 300)

    def test_linearity_in_sub_scores(self):
        report = parse_report("body", "t", "q")
        half = evaluate_wq(report, gw(self.responses(
            [40] * 4, [40] * 3, [40] * 3)))
        full = evaluate_wq(report, gw(self.responses(
            [80] * 4, [80] * 3, [80] * 3)))
        assert wq_final(full) == 2 * wq_final(half)

    def test_out_of_band_dimension_rejected(self):
        with pytest.raises(ValueError):
            WqScores(dimension_scores={"IdeasContent": Fraction(101)},
                     sub_scores={})


class TestEvaluateKic:
    def test_verdicts_aligned_with_items(self):
        report = parse_report("body", "t", "q")
        responses = [json.dumps({"verdict": v, "justification": f"j{v}"})
                     for v in ("yes", "no", "yes")]
        out = evaluate_kic(report, make_protocol(), gw(responses))
        assert out.verdicts == ("yes", "no", "yes")
        assert len(out.justifications) == 3

    def test_failed_item_degrades_to_no(self):
        report = parse_report("body", "t", "q")
        responses = [json.dumps({"verdict": "yes"})] + ["garbage"] * 3 + \
            [json.dumps({"verdict": "yes"})]
        out = evaluate_kic(report, make_protocol(), gw(responses))
        assert out.verdicts == ("yes", "no", "yes")
        assert out.justifications[1].startswith("degraded")

    def test_empty_checklist_rejected(self):
        report = parse_report("body", "t", "q")
        with pytest.raises(ValueError):
            evaluate_kic(report, make_protocol(kic_questions=()), gw([]))


class TestRqResult:
    def test_consistency_enforced(self):
        with pytest.raises(ValueError):
            RqResult(raw_score=5, deductions=[("minor gap", 3)])

    def test_floor_at_zero(self):
        result = RqResult(raw_score=0,
                          deductions=[("circular argument", 3)] * 4)
        assert result.raw_score == 0

    def test_schedule_shape(self):
        assert dict(RQ_DEDUCTION_SCHEDULE)["unsupported causal claim"] == 3


def rq_tools(search=None, fetch=None):
    return RqTools(search_backend=FixtureSearchBackend(search or {}),
                   fetch_backend=FixtureFetchBackend(fetch or {}),
                   cache=EvidenceCache())


class TestExecuteRq:
    EXTRACT = json.dumps({"chains": ["argument: solar grows because costs fall"]})
    VERIFY = json.dumps({"queries": ["solar cost trend"]})

    def test_full_plan(self):
        report = parse_report("Solar grows because costs fall.", "t", "q")
        compare = json.dumps({"deductions": [
            {"reason": "ignored counter-evidence", "points": 2},
            {"reason": "minor gap", "points": 1},
        ]})
        result = execute_rq(
            report, make_protocol().rq_items[0],
            rq_tools(search={"solar cost trend": [{"url": URL_A}]},
                     fetch={URL_A: {"status": "ok",
                                    "content_text": "Costs fell 90%."}}),
            gw([self.EXTRACT, self.VERIFY, compare]))
        assert result.raw_score == 7
        assert result.incomplete is False
        steps = [t["step"] for t in result.transcript]
        assert steps == ["extract", "plan_verification", "search", "fetch",
                         "compare"]

    def test_budget_exhaustion_flags_incomplete(self):
        report = parse_report("body", "t", "q")
        compare = json.dumps({"deductions": []})
        result = execute_rq(report, make_protocol().rq_items[0], rq_tools(),
                            gw([self.EXTRACT, compare]), budget=1)
        assert result.incomplete is True
        assert result.raw_score == 10

    def test_items_scored_in_order(self):
        report = parse_report("body", "t", "q")
        per_item = [self.EXTRACT, self.VERIFY,
                    json.dumps({"deductions": [{"reason": "minor gap",
                                                "points": 1}]})]
        results = execute_rq_items(report, make_protocol(n_rq=2), rq_tools(),
                                   gw(per_item * 2))
        assert [r.raw_score for r in results] == [9, 9]
        assert rq_score(results) == Fraction(9, 10)
