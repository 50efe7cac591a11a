"""Adaptive/static judged metrics: writing quality against the fixed
rubric, checklist verification, and agentic validation-plan execution.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import RevalError
from .evidence import EvidenceCache, FetchBackend, SearchBackend, SearchQuery, search
from .gateway import Gateway, JudgeRequest
from .protocol import Protocol, RqItem
from .report import Report

logger = logging.getLogger(__name__)

DEFAULT_RQ_BUDGET = 15

# Fixed writing-quality rubric: dimension -> [(sub-dimension, weight, prompt)].
# Sub-weights sum to 1.0 within each dimension; the final score is the
# unweighted mean of the three dimension scores.
WQ_RUBRIC: dict[str, list[tuple[str, Fraction, str]]] = {
    "IdeasContent": [
        ("Main Idea Clarity", Fraction(1, 4),
         "This dimension assesses the clarity and specificity of the main idea "
         "expressed in the section summary. A high-quality section will present "
         "a focused and well-articulated central idea that is tightly aligned "
         "with the report question. Summaries lacking precision, or that simply "
         "list general topics without insight or framing, should be penalized. "
         "Do not give high scores if the main idea is vague, overgeneralized, "
         "or merely implied."),
        ("Detail Relevance", Fraction(1, 4),
         "This dimension focuses on how well the supporting details in the "
         "summary reinforce the main idea. Bullet points should be specific, "
         "relevant, and purposefully selected. Low-quality summaries may "
         "include off-topic, overly generic, or redundant details that do not "
         "support the section's main message. Do not reward high scores based "
         "on the amount of content alone—focus on alignment and purpose."),
        ("Information Density", Fraction(1, 4),
         "This dimension measures the information richness of the section "
         "summary. High-density summaries use each bullet to convey important, "
         "non-obvious, and topic-specific content. Shallow summaries repeat "
         "known facts, use vague language, or include fluff. Length alone "
         "should not be rewarded—focus on content value per line."),
        ("Conceptual Synthesis", Fraction(1, 4),
         "This dimension evaluates the structural and conceptual integration "
         "in the summary. Look for signs of synthesis such as: grouping "
         "related points, identifying contrasts, cause-effect relationships, "
         "or thematic framing. Poor summaries are unordered lists with no "
         "visible logic. Do not reward correctness alone—this dimension "
         "rewards insight, not just content."),
    ],
    "Organization": [
        ("Heading Structure", Fraction(3, 10),
         "This dimension assesses the use and clarity of headings in the "
         "section. High-quality summaries include headings that meaningfully "
         "segment the content, reflect topic hierarchy, and help orient the "
         "reader. Avoid rewarding default, generic, or misaligned headings. "
         "Headings should reflect actual conceptual boundaries."),
        ("Bullet Grouping Logic", Fraction(4, 10),
         "This dimension evaluates the internal logic of bullet groupings. "
         "High-quality summaries group related points together according to "
         "thematic, temporal, causal, or hierarchical logic. Low-quality "
         "groupings mix unrelated ideas, interrupt flow, or reflect no "
         "discernible principle."),
        ("Structural Coherence", Fraction(3, 10),
         "This dimension assesses whether the section's structure contributes "
         "to a logical, easy-to-follow reading experience. A coherent "
         "structure will show consistent flow from one part to the next, "
         "maintain logical transitions between bullet blocks, and avoid "
         "jarring shifts. Low-scoring sections often feel fragmented, with "
         "unclear order, repetition, or misplaced content."),
    ],
    "SentenceFluency": [
        ("Rhythm & Variety", Fraction(3, 10),
         "This dimension evaluates how naturally and dynamically the "
         "sentences flow. Strong writing features variation in sentence "
         "length and structure, avoiding repetitive patterns. Rhythm refers "
         "to the pacing and cadence of the prose—whether it reads with "
         "natural emphasis or becomes monotonous. High-scoring writing feels "
         "expressive and crafted, not just correct."),
        ("Transition Smoothness", Fraction(3, 10),
         "This dimension focuses on how smoothly the sentences connect to "
         "each other. High-quality prose includes natural linking phrases, "
         "varied connectors, and logical sequencing. Low-scoring writing "
         "jumps between ideas, or has jarring, abrupt shifts between "
         "sentences. Do not reward correctness alone—this dimension targets "
         "flow between thoughts."),
        ("Readability & Flow", Fraction(4, 10),
         "This dimension evaluates the overall readability and flow of the "
         "paragraph. High-scoring writing reads smoothly aloud and requires "
         "little effort to follow. Low-scoring writing may include awkward "
         "phrasing, overcomplex or confusing sentence structures, or poor "
         "pacing. This metric captures the global fluency felt by readers, "
         "especially in multi-sentence passages."),
    ],
}

# Deduction schedule embedded in the RQ judge prompt; versioned with the
# fixtures so recorded judgments stay interpretable.
RQ_DEDUCTION_SCHEDULE = (
    ("unsupported causal claim", 3),
    ("circular argument", 3),
    ("ignored counter-evidence", 2),
    ("minor gap", 1),
)


@dataclass(frozen=True)
class WqScores:
    dimension_scores: dict[str, Fraction]          # each in [0, 100]
    sub_scores: dict[str, dict[str, int]]

    def __post_init__(self):
        for d, v in self.dimension_scores.items():
            if not 0 <= v <= 100:
                raise ValueError(f"dimension {d} score {v} outside [0, 100]")


@dataclass(frozen=True)
class KicVerdicts:
    verdicts: tuple[str, ...]              # "yes"/"no", aligned with kic_items
    justifications: tuple[str, ...]


@dataclass
class RqResult:
    raw_score: int                          # 0-10
    deductions: list[tuple[str, int]] = field(default_factory=list)
    transcript: list[dict] = field(default_factory=list)
    incomplete: bool = False

    def __post_init__(self):
        expected = max(0, 10 - sum(p for _, p in self.deductions))
        if self.raw_score != expected:
            raise ValueError(
                f"raw score {self.raw_score} inconsistent with deductions "
                f"(expected {expected})")


# --- writing quality -----------------------------------------------------------

def _wq_dimension_schema(sub_names: list[str]) -> dict:
    return {
        "type": "object",
        "properties": {
            "sub_scores": {
                "type": "object",
                "properties": {name: {"type": "integer", "minimum": 0,
                                      "maximum": 100} for name in sub_names},
                "required": sub_names,
            },
        },
        "required": ["sub_scores"],
    }


def evaluate_wq(report: Report, gateway: Gateway) -> WqScores:
    """One judged call per dimension; dimension score is the weighted sum of
    its sub-dimension scores."""
    dimension_scores: dict[str, Fraction] = {}
    sub_scores: dict[str, dict[str, int]] = {}
    for dimension, subs in WQ_RUBRIC.items():
        names = [name for name, _, _ in subs]
        rubric_text = "\n\n".join(f"{name} (weight {float(w):.2f}): {prompt}"
                                  for name, w, prompt in subs)
        req = JudgeRequest(
            role_prompt=(
                f"You score the {dimension} of a research report. Score each "
                "sub-dimension from 0 to 100 using its rubric:\n\n"
                + rubric_text
            ),
            user_prompt=(
                f"Report question: {report.query}\n\nReport:\n{report.text}\n\n"
                "Emit JSON with integer sub_scores."
            ),
            output_schema=_wq_dimension_schema(names),
        )
        payload = gateway.complete_structured(req).payload["sub_scores"]
        sub_scores[dimension] = {n: payload[n] for n in names}
        dimension_scores[dimension] = sum(
            (w * payload[name] for name, w, _ in subs), Fraction(0))
    return WqScores(dimension_scores=dimension_scores, sub_scores=sub_scores)


# --- key-information coverage ----------------------------------------------------

_VERDICT_SCHEMA = {
    "type": "object",
    "properties": {
        "verdict": {"enum": ["yes", "no"]},
        "justification": {"type": "string"},
    },
    "required": ["verdict"],
}


def evaluate_kic(report: Report, protocol: Protocol, gateway: Gateway) -> KicVerdicts:
    """Per-item judged verdicts strictly from report text; no external
    tools. A gateway failure degrades the item to no with a diagnostic."""
    if not protocol.kic_items:
        raise ValueError("protocol has no checklist items")
    verdicts: list[str] = []
    justifications: list[str] = []
    for item in protocol.kic_items:
        req = JudgeRequest(
            role_prompt=(
                "You verify a report against one yes/no checklist question. "
                "Answer yes only if the report states or clearly entails the "
                "key fact; answer no for absent, vaguer, or outdated content. "
                "Judge strictly from the report text."
            ),
            user_prompt=(
                f"Question: {item.question}\n\nReport:\n{report.text}\n\n"
                "Emit JSON."
            ),
            output_schema=_VERDICT_SCHEMA,
        )
        try:
            payload = gateway.complete_structured(req).payload
            verdicts.append(payload["verdict"])
            justifications.append(payload.get("justification", ""))
        except RevalError as exc:
            logger.warning("KIC item degraded to no: %s", exc)
            verdicts.append("no")
            justifications.append(f"degraded: {exc}")
    return KicVerdicts(verdicts=tuple(verdicts),
                       justifications=tuple(justifications))


# --- reasoning quality ----------------------------------------------------------

@dataclass
class RqTools:
    search_backend: SearchBackend
    fetch_backend: FetchBackend
    cache: EvidenceCache = field(default_factory=EvidenceCache)


_EXTRACT_SCHEMA = {
    "type": "object",
    "properties": {
        "chains": {"type": "array", "items": {"type": "string"}},
    },
    "required": ["chains"],
}

_VERIFY_SCHEMA = {
    "type": "object",
    "properties": {
        "queries": {"type": "array", "items": {"type": "string"},
                    "minItems": 1, "maxItems": 4},
    },
    "required": ["queries"],
}

_COMPARE_SCHEMA = {
    "type": "object",
    "properties": {
        "deductions": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "reason": {"type": "string"},
                    "points": {"type": "integer", "minimum": 1, "maximum": 10},
                },
                "required": ["reason", "points"],
            },
        },
    },
    "required": ["deductions"],
}


def execute_rq(report: Report, rq_item: RqItem, tools: RqTools,
               gateway: Gateway, budget: int = DEFAULT_RQ_BUDGET) -> RqResult:
    """Follow the item's validation plan: extract reasoning chains from the
    report, verify them with tools, then compare and deduct from 10.

    A spent budget scores the item from evidence gathered so far and flags
    the result incomplete.
    """
    transcript: list[dict] = []
    steps_used = 0
    incomplete = False

    extract_req = JudgeRequest(
        role_prompt=(
            "You execute the extraction stage of a validation plan, pulling "
            "the relevant reasoning chains out of a report as short quoted "
            "argument summaries."
        ),
        user_prompt=(
            f"Question: {rq_item.question}\nExtraction instructions: "
            f"{rq_item.plan.extract_step}\n\nReport:\n{report.text}\n\nEmit JSON."
        ),
        output_schema=_EXTRACT_SCHEMA,
    )
    chains = gateway.complete_structured(extract_req).payload["chains"]
    transcript.append({"step": "extract", "chains": chains})
    steps_used += 1

    evidence_notes: list[tuple[str, str]] = []
    if steps_used < budget:
        verify_req = JudgeRequest(
            role_prompt=(
                "You execute the verification stage of a validation plan, "
                "planning web searches that can confirm or refute the "
                "extracted reasoning."
            ),
            user_prompt=(
                f"Verification instructions: {rq_item.plan.verify_step}\n"
                f"Reasoning chains:\n" + "\n".join(f"- {c}" for c in chains)
                + "\n\nEmit JSON."
            ),
            output_schema=_VERIFY_SCHEMA,
        )
        queries = gateway.complete_structured(verify_req).payload["queries"]
        transcript.append({"step": "plan_verification", "queries": queries})
        steps_used += 1
        for q in queries:
            if steps_used >= budget:
                incomplete = True
                break
            results = search(SearchQuery(text=q), tools.search_backend)
            steps_used += 1
            transcript.append({"step": "search", "query": q,
                               "urls": [r.url for r in results]})
            for r in results[:2]:
                if steps_used >= budget:
                    incomplete = True
                    break
                doc = tools.cache.fetch(r.url, tools.fetch_backend)
                steps_used += 1
                if doc.status == "ok":
                    evidence_notes.append((doc.url, doc.content_text[:800]))
                transcript.append({"step": "fetch", "url": r.url,
                                   "status": doc.status})
    else:
        incomplete = True

    schedule = "; ".join(f"{reason}: -{pts}" for reason, pts in
                         RQ_DEDUCTION_SCHEDULE)
    compare_req = JudgeRequest(
        role_prompt=(
            "You execute the comparison stage of a validation plan. Start "
            "from 10 points and itemize deductions against this fixed "
            f"schedule: {schedule}. Emit no deduction when the reasoning "
            "holds up against the evidence."
        ),
        user_prompt=(
            f"Comparison criteria: {rq_item.plan.compare_step}\n"
            f"Reasoning chains:\n" + "\n".join(f"- {c}" for c in chains)
            + "\n\nExternal evidence:\n"
            + ("\n".join(f"- ({u}) {t}" for u, t in evidence_notes) or "(none)")
            + ("\n\nNote: verification was cut short by the step budget."
               if incomplete else "")
            + "\n\nEmit JSON."
        ),
        output_schema=_COMPARE_SCHEMA,
    )
    payload = gateway.complete_structured(compare_req).payload
    deductions = [(d["reason"], d["points"]) for d in payload["deductions"]]
    transcript.append({"step": "compare", "deductions":
                       [{"reason": r, "points": p} for r, p in deductions]})
    raw = max(0, 10 - sum(p for _, p in deductions))
    return RqResult(raw_score=raw, deductions=deductions,
                    transcript=transcript, incomplete=incomplete)


def execute_rq_items(report: Report, protocol: Protocol, tools: RqTools,
                     gateway: Gateway, budget: int = DEFAULT_RQ_BUDGET
                     ) -> list[RqResult]:
    return [execute_rq(report, item, tools, gateway, budget)
            for item in protocol.rq_items]
