"""Phase-1 protocol creation: a bounded tool-calling loop that researches
the query and emits the adaptive checklist (KIC) and reasoning questions
(RQ), alongside the static metric roster.

Creation is report-independent by construction: nothing in this module
accepts a report, only the query and external evidence.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path

from .errors import (
    BudgetExhausted,
    CorruptFile,
    PlanToolMismatch,
    SchemaVersionMismatch,
    SchemaViolation,
)
from .evidence import (
    EvidenceCache,
    FetchBackend,
    SearchBackend,
    SearchQuery,
    search,
)
from .gateway import Gateway, JudgeRequest

logger = logging.getLogger(__name__)

PROTOCOL_VERSION = "1"
STATIC_METRICS = ("wq", "factuality", "ci", "da")

CORE_TOOLS = frozenset({"web_search", "url_fetch"})
OPTIONAL_TOOLS = frozenset({"arxiv", "github"})
ALL_TOOLS = CORE_TOOLS | OPTIONAL_TOOLS

DEFAULT_MIN_K, DEFAULT_MAX_K = 8, 16
DEFAULT_MIN_R, DEFAULT_MAX_R = 3, 6
DEFAULT_STEP_BUDGET = 20


@dataclass(frozen=True)
class KicItem:
    question: str                       # strict yes/no interrogative
    grounding: tuple[tuple[str, str], ...]  # (url, snippet)
    weight: float = 1.0


@dataclass(frozen=True)
class ValidationPlan:
    extract_step: str
    verify_step: str
    compare_step: str


@dataclass(frozen=True)
class RqItem:
    question: str
    plan: ValidationPlan
    grounding: tuple[tuple[str, str], ...]


@dataclass(frozen=True)
class Protocol:
    task_id: str
    query: str
    created_at: str                     # ISO-8601
    tools_selected: frozenset[str]
    kic_items: tuple[KicItem, ...]
    rq_items: tuple[RqItem, ...]
    static_metrics: tuple[str, ...] = STATIC_METRICS


TOOL_SELECT_SCHEMA = {
    "type": "object",
    "properties": {
        "tools": {
            "type": "array",
            "items": {"enum": sorted(ALL_TOOLS)},
        },
        "rationale": {"type": "string"},
    },
    "required": ["tools"],
}


def select_tools(query: str, gateway: Gateway) -> frozenset[str]:
    """One judged completion picking retrieval tools for the query.

    web_search and url_fetch are always included; a schema failure falls
    back to the core tools with a warning.
    """
    req = JudgeRequest(
        role_prompt=(
            "You select retrieval tools for researching a query. Available "
            "tools: web_search, url_fetch, arxiv, github. Pick only tools "
            "that reduce noise for this query; arxiv for scientific "
            "literature, github for code repositories."
        ),
        user_prompt=f"Query: {query}\nReturn the tool list as JSON.",
        output_schema=TOOL_SELECT_SCHEMA,
    )
    try:
        resp = gateway.complete_structured(req)
    except SchemaViolation:
        logger.warning("tool selection failed validation; using core tools")
        return frozenset(CORE_TOOLS)
    return frozenset(resp.payload["tools"]) | CORE_TOOLS


@dataclass
class CreationContext:
    """Shared tool plumbing for one creation run."""

    gateway: Gateway
    search_backend: SearchBackend
    fetch_backend: FetchBackend
    cache: EvidenceCache = field(default_factory=EvidenceCache)
    today: date | None = None
    max_results: int = 8


class _StepCounter:
    def __init__(self, budget: int):
        self.budget = budget
        self.used = 0

    def spend(self) -> bool:
        if self.used >= self.budget:
            return False
        self.used += 1
        return True


def _plan_searches(query: str, purpose: str, ctx: CreationContext,
                   n_queries: int) -> list[str]:
    today_note = f" Today's date is {ctx.today.isoformat()}." if ctx.today else ""
    req = JudgeRequest(
        role_prompt=(
            "You plan web research for building evaluation criteria."
            + today_note
            + " Emit focused search queries covering the latest developments."
        ),
        user_prompt=(
            f"Research query: {query}\nPurpose: {purpose}\n"
            f"Emit up to {n_queries} search queries as JSON."
        ),
        output_schema={
            "type": "object",
            "properties": {
                "queries": {"type": "array", "items": {"type": "string"},
                            "minItems": 1, "maxItems": n_queries},
            },
            "required": ["queries"],
        },
    )
    return ctx.gateway.complete_structured(req).payload["queries"][:n_queries]


def _gather_evidence(queries: list[str], ctx: CreationContext,
                     steps: _StepCounter, fetch_per_query: int = 2
                     ) -> list[tuple[str, str]]:
    """Run searches and fetches within the step budget. Returns
    (url, snippet-or-extract) notes; every URL here appears in the
    tool-call transcript by construction."""
    notes: list[tuple[str, str]] = []
    for q in queries:
        if not steps.spend():
            break
        results = search(SearchQuery(text=q, max_results=ctx.max_results),
                         ctx.search_backend)
        for r in results[:fetch_per_query]:
            if not steps.spend():
                break
            doc = ctx.cache.fetch(r.url, ctx.fetch_backend)
            body = doc.content_text[:800] if doc.status == "ok" else r.snippet
            notes.append((r.url, body or r.title))
        for r in results[fetch_per_query:]:
            notes.append((r.url, r.snippet or r.title))
    return notes


def _grounding_block(notes: list[tuple[str, str]]) -> str:
    return "\n".join(f"[{i}] {url}\n    {snip}" for i, (url, snip) in enumerate(notes))


KIC_ITEM_SCHEMA = {
    "type": "object",
    "properties": {
        "items": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "properties": {
                    "question": {"type": "string"},
                    "grounding_urls": {"type": "array",
                                       "items": {"type": "string"}, "minItems": 1},
                },
                "required": ["question", "grounding_urls"],
            },
        },
    },
    "required": ["items"],
}


def create_kic(query: str, tools: frozenset[str], ctx: CreationContext,
               budget: int = DEFAULT_STEP_BUDGET,
               min_k: int = DEFAULT_MIN_K, max_k: int = DEFAULT_MAX_K
               ) -> list[KicItem]:
    """Plan -> search -> read -> draft loop emitting grounded yes/no items.

    Items whose grounding URL never appeared in the tool transcript are
    dropped; proposals beyond max_k are truncated in emission order.
    """
    steps = _StepCounter(budget)
    if not steps.spend():
        raise BudgetExhausted("no budget for planning step")
    queries = _plan_searches(
        query, "identify essential, up-to-date facts a complete report must cover",
        ctx, n_queries=4)
    notes = _gather_evidence(queries, ctx, steps)
    if steps.used >= steps.budget and len(notes) == 0:
        raise BudgetExhausted(f"step budget {budget} hit before evidence gathered")

    today_note = f" Today's date is {ctx.today.isoformat()}." if ctx.today else ""
    req = JudgeRequest(
        role_prompt=(
            "You convert researched key facts into strict yes/no checklist "
            "questions about a future report's content. Each question must "
            "be answerable from report text alone and cite grounding URLs "
            "from the evidence block. Include dates for time-sensitive facts."
            + today_note
        ),
        user_prompt=(
            f"Query: {query}\n\nEvidence:\n{_grounding_block(notes)}\n\n"
            f"Emit between {min_k} and {max_k} checklist items as JSON."
        ),
        output_schema=KIC_ITEM_SCHEMA,
    )
    payload = ctx.gateway.complete_structured(req).payload
    transcript_urls = {url for url, _ in notes}
    snippets = dict(notes)
    items: list[KicItem] = []
    for row in payload["items"]:
        grounding = tuple((u, snippets.get(u, "")) for u in row["grounding_urls"]
                          if u in transcript_urls)
        if not grounding:
            logger.warning("dropping ungrounded KIC item: %s", row["question"])
            continue
        items.append(KicItem(question=row["question"], grounding=grounding))
    items = items[:max_k]
    if len(items) < min_k:
        raise BudgetExhausted(
            f"only {len(items)} grounded items produced within budget "
            f"(minimum {min_k})")
    return items


RQ_ITEM_SCHEMA = {
    "type": "object",
    "properties": {
        "items": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "properties": {
                    "question": {"type": "string"},
                    "extract_step": {"type": "string"},
                    "verify_step": {"type": "string"},
                    "compare_step": {"type": "string"},
                    "grounding_urls": {"type": "array",
                                       "items": {"type": "string"}, "minItems": 1},
                },
                "required": ["question", "extract_step", "verify_step",
                             "compare_step", "grounding_urls"],
            },
        },
    },
    "required": ["items"],
}


def create_rq(query: str, tools: frozenset[str], ctx: CreationContext,
              budget: int = DEFAULT_STEP_BUDGET,
              min_r: int = DEFAULT_MIN_R, max_r: int = DEFAULT_MAX_R
              ) -> list[RqItem]:
    """Emit open-ended analytical questions with three-stage validation
    plans. Plans referencing unselected tools get one repair attempt, then
    raise PlanToolMismatch."""
    steps = _StepCounter(budget)
    if not steps.spend():
        raise BudgetExhausted("no budget for planning step")
    queries = _plan_searches(
        query, "find analytical angles and evidence for probing reasoning depth",
        ctx, n_queries=3)
    notes = _gather_evidence(queries, ctx, steps)

    def ask(extra: str = "") -> dict:
        req = JudgeRequest(
            role_prompt=(
                "You design reasoning-quality probes for research reports. "
                "Each item pairs an analytical question with a validation "
                "plan: an extract step (pull reasoning chains from the "
                "report), a verify step naming only these tools: "
                f"{', '.join(sorted(tools))}, and a compare step with "
                "explicit comparison criteria. Ground every item in the "
                "evidence URLs."
            ),
            user_prompt=(
                f"Query: {query}\n\nEvidence:\n{_grounding_block(notes)}\n\n"
                f"Emit between {min_r} and {max_r} items as JSON.{extra}"
            ),
            output_schema=RQ_ITEM_SCHEMA,
        )
        return ctx.gateway.complete_structured(req).payload

    payload = ask()
    transcript_urls = {url for url, _ in notes}
    snippets = dict(notes)
    for attempt in range(2):
        bad = [row["question"] for row in payload["items"]
               if not (_mentioned_tools(row["verify_step"]) <= tools)
               or not _mentioned_tools(row["verify_step"])]
        if not bad:
            break
        if attempt == 1:
            raise PlanToolMismatch(
                f"verify steps reference unselected tools: {bad}")
        payload = ask(extra=(
            "\nYour previous plans referenced tools outside the selected "
            f"set for: {bad}. Name only the listed tools."))

    items: list[RqItem] = []
    for row in payload["items"]:
        grounding = tuple((u, snippets.get(u, "")) for u in row["grounding_urls"]
                          if u in transcript_urls)
        if not grounding:
            logger.warning("dropping ungrounded RQ item: %s", row["question"])
            continue
        plan = ValidationPlan(extract_step=row["extract_step"],
                              verify_step=row["verify_step"],
                              compare_step=row["compare_step"])
        items.append(RqItem(question=row["question"], plan=plan,
                            grounding=grounding))
    items = items[:max_r]
    if len(items) < min_r:
        raise BudgetExhausted(
            f"only {len(items)} grounded items produced (minimum {min_r})")
    return items


def _mentioned_tools(verify_step: str) -> set[str]:
    return {t for t in ALL_TOOLS if t in verify_step}


def create_protocol(task_id: str, query: str, ctx: CreationContext,
                    created_at: str, budget: int = DEFAULT_STEP_BUDGET,
                    min_k: int = DEFAULT_MIN_K, max_k: int = DEFAULT_MAX_K,
                    min_r: int = DEFAULT_MIN_R, max_r: int = DEFAULT_MAX_R
                    ) -> Protocol:
    tools = select_tools(query, ctx.gateway)
    kic = create_kic(query, tools, ctx, budget, min_k, max_k)
    rq = create_rq(query, tools, ctx, budget, min_r, max_r)
    return Protocol(task_id=task_id, query=query, created_at=created_at,
                    tools_selected=tools, kic_items=tuple(kic),
                    rq_items=tuple(rq))


# --- persistence -------------------------------------------------------------

def protocol_to_obj(p: Protocol) -> dict:
    return {
        "version": PROTOCOL_VERSION,
        "task_id": p.task_id,
        "query": p.query,
        "created_at": p.created_at,
        "tools_selected": sorted(p.tools_selected),
        "kic_items": [
            {"question": i.question, "weight": i.weight,
             "grounding": [{"url": u, "snippet": s} for u, s in i.grounding]}
            for i in p.kic_items
        ],
        "rq_items": [
            {"question": i.question,
             "plan": {"extract_step": i.plan.extract_step,
                      "verify_step": i.plan.verify_step,
                      "compare_step": i.plan.compare_step},
             "grounding": [{"url": u, "snippet": s} for u, s in i.grounding]}
            for i in p.rq_items
        ],
    }


def save_protocol(p: Protocol, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp")
    tmp.write_text(json.dumps(protocol_to_obj(p), indent=2, sort_keys=True), "utf-8")
    tmp.replace(path)


def load_protocol(path: str | Path) -> Protocol:
    try:
        obj = json.loads(Path(path).read_text("utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CorruptFile(f"{path}: {exc}") from exc
    if not isinstance(obj, dict) or "version" not in obj:
        raise CorruptFile(f"{path}: missing version field")
    if obj["version"] != PROTOCOL_VERSION:
        raise SchemaVersionMismatch(
            f"{path}: version {obj['version']!r}, expected {PROTOCOL_VERSION!r}")
    try:
        kic = tuple(
            KicItem(question=i["question"], weight=i.get("weight", 1.0),
                    grounding=tuple((g["url"], g["snippet"]) for g in i["grounding"]))
            for i in obj["kic_items"])
        rq = tuple(
            RqItem(question=i["question"],
                   plan=ValidationPlan(**i["plan"]),
                   grounding=tuple((g["url"], g["snippet"]) for g in i["grounding"]))
            for i in obj["rq_items"])
        return Protocol(task_id=obj["task_id"], query=obj["query"],
                        created_at=obj["created_at"],
                        tools_selected=frozenset(obj["tools_selected"]),
                        kic_items=kic, rq_items=rq)
    except (KeyError, TypeError) as exc:
        raise CorruptFile(f"{path}: {exc}") from exc
