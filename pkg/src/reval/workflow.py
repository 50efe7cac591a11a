"""Workflow pipelines: reference-free factuality, citation integrity
(attribution + faithfulness), and domain authoritativeness.

Per-claim failures degrade to Unverifiable with a diagnostic instead of
aborting the batch; label tallying is a deterministic fold over claim
index order regardless of worker completion order.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import date

from .domains import domain_or_host
from .errors import EmptyReport, RevalError
from .evidence import (
    EvidenceCache,
    FetchBackend,
    FetchedDocument,
    SearchBackend,
    SearchQuery,
    search,
)
from .gateway import Gateway, JudgeRequest
from .report import Report, normalize_url, sentence_spans
from .scoring import LabelCounts

logger = logging.getLogger(__name__)

FACTUALITY_LABELS = ("Supported", "PartiallySupported", "Contradicted", "Unverifiable")
FAITHFULNESS_LABELS = ("Supported", "PartiallySupported", "Neutral",
                       "Contradicted", "Unverifiable")
# best-source-wins order for multi-citation claims
_FAITHFULNESS_RANK = {label: i for i, label in enumerate(FAITHFULNESS_LABELS)}

DA_CATEGORIES = ("Government", "Academic", "News", "Commercial", "Other")

DEFAULT_CLAIM_CAP = 30
DEFAULT_QUERIES_PER_CLAIM = 3
DEFAULT_FETCH_TOP = 5
DEFAULT_WORKERS = 4


@dataclass(frozen=True)
class Claim:
    text: str
    source_span: tuple[int, int]
    cited_urls: tuple[str, ...] = ()
    verifiable: bool = True


@dataclass(frozen=True)
class EvidenceBundle:
    supporting: tuple[tuple[str, str], ...] = ()  # (url, verbatim passage)
    opposing: tuple[tuple[str, str], ...] = ()

    @property
    def empty(self) -> bool:
        return not self.supporting and not self.opposing


@dataclass
class ClaimRecord:
    """Audit record for one claim, emitted as a JSON-lines row."""

    claim: Claim
    queries: list[str] = field(default_factory=list)
    evidence: EvidenceBundle = field(default_factory=EvidenceBundle)
    label: str = "Unverifiable"
    rationale: str = ""
    diagnostics: list[str] = field(default_factory=list)

    def to_json_obj(self) -> dict:
        return {
            "claim": self.claim.text,
            "span": list(self.claim.source_span),
            "cited_urls": list(self.claim.cited_urls),
            "queries": self.queries,
            "evidence_urls": sorted({u for u, _ in
                                     self.evidence.supporting + self.evidence.opposing}),
            "label": self.label,
            "rationale": self.rationale,
            "diagnostics": self.diagnostics,
        }


@dataclass(frozen=True)
class DomainRating:
    domain: str
    category: str
    score: int
    rationale: str = ""

    def __post_init__(self):
        if self.category not in DA_CATEGORIES:
            raise ValueError(f"unknown domain category: {self.category}")
        if not 1 <= self.score <= 10:
            raise ValueError(f"domain score {self.score} outside [1, 10]")


# --- claim extraction ---------------------------------------------------------

_CLAIMS_SCHEMA = {
    "type": "object",
    "properties": {
        "claims": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "text": {"type": "string"},
                    "start": {"type": "integer", "minimum": 0},
                    "end": {"type": "integer", "minimum": 0},
                },
                "required": ["text", "start", "end"],
            },
        },
    },
    "required": ["claims"],
}


def extract_key_claims(report: Report, query: str, today: date,
                       gateway: Gateway, n: int = DEFAULT_CLAIM_CAP) -> list[Claim]:
    """Up to n salient factual claims with character spans into the body.

    The prompt embeds today's date so relative temporal references resolve.
    Spans beyond the body are clamped; the cap truncates in emission order.
    """
    if not report.text.strip():
        raise EmptyReport(report.task_id)
    req = JudgeRequest(
        role_prompt=(
            "You extract the most salient factual claims from a research "
            f"report, relative to its query. Today's date is {today.isoformat()}; "
            "resolve temporal references like 'current' against it. Each claim "
            "is a single declarative assertion with start/end character "
            "offsets of the sentence it paraphrases."
        ),
        user_prompt=(
            f"Query: {query}\n\nReport:\n{report.text}\n\n"
            f"Extract at most {n} claims as JSON."
        ),
        output_schema=_CLAIMS_SCHEMA,
    )
    payload = gateway.complete_structured(req).payload
    claims = []
    for row in payload["claims"][:n]:
        start = max(0, min(row["start"], len(report.text)))
        end = max(start, min(row["end"], len(report.text)))
        claims.append(Claim(text=row["text"], source_span=(start, end)))
    return claims


# --- neutralized search -------------------------------------------------------

_QUERIES_SCHEMA = {
    "type": "object",
    "properties": {
        "queries": {"type": "array", "items": {"type": "string"},
                    "minItems": 2, "maxItems": 4},
    },
    "required": ["queries"],
}


def neutralize_queries(claim: Claim, gateway: Gateway) -> list[SearchQuery]:
    """2-4 open-ended queries that avoid asserting the claim's specific
    values, so retrieval surfaces both confirming and refuting evidence."""
    req = JudgeRequest(
        role_prompt=(
            "You write neutral web search queries for fact-checking. Never "
            "restate the claim's specific numbers, dates, or asserted "
            "outcome; ask about the underlying quantity or topic instead "
            "(e.g. for 'inflation dropped to 2%', search 'current inflation "
            "rate'). This avoids confirmation bias."
        ),
        user_prompt=f"Claim: {claim.text}\nEmit 2-4 neutralized queries as JSON.",
        output_schema=_QUERIES_SCHEMA,
    )
    payload = gateway.complete_structured(req).payload
    return [SearchQuery(text=q) for q in payload["queries"]]


# --- dual-stream evidence -----------------------------------------------------

_PASSAGES_SCHEMA = {
    "type": "object",
    "properties": {
        "passages": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "url": {"type": "string"},
                    "text": {"type": "string"},
                },
                "required": ["url", "text"],
            },
        },
    },
    "required": ["passages"],
}


def _extraction_pass(claim: Claim, docs: list[FetchedDocument],
                     gateway: Gateway, stream: str) -> tuple[tuple[str, str], ...]:
    corpus = "\n\n".join(f"URL: {d.url}\n{d.content_text}" for d in docs
                         if d.status == "ok")
    if not corpus:
        return ()
    verb = ("explicitly confirm" if stream == "supporting"
            else "contradict or refute")
    req = JudgeRequest(
        role_prompt=(
            f"You extract verbatim passages that {verb} a claim. Copy "
            "passages exactly as they appear in the source text; never "
            "paraphrase. Return an empty list if none exist."
        ),
        user_prompt=f"Claim: {claim.text}\n\nSources:\n{corpus}\n\nEmit JSON.",
        output_schema=_PASSAGES_SCHEMA,
    )
    payload = gateway.complete_structured(req).payload
    by_url = {normalize_url(d.url): d for d in docs if d.status == "ok"}
    out = []
    for row in payload["passages"]:
        doc = by_url.get(normalize_url(row["url"])) if row["url"] else None
        # passages must be verbatim substrings of their source document
        if doc is not None and row["text"] and row["text"] in doc.content_text:
            out.append((doc.url, row["text"]))
        else:
            logger.debug("dropping non-verbatim passage for %r", claim.text[:60])
    return tuple(out)


def dual_stream_extract(claim: Claim, docs: list[FetchedDocument],
                        gateway: Gateway) -> EvidenceBundle:
    """Two independent judged passes: one hunting confirmation, one hunting
    refutation. Non-verbatim passages are dropped."""
    if not any(d.status == "ok" for d in docs):
        return EvidenceBundle()
    return EvidenceBundle(
        supporting=_extraction_pass(claim, docs, gateway, "supporting"),
        opposing=_extraction_pass(claim, docs, gateway, "opposing"),
    )


# --- judgments ---------------------------------------------------------------

def _label_schema(labels: tuple[str, ...]) -> dict:
    return {
        "type": "object",
        "properties": {
            "label": {"enum": list(labels)},
            "rationale": {"type": "string"},
        },
        "required": ["label"],
    }


def judge_factuality(claim: Claim, bundle: EvidenceBundle,
                     gateway: Gateway) -> tuple[str, str]:
    """4-label verdict from the aggregated evidence streams. An empty
    bundle short-circuits to Unverifiable without a judge call."""
    if bundle.empty:
        return "Unverifiable", "no evidence retrieved"
    def block(passages):
        return "\n".join(f"- ({u}) {t}" for u, t in passages) or "(none)"
    req = JudgeRequest(
        role_prompt=(
            "You judge whether external evidence supports a claim. Labels: "
            "Supported (evidence explicitly confirms it), PartiallySupported "
            "(supports some aspects, differs on details, or mixed), "
            "Contradicted (evidence clearly refutes it), Unverifiable "
            "(evidence insufficient, indirect, or too weak)."
        ),
        user_prompt=(
            f"Claim: {claim.text}\n\nSupporting evidence:\n"
            f"{block(bundle.supporting)}\n\nOpposing evidence:\n"
            f"{block(bundle.opposing)}\n\nEmit JSON."
        ),
        output_schema=_label_schema(FACTUALITY_LABELS),
    )
    payload = gateway.complete_structured(req).payload
    return payload["label"], payload.get("rationale", "")


def judge_citation_faithfulness(claim: Claim, source: FetchedDocument,
                                gateway: Gateway) -> tuple[str, str]:
    """5-label verdict of one claim against one cited source. Non-ok
    sources short-circuit to Unverifiable without a judge call."""
    if source.status != "ok":
        return "Unverifiable", f"source not retrievable ({source.status})"
    req = JudgeRequest(
        role_prompt=(
            "You compare a cited source's text against a claim. Labels: "
            "Supported, PartiallySupported, Neutral (source is on an "
            "unrelated topic or takes no position), Contradicted, "
            "Unverifiable (source text too fragmentary to tell)."
        ),
        user_prompt=(
            f"Claim: {claim.text}\n\nSource ({source.url}):\n"
            f"{source.content_text}\n\nEmit JSON."
        ),
        output_schema=_label_schema(FAITHFULNESS_LABELS),
    )
    payload = gateway.complete_structured(req).payload
    return payload["label"], payload.get("rationale", "")


# --- factuality pipeline ------------------------------------------------------

@dataclass
class WorkflowContext:
    gateway: Gateway
    search_backend: SearchBackend
    fetch_backend: FetchBackend
    cache: EvidenceCache = field(default_factory=EvidenceCache)
    queries_per_claim: int = DEFAULT_QUERIES_PER_CLAIM
    fetch_top: int = DEFAULT_FETCH_TOP
    workers: int = DEFAULT_WORKERS


def _verify_one_claim(claim: Claim, ctx: WorkflowContext) -> ClaimRecord:
    record = ClaimRecord(claim=claim)
    try:
        queries = neutralize_queries(claim, ctx.gateway)[:ctx.queries_per_claim]
        record.queries = [q.text for q in queries]
        results = []
        for q in queries:
            results.extend(search(q, ctx.search_backend))
        seen: set[str] = set()
        docs = []
        for r in results:
            key = normalize_url(r.url)
            if key in seen:
                continue
            seen.add(key)
            docs.append(ctx.cache.fetch(r.url, ctx.fetch_backend))
            if len(docs) >= ctx.fetch_top:
                break
        record.evidence = dual_stream_extract(claim, docs, ctx.gateway)
        record.label, record.rationale = judge_factuality(
            claim, record.evidence, ctx.gateway)
    except RevalError as exc:
        record.label = "Unverifiable"
        record.diagnostics.append(f"verification failed: {exc}")
    return record


def run_factuality(report: Report, query: str, today: date,
                   ctx: WorkflowContext, n: int = DEFAULT_CLAIM_CAP
                   ) -> tuple[LabelCounts, list[ClaimRecord]]:
    claims = extract_key_claims(report, query, today, ctx.gateway, n=n)
    if ctx.workers > 1 and len(claims) > 1:
        with ThreadPoolExecutor(max_workers=ctx.workers) as pool:
            records = list(pool.map(lambda c: _verify_one_claim(c, ctx), claims))
    else:
        records = [_verify_one_claim(c, ctx) for c in claims]
    counts = LabelCounts(
        n_supp=sum(r.label == "Supported" for r in records),
        n_part=sum(r.label == "PartiallySupported" for r in records),
        n_con=sum(r.label == "Contradicted" for r in records),
        n_unver=sum(r.label == "Unverifiable" for r in records),
    )
    return counts, records


# --- citation integrity pipeline ----------------------------------------------

_VERIFIABLE_SCHEMA = {
    "type": "object",
    "properties": {
        "claims": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "text": {"type": "string"},
                    "start": {"type": "integer", "minimum": 0},
                    "end": {"type": "integer", "minimum": 0},
                    "verifiable": {"type": "boolean"},
                },
                "required": ["text", "start", "end", "verifiable"],
            },
        },
    },
    "required": ["claims"],
}


def _attach_citations(report: Report, claims: list[Claim]) -> list[Claim]:
    """Associate citation links with claims: a link belongs to the claim
    whose sentence contains its anchor, else to a claim in the immediately
    preceding sentence."""
    spans = sentence_spans(report.text)

    def sentence_index(pos: int) -> int:
        for i, (s, e) in enumerate(spans):
            if s <= pos < e:
                return i
        return len(spans) - 1

    claim_sentences = [
        set(range(sentence_index(c.source_span[0]),
                  sentence_index(max(c.source_span[0], c.source_span[1] - 1)) + 1))
        for c in claims
    ]
    attached: list[list[str]] = [[] for _ in claims]
    for link in report.citations:
        sent = sentence_index(link.anchor_span[0])
        target = None
        for i, sents in enumerate(claim_sentences):
            if sent in sents:
                target = i
                break
        if target is None:
            for i, sents in enumerate(claim_sentences):
                if sents and sent - 1 in sents:
                    target = i
                    break
        if target is not None:
            attached[target].append(normalize_url(link.url))
    out = []
    for claim, urls in zip(claims, attached):
        deduped = tuple(dict.fromkeys(urls))
        out.append(Claim(text=claim.text, source_span=claim.source_span,
                         cited_urls=deduped, verifiable=claim.verifiable))
    return out


def extract_verifiable_claims(report: Report, gateway: Gateway) -> list[Claim]:
    """All assertions in the report, with meta-talk, subjective commentary,
    and common knowledge flagged verifiable=false. Citations attach by the
    sentence-adjacency rule."""
    if not report.text.strip():
        raise EmptyReport(report.task_id)
    req = JudgeRequest(
        role_prompt=(
            "You extract factual and argumentative assertions from a report. "
            "Flag verifiable=false for procedural meta-talk (e.g. 'The "
            "following section discusses...'), subjective commentary, and "
            "common knowledge; flag verifiable=true for checkable factual "
            "assertions. Offsets are character positions of the claim's "
            "sentence in the report text."
        ),
        user_prompt=f"Report:\n{report.text}\n\nEmit JSON.",
        output_schema=_VERIFIABLE_SCHEMA,
    )
    payload = gateway.complete_structured(req).payload
    claims = []
    for row in payload["claims"]:
        start = max(0, min(row["start"], len(report.text)))
        end = max(start, min(row["end"], len(report.text)))
        claims.append(Claim(text=row["text"], source_span=(start, end),
                            verifiable=row["verifiable"]))
    return _attach_citations(report, claims)


def _judge_cited_claim(claim: Claim, ctx: WorkflowContext) -> ClaimRecord:
    """Per-source faithfulness judgments reduced best-source-wins."""
    record = ClaimRecord(claim=claim)
    best = "Unverifiable"
    best_rationale = "no source judged"
    for url in claim.cited_urls:
        try:
            doc = ctx.cache.fetch(url, ctx.fetch_backend)
            label, rationale = judge_citation_faithfulness(claim, doc, ctx.gateway)
        except RevalError as exc:
            label, rationale = "Unverifiable", str(exc)
            record.diagnostics.append(f"{url}: {exc}")
        record.diagnostics.append(f"source {url}: {label}")
        if _FAITHFULNESS_RANK[label] < _FAITHFULNESS_RANK[best]:
            best, best_rationale = label, rationale
    record.label, record.rationale = best, best_rationale
    return record


def run_ci(report: Report, ctx: WorkflowContext
           ) -> tuple[dict, LabelCounts, list[ClaimRecord], list[str]]:
    """Returns (ca_inputs, cf_counts, per-claim records, diagnostics)."""
    diagnostics: list[str] = []
    claims = [c for c in extract_verifiable_claims(report, ctx.gateway)
              if c.verifiable]
    cited = [c for c in claims if c.cited_urls]
    ca_inputs = {"n_cited": len(cited), "n_total": len(claims)}
    if not claims:
        diagnostics.append("NoVerifiableClaims")
    if ctx.workers > 1 and len(cited) > 1:
        with ThreadPoolExecutor(max_workers=ctx.workers) as pool:
            records = list(pool.map(lambda c: _judge_cited_claim(c, ctx), cited))
    else:
        records = [_judge_cited_claim(c, ctx) for c in cited]
    counts = LabelCounts(
        n_supp=sum(r.label == "Supported" for r in records),
        n_part=sum(r.label == "PartiallySupported" for r in records),
        n_neu=sum(r.label == "Neutral" for r in records),
        n_con=sum(r.label == "Contradicted" for r in records),
        n_unver=sum(r.label == "Unverifiable" for r in records),
    )
    return ca_inputs, counts, records, diagnostics


# --- domain authoritativeness ---------------------------------------------------

_DA_SCHEMA = {
    "type": "object",
    "properties": {
        "category": {"enum": list(DA_CATEGORIES)},
        "score": {"type": "integer", "minimum": 1, "maximum": 10},
        "rationale": {"type": "string"},
    },
    "required": ["category", "score"],
}


def judge_domain(domain: str, gateway: Gateway) -> DomainRating:
    req = JudgeRequest(
        role_prompt=(
            "You rate the authority of a web domain considering "
            "institutional backing, historical reliability, and editorial "
            "standards. Categories: Government, Academic, News, Commercial, "
            "Other. Score bands: 9-10 definitive authority (government "
            "agencies, top academic institutions), 7-8 high authority "
            "(established news organizations), 4-6 moderate authority "
            "(general commercial sites), 1-3 low authority (social media, "
            "unverified blogs)."
        ),
        user_prompt=f"Domain: {domain}\nEmit JSON.",
        output_schema=_DA_SCHEMA,
    )
    payload = gateway.complete_structured(req).payload
    return DomainRating(domain=domain, category=payload["category"],
                        score=payload["score"],
                        rationale=payload.get("rationale", ""))


def run_da(report: Report, gateway: Gateway) -> list[DomainRating]:
    """One rating per deduplicated root domain across the report's
    citations. Judge failures and unparseable hosts degrade to score 1."""
    domains: list[str] = []
    seen: set[str] = set()
    for link in report.citations:
        try:
            value = domain_or_host(link.url).value
        except RevalError:
            continue
        if value not in seen:
            seen.add(value)
            domains.append(value)
    ratings = []
    for d in domains:
        try:
            ratings.append(judge_domain(d, gateway))
        except RevalError as exc:
            logger.warning("domain judgment failed for %s: %s", d, exc)
            ratings.append(DomainRating(domain=d, category="Other", score=1,
                                        rationale=f"degraded: {exc}"))
    return ratings
