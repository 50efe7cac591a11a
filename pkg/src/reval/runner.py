"""Per-task evaluation orchestration shared by the CLI and tests."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from datetime import date
from fractions import Fraction
from pathlib import Path

from . import adaptive, workflow
from .config import RunConfig
from .errors import MissingProtocol, RevalError
from .evidence import EvidenceCache
from .protocol import Protocol, load_protocol
from .report import Report, parse_report
from .scoring import (
    Scorecard,
    citation_integrity,
    claim_attribution,
    cf_score,
    da_score,
    factuality_score,
    kic_score,
    rq_score,
    wq_final,
)

logger = logging.getLogger(__name__)

ALL_METRICS = ("wq", "factuality", "ci", "da", "kic", "rq")
STATIC_METRICS = ("wq", "factuality", "ci", "da")
ADAPTIVE_METRICS = ("kic", "rq")


@dataclass
class TaskSpec:
    task_id: str
    query: str
    report_path: str


@dataclass
class TaskOutput:
    scorecard: Scorecard
    audit_rows: dict[str, list[dict]] = field(default_factory=dict)


def load_report(spec: TaskSpec) -> Report:
    markdown = Path(spec.report_path).read_text("utf-8")
    return parse_report(markdown, task_id=spec.task_id, query=spec.query)


def find_protocol(config: RunConfig, task_id: str) -> Protocol:
    path = Path(config.protocol_dir) / f"{task_id}.protocol.json"
    if not path.exists():
        raise MissingProtocol(f"no protocol file for task {task_id} at {path}")
    return load_protocol(path)


def evaluate_task(spec: TaskSpec, config: RunConfig, metrics: tuple[str, ...],
                  protocol: Protocol | None = None) -> TaskOutput:
    """Run the selected metrics for one task and assemble its scorecard.

    Adaptive metrics require a protocol; static metrics never touch one.
    """
    report = load_report(spec)
    gateway = config.make_gateway()
    today = date.fromisoformat(config.today) if config.today else date.today()
    out = TaskOutput(scorecard=Scorecard(task_id=spec.task_id))
    card = out.scorecard
    diagnostics: dict = {"undefined_metrics": [], "metric_errors": {}}

    if set(metrics) & set(ADAPTIVE_METRICS) and protocol is None:
        protocol = find_protocol(config, spec.task_id)

    ctx = workflow.WorkflowContext(
        gateway=gateway,
        search_backend=config.make_search_backend(),
        fetch_backend=config.make_fetch_backend(),
        cache=EvidenceCache(config.cache_dir, namespace=spec.task_id),
        workers=config.workers,
    )

    if "wq" in metrics:
        try:
            card.wq = wq_final(adaptive.evaluate_wq(report, gateway))
        except RevalError as exc:
            diagnostics["metric_errors"]["wq"] = str(exc)

    if "factuality" in metrics:
        try:
            counts, records = workflow.run_factuality(report, spec.query, today, ctx)
            card.factuality = factuality_score(counts)
            out.audit_rows["factuality"] = [r.to_json_obj() for r in records]
            if counts.total:
                diagnostics["unverifiable_fraction"] = round(
                    counts.n_unver / counts.total, 4)
        except RevalError as exc:
            diagnostics["metric_errors"]["factuality"] = str(exc)

    if "ci" in metrics:
        try:
            ca_inputs, cf_counts, records, ci_diags = workflow.run_ci(report, ctx)
            card.ca = claim_attribution(**ca_inputs)
            card.cf = cf_score(cf_counts)
            card.ci = citation_integrity(card.ca, card.cf)
            if card.ca is not None and card.ca > 0 and card.cf is None:
                ci_diags.append("cf undefined with nonzero attribution")
            out.audit_rows["ci"] = [r.to_json_obj() for r in records]
            if ci_diags:
                diagnostics["ci"] = ci_diags
        except RevalError as exc:
            diagnostics["metric_errors"]["ci"] = str(exc)

    if "da" in metrics:
        try:
            ratings = workflow.run_da(report, gateway)
            card.da = da_score(ratings)
            out.audit_rows["da"] = [
                {"domain": r.domain, "category": r.category, "score": r.score,
                 "rationale": r.rationale} for r in ratings]
        except RevalError as exc:
            diagnostics["metric_errors"]["da"] = str(exc)

    if "kic" in metrics:
        try:
            verdicts = adaptive.evaluate_kic(report, protocol, gateway)
            card.kic = kic_score(verdicts)
            out.audit_rows["kic"] = [
                {"question": item.question, "verdict": v, "justification": j}
                for item, v, j in zip(protocol.kic_items, verdicts.verdicts,
                                      verdicts.justifications)]
        except RevalError as exc:
            diagnostics["metric_errors"]["kic"] = str(exc)

    if "rq" in metrics:
        try:
            tools = adaptive.RqTools(
                search_backend=config.make_search_backend(),
                fetch_backend=config.make_fetch_backend(),
                cache=ctx.cache)
            results = adaptive.execute_rq_items(report, protocol, tools, gateway,
                                                budget=config.rq_budget)
            card.rq = rq_score(results)
            out.audit_rows["rq"] = [
                {"item": item.question, "raw_score": r.raw_score,
                 "deductions": [{"reason": d, "points": p}
                                for d, p in r.deductions],
                 "incomplete": r.incomplete, "transcript": r.transcript}
                for item, r in zip(protocol.rq_items, results)]
        except RevalError as exc:
            diagnostics["metric_errors"]["rq"] = str(exc)

    diagnostics["undefined_metrics"] = [
        m for m in ("wq", "factuality", "ci", "ca", "cf", "da", "kic", "rq")
        if m in _expanded(metrics) and getattr(card, m) is None]
    if not diagnostics["metric_errors"]:
        del diagnostics["metric_errors"]
    card.diagnostics = diagnostics
    return out


def _expanded(metrics: tuple[str, ...]) -> set[str]:
    selected = set(metrics)
    if "ci" in selected:
        selected |= {"ca", "cf"}
    return selected


def kic_fraction(report: Report, protocol: Protocol, gateway) -> Fraction:
    """Convenience wrapper used by temporal experiments."""
    return kic_score(adaptive.evaluate_kic(report, protocol, gateway))
