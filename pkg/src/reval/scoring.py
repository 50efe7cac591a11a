"""Closed-form metric scores and cross-task aggregation.

Every function here is pure and exact: scores are Fractions in [0, 1],
with None standing for Undefined (zero-denominator cases). Presentation
multiplies by 100 and rounds to 2 decimals.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational

from .errors import (
    EmptyChecklist,
    EmptyResults,
    EmptyTaskSet,
    PreconditionViolation,
)

Score = Fraction | None  # None = Undefined

METRICS = ("wq", "factuality", "ci", "ca", "cf", "da", "kic", "rq")


@dataclass(frozen=True)
class LabelCounts:
    """Judgment label tallies feeding the closed-form scores."""

    n_supp: int = 0
    n_part: int = 0
    n_neu: int = 0
    n_con: int = 0
    n_unver: int = 0

    def __post_init__(self):
        for name in ("n_supp", "n_part", "n_neu", "n_con", "n_unver"):
            if getattr(self, name) < 0:
                raise PreconditionViolation(f"{name} must be non-negative")

    @property
    def total(self) -> int:
        return self.n_supp + self.n_part + self.n_neu + self.n_con + self.n_unver


def factuality_score(c: LabelCounts) -> Score:
    """Weighted support rate over externally judged claims.

    Partial support counts half; Unverifiable is excluded from the
    denominator. Undefined when no claim received a definite label.
    """
    if c.n_neu != 0:
        raise PreconditionViolation("factuality labels have no Neutral class")
    denom = c.n_supp + c.n_part + c.n_con
    if denom == 0:
        return None
    return Fraction(2 * c.n_supp + c.n_part, 2 * denom)


def cf_score(c: LabelCounts) -> Score:
    """Citation faithfulness over cited claims; Neutral counts against the
    denominator, Unverifiable does not."""
    denom = c.n_supp + c.n_part + c.n_neu + c.n_con
    if denom == 0:
        return None
    return Fraction(2 * c.n_supp + c.n_part, 2 * denom)


def claim_attribution(n_cited: int, n_total: int) -> Score:
    if n_cited > n_total:
        raise PreconditionViolation(f"n_cited {n_cited} > n_total {n_total}")
    if n_total == 0:
        return None
    return Fraction(n_cited, n_total)


def citation_integrity(ca: Score, cf: Score) -> Score:
    """Harmonic mean of attribution and faithfulness.

    A zero attribution rate pins CI to 0 even when faithfulness is
    undefined (a report citing nothing has no faithful citations either).
    """
    if ca is None:
        return None
    if ca == 0:
        return Fraction(0)
    if cf is None:
        return None
    if cf == 0:
        return Fraction(0)
    ca, cf = Fraction(ca), Fraction(cf)
    return 2 * ca * cf / (ca + cf)


def da_score(ratings: list) -> Score:
    """Mean normalized 1-10 authority score over deduplicated domains.

    Accepts DomainRating-like objects (``.score``) or bare integers.
    """
    if not ratings:
        return None
    scores = [r if isinstance(r, int) else r.score for r in ratings]
    for s in scores:
        if not 1 <= s <= 10:
            raise PreconditionViolation(f"domain score {s} outside [1, 10]")
    return Fraction(sum(scores), 10 * len(scores))


def kic_score(verdicts) -> Fraction:
    """Recall of checklist items: fraction of yes verdicts.

    Accepts a KicVerdicts-like object (``.verdicts``) or a list of
    "yes"/"no" strings or booleans.
    """
    items = getattr(verdicts, "verdicts", verdicts)
    if not items:
        raise EmptyChecklist("no checklist verdicts")
    yes = sum(1 for v in items if v in ("yes", True, 1))
    return Fraction(yes, len(items))


def rq_score(results) -> Fraction:
    """Mean per-item raw score (0-10 integers) normalized by 10."""
    raws = [r if isinstance(r, Rational) else r.raw_score for r in results]
    if not raws:
        raise EmptyResults("no reasoning-quality results")
    for r in raws:
        if not 0 <= r <= 10:
            raise PreconditionViolation(f"raw score {r} outside [0, 10]")
    return Fraction(sum(raws), 10 * len(raws))


def wq_final(dimension_scores) -> Fraction:
    """Unweighted mean of the three dimension scores, normalized by 100.

    Accepts a WqScores-like object (``.dimension_scores`` mapping) or a
    3-sequence of scores in [0, 100].
    """
    scores = getattr(dimension_scores, "dimension_scores", dimension_scores)
    if hasattr(scores, "values"):
        scores = list(scores.values())
    if len(scores) != 3:
        raise PreconditionViolation("writing quality needs exactly 3 dimensions")
    total = sum(Fraction(s) for s in scores)
    if not 0 <= total <= 300:
        raise PreconditionViolation("dimension scores outside [0, 100]")
    return total / 300


@dataclass
class Scorecard:
    task_id: str
    wq: Score = None
    factuality: Score = None
    ci: Score = None
    ca: Score = None
    cf: Score = None
    da: Score = None
    kic: Score = None
    rq: Score = None
    diagnostics: dict = field(default_factory=dict)

    def defined(self, metric: str) -> bool:
        return getattr(self, metric) is not None

    def to_json_obj(self) -> dict:
        def present(v: Score):
            return None if v is None else round(float(v) * 100, 2)

        return {
            "version": "1",
            "task_id": self.task_id,
            "scores": {m: present(getattr(self, m)) for m in METRICS},
            "scores_exact": {
                m: (None if getattr(self, m) is None else
                    [getattr(self, m).numerator, getattr(self, m).denominator])
                for m in METRICS
            },
            "diagnostics": self.diagnostics,
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "Scorecard":
        exact = obj.get("scores_exact", {})
        kwargs = {}
        for m in METRICS:
            v = exact.get(m)
            kwargs[m] = None if v is None else Fraction(v[0], v[1])
        return cls(task_id=obj["task_id"], diagnostics=obj.get("diagnostics", {}), **kwargs)


def aggregate(tasks: list[Scorecard]) -> Scorecard:
    """Dataset-level scorecard: unweighted per-metric means over tasks where
    the metric is defined. CI is recomputed from the dataset-mean CA and CF
    rather than averaged per task."""
    if not tasks:
        raise EmptyTaskSet("no scorecards to aggregate")
    agg = Scorecard(task_id="aggregate")
    excluded: dict[str, int] = {}
    for m in METRICS:
        if m == "ci":
            continue
        values = [getattr(t, m) for t in tasks if t.defined(m)]
        excluded[m] = len(tasks) - len(values)
        if values:
            setattr(agg, m, sum(values, Fraction(0)) / len(values))
    agg.ci = citation_integrity(agg.ca, agg.cf)
    excluded["ci"] = 0 if agg.ci is not None else len(tasks)
    agg.diagnostics = {
        "task_count": len(tasks),
        "excluded_counts": excluded,
        "undefined_metrics": [m for m in METRICS if not agg.defined(m)],
    }
    return agg
