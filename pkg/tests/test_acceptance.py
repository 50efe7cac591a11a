"""Acceptance suite: one test per shipping criterion, each with pinned
tolerances and a runtime budget. Everything runs offline against the
bundled fixture corpus and the oracle harness.
"""

import hashlib
import itertools
import json
import random
import time
from datetime import date, timedelta
from fractions import Fraction
from pathlib import Path

from click.testing import CliRunner

from reval.adaptive import WQ_RUBRIC, RqTools
from reval.cli import main
from reval.domains import extract_root_domain
from reval.evidence import (
    FixtureFetchBackend,
    FixtureSearchBackend,
    SearchResult,
    apply_cutoff,
)
from reval.gateway import Gateway
from reval.harness import (
    bundled_pairs_path,
    compare_pairs,
    default_grid,
    load_pairs,
    round_half_up,
    run_sweep,
    temporal_run,
)
from reval.protocol import load_protocol
from reval.report import parse_report
from reval.scoring import (
    LabelCounts,
    cf_score,
    citation_integrity,
    claim_attribution,
    factuality_score,
    kic_score,
    rq_score,
    wq_final,
)
from reval.workflow import WorkflowContext, run_ci, run_factuality

DATA = Path(__file__).parent / "data"
TASKS = json.loads((DATA / "tasks.json").read_text("utf-8"))["tasks"]
TODAY = date(2026, 8, 20)


def replay_gateway():
    return Gateway(mode="replay", fixture_dir=DATA / "fixtures")


def replay_workflow_ctx():
    return WorkflowContext(
        gateway=replay_gateway(),
        search_backend=FixtureSearchBackend(str(DATA / "search_fixtures.json")),
        fetch_backend=FixtureFetchBackend(str(DATA / "fetch_fixtures.json")),
        workers=1,
    )


def test_criterion_01_formula_oracle_equivalence():
    """Brute-force enumeration, counts <= 6, exact rational match."""
    start = time.monotonic()
    for s, p, c, u in itertools.product(range(7), repeat=4):
        counts = LabelCounts(n_supp=s, n_part=p, n_con=c, n_unver=u)
        denom = 2 * (s + p + c)
        oracle = None if denom == 0 else Fraction(2 * s + p, denom)
        assert factuality_score(counts) == oracle
    for s, p, neu, c, u in itertools.product(range(7), repeat=5):
        counts = LabelCounts(n_supp=s, n_part=p, n_neu=neu, n_con=c, n_unver=u)
        denom = 2 * (s + p + neu + c)
        oracle = None if denom == 0 else Fraction(2 * s + p, denom)
        assert cf_score(counts) == oracle
    assert time.monotonic() - start < 1.0


def test_criterion_02_citation_integrity_algebra():
    """10,000 random (ca, cf) pairs; harmonic-mean identity, bounds, and
    edge rules, all within 1e-12."""
    start = time.monotonic()
    rng = random.Random(0)
    for _ in range(10_000):
        ca, cf = Fraction(rng.random()), Fraction(rng.random())
        ci = citation_integrity(ca, cf)
        if ca == 0 or cf == 0:
            assert ci == 0
            continue
        direct = 2 * ca * cf / (ca + cf)
        assert abs(ci - direct) <= Fraction(1, 10**12)
        assert min(ca, cf) <= ci <= 2 * min(ca, cf)
        assert ci <= (ca + cf) / 2
    assert citation_integrity(Fraction(0), Fraction(1, 2)) == 0
    assert citation_integrity(Fraction(1), Fraction(1)) == 1
    # a report with no citations at all scores 0 even though faithfulness
    # is undefined for it
    assert citation_integrity(Fraction(0), None) == 0
    assert time.monotonic() - start < 5.0


def test_criterion_03_corruption_sweep_oracle():
    """Full grid r in {0, 1/15, ..., 1}: factuality exactly
    (15 - round(15r))/15 and monotone non-increasing; alignment invariant
    at 1.0 across all corruption levels."""
    start = time.monotonic()
    pairs = load_pairs(bundled_pairs_path())
    curve = run_sweep(default_grid(), pairs)
    assert len(curve.points) == 16
    for r, fact, align in curve.points:
        assert fact == Fraction(15 - round_half_up(15 * r), 15)
        assert align == 1
    facts = [f for _, f, _ in curve.points]
    assert all(a >= b for a, b in zip(facts, facts[1:]))
    assert time.monotonic() - start < 10.0


def test_criterion_04_temporal_cutoff_soundness():
    """1,000 randomized fixtures: under a cutoff no post-cutoff result and
    no undated result survives. Large-scale cutoff magnitudes need live
    judges and live web; the offline substitute is this soundness property
    plus the strict-ordering check in criterion 10."""
    start = time.monotonic()
    rng = random.Random(42)
    base = date(2024, 1, 1)
    for case in range(1000):
        cutoff = base + timedelta(days=rng.randrange(-400, 400))
        results = []
        for i in range(rng.randrange(0, 12)):
            published = (None if rng.random() < 0.3 else
                         base + timedelta(days=rng.randrange(-500, 500)))
            results.append(SearchResult(url=f"https://a.com/{case}/{i}",
                                        title="t", snippet="s",
                                        published_date=published))
        kept = apply_cutoff(results, cutoff)
        for r in kept:
            assert r.published_date is not None
            assert r.published_date <= cutoff
        # soundness only removes; nothing admissible is dropped
        admissible = [r for r in results if r.published_date is not None
                      and r.published_date <= cutoff]
        assert kept == admissible
    assert time.monotonic() - start < 5.0


def test_criterion_05_kic_rq_wq_arithmetic():
    """kic exhaustive to K = 20; rq/wq hand values to 1e-9; rubric
    sub-weights sum to 1 exactly."""
    start = time.monotonic()
    for k in range(1, 21):
        for yes in range(k + 1):
            verdicts = ["yes"] * yes + ["no"] * (k - yes)
            assert kic_score(verdicts) == Fraction(yes, k)
    assert abs(rq_score([8, 4]) - Fraction(3, 5)) <= Fraction(1, 10**9)
    assert abs(rq_score([10]) - 1) <= Fraction(1, 10**9)
    assert abs(wq_final([0, 0, 100]) - Fraction(1, 3)) <= Fraction(1, 10**9)
    assert abs(wq_final([60, 60, 60]) - Fraction(3, 5)) <= Fraction(1, 10**9)
    for subs in WQ_RUBRIC.values():
        assert sum(w for _, w, _ in subs) == 1
    assert time.monotonic() - start < 1.0


def test_criterion_06_replay_determinism(tmp_path):
    """Two full CLI evaluations of the bundled 3-task corpus are
    byte-identical per scorecard (sha256 digests)."""
    start = time.monotonic()
    runner = CliRunner()

    def run(results_dir, workers):
        result = runner.invoke(main, [
            "evaluate", str(DATA / "tasks.json"),
            "--mode", "replay",
            "--fixtures", str(DATA / "fixtures"),
            "--search-fixtures", str(DATA / "search_fixtures.json"),
            "--fetch-fixtures", str(DATA / "fetch_fixtures.json"),
            "--protocol-dir", str(DATA / "protocols"),
            "--results-dir", str(results_dir),
            "--workers", str(workers),
            "--today", "2026-08-20"])
        assert result.exit_code == 0, result.output
        return {p.name: hashlib.sha256(p.read_bytes()).hexdigest()
                for p in results_dir.glob("*.scorecard.json")}

    first = run(tmp_path / "run1", 2)
    second = run(tmp_path / "run2", 1)
    assert set(first) == {"alpha.scorecard.json", "beta.scorecard.json",
                          "gamma.scorecard.json"}
    assert first == second
    assert time.monotonic() - start < 30.0


DOMAIN_TABLE = [
    ("https://www.nature.com/articles/xyz", "nature.com"),
    ("http://example.com", "example.com"),
    ("https://blogs.nih.gov/a/b?c=1", "nih.gov"),
    ("https://www.bbc.co.uk/news", "bbc.co.uk"),
    ("https://research.ac.uk/grants", "research.ac.uk"),
    ("https://www.sydney.edu.au/engineering", "sydney.edu.au"),
    ("https://user.github.io/project", "user.github.io"),
    ("https://myblog.blogspot.com/2024/01/post", "myblog.blogspot.com"),
    ("https://a.b.co.jp/x", "b.co.jp"),
    ("https://press.un.org/en", "un.org"),
    ("https://sub.deepmind.google/about", "deepmind.google"),
    ("https://example.com:8443/p", "example.com"),
    ("HTTPS://WWW.Example.COM/Path", "example.com"),
    ("https://example.com./x", "example.com"),
    ("https://user@example.com/", "example.com"),
    ("https://docs.readthedocs.io/en/latest", "docs.readthedocs.io"),
    ("https://en.wikipedia.org/wiki/X", "wikipedia.org"),
    ("https://www.gov.uk/guidance", "www.gov.uk"),
    ("https://a.b.ck/x", "a.b.ck"),
    ("https://www.ck/home", "www.ck"),
    ("https://myapp.herokuapp.com/x", "myapp.herokuapp.com"),
]


def test_criterion_07_domain_extraction_bit_exact():
    """21-row precomputed table against the vendored suffix list."""
    start = time.monotonic()
    for url, expected in DOMAIN_TABLE:
        assert extract_root_domain(url).value == expected, url
    assert time.monotonic() - start < 1.0


def test_criterion_08_pipeline_conservation():
    """On every bundled fixture evaluation: label tallies conserve claim
    counts, evidence passages substring-match their source documents, and
    every defined score lies in [0, 1]."""
    start = time.monotonic()
    fetch_fixtures = json.loads((DATA / "fetch_fixtures.json").read_text("utf-8"))
    sources = {url: row.get("content_text", "")
               for url, row in fetch_fixtures.items()}
    for spec in TASKS:
        report = parse_report((DATA / spec["report"]).read_text("utf-8"),
                              spec["task_id"], spec["query"])
        ctx = replay_workflow_ctx()

        counts, records = run_factuality(report, spec["query"], TODAY, ctx)
        assert counts.total == len(records)
        for record in records:
            for url, passage in (record.evidence.supporting
                                 + record.evidence.opposing):
                assert passage in sources[url], (spec["task_id"], url)
        fact = factuality_score(counts)
        assert fact is None or 0 <= fact <= 1

        ca_inputs, cf_counts, ci_records, _ = run_ci(report, replay_workflow_ctx())
        assert cf_counts.total == len(ci_records)
        assert ca_inputs["n_cited"] == len(ci_records)
        assert ca_inputs["n_cited"] <= ca_inputs["n_total"]
        ca = claim_attribution(**ca_inputs)
        cf = cf_score(cf_counts)
        ci = citation_integrity(ca, cf)
        for score in (ca, cf, ci):
            assert score is None or 0 <= score <= 1
    assert time.monotonic() - start < 20.0


def test_criterion_09_reasoning_pair_direction():
    """The malformed twin of the bundled matched pair scores strictly
    lower on reasoning quality; only the direction is asserted, the
    magnitude is judge-dependent."""
    protocol = load_protocol(DATA / "pair" / "protocol.json")
    sound = parse_report((DATA / "pair" / "sound.md").read_text("utf-8"),
                         "pair-sound", protocol.query)
    malformed = parse_report((DATA / "pair" / "malformed.md").read_text("utf-8"),
                             "pair-malformed", protocol.query)
    tools = RqTools(
        search_backend=FixtureSearchBackend(str(DATA / "search_fixtures.json")),
        fetch_backend=FixtureFetchBackend(str(DATA / "fetch_fixtures.json")))
    out = compare_pairs(sound, malformed, protocol, tools, replay_gateway())
    assert out["relative_degradation"] > 0
    assert 0 < out["rq_malformed"] < out["rq_sound"] <= 1


def test_criterion_10_full_scale_results_out_of_scope():
    """The published full-scale score magnitudes require live frontier
    judges, live web retrieval, and multi-hour runs; they are declared
    non-reproducible offline and are not asserted anywhere in this suite.
    The offline substitute asserts the direction they demonstrate: a
    report variant with a strictly larger evidence window never scores
    lower on checklist coverage."""
    checklist = ("solar additions", "battery costs", "grid reform")
    variants = [
        ("full", "Record solar additions; battery costs fell; grid reform "
                 "advanced."),
        ("minus-6m", "Record solar additions; battery costs fell."),
        ("minus-12m", "Record solar additions."),
    ]

    def coverage(text):
        return kic_score(["yes" if fact in text else "no"
                          for fact in checklist])

    curve = temporal_run(variants, coverage)
    assert [score for _, score in curve] == \
        [Fraction(1), Fraction(2, 3), Fraction(1, 3)]
    scores = [score for _, score in curve]
    assert all(a > b for a, b in zip(scores, scores[1:]))
