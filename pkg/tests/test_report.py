"""Markdown report model: parsing, citation links, spans, and stats."""

import re

import pytest

from reval.errors import EmptyInput
from reval.report import (
    extract_citation_links,
    normalize_url,
    parse_report,
    report_stats,
    sentence_spans,
    split_sections,
)

THREE_HEADING_DOC = """\
# Findings

Solar additions set a record [IEA](https://www.iea.org/reports/2024).
Battery costs kept falling [BNEF](https://about.bnef.com/blog/battery).

## Methods

Raw data comes from https://www.eia.gov/electricity and was cleaned by hand.

## Caveats

Sample sizes vary across regions.
"""


def test_single_link_document():
    report = parse_report("# A\nSee [x](https://a.com/p).\n", "t", "q")
    assert len(report.body) == 1
    assert [c.url for c in report.citations] == ["https://a.com/p"]


def test_empty_input():
    with pytest.raises(EmptyInput):
        parse_report("", "t", "q")
    with pytest.raises(EmptyInput):
        parse_report("   \n\t", "t", "q")


def _oracle_urls(text):
    """Independent scan: inline link targets plus standalone URLs."""
    inline = re.findall(r"\]\((https?://[^)]+)\)", text)
    standalone = [u.rstrip(".,;:!?") for u in
                  re.findall(r"(?<!\()(?<!\[)https?://[^\s)\]]+", text)]
    return sorted(inline + [u for u in standalone if u not in inline])


def test_three_heading_fixture_against_oracle():
    report = parse_report(THREE_HEADING_DOC, "t", "q")
    assert len(report.body) == 3
    assert sorted(c.url for c in report.citations) == _oracle_urls(THREE_HEADING_DOC)
    assert len(report.citations) == 3


def test_span_soundness():
    report = parse_report(THREE_HEADING_DOC, "t", "q")
    for link in report.citations:
        s, e = link.anchor_span
        assert link.url in report.text[s:e]


def test_reference_style_links():
    doc = ("Capacity doubled last year [growth][iea].\n\n"
           "[iea]: https://www.iea.org/reports/2024\n")
    links, _ = extract_citation_links(doc)
    assert [l.url for l in links] == ["https://www.iea.org/reports/2024"]
    s, e = links[0].anchor_span
    assert doc[s:e] == links[0].url
    assert "doubled" in links[0].context


def test_round_trip_reparse():
    report = parse_report(THREE_HEADING_DOC, "t", "q")
    again = parse_report(report.text, "t", "q")
    assert again.citations == report.citations
    assert again.body == report.body


def test_numbered_bracket_diagnostic():
    report = parse_report("Prices fell sharply [1].\n", "t", "q")
    assert not report.citations
    assert any("numbered bracket" in d for d in report.diagnostics)


def test_context_is_surrounding_sentence():
    report = parse_report(THREE_HEADING_DOC, "t", "q")
    assert "Solar additions set a record" in report.citations[0].context


class TestNormalizeUrl:
    def test_case_and_fragment(self):
        assert normalize_url("HTTPS://Example.COM/Path#frag") == \
            "https://example.com/Path"

    def test_trailing_slash(self):
        assert normalize_url("https://a.com/p/") == "https://a.com/p"
        assert normalize_url("https://a.com/") == "https://a.com"

    def test_tracking_params_dropped(self):
        assert normalize_url("https://a.com/p?utm_source=x&id=3") == \
            "https://a.com/p?id=3"

    def test_ordinary_params_kept(self):
        assert normalize_url("https://a.com/p?q=solar") == "https://a.com/p?q=solar"


class TestSections:
    def test_preamble_before_first_heading(self):
        sections = split_sections("intro text\n\n# One\nbody\n")
        assert sections[0].heading is None
        assert sections[1].heading == "One"

    def test_levels(self):
        sections = split_sections("# A\n\n## B\n\n### C\n")
        assert [s.level for s in sections] == [1, 2, 3]

    def test_no_headings(self):
        sections = split_sections("just a paragraph\n\nand another\n")
        assert len(sections) == 1
        assert sections[0].paragraphs == ("just a paragraph", "and another")


class TestSentenceSpans:
    def test_spans_cover_text(self):
        text = "One sentence. Another one! A third?\nA line."
        spans = sentence_spans(text)
        assert spans[0] == (0, 13)
        assert "".join(text[s:e] for s, e in spans) == text


class TestStats:
    def test_one_word(self):
        report = parse_report("a", "t", "q")
        assert report_stats(report)["word_count"] == 1

    def test_urls_excluded(self):
        words = " ".join(f"item{i}" for i in range(100))
        doc = (f"{words}\n\nhttps://a.com/x and https://b.org/y\n")
        report = parse_report(doc, "t", "q")
        # "and" is the only token the two URL lines add
        assert report_stats(report)["word_count"] == 101

    def test_additivity(self):
        doc = "# H\n\nSome words about solar [x](https://a.com/p).\n"
        single = report_stats(parse_report(doc, "t", "q"))["word_count"]
        double = report_stats(parse_report(doc + doc, "t", "q"))["word_count"]
        assert double == 2 * single

    def test_counts(self):
        report = parse_report(THREE_HEADING_DOC, "t", "q")
        stats = report_stats(report)
        assert stats["section_count"] == 3
        assert stats["citation_count"] == 3
