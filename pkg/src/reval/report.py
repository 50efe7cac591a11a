"""Markdown report model: sections, citation links, and basic stats.

Dialect is deliberately narrow: ATX headings and CommonMark link forms
(inline, reference-style, bare URLs). HTML blocks pass through as opaque
text. Reports are frozen after construction and safe to share between
concurrent evaluators.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from datetime import date
from urllib.parse import parse_qsl, urlencode, urlsplit, urlunsplit

from .errors import EmptyInput

ATX_HEADING_RE = re.compile(r"^(#{1,6})\s+(.*?)\s*#*\s*$", re.MULTILINE)
INLINE_LINK_RE = re.compile(r"\[([^\]]*)\]\((https?://[^\s)]+)\)")
REF_LINK_DEF_RE = re.compile(r"^\s*\[([^\]]+)\]:\s*(https?://\S+)\s*$", re.MULTILINE)
BARE_URL_RE = re.compile(r"(?<![(\[<])(https?://[^\s)\]>]+)")
SENTENCE_END_RE = re.compile(r"[.!?](?=\s|$)|\n")


@dataclass(frozen=True)
class CitationLink:
    url: str
    anchor_span: tuple[int, int]  # character range in the raw body text
    context: str                  # surrounding sentence text


@dataclass(frozen=True)
class Section:
    heading: str | None
    level: int
    paragraphs: tuple[str, ...]


@dataclass(frozen=True)
class Report:
    task_id: str
    query: str
    text: str                     # raw markdown body, span reference frame
    body: tuple[Section, ...]
    citations: tuple[CitationLink, ...]
    generated_at: date | None = None
    diagnostics: tuple[str, ...] = field(default_factory=tuple)


def normalize_url(url: str) -> str:
    """Citation identity: lowercase scheme/host, drop fragment and
    tracking params, strip a trailing slash from the path."""
    parts = urlsplit(url.strip())
    host = parts.netloc.lower()
    path = parts.path.rstrip("/") if parts.path != "/" else ""
    query = urlencode([(k, v) for k, v in parse_qsl(parts.query, keep_blank_values=True)
                       if not k.lower().startswith("utm_")])
    return urlunsplit((parts.scheme.lower(), host, path, query, ""))


def _sentence_bounds(text: str, pos: int) -> tuple[int, int]:
    start = 0
    for m in SENTENCE_END_RE.finditer(text, 0, pos):
        start = m.end()
    m = SENTENCE_END_RE.search(text, pos)
    end = m.end() if m else len(text)
    return start, end


def sentence_spans(text: str) -> list[tuple[int, int]]:
    """Half-open sentence spans covering the whole text."""
    spans = []
    start = 0
    for m in SENTENCE_END_RE.finditer(text):
        spans.append((start, m.end()))
        start = m.end()
    if start < len(text):
        spans.append((start, len(text)))
    return spans


def extract_citation_links(text: str) -> tuple[list[CitationLink], list[str]]:
    """All URL-bearing link forms with spans into the raw text.

    Returns (links, diagnostics). Non-URL citation syntaxes (numbered
    brackets, footnotes) are reported as diagnostics, not parsed.
    """
    links: list[CitationLink] = []
    diagnostics: list[str] = []
    taken: list[tuple[int, int]] = []

    def claim(span: tuple[int, int]) -> bool:
        if any(not (span[1] <= s or span[0] >= e) for s, e in taken):
            return False
        taken.append(span)
        return True

    ref_defs: dict[str, tuple[str, tuple[int, int]]] = {}
    for m in REF_LINK_DEF_RE.finditer(text):
        # span points at the URL inside the definition so spans always
        # contain the url text, even for reference-style usage
        ref_defs[m.group(1).lower()] = (m.group(2), m.span(2))
        claim(m.span())

    for m in INLINE_LINK_RE.finditer(text):
        if claim(m.span()):
            s, e = _sentence_bounds(text, m.start())
            links.append(CitationLink(m.group(2), m.span(2), text[s:e].strip()))

    for m in re.finditer(r"\[([^\]]+)\]\[([^\]]*)\]", text):
        key = (m.group(2) or m.group(1)).lower()
        if key in ref_defs and claim(m.span()):
            url, span = ref_defs[key]
            s, e = _sentence_bounds(text, m.start())
            links.append(CitationLink(url, span, text[s:e].strip()))

    for m in BARE_URL_RE.finditer(text):
        url = m.group(1).rstrip(".,;:!?")
        span = (m.start(1), m.start(1) + len(url))
        if claim(span):
            s, e = _sentence_bounds(text, m.start())
            links.append(CitationLink(url, span, text[s:e].strip()))

    if re.search(r"(?<!\])\[\d+\](?!\(|\[|:)", text):
        diagnostics.append("numbered bracket citations present; not URL-bearing, skipped")

    links.sort(key=lambda l: l.anchor_span)
    return links, diagnostics


def split_sections(text: str) -> list[Section]:
    headings = list(ATX_HEADING_RE.finditer(text))
    sections: list[Section] = []

    def paragraphs(chunk: str) -> tuple[str, ...]:
        return tuple(p.strip() for p in re.split(r"\n\s*\n", chunk) if p.strip())

    if not headings:
        return [Section(None, 1, paragraphs(text))]
    if text[: headings[0].start()].strip():
        sections.append(Section(None, 1, paragraphs(text[: headings[0].start()])))
    for i, h in enumerate(headings):
        end = headings[i + 1].start() if i + 1 < len(headings) else len(text)
        body = text[h.end(): end]
        sections.append(Section(h.group(2).strip(), len(h.group(1)), paragraphs(body)))
    return sections


def parse_report(markdown: str, task_id: str, query: str,
                 generated_at: date | None = None) -> Report:
    if not markdown or not markdown.strip():
        raise EmptyInput("report markdown is blank")
    links, diagnostics = extract_citation_links(markdown)
    return Report(
        task_id=task_id,
        query=query,
        text=markdown,
        body=tuple(split_sections(markdown)),
        citations=tuple(links),
        generated_at=generated_at,
        diagnostics=tuple(diagnostics),
    )


_URL_TOKEN_RE = re.compile(r"https?://\S+")


def report_stats(report: Report) -> dict[str, int]:
    """Word/section/citation counts; URLs are excluded from word counting."""
    text = INLINE_LINK_RE.sub(lambda m: m.group(1), report.text)
    text = REF_LINK_DEF_RE.sub("", text)
    text = _URL_TOKEN_RE.sub("", text)
    text = re.sub(r"[#*_`>\[\]()|-]", " ", text)
    return {
        "word_count": len(text.split()),
        "section_count": len(report.body),
        "citation_count": len(report.citations),
    }
