"""Web search and URL-content retrieval with caching, deduplication, and a
strict publication-date cutoff for temporal simulation.

The cutoff policy is strict by design: when a cutoff is set, results with
an unknown publication date are excluded, since a single post-cutoff leak
would corrupt a temporal experiment.
"""

from __future__ import annotations

import json
import logging
import re
import threading
import time
from dataclasses import dataclass
from datetime import date, datetime
from html.parser import HTMLParser
from pathlib import Path
from typing import Protocol as TypingProtocol
from urllib.parse import urlsplit

from .errors import BackendUnavailable, MalformedUrl, RateLimited
from .report import normalize_url

logger = logging.getLogger(__name__)

DEFAULT_MAX_RESULTS = 8
DEFAULT_FETCH_TIMEOUT = 10.0
DEFAULT_FETCH_RETRIES = 2
DEFAULT_PER_HOST_LIMIT = 4

FETCH_STATUSES = ("ok", "paywalled", "blocked", "not_found", "timeout")


@dataclass(frozen=True)
class SearchQuery:
    text: str
    cutoff_date: date | None = None
    max_results: int = DEFAULT_MAX_RESULTS

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("search query text is empty")
        if self.max_results < 1:
            raise ValueError("max_results must be >= 1")


@dataclass(frozen=True)
class SearchResult:
    url: str
    title: str
    snippet: str
    published_date: date | None = None


@dataclass(frozen=True)
class FetchedDocument:
    url: str
    content_text: str
    retrieved_at: float
    status: str = "ok"

    def __post_init__(self):
        if self.status not in FETCH_STATUSES:
            raise ValueError(f"unknown fetch status: {self.status}")
        if (self.status == "ok") != bool(self.content_text):
            raise ValueError("content_text must be non-empty iff status is ok")


def parse_date(value) -> date | None:
    if value is None or value == "":
        return None
    if isinstance(value, date):
        return value
    return datetime.strptime(value[:10], "%Y-%m-%d").date()


class SearchBackend(TypingProtocol):
    def run(self, text: str, max_results: int) -> list[SearchResult]: ...


class FetchBackend(TypingProtocol):
    def get(self, url: str) -> FetchedDocument: ...


class FixtureSearchBackend:
    """Search results read from a JSON file or dict:
    {query text: [{url, title, snippet, published_date?}, ...]}"""

    def __init__(self, source: str | Path | dict):
        if isinstance(source, dict):
            data = source
        else:
            data = json.loads(Path(source).read_text("utf-8"))
        self.data = data
        self.calls: list[str] = []

    def run(self, text: str, max_results: int) -> list[SearchResult]:
        self.calls.append(text)
        rows = self.data.get(text, [])
        return [SearchResult(url=r["url"], title=r.get("title", ""),
                             snippet=r.get("snippet", ""),
                             published_date=parse_date(r.get("published_date")))
                for r in rows[:max_results]]


class FixtureFetchBackend:
    """Fetched pages read from a JSON file or dict keyed by normalized URL:
    {url: {status, content_text}}"""

    def __init__(self, source: str | Path | dict):
        if isinstance(source, dict):
            data = source
        else:
            data = json.loads(Path(source).read_text("utf-8"))
        self.data = {normalize_url(k): v for k, v in data.items()}
        self.calls: list[str] = []

    def get(self, url: str) -> FetchedDocument:
        self.calls.append(url)
        row = self.data.get(normalize_url(url))
        now = 0.0  # fixture time is frozen for reproducibility
        if row is None:
            return FetchedDocument(url=url, content_text="", retrieved_at=now,
                                   status="not_found")
        return FetchedDocument(url=url, content_text=row.get("content_text", ""),
                               retrieved_at=now, status=row.get("status", "ok"))


class _TextExtractor(HTMLParser):
    SKIP = {"script", "style", "nav", "header", "footer", "aside", "noscript"}

    def __init__(self):
        super().__init__()
        self.parts: list[str] = []
        self._skip_depth = 0

    def handle_starttag(self, tag, attrs):
        if tag in self.SKIP:
            self._skip_depth += 1

    def handle_endtag(self, tag):
        if tag in self.SKIP and self._skip_depth:
            self._skip_depth -= 1

    def handle_data(self, data):
        if not self._skip_depth and data.strip():
            self.parts.append(data.strip())


def extract_main_text(html: str) -> str:
    """Boilerplate-stripped page text (script/style/nav chrome removed)."""
    parser = _TextExtractor()
    parser.feed(html)
    return re.sub(r"\s+", " ", " ".join(parser.parts)).strip()


class HttpFetchBackend:
    """Live page fetcher with timeout budget and bounded transient retries."""

    def __init__(self, timeout: float = DEFAULT_FETCH_TIMEOUT,
                 retries: int = DEFAULT_FETCH_RETRIES):
        self.timeout = timeout
        self.retries = retries

    def get(self, url: str) -> FetchedDocument:
        import httpx

        now = time.time()
        last_exc: Exception | None = None
        for _ in range(self.retries + 1):
            try:
                resp = httpx.get(url, timeout=self.timeout, follow_redirects=True)
            except httpx.TimeoutException:
                return FetchedDocument(url=url, content_text="", retrieved_at=now,
                                       status="timeout")
            except httpx.HTTPError as exc:
                last_exc = exc
                continue
            if resp.status_code == 404:
                return FetchedDocument(url=url, content_text="", retrieved_at=now,
                                       status="not_found")
            if resp.status_code in (401, 402):
                return FetchedDocument(url=url, content_text="", retrieved_at=now,
                                       status="paywalled")
            if resp.status_code >= 400:
                return FetchedDocument(url=url, content_text="", retrieved_at=now,
                                       status="blocked")
            text = extract_main_text(resp.text)
            if not text:
                return FetchedDocument(url=url, content_text="", retrieved_at=now,
                                       status="blocked")
            return FetchedDocument(url=url, content_text=text, retrieved_at=now)
        logger.warning("fetch failed after retries: %s (%s)", url, last_exc)
        return FetchedDocument(url=url, content_text="", retrieved_at=now,
                               status="blocked")


class HttpSearchBackend:
    """Search behind a configurable HTTP JSON endpoint.

    Expected response: {"results": [{url, title, snippet, published_date?}]}
    """

    def __init__(self, endpoint: str, api_key: str = "", timeout: float = 15.0,
                 max_retries: int = 3):
        self.endpoint = endpoint
        self.api_key = api_key
        self.timeout = timeout
        self.max_retries = max_retries

    def run(self, text: str, max_results: int) -> list[SearchResult]:
        import httpx

        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        delay = 1.0
        for attempt in range(self.max_retries + 1):
            try:
                resp = httpx.post(self.endpoint,
                                  json={"query": text, "max_results": max_results},
                                  headers=headers, timeout=self.timeout)
            except httpx.HTTPError as exc:
                raise BackendUnavailable(str(exc)) from exc
            if resp.status_code == 429:
                if attempt == self.max_retries:
                    raise RateLimited(f"search rate limit persisted for {text!r}")
                time.sleep(delay)
                delay *= 2
                continue
            if resp.status_code >= 400:
                raise BackendUnavailable(f"search backend HTTP {resp.status_code}")
            rows = resp.json().get("results", [])
            return [SearchResult(url=r["url"], title=r.get("title", ""),
                                 snippet=r.get("snippet", ""),
                                 published_date=parse_date(r.get("published_date")))
                    for r in rows[:max_results]]
        raise BackendUnavailable("unreachable")


def dedupe(results: list[SearchResult]) -> list[SearchResult]:
    """First occurrence per normalized URL wins; order preserved."""
    seen: set[str] = set()
    out = []
    for r in results:
        key = normalize_url(r.url)
        if key not in seen:
            seen.add(key)
            out.append(r)
    return out


def apply_cutoff(results: list[SearchResult], cutoff: date | None) -> list[SearchResult]:
    """Strict temporal filter: undated results are excluded under a cutoff."""
    if cutoff is None:
        return list(results)
    return [r for r in results
            if r.published_date is not None and r.published_date <= cutoff]


def search(q: SearchQuery, backend: SearchBackend) -> list[SearchResult]:
    """Deduplicated, cutoff-filtered search. The cutoff is applied post-hoc
    regardless of backend support."""
    results = backend.run(q.text, q.max_results)
    return apply_cutoff(dedupe(results), q.cutoff_date)


class EvidenceCache:
    """Per-run fetch cache keyed by normalized URL. Two fetches of the same
    normalized URL within a run return the identical document."""

    def __init__(self, cache_dir: str | Path | None = None, namespace: str = "run"):
        self._mem: dict[str, FetchedDocument] = {}
        self._lock = threading.Lock()
        self.cache_dir = Path(cache_dir) / namespace if cache_dir else None
        self._host_semaphores: dict[str, threading.Semaphore] = {}

    def _host_gate(self, url: str) -> threading.Semaphore:
        host = urlsplit(url).netloc.lower()
        with self._lock:
            if host not in self._host_semaphores:
                self._host_semaphores[host] = threading.Semaphore(DEFAULT_PER_HOST_LIMIT)
            return self._host_semaphores[host]

    def fetch(self, url: str, backend: FetchBackend) -> FetchedDocument:
        parts = urlsplit(url)
        if parts.scheme not in ("http", "https") or not parts.netloc:
            raise MalformedUrl(f"not an absolute http(s) URL: {url!r}")
        key = normalize_url(url)
        with self._lock:
            if key in self._mem:
                return self._mem[key]
        if self.cache_dir:
            path = self.cache_dir / (re.sub(r"[^a-zA-Z0-9]+", "_", key)[:180] + ".json")
            if path.exists():
                obj = json.loads(path.read_text("utf-8"))
                doc = FetchedDocument(**obj)
                with self._lock:
                    self._mem[key] = doc
                return doc
        with self._host_gate(url):
            doc = backend.get(url)
        with self._lock:
            self._mem.setdefault(key, doc)
            doc = self._mem[key]
        if self.cache_dir:
            self.cache_dir.mkdir(parents=True, exist_ok=True)
            tmp = path.with_suffix(".tmp")
            tmp.write_text(json.dumps(doc.__dict__, sort_keys=True), "utf-8")
            tmp.replace(path)
        return doc


def fetch(url: str, backend: FetchBackend,
          cache: EvidenceCache | None = None) -> FetchedDocument:
    if cache is None:
        cache = EvidenceCache()
    return cache.fetch(url, backend)
