"""Registrable-domain (eTLD+1) extraction against a vendored suffix list."""

from __future__ import annotations

import ipaddress
import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from urllib.parse import urlsplit

from .errors import MalformedUrl, UnknownSuffix

_LABEL_RE = re.compile(r"^[a-z0-9]([a-z0-9-]*[a-z0-9])?$")


@dataclass(frozen=True)
class RootDomain:
    """Lowercase registrable domain, no scheme/path/port/leading www."""

    value: str


class SuffixRules:
    """Parsed public-suffix rules: exact, wildcard, and exception sets."""

    def __init__(self, lines: list[str]):
        self.exact: set[str] = set()
        self.wildcard: set[str] = set()   # stored without the "*." prefix
        self.exception: set[str] = set()  # stored without the "!" prefix
        for raw in lines:
            line = raw.strip()
            if not line or line.startswith("//"):
                continue
            if line.startswith("!"):
                self.exception.add(line[1:])
            elif line.startswith("*."):
                self.wildcard.add(line[2:])
            else:
                self.exact.add(line)

    def public_suffix(self, host: str) -> str:
        """Longest matching suffix for host, per the standard PSL algorithm.

        Exception rules win and shorten the suffix by one label. Hosts
        matching no rule fall back to the implicit "*" rule (last label).
        """
        labels = host.split(".")
        for i in range(len(labels)):
            candidate = ".".join(labels[i:])
            if candidate in self.exception:
                return ".".join(labels[i + 1:])
        best = labels[-1]  # implicit "*" rule
        for i in range(len(labels)):
            candidate = ".".join(labels[i:])
            if candidate in self.exact and len(candidate) > len(best):
                best = candidate
            # "*.x" matches exactly one extra label in front of x
            if i + 1 < len(labels):
                parent = ".".join(labels[i + 1:])
                if parent in self.wildcard and len(candidate) > len(best):
                    best = candidate
        return best


@lru_cache(maxsize=1)
def default_rules() -> SuffixRules:
    text = resources.files("reval.data").joinpath("public_suffix_list.dat").read_text("utf-8")
    return SuffixRules(text.splitlines())


def _host_of(url: str) -> str:
    try:
        parts = urlsplit(url)
    except ValueError as exc:
        raise MalformedUrl(str(exc)) from exc
    if parts.scheme not in ("http", "https") or not parts.netloc:
        raise MalformedUrl(f"not an absolute http(s) URL: {url!r}")
    host = parts.netloc.rsplit("@", 1)[-1]
    if host.startswith("["):  # bracketed IPv6
        return host
    return host.split(":", 1)[0]


def registrable_domain(host: str, rules: SuffixRules | None = None) -> RootDomain:
    """Registrable domain of a bare hostname.

    Raises UnknownSuffix for IPs, localhost, single labels, hosts that are
    themselves public suffixes, and anything that is not a valid DNS name;
    callers then treat the full host as the domain.
    """
    host = host.lower().rstrip(".")
    if not host or host == "localhost" or host.startswith("["):
        raise UnknownSuffix(host)
    try:
        ipaddress.ip_address(host)
        raise UnknownSuffix(host)
    except ValueError:
        pass
    labels = host.split(".")
    if len(labels) < 2 or not all(_LABEL_RE.match(l) for l in labels):
        raise UnknownSuffix(host)
    rules = rules or default_rules()
    suffix = rules.public_suffix(host)
    if host == suffix:
        raise UnknownSuffix(host)
    n_suffix = suffix.count(".") + 1
    return RootDomain(".".join(labels[-(n_suffix + 1):]))


def extract_root_domain(url: str, rules: SuffixRules | None = None) -> RootDomain:
    """Registrable domain of an absolute http(s) URL, e.g. nature.com."""
    return registrable_domain(_host_of(url), rules)


def domain_or_host(url: str, rules: SuffixRules | None = None) -> RootDomain:
    """Like extract_root_domain but degrades UnknownSuffix to the full host."""
    host = _host_of(url).lower().rstrip(".")
    try:
        return registrable_domain(host, rules)
    except UnknownSuffix:
        return RootDomain(host)
