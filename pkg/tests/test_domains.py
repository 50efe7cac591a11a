"""Registrable-domain extraction against the vendored suffix list.

The expected values were precomputed by hand against the vendored list
before the extractor was written; they are frozen here.
"""

import pytest
from hypothesis import given, strategies as st

from reval.domains import (
    RootDomain,
    domain_or_host,
    extract_root_domain,
    registrable_domain,
)
from reval.errors import MalformedUrl, UnknownSuffix

EXPECTED = [
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
    ("https://a.b.ck/x", "a.b.ck"),        # wildcard *.ck rule
    ("https://www.ck/home", "www.ck"),     # exception !www.ck rule
    ("https://myapp.herokuapp.com/x", "myapp.herokuapp.com"),
]


@pytest.mark.parametrize("url,expected", EXPECTED)
def test_extract_root_domain_table(url, expected):
    assert extract_root_domain(url) == RootDomain(expected)


@pytest.mark.parametrize("url,expected", EXPECTED)
def test_idempotence_on_table(url, expected):
    again = extract_root_domain("https://" + expected)
    assert again == RootDomain(expected)


NO_REGISTRABLE = [
    ("http://192.168.0.1/x", "192.168.0.1"),
    ("http://localhost:8080/x", "localhost"),
    ("http://intranet/x", "intranet"),
    ("https://b.ck/", "b.ck"),      # itself a wildcard public suffix
    ("https://co.uk/", "co.uk"),    # itself an exact public suffix
]


@pytest.mark.parametrize("url,host", NO_REGISTRABLE)
def test_unknown_suffix_raises(url, host):
    with pytest.raises(UnknownSuffix) as exc_info:
        extract_root_domain(url)
    assert exc_info.value.host == host


@pytest.mark.parametrize("url,host", NO_REGISTRABLE)
def test_domain_or_host_degrades_to_full_host(url, host):
    assert domain_or_host(url) == RootDomain(host)


@pytest.mark.parametrize("url", [
    "not a url",
    "ftp://example.com/x",
    "//example.com/x",
    "https:///path-only",
])
def test_malformed_url(url):
    with pytest.raises(MalformedUrl):
        extract_root_domain(url)


def test_registrable_domain_bare_host():
    assert registrable_domain("About.BNEF.com") == RootDomain("bnef.com")
    with pytest.raises(UnknownSuffix):
        registrable_domain("")


_LABELS = st.sampled_from(["a", "news", "blog", "x2", "long-label"])
_SUFFIXES = st.sampled_from(["com", "org", "io", "co.uk", "com.au", "gov"])


@given(sub=st.lists(_LABELS, min_size=0, max_size=2), owner=_LABELS,
       suffix=_SUFFIXES)
def test_idempotence_property(sub, owner, suffix):
    host = ".".join(sub + [owner, suffix])
    domain = registrable_domain(host)
    # the result is always owner label + suffix, and re-extracting is a fixpoint
    assert domain.value == f"{owner}.{suffix}"
    assert registrable_domain(domain.value) == domain
    assert extract_root_domain("https://" + host) == domain
