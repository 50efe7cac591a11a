"""Run configuration and run manifests for the command-line entry points."""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .errors import RevalError
from .evidence import (
    FetchBackend,
    FixtureFetchBackend,
    FixtureSearchBackend,
    HttpFetchBackend,
    HttpSearchBackend,
    SearchBackend,
)
from .gateway import Backend, Gateway, HttpBackend, SchemaStubBackend, canonical_json

MODES = ("live", "record", "replay")


@dataclass
class RunConfig:
    backend_mode: str = "replay"
    provider: str = "http"            # "http" or "stub" (offline canonical judge)
    fixture_dir: str | None = None
    search_fixtures: str | None = None
    fetch_fixtures: str | None = None
    protocol_dir: str = "protocols"
    cache_dir: str | None = None
    results_dir: str = "results"
    cutoff_date: str | None = None
    today: str | None = None
    workers: int = 2
    seed: int = 0
    max_results: int = 8
    rq_budget: int = 15
    creation_budget: int = 20

    def __post_init__(self):
        if self.backend_mode not in MODES:
            raise RevalError(f"unknown backend mode: {self.backend_mode}")
        if self.backend_mode == "replay":
            if not self.fixture_dir or not Path(self.fixture_dir).is_dir():
                raise RevalError("replay mode requires an existing fixture directory")
        if self.backend_mode == "live" and self.provider == "http":
            if not os.environ.get("REVAL_PROVIDER_BASE_URL"):
                raise RevalError("live mode requires REVAL_PROVIDER_BASE_URL")

    @classmethod
    def from_file(cls, path: str | Path, **overrides) -> "RunConfig":
        obj = json.loads(Path(path).read_text("utf-8"))
        obj.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**obj)

    def make_gateway(self) -> Gateway:
        backend: Backend | None = None
        if self.backend_mode in ("live", "record"):
            backend = SchemaStubBackend() if self.provider == "stub" else HttpBackend()
        return Gateway(backend=backend, mode=self.backend_mode,
                       fixture_dir=self.fixture_dir)

    def make_search_backend(self) -> SearchBackend:
        if self.search_fixtures:
            return FixtureSearchBackend(self.search_fixtures)
        endpoint = os.environ.get("REVAL_SEARCH_ENDPOINT", "")
        if not endpoint:
            if self.backend_mode == "live":
                raise RevalError("live search requires REVAL_SEARCH_ENDPOINT")
            return FixtureSearchBackend({})
        return HttpSearchBackend(endpoint,
                                 api_key=os.environ.get("REVAL_SEARCH_API_KEY", ""))

    def make_fetch_backend(self) -> FetchBackend:
        if self.fetch_fixtures:
            return FixtureFetchBackend(self.fetch_fixtures)
        if self.backend_mode != "live":
            return FixtureFetchBackend({})
        return HttpFetchBackend()


@dataclass
class RunManifest:
    run_id: str
    config: dict
    input_digests: dict[str, str]
    tool_version: str
    started_at: float = field(default_factory=time.time)
    ended_at: float | None = None

    def to_json_obj(self) -> dict:
        return asdict(self)


def file_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# config fields that steer where artifacts land rather than what they
# contain; two runs differing only here must share a run_id
_OUTPUT_ONLY_FIELDS = ("results_dir", "cache_dir", "workers")


def build_manifest(config: RunConfig, inputs: dict[str, str | Path]) -> RunManifest:
    """run_id is content-derived (config snapshot + input digests), so
    identical replay runs share a run_id and produce identical artifacts."""
    from . import __version__

    digests = {str(k): file_digest(v) for k, v in sorted(inputs.items())}
    snapshot = asdict(config)
    material = {k: v for k, v in snapshot.items() if k not in _OUTPUT_ONLY_FIELDS}
    run_id = hashlib.sha256(
        canonical_json({"config": material, "inputs": digests}).encode()
    ).hexdigest()[:16]
    return RunManifest(run_id=run_id, config=snapshot, input_digests=digests,
                       tool_version=__version__)


def write_json_atomic(path: str | Path, obj: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", "utf-8")
    tmp.replace(path)
