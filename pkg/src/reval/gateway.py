"""Provider-agnostic judged-completion gateway.

Structured output is enforced by post-validation plus a bounded repair
loop rather than provider-specific constrained decoding. Requests and
responses can be recorded into a content-addressed fixture directory and
replayed byte-identically, which makes every downstream pipeline a pure
function of its inputs.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Protocol as TypingProtocol

import jsonschema

from .errors import (
    AttemptsExhausted,
    BackendUnavailable,
    FixtureMiss,
    SchemaViolation,
)

logger = logging.getLogger(__name__)

DEFAULT_MAX_ATTEMPTS = 3


@dataclass(frozen=True)
class JudgeRequest:
    role_prompt: str
    user_prompt: str
    output_schema: dict
    temperature: float = 0.0  # fixed at 0 for evaluation consistency
    max_attempts: int = DEFAULT_MAX_ATTEMPTS


@dataclass(frozen=True)
class JudgeResponse:
    payload: dict
    raw_text: str
    provider_meta: dict = field(default_factory=dict)


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def fixture_key(req: JudgeRequest) -> str:
    """Content digest of the request; identical requests map to identical
    digests. Temperature and attempts are deliberately excluded."""
    material = canonical_json({
        "role_prompt": req.role_prompt,
        "user_prompt": req.user_prompt,
        "output_schema": req.output_schema,
    })
    return hashlib.sha256(material.encode("utf-8")).hexdigest()


def with_repair(req: JudgeRequest, malformed_text: str, error: str) -> JudgeRequest:
    """Next attempt after a validation failure: quote the validator error,
    decrement the attempt budget."""
    if req.max_attempts <= 1:
        raise AttemptsExhausted("no attempts left for repair")
    instruction = (
        f"{req.user_prompt}\n\n"
        "Your previous response failed validation.\n"
        f"Previous response:\n{malformed_text}\n"
        f"Validation error: {error}\n"
        "Respond with a single JSON object matching the required schema."
    )
    return replace(req, user_prompt=instruction, max_attempts=req.max_attempts - 1)


class Backend(TypingProtocol):
    def complete(self, req: JudgeRequest) -> str:
        """Return raw provider text for the request."""


class ScriptedBackend:
    """Test backend replaying a fixed queue of raw responses."""

    def __init__(self, responses: list[str]):
        self.responses = list(responses)
        self.calls = 0
        self.requests: list[JudgeRequest] = []

    def complete(self, req: JudgeRequest) -> str:
        if not self.responses:
            raise BackendUnavailable("scripted backend exhausted")
        self.calls += 1
        self.requests.append(req)
        return self.responses.pop(0)


class SchemaStubBackend:
    """Deterministic offline backend: emits the canonical instance of the
    requested schema. Useful for smoke runs and replay-fixture generation."""

    def __init__(self):
        self.calls = 0

    def complete(self, req: JudgeRequest) -> str:
        self.calls += 1
        return canonical_json(default_instance(req.output_schema))


def default_instance(schema: dict):
    """Smallest deterministic instance of a JSON schema subset (objects,
    arrays, enums, consts, bounded numbers)."""
    if "const" in schema:
        return schema["const"]
    if "enum" in schema:
        return schema["enum"][0]
    t = schema.get("type")
    if t == "object":
        props = schema.get("properties", {})
        required = schema.get("required", list(props))
        return {k: default_instance(props[k]) for k in required if k in props}
    if t == "array":
        n = schema.get("minItems", 0)
        item = schema.get("items", {"type": "string"})
        return [default_instance(item) for _ in range(n)]
    if t == "integer":
        return int(schema.get("minimum", 0))
    if t == "number":
        return float(schema.get("minimum", 0))
    if t == "boolean":
        return True
    if t == "string":
        return schema.get("default", "stub")
    return None


class HttpBackend:
    """OpenAI-compatible chat-completions backend.

    Credentials come from the environment and are never persisted into
    fixtures or logs.
    """

    def __init__(self, base_url: str | None = None, model: str | None = None,
                 api_key: str | None = None, timeout: float = 60.0):
        self.base_url = (base_url or os.environ.get("REVAL_PROVIDER_BASE_URL", "")).rstrip("/")
        self.model = model or os.environ.get("REVAL_PROVIDER_MODEL", "")
        self.api_key = api_key or os.environ.get("REVAL_PROVIDER_API_KEY", "")
        self.timeout = timeout

    def complete(self, req: JudgeRequest) -> str:
        if not self.base_url or not self.model:
            raise BackendUnavailable("provider base URL / model not configured")
        import httpx

        body = {
            "model": self.model,
            "temperature": req.temperature,
            "messages": [
                {"role": "system", "content": req.role_prompt},
                {"role": "user", "content": req.user_prompt},
            ],
        }
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        try:
            resp = httpx.post(f"{self.base_url}/chat/completions", json=body,
                              headers=headers, timeout=self.timeout)
            resp.raise_for_status()
        except httpx.HTTPError as exc:
            raise BackendUnavailable(str(exc)) from exc
        return resp.json()["choices"][0]["message"]["content"]


def extract_json_object(text: str) -> dict:
    """Parse the first JSON object in provider text, tolerating fences."""
    text = text.strip()
    try:
        obj = json.loads(text)
        if isinstance(obj, dict):
            return obj
    except json.JSONDecodeError:
        pass
    start, end = text.find("{"), text.rfind("}")
    if start != -1 and end > start:
        obj = json.loads(text[start: end + 1])
        if isinstance(obj, dict):
            return obj
    raise ValueError("no JSON object found in response")


class Gateway:
    """Judged completions with schema validation, repair retries, and a
    record/replay fixture store.

    Modes: "live" (backend only), "record" (backend + write fixtures,
    replaying existing recordings first), "replay" (fixtures only).
    """

    def __init__(self, backend: Backend | None = None, mode: str = "live",
                 fixture_dir: str | Path | None = None, max_concurrency: int = 8):
        if mode not in ("live", "record", "replay"):
            raise ValueError(f"unknown gateway mode: {mode}")
        if mode in ("live", "record") and backend is None:
            raise BackendUnavailable(f"{mode} mode requires a backend")
        if mode in ("record", "replay") and fixture_dir is None:
            raise ValueError(f"{mode} mode requires a fixture directory")
        self.backend = backend
        self.mode = mode
        self.fixture_dir = Path(fixture_dir) if fixture_dir else None
        self._semaphore = threading.Semaphore(max_concurrency)
        self._write_lock = threading.Lock()

    def _fixture_path(self, digest: str) -> Path:
        return self.fixture_dir / f"{digest}.json"

    def _load_fixture(self, digest: str) -> JudgeResponse | None:
        path = self._fixture_path(digest)
        if not path.exists():
            return None
        obj = json.loads(path.read_text("utf-8"))
        return JudgeResponse(payload=obj["response"]["payload"],
                             raw_text=obj["response"]["raw_text"],
                             provider_meta={"fixture": digest})

    def _store_fixture(self, digest: str, req: JudgeRequest, resp: JudgeResponse) -> None:
        record = {
            "version": "1",
            "request": {
                "role_prompt": req.role_prompt,
                "user_prompt": req.user_prompt,
                "output_schema": req.output_schema,
            },
            "response": {"payload": resp.payload, "raw_text": resp.raw_text},
        }
        with self._write_lock:
            self.fixture_dir.mkdir(parents=True, exist_ok=True)
            tmp = self._fixture_path(digest).with_suffix(".tmp")
            tmp.write_text(canonical_json(record), "utf-8")
            tmp.replace(self._fixture_path(digest))

    def complete_structured(self, req: JudgeRequest) -> JudgeResponse:
        digest = fixture_key(req)
        if self.mode in ("replay", "record"):
            recorded = self._load_fixture(digest)
            if recorded is not None:
                return recorded
            if self.mode == "replay":
                raise FixtureMiss(digest)

        validator = jsonschema.Draft202012Validator(req.output_schema)
        attempt_req = req
        last_error = "no attempts made"
        while True:
            with self._semaphore:
                raw = self.backend.complete(attempt_req)
            try:
                payload = extract_json_object(raw)
                validator.validate(payload)
            except (ValueError, json.JSONDecodeError, jsonschema.ValidationError) as exc:
                last_error = str(exc)
                logger.debug("schema validation failed: %s", last_error)
                try:
                    attempt_req = with_repair(attempt_req, raw, last_error)
                except AttemptsExhausted:
                    raise SchemaViolation(
                        f"provider output failed validation after "
                        f"{req.max_attempts} attempts: {last_error}")
                continue
            resp = JudgeResponse(payload=payload, raw_text=raw)
            if self.mode == "record":
                self._store_fixture(digest, req, resp)
            return resp
