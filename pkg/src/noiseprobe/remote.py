"""Generic HTTP vision-API client speaking the Google Cloud Vision REST shape.

The client is transport-only: it never decodes or alters the PNG bytes it is
handed, and all tests run against local stub servers.  Retries with
exponential backoff cover transport failures and HTTP 429/5xx; a process-wide
lock enforces the configured request rate across threads.
"""

from __future__ import annotations

import base64
import json
import os
import threading
import time
from dataclasses import dataclass, field

import requests

from .image import Image
from .oracle import Annotation
from .png import encode_png

_FEATURE_TYPES = {
    "labels": "LABEL_DETECTION",
    "faces": "FACE_DETECTION",
    "text": "TEXT_DETECTION",
}
# canonical wire order, independent of how the caller spelled the set
_FEATURE_ORDER = ("labels", "faces", "text")

DEFAULT_API_KEY_ENV = "VISION_API_KEY"


class OracleError(Exception):
    """Base class for remote-oracle failures."""


class MissingCredentialsError(OracleError):
    """The configured API-key environment variable is not set."""


class TransportError(OracleError):
    """Network-level failure that persisted through all retry attempts."""


class HttpStatusError(OracleError):
    def __init__(self, status: int, body: str = ""):
        super().__init__(f"HTTP {status}: {body[:200]}")
        self.status = status


class ParseError(OracleError):
    """Response body does not match the expected schema."""


@dataclass(frozen=True)
class RemoteOracleConfig:
    endpoint: str
    api_key_env: str = DEFAULT_API_KEY_ENV
    features: tuple[str, ...] = ("labels",)
    max_results: int = 10
    timeout: float = 30.0
    max_attempts: int = 3
    backoff_base: float = 0.5
    max_requests_per_second: float = 10.0

    def __post_init__(self) -> None:
        if self.max_results < 1:
            raise ValueError("max_results must be >= 1")
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        if self.max_requests_per_second <= 0:
            raise ValueError("max_requests_per_second must be > 0")
        feats = tuple(f for f in _FEATURE_ORDER if f in set(self.features))
        unknown = set(self.features) - set(_FEATURE_ORDER)
        if unknown:
            raise ValueError(f"unknown features: {sorted(unknown)}")
        if not feats:
            raise ValueError("at least one feature must be requested")
        object.__setattr__(self, "features", feats)

    @classmethod
    def from_json(cls, text: str) -> "RemoteOracleConfig":
        doc = json.loads(text)
        if "features" in doc:
            doc["features"] = tuple(doc["features"])
        return cls(**doc)


class _RateLimiter:
    """Serializes request starts to at most one per 1/rps seconds."""

    def __init__(self, rps: float):
        self._interval = 1.0 / rps
        self._lock = threading.Lock()
        self._next = 0.0

    def acquire(self) -> None:
        with self._lock:
            now = time.monotonic()
            scheduled = max(self._next, now)
            self._next = scheduled + self._interval
        delay = scheduled - now
        if delay > 0:
            time.sleep(delay)


def build_request_body(
    image_bytes: bytes, features: tuple[str, ...], max_results: int
) -> bytes:
    """The documented request JSON, compact separators, base64 payload."""
    body = {
        "requests": [
            {
                "image": {"content": base64.b64encode(image_bytes).decode("ascii")},
                "features": [
                    {"type": _FEATURE_TYPES[f], "maxResults": max_results}
                    for f in features
                ],
            }
        ]
    }
    return json.dumps(body, separators=(",", ":")).encode("utf-8")


def parse_response(doc: dict, features: tuple[str, ...]) -> Annotation:
    try:
        responses = doc["responses"]
        first = responses[0]
    except (KeyError, IndexError, TypeError) as exc:
        raise ParseError(f"missing responses[0]: {exc}") from exc
    if "error" in first:
        raise ParseError(f"response carries error object: {first['error']}")
    try:
        raw = first.get("labelAnnotations", [])
        pairs: list[tuple[str, float]] = []
        seen = set()
        for entry in raw:
            text = str(entry["description"])
            score = float(entry.get("score", 0.0))
            if text.lower() in seen:
                continue  # keep the first (highest ranked) occurrence
            seen.add(text.lower())
            pairs.append((text, score))
        face_count = None
        if "faces" in features:
            face_count = len(first.get("faceAnnotations", []))
        text_blocks = None
        if "text" in features:
            text_blocks = tuple(
                str(t["description"]) for t in first.get("textAnnotations", [])
            )
        return Annotation(
            labels=tuple(pairs), face_count=face_count, text_blocks=text_blocks
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed annotation payload: {exc}") from exc


@dataclass
class RemoteOracle:
    """Blocking client for a remote annotation endpoint.

    Safe for concurrent use: the rate limiter and retry logic are internal,
    callers just see annotate() block until a result or a typed error.
    """

    config: RemoteOracleConfig
    _limiter: _RateLimiter = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self._limiter = _RateLimiter(self.config.max_requests_per_second)
        self.identity = f"remote:{self.config.endpoint}"

    def annotate(self, img: Image) -> Annotation:
        return self.annotate_bytes(encode_png(img))

    def annotate_bytes(self, image_bytes: bytes) -> Annotation:
        cfg = self.config
        key = os.environ.get(cfg.api_key_env)
        if not key:
            raise MissingCredentialsError(
                f"environment variable {cfg.api_key_env} is not set"
            )
        body = build_request_body(image_bytes, cfg.features, cfg.max_results)
        url = f"{cfg.endpoint}?key={key}"
        last_exc: OracleError | None = None
        for attempt in range(1, cfg.max_attempts + 1):
            self._limiter.acquire()
            try:
                resp = requests.post(
                    url,
                    data=body,
                    headers={"Content-Type": "application/json"},
                    timeout=cfg.timeout,
                )
            except requests.RequestException as exc:
                last_exc = TransportError(str(exc))
            else:
                if resp.status_code == 429 or resp.status_code >= 500:
                    last_exc = HttpStatusError(resp.status_code, resp.text)
                elif resp.status_code != 200:
                    raise HttpStatusError(resp.status_code, resp.text)
                else:
                    try:
                        doc = resp.json()
                    except ValueError as exc:
                        raise ParseError(f"body is not JSON: {exc}") from exc
                    return parse_response(doc, cfg.features)
            if attempt < cfg.max_attempts:
                time.sleep(cfg.backoff_base * (2.0 ** (attempt - 1)))
        assert last_exc is not None
        raise last_exc
