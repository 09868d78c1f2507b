"""Uniform client over chat-completion and embedding endpoints.

Offline stub models make the whole pipeline testable without a server:

  * ``echo-<p>``   -- always answers the literal probability ``<p>``
  * ``refuse``     -- always answers "I do not know"
  * ``noise-<s>``  -- a valid pseudo-random float, keyed by (seed, prompt)
  * ``garbage``    -- prose with no usable number
  * ``hash-embed-<dim>`` -- deterministic pseudo-embeddings of dimension dim

Wire format for real endpoints follows the de-facto open chat-completions
JSON shape (``messages`` array in, ``choices[0].message.content`` out) and
embeddings shape (``data[i].embedding``); see README for request examples.
"""
from __future__ import annotations

import hashlib
import os
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import requests

from .errors import (
    AuthFailure,
    DimensionMismatch,
    EmptyInput,
    EndpointUnreachable,
    InvariantViolation,
    RateLimited,
)

STUB_BASE_URL = "stub"


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str = STUB_BASE_URL
    model_name: str = "echo-0.5"
    api_key_env: str = "EHRBENCH_API_KEY"
    temperature: float = 0.1
    top_k: int = 50
    max_new_tokens: int = 20
    timeout: float = 30.0
    max_retries: int = 3
    max_in_flight: int = 4
    backoff_base: float = 0.5

    def __post_init__(self):
        if self.max_in_flight < 1:
            raise InvariantViolation("max_in_flight must be >= 1")
        if self.temperature < 0:
            raise InvariantViolation("temperature must be >= 0")

    @property
    def is_stub(self):
        return self.base_url == STUB_BASE_URL

    @property
    def api_key(self):
        return os.environ.get(self.api_key_env, "")


@dataclass(frozen=True)
class PredictionOutcome:
    sample_id: str
    status: str  # "decoded" | "fallback_unknown" | "missing"
    probability: float | None
    raw_text: str

    def __post_init__(self):
        if self.status == "decoded":
            if self.probability is None or not 0.0 <= self.probability <= 1.0:
                raise InvariantViolation(
                    f"decoded probability {self.probability!r} outside [0, 1]"
                )
        elif self.status == "fallback_unknown":
            if self.probability != 0.5:
                raise InvariantViolation("fallback probability must be exactly 0.5")
        elif self.status == "missing":
            if self.probability is not None:
                raise InvariantViolation("missing outcome carries no probability")
        else:
            raise InvariantViolation(f"unknown status {self.status!r}")


@dataclass(frozen=True)
class MissingRateReport:
    n_test: int
    n_decoded: int

    def __post_init__(self):
        if self.n_decoded > self.n_test:
            raise InvariantViolation("n_decoded cannot exceed n_test")

    @property
    def missing_rate_percent(self):
        return (self.n_test - self.n_decoded) / self.n_test * 100.0


def _stub_complete(prompt_text, model_name):
    if model_name.startswith("echo-"):
        return model_name[len("echo-"):]
    if model_name == "refuse":
        return "I do not know"
    if model_name == "garbage":
        return "The patient shows several risk factors but no conclusion follows."
    if model_name.startswith("noise-"):
        seed = model_name[len("noise-"):]
        digest = hashlib.sha256(
            seed.encode("utf-8") + b"\x00" + prompt_text.encode("utf-8")
        ).digest()
        p = int.from_bytes(digest[:8], "big") / 2**64
        return f"{p:.4f}"
    raise InvariantViolation(f"unknown stub model {model_name!r}")


def _post_with_retries(url, payload, cfg, sample_id=None):
    headers = {"Content-Type": "application/json"}
    if cfg.api_key:
        headers["Authorization"] = f"Bearer {cfg.api_key}"
    last_error = None
    for attempt in range(cfg.max_retries + 1):
        try:
            resp = requests.post(url, json=payload, headers=headers,
                                 timeout=cfg.timeout)
        except requests.RequestException as exc:
            last_error = EndpointUnreachable(str(exc), sample_id=sample_id)
        else:
            if resp.status_code in (401, 403):
                raise AuthFailure(f"HTTP {resp.status_code}", sample_id=sample_id)
            if resp.status_code == 429:
                last_error = RateLimited("HTTP 429", sample_id=sample_id)
            elif resp.status_code >= 500:
                last_error = EndpointUnreachable(
                    f"HTTP {resp.status_code}", sample_id=sample_id
                )
            else:
                resp.raise_for_status()
                return resp.json()
        if attempt < cfg.max_retries:
            time.sleep(cfg.backoff_base * 2**attempt)
    raise last_error


def complete(prompt, cfg, sample_id=None):
    """One chat completion; returns the raw response text."""
    text = prompt.text if hasattr(prompt, "text") else str(prompt)
    if cfg.is_stub:
        return _stub_complete(text, cfg.model_name)
    payload = {
        "model": cfg.model_name,
        "messages": [{"role": "user", "content": text}],
        "temperature": cfg.temperature,
        "top_k": cfg.top_k,
        "max_tokens": cfg.max_new_tokens,
    }
    body = _post_with_retries(
        cfg.base_url.rstrip("/") + "/chat/completions", payload, cfg,
        sample_id=sample_id,
    )
    return body["choices"][0]["message"]["content"]


def complete_batch(prompts_by_id, cfg):
    """Run up to cfg.max_in_flight completions concurrently.

    Returns {sample_id: raw_text or GatewayError}; results are keyed, so the
    outcome set is independent of request order.
    """
    def run(item):
        sid, prompt = item
        try:
            return sid, complete(prompt, cfg, sample_id=sid)
        except Exception as exc:  # noqa: BLE001 - surfaced per-sample
            return sid, exc

    with ThreadPoolExecutor(max_workers=cfg.max_in_flight) as pool:
        return dict(pool.map(run, prompts_by_id.items()))


def _stub_embed(texts, model_name):
    dim = int(model_name[len("hash-embed-"):])
    rows = []
    for text in texts:
        digest = hashlib.sha256(text.encode("utf-8")).digest()
        # expand deterministically to dim floats in [-1, 1]
        vals = []
        counter = 0
        while len(vals) < dim:
            block = hashlib.sha256(digest + counter.to_bytes(4, "big")).digest()
            for i in range(0, len(block) - 7, 8):
                vals.append(int.from_bytes(block[i:i + 8], "big") / 2**63 - 1.0)
            counter += 1
        rows.append(vals[:dim])
    return np.asarray(rows, dtype=float)


def embed(texts, cfg):
    """Embed texts; one row per input, row order = input order."""
    if not texts:
        raise EmptyInput("no texts to embed")
    if cfg.is_stub:
        if not cfg.model_name.startswith("hash-embed-"):
            raise InvariantViolation(
                f"stub embedder must be hash-embed-<dim>, got {cfg.model_name!r}"
            )
        return _stub_embed(texts, cfg.model_name)
    payload = {"model": cfg.model_name, "input": list(texts)}
    body = _post_with_retries(
        cfg.base_url.rstrip("/") + "/embeddings", payload, cfg
    )
    vectors = [item["embedding"] for item in body["data"]]
    dims = {len(v) for v in vectors}
    if len(dims) != 1:
        raise DimensionMismatch(f"ragged embedding dims {sorted(dims)}")
    return np.asarray(vectors, dtype=float)


_REFUSAL = re.compile(r"i\s+do\s+not\s+know", re.IGNORECASE)
_NUMBER = re.compile(r"(-?)(\d+(?:\.\d+)?|\.\d+)\s*(%?)")


def decode_probability(raw_text, sample_id=""):
    """Decode a free-text response into a PredictionOutcome.

    Refusals ("I do not know") map to the 0.5 fallback. Otherwise the first
    numeric literal whose value lies in [0, 1] wins; "NN%" counts as NN/100.
    Out-of-range numbers are skipped, so "85" alone decodes to nothing.
    """
    if _REFUSAL.search(raw_text):
        return PredictionOutcome(sample_id, "fallback_unknown", 0.5, raw_text)
    for match in _NUMBER.finditer(raw_text):
        if match.group(1):
            continue  # negative numbers are never valid probabilities
        value = float(match.group(2))
        if match.group(3):
            value /= 100.0
        if 0.0 <= value <= 1.0:
            return PredictionOutcome(sample_id, "decoded", value, raw_text)
    return PredictionOutcome(sample_id, "missing", None, raw_text)


def missing_rate(outcomes, count_unknown_as_missing=False):
    """Missing-rate report over decoded outcomes.

    Refusal fallbacks yield a usable 0.5, so by default they count as
    decoded; flip count_unknown_as_missing to treat them as missing.
    """
    if not outcomes:
        raise EmptyInput("no outcomes")
    decoded_statuses = {"decoded"}
    if not count_unknown_as_missing:
        decoded_statuses.add("fallback_unknown")
    n_decoded = sum(1 for o in outcomes if o.status in decoded_statuses)
    return MissingRateReport(n_test=len(outcomes), n_decoded=n_decoded)
