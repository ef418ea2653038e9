"""Language-model oracle: answer parsing, soft labels, backends and cache.

Wire format (remote backend), an OpenAI-compatible chat completion::

    POST <endpoint>
    Authorization: Bearer $<api_key_env>
    {"model": <model>, "messages": [{"role": "user", "content": <prompt>}],
     "temperature": 0}

The answer text is ``choices[0].message.content`` of the response.

Cache file: JSON lines ``{"node": int, "prompt_sha256": hex, "logits": [int],
"model": str}``; the last record for a (node, prompt_sha256) key wins.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import random
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import requests

log = logging.getLogger(__name__)

RETRYABLE_STATUS = {429, 500, 502, 503, 504}
_LIST_RE = re.compile(r"\[([^\[\]]*)\]")


class OracleError(RuntimeError):
    pass


class ParseError(OracleError):
    pass


@dataclass
class OracleConfig:
    backend: str = "mock"  # mock | remote
    endpoint: Optional[str] = None
    model: str = "mock"
    api_key_env: Optional[str] = None
    timeout: float = 60.0
    max_retries: int = 3
    cache_path: Optional[str] = None
    mock_noise: float = 0.1
    max_in_flight: int = 4
    backoff_base: float = 1.0

    def validate(self) -> None:
        if self.backend not in ("mock", "remote"):
            raise OracleError(f"unknown oracle backend {self.backend!r}")
        if self.backend == "remote" and (not self.endpoint or not self.api_key_env):
            raise OracleError("remote backend needs an endpoint and an API-key environment variable")
        if not 0.0 <= self.mock_noise <= 1.0:
            raise OracleError(f"mock noise must lie in [0, 1], got {self.mock_noise}")
        if self.max_retries < 0 or self.max_in_flight < 1:
            raise OracleError("max_retries must be >= 0 and max_in_flight >= 1")


def extract_logits(answer: str, c: int) -> tuple:
    """First bracketed integer list of length c in the answer, clamped to [0, 9]."""
    for match in _LIST_RE.finditer(answer):
        items = [x.strip() for x in match.group(1).split(",")]
        if len(items) != c:
            continue
        try:
            values = [int(x) for x in items]
        except ValueError:
            continue
        return tuple(min(9, max(0, v)) for v in values)
    raise ParseError(f"no list of {c} integers in answer: {answer[:200]!r}")


def to_soft_label(z: Sequence[float]) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    e = np.exp(z - z.max())
    return e / e.sum()


def mock_infer(node: int, label: Optional[int], p: float, c: int) -> np.ndarray:
    """Deterministic noisy one-hot: (1 - p) * onehot(label) + p * uniform."""
    if label is None or not 0 <= int(label) < c:
        raise OracleError(f"mock oracle needs a valid label for node {node}")
    y = np.full(c, p / c)
    y[int(label)] += 1.0 - p
    return y


def prompt_hash(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


class LogitCache:
    """Append-only JSON-lines cache keyed by (node, prompt sha256)."""

    def __init__(self, path=None):
        self.path = Path(path) if path else None
        self._data: dict = {}
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            with open(self.path) as fh:
                for line in fh:
                    try:
                        rec = json.loads(line)
                    except json.JSONDecodeError:
                        # torn final line from an interrupted run
                        continue
                    self._data[(int(rec["node"]), rec["prompt_sha256"])] = tuple(rec["logits"])

    def __len__(self):
        return len(self._data)

    def get(self, node: int, digest: str):
        with self._lock:
            return self._data.get((node, digest))

    def put(self, node: int, digest: str, logits, model: str) -> None:
        logits = tuple(int(x) for x in logits)
        with self._lock:
            self._data[(node, digest)] = logits
            if self.path is not None:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                rec = {"node": node, "prompt_sha256": digest, "logits": list(logits), "model": model}
                with open(self.path, "a") as fh:
                    fh.write(json.dumps(rec) + "\n")
                    fh.flush()


class MockBackend:
    """Answers like a chat model would, from ground-truth labels."""

    def __init__(self, labels, p: float, c: int):
        self.labels = labels
        self.p = p
        self.c = c

    def complete(self, prompt: str, node: int) -> str:
        label = None if self.labels is None else int(self.labels[node])
        y = mock_infer(node, label, self.p, self.c)
        digits = [int(round(9 * v)) for v in y]
        return "The probabilities of paper 1 belonging to each category are: [" + ", ".join(map(str, digits)) + "]."


class RemoteBackend:
    def __init__(self, cfg: OracleConfig, session: Optional[requests.Session] = None):
        self.cfg = cfg
        self.session = session or requests.Session()

    def complete(self, prompt: str, node: int) -> str:
        cfg = self.cfg
        token = os.environ.get(cfg.api_key_env or "", "")
        if not token:
            raise OracleError(f"environment variable {cfg.api_key_env} is not set")
        payload = {
            "model": cfg.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": 0,
        }
        headers = {"Authorization": f"Bearer {token}", "Content-Type": "application/json"}
        last = None
        for attempt in range(cfg.max_retries + 1):
            try:
                resp = self.session.post(cfg.endpoint, json=payload, headers=headers, timeout=cfg.timeout)
            except requests.RequestException as exc:
                last = f"{type(exc).__name__}: {exc}"
            else:
                if resp.status_code == 200:
                    try:
                        return resp.json()["choices"][0]["message"]["content"]
                    except (ValueError, KeyError, IndexError, TypeError) as exc:
                        raise OracleError(f"malformed completion response: {exc}") from None
                last = f"HTTP {resp.status_code}: {resp.text[:200]}"
                if resp.status_code not in RETRYABLE_STATUS:
                    break
            if attempt < cfg.max_retries:
                time.sleep(random.uniform(0, min(cfg.backoff_base * 2 ** attempt, 30)))
        raise OracleError(f"completion request for node {node} failed: {last}")


class Oracle:
    def __init__(self, cfg: OracleConfig, c: int, labels=None, backend=None):
        cfg.validate()
        self.cfg = cfg
        self.c = c
        self.cache = LogitCache(cfg.cache_path)
        if backend is None:
            backend = MockBackend(labels, cfg.mock_noise, c) if cfg.backend == "mock" else RemoteBackend(cfg)
        self.backend = backend
        self.calls = 0
        self.cache_hits = 0
        self.parse_fallbacks = 0
        self._lock = threading.Lock()

    def _count(self, attr):
        with self._lock:
            setattr(self, attr, getattr(self, attr) + 1)

    def infer(self, prompt: str, node: int) -> tuple:
        if not prompt:
            raise OracleError("empty prompt")
        digest = prompt_hash(prompt)
        hit = self.cache.get(node, digest)
        if hit is not None:
            self._count("cache_hits")
            return hit
        for attempt in range(self.cfg.max_retries + 1):
            self._count("calls")
            answer = self.backend.complete(prompt, node)
            try:
                logits = extract_logits(answer, self.c)
            except ParseError as exc:
                log.warning("node %d: unparseable answer (attempt %d): %s", node, attempt + 1, exc)
                continue
            self.cache.put(node, digest, logits, self.cfg.model)
            return logits
        # fallbacks are not cached so a later run can retry the node
        self._count("parse_fallbacks")
        log.warning("node %d: falling back to uniform logits", node)
        return (0,) * self.c

    def infer_many(self, items) -> dict:
        """items: iterable of (node, prompt); returns {node: logits}."""
        items = list(items)
        if self.cfg.backend == "mock" or self.cfg.max_in_flight == 1:
            return {node: self.infer(prompt, node) for node, prompt in items}
        with ThreadPoolExecutor(self.cfg.max_in_flight) as pool:
            futures = {node: pool.submit(self.infer, prompt, node) for node, prompt in items}
            return {node: f.result() for node, f in futures.items()}
