"""One client for every model role, with live / record / replay execution.

Fixtures are content addressed: the key of a call is the SHA-256 of the role
name and the canonical JSON of the full request payload. In replay mode the
transport is never touched; a missing fixture is a hard error.

Fixture layout (stable)::

    <store>/<key[:2]>/<key>.json   {"call_key", "role", "request", "response", "usage", "timestamp"}
"""
from dataclasses import asdict, dataclass, field
import hashlib
import json
import logging
import math
import os
from pathlib import Path
import tempfile
import threading
import time

from .errors import ConfigurationError, InconsistencyError, ReplayMissError, TransportError

log = logging.getLogger(__name__)

ROLES = ("subject_m1", "subject_m2", "hypothesizer", "discriminator", "summarizer", "judge", "embedder")
MODES = ("live", "record", "replay")


@dataclass
class TokenUsage:
    input_tokens: int = 0
    output_tokens: int = 0
    estimated: bool = False

    def __add__(self, other):
        return TokenUsage(self.input_tokens + other.input_tokens,
                          self.output_tokens + other.output_tokens,
                          self.estimated or other.estimated)

    def to_dict(self):
        return {"input_tokens": self.input_tokens, "output_tokens": self.output_tokens,
                "estimated": self.estimated}

    @classmethod
    def from_dict(cls, d):
        return cls(int(d.get("input_tokens", 0)), int(d.get("output_tokens", 0)),
                   bool(d.get("estimated", False)))


@dataclass
class RoleConfig:
    role: str
    model: str
    endpoint: str = ""
    provider: str = "openai"
    decoding: dict = field(default_factory=dict)
    price_in: float = None
    price_out: float = None
    api_key_env: str = "OPENAI_API_KEY"
    mock: dict = None

    def __post_init__(self):
        if self.role not in ROLES:
            raise ConfigurationError(f"unknown role {self.role!r}")
        for name in ("price_in", "price_out"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ConfigurationError(f"{self.role}: {name} must be non-negative")

    @classmethod
    def from_dict(cls, role, d):
        d = dict(d)
        d.pop("role", None)
        return cls(role=role, **d)


@dataclass
class CallRecord:
    call_key: str
    role: str
    request: dict
    response: dict
    usage: TokenUsage
    timestamp: float = 0.0

    def to_json(self):
        d = asdict(self)
        d["usage"] = self.usage.to_dict()
        return json.dumps(d, sort_keys=True, ensure_ascii=False, indent=1) + "\n"

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        d["usage"] = TokenUsage.from_dict(d["usage"])
        return cls(**d)


@dataclass
class Completion:
    text: str
    usage: TokenUsage
    call_key: str


def canonical_json(payload):
    """Sorted keys, minimal separators; string contents are left untouched."""
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def call_key(role, payload):
    h = hashlib.sha256()
    h.update(role.encode("utf-8"))
    h.update(b"\x00")
    h.update(canonical_json(payload).encode("utf-8"))
    return h.hexdigest()


def estimate_tokens(text):
    """Provider-free fallback: one token per four UTF-8 bytes."""
    return math.ceil(len(text.encode("utf-8")) / 4)


class FixtureStore:
    def __init__(self, root):
        self.root = Path(root)
        self._lock = threading.Lock()

    def path_for(self, key):
        return self.root / key[:2] / f"{key}.json"

    def get(self, key):
        path = self.path_for(key)
        try:
            return CallRecord.from_json(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            return None

    def put(self, record):
        path = self.path_for(record.call_key)
        with self._lock:
            if path.exists():
                return
            path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write(record.to_json())
            os.replace(tmp, path)

    def __len__(self):
        return sum(1 for _ in self.root.glob("*/*.json")) if self.root.exists() else 0


class UsageLog:
    """Thread-safe per-call usage ledger, keyed by (stage, role)."""

    def __init__(self):
        self._rows = []
        self._lock = threading.Lock()

    def add(self, stage, role, key, usage):
        with self._lock:
            self._rows.append((stage, role, key, usage))

    def rows(self):
        with self._lock:
            return sorted(self._rows, key=lambda r: (r[0] or "", r[1], r[2]))

    def to_records(self):
        return [{"stage": s, "role": r, "call_key": k, **u.to_dict()} for s, r, k, u in self.rows()]


class HttpTransport:
    """OpenAI-compatible chat-completions and embeddings over HTTP."""

    def __init__(self, timeout=120.0, client=None):
        import httpx

        self._client = client or httpx.Client(timeout=timeout)

    def send(self, config, payload):
        import httpx

        body = {k: v for k, v in payload.items() if k not in ("kind", "meta")}
        key = os.environ.get(config.api_key_env, "")
        headers = {"Authorization": f"Bearer {key}"} if key else {}
        base = config.endpoint.rstrip("/")
        path = "/embeddings" if payload.get("kind") == "embedding" else "/chat/completions"
        try:
            resp = self._client.post(base + path, json=body, headers=headers)
            resp.raise_for_status()
            data = resp.json()
        except (httpx.HTTPError, ValueError) as exc:
            raise TransportError(f"{config.role}: {exc}") from exc
        usage = data.get("usage")
        if usage is not None:
            usage = TokenUsage(int(usage.get("prompt_tokens", 0)), int(usage.get("completion_tokens", 0)))
        if payload.get("kind") == "embedding":
            return {"embedding": data["data"][0]["embedding"]}, usage
        return {"text": data["choices"][0]["message"]["content"] or ""}, usage


def make_transport(config):
    if config.provider == "mock":
        from .harness import MockTransport

        return MockTransport.from_config(config)
    if config.provider in ("openai", "http"):
        if not config.endpoint:
            raise ConfigurationError(f"{config.role}: no endpoint configured")
        return HttpTransport()
    raise ConfigurationError(f"{config.role}: unknown provider {config.provider!r}")


class LLMClient:
    def __init__(self, config, mode="live", store=None, transport=None, usage_log=None,
                 max_attempts=3, backoff=0.5, sleep=time.sleep, semaphore=None, stage=None):
        if mode not in MODES:
            raise ConfigurationError(f"unknown mode {mode!r}")
        if mode in ("record", "replay") and store is None:
            raise ConfigurationError(f"{mode} mode needs a fixture store")
        self.config = config
        self.role = config.role
        self.mode = mode
        self.store = store
        self._transport = transport
        self.usage_log = usage_log
        self.max_attempts = max_attempts
        self.backoff = backoff
        self.sleep = sleep
        self.semaphore = semaphore
        self.stage = stage

    @property
    def transport(self):
        if self._transport is None:
            self._transport = make_transport(self.config)
        return self._transport

    def with_stage(self, stage):
        c = LLMClient(self.config, self.mode, self.store, self._transport, self.usage_log,
                      self.max_attempts, self.backoff, self.sleep, self.semaphore, stage)
        return c

    def _send_with_retries(self, payload):
        attempts = []
        for i in range(self.max_attempts):
            try:
                if self.semaphore is not None:
                    with self.semaphore:
                        return self.transport.send(self.config, payload)
                return self.transport.send(self.config, payload)
            except TransportError as exc:
                attempts.append(f"attempt {i + 1}: {exc}")
                log.warning("%s call failed (%s)", self.role, exc)
                if i + 1 < self.max_attempts:
                    self.sleep(self.backoff * 2 ** i)
        raise TransportError(f"{self.role}: {self.max_attempts} attempts failed", attempts)

    def request(self, payload):
        """Execute one call; returns (response dict, TokenUsage, call_key)."""
        key = call_key(self.role, payload)
        if self.mode == "replay":
            rec = self.store.get(key)
            if rec is None:
                raise ReplayMissError(key, self.role)
            response, usage = rec.response, rec.usage
        else:
            response, usage = self._send_with_retries(payload)
            if usage is None:
                usage = self._estimated_usage(payload, response)
            if self.mode == "record":
                self.store.put(CallRecord(key, self.role, payload, response, usage, time.time()))
        if self.usage_log is not None:
            self.usage_log.add(self.stage, self.role, key, usage)
        return response, usage, key

    @staticmethod
    def _estimated_usage(payload, response):
        if payload.get("kind") == "embedding":
            return TokenUsage(estimate_tokens(payload["input"]), 0, True)
        prompt = "".join(m["content"] for m in payload.get("messages", []))
        return TokenUsage(estimate_tokens(prompt), estimate_tokens(response.get("text", "")), True)

    def chat_payload(self, prompt, meta=None, **overrides):
        payload = {"kind": "chat", "model": self.config.model,
                   "messages": [{"role": "user", "content": prompt}]}
        payload.update(self.config.decoding)
        payload.update({k: v for k, v in overrides.items() if v is not None})
        if meta:
            payload["meta"] = dict(meta)
        return payload

    def complete(self, prompt, meta=None, **overrides):
        response, usage, key = self.request(self.chat_payload(prompt, meta, **overrides))
        return Completion(text=response["text"], usage=usage, call_key=key)

    def embed(self, text):
        payload = {"kind": "embedding", "model": self.config.model, "input": text}
        response, usage, _ = self.request(payload)
        vec = response.get("embedding")
        if not vec:
            raise InconsistencyError(f"{self.role}: empty embedding returned")
        return [float(v) for v in vec], usage


@dataclass
class CostEstimate:
    total: float
    by_role: dict


def estimate_cost(usage_by_role, prices):
    """Dollar cost from per-role usage and per-million-token (price_in, price_out)."""
    by_role = {}
    for role, usage in usage_by_role.items():
        if role not in prices or prices[role] is None or None in tuple(prices[role]):
            raise ConfigurationError(f"no price configured for role {role!r}")
        p_in, p_out = prices[role]
        by_role[role] = usage.input_tokens / 1e6 * p_in + usage.output_tokens / 1e6 * p_out
    return CostEstimate(total=sum(by_role.values()), by_role=by_role)


@dataclass
class UsageReport:
    by_role: dict
    by_stage: dict
    by_stage_role: dict
    total: TokenUsage
    n_calls: int
    n_hypotheses: int = 0
    cost: CostEstimate = None
    unpriced: tuple = ()

    def per_hypothesis(self):
        if not self.n_hypotheses:
            return {}
        return {role: (u.input_tokens / self.n_hypotheses, u.output_tokens / self.n_hypotheses)
                for role, u in self.by_role.items()}


def usage_report(records, n_hypotheses=0, prices=None):
    """Aggregate usage rows (dicts with stage, role, input_tokens, output_tokens).

    Cost covers the roles that have a price; the others are listed in ``unpriced``.
    """
    by_role, by_stage, by_pair = {}, {}, {}
    total = TokenUsage()
    n = 0
    for rec in records:
        u = TokenUsage.from_dict(rec)
        role, stage = rec["role"], rec.get("stage") or ""
        by_role[role] = by_role.get(role, TokenUsage()) + u
        by_stage[stage] = by_stage.get(stage, TokenUsage()) + u
        by_pair[(stage, role)] = by_pair.get((stage, role), TokenUsage()) + u
        total = total + u
        n += 1
    cost, unpriced = None, ()
    if prices is not None:
        priced = {r: u for r, u in by_role.items() if prices.get(r) is not None and None not in tuple(prices[r])}
        unpriced = tuple(sorted(set(by_role) - set(priced)))
        cost = estimate_cost(priced, prices)
    return UsageReport(by_role, by_stage, by_pair, total, n, n_hypotheses, cost, unpriced)
