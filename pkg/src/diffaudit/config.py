"""Run configuration: one file fully determines a replay run."""
from dataclasses import dataclass, field, fields
import hashlib
import json
from pathlib import Path
import threading

import yaml

from .errors import ConfigurationError
from .genpair import DecodingConfig
from .llmclient import MODES, ROLES, FixtureStore, LLMClient, RoleConfig

CORE_ROLES = ("subject_m1", "subject_m2", "hypothesizer", "discriminator", "summarizer", "embedder")


def derive_seed(seed, *parts):
    """Stable 63-bit seed from the run seed and any entity identifiers."""
    h = hashlib.sha256(json.dumps([seed, *parts], separators=(",", ":")).encode("utf-8"))
    return int.from_bytes(h.digest()[:8], "little") >> 1


@dataclass
class DatasetConfig:
    name: str
    path: str = None
    parse: dict = field(default_factory=lambda: {"text": "text"})
    context_mode: str = "predefined"
    p: int = None
    bank_id: str = None

    def __post_init__(self):
        if self.context_mode not in ("predefined", "clustered"):
            raise ConfigurationError(f"unknown context mode {self.context_mode!r}")
        if self.context_mode == "clustered" and not self.p:
            raise ConfigurationError("clustered contexts need p")


@dataclass
class StageConfig:
    k: int = 20
    N: int = 80
    q: float = 0.05
    validation_fraction: float = 0.5
    diversify: bool = True
    N0: int = 10
    B: int = 10
    K: int = 5
    saffron_alpha: float = 0.05
    saffron_lambda: float = 0.5
    cross_budget: int = None
    k_range: tuple = (3, 4, 5, 6, 7, 8)
    eval_size: int = 200
    continuity: bool = True

    def __post_init__(self):
        if not 0.0 < self.q < 1.0:
            raise ConfigurationError(f"q must be in (0, 1), got {self.q}")
        if self.N < 2 or self.N % 2:
            raise ConfigurationError(f"N must be a positive even integer, got {self.N}")
        if self.cross_budget is not None and (self.cross_budget < 2 or self.cross_budget % 2):
            raise ConfigurationError("cross_budget must be a positive even integer")
        if self.k < 1:
            raise ConfigurationError("k must be positive")
        self.k_range = tuple(self.k_range)

    @property
    def M(self):
        return self.cross_budget or self.N


@dataclass
class RunConfig:
    run_id: str
    dataset: DatasetConfig
    roles: dict  # role -> RoleConfig
    intervention: str = ""
    seed: int = 0
    mode: str = "live"
    fixtures: str = None
    output_dir: str = "out"
    max_in_flight: int = 1
    decoding: DecodingConfig = field(default_factory=DecodingConfig)
    stages: StageConfig = field(default_factory=StageConfig)
    synthetic: dict = field(default_factory=dict)
    base_dir: str = "."

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigurationError(f"unknown mode {self.mode!r}")
        if self.mode in ("record", "replay") and not self.fixtures:
            raise ConfigurationError(f"{self.mode} mode needs a fixtures directory")
        if self.max_in_flight < 1:
            raise ConfigurationError("max_in_flight must be >= 1")

    def resolve(self, path):
        p = Path(path)
        return p if p.is_absolute() else Path(self.base_dir) / p

    @property
    def out(self):
        return self.resolve(self.output_dir)

    def prices(self):
        return {r: (c.price_in, c.price_out) for r, c in self.roles.items()
                if c.price_in is not None and c.price_out is not None}

    def require_roles(self, roles):
        missing = [r for r in roles if r not in self.roles]
        if missing:
            raise ConfigurationError(f"roles not bound: {', '.join(missing)}")


def _build(cls, d, where):
    d = dict(d or {})
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(d) - names)
    if unknown:
        raise ConfigurationError(f"{where}: unknown keys {unknown}")
    return cls(**d)


def config_from_dict(d, base_dir="."):
    d = dict(d)
    for key in ("run_id", "dataset", "roles"):
        if key not in d:
            raise ConfigurationError(f"config is missing {key!r}")
    try:
        roles = {}
        for role, rc in d.pop("roles").items():
            if role not in ROLES:
                raise ConfigurationError(f"unknown role {role!r}")
            roles[role] = RoleConfig.from_dict(role, rc)
        dataset = _build(DatasetConfig, d.pop("dataset"), "dataset")
        decoding = _build(DecodingConfig, d.pop("decoding", {}), "decoding")
        stages = _build(StageConfig, d.pop("stages", {}), "stages")
        return _build(RunConfig, {**d, "roles": roles, "dataset": dataset, "decoding": decoding,
                                  "stages": stages, "base_dir": str(base_dir)}, "config")
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from exc


def load_config(path, overrides=None):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    try:
        d = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (ValueError, yaml.YAMLError) as exc:
        raise ConfigurationError(f"cannot parse config {path}: {exc}") from exc
    if not isinstance(d, dict):
        raise ConfigurationError(f"config {path} is not a mapping")
    d.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return config_from_dict(d, base_dir=path.parent)


def build_clients(cfg, usage_log=None, roles=None, transports=None):
    """One LLMClient per bound role, sharing the fixture store and the in-flight cap."""
    store = FixtureStore(cfg.resolve(cfg.fixtures)) if cfg.fixtures else None
    sem = threading.BoundedSemaphore(cfg.max_in_flight)
    transports = transports or {}
    return {role: LLMClient(rc, cfg.mode, store, transports.get(role), usage_log, semaphore=sem)
            for role, rc in cfg.roles.items() if roles is None or role in roles}
