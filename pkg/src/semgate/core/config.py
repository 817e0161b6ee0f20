"""Configuration loading and validation.

The config file is a YAML key-value tree (see README for the full key list).
Secrets never live in the file: endpoints carry the *name* of the
environment variable holding their credential. Validation errors name the
offending key path.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from ..errors import ConfigError
from .prompts import PromptSet, load_prompts
from .types import ModelEndpoint

GUARD_POLICIES = ("reject_with_explanation", "fallback_local_only")

_ROLE_BY_KEY = {
    "cloud": "cloud_cllm",
    "encoder": "local_encoder",
    "decoder": "local_decoder",
    "judge": "judge",
}


@dataclass(frozen=True)
class ListGenSettings:
    n_min: int = 3
    n_max: int = 10
    v_min: float = 0
    v_max: float = 1000
    seed: int | None = None
    decimals: int = 0


@dataclass(frozen=True)
class GatewaySettings:
    listen_addr: str = "127.0.0.1:8470"
    guard_failure_policy: str = "reject_with_explanation"
    guard_retries: int = 2
    transparency_enabled: bool = True
    admin_bypass_enabled: bool = False
    inspection_loopback_only: bool = True
    max_inflight_cloud: int = 32


@dataclass(frozen=True)
class MetricsSettings:
    # BERTScore needs an embedding endpoint; without one the column is
    # reported as absent rather than silently dropped.
    bertscore_endpoint: str | None = None


@dataclass(frozen=True)
class AppConfig:
    endpoints: dict[str, ModelEndpoint]
    prompts: PromptSet
    listgen: ListGenSettings = field(default_factory=ListGenSettings)
    gateway: GatewaySettings = field(default_factory=GatewaySettings)
    metrics: MetricsSettings = field(default_factory=MetricsSettings)
    store_path: str = "sessions.jsonl"
    lexicon_path: str | None = None

    def endpoint(self, key: str) -> ModelEndpoint:
        try:
            return self.endpoints[key]
        except KeyError:
            raise ConfigError(f"endpoints.{key}: not configured") from None


def _require(mapping: dict, key: str, path: str):
    if key not in mapping:
        raise ConfigError(f"{path}.{key}: missing required key")
    return mapping[key]


def _positive_int(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{path}: expected integer, got {value!r}")
    if value <= 0:
        raise ConfigError(f"{path}: must be positive, got {value}")
    return value


def _parse_endpoint(key: str, raw, path: str) -> ModelEndpoint:
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected a mapping")
    base_url = str(_require(raw, "base_url", path))
    role = "mock" if base_url.startswith("mock:") else _ROLE_BY_KEY.get(key, "mock")
    ep = ModelEndpoint(
        role=raw.get("role", role),
        base_url=base_url,
        model_name=str(raw.get("model_name", "")),
        api_key_env=str(raw.get("api_key_env", "")),
        timeout_ms=raw.get("timeout_ms", 30_000),
        max_retries=raw.get("max_retries", 2),
        requests_per_minute=raw.get("requests_per_minute", 600),
    )
    ep.validate(path)
    return ep


def parse_config(data: dict, base_dir: Path | None = None) -> AppConfig:
    if not isinstance(data, dict):
        raise ConfigError("config: top level must be a mapping")
    base_dir = base_dir or Path.cwd()

    endpoints_raw = _require(data, "endpoints", "config")
    if not isinstance(endpoints_raw, dict) or not endpoints_raw:
        raise ConfigError("endpoints: at least one endpoint must be configured")
    endpoints = {
        key: _parse_endpoint(key, raw, f"endpoints.{key}")
        for key, raw in endpoints_raw.items()
    }

    prompts_cfg = data.get("prompts") or {}
    prompts_path = prompts_cfg.get("path")
    if prompts_path is not None:
        prompts_path = Path(prompts_path)
        if not prompts_path.is_absolute():
            prompts_path = base_dir / prompts_path
    prompts = load_prompts(prompts_path)

    lg_raw = data.get("listgen") or {}
    listgen = ListGenSettings(
        n_min=lg_raw.get("n_min", 3),
        n_max=lg_raw.get("n_max", 10),
        v_min=lg_raw.get("v_min", 0),
        v_max=lg_raw.get("v_max", 1000),
        seed=lg_raw.get("seed"),
        decimals=lg_raw.get("decimals", 0),
    )
    if listgen.n_min < 1:
        raise ConfigError("listgen.n_min: must be >= 1")
    if listgen.n_min > listgen.n_max:
        raise ConfigError("listgen.n_min: must not exceed listgen.n_max")
    if listgen.v_min > listgen.v_max:
        raise ConfigError("listgen.v_min: must not exceed listgen.v_max")

    gw_raw = data.get("gateway") or {}
    gateway = GatewaySettings(
        listen_addr=str(gw_raw.get("listen_addr", "127.0.0.1:8470")),
        guard_failure_policy=gw_raw.get("guard_failure_policy", "reject_with_explanation"),
        guard_retries=gw_raw.get("guard_retries", 2),
        transparency_enabled=bool(gw_raw.get("transparency_enabled", True)),
        admin_bypass_enabled=bool(gw_raw.get("admin_bypass_enabled", False)),
        inspection_loopback_only=bool(gw_raw.get("inspection_loopback_only", True)),
        max_inflight_cloud=gw_raw.get("max_inflight_cloud", 32),
    )
    if gateway.guard_failure_policy not in GUARD_POLICIES:
        raise ConfigError(
            f"gateway.guard_failure_policy: expected one of {GUARD_POLICIES}, "
            f"got {gateway.guard_failure_policy!r}"
        )
    if gateway.guard_retries < 0:
        raise ConfigError("gateway.guard_retries: must be >= 0")
    _positive_int(gateway.max_inflight_cloud, "gateway.max_inflight_cloud")

    mt_raw = data.get("metrics") or {}
    metrics = MetricsSettings(bertscore_endpoint=mt_raw.get("bertscore_endpoint"))

    store_raw = data.get("store") or {}
    store_path = str(store_raw.get("path", "sessions.jsonl"))
    if not Path(store_path).is_absolute():
        store_path = str(base_dir / store_path)

    lexicon_path = data.get("guard", {}).get("lexicon_path") if data.get("guard") else None
    if lexicon_path is not None and not Path(lexicon_path).is_absolute():
        lexicon_path = str(base_dir / lexicon_path)

    return AppConfig(
        endpoints=endpoints,
        prompts=prompts,
        listgen=listgen,
        gateway=gateway,
        metrics=metrics,
        store_path=store_path,
        lexicon_path=lexicon_path,
    )


def load_config(path: str | Path) -> AppConfig:
    """Parse and validate a YAML config file into an immutable AppConfig."""
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        data = yaml.safe_load(p.read_text("utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {p}: not valid YAML: {exc}") from exc
    return parse_config(data or {}, base_dir=p.parent.resolve())
