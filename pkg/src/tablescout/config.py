"""Engine configuration: YAML file, environment overrides, CLI overrides.

Precedence is CLI flags over ``TABLESCOUT_*`` environment variables over
the config file over defaults. Unknown keys are rejected so typos fail
loudly. Secrets (API keys) should come from the environment, never the
file.
"""

import os
from pathlib import Path
from typing import Literal, Mapping, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .errors import ConfigError

ENV_PREFIX = "TABLESCOUT_"


class EngineConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    corpus_root: str = "."
    index_path: str = "headers.idx"
    k: int = Field(default=5, ge=1)
    eta: float = Field(default=0.7, ge=0.0, le=1.0)
    tau: float = Field(default=0.6, ge=0.0, le=1.0)
    max_group_size: int = Field(default=4, ge=1)
    enumeration_cap: int = Field(default=1_000_000, ge=1)
    value_match_mode: Literal["substring", "cell"] = "substring"
    value_case_sensitive: bool = False
    max_batch: int = Field(default=16, ge=1)
    var_bound: float = Field(default=0.05, gt=0.0, le=1.0)
    parser_backend: Literal["offline", "remote"] = "offline"
    parser_endpoint: Optional[str] = None
    parser_model: Optional[str] = None
    encoder_backend: Literal["local", "remote"] = "local"
    encoder_endpoint: Optional[str] = None
    encoder_dim: int = Field(default=256, ge=8)
    qa_backend: Literal["offline", "remote"] = "offline"
    qa_endpoint: Optional[str] = None
    qa_model: Optional[str] = None
    qa_combined: bool = False
    api_key: Optional[str] = None


def load_config(path: Optional[Path] = None,
                overrides: Optional[Mapping[str, object]] = None,
                env: Optional[Mapping[str, str]] = None) -> EngineConfig:
    """Merge file, environment, and explicit overrides into a config."""
    merged: dict = {}
    if path is not None:
        try:
            raw = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if raw is None:
            raw = {}
        if not isinstance(raw, dict):
            raise ConfigError(f"config {path} must be a mapping at top level")
        merged.update(raw)
    environ = os.environ if env is None else env
    for name in EngineConfig.model_fields:
        env_value = environ.get(ENV_PREFIX + name.upper())
        if env_value is not None:
            merged[name] = env_value
    for key, value in (overrides or {}).items():
        if value is not None:
            merged[key] = value
    try:
        return EngineConfig(**merged)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc
