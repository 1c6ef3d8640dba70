"""Pipeline configuration (JSON file plus environment)."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

from .embedding import EmbeddingProviderConfig
from .errors import ConfigError
from .llm import LLMConfig

STRATEGIES = ("tot", "cot")
FIT_MODES = ("llm", "embedding")
OUTPUT_FORMATS = ("json", "markdown")


@dataclass(frozen=True)
class PipelineConfig:
    embedding: EmbeddingProviderConfig = field(default_factory=EmbeddingProviderConfig)
    llm: LLMConfig = field(default_factory=LLMConfig)
    mapping_path: str | None = None
    institutions_path: str | None = None
    fit_features_path: str | None = None
    templates_dir: str | None = None
    k: int = 3
    strategy: str = "tot"
    fit_mode: str = "llm"
    output_format: str = "json"
    parallel: bool = True
    summary: bool = False
    include_transcripts: bool = True

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"strategy must be one of {STRATEGIES}")
        if self.fit_mode not in FIT_MODES:
            raise ConfigError(f"fit_mode must be one of {FIT_MODES}")
        if self.output_format not in OUTPUT_FORMATS:
            raise ConfigError(f"output_format must be one of {OUTPUT_FORMATS}")
        for name in ("mapping_path", "institutions_path", "fit_features_path", "templates_dir"):
            p = getattr(self, name)
            if p is not None and not Path(p).exists():
                raise ConfigError(f"{name} does not exist: {p}")

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "PipelineConfig":
        data = dict(data)
        emb = data.pop("embedding", {}) or {}
        llm = data.pop("llm", {}) or {}
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(embedding=EmbeddingProviderConfig.from_env(**emb), llm=LLMConfig.from_env(**llm), **data)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path: str | Path | None = None) -> "PipelineConfig":
        if path is None:
            return cls.from_dict({})
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file does not exist: {path}")
        cfg = cls.from_dict(json.loads(path.read_text("utf-8")))
        # relative paths in a config file are relative to the file
        fixed = {}
        for name in ("mapping_path", "institutions_path", "fit_features_path", "templates_dir"):
            p = getattr(cfg, name)
            if p is not None and not Path(p).is_absolute():
                fixed[name] = str((path.parent / p).resolve())
        return replace(cfg, **fixed) if fixed else cfg

    def with_overrides(self, **kwargs) -> "PipelineConfig":
        return replace(self, **{k: v for k, v in kwargs.items() if v is not None})

    def public_dict(self) -> dict[str, Any]:
        return {
            "embedding": self.embedding.public_dict(),
            "llm": self.llm.public_dict(),
            "mapping_path": self.mapping_path,
            "institutions_path": self.institutions_path,
            "fit_features_path": self.fit_features_path,
            "templates_dir": self.templates_dir,
            "k": self.k,
            "strategy": self.strategy,
            "fit_mode": self.fit_mode,
            "output_format": self.output_format,
            "summary": self.summary,
        }

    def config_hash(self) -> str:
        blob = json.dumps(self.public_dict(), sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()[:16]
