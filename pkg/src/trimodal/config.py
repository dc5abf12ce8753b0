"""Declarative pipeline configuration (one JSON file)."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

from trimodal.encoders import BUILTIN_TEST_ENDPOINT, EncoderProfile
from trimodal.fusion import FusionConfig
from trimodal.lexical import DEFAULT_MAX_TERMS
from trimodal.rerank import DEFAULT_CANDIDATE_CAP, DEFAULT_SNIPPET_CHARS, ModalityWeights

RERANK_MODES = ("none", "weights", "listwise")
MOCK_LLM_URL = "mock"


class ConfigError(ValueError):
    pass


@dataclass
class EncoderSettings:
    name: str = "test-64"
    dim: int = 64
    endpoint: str = BUILTIN_TEST_ENDPOINT
    batch_size: int = 32
    max_in_flight: int = 4
    timeout: float = 30.0
    retries: int = 3
    backoff: float = 0.5


@dataclass
class FusionSettings:
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0
    max_terms: int = DEFAULT_MAX_TERMS


@dataclass
class LLMSettings:
    base_url: str = MOCK_LLM_URL
    model: str = "gpt-4o"
    timeout: float = 60.0
    retries: int = 2
    backoff: float = 1.0
    max_in_flight: int = 4
    mock: dict[str, Any] = field(default_factory=dict)


@dataclass
class RerankSettings:
    mode: str = "none"
    candidates: int = DEFAULT_CANDIDATE_CAP
    snippet_chars: int = DEFAULT_SNIPPET_CHARS
    static_weights: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3)
    llm: LLMSettings = field(default_factory=LLMSettings)


@dataclass
class PipelineConfig:
    dataset_dir: Path
    dataset_name: str = ""
    split: str = "test"
    entity_sidecar: Path | None = None
    queries: str = "all"
    system: str = ""
    encoder: EncoderSettings = field(default_factory=EncoderSettings)
    fusion: FusionSettings = field(default_factory=FusionSettings)
    rerank: RerankSettings = field(default_factory=RerankSettings)
    cutoffs: tuple[int, ...] = (1, 3, 5, 10)
    k: int = 100
    output_dir: Path = Path("out")
    seed: int = 0
    index_dir: Path | None = None  # defaults to output_dir

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        if not self.cutoffs or any(c < 1 for c in self.cutoffs):
            raise ConfigError("cutoffs must be a non-empty list of positive integers")
        self.cutoffs = tuple(sorted(set(self.cutoffs)))
        if self.k < max(self.cutoffs):
            raise ConfigError(f"k={self.k} must be >= the largest cutoff {max(self.cutoffs)}")
        if self.rerank.mode not in RERANK_MODES:
            raise ConfigError(f"rerank mode must be one of {RERANK_MODES}, got {self.rerank.mode!r}")
        if not 1 <= self.rerank.candidates <= self.k:
            raise ConfigError("rerank candidates must lie in [1, k]")
        if self.queries not in ("all", "judged"):
            raise ConfigError("queries must be 'all' or 'judged'")
        try:
            self.fusion_config
            self.profile
            self.static_weights
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if self.fusion.max_terms < 1:
            raise ConfigError("fusion.max_terms must be >= 1")

    @property
    def profile(self) -> EncoderProfile:
        e = self.encoder
        return EncoderProfile(e.name, e.dim, e.endpoint, self.seed)

    @property
    def fusion_config(self) -> FusionConfig:
        f = self.fusion
        return FusionConfig(f.alpha, f.beta, f.gamma)

    @property
    def static_weights(self) -> ModalityWeights:
        return ModalityWeights.from_raw(*self.rerank.static_weights)

    @property
    def label(self) -> str:
        return self.system or self.encoder.name

    @property
    def name(self) -> str:
        return self.dataset_name or self.dataset_dir.name

    # output locations
    @property
    def index_path(self) -> Path:
        return (self.index_dir or self.output_dir) / "index.tmx"

    @property
    def build_report_path(self) -> Path:
        return (self.index_dir or self.output_dir) / "build_report.json"

    def run_path(self, pre: bool = False) -> Path:
        return self.output_dir / ("run_pre.tsv" if pre else "run.tsv")

    def report_path(self, pre: bool = False) -> Path:
        return self.output_dir / ("report_pre.json" if pre else "report.json")

    @property
    def tables_path(self) -> Path:
        return self.output_dir / "report.txt"

    def index_hash(self) -> str:
        """Hash of every setting that shapes the index file."""
        payload = {
            "dataset": self.name,
            "encoder": [self.encoder.name, self.encoder.dim, self.encoder.endpoint],
            "fusion": asdict(self.fusion),
            "entity_sidecar": self.entity_sidecar.name if self.entity_sidecar else None,
            "seed": self.seed,
        }
        blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def with_overrides(self, **changes: Any) -> PipelineConfig:
        rerank_mode = changes.pop("rerank_mode", None)
        cfg = replace(self, **{k: v for k, v in changes.items() if v is not None})
        if rerank_mode is not None:
            cfg = replace(cfg, rerank=replace(cfg.rerank, mode=rerank_mode))
        return cfg


def _section(cls, data: Mapping[str, Any] | None, where: str):
    data = dict(data or {})
    known = set(cls.__dataclass_fields__)
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {unknown}")
    return cls(**data)


def config_from_dict(data: Mapping[str, Any], base_dir: Path = Path(".")) -> PipelineConfig:
    data = dict(data)
    dataset = dict(data.pop("dataset", {}))
    if "dir" not in dataset:
        raise ConfigError("dataset.dir is required")

    def resolve(p: str | None) -> Path | None:
        if p is None:
            return None
        path = Path(p).expanduser()
        return path if path.is_absolute() else base_dir / path

    unknown_ds = sorted(set(dataset) - {"dir", "name", "split", "entity_sidecar", "queries"})
    if unknown_ds:
        raise ConfigError(f"unknown key(s) in dataset: {unknown_ds}")
    rerank = dict(data.pop("rerank", {}))
    llm = _section(LLMSettings, rerank.pop("llm", None), "rerank.llm")
    if "static_weights" in rerank:
        rerank["static_weights"] = tuple(rerank["static_weights"])
    rerank_settings = _section(RerankSettings, rerank, "rerank")
    rerank_settings.llm = llm
    output = dict(data.pop("output", {}))
    known_top = {"encoder", "fusion", "cutoffs", "k", "seed", "system"}
    unknown = sorted(set(data) - known_top)
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {unknown}")
    try:
        return PipelineConfig(
            dataset_dir=resolve(dataset["dir"]),
            dataset_name=dataset.get("name", ""),
            split=dataset.get("split", "test"),
            entity_sidecar=resolve(dataset.get("entity_sidecar")),
            queries=dataset.get("queries", "all"),
            system=data.get("system", ""),
            encoder=_section(EncoderSettings, data.get("encoder"), "encoder"),
            fusion=_section(FusionSettings, data.get("fusion"), "fusion"),
            rerank=rerank_settings,
            cutoffs=tuple(data.get("cutoffs", (1, 3, 5, 10))),
            k=int(data.get("k", 100)),
            output_dir=resolve(output.get("dir", "out")),
            seed=int(data.get("seed", 0)),
        )
    except TypeError as exc:
        raise ConfigError(f"bad configuration value: {exc}") from exc


def load_config(path: str | Path) -> PipelineConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return config_from_dict(data, path.parent)
