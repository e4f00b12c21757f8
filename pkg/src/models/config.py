"""
Pydantic models for run configuration

A run is configured by one JSON file. Relative data paths resolve against
the directory of that file.
"""

import hashlib
import json
from datetime import date
from pathlib import Path
from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

try:
    from ..agent import RiskPreference, TradeSizing, TraderCharacter
    from ..errors import ConfigError
    from ..memory_engine import DEFAULT_LAYER_PARAMS, LayerKind, LayerParams, validate_layer_params
except ImportError:
    from agent import RiskPreference, TradeSizing, TraderCharacter
    from errors import ConfigError
    from memory_engine import DEFAULT_LAYER_PARAMS, LayerKind, LayerParams, validate_layer_params

DEFAULT_API_KEY_ENV = "TRADMEM_LLM_API_KEY"


class PhaseSpan(BaseModel):
    """Inclusive date span of one phase"""
    start: date = Field(..., description="First calendar day")
    end: date = Field(..., description="Last calendar day")

    @model_validator(mode="after")
    def _ordered(self) -> "PhaseSpan":
        if self.start > self.end:
            raise ValueError(f"span start {self.start} is after end {self.end}")
        return self


class AgentSpec(BaseModel):
    """One trader on the desk"""
    agent_id: str = Field(..., min_length=1, pattern=r"^[A-Za-z0-9_-]+$", description="Unique agent id")
    risk: RiskPreference = Field(..., description="Seeking, Neutral or Averse")
    sectors: List[str] = Field(..., min_length=1, description="Sector tags in scope")
    initial_cash: float = Field(100_000.0, ge=0, description="Starting cash")

    def to_character(self) -> TraderCharacter:
        return TraderCharacter(self.agent_id, self.risk, frozenset(self.sectors))


class LayerParamsConfig(BaseModel):
    """Constants of one memory layer"""
    stability_days: float = Field(..., gt=0)
    importance_const: float = Field(..., ge=0, le=1)
    weight_recency: float = Field(..., ge=0, le=1)
    weight_relevancy: float = Field(..., ge=0, le=1)
    weight_importance: float = Field(..., ge=0, le=1)
    promotion_threshold: float = Field(..., gt=0)
    purge_threshold: float = Field(20.0, ge=0)

    def to_params(self) -> LayerParams:
        return LayerParams(**self.model_dump())


def _default_layers() -> Dict[LayerKind, LayerParamsConfig]:
    return {layer: LayerParamsConfig(**params.to_dict()) for layer, params in DEFAULT_LAYER_PARAMS.items()}


class SizingConfig(BaseModel):
    """Trade values of the non-Hold actions and the add-counter trigger"""
    sig_buy_fraction: float = Field(0.25, gt=0, le=1, description="Cash fraction for SigIncrease")
    slight_buy_fraction: float = Field(0.10, gt=0, le=1, description="Cash fraction for SlightIncrease")
    sig_sell_fraction: float = Field(0.25, gt=0, le=1, description="Share fraction for SigDecrease")
    slight_sell_fraction: float = Field(0.10, gt=0, le=1, description="Share fraction for SlightDecrease")
    significant_return: float = Field(0.02, gt=0, description="Daily position return that boosts cited memories")

    def to_sizing(self) -> TradeSizing:
        return TradeSizing(**self.model_dump())


class CoreConfig(BaseModel):
    """Decision core selection"""
    kind: Literal["rule_based", "chat_completion"] = "rule_based"
    momentum_window: int = Field(5, ge=1)
    slight_threshold: float = Field(0.01, gt=0)
    sig_threshold: float = Field(0.03, gt=0)
    risk_multipliers: Dict[RiskPreference, float] = Field(
        default_factory=lambda: {
            RiskPreference.SEEKING: 0.5,
            RiskPreference.NEUTRAL: 1.0,
            RiskPreference.AVERSE: 1.5,
        }
    )
    endpoint: Optional[str] = Field(None, description="Chat-completion URL")
    model: Optional[str] = Field(None, description="Model name sent to the endpoint")
    timeout: float = Field(60.0, gt=0)
    temperature: float = Field(0.0, ge=0)
    api_key_env: str = Field(DEFAULT_API_KEY_ENV, description="Environment variable holding the credential")
    strict: bool = Field(True, description="Abort the run when the core is unavailable")
    parallelism: int = Field(2, ge=1)

    @model_validator(mode="after")
    def _check(self) -> "CoreConfig":
        if self.slight_threshold >= self.sig_threshold:
            raise ValueError("slight_threshold must be below sig_threshold")
        if set(self.risk_multipliers) != set(RiskPreference):
            raise ValueError("risk_multipliers must cover Seeking, Neutral and Averse")
        if self.kind == "chat_completion" and not (self.endpoint and self.model):
            raise ValueError("chat_completion core requires endpoint and model")
        return self


class EmbeddingConfig(BaseModel):
    kind: Literal["hashing", "http"] = "hashing"
    dimension: int = Field(256, ge=8)
    endpoint: Optional[str] = None
    timeout: float = Field(30.0, gt=0)


class DebateConfig(BaseModel):
    enabled: bool = True
    max_rounds: int = Field(2, ge=1)


class DataConfig(BaseModel):
    """Input files (relative to the config file)"""
    prices: str = Field(..., description="Daily price CSV")
    minute_prices: Optional[str] = Field(None, description="Minute price CSV")
    holdings: Optional[str] = Field(None, description="Fund holdings CSV")
    news: Optional[str] = Field(None, description="News JSON-lines")
    seed_memories: Optional[str] = Field(None, description="Seed memory JSON-lines")

    def resolved(self, base_dir: Path) -> Dict[str, Optional[Path]]:
        paths = {}
        for name, value in self.model_dump().items():
            paths[name] = (Path(base_dir) / value) if value else None
        return paths


class RunConfig(BaseModel):
    """Complete configuration of one train/test run"""
    run_id: str = Field(..., min_length=1, pattern=r"^[A-Za-z0-9_.-]+$", description="Run directory name")
    train: PhaseSpan
    test: PhaseSpan
    agents: List[AgentSpec] = Field(..., min_length=1)
    sectors: Dict[str, str] = Field(..., min_length=1, description="Ticker to sector tag")
    k: int = Field(3, ge=1, description="Memories retrieved per layer")
    seed: int = Field(7, description="Fixture seed")
    layers: Dict[LayerKind, LayerParamsConfig] = Field(default_factory=_default_layers)
    sizing: SizingConfig = Field(default_factory=SizingConfig)
    core: CoreConfig = Field(default_factory=CoreConfig)
    embedding: EmbeddingConfig = Field(default_factory=EmbeddingConfig)
    debate: DebateConfig = Field(default_factory=DebateConfig)
    data: DataConfig

    model_config = {
        "json_schema_extra": {
            "examples": [
                {
                    "run_id": "desk-01",
                    "train": {"start": "2023-01-02", "end": "2023-02-28"},
                    "test": {"start": "2023-03-01", "end": "2023-03-31"},
                    "agents": [{"agent_id": "alpha", "risk": "Seeking", "sectors": ["tech"]}],
                    "sectors": {"AAA": "tech"},
                    "data": {"prices": "prices.csv", "news": "news.jsonl"},
                }
            ]
        }
    }

    @field_validator("agents")
    @classmethod
    def _unique_agents(cls, agents: List[AgentSpec]) -> List[AgentSpec]:
        ids = [a.agent_id for a in agents]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate agent ids: {sorted(ids)}")
        return agents

    @model_validator(mode="after")
    def _check(self) -> "RunConfig":
        if self.train.end >= self.test.start:
            raise ValueError("train span must precede test span")
        known = set(self.sectors.values())
        for agent in self.agents:
            unknown = set(agent.sectors) - known
            if unknown:
                raise ValueError(f"agent {agent.agent_id} covers unknown sectors {sorted(unknown)}")
        if set(self.layers) != set(LayerKind):
            raise ValueError("layers must define short, middle and long")
        validate_layer_params(self.layer_params())
        return self

    def layer_params(self) -> Dict[LayerKind, LayerParams]:
        return {layer: cfg.to_params() for layer, cfg in self.layers.items()}

    def span(self, phase: str) -> PhaseSpan:
        return self.train if phase.lower() == "train" else self.test

    def config_hash(self) -> str:
        """First 16 hex chars of SHA-256 over the canonical JSON dump"""
        canonical = json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def load_run_config(path: Path) -> RunConfig:
    """
    Load and validate a run config file

    Raises:
        ConfigError: If the file is missing, unreadable or invalid
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Config file not found: {path}", {"path": str(path)})
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"Cannot read config {path}: {e}", {"path": str(path)})
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(
            f"Invalid config {path}: {e.error_count()} error(s)",
            {"path": str(path), "errors": json.loads(e.json(include_url=False))}
        )
    except ValueError as e:
        raise ConfigError(f"Invalid config {path}: {e}", {"path": str(path)})
