"""Configuration management for jumpbem."""

import os
from contextvars import ContextVar
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Sequence, Tuple, Type, Union

import yaml
from pydantic import BaseModel, Field, ValidationError, field_validator
from pydantic.fields import FieldInfo
from pydantic_settings import BaseSettings, PydanticBaseSettingsSource, SettingsConfigDict

from .exceptions import ConfigurationError, EXIT_IO, JumpBEMError
from .operators import QuadratureOrders
from .verification import ManufacturedCase, case_from_sources


class MeshConfig(BaseModel):
    """Surface mesh configuration."""
    shape: Literal["icosphere", "cube"] = "icosphere"
    subdivisions: int = Field(default=3, ge=0, le=7)
    radius: float = Field(default=1.0, gt=0.0)
    path: Optional[str] = None  # OFF file; overrides the generator


class QuadratureConfig(BaseModel):
    """Quadrature orders for assembly, data moments and potential evaluation."""
    regular_degree: int = Field(default=6, ge=1, le=20)
    singular_order: int = Field(default=8, ge=1, le=20)
    data_degree_boost: int = Field(default=2, ge=0)
    evaluation_degree: int = Field(default=6, ge=1, le=20)

    def orders(self) -> QuadratureOrders:
        return QuadratureOrders(self.regular_degree, self.singular_order)


class SolverConfig(BaseModel):
    """Jump problem weights and solver selection."""
    eps0: float = Field(default=2.0, gt=0.0)
    eps1: float = Field(default=2.0, gt=0.0)
    method: Literal["sequential", "monolithic", "both"] = "sequential"
    special_case_tolerance: float = Field(default=1e-8, ge=0.0)
    compatibility_warning: float = Field(default=1e-3, gt=0.0)


class SourceConfig(BaseModel):
    """Point source of a manufactured field."""
    location: List[float]
    strength: float = 1.0
    field: Literal["interior", "exterior"] = "interior"

    @field_validator("location")
    @classmethod
    def _three_coordinates(cls, value: List[float]) -> List[float]:
        if len(value) != 3:
            raise ValueError(f"location needs 3 coordinates, got {len(value)}")
        return value


def _default_sources() -> List[SourceConfig]:
    return [
        SourceConfig(location=[0.6, -0.4, 2.2], strength=1.0, field="interior"),
        SourceConfig(location=[0.15, 0.1, -0.2], strength=1.0, field="exterior"),
    ]


class VerificationConfig(BaseModel):
    """Manufactured-solution verification configuration."""
    n_interior: int = Field(default=64, ge=1)
    n_exterior: int = Field(default=64, ge=1)
    interior_factor: float = Field(default=0.5, gt=0.0, lt=1.0)
    exterior_factor: float = Field(default=2.0, gt=1.0)
    guard_factor: float = Field(default=0.05, ge=0.0)
    levels: List[int] = Field(default_factory=lambda: [2, 3, 4])
    mean_zero_jump: bool = True
    sources: List[SourceConfig] = Field(default_factory=_default_sources)

    def case(
        self, eps0: float, eps1: float, center: Sequence[float] = (0.0, 0.0, 0.0), scale: float = 1.0
    ) -> ManufacturedCase:
        """Manufactured case with source offsets scaled about the mesh centroid."""
        records = [
            {
                "location": [c + scale * v for c, v in zip(center, s.location)],
                "strength": s.strength,
                "field": s.field,
            }
            for s in self.sources
        ]
        return case_from_sources(records, eps0, eps1)


class BenchmarkConfig(BaseModel):
    """Sequential against monolithic timing configuration."""
    levels: List[int] = Field(default_factory=lambda: [3, 4])
    repetitions: int = Field(default=3, ge=1)


class OutputConfig(BaseModel):
    """Output configuration."""
    data_dir: str = "data"
    pretty_json: bool = True
    float_format: str = "%.10e"


class LoggingConfig(BaseModel):
    """Logging configuration."""
    level: str = "INFO"
    format: str = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
    console: bool = True


class PerformanceConfig(BaseModel):
    """Performance configuration."""
    threads: int = Field(default=1, ge=1)
    chunk_panels: int = Field(default=4, ge=1)
    seed: int = 0


# Contents of the YAML file being loaded by `load_config`.
_yaml_data: ContextVar[Optional[Dict[str, Any]]] = ContextVar("jumpbem_yaml_data", default=None)


class YamlFileSource(PydanticBaseSettingsSource):
    """Settings from the YAML config file, ranked below the environment."""

    def get_field_value(self, field: FieldInfo, field_name: str) -> Tuple[Any, str, bool]:
        return (_yaml_data.get() or {}).get(field_name), field_name, False

    def __call__(self) -> Dict[str, Any]:
        return dict(_yaml_data.get() or {})


class Config(BaseSettings):
    """Main configuration class."""
    mesh: MeshConfig = Field(default_factory=MeshConfig)
    quadrature: QuadratureConfig = Field(default_factory=QuadratureConfig)
    solver: SolverConfig = Field(default_factory=SolverConfig)
    verification: VerificationConfig = Field(default_factory=VerificationConfig)
    benchmark: BenchmarkConfig = Field(default_factory=BenchmarkConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)
    logging: LoggingConfig = Field(default_factory=LoggingConfig)
    performance: PerformanceConfig = Field(default_factory=PerformanceConfig)

    model_config = SettingsConfigDict(
        env_prefix="JUMPBEM_",
        env_file=".env",
        env_file_encoding="utf-8",
        env_nested_delimiter="__",
        case_sensitive=False,
        extra="ignore",
    )

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: Type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> Tuple[PydanticBaseSettingsSource, ...]:
        """Keyword arguments, then environment, then .env, then the YAML file."""
        return init_settings, env_settings, dotenv_settings, YamlFileSource(settings_cls), file_secret_settings

    def __init__(self, **kwargs):
        super().__init__(**kwargs)
        self._load_env_vars()

    def _load_env_vars(self):
        """Load environment variables into configuration."""
        if threads := os.getenv("JUMPBEM_THREADS"):
            try:
                value = int(threads)
            except ValueError as e:
                raise ConfigurationError(f"JUMPBEM_THREADS must be an integer, got {threads!r}") from e
            if value < 1:
                raise ConfigurationError(f"JUMPBEM_THREADS must be at least 1, got {value}")
            self.performance.threads = value

    def apply_overrides(self, overrides: Dict[str, Any]) -> "Config":
        """Apply dotted-key overrides such as {"solver.eps0": 0.5}; None values are skipped."""
        grouped: Dict[str, Dict[str, Any]] = {}
        for key, value in overrides.items():
            if value is None:
                continue
            section, _, name = key.partition(".")
            if section not in type(self).model_fields or not name:
                raise ConfigurationError(f"unknown configuration key {key!r}")
            grouped.setdefault(section, {})[name] = value
        for section, changes in grouped.items():
            current = getattr(self, section)
            try:
                updated = type(current).model_validate({**current.model_dump(), **changes})
            except ValidationError as e:
                raise ConfigurationError(f"invalid {section} settings: {e}") from e
            setattr(self, section, updated)
        return self

    def create_directories(self):
        """Create necessary directories."""
        Path(self.output.data_dir).mkdir(parents=True, exist_ok=True)


def load_config(config_path: Optional[Union[str, Path]] = None) -> Config:
    """Load configuration from file and environment variables."""
    config_data = {}

    if config_path is None:
        config_path = Path("config.yaml")
    else:
        config_path = Path(config_path)

    if config_path.exists():
        try:
            with open(config_path, "r") as f:
                config_data = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            raise ConfigurationError(f"cannot parse {config_path}: {e}") from e
        except OSError as e:
            raise JumpBEMError(f"cannot read {config_path}: {e}", EXIT_IO) from e

    if not isinstance(config_data, dict):
        raise ConfigurationError(f"{config_path} must hold a mapping of sections")

    token = _yaml_data.set(config_data)
    try:
        config = Config()
    except ValidationError as e:
        raise ConfigurationError(f"invalid configuration in {config_path}: {e}") from e
    finally:
        _yaml_data.reset(token)

    try:
        config.create_directories()
    except OSError as e:
        raise JumpBEMError(f"cannot create output directory {config.output.data_dir}: {e}", EXIT_IO) from e

    return config


def create_default_config(output_path: Union[str, Path] = "config.yaml") -> Path:
    """Create a default configuration file."""
    config = Config()
    output_path = Path(output_path)

    try:
        with open(output_path, "w") as f:
            yaml.dump(config.model_dump(), f, default_flow_style=False, indent=2, sort_keys=False)
    except OSError as e:
        raise JumpBEMError(f"cannot write {output_path}: {e}", EXIT_IO) from e

    return output_path
