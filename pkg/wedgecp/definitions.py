"""Experiment configuration and bundled experiment definitions.

An experiment definition is a YAML file holding an `experiment` mapping (id, title, description and a
`config` mapping); the root catalog YAML file lists the definition files relative to its own directory.
"""
import logging
import os
from fractions import Fraction
from pathlib import Path
from typing import Any, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from wedgecp.errors import InvalidArgumentError
from wedgecp.utils import to_fraction

logger = logging.getLogger(__name__)

DEFINITIONS_ENV_VAR = 'WEDGECP_DEFINITIONS'
SEED_ENV_VAR = 'WEDGECP_SEED'
DEFAULT_DEFINITIONS_FILE = Path(__file__).resolve().parent / 'data' / 'definitions' / 'catalog.yaml'

RATIONAL_FIELDS = ('alpha_l', 'alpha_r', 'M', 'alpha', 'beta', 'x0')


class ExperimentConfig(BaseModel):
    """Parameters of one experiment run. Rationals are kept as exact "p/q" strings."""
    model_config = ConfigDict(extra='forbid', populate_by_name=True)

    experiment: str
    lambda_: Optional[float] = Field(default=None, alias='lambda')
    lambda1: Optional[float] = None
    lambda2: Optional[float] = None
    lambdas: list[float] = [2.0, 3.0, 4.0]

    alpha_l: Optional[str] = None
    alpha_r: Optional[str] = None
    speed_fractions: tuple[float, float] = (0.3, 0.7)
    alpha_hat: Optional[float] = None
    speed_horizon: Optional[float] = None
    speed_replicas: Optional[int] = None

    M: Optional[str] = None
    m_list: list[str] = []
    x0: str = '1'
    alpha: Optional[str] = None
    beta: Optional[str] = None
    ell: Optional[int] = None
    d: Optional[int] = None
    k_rows: int = 0
    block_scale: int = 6

    horizon: float = 100.0
    replicas: int = 100
    burn_in: float = 50.0
    window_margin: Optional[int] = None
    checkpoints: Optional[list[float]] = None
    growth_speeds: Optional[tuple[float, float]] = None

    threshold: float = 10.0
    survival_threshold: float = 0.9
    disagreement_threshold: float = 0.01
    relative_tolerance: float = 0.1
    min_survivors: int = 30
    tolerance: float = 0.05
    bracket: tuple[float, float] = (0.5, 4.0)
    lambda_c_threshold: float = 0.1
    sites: int = 5
    initial: Optional[str] = None
    triples: int = 20

    seed: int = 0
    threads: int = 1
    confidence: float = 0.95
    out_dir: Optional[str] = None

    @field_validator(*RATIONAL_FIELDS, mode='before')
    @classmethod
    def check_rational(cls, value: Any) -> Optional[str]:
        if value is None:
            return value
        return str(to_fraction(str(value)))

    @field_validator('m_list', mode='before')
    @classmethod
    def split_m_list(cls, value: Any) -> Any:
        if isinstance(value, str):
            value = [v for v in value.split(',') if v.strip()]
        return [str(to_fraction(str(v))) for v in value]

    @field_validator('lambdas', 'checkpoints', 'bracket', 'growth_speeds', 'speed_fractions', mode='before')
    @classmethod
    def split_floats(cls, value: Any) -> Any:
        if isinstance(value, str):
            return [float(v) for v in value.split(',') if v.strip()]
        return value

    @field_validator('lambda_', 'lambda1', 'lambda2')
    @classmethod
    def check_rate(cls, value: Optional[float]) -> Optional[float]:
        if value is not None and value < 0:
            raise ValueError(f'rates must be non-negative: {value}')
        return value

    @model_validator(mode='after')
    def check_counts(self) -> 'ExperimentConfig':
        if self.replicas < 1:
            raise ValueError(f'replica count must be at least 1: {self.replicas}')
        if self.threads < 0:
            raise ValueError(f'thread count must be non-negative (0 uses every CPU): {self.threads}')
        if self.seed < 0:
            raise ValueError(f'seed must be non-negative: {self.seed}')
        if not 0 < self.confidence < 1:
            raise ValueError(f'confidence must lie in (0, 1): {self.confidence}')
        return self

    def fraction(self, name: str) -> Optional[Fraction]:
        value = getattr(self, name)
        return None if value is None else to_fraction(value)

    def fractions(self, name: str) -> list[Fraction]:
        return [to_fraction(v) for v in getattr(self, name)]

    def require(self, *names: str) -> None:
        missing = [name for name in names if getattr(self, name) in (None, [])]
        if missing:
            raise InvalidArgumentError(f'Experiment {self.experiment!r} needs: {", ".join(missing)}')

    def reproducible_dump(self) -> dict[str, Any]:
        """Configuration fields that determine the results (output location and parallelism excluded)."""
        return self.model_dump(mode='json', by_alias=True, exclude={'out_dir', 'threads'})


def load_config_file(path: Union[str, Path]) -> dict[str, Any]:
    """Reads a JSON or YAML configuration file into a plain mapping."""
    try:
        with open(path, mode='r') as file:
            config_dict = yaml.safe_load(file) or {}
    except (OSError, yaml.YAMLError) as e:
        raise InvalidArgumentError(f'Cannot read configuration file {path}: {e}') from None
    if not isinstance(config_dict, dict):
        raise InvalidArgumentError(f'Configuration file {path} must hold a mapping.')
    return config_dict


def make_config(*layers: Optional[dict[str, Any]]) -> ExperimentConfig:
    """Merges configuration layers, later layers winning, and validates the result."""
    merged: dict[str, Any] = {}
    for layer in layers:
        if layer:
            merged.update({('lambda' if key == 'lambda_' else key): value for key, value in layer.items()
                           if value is not None})
    if 'seed' not in merged and os.environ.get(SEED_ENV_VAR):
        merged['seed'] = os.environ[SEED_ENV_VAR]
    try:
        return ExperimentConfig.model_validate(merged)
    except ValidationError as e:
        raise InvalidArgumentError(f'Invalid experiment configuration: {e}') from None


class ExperimentDefinition(BaseModel):
    id: str
    title: str
    description: str = ''
    config: dict[str, Any]

    path: str = '.'
    """Definition file path relative to the catalog file."""

    def make_config(self, *overrides: Optional[dict[str, Any]]) -> ExperimentConfig:
        return make_config(self.config, *overrides)


class CatalogDefinition(BaseModel):
    id: str
    title: str
    description: str = ''
    experiments: list[str] = []


class InvalidYAMLDefinition(InvalidArgumentError):
    """Invalid YAML definition error."""


def default_definitions_file() -> Path:
    return Path(os.environ.get(DEFINITIONS_ENV_VAR, DEFAULT_DEFINITIONS_FILE))


class Definitions:
    """Loads a YAML catalog file and the experiment definition files it lists."""

    def __init__(self, yaml_file: Union[str, Path, None] = None):
        self.catalog: Optional[CatalogDefinition] = None
        self.experiments: list[ExperimentDefinition] = []
        self.path = Path(yaml_file) if yaml_file else default_definitions_file()
        self.load_catalog(self.path)

    def load_catalog(self, yaml_file: Path) -> None:
        catalog_dict = self.parse_yaml_file(yaml_file, 'catalog')
        for yaml_attr in ['id', 'title']:
            if yaml_attr not in catalog_dict:
                raise InvalidYAMLDefinition(f'Missing YAML catalog `{yaml_attr}` attribute: {catalog_dict}')
        self.catalog = CatalogDefinition(**catalog_dict)
        for relpath in self.catalog.experiments:
            experiment_dict = self.parse_yaml_file(yaml_file.parent / relpath, 'experiment')
            self.add_experiment(experiment_dict, relpath)

    def add_experiment(self, experiment_dict: dict[str, Any], relpath: str) -> None:
        for yaml_attr in ['id', 'title', 'config']:
            if yaml_attr not in experiment_dict:
                raise InvalidYAMLDefinition(f'Missing YAML experiment `{yaml_attr}` attribute in: {experiment_dict}')
        if experiment_dict['id'] in self.get_experiment_ids():
            raise InvalidYAMLDefinition(f'Duplicate experiment definition {experiment_dict["id"]!r} in {relpath}.')
        experiment_dict.update({'path': relpath})
        self.experiments.append(ExperimentDefinition(**experiment_dict))

    @staticmethod
    def parse_yaml_file(yaml_file: Path, key: str) -> dict[str, Any]:
        try:
            with open(yaml_file, mode='r') as file:
                yaml_dict = yaml.safe_load(file) or {}
        except (OSError, yaml.YAMLError) as e:
            raise InvalidYAMLDefinition(f'Cannot read YAML definition file {yaml_file}: {e}') from None
        if key not in yaml_dict:
            raise InvalidYAMLDefinition(f'Missing top-level `{key}` key in {yaml_file}.')
        return dict(yaml_dict[key])

    def get_experiment_ids(self, experiment: str = '') -> list[str]:
        return [definition.id for definition in self.experiments
                if not experiment or definition.config.get('experiment') == experiment]

    def get_experiment(self, id: str) -> ExperimentDefinition:
        for definition in self.experiments:
            if definition.id == id:
                return definition
        raise InvalidArgumentError(f'Undefined {id!r} experiment definition. Available definitions: {self.get_experiment_ids()}.')

    def catalog_tree(self) -> str:
        lines = [f'{self.catalog.id}/ ({self.path})']
        for definition in self.experiments:
            lines.append(f'  - {definition.id:<28} {definition.config.get("experiment", ""):<18} {definition.title}')
        return '\n'.join(lines)
