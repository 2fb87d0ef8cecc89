"""Abstract experiment, report models and helpers shared by experiment modules."""
import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Optional, Sequence

from pydantic import BaseModel, Field, model_validator

from wedgecp.contact import EdgeSpeedEstimate, estimate_edge_speed
from wedgecp.definitions import ExperimentConfig
from wedgecp.utils import config_hash, fraction_str, mean_interval, to_fraction, wilson_interval

logger = logging.getLogger(__name__)

LAMBDA_C_REFERENCE = 1.65
"""Simulation-based critical value used for supercriticality warnings."""


class EstimateReport(BaseModel):
    label: str = ''
    estimate: float
    stderr: float
    interval: tuple[float, float]
    replicas: int
    discarded: int = 0
    successes: Optional[int] = None
    runtime_s: Optional[float] = Field(default=None, exclude=True)
    tags: list[str] = []

    @model_validator(mode='after')
    def interval_contains_estimate(self) -> 'EstimateReport':
        lo, hi = self.interval
        if not math.isnan(self.estimate) and not (math.isnan(lo) or math.isnan(hi)):
            self.interval = (min(lo, self.estimate), max(hi, self.estimate))
        return self

    @property
    def lower(self) -> float:
        return self.interval[0]

    @property
    def upper(self) -> float:
        return self.interval[1]


def proportion_report(successes: int, n: int, discarded: int = 0, label: str = '',
                      confidence: float = 0.95) -> EstimateReport:
    """Proportion with its binomial standard error and Wilson interval."""
    p = successes / n if n else math.nan
    stderr = math.sqrt(p * (1 - p) / n) if n else math.nan
    return EstimateReport(label=label, estimate=p, stderr=stderr, interval=wilson_interval(successes, n, confidence),
                          replicas=n + discarded, discarded=discarded, successes=successes)


def mean_report(values: Sequence[float], discarded: int = 0, label: str = '', confidence: float = 0.95) -> EstimateReport:
    mean, stderr, interval = mean_interval(values, confidence)
    return EstimateReport(label=label, estimate=mean, stderr=stderr, interval=interval,
                          replicas=len(values) + discarded, discarded=discarded)


def product_check(joint: EstimateReport, parts: Sequence[EstimateReport], sigmas: float = 3.0) -> dict[str, Any]:
    """Compares a joint proportion with the product of marginal proportions (delta-method standard error)."""
    product = math.prod(part.estimate for part in parts)
    relative = sum((part.stderr / part.estimate) ** 2 for part in parts if part.estimate > 0)
    product_se = product * math.sqrt(relative)
    sigma = math.sqrt(joint.stderr ** 2 + product_se ** 2)
    return {
        'joint': joint.estimate,
        'product': product,
        'sigma': sigma,
        'difference': joint.estimate - product,
        'within_tolerance': abs(joint.estimate - product) <= sigmas * sigma,
    }


def paired_trend(columns: Sequence[Sequence[float]], sigmas: float = 3.0) -> dict[str, Any]:
    """Paired differences between consecutive columns; the trend holds when every mean difference is >= -3 se."""
    steps = []
    for previous, current in zip(columns, columns[1:]):
        diffs = [b - a for a, b in zip(previous, current)]
        mean, stderr, _ = mean_interval(diffs)
        steps.append({'mean_difference': mean, 'stderr': stderr,
                      'nondecreasing': bool(len(diffs) == 0 or mean >= -sigmas * stderr)})
    return {'steps': steps, 'nondecreasing': all(step['nondecreasing'] for step in steps)}


@dataclass
class Table:
    header: list[str]
    rows: list[Sequence[Any]] = field(default_factory=list)


@dataclass
class ExperimentResult:
    name: str
    report: dict[str, Any]
    tables: dict[str, Table] = field(default_factory=dict)
    checks: dict[str, bool] = field(default_factory=dict)
    tags: list[str] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            'experiment': self.name,
            'report': self.report,
            'checks': self.checks,
            'tags': self.tags,
        }


class AbstractExperiment(ABC):
    """An experiment turns an ExperimentConfig into a report plus CSV tables and named pass/fail checks."""

    name: str = ''

    @abstractmethod
    def run(self, config: ExperimentConfig) -> ExperimentResult:
        ...

    def check(self, result: ExperimentResult) -> list[str]:
        """Names of the failed acceptance checks."""
        return [name for name, passed in result.checks.items() if not passed]

    def execute(self, config: ExperimentConfig) -> ExperimentResult:
        result = self.run(config)
        result.report['reproducibility'] = {
            'master_seed': config.seed,
            'config_hash': config_hash(config.reproducible_dump()),
        }
        logger.info(f'{self.name}: {len(result.checks) - len(self.check(result))}/{len(result.checks)} checks passed')
        return result


@dataclass
class SpeedChoice:
    alpha_l: Fraction
    alpha_r: Fraction
    edge_speed: Optional[EdgeSpeedEstimate] = None
    tags: list[str] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            'alpha_l': fraction_str(self.alpha_l),
            'alpha_r': fraction_str(self.alpha_r),
            'edge_speed': self.edge_speed.to_dict() if self.edge_speed else None,
        }


def choose_speeds(config: ExperimentConfig) -> SpeedChoice:
    """Wedge speeds from the config, or fractions of the estimated edge speed, checked against it.

    The speed condition 0 < alpha_l < alpha_r < alpha(lambda) is tested against the upper end of the edge-speed
    interval; a violation is tagged, not raised.
    """
    config.require('lambda_')
    alpha_l, alpha_r = config.fraction('alpha_l'), config.fraction('alpha_r')
    estimate, tags = None, []
    alpha_hat = upper = config.alpha_hat
    if alpha_hat is None and (alpha_l is None or alpha_r is None):
        estimate = estimate_edge_speed(config.lambda_, config.speed_horizon or config.horizon,
                                       config.speed_replicas or config.replicas, config.seed,
                                       window_margin=config.window_margin, threads=config.threads,
                                       confidence=config.confidence)
        alpha_hat, upper = estimate.alpha_hat, estimate.interval[1]
    low, high = config.speed_fractions
    if alpha_l is None:
        alpha_l = to_fraction(low * alpha_hat)
    if alpha_r is None:
        alpha_r = to_fraction(high * alpha_hat)
    if upper is not None and alpha_r >= upper:
        tags.append('speed-condition-violated')
        logger.warning(f'alpha_r={float(alpha_r):.4f} is not below the edge speed estimate {upper:.4f}.')
    if config.lambda_ <= LAMBDA_C_REFERENCE:
        tags.append('lambda-not-supercritical')
        logger.warning(f'lambda={config.lambda_} is not above the simulated critical value {LAMBDA_C_REFERENCE}.')
    return SpeedChoice(alpha_l, alpha_r, estimate, tags)
