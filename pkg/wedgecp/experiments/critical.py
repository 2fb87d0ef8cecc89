"""Finite-time critical value and edge speeds of the single-type process."""
import logging
from dataclasses import dataclass, field
from typing import Any, Optional

from wedgecp.contact import Configuration, EdgeSpeedEstimate, default_margin, estimate_edge_speed, evolve
from wedgecp.definitions import ExperimentConfig
from wedgecp.errors import InvalidArgumentError
from wedgecp.experiments import factory
from wedgecp.experiments.experiment import AbstractExperiment, EstimateReport, ExperimentResult, Table, proportion_report
from wedgecp.regions import FullSpace
from wedgecp.replicas import run_replicas
from wedgecp.substrate import SeedRecord, Stream, build_timeline

logger = logging.getLogger(__name__)


def _survival_replica(task: tuple) -> tuple[bool, bool]:
    lambda_, horizon, margin, master, replica = task
    timeline = build_timeline((-margin, margin), horizon, lambda_, 0.0, SeedRecord(master, Stream.LAMBDA_C, replica))
    trajectory = evolve(timeline, FullSpace(), Configuration.single(0))
    return trajectory.survived or trajectory.edge_touched, trajectory.edge_touched


def survival_probability(lambda_: float, horizon: float, replicas: int, seed: int = 0, *,
                         window_margin: Optional[int] = None, threads: int = 1,
                         confidence: float = 0.95) -> EstimateReport:
    """P(xi^0 nonempty at the horizon). A replica reaching the window end counts as surviving.

    Every lambda uses the same replica seeds, so estimates at different rates are paired.
    """
    if lambda_ < 0 or horizon <= 0 or replicas < 1:
        raise InvalidArgumentError(f'Survival needs lambda >= 0, horizon > 0, replicas >= 1: {lambda_}, {horizon}, {replicas}')
    margin = window_margin or default_margin(lambda_, horizon)
    tasks = [(float(lambda_), float(horizon), margin, seed, replica) for replica in range(replicas)]
    results = run_replicas(_survival_replica, tasks, threads=threads)
    report = proportion_report(sum(survived for survived, _ in results), replicas, label=f'lambda={lambda_:g}',
                               confidence=confidence)
    touched = sum(touched for _, touched in results)
    if touched:
        report.tags.append(f'edge-touched:{touched}')
    logger.debug(f'survival lambda={lambda_:g}: {report.estimate:.4f} ({touched} touched the window)')
    return report


@dataclass
class LambdaCEstimate:
    """Finite-time proxy: the smallest rate whose survival proportion reaches `threshold`, bracketed."""
    estimate: float
    bracket: tuple[float, float]
    threshold: float
    horizon: float
    evaluations: list[tuple[float, EstimateReport]] = field(default_factory=list)
    tags: list[str] = field(default_factory=list)

    @property
    def width(self) -> float:
        return self.bracket[1] - self.bracket[0]

    def to_dict(self) -> dict[str, Any]:
        return {
            'lambda_c_hat': self.estimate,
            'bracket': list(self.bracket),
            'width': self.width,
            'threshold': self.threshold,
            'horizon': self.horizon,
            'evaluations': [dict(report.model_dump(), **{'lambda': lambda_}) for lambda_, report in self.evaluations],
            'tags': self.tags,
        }


def estimate_lambda_c(horizon: float, replicas: int, tolerance: float, seed: int = 0, *, threshold: float = 0.1,
                      bracket: tuple[float, float] = (0.5, 4.0), window_margin: Optional[int] = None, threads: int = 1,
                      confidence: float = 0.95) -> LambdaCEstimate:
    """Bisection on lambda of the survival proportion against `threshold`, until the bracket is at most `tolerance` wide."""
    lo, hi = bracket
    if tolerance <= 0 or not 0 <= lo < hi:
        raise InvalidArgumentError(f'lambda_c bisection needs tolerance > 0 and 0 <= lo < hi: {tolerance}, {bracket}')

    evaluations = []

    def above(lambda_: float) -> bool:
        report = survival_probability(lambda_, horizon, replicas, seed, window_margin=window_margin, threads=threads,
                                      confidence=confidence)
        evaluations.append((lambda_, report))
        return report.estimate >= threshold

    tags = []
    if above(lo) or not above(hi):
        tags.append('bracket-not-valid')
        logger.warning(f'survival proportion does not cross {threshold} on [{lo}, {hi}]')
        return LambdaCEstimate((lo + hi) / 2, (lo, hi), threshold, horizon, evaluations, tags)
    while hi - lo > tolerance:
        mid = (lo + hi) / 2
        if above(mid):
            hi = mid
        else:
            lo = mid
    logger.info(f'lambda_c bracket [{lo:.4f}, {hi:.4f}] after {len(evaluations)} evaluations')
    return LambdaCEstimate((lo + hi) / 2, (lo, hi), threshold, horizon, evaluations, tags)


class LambdaCExperiment(AbstractExperiment):
    name = 'lambda-c'

    def run(self, config: ExperimentConfig) -> ExperimentResult:
        estimate = estimate_lambda_c(config.horizon, config.replicas, config.tolerance, config.seed,
                                     threshold=config.lambda_c_threshold, bracket=config.bracket,
                                     window_margin=config.window_margin, threads=config.threads,
                                     confidence=config.confidence)
        evaluations = dict(estimate.evaluations)
        lo, hi = config.bracket
        checks = {
            'bracket-valid': 'bracket-not-valid' not in estimate.tags,
            'bracket-width': estimate.width <= config.tolerance,
            'subcritical-endpoint': evaluations[lo].estimate < config.lambda_c_threshold,
            'supercritical-endpoint': evaluations[hi].estimate >= config.lambda_c_threshold,
        }
        rows = [(lambda_, r.estimate, r.lower, r.upper, r.successes, r.replicas) for lambda_, r in estimate.evaluations]
        table = Table(['lambda', 'survival', 'lower', 'upper', 'survivors', 'replicas'], rows)
        return ExperimentResult(self.name, estimate.to_dict(), {'bisection': table}, checks, estimate.tags)


def edge_speed_trend(estimates: list[EdgeSpeedEstimate]) -> bool:
    """Estimates strictly increasing in lambda with pairwise disjoint confidence intervals."""
    ordered = sorted(estimates, key=lambda e: e.lambda_)
    return all(a.alpha_hat < b.alpha_hat and a.interval[1] < b.interval[0] for a, b in zip(ordered, ordered[1:]))


class EdgeSpeedExperiment(AbstractExperiment):
    name = 'edge-speed'

    def run(self, config: ExperimentConfig) -> ExperimentResult:
        if not config.lambdas:
            raise InvalidArgumentError('Edge speed experiment needs at least one lambda.')
        estimates = [estimate_edge_speed(lambda_, config.horizon, config.replicas, config.seed,
                                         window_margin=config.window_margin, threads=config.threads,
                                         confidence=config.confidence)
                     for lambda_ in sorted(config.lambdas)]
        fastest = estimates[-1]
        checks = {
            'increasing-in-lambda': edge_speed_trend(estimates),
            'largest-lambda-positive': fastest.interval[0] > 0,
        }
        rows = [(e.lambda_, e.alpha_hat, e.stderr, e.interval[0], e.interval[1], e.used, e.discarded, e.extinct)
                for e in estimates]
        table = Table(['lambda', 'alpha_hat', 'stderr', 'lower', 'upper', 'used', 'discarded', 'extinct'], rows)
        report = {'horizon': config.horizon, 'estimates': [e.to_dict() for e in estimates]}
        return ExperimentResult(self.name, report, {'edge_speed': table}, checks)


def register() -> None:
    factory.register(LambdaCExperiment.name, LambdaCExperiment)
    factory.register(EdgeSpeedExperiment.name, EdgeSpeedExperiment)
