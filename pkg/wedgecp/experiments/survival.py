"""Survival in wedges and growth of the wedge edges."""
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Optional, Sequence

from wedgecp.contact import Configuration, Trajectory, default_margin, evolve
from wedgecp.definitions import ExperimentConfig
from wedgecp.errors import InvalidArgumentError
from wedgecp.experiments import factory
from wedgecp.experiments.experiment import (
    AbstractExperiment, EstimateReport, ExperimentResult, Table, choose_speeds, mean_report, proportion_report
)
from wedgecp.regions import HalfSpace, Wedge
from wedgecp.replicas import run_replicas
from wedgecp.substrate import SeedRecord, Stream, build_timeline
from wedgecp.utils import Rational, ceil_fraction, floor_fraction, fraction_str, to_fraction

logger = logging.getLogger(__name__)


def wedge_window(alpha_r: Fraction, M: Fraction, horizon: float, margin: int = 1) -> tuple[int, int]:
    """Sites of W(., alpha_r, M) up to the horizon, plus `margin` sites on each side."""
    return -margin, ceil_fraction(M + alpha_r * Fraction(horizon)) + margin


def wedge_initial(M: Fraction) -> Configuration:
    """[0, M] as a set of sites."""
    return Configuration.interval(0, floor_fraction(M))


def checkpoint_times(horizon: float, checkpoints: Optional[Sequence[float]] = None) -> list[float]:
    return sorted(set(checkpoints if checkpoints is not None else (0.0, horizon / 4, horizon / 2, horizon)))


def nearest_neighbor_violations(wedge: Trajectory, half_space: Trajectory, times: Sequence[float]) -> int:
    """Sites of [l_t, r_t] where the wedge process and the half-space process disagree, summed over `times`."""
    violations = 0
    for t in times:
        inside = wedge.state_at(t)
        if not inside:
            continue
        outside = half_space.state_at(t)
        violations += sum(1 for x in range(min(inside), max(inside) + 1) if (x in inside) != (x in outside))
    return violations


@dataclass
class SurvivalCurve:
    points: list[tuple[Fraction, EstimateReport]]
    survived: list[list[bool]]
    """Per replica, survival flag for each M."""
    paired_violations: int = 0

    @property
    def nondecreasing(self) -> bool:
        estimates = [report.estimate for _, report in self.points]
        return all(a <= b for a, b in zip(estimates, estimates[1:]))


def _survival_replica(task: tuple) -> list[bool]:
    lambda_, alpha_l, alpha_r, m_values, horizon, margin, master, replica = task
    window = wedge_window(alpha_r, max(m_values), horizon, margin)
    timeline = build_timeline(window, horizon, lambda_, 0.0, SeedRecord(master, Stream.SURVIVAL, replica))
    return [evolve(timeline, Wedge(alpha_l, alpha_r, M), wedge_initial(M)).survived for M in m_values]


def survival_curve(lambda_: float, alpha_l: Rational, alpha_r: Rational, M_list: Sequence[Rational], horizon: float,
                   replicas: int, seed: int = 0, *, window_margin: Optional[int] = None, threads: int = 1,
                   confidence: float = 0.95) -> SurvivalCurve:
    """Proportion of replicas with a nonempty wedge process at the horizon, started from [0, M], for each M.

    All widths are run on the same timeline per replica, so survival is monotone in M replica by replica.
    Points are returned in increasing M.
    """
    alpha_l, alpha_r = to_fraction(alpha_l), to_fraction(alpha_r)
    m_values = sorted(to_fraction(M) for M in M_list)
    if not m_values or any(M < 0 for M in m_values):
        raise InvalidArgumentError(f'Survival curve needs non-negative widths: {M_list}')
    Wedge(alpha_l, alpha_r, max(m_values))
    tasks = [(lambda_, alpha_l, alpha_r, m_values, horizon, window_margin or 1, seed, replica)
             for replica in range(replicas)]
    survived = run_replicas(_survival_replica, tasks, threads=threads)

    violations = sum(1 for flags in survived for a, b in zip(flags, flags[1:]) if a and not b)
    if violations:
        logger.warning(f'{violations} paired wedge-monotonicity violations')
    points = []
    for i, M in enumerate(m_values):
        points.append((M, proportion_report(sum(flags[i] for flags in survived), replicas,
                                            label=f'M={fraction_str(M)}', confidence=confidence)))
    return SurvivalCurve(points, survived, violations)


@dataclass
class EdgeGrowthReport:
    survivors: int
    replicas: int
    right: Optional[EstimateReport]
    left: Optional[EstimateReport]
    half_space_right: Optional[EstimateReport]
    nearest_neighbor_violations: int
    alpha_l: Fraction
    alpha_r: Fraction
    relative_tolerance: float
    tags: list[str] = field(default_factory=list)

    def _close(self, report: Optional[EstimateReport], target: Fraction) -> bool:
        return report is not None and abs(report.estimate - float(target)) <= self.relative_tolerance * float(target)

    @property
    def right_speed_ok(self) -> bool:
        return 'insufficient-survivors' not in self.tags and self._close(self.right, self.alpha_r)

    @property
    def left_speed_ok(self) -> bool:
        return 'insufficient-survivors' not in self.tags and self._close(self.left, self.alpha_l)

    @property
    def half_space_ok(self) -> bool:
        return self._close(self.half_space_right, self.alpha_r)

    def to_dict(self) -> dict[str, Any]:
        return {
            'survivors': self.survivors,
            'replicas': self.replicas,
            'right_speed': self.right.model_dump() if self.right else None,
            'left_speed': self.left.model_dump() if self.left else None,
            'half_space_right_speed': self.half_space_right.model_dump() if self.half_space_right else None,
            'alpha_l': fraction_str(self.alpha_l),
            'alpha_r': fraction_str(self.alpha_r),
            'relative_tolerance': self.relative_tolerance,
            'right_speed_ok': self.right_speed_ok,
            'left_speed_ok': self.left_speed_ok,
            'half_space_ok': self.half_space_ok,
            'nearest_neighbor_violations': self.nearest_neighbor_violations,
            'tags': self.tags,
        }


def _edge_growth_replica(task: tuple) -> tuple[Optional[tuple[int, int]], Optional[int], bool, int]:
    lambda_, alpha_l, alpha_r, M, horizon, margin, master, replica = task
    window = (-margin, wedge_window(alpha_r, M, horizon)[1])
    timeline = build_timeline(window, horizon, lambda_, 0.0, SeedRecord(master, Stream.EDGE_GROWTH, replica))
    wedge = evolve(timeline, Wedge(alpha_l, alpha_r, M), wedge_initial(M))
    half_space = evolve(timeline, HalfSpace(alpha_r, M), Configuration.half_line_below(floor_fraction(M)))
    violations = nearest_neighbor_violations(wedge, half_space, checkpoint_times(horizon))
    edges = (min(wedge.final), max(wedge.final)) if wedge.final else None
    half_right = max(half_space.final) if half_space.final else None
    return edges, half_right, half_space.edge_touched, violations


def edge_growth_check(lambda_: float, alpha_l: Rational, alpha_r: Rational, M: Rational, horizon: float, replicas: int,
                      seed: int = 0, *, window_margin: Optional[int] = None, threads: int = 1, min_survivors: int = 30,
                      relative_tolerance: float = 0.1, confidence: float = 0.95) -> EdgeGrowthReport:
    """Mean r_T/T and l_T/T of the surviving wedge processes, and mean right edge speed of the half-space process
    started from (-inf, M], on the same timelines.
    """
    alpha_l, alpha_r, M = to_fraction(alpha_l), to_fraction(alpha_r), to_fraction(M)
    Wedge(alpha_l, alpha_r, M)
    if horizon <= 0:
        return EdgeGrowthReport(0, replicas, None, None, None, 0, alpha_l, alpha_r, relative_tolerance,
                                ['undefined-at-zero-horizon'])
    margin = window_margin or default_margin(lambda_, horizon)
    tasks = [(lambda_, alpha_l, alpha_r, M, horizon, margin, seed, replica) for replica in range(replicas)]
    results = run_replicas(_edge_growth_replica, tasks, threads=threads)

    survivors = [edges for edges, _, _, _ in results if edges is not None]
    half_rights = [right / horizon for _, right, touched, _ in results if right is not None and not touched]
    half_discarded = sum(1 for _, _, touched, _ in results if touched)
    tags = []
    if len(survivors) < min_survivors:
        tags.append('insufficient-survivors')
        logger.warning(f'only {len(survivors)} surviving replicas (need {min_survivors})')
    right = mean_report([r / horizon for _, r in survivors], replicas - len(survivors), 'r_T/T', confidence) if survivors else None
    left = mean_report([l / horizon for l, _ in survivors], replicas - len(survivors), 'l_T/T', confidence) if survivors else None
    half_space = mean_report(half_rights, half_discarded, 'half-space r_T/T', confidence) if half_rights else None
    violations = sum(v for _, _, _, v in results)
    return EdgeGrowthReport(len(survivors), replicas, right, left, half_space, violations, alpha_l, alpha_r,
                            relative_tolerance, tags)


class SurvivalCurveExperiment(AbstractExperiment):
    name = 'survival-curve'

    def run(self, config: ExperimentConfig) -> ExperimentResult:
        config.require('lambda_', 'm_list')
        speeds = choose_speeds(config)
        curve = survival_curve(config.lambda_, speeds.alpha_l, speeds.alpha_r, config.fractions('m_list'),
                               config.horizon, config.replicas, config.seed, window_margin=config.window_margin,
                               threads=config.threads, confidence=config.confidence)
        rows = [(fraction_str(M), r.estimate, r.lower, r.upper, r.successes, r.replicas) for M, r in curve.points]
        largest = max(curve.points, key=lambda point: point[0])[1]
        report = {
            'lambda': config.lambda_,
            'horizon': config.horizon,
            'speeds': speeds.to_dict(),
            'points': [dict(report.model_dump(), M=fraction_str(M)) for M, report in curve.points],
            'paired_violations': curve.paired_violations,
            'survival_threshold': config.survival_threshold,
        }
        checks = {
            'nondecreasing-in-M': curve.nondecreasing,
            'paired-monotonicity': curve.paired_violations == 0,
            'largest-M-survival': largest.estimate >= config.survival_threshold,
        }
        table = Table(['M', 'proportion', 'lower', 'upper', 'survivors', 'replicas'], rows)
        return ExperimentResult(self.name, report, {'survival_curve': table}, checks, speeds.tags)


class EdgeGrowthExperiment(AbstractExperiment):
    name = 'edge-growth'

    def run(self, config: ExperimentConfig) -> ExperimentResult:
        config.require('lambda_', 'M')
        speeds = choose_speeds(config)
        growth = edge_growth_check(config.lambda_, speeds.alpha_l, speeds.alpha_r, config.fraction('M'), config.horizon,
                                   config.replicas, config.seed, window_margin=config.window_margin,
                                   threads=config.threads, min_survivors=config.min_survivors,
                                   relative_tolerance=config.relative_tolerance, confidence=config.confidence)
        report = {'lambda': config.lambda_, 'horizon': config.horizon, 'M': config.M, 'speeds': speeds.to_dict(),
                  **growth.to_dict()}
        checks = {
            'right-edge-speed': growth.right_speed_ok,
            'left-edge-speed': growth.left_speed_ok,
            'half-space-right-edge-speed': growth.half_space_ok,
            'nearest-neighbor-identity': growth.nearest_neighbor_violations == 0,
        }
        return ExperimentResult(self.name, report, {}, checks, speeds.tags + growth.tags)


def register() -> None:
    factory.register(SurvivalCurveExperiment.name, SurvivalCurveExperiment)
    factory.register(EdgeGrowthExperiment.name, EdgeGrowthExperiment)
