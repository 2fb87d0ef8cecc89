"""Coupling of the wedge process with the process started from the upper invariant measure."""
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

from wedgecp.contact import Configuration, default_margin, evolve, sample_upper_invariant
from wedgecp.definitions import ExperimentConfig
from wedgecp.errors import InvalidArgumentError
from wedgecp.experiments import factory
from wedgecp.experiments.experiment import (
    AbstractExperiment, EstimateReport, ExperimentResult, Table, choose_speeds, mean_report
)
from wedgecp.experiments.survival import checkpoint_times, wedge_initial, wedge_window
from wedgecp.regions import FullSpace, HalfSpace, Wedge
from wedgecp.replicas import run_replicas
from wedgecp.substrate import SeedRecord, Stream, build_timeline
from wedgecp.utils import Rational, floor_fraction, to_fraction

logger = logging.getLogger(__name__)


@dataclass
class CheckpointSummary:
    time: float
    survivors: int
    disagreement: Optional[EstimateReport]
    growth: EstimateReport
    nearest_neighbor_violations: int

    def to_dict(self) -> dict[str, Any]:
        return {
            'time': self.time,
            'survivors': self.survivors,
            'disagreement': self.disagreement.model_dump() if self.disagreement else None,
            'growth': self.growth.model_dump(),
            'nearest_neighbor_violations': self.nearest_neighbor_violations,
        }


@dataclass
class CouplingReport:
    checkpoints: list[CheckpointSummary]
    survivors: int
    replicas: int
    right_speed: Optional[EstimateReport]
    growth_speeds: tuple[float, float]
    burn_in: float
    tags: list[str] = field(default_factory=list)

    @property
    def final(self) -> CheckpointSummary:
        return self.checkpoints[-1]

    @property
    def nearest_neighbor_violations(self) -> int:
        return sum(checkpoint.nearest_neighbor_violations for checkpoint in self.checkpoints)

    def to_dict(self) -> dict[str, Any]:
        return {
            'checkpoints': [checkpoint.to_dict() for checkpoint in self.checkpoints],
            'survivors': self.survivors,
            'replicas': self.replicas,
            'right_speed': self.right_speed.model_dump() if self.right_speed else None,
            'growth_speeds': list(self.growth_speeds),
            'burn_in': self.burn_in,
            'nearest_neighbor_violations': self.nearest_neighbor_violations,
            'tags': self.tags,
        }


def _coupling_replica(task: tuple) -> dict[str, Any]:
    lambda_, alpha_l, alpha_r, M, horizon, burn_in, margin, times, growth_speeds, master, replica = task
    window = wedge_window(alpha_r, M, horizon, margin)
    # nu is sampled on its own stream; the coupled processes share the timeline below
    nu = sample_upper_invariant(lambda_, window, burn_in, SeedRecord(master, Stream.UPPER_INVARIANT, replica))
    timeline = build_timeline(window, horizon, lambda_, 0.0, SeedRecord(master, Stream.COUPLING, replica))
    wedge = evolve(timeline, Wedge(alpha_l, alpha_r, M), wedge_initial(M))
    stationary = evolve(timeline, FullSpace(), Configuration(nu.sites))
    half_space = evolve(timeline, HalfSpace(alpha_r, M), Configuration.half_line_below(floor_fraction(M)))

    a, b = growth_speeds
    rows = []
    for t in times:
        inside = wedge.state_at(t)
        coupled = stationary.state_at(t)
        growth = sum(1 for x in coupled if a * t <= x <= b * t)
        if not inside:
            rows.append((False, None, growth, 0))
            continue
        outside = half_space.state_at(t)
        lo, hi = min(inside), max(inside)
        disagree = sum(1 for x in range(lo, hi + 1) if (x in inside) != (x in coupled))
        violations = sum(1 for x in range(lo, hi + 1) if (x in inside) != (x in outside))
        rows.append((True, disagree / (hi - lo + 1), growth, violations))
    right = max(wedge.final) if wedge.final else None
    return {'rows': rows, 'right': right}


def coupling_check(lambda_: float, alpha_l: Rational, alpha_r: Rational, M: Rational, horizon: float, burn_in: float,
                   replicas: int, seed: int = 0, *, checkpoints: Optional[Sequence[float]] = None,
                   growth_speeds: Optional[tuple[float, float]] = None, window_margin: Optional[int] = None,
                   threads: int = 1, min_survivors: int = 30, confidence: float = 0.95) -> CouplingReport:
    """Runs the wedge process and the process started from an approximate sample of nu on the same timeline.

    At each checkpoint, among replicas whose wedge process is alive, reports the fraction of [l_t, r_t] where the
    two processes disagree and the nearest-neighbor identity violations against the half-space process; for
    every replica, reports |xi^nu_t intersected with [a t, b t]|.
    """
    alpha_l, alpha_r, M = to_fraction(alpha_l), to_fraction(alpha_r), to_fraction(M)
    Wedge(alpha_l, alpha_r, M)
    times = checkpoint_times(horizon, checkpoints)
    if not times or times[0] < 0 or times[-1] > horizon:
        raise InvalidArgumentError(f'Checkpoints must lie in [0, {horizon}]: {checkpoints}')
    growth_speeds = growth_speeds or (float(alpha_l), float(alpha_r))
    margin = window_margin or default_margin(lambda_, horizon)
    tasks = [(lambda_, alpha_l, alpha_r, M, horizon, burn_in, margin, times, growth_speeds, seed, replica)
             for replica in range(replicas)]
    results = run_replicas(_coupling_replica, tasks, threads=threads)

    summaries = []
    for i, t in enumerate(times):
        rows = [result['rows'][i] for result in results]
        alive = [row for row in rows if row[0]]
        disagreement = mean_report([row[1] for row in alive], replicas - len(alive), f'disagreement t={t:g}',
                                   confidence) if alive else None
        growth = mean_report([row[2] for row in rows], 0, f'growth t={t:g}', confidence)
        summaries.append(CheckpointSummary(t, len(alive), disagreement, growth, sum(row[3] for row in alive)))

    rights = [result['right'] / horizon for result in results if result['right'] is not None]
    tags = []
    if len(rights) < min_survivors:
        tags.append('insufficient-survivors')
        logger.warning(f'only {len(rights)} surviving replicas (need {min_survivors})')
    right_speed = mean_report(rights, replicas - len(rights), 'r_T/T', confidence) if rights else None
    return CouplingReport(summaries, len(rights), replicas, right_speed, growth_speeds, burn_in, tags)


class CouplingExperiment(AbstractExperiment):
    name = 'coupling-check'

    def run(self, config: ExperimentConfig) -> ExperimentResult:
        config.require('lambda_', 'M')
        speeds = choose_speeds(config)
        coupling = coupling_check(config.lambda_, speeds.alpha_l, speeds.alpha_r, config.fraction('M'), config.horizon,
                                  config.burn_in, config.replicas, config.seed, checkpoints=config.checkpoints,
                                  growth_speeds=config.growth_speeds, window_margin=config.window_margin,
                                  threads=config.threads, min_survivors=config.min_survivors,
                                  confidence=config.confidence)
        final = coupling.final.disagreement
        right = coupling.right_speed
        alpha_r = float(speeds.alpha_r)
        enough = 'insufficient-survivors' not in coupling.tags
        checks = {
            'final-disagreement': enough and final is not None and final.estimate <= config.disagreement_threshold,
            'right-edge-speed': enough and right is not None
                and abs(right.estimate - alpha_r) <= config.relative_tolerance * alpha_r,
            'nearest-neighbor-identity': coupling.nearest_neighbor_violations == 0,
        }
        rows = []
        for checkpoint in coupling.checkpoints:
            d = checkpoint.disagreement
            rows.append((checkpoint.time, checkpoint.survivors, d.estimate if d else math.nan,
                         d.stderr if d else math.nan, checkpoint.growth.estimate, checkpoint.nearest_neighbor_violations))
        report = {'lambda': config.lambda_, 'horizon': config.horizon, 'M': config.M, 'speeds': speeds.to_dict(),
                  'disagreement_threshold': config.disagreement_threshold, **coupling.to_dict()}
        table = Table(['t', 'survivors', 'disagreement', 'stderr', 'growth', 'nearest_neighbor_violations'], rows)
        return ExperimentResult(self.name, report, {'checkpoints': table}, checks, speeds.tags + coupling.tags)


def register() -> None:
    factory.register(CouplingExperiment.name, CouplingExperiment)
