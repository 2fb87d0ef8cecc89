"""Weak coexistence of bushes under trees, and the distributional oracle of the GBT evolutions."""
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Optional, Sequence

import numpy as np

from wedgecp.contact import Configuration, default_margin, estimate_edge_speed, evolve
from wedgecp.definitions import ExperimentConfig
from wedgecp.errors import InvalidArgumentError
from wedgecp.experiments import factory
from wedgecp.experiments.experiment import (
    LAMBDA_C_REFERENCE, AbstractExperiment, EstimateReport, ExperimentResult, Table, product_check, proportion_report
)
from wedgecp.gbt import GbtConfiguration, evolve_gbt, evolve_gbt_direct, gbt_marginals, one_only_probability
from wedgecp.regions import Wedge
from wedgecp.replicas import run_replicas
from wedgecp.substrate import SeedRecord, Stream, build_timeline
from wedgecp.utils import Rational, ceil_fraction, floor_fraction, fraction_str, to_fraction

logger = logging.getLogger(__name__)

DEFAULT_WEDGE_WIDTH = Fraction(3)
MAX_ORACLE_SITES = 7


@dataclass
class OmegaEvents:
    """Wedge W = W(alpha_l, alpha_r, M) and the starting point x0 of the block of sites reached at t0 = x0/alpha_l."""
    alpha_l: Fraction
    alpha_r: Fraction
    M: Fraction
    x0: Fraction = Fraction(1)

    def __post_init__(self):
        self.wedge = Wedge(self.alpha_l, self.alpha_r, self.M)
        if self.x0 <= 0:
            raise InvalidArgumentError(f'x0 must be positive: {self.x0}')

    @property
    def t0(self) -> Fraction:
        return self.x0 / self.alpha_l

    @property
    def block(self) -> list[int]:
        return list(range(ceil_fraction(self.x0), floor_fraction(self.x0 + self.M) + 1))

    def to_dict(self) -> dict[str, Any]:
        return {
            'alpha_l': fraction_str(self.alpha_l),
            'alpha_r': fraction_str(self.alpha_r),
            'M': fraction_str(self.M),
            'x0': fraction_str(self.x0),
            't0': fraction_str(self.t0),
        }


@dataclass
class CoexistenceReport:
    bushes: EstimateReport
    omega: dict[str, EstimateReport]
    independence: dict[str, Any]
    events: OmegaEvents
    threshold: float
    tags: list[str] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            'bushes': self.bushes.model_dump(),
            'omega': {name: report.model_dump() for name, report in self.omega.items()},
            'independence': self.independence,
            'wedge': self.events.to_dict(),
            'threshold': self.threshold,
            'tags': self.tags,
        }


def _coexistence_replica(task: tuple) -> Optional[tuple[bool, bool, bool, bool]]:
    lambda1, lambda2, horizon, threshold, events, margin, master, replica = task
    timeline = build_timeline((-margin, margin), horizon, lambda1, one_only_probability(lambda1, lambda2),
                              SeedRecord(master, Stream.GBT, replica))
    trajectory = evolve_gbt(timeline, lambda1, lambda2, GbtConfiguration.invasion_initial())
    if trajectory.edge_touched:
        return None
    bushes = trajectory.final_ones >= threshold

    # 2's come from x < 0 and can only enter the wedge by a birth inside it
    no_trees = not any(state == 2 and events.wedge.contains(x, t) for t, x, state in trajectory.change_rows())
    t0 = events.t0
    reach = evolve(timeline, events.wedge, Configuration.single(0), end_time=t0)
    block = events.block
    reached = set(block) <= reach.final
    growth = evolve(timeline, events.wedge, Configuration.interval(block[0], block[-1]), start_time=t0)
    grows = len(growth.final) >= threshold
    return bushes, no_trees, reached, grows


def coexistence_wedge(lambda1: float, lambda2: float, horizon: float, replicas: int, seed: int = 0,
                      threads: int = 1) -> tuple[Fraction, Fraction]:
    """Speeds at one and two thirds of the way from the estimated alpha(lambda2) to alpha(lambda1)."""
    slow = estimate_edge_speed(lambda2, horizon, replicas, seed, threads=threads).alpha_hat
    fast = estimate_edge_speed(lambda1, horizon, replicas, seed, threads=threads).alpha_hat
    if not 0 < slow < fast:
        raise InvalidArgumentError(f'Edge speed estimates do not satisfy 0 < alpha(lambda2) < alpha(lambda1): '
                                   f'{slow}, {fast}')
    return to_fraction(slow + (fast - slow) / 3), to_fraction(slow + 2 * (fast - slow) / 3)


def gbt_coexistence(lambda1: float, lambda2: float, horizon: float, replicas: int, threshold: float, seed: int = 0, *,
                    alpha_l: Optional[Rational] = None, alpha_r: Optional[Rational] = None, M: Rational = DEFAULT_WEDGE_WIDTH,
                    x0: Rational = 1, window_margin: Optional[int] = None, threads: int = 1,
                    confidence: float = 0.95) -> CoexistenceReport:
    """P(|zeta_T|_1 >= threshold) from 2's on x < 0 and a 1 at the origin, with the frequencies of the events
    no 2's enter W (omega_1), every site of [x0, x0 + M] is reached inside W at t0 (omega_2), and the
    W-restricted process from those sites holds at least `threshold` sites at T (omega_3).
    """
    if not lambda1 > lambda2 > 0:
        raise InvalidArgumentError(f'GBT rates must satisfy lambda1 > lambda2 > 0: {lambda1}, {lambda2}')
    tags = []
    if lambda2 <= LAMBDA_C_REFERENCE:
        tags.append('lambda2-not-supercritical')
        logger.warning(f'lambda2={lambda2} is not above the simulated critical value {LAMBDA_C_REFERENCE}.')
    if alpha_l is None or alpha_r is None:
        alpha_l, alpha_r = coexistence_wedge(lambda1, lambda2, horizon, replicas, seed, threads)
        tags.append('wedge-from-edge-speeds')
    events = OmegaEvents(to_fraction(alpha_l), to_fraction(alpha_r), to_fraction(M), to_fraction(x0))
    if events.M <= 2:
        tags.append('wedge-width-not-above-2')
    if events.t0 > horizon:
        raise InvalidArgumentError(f'x0/alpha_l = {events.t0} exceeds the horizon {horizon}.')

    margin = max(window_margin or default_margin(lambda1, horizon),
                 ceil_fraction(events.M + events.alpha_r * Fraction(horizon)) + 1)
    tasks = [(lambda1, lambda2, horizon, threshold, events, margin, seed, replica) for replica in range(replicas)]
    results = run_replicas(_coexistence_replica, tasks, threads=threads)
    kept = [result for result in results if result is not None]
    discarded = len(results) - len(kept)
    if not kept:
        raise InvalidArgumentError('Every replica touched the window boundary; increase the window margin.')

    def proportion(index: Optional[int], label: str) -> EstimateReport:
        hits = sum(all(result[1:]) if index is None else result[index] for result in kept)
        return proportion_report(hits, len(kept), discarded, label, confidence)

    omega = {
        'omega_1': proportion(1, 'no 2 enters the wedge'),
        'omega_2': proportion(2, 'block reached at t0'),
        'omega_3': proportion(3, 'wedge growth from the block'),
        'omega_all': proportion(None, 'all three events'),
    }
    independence = product_check(omega['omega_all'], [omega['omega_1'], omega['omega_2'], omega['omega_3']])
    return CoexistenceReport(proportion(0, f'|zeta_T|_1 >= {threshold:g}'), omega, independence, events, threshold, tags)


class GbtCoexistenceExperiment(AbstractExperiment):
    name = 'gbt-coexistence'

    def run(self, config: ExperimentConfig) -> ExperimentResult:
        config.require('lambda1', 'lambda2')
        coexistence = gbt_coexistence(config.lambda1, config.lambda2, config.horizon, config.replicas, config.threshold,
                                      config.seed, alpha_l=config.fraction('alpha_l'), alpha_r=config.fraction('alpha_r'),
                                      M=config.fraction('M') or DEFAULT_WEDGE_WIDTH, x0=config.fraction('x0'),
                                      window_margin=config.window_margin, threads=config.threads,
                                      confidence=config.confidence)
        report = {'lambda1': config.lambda1, 'lambda2': config.lambda2, 'horizon': config.horizon,
                  **coexistence.to_dict()}
        checks = {
            'bushes-positive': coexistence.bushes.lower > 0,
            'omega-independence': coexistence.independence['within_tolerance'],
        }
        rows = [(name, r.estimate, r.lower, r.upper, r.successes, r.replicas, r.discarded)
                for name, r in [('bushes', coexistence.bushes), *coexistence.omega.items()]]
        table = Table(['event', 'proportion', 'lower', 'upper', 'successes', 'replicas', 'discarded'], rows)
        return ExperimentResult(self.name, report, {'events': table}, checks, coexistence.tags)


@dataclass
class MarginalComparison:
    expected: np.ndarray
    observed: np.ndarray
    replicas: int
    method: str

    @property
    def z_scores(self) -> np.ndarray:
        sigma = np.sqrt(self.expected * (1 - self.expected) / self.replicas)
        diff = np.abs(self.observed - self.expected)
        with np.errstate(divide='ignore', invalid='ignore'):
            z = np.where(sigma > 0, diff / np.where(sigma > 0, sigma, 1.0), np.where(diff > 0, np.inf, 0.0))
        return z

    @property
    def passed(self) -> bool:
        return bool(np.all(self.z_scores <= 3.0))

    def rows(self) -> list[tuple[str, int, int, float, float, float]]:
        z = self.z_scores
        return [(self.method, x, s, float(self.expected[x, s]), float(self.observed[x, s]), float(z[x, s]))
                for x in range(self.expected.shape[0]) for s in range(3)]


def _oracle_replica(task: tuple) -> tuple[list[int], list[int]]:
    lambda1, lambda2, horizon, initial, master, replica = task
    n = len(initial)
    configuration = GbtConfiguration.from_sequence(initial)
    timeline = build_timeline((0, n - 1), horizon, lambda1, one_only_probability(lambda1, lambda2),
                              SeedRecord(master, Stream.GBT, replica))
    graphical = evolve_gbt(timeline, lambda1, lambda2, configuration).final
    direct = evolve_gbt_direct(lambda1, lambda2, configuration, horizon, SeedRecord(master, Stream.GBT, replica),
                               (0, n - 1)).final
    return [graphical.get(x, 0) for x in range(n)], [direct.get(x, 0) for x in range(n)]


def gbt_oracle(lambda1: float, lambda2: float, horizon: float, initial: Sequence[int], replicas: int, seed: int = 0,
               threads: int = 1) -> list[MarginalComparison]:
    """Single-site marginals of the graphical and the direct evolutions against the matrix exponential."""
    if not 1 <= len(initial) <= MAX_ORACLE_SITES:
        raise InvalidArgumentError(f'The matrix exponential oracle handles 1 to {MAX_ORACLE_SITES} sites: {len(initial)}')
    expected = gbt_marginals(initial, lambda1, lambda2, horizon)
    tasks = [(lambda1, lambda2, horizon, list(initial), seed, replica) for replica in range(replicas)]
    results = run_replicas(_oracle_replica, tasks, threads=threads)
    comparisons = []
    for method, index in (('graphical', 0), ('direct', 1)):
        counts = np.zeros_like(expected)
        for result in results:
            for x, s in enumerate(result[index]):
                counts[x, s] += 1
        comparisons.append(MarginalComparison(expected, counts / replicas, replicas, method))
    return comparisons


def parse_sequence(text: Optional[str], n_sites: int) -> list[int]:
    """"0,1,2,1,0" style site states; defaults to a 2 at the left end and a 1 in the middle."""
    if not text:
        initial = [0] * n_sites
        initial[0], initial[n_sites // 2] = 2, 1
        return initial
    try:
        initial = [int(v) for v in text.split(',')]
    except ValueError:
        raise InvalidArgumentError(f'Invalid GBT state sequence: {text!r}') from None
    GbtConfiguration.from_sequence(initial)
    return initial


class GbtOracleExperiment(AbstractExperiment):
    name = 'gbt-oracle'

    def run(self, config: ExperimentConfig) -> ExperimentResult:
        config.require('lambda1', 'lambda2')
        initial = parse_sequence(config.initial, config.sites)
        comparisons = gbt_oracle(config.lambda1, config.lambda2, config.horizon, initial, config.replicas, config.seed,
                                 config.threads)
        report = {
            'lambda1': config.lambda1,
            'lambda2': config.lambda2,
            'horizon': config.horizon,
            'initial': initial,
            'replicas': config.replicas,
            'max_z': {c.method: float(np.max(c.z_scores)) for c in comparisons},
        }
        checks = {f'{c.method}-marginals': c.passed for c in comparisons}
        rows = [row for c in comparisons for row in c.rows()]
        table = Table(['method', 'x', 'state', 'expected', 'observed', 'z'], rows)
        return ExperimentResult(self.name, report, {'marginals': table}, checks)


def register() -> None:
    factory.register(GbtCoexistenceExperiment.name, GbtCoexistenceExperiment)
    factory.register(GbtOracleExperiment.name, GbtOracleExperiment)
