"""Block events: probability of O_00 as M grows, and open paths of the renormalized percolation field."""
import itertools
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Optional, Sequence

import numpy as np

from wedgecp.blocks import (
    IntegerSolution, YRegion, assemble_y_region, common_source, crossings, lemma_bound, open_path, open_path_realized,
    percolation_field, snap_block_scale, solve_integer_wedge
)
from wedgecp.contact import estimate_edge_speed
from wedgecp.definitions import ExperimentConfig
from wedgecp.errors import InvalidArgumentError
from wedgecp.experiments import factory
from wedgecp.experiments.experiment import (
    AbstractExperiment, EstimateReport, ExperimentResult, Table, paired_trend, proportion_report
)
from wedgecp.replicas import run_replicas
from wedgecp.substrate import SeedRecord, Stream, build_timeline
from wedgecp.utils import Rational, fraction_str, to_fraction

logger = logging.getLogger(__name__)

RATIONAL_SPEED_DENOMINATOR = 12


def rational_speed(alpha_hat: float, max_denominator: int = RATIONAL_SPEED_DENOMINATOR) -> Fraction:
    """Small-denominator rational close to an estimated speed."""
    alpha = Fraction(alpha_hat).limit_denominator(max_denominator)
    if alpha <= 0:
        raise InvalidArgumentError(f'Estimated edge speed is not positive: {alpha_hat}')
    return alpha


def regions_window(regions: Sequence[YRegion], K: int) -> tuple[tuple[int, int], float]:
    """Window and horizon holding every translate Y_jk, k <= K, of every region, with one spare site per side."""
    extents = [region.extent(K) for region in regions]
    x_lo = min(lo for lo, _, _ in extents) - 1
    x_hi = max(hi for _, hi, _ in extents) + 1
    top = max(top for _, _, top in extents)
    return (x_lo, x_hi), float(math.ceil(top))


def snapped_scales(M_list: Sequence[Rational], alpha: Fraction, beta: Fraction) -> tuple[list[Fraction], list[str]]:
    scales, tags = [], []
    for M in M_list:
        M = to_fraction(M)
        snapped = snap_block_scale(M, alpha, beta)
        if snapped != M:
            tags.append(f'M-snapped:{fraction_str(M)}->{fraction_str(snapped)}')
            logger.info(f'block scale {M} snapped to {snapped} so that M beta/2 and M alpha are integers')
        scales.append(snapped)
    return scales, tags


@dataclass
class Lemma2Point:
    M: Fraction
    count: int
    o_event: EstimateReport
    crossings: list[EstimateReport]
    single_crossing: EstimateReport
    product: float
    product_se: float
    common_source: Optional[EstimateReport] = None
    """Share of the O_00 replicas where one bottom-edge site reaches the top edge of every parallelogram."""

    def bound_ok(self, lower: float) -> bool:
        sigma = math.sqrt(self.o_event.stderr ** 2 + self.product_se ** 2)
        return self.o_event.estimate >= lower - 3 * sigma

    @property
    def product_bound_ok(self) -> bool:
        return self.bound_ok(self.product)

    @property
    def single_bound_ok(self) -> bool:
        p, n = self.single_crossing.estimate, self.count
        se = n * p ** (n - 1) * self.single_crossing.stderr if p > 0 else 0.0
        sigma = math.sqrt(self.o_event.stderr ** 2 + se ** 2)
        return self.o_event.estimate >= p ** n - 3 * sigma

    def to_dict(self) -> dict[str, Any]:
        return {
            'M': fraction_str(self.M),
            'count': self.count,
            'o_event': self.o_event.model_dump(),
            'crossings': [report.model_dump() for report in self.crossings],
            'single_crossing': self.single_crossing.model_dump(),
            'single_crossing_power': self.single_crossing.estimate ** self.count,
            'crossing_product': self.product,
            'crossing_product_se': self.product_se,
            'product_bound_ok': self.product_bound_ok,
            'single_bound_ok': self.single_bound_ok,
            'common_source': self.common_source.model_dump() if self.common_source else None,
        }


@dataclass
class Lemma2Report:
    points: list[Lemma2Point]
    trend: dict[str, Any]
    bound: int
    window: tuple[int, int]
    horizon: float
    tags: list[str] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            'points': [point.to_dict() for point in self.points],
            'trend': self.trend,
            'quoted_bound': self.bound,
            'window': list(self.window),
            'horizon': self.horizon,
            'tags': self.tags,
        }


def _lemma2_replica(task: tuple) -> list[tuple[list[bool], bool]]:
    lambda_, ell, d, scales, alpha, beta, window, horizon, master, replica = task
    timeline = build_timeline(window, horizon, lambda_, 0.0, SeedRecord(master, Stream.PERCOLATION, replica))
    out = []
    for M in scales:
        region = assemble_y_region(ell, d, M, alpha, beta)
        flags = crossings(timeline, region)
        out.append((flags, all(flags) and common_source(timeline, region) is not None))
    return out


def lemma2_check(lambda_: float, ell: int, d: int, M_list: Sequence[Rational], alpha: Rational, beta: Rational,
                 replicas: int, seed: int = 0, *, threads: int = 1, confidence: float = 0.95) -> Lemma2Report:
    """Estimates P(O_00) for each M with one timeline per replica shared by all M, and compares it with the product
    of the single-parallelogram crossing probabilities and with P(crossing R_00)^n. Points are returned in increasing M.
    """
    alpha, beta = to_fraction(alpha), to_fraction(beta)
    scales, tags = snapped_scales(sorted(M_list, key=to_fraction), alpha, beta)
    regions = [assemble_y_region(ell, d, M, alpha, beta) for M in scales]
    bound = lemma_bound(ell, d)
    if regions[0].count > bound:
        tags.append('count-above-quoted-bound')
        logger.warning(f'Y-region (ell={ell}, d={d}) has {regions[0].count} distinct parallelograms, above the '
                       f'quoted bound {bound}; the enumerated count is used.')
    window, horizon = regions_window(regions, 0)
    tasks = [(lambda_, ell, d, scales, alpha, beta, window, horizon, seed, replica) for replica in range(replicas)]
    results = run_replicas(_lemma2_replica, tasks, threads=threads)

    points, columns = [], []
    for i, (M, region) in enumerate(zip(scales, regions)):
        matrix = np.array([result[i][0] for result in results], dtype=bool)
        o_flags = matrix.all(axis=1)
        common = sum(1 for result in results if result[i][1])
        columns.append(o_flags.astype(float).tolist())
        parts = [proportion_report(int(matrix[:, n].sum()), replicas, label=p.label, confidence=confidence)
                 for n, p in enumerate(region.parallelograms)]
        product = math.prod(part.estimate for part in parts)
        relative = sum((part.stderr / part.estimate) ** 2 for part in parts if part.estimate > 0)
        points.append(Lemma2Point(M, region.count,
                                  proportion_report(int(o_flags.sum()), replicas, label='O_00', confidence=confidence),
                                  parts, parts[0], product, product * math.sqrt(relative),
                                  proportion_report(common, int(o_flags.sum()), label='common source',
                                                    confidence=confidence) if o_flags.any() else None))
    return Lemma2Report(points, paired_trend(columns), bound, window, horizon, tags)


@dataclass
class OmegaReport:
    solution: IntegerSolution
    points: list[dict[str, Any]]
    trend: dict[str, Any]
    K: int
    unrealized_paths: int
    one_dependence: list[dict[str, Any]]
    window: tuple[int, int]
    horizon: float
    tags: list[str] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            'solution': self.solution.to_dict(),
            'K': self.K,
            'points': self.points,
            'trend': self.trend,
            'unrealized_paths': self.unrealized_paths,
            'one_dependence': self.one_dependence,
            'window': list(self.window),
            'horizon': self.horizon,
            'tags': self.tags,
        }


def _omega_replica(task: tuple) -> list[tuple[bool, bool, list[int]]]:
    lambda_, ell, d, scales, alpha, beta, K, window, horizon, master, replica = task
    timeline = build_timeline(window, horizon, lambda_, 0.0, SeedRecord(master, Stream.PERCOLATION, replica))
    out = []
    for M in scales:
        region = assemble_y_region(ell, d, M, alpha, beta)
        field_ = percolation_field(timeline, region, K)
        path = open_path(field_)
        realized = path is None or open_path_realized(timeline, region, path)
        out.append((path is not None, realized, [value for _, _, value in field_.rows()]))
    return out


def far_pairs(K: int, limit: int = 10) -> list[tuple[tuple[int, int], tuple[int, int]]]:
    """Lattice point pairs at distance > 1, widest first."""
    points = [(j, k) for k in range(K + 1) for j in range(-k, k + 1, 2)]
    pairs = [(a, b) for a, b in itertools.combinations(points, 2)
             if (abs(a[0] - b[0]) + abs(a[1] - b[1])) / 2 > 1]
    pairs.sort(key=lambda pair: -(abs(pair[0][0] - pair[1][0]) + abs(pair[0][1] - pair[1][1])))
    return pairs[:limit]


def correlation(a: np.ndarray, b: np.ndarray) -> Optional[float]:
    if a.std() == 0 or b.std() == 0:
        return None
    return float(np.corrcoef(a, b)[0, 1])


def omega_infinity_check(lambda_: float, solution: IntegerSolution, M_list: Sequence[Rational], K: int, replicas: int,
                         seed: int = 0, *, threads: int = 1, confidence: float = 0.95) -> OmegaReport:
    """Frequency of an open path from (0, 0) to row K of the percolation field built from
    Y(ell', d', M/(alpha(ell'+3))), for each M. Points are returned in increasing M.
    """
    alpha, beta = solution.alpha, solution.beta
    ell, d = solution.ell_prime, solution.d_prime
    block_scales = sorted(to_fraction(M) / (alpha * (ell + 3)) for M in M_list)
    scales, tags = snapped_scales(block_scales, alpha, beta)
    regions = [assemble_y_region(ell, d, M, alpha, beta) for M in scales]
    window, horizon = regions_window(regions, K)
    tasks = [(lambda_, ell, d, scales, alpha, beta, K, window, horizon, seed, replica) for replica in range(replicas)]
    results = run_replicas(_omega_replica, tasks, threads=threads)

    points, columns, unrealized = [], [], 0
    lattice = [(j, k) for k in range(K + 1) for j in range(-k, k + 1, 2)]
    one_dependence = []
    for i, M in enumerate(scales):
        opened = [result[i][0] for result in results]
        unrealized += sum(1 for result in results if not result[i][1])
        columns.append([float(flag) for flag in opened])
        field_values = np.array([result[i][2] for result in results], dtype=float)
        report = proportion_report(sum(opened), replicas, label=f'open path to row {K}', confidence=confidence)
        points.append({'M_block': fraction_str(M), 'M': fraction_str(M * alpha * (ell + 3)),
                       'open_path': report.model_dump(),
                       'mean_U': float(field_values.mean()) if field_values.size else math.nan})
        for a, b in far_pairs(K):
            rho = correlation(field_values[:, lattice.index(a)], field_values[:, lattice.index(b)])
            one_dependence.append({'M_block': fraction_str(M), 'a': list(a), 'b': list(b), 'correlation': rho,
                                   'within_3_sigma': rho is None or abs(rho) <= 3 / math.sqrt(replicas)})
    if unrealized:
        logger.warning(f'{unrealized} open percolation paths without an active path along the visited regions')
    return OmegaReport(solution, points, paired_trend(columns), K, unrealized, one_dependence, window, horizon, tags)


def percolation_parameters(config: ExperimentConfig) -> tuple[Fraction, list[str]]:
    """alpha from the config, or the estimated edge speed rounded to a small-denominator rational."""
    tags = []
    alpha = config.fraction('alpha')
    if alpha is None:
        config.require('lambda_')
        alpha_hat = config.alpha_hat
        if alpha_hat is None:
            estimate = estimate_edge_speed(config.lambda_, config.speed_horizon or config.horizon,
                                           config.speed_replicas or config.replicas, config.seed,
                                           window_margin=config.window_margin, threads=config.threads)
            alpha_hat = estimate.alpha_hat
        alpha = rational_speed(alpha_hat)
        tags.append(f'alpha-from-edge-speed:{fraction_str(alpha)}')
    return alpha, tags


class Lemma2Experiment(AbstractExperiment):
    name = 'lemma2'

    def run(self, config: ExperimentConfig) -> ExperimentResult:
        config.require('lambda_', 'ell', 'd', 'm_list')
        alpha, tags = percolation_parameters(config)
        beta = config.fraction('beta') if config.beta is not None else alpha / 4
        lemma2 = lemma2_check(config.lambda_, config.ell, config.d, config.fractions('m_list'), alpha, beta,
                              config.replicas, config.seed, threads=config.threads, confidence=config.confidence)
        rows = [(fraction_str(p.M), p.count, p.o_event.estimate, p.o_event.lower, p.o_event.upper, p.product,
                 p.single_crossing.estimate ** p.count, p.common_source.estimate if p.common_source else None)
                for p in lemma2.points]
        report = {'lambda': config.lambda_, 'ell': config.ell, 'd': config.d, 'alpha': fraction_str(alpha),
                  'beta': fraction_str(beta), **lemma2.to_dict()}
        checks = {
            'nondecreasing-in-M': lemma2.trend['nondecreasing'],
            'positive-correlation-bound': all(point.product_bound_ok for point in lemma2.points),
            'single-crossing-power-bound': all(point.single_bound_ok for point in lemma2.points),
        }
        table = Table(['M', 'count', 'p_o_event', 'lower', 'upper', 'crossing_product', 'single_crossing_power',
                       'common_source_share'], rows)
        return ExperimentResult(self.name, report, {'lemma2': table}, checks, tags + lemma2.tags)


class OmegaInfinityExperiment(AbstractExperiment):
    name = 'omega-infinity'

    def run(self, config: ExperimentConfig) -> ExperimentResult:
        config.require('lambda_', 'm_list')
        alpha, tags = percolation_parameters(config)
        low, high = (to_fraction(str(fraction)) for fraction in config.speed_fractions)
        alpha_l = config.fraction('alpha_l') if config.alpha_l is not None else alpha * low
        alpha_r = config.fraction('alpha_r') if config.alpha_r is not None else alpha * high
        solution = solve_integer_wedge(alpha, alpha_l, alpha_r)
        omega = omega_infinity_check(config.lambda_, solution, config.fractions('m_list'), config.k_rows,
                                     config.replicas, config.seed, threads=config.threads, confidence=config.confidence)
        rows = [(p['M'], p['M_block'], p['open_path']['estimate'], p['open_path']['interval'][0],
                 p['open_path']['interval'][1], p['mean_U']) for p in omega.points]
        report = {'lambda': config.lambda_, **omega.to_dict()}
        checks = {
            'nondecreasing-in-M': omega.trend['nondecreasing'],
            'open-path-realized': omega.unrealized_paths == 0,
        }
        table = Table(['M', 'M_block', 'p_open_path', 'lower', 'upper', 'mean_U'], rows)
        return ExperimentResult(self.name, report, {'omega_infinity': table}, checks, tags + omega.tags)


def register() -> None:
    factory.register(Lemma2Experiment.name, Lemma2Experiment)
    factory.register(OmegaInfinityExperiment.name, OmegaInfinityExperiment)
