"""Exact oracles: containment of the block construction and evolution against active-path reachability."""
import logging
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Any, Sequence

from wedgecp.blocks import IntegerSolution, solve_integer_wedge, verify_containment
from wedgecp.contact import Configuration, evolve
from wedgecp.definitions import ExperimentConfig
from wedgecp.experiments import factory
from wedgecp.experiments.experiment import AbstractExperiment, ExperimentResult, Table
from wedgecp.regions import FullSpace, Parallelogram, Region, Wedge
from wedgecp.substrate import SeedRecord, SpaceTimePoint, Stream, active_path_exists, build_timeline
from wedgecp.utils import fraction_str

logger = logging.getLogger(__name__)

FIXED_TRIPLES = (
    (Fraction(2), Fraction(1, 2), Fraction(1)),
    (Fraction(2), Fraction(2, 3), Fraction(1)),
)
NEGATIVE_CONTROL_SHIFT = Fraction(1, 100)

_TRIPLE_KEY = 0
_INITIAL_KEY = 1


def random_triples(n: int, seed: int = 0) -> list[tuple[Fraction, Fraction, Fraction]]:
    """Rational (alpha, alpha_l, alpha_r) with 0 < alpha_l < alpha_r < alpha and small denominators."""
    rng = SeedRecord(seed, Stream.ORACLE).generator(_TRIPLE_KEY)
    triples = []
    for _ in range(n):
        alpha = Fraction(int(rng.integers(1, 13)), int(rng.integers(1, 5)))
        low, high = sorted((rng.choice(9, size=2, replace=False) + 1).tolist())
        triples.append((alpha, alpha * Fraction(low, 10), alpha * Fraction(high, 10)))
    return triples


@dataclass
class ContainmentCase:
    solution: IntegerSolution
    M: Fraction
    passed: bool
    report: dict[str, Any]
    control: bool = False

    def row(self) -> tuple:
        corner = self.report['first_failing_corner'] or (self.report['violations'] or [None])[0]
        return (fraction_str(self.solution.alpha), fraction_str(self.solution.alpha_l), fraction_str(self.solution.alpha_r),
                fraction_str(self.solution.beta), self.solution.ell_prime, self.solution.d_prime, fraction_str(self.M),
                self.control, self.passed, corner['corner'] if corner else '')


def containment_case(solution: IntegerSolution, K: int, block_scale: int, control: bool = False) -> ContainmentCase:
    M = solution.alpha * (solution.ell_prime + 3) * block_scale
    report = verify_containment(solution, solution.alpha_l, solution.alpha_r, M, K)
    return ContainmentCase(solution, M, report.passed, report.to_dict(), control)


def containment_sweep(triples: Sequence[tuple[Fraction, Fraction, Fraction]], K: int,
                      block_scale: int = 6) -> list[ContainmentCase]:
    """Containment for each triple, plus a negative control (beta lowered by 1/100) for the fixed triples."""
    cases = []
    for alpha, alpha_l, alpha_r in triples:
        solution = solve_integer_wedge(alpha, alpha_l, alpha_r)
        cases.append(containment_case(solution, K, block_scale))
    for alpha, alpha_l, alpha_r in FIXED_TRIPLES:
        solution = solve_integer_wedge(alpha, alpha_l, alpha_r)
        perturbed = replace(solution, beta=solution.beta - NEGATIVE_CONTROL_SHIFT)
        cases.append(containment_case(perturbed, K, block_scale, control=True))
    return cases


class ContainmentSweepExperiment(AbstractExperiment):
    name = 'containment-sweep'

    def run(self, config: ExperimentConfig) -> ExperimentResult:
        K = config.k_rows or 50
        triples = list(FIXED_TRIPLES) + random_triples(config.triples, config.seed)
        cases = containment_sweep(triples, K, config.block_scale)
        regular = [case for case in cases if not case.control]
        controls = [case for case in cases if case.control]
        named = all(not case.passed and (case.report['first_failing_corner'] or case.report['violations'])
                    for case in controls)
        checks = {
            'containment': all(case.passed for case in regular),
            'negative-control-names-corner': named,
        }
        report = {
            'rows': K,
            'block_scale': config.block_scale,
            'negative_control_shift': fraction_str(NEGATIVE_CONTROL_SHIFT),
            'cases': [dict(case.report, solution=case.solution.to_dict(), M=fraction_str(case.M), control=case.control)
                      for case in cases],
        }
        header = ['alpha', 'alpha_l', 'alpha_r', 'beta', 'ell', 'd', 'M', 'control', 'passed', 'failing_corner']
        return ExperimentResult(self.name, report, {'containment': Table(header, [case.row() for case in cases])}, checks)


EQUIVALENCE_WINDOW = (0, 9)
EQUIVALENCE_HORIZON = 3.0
EQUIVALENCE_LAMBDAS = (0.5, 2.0, 4.0)


def equivalence_regions() -> dict[str, Region]:
    return {
        'full-space': FullSpace(),
        'wedge': Wedge(Fraction(1, 2), Fraction(1), Fraction(3), dx=Fraction(2)),
        'parallelogram': Parallelogram('L', 0, 0, Fraction(21), Fraction(1, 2), Fraction(1, 7)),
    }


def reachable(timeline, region: Region, sources: Sequence[int], target: int, t: float) -> bool:
    return any(active_path_exists(timeline, region, SpaceTimePoint(x, 0), SpaceTimePoint(target, t)) for x in sources)


@dataclass
class EquivalenceSummary:
    instances: int
    comparisons: dict[str, int] = field(default_factory=dict)
    mismatches: dict[str, list[dict[str, Any]]] = field(default_factory=dict)

    @property
    def total_mismatches(self) -> int:
        return sum(len(found) for found in self.mismatches.values())


def path_equivalence(instances: int, seed: int = 0, lambdas: Sequence[float] = EQUIVALENCE_LAMBDAS,
                     window: tuple[int, int] = EQUIVALENCE_WINDOW,
                     horizon: float = EQUIVALENCE_HORIZON) -> EquivalenceSummary:
    """Compares the region-restricted evolution at the horizon with active-path reachability from the initial sites."""
    regions = equivalence_regions()
    summary = EquivalenceSummary(instances, {name: 0 for name in regions}, {name: [] for name in regions})
    x_min, x_max = window
    for instance in range(instances):
        lambda_ = lambdas[instance % len(lambdas)]
        record = SeedRecord(seed, Stream.ORACLE, instance + 1)
        timeline = build_timeline(window, horizon, lambda_, 0.0, record)
        rng = record.generator(_INITIAL_KEY)
        initial = [x for x in range(x_min, x_max + 1) if rng.uniform() < 0.5]
        for name, region in regions.items():
            sources = [x for x in initial if region.contains(x, 0)]
            final = evolve(timeline, region, Configuration(frozenset(sources))).final
            for y in range(x_min, x_max + 1):
                summary.comparisons[name] += 1
                if (y in final) != reachable(timeline, region, sources, y, horizon):
                    summary.mismatches[name].append({'instance': instance, 'lambda': lambda_, 'site': y,
                                                     'evolved': y in final, 'seed': record.to_dict()})
    if summary.total_mismatches:
        logger.warning(f'{summary.total_mismatches} evolution/path mismatches')
    return summary


class PathEquivalenceExperiment(AbstractExperiment):
    name = 'path-equivalence'

    def run(self, config: ExperimentConfig) -> ExperimentResult:
        summary = path_equivalence(config.replicas, config.seed)
        rows = [(name, summary.comparisons[name], len(summary.mismatches[name])) for name in summary.comparisons]
        report = {
            'instances': summary.instances,
            'window': list(EQUIVALENCE_WINDOW),
            'horizon': EQUIVALENCE_HORIZON,
            'lambdas': list(EQUIVALENCE_LAMBDAS),
            'comparisons': summary.comparisons,
            'mismatches': {name: found[:20] for name, found in summary.mismatches.items()},
        }
        checks = {'zero-mismatches': summary.total_mismatches == 0}
        return ExperimentResult(self.name, report, {'equivalence': Table(['region', 'comparisons', 'mismatches'], rows)},
                                checks)


def register() -> None:
    factory.register(ContainmentSweepExperiment.name, ContainmentSweepExperiment)
    factory.register(PathEquivalenceExperiment.name, PathEquivalenceExperiment)
