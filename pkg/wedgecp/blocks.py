"""Block construction: Y-regions of parallelograms, their bounding wedges, the integer-parameter search and
the renormalized oriented percolation field.

All geometry is exact (`fractions.Fraction`). A Y-region with parameters (ell, d) is a union of large and
small parallelograms attached in stages; its translates Y_jk tile the renormalized lattice.
"""
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Any, Optional

from wedgecp.contact import Configuration, evolve
from wedgecp.errors import (
    DegenerateGeometryError, InternalConsistencyError, InvalidArgumentError, OutOfWindowError, SearchExhaustedError
)
from wedgecp.regions import Parallelogram, UnionRegion, Wedge, make_parallelogram
from wedgecp.substrate import EventTimeline
from wedgecp.utils import Rational, ceil_fraction, floor_fraction, fraction_str, to_fraction

logger = logging.getLogger(__name__)

DEFAULT_MAX_M = 100_000

Point = tuple[Fraction, Fraction]


@dataclass(frozen=True)
class RenormLattice:
    """Points (j, k) with 0 <= k <= K, |j| <= k and j + k even."""
    K: int

    def __post_init__(self):
        if self.K < 0:
            raise InvalidArgumentError(f'Lattice depth must be non-negative: {self.K}')

    @property
    def points(self) -> list[tuple[int, int]]:
        return [(j, k) for k in range(self.K + 1) for j in range(-k, k + 1, 2)]

    def contains(self, j: int, k: int) -> bool:
        return 0 <= k <= self.K and abs(j) <= k and (j + k) % 2 == 0

    @staticmethod
    def norm(j: int, k: int) -> Fraction:
        return Fraction(abs(j) + abs(k), 2)


@dataclass(frozen=True)
class SlopePair:
    """Time-per-space slopes of the left and right bounding lines."""
    s_l: Fraction
    s_r: Fraction

    def to_dict(self) -> dict[str, str]:
        return {'s_l': fraction_str(self.s_l), 's_r': fraction_str(self.s_r)}


@dataclass(frozen=True)
class StagedParallelogram:
    parallelogram: Parallelogram
    stage: int


@dataclass(frozen=True, eq=False)
class YRegion:
    ell: int
    d: int
    M: Fraction
    alpha: Fraction
    beta: Fraction
    members: tuple[StagedParallelogram, ...]

    @property
    def parallelograms(self) -> list[Parallelogram]:
        return [member.parallelogram for member in self.members]

    @property
    def count(self) -> int:
        return len(self.members)

    @cached_property
    def slopes(self) -> SlopePair:
        return y_slopes(self.ell, self.d, self.alpha, self.beta)

    @cached_property
    def x_l(self) -> Fraction:
        return -self.M * (3 * self.beta / 2 + self.beta / (self.alpha * self.slopes.s_l))

    @cached_property
    def x_r(self) -> Fraction:
        return self.M * ((self.ell + 1) * (self.alpha - self.beta - 1 / self.slopes.s_r) + 3 * self.beta / 2)

    @cached_property
    def wedge(self) -> Wedge:
        return Wedge(1 / self.slopes.s_l, 1 / self.slopes.s_r, self.x_r - self.x_l, dx=self.x_l)

    def lattice_shift(self, j: int, k: int) -> tuple[int, int]:
        """Parallelogram index shift of Y_jk: offset M([k(ell - d) + j](alpha - beta), k(ell + d + 1))."""
        if not RenormLattice(max(k, 0)).contains(j, k):
            raise InvalidArgumentError(f'Not a lattice point: ({j}, {k})')
        return k * (self.ell - self.d) + j, k * (self.ell + self.d + 1)

    def offset(self, j: int, k: int) -> Point:
        dj, dk = self.lattice_shift(j, k)
        return self.M * dj * (self.alpha - self.beta), self.M * dk

    def translate(self, j: int, k: int) -> list[Parallelogram]:
        dj, dk = self.lattice_shift(j, k)
        return [p.translated(dj, dk) for p in self.parallelograms]

    def union(self, j: int = 0, k: int = 0) -> UnionRegion:
        return UnionRegion(tuple(self.translate(j, k)))

    def bottom(self, j: int = 0, k: int = 0) -> Parallelogram:
        """The stage 0 parallelogram R_00 of Y_jk, whose bottom edge is the bottom edge of Y_jk."""
        dj, dk = self.lattice_shift(j, k)
        return self.members[0].parallelogram.translated(dj, dk)

    def corners(self, j: int = 0, k: int = 0) -> list[tuple[str, Point]]:
        named = []
        for p in self.translate(j, k):
            for name, corner in zip(('bottom-left', 'bottom-right', 'top-right', 'top-left'), p.corners):
                named.append((f'{p.label} {name}', corner))
        return named

    def extent(self, K: int) -> tuple[int, int, Fraction]:
        """Site bounds and top time of all translates up to row K."""
        xs, top = [], Fraction(0)
        for j, k in RenormLattice(K).points:
            for p in self.translate(j, k):
                xs.extend(corner[0] for corner in p.corners)
                top = max(top, p.top_time)
        return floor_fraction(min(xs)), ceil_fraction(max(xs)), top

    def to_dict(self) -> dict[str, Any]:
        region_dict = {
            'ell': self.ell,
            'd': self.d,
            'M': fraction_str(self.M),
            'alpha': fraction_str(self.alpha),
            'beta': fraction_str(self.beta),
            'count': self.count,
            'parallelograms': [dict(member.parallelogram.to_dict(), stage=member.stage) for member in self.members],
        }
        if self.ell - self.d - 1 > 0:
            region_dict.update({
                'slopes': self.slopes.to_dict(),
                'x_l': fraction_str(self.x_l),
                'x_r': fraction_str(self.x_r),
                'wedge': self.wedge.to_dict(),
            })
        return region_dict


def lemma_bound(ell: int, d: int) -> int:
    """Parallelogram count bound quoted for the positive-correlation estimate."""
    return 2 * ell + 4 * d if d >= 1 else 2 * ell + 1


def _stage_entries(ell: int, d: int) -> list[tuple[int, str, int, int]]:
    entries = [(0, 'R', 0, 0)]
    for i in range(1, ell + 1):
        entries += [(1, 'R', i, i), (1, 'L_small', i, i)]
    entries.append((2, 'L', ell, ell))
    if d >= 1:
        entries.append((3, 'L', ell + 1, ell + 1))
    if d == 1:
        entries += [(4, 'L', ell - 1, ell + 1), (4, 'R_small', ell - 1, ell + 1)]
    elif d >= 2:
        for i in range(d):
            entries += [
                (4, 'L', ell - i, ell + i), (4, 'R_small', ell - i, ell + i),
                (4, 'L', ell + 1 - i, ell + 1 + i), (4, 'R_small', ell + 1 - i, ell + 1 + i),
            ]
        entries += [(5, 'L', ell - d, ell + d), (5, 'R_small', ell - d, ell + d)]
    return entries


def assemble_y_region(ell: int, d: int, M: Rational, alpha: Rational, beta: Rational,
                      check_integrality: bool = True) -> YRegion:
    """Assembles Y_00 stage by stage; a parallelogram attached twice keeps its first stage."""
    if ell < 2 or not 0 <= d < ell:
        raise InvalidArgumentError(f'Y-region parameters must satisfy ell >= 2 and 0 <= d < ell: ell={ell}, d={d}')
    M, alpha, beta = to_fraction(M), to_fraction(alpha), to_fraction(beta)
    members, seen = [], set()
    for stage, kind, j, k in _stage_entries(ell, d):
        if (kind, j, k) in seen:
            continue
        seen.add((kind, j, k))
        members.append(StagedParallelogram(make_parallelogram(kind, j, k, M, alpha, beta, check_integrality), stage))
    region = YRegion(ell, d, M, alpha, beta, tuple(members))
    bound = lemma_bound(ell, d)
    if region.count > bound:
        logger.debug(f'Y-region (ell={ell}, d={d}) has {region.count} distinct parallelograms, above the quoted '
                       f'bound {bound}; the enumerated count is used.')
    return region


def y_slopes(ell: int, d: int, alpha: Rational, beta: Rational) -> SlopePair:
    """s_l = (ell+d+1)/((ell-d-1)(alpha-beta)) and s_r = (ell+d+1)/((ell-d+1)(alpha-beta))."""
    alpha, beta = to_fraction(alpha), to_fraction(beta)
    if ell - d - 1 <= 0:
        raise DegenerateGeometryError(f'Left bounding line is vertical or undefined for ell={ell}, d={d}.')
    if alpha <= beta:
        raise DegenerateGeometryError(f'Slopes need alpha > beta: alpha={alpha}, beta={beta}')
    return SlopePair(Fraction(ell + d + 1, ell - d - 1) / (alpha - beta), Fraction(ell + d + 1, ell - d + 1) / (alpha - beta))


def bounding_wedge(ell: int, d: int, M: Rational, alpha: Rational, beta: Rational,
                   check_integrality: bool = True) -> Wedge:
    """Wedge W(1/s_l, 1/s_r, x_r - x_l) shifted by (x_l, 0), checked against the corners of Y_00 and Y_{+-1,1}."""
    region = assemble_y_region(ell, d, M, alpha, beta, check_integrality)
    wedge = region.wedge
    if not -region.M * region.alpha < region.x_l < region.x_r < region.M * region.alpha * (ell + 2):
        raise InternalConsistencyError(f'Bounding lines out of range: x_l={region.x_l}, x_r={region.x_r}')
    for j, k in ((0, 0), (-1, 1), (1, 1)):
        for name, (x, t) in region.corners(j, k):
            if not wedge.contains(x, t):
                raise InternalConsistencyError(f'Corner {name} of Y({j},{k}) at ({x}, {t}) lies outside the bounding wedge.')
    return wedge


@dataclass(frozen=True)
class IntegerSolution:
    alpha: Fraction
    alpha_l: Fraction
    alpha_r: Fraction
    m: int
    c: int
    s_l: Fraction
    s_r: Fraction
    s_l_prime: Fraction
    beta: Fraction
    ell_prime: int
    d_prime: int

    def to_dict(self) -> dict[str, Any]:
        return {
            'alpha': fraction_str(self.alpha),
            'alpha_l': fraction_str(self.alpha_l),
            'alpha_r': fraction_str(self.alpha_r),
            'm': self.m,
            'c': self.c,
            's_l': fraction_str(self.s_l),
            's_r': fraction_str(self.s_r),
            's_l_prime': fraction_str(self.s_l_prime),
            'beta': fraction_str(self.beta),
            'ell': self.ell_prime,
            'd': self.d_prime,
        }


def integer_parameters(s_l: Fraction, s_r: Fraction, alpha: Fraction, beta: Fraction) -> tuple[Fraction, Fraction]:
    """(ell, d) solving the slope equations for the given slopes."""
    ell = s_r * (s_l * (alpha - beta) + 1) / (s_l - s_r)
    d = s_l * (s_r * (alpha - beta) - 1) / (s_l - s_r)
    return ell, d


def solve_integer_wedge(alpha: Rational, alpha_l: Rational, alpha_r: Rational, max_m: int = DEFAULT_MAX_M) -> IntegerSolution:
    """Narrows the left wedge slope to s_r m/(m - 1) and picks beta so that ell' and d' are integers.

    m is the smallest integer above 3/(alpha s_r) with s_r m/(m - 1) < s_l; c is the smallest integer >= m in
    the open interval (2/3 alpha m s_r, alpha m s_r).
    """
    alpha, alpha_l, alpha_r = to_fraction(alpha), to_fraction(alpha_l), to_fraction(alpha_r)
    if not 0 < alpha_l < alpha_r < alpha:
        raise InvalidArgumentError(f'Speeds must satisfy 0 < alpha_l < alpha_r < alpha: {alpha_l}, {alpha_r}, {alpha}')
    s_l, s_r = 1 / alpha_l, 1 / alpha_r
    m = max(2, floor_fraction(3 / (alpha * s_r)) + 1)
    while not s_r * Fraction(m, m - 1) < s_l:
        m += 1
        if m > max_m:
            raise SearchExhaustedError(f'No m <= {max_m} with s_r m/(m-1) < s_l (s_l={s_l}, s_r={s_r}).')
    lo, hi = Fraction(2, 3) * alpha * m * s_r, alpha * m * s_r
    c = max(m, floor_fraction(lo) + 1)
    if not lo < c < hi:
        raise SearchExhaustedError(f'No integer c >= {m} in ({lo}, {hi}).')
    beta = alpha - Fraction(c) / (m * s_r)
    s_l_prime = s_r * Fraction(m, m - 1)
    solution = IntegerSolution(alpha, alpha_l, alpha_r, m, c, s_l, s_r, s_l_prime, beta, c + m - 1, c - m)

    if not 0 < beta < alpha / 3 or s_r * (alpha - beta) != Fraction(c, m):
        raise InternalConsistencyError(f'Invalid beta={beta} for m={m}, c={c}.')
    if integer_parameters(s_l_prime, s_r, alpha, beta) != (solution.ell_prime, solution.d_prime):
        raise InternalConsistencyError(f'Slope equations do not give ell={solution.ell_prime}, d={solution.d_prime}.')
    logger.debug(f'integer solution: {solution}')
    return solution


@dataclass
class ContainmentViolation:
    label: str
    j: int
    k: int
    corner: Point
    side: str

    def to_dict(self) -> dict[str, Any]:
        return {
            'corner': self.label,
            'j': self.j,
            'k': self.k,
            'x': fraction_str(self.corner[0]),
            't': fraction_str(self.corner[1]),
            'side': self.side,
        }


@dataclass
class ContainmentReport:
    passed: bool
    rows: int
    block_M: Fraction
    corners_checked: int
    violations: list[ContainmentViolation] = field(default_factory=list)
    left_slope_ok: bool = True
    right_slope_ok: bool = True
    slope_equations_ok: bool = True
    first_failing_row: Optional[int] = None
    first_failing_corner: Optional[ContainmentViolation] = None

    def to_dict(self) -> dict[str, Any]:
        return {
            'passed': self.passed,
            'rows': self.rows,
            'block_M': fraction_str(self.block_M),
            'corners_checked': self.corners_checked,
            'violations': [violation.to_dict() for violation in self.violations[:20]],
            'n_violations': len(self.violations),
            'left_slope_ok': self.left_slope_ok,
            'right_slope_ok': self.right_slope_ok,
            'slope_equations_ok': self.slope_equations_ok,
            'first_failing_row': self.first_failing_row,
            'first_failing_corner': self.first_failing_corner.to_dict() if self.first_failing_corner else None,
        }


def verify_containment(solution: IntegerSolution, alpha_l: Rational, alpha_r: Rational, M: Rational, K: int) -> ContainmentReport:
    """Checks that Y(ell', d', M/(alpha(ell'+3))) lies in W(alpha_l, alpha_r, M) - (M/(ell'+3), 0).

    Every corner of every translate Y_jk, k <= K, is checked exactly. Corner slacks are affine in the row
    index at the extreme translates j = -k (left line) and j = k (right line), so the first failing row over
    all rows is computed exactly and its corner named.
    """
    alpha_l, alpha_r, M = to_fraction(alpha_l), to_fraction(alpha_r), to_fraction(M)
    if M <= 0 or K < 0:
        raise InvalidArgumentError(f'Containment check needs M > 0 and K >= 0: M={M}, K={K}')
    alpha, beta = solution.alpha, solution.beta
    ell, d = solution.ell_prime, solution.d_prime
    block_M = M / (alpha * (ell + 3))
    region = assemble_y_region(ell, d, block_M, alpha, beta, check_integrality=False)
    wedge = Wedge(alpha_l, alpha_r, M, dx=-M / (ell + 3))

    dx_j = block_M * (alpha - beta)  # x shift per unit of j
    dx_k = block_M * (ell - d) * (alpha - beta)  # x shift per row, at j = 0
    dt_k = block_M * (ell + d + 1)
    base = region.corners(0, 0)

    def left_slack(x, t):
        return (x - wedge.dx) - wedge.alpha_l * t

    def right_slack(x, t):
        return wedge.M + wedge.alpha_r * t - (x - wedge.dx)

    violations, checked = [], 0
    for k in range(K + 1):
        shifted = [(name, (x + k * dx_k, t + k * dt_k)) for name, (x, t) in base]
        left_name, left_corner = min(shifted, key=lambda item: left_slack(*item[1]))
        right_name, right_corner = min(shifted, key=lambda item: right_slack(*item[1]))
        min_left, min_right = left_slack(*left_corner), right_slack(*right_corner)
        for j in range(-k, k + 1, 2):
            checked += len(base)
            if min_left + j * dx_j < 0:
                violations.append(ContainmentViolation(_translated_label(left_name, j, k, region),
                                                       j, k, (left_corner[0] + j * dx_j, left_corner[1]), 'left'))
            if min_right - j * dx_j < 0:
                violations.append(ContainmentViolation(_translated_label(right_name, j, k, region),
                                                       j, k, (right_corner[0] + j * dx_j, right_corner[1]), 'right'))

    # slack(k) = a + b k at the extreme translates
    left_rate = dx_k - dx_j - alpha_l * dt_k
    right_rate = alpha_r * dt_k - dx_k - dx_j
    first_row, first_corner = None, None
    for side, rate, slack in (('left', left_rate, left_slack), ('right', right_rate, right_slack)):
        if rate >= 0:
            continue
        for name, (x, t) in base:
            a = slack(x, t)
            row = 0 if a < 0 else floor_fraction(a / -rate) + 1
            if first_row is None or row < first_row:
                j = -row if side == 'left' else row
                corner = (x + row * dx_k + j * dx_j, t + row * dt_k)
                first_row = row
                first_corner = ContainmentViolation(_translated_label(name, j, row, region), j, row, corner, side)

    ell_check, d_check = integer_parameters(solution.s_l_prime, solution.s_r, alpha, beta)
    report = ContainmentReport(
        passed=False,
        rows=K,
        block_M=block_M,
        corners_checked=checked,
        violations=violations,
        left_slope_ok=1 / solution.s_l_prime >= alpha_l,
        right_slope_ok=1 / solution.s_r <= alpha_r,
        slope_equations_ok=(ell_check, d_check) == (ell, d),
        first_failing_row=first_row,
        first_failing_corner=first_corner,
    )
    report.passed = not violations and first_row is None and report.left_slope_ok and report.right_slope_ok \
        and report.slope_equations_ok
    if not report.passed:
        named = report.first_failing_corner or (violations[0] if violations else None)
        logger.info(f'containment failed: {named.to_dict() if named else "slope equations"}')
    return report


def _translated_label(name: str, j: int, k: int, region: YRegion) -> str:
    return f'Y({j},{k}) {name}'


def integral_block_scale(alpha: Rational, beta: Rational) -> Fraction:
    """Smallest M > 0 with M beta/2 and M alpha both integers."""
    alpha, beta = to_fraction(alpha), to_fraction(beta)
    if alpha <= 0 or beta <= 0:
        raise InvalidArgumentError(f'Scale needs positive alpha and beta: {alpha}, {beta}')
    a, b = 1 / alpha, 2 / beta
    return Fraction(math.lcm(a.numerator, b.numerator), math.gcd(a.denominator, b.denominator))


def snap_block_scale(M: Rational, alpha: Rational, beta: Rational) -> Fraction:
    """Smallest integral block scale >= M."""
    unit = integral_block_scale(alpha, beta)
    return unit * max(1, ceil_fraction(to_fraction(M) / unit))


def _check_inside(timeline: EventTimeline, parallelogram: Parallelogram) -> None:
    x_lo, x_hi = parallelogram.site_bounds(parallelogram.bottom_time, parallelogram.top_time)
    if x_lo < timeline.x_min or x_hi > timeline.x_max or parallelogram.top_time > timeline.horizon:
        raise OutOfWindowError(f'{parallelogram.label} exceeds timeline window {timeline.window} x [0, {timeline.horizon}].')


def crossing_event(timeline: EventTimeline, parallelogram: Parallelogram) -> bool:
    """Whether an active path inside the parallelogram joins its bottom edge to its top edge."""
    _check_inside(timeline, parallelogram)
    bottom = parallelogram.bottom_sites
    if not bottom:
        return False
    trajectory = evolve(timeline, parallelogram, Configuration.interval(bottom[0], bottom[-1]),
                        start_time=parallelogram.bottom_time, end_time=parallelogram.top_time)
    return trajectory.survived


def crossings(timeline: EventTimeline, region: YRegion, j: int = 0, k: int = 0) -> list[bool]:
    return [crossing_event(timeline, p) for p in region.translate(j, k)]


def o_event(timeline: EventTimeline, region: YRegion, j: int = 0, k: int = 0) -> bool:
    """Every parallelogram of Y_jk is crossed from its bottom edge to its top edge."""
    return all(crossing_event(timeline, p) for p in region.translate(j, k))


def common_source(timeline: EventTimeline, region: YRegion, j: int = 0, k: int = 0) -> Optional[int]:
    """A bottom-edge site of Y_jk joined, by active paths inside Y_jk, to the top edge of every parallelogram."""
    base = region.bottom(j, k)
    parallelograms = region.translate(j, k)
    for p in parallelograms:
        _check_inside(timeline, p)
    union = region.union(j, k)
    for x in base.bottom_sites:
        # exits at the end time are not applied, so `final` holds the sites on the top edge
        if all(not evolve(timeline, union, Configuration.single(x), start_time=base.bottom_time,
                          end_time=p.top_time).final.isdisjoint(p.top_sites) for p in parallelograms):
            return x
    return None


@dataclass
class PercolationField:
    K: int
    values: dict[tuple[int, int], bool]
    diagnostics: dict[tuple[int, int], list[bool]] = field(default_factory=dict)

    def __getitem__(self, point: tuple[int, int]) -> bool:
        return self.values[point]

    def rows(self) -> list[tuple[int, int, int]]:
        return [(j, k, int(self.values[(j, k)])) for j, k in RenormLattice(self.K).points]


def percolation_field(timeline: EventTimeline, region: YRegion, K: int) -> PercolationField:
    """U_jk = 1 when every parallelogram of Y_jk is crossed, for the lattice truncated at row K."""
    values, diagnostics = {}, {}
    for j, k in RenormLattice(K).points:
        diagnostics[(j, k)] = crossings(timeline, region, j, k)
        values[(j, k)] = all(diagnostics[(j, k)])
    return PercolationField(K, values, diagnostics)


def open_path(field: PercolationField) -> Optional[list[tuple[int, int]]]:
    """An up-going path from (0, 0) to row K through points with U = 1, or None."""
    if not field.values.get((0, 0), False):
        return None
    parents: dict[tuple[int, int], Optional[tuple[int, int]]] = {(0, 0): None}
    frontier = [(0, 0)]
    for k in range(1, field.K + 1):
        next_frontier = []
        for j, _ in frontier:
            for nj in (j - 1, j + 1):
                point = (nj, k)
                if point not in parents and field.values.get(point, False):
                    parents[point] = (j, k - 1)
                    next_frontier.append(point)
        frontier = sorted(next_frontier)
        if not frontier:
            return None
    path, point = [], frontier[0]
    while point is not None:
        path.append(point)
        point = parents[point]
    return path[::-1]


def open_path_exists(field: PercolationField) -> bool:
    return open_path(field) is not None


def open_path_realized(timeline: EventTimeline, region: YRegion, path: list[tuple[int, int]]) -> bool:
    """Whether an active path inside the union of the Y_jk along `path` joins the bottom edge of Y_00 to the bottom
    edge of the last region of the path.
    """
    union = UnionRegion(tuple(p for j, k in path for p in region.translate(j, k)))
    first, last = region.bottom(*path[0]), region.bottom(*path[-1])
    for p in (first, last):
        _check_inside(timeline, p)
    if not first.bottom_sites or not last.bottom_sites:
        return False
    trajectory = evolve(timeline, union, Configuration.interval(first.bottom_sites[0], first.bottom_sites[-1]),
                        start_time=first.bottom_time, end_time=last.bottom_time)
    return not trajectory.final.isdisjoint(last.bottom_sites)
