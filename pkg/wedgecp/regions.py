"""Exact-rational space-time regions.

Every region is a subset of Z x [0, inf) with closed linear boundaries. Besides the
membership predicate, a region exposes, for each site x, the closed time intervals during
which (x, t) is a member; restricted evolutions use the interval ends as exit events.

Times are compared exactly: floats are converted with ``Fraction(t)``, which is lossless.
"""
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Optional, Union

from wedgecp.errors import InvalidArgumentError
from wedgecp.utils import Rational, ceil_fraction, floor_fraction, fraction_str, to_fraction

Time = Union[Fraction, float, int]
Interval = tuple[Fraction, Optional[Fraction]]
"""Closed time interval [a, b]; b is None for an unbounded interval."""

PARALLELOGRAM_KINDS = ('L', 'R', 'L_small', 'R_small')


def as_time(t: Time) -> Fraction:
    if isinstance(t, Fraction):
        return t
    return Fraction(t)


def in_intervals(intervals: list[Interval], t: Time) -> bool:
    """Whether t belongs to one of the closed intervals (exact for float t)."""
    for a, b in intervals:
        if a <= t and (b is None or t <= b):
            return True
    return False


def merge_intervals(intervals: list[Interval]) -> list[Interval]:
    """Sorted union of closed intervals; touching intervals are merged."""
    merged: list[Interval] = []
    for a, b in sorted(intervals, key=lambda interval: interval[0]):
        if merged:
            last_a, last_b = merged[-1]
            if last_b is None:
                continue
            if a <= last_b:
                merged[-1] = (last_a, None if b is None else max(last_b, b))
                continue
        merged.append((a, b))
    return merged


class Region(ABC):
    """Space-time membership predicate with exact linear boundaries."""

    type_name: str = ''

    @abstractmethod
    def contains(self, x: int, t: Time) -> bool:
        ...

    @abstractmethod
    def intervals(self, x: int) -> list[Interval]:
        """Disjoint sorted closed time intervals during which site x is a member."""

    @abstractmethod
    def site_bounds(self, t0: Time, t1: Time) -> tuple[Optional[int], Optional[int]]:
        """Bounds on the member sites over [t0, t1]; None on an unbounded side."""

    @abstractmethod
    def to_dict(self) -> dict[str, Any]:
        ...

    @property
    def is_full(self) -> bool:
        return False

    def members_at(self, t: Time, x_min: int, x_max: int) -> list[int]:
        lo, hi = self.site_bounds(t, t)
        lo = x_min if lo is None else max(lo, x_min)
        hi = x_max if hi is None else min(hi, x_max)
        return [x for x in range(lo, hi + 1) if self.contains(x, t)]


@dataclass(frozen=True)
class FullSpace(Region):
    type_name = 'full'

    def contains(self, x: int, t: Time) -> bool:
        return as_time(t) >= 0

    def intervals(self, x: int) -> list[Interval]:
        return [(Fraction(0), None)]

    def site_bounds(self, t0: Time, t1: Time) -> tuple[Optional[int], Optional[int]]:
        return None, None

    def to_dict(self) -> dict[str, Any]:
        return {'type': self.type_name}

    @property
    def is_full(self) -> bool:
        return True


@dataclass(frozen=True)
class Wedge(Region):
    """W(alpha_l, alpha_r, M) translated by (dx, dt):

    t >= dt and alpha_l (t - dt) <= x - dx <= M + alpha_r (t - dt).
    """
    alpha_l: Fraction
    alpha_r: Fraction
    M: Fraction
    dx: Fraction = Fraction(0)
    dt: Fraction = Fraction(0)
    type_name = 'wedge'

    def __post_init__(self):
        for name in ('alpha_l', 'alpha_r', 'M', 'dx', 'dt'):
            object.__setattr__(self, name, to_fraction(getattr(self, name)))
        if not 0 < self.alpha_l < self.alpha_r:
            raise InvalidArgumentError(f'Wedge speeds must satisfy 0 < alpha_l < alpha_r: {self.alpha_l}, {self.alpha_r}')
        if self.M < 0:
            raise InvalidArgumentError(f'Wedge width must be non-negative: {self.M}')

    def contains(self, x: int, t: Time) -> bool:
        tau = as_time(t) - self.dt
        if tau < 0:
            return False
        u = x - self.dx
        return self.alpha_l * tau <= u <= self.M + self.alpha_r * tau

    def intervals(self, x: int) -> list[Interval]:
        u = x - self.dx
        if u < 0:
            return []
        lo = max(Fraction(0), (u - self.M) / self.alpha_r)
        hi = u / self.alpha_l
        if lo > hi:
            return []
        return [(lo + self.dt, hi + self.dt)]

    def site_bounds(self, t0: Time, t1: Time) -> tuple[Optional[int], Optional[int]]:
        t0, t1 = as_time(t0), as_time(t1)
        if t1 < self.dt:
            return 1, 0
        tau0 = max(t0, self.dt) - self.dt
        tau1 = t1 - self.dt
        return ceil_fraction(self.dx + self.alpha_l * tau0), floor_fraction(self.dx + self.M + self.alpha_r * tau1)

    def to_dict(self) -> dict[str, Any]:
        return {
            'type': self.type_name,
            'alpha_l': fraction_str(self.alpha_l),
            'alpha_r': fraction_str(self.alpha_r),
            'M': fraction_str(self.M),
            'dx': fraction_str(self.dx),
            'dt': fraction_str(self.dt),
        }


@dataclass(frozen=True)
class HalfSpace(Region):
    """W(alpha_r, M) = {(x, t): t >= 0, x <= M + alpha_r t}."""
    alpha_r: Fraction
    M: Fraction
    type_name = 'half_space'

    def __post_init__(self):
        object.__setattr__(self, 'alpha_r', to_fraction(self.alpha_r))
        object.__setattr__(self, 'M', to_fraction(self.M))
        if self.alpha_r < 0:
            raise InvalidArgumentError(f'Half-space speed must be non-negative: {self.alpha_r}')

    def contains(self, x: int, t: Time) -> bool:
        t = as_time(t)
        return t >= 0 and x <= self.M + self.alpha_r * t

    def intervals(self, x: int) -> list[Interval]:
        if x <= self.M:
            return [(Fraction(0), None)]
        if self.alpha_r == 0:
            return []
        return [((x - self.M) / self.alpha_r, None)]

    def site_bounds(self, t0: Time, t1: Time) -> tuple[Optional[int], Optional[int]]:
        return None, floor_fraction(self.M + self.alpha_r * as_time(t1))

    def to_dict(self) -> dict[str, Any]:
        return {'type': self.type_name, 'alpha_r': fraction_str(self.alpha_r), 'M': fraction_str(self.M)}


@dataclass(frozen=True)
class Parallelogram(Region):
    """Large (L, R) or small (L_small, R_small) block parallelogram translated by M(j(alpha - beta), k).

    In translated coordinates (x', t'), L kinds are {M beta/2 <= x' + alpha t' <= 3 M beta/2} and R kinds
    are {-3 M beta/2 <= x' - alpha t' <= -M beta/2}; t' runs over [0, M(1 + beta/alpha)] for large kinds
    and over [0, 3 M beta / (2 alpha)] for small kinds.
    """
    kind: str
    j: int
    k: int
    M: Fraction
    alpha: Fraction
    beta: Fraction
    type_name = 'parallelogram'
    # derived
    ox: Fraction = field(init=False, repr=False)
    ot: Fraction = field(init=False, repr=False)
    height: Fraction = field(init=False, repr=False)
    a0: Fraction = field(init=False, repr=False)
    a1: Fraction = field(init=False, repr=False)
    velocity: Fraction = field(init=False, repr=False)

    def __post_init__(self):
        if self.kind not in PARALLELOGRAM_KINDS:
            raise InvalidArgumentError(f'Unknown parallelogram kind {self.kind!r}; allowed kinds: {PARALLELOGRAM_KINDS}.')
        for name in ('M', 'alpha', 'beta'):
            object.__setattr__(self, name, to_fraction(getattr(self, name)))
        M, alpha, beta = self.M, self.alpha, self.beta
        if M <= 0 or not 0 < beta < alpha / 3:
            raise InvalidArgumentError(f'Parallelogram parameters must satisfy M > 0 and 0 < beta < alpha/3: M={M}, alpha={alpha}, beta={beta}')
        left = self.kind.startswith('L')
        small = self.kind.endswith('small')
        c_lo, c_hi = M * beta / 2, 3 * M * beta / 2
        object.__setattr__(self, 'ox', M * self.j * (alpha - beta))
        object.__setattr__(self, 'ot', M * self.k)
        object.__setattr__(self, 'height', M * 3 * beta / (2 * alpha) if small else M * (1 + beta / alpha))
        object.__setattr__(self, 'a0', c_lo if left else -c_hi)
        object.__setattr__(self, 'a1', c_hi if left else -c_lo)
        object.__setattr__(self, 'velocity', -alpha if left else alpha)

    @property
    def label(self) -> str:
        return f'{self.kind}({self.j},{self.k})'

    @property
    def bottom_time(self) -> Fraction:
        return self.ot

    @property
    def top_time(self) -> Fraction:
        return self.ot + self.height

    @property
    def corners(self) -> tuple[tuple[Fraction, Fraction], ...]:
        """Bottom-left, bottom-right, top-right, top-left."""
        shift = self.velocity * self.height
        return (
            (self.ox + self.a0, self.ot),
            (self.ox + self.a1, self.ot),
            (self.ox + self.a1 + shift, self.top_time),
            (self.ox + self.a0 + shift, self.top_time),
        )

    @property
    def bottom_sites(self) -> list[int]:
        return list(range(ceil_fraction(self.ox + self.a0), floor_fraction(self.ox + self.a1) + 1))

    @property
    def top_sites(self) -> list[int]:
        shift = self.velocity * self.height
        return list(range(ceil_fraction(self.ox + self.a0 + shift), floor_fraction(self.ox + self.a1 + shift) + 1))

    def contains(self, x: int, t: Time) -> bool:
        tau = as_time(t) - self.ot
        if not 0 <= tau <= self.height:
            return False
        u = x - self.ox
        return self.a0 + self.velocity * tau <= u <= self.a1 + self.velocity * tau

    def intervals(self, x: int) -> list[Interval]:
        u = x - self.ox
        v = self.velocity
        if v > 0:
            lo, hi = (u - self.a1) / v, (u - self.a0) / v
        else:
            lo, hi = (u - self.a0) / v, (u - self.a1) / v
        lo, hi = max(lo, Fraction(0)), min(hi, self.height)
        if lo > hi:
            return []
        return [(lo + self.ot, hi + self.ot)]

    def site_bounds(self, t0: Time, t1: Time) -> tuple[Optional[int], Optional[int]]:
        if as_time(t1) < self.ot or as_time(t0) > self.top_time:
            return 1, 0
        xs = [corner[0] for corner in self.corners]
        return ceil_fraction(min(xs)), floor_fraction(max(xs))

    def translated(self, dj: int, dk: int) -> 'Parallelogram':
        return Parallelogram(self.kind, self.j + dj, self.k + dk, self.M, self.alpha, self.beta)

    def to_dict(self) -> dict[str, Any]:
        return {
            'type': self.type_name,
            'kind': self.kind,
            'j': self.j,
            'k': self.k,
            'M': fraction_str(self.M),
            'alpha': fraction_str(self.alpha),
            'beta': fraction_str(self.beta),
        }


@dataclass(frozen=True)
class UnionRegion(Region):
    parts: tuple[Region, ...]
    type_name = 'union'

    def contains(self, x: int, t: Time) -> bool:
        return any(part.contains(x, t) for part in self.parts)

    def intervals(self, x: int) -> list[Interval]:
        intervals: list[Interval] = []
        for part in self.parts:
            intervals.extend(part.intervals(x))
        return merge_intervals(intervals)

    def site_bounds(self, t0: Time, t1: Time) -> tuple[Optional[int], Optional[int]]:
        lows, highs = [], []
        for part in self.parts:
            lo, hi = part.site_bounds(t0, t1)
            if lo is not None and hi is not None and lo > hi:
                continue
            lows.append(lo)
            highs.append(hi)
        if not lows:
            return 1, 0
        lo = None if any(v is None for v in lows) else min(lows)
        hi = None if any(v is None for v in highs) else max(highs)
        return lo, hi

    def to_dict(self) -> dict[str, Any]:
        return {'type': self.type_name, 'parts': [part.to_dict() for part in self.parts]}


def make_parallelogram(kind: str, j: int, k: int, M: Rational, alpha: Rational, beta: Rational,
                       check_integrality: bool = True) -> Parallelogram:
    """Creates the (j, k) translate of a block parallelogram after checking the lattice and scale conditions."""
    M, alpha, beta = to_fraction(M), to_fraction(alpha), to_fraction(beta)
    if k < 0 or (j + k) % 2:
        raise InvalidArgumentError(f'Lattice point must satisfy k >= 0 and j + k even: ({j}, {k})')
    if check_integrality and ((M * beta / 2).denominator != 1 or (M * alpha).denominator != 1):
        raise InvalidArgumentError(f'M beta/2 and M alpha must be integers: M={M}, alpha={alpha}, beta={beta}')
    return Parallelogram(kind, j, k, M, alpha, beta)


def wedge_contains(wedge: Wedge, p) -> bool:
    return wedge.contains(p.x, p.t)


def region_membership(region: Optional[Region], p) -> bool:
    """Membership of a space-time point (any object with ``x`` and ``t``); no region means the full space."""
    return True if region is None else region.contains(p.x, p.t)


def region_from_dict(region_dict: dict[str, Any]) -> Region:
    region_type = region_dict.get('type')
    if region_type == FullSpace.type_name:
        return FullSpace()
    if region_type == Wedge.type_name:
        return Wedge(region_dict['alpha_l'], region_dict['alpha_r'], region_dict['M'],
                     region_dict.get('dx', '0'), region_dict.get('dt', '0'))
    if region_type == HalfSpace.type_name:
        return HalfSpace(region_dict['alpha_r'], region_dict['M'])
    if region_type == Parallelogram.type_name:
        return Parallelogram(region_dict['kind'], int(region_dict['j']), int(region_dict['k']),
                             to_fraction(region_dict['M']), to_fraction(region_dict['alpha']), to_fraction(region_dict['beta']))
    if region_type == UnionRegion.type_name:
        return UnionRegion(tuple(region_from_dict(part) for part in region_dict['parts']))
    raise InvalidArgumentError(f'Unknown region type: {region_type!r}')


def parse_region(text: str) -> Region:
    """Parses ``full``, ``wedge:AL,AR,M[,DX]``, ``half:AR,M`` or ``parallelogram:KIND,J,K,M,ALPHA,BETA``."""
    name, _, argument = text.strip().partition(':')
    values = [v.strip() for v in argument.split(',')] if argument else []
    try:
        if name == 'full' and not values:
            return FullSpace()
        if name == 'wedge' and len(values) in (3, 4):
            return Wedge(*values)
        if name == 'half' and len(values) == 2:
            return HalfSpace(*values)
        if name == 'parallelogram' and len(values) == 6:
            kind, j, k, M, alpha, beta = values
            return Parallelogram(kind, int(j), int(k), to_fraction(M), to_fraction(alpha), to_fraction(beta))
    except InvalidArgumentError:
        raise
    except ValueError:
        pass
    raise InvalidArgumentError(f'Invalid region {text!r}; expected full, wedge:AL,AR,M[,DX], half:AR,M or '
                               f'parallelogram:KIND,J,K,M,ALPHA,BETA.')
