"""Graphical representation: Poisson death marks and arrows over a finite space-time window.

Each site and each directed nearest-neighbor edge draws its events from its own counter-based
Philox stream keyed by (stream, substream, kind, site, direction), so a timeline is reproducible
from its seed record and the events of a site do not depend on the window it was built with.
"""
import json
import logging
from dataclasses import dataclass, field
from enum import IntEnum
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Any, Callable, Iterable, Iterator, NamedTuple, Optional, Union

import numpy as np

from wedgecp.errors import InvalidArgumentError, OutOfWindowError
from wedgecp.regions import FullSpace, Region, Time, as_time
from wedgecp.utils import zigzag

logger = logging.getLogger(__name__)

DEATH = 0
ARROW = 1

_DEATH_KEY = 0
_ARROW_KEY = 1


class Stream(IntEnum):
    """Top-level RNG stream identifiers, one per kind of consumer."""
    TIMELINE = 0
    UPPER_INVARIANT = 1
    EDGE_SPEED = 2
    SURVIVAL = 3
    COUPLING = 4
    PERCOLATION = 5
    GBT = 6
    GBT_DIRECT = 7
    LAMBDA_C = 8
    EDGE_GROWTH = 9
    ORACLE = 10


@dataclass(frozen=True)
class SeedRecord:
    master: int = 0
    stream: int = 0
    substream: int = 0

    def __post_init__(self):
        for name in ('master', 'stream', 'substream'):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < 0:
                raise InvalidArgumentError(f'Seed {name} must be a non-negative integer: {value!r}')
            object.__setattr__(self, name, int(value))

    def generator(self, *key: int) -> np.random.Generator:
        sequence = np.random.SeedSequence(entropy=self.master, spawn_key=(self.stream, self.substream) + tuple(key))
        return np.random.Generator(np.random.Philox(sequence))

    def to_dict(self) -> dict[str, int]:
        return {'master': self.master, 'stream': self.stream, 'substream': self.substream}

    @classmethod
    def from_dict(cls, seed_dict: dict[str, int]) -> 'SeedRecord':
        return cls(int(seed_dict['master']), int(seed_dict.get('stream', 0)), int(seed_dict.get('substream', 0)))


def as_seed(seed: Union[SeedRecord, int, None]) -> SeedRecord:
    if seed is None:
        return SeedRecord()
    if isinstance(seed, SeedRecord):
        return seed
    return SeedRecord(seed)


@dataclass(frozen=True)
class SpaceTimePoint:
    x: int
    t: Time

    def __post_init__(self):
        if self.t < 0:
            raise InvalidArgumentError(f'Space-time point time must be non-negative: {self.t}')


class EventArrays(NamedTuple):
    """All events merged in processing order: time, then deaths before arrows, then source, then target."""
    times: np.ndarray
    kinds: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    one_only: np.ndarray


def first_after(times: np.ndarray, t: Time) -> int:
    """Index of the first entry of the sorted float array strictly greater than t (exact for rational t)."""
    i = int(np.searchsorted(times, float(t), side='right'))
    n = len(times)
    while i < n and float(times[i]) <= t:
        i += 1
    while i > 0 and float(times[i - 1]) > t:
        i -= 1
    return i


def poisson_times(rng: np.random.Generator, rate: float, horizon: float) -> np.ndarray:
    """Sorted arrival times in (0, horizon] of a rate `rate` Poisson process."""
    if rate <= 0:
        return np.empty(0)
    n = rng.poisson(rate * horizon)
    return np.sort(horizon - rng.uniform(0.0, horizon, size=n))


@dataclass(frozen=True, eq=False)
class EventTimeline:
    """Realized Poisson randomness over window [x_min, x_max] and times (0, horizon]."""
    window: tuple[int, int]
    horizon: float
    deaths: dict[int, np.ndarray]
    arrows: dict[tuple[int, int], np.ndarray]
    one_only: dict[tuple[int, int], np.ndarray]
    lambda_: float = 0.0
    one_only_prob: float = 0.0
    seed: Optional[SeedRecord] = None
    metadata: dict[str, Any] = field(default_factory=dict)

    @property
    def x_min(self) -> int:
        return self.window[0]

    @property
    def x_max(self) -> int:
        return self.window[1]

    @property
    def n_sites(self) -> int:
        return self.window[1] - self.window[0] + 1

    @cached_property
    def events(self) -> EventArrays:
        times, kinds, src, dst, labels = [np.empty(0)], [np.empty(0, dtype=np.int8)], [np.empty(0, dtype=np.int64)], \
            [np.empty(0, dtype=np.int64)], [np.empty(0, dtype=bool)]
        for x, death_times in self.deaths.items():
            n = len(death_times)
            times.append(death_times)
            kinds.append(np.full(n, DEATH, dtype=np.int8))
            src.append(np.full(n, x, dtype=np.int64))
            dst.append(np.full(n, x, dtype=np.int64))
            labels.append(np.zeros(n, dtype=bool))
        for (x, y), arrow_times in self.arrows.items():
            n = len(arrow_times)
            times.append(arrow_times)
            kinds.append(np.full(n, ARROW, dtype=np.int8))
            src.append(np.full(n, x, dtype=np.int64))
            dst.append(np.full(n, y, dtype=np.int64))
            labels.append(self.one_only.get((x, y), np.zeros(n, dtype=bool)))
        times, kinds, src, dst, labels = (np.concatenate(parts) for parts in (times, kinds, src, dst, labels))
        order = np.lexsort((dst, src, kinds, times))
        return EventArrays(times[order], kinds[order], src[order], dst[order], labels[order])

    @property
    def n_events(self) -> int:
        return len(self.events.times)

    def contains_point(self, p: SpaceTimePoint) -> bool:
        return self.x_min <= p.x <= self.x_max and 0 <= p.t <= self.horizon

    def check_point(self, p: SpaceTimePoint) -> None:
        if not self.contains_point(p):
            raise OutOfWindowError(f'Point ({p.x}, {p.t}) outside timeline window {self.window} x [0, {self.horizon}].')

    @classmethod
    def from_events(cls, window: tuple[int, int], horizon: float, events: Iterable[dict[str, Any]],
                    lambda_: float = 0.0, one_only_prob: float = 0.0, seed: Optional[SeedRecord] = None) -> 'EventTimeline':
        """Creates a timeline from explicit event records ``{kind, x, y, t, one_only}``."""
        x_min, x_max = _check_window(window)
        horizon = _check_horizon(horizon)
        death_lists: dict[int, list[float]] = {}
        arrow_lists: dict[tuple[int, int], list[tuple[float, bool]]] = {}
        for event in events:
            t = float(event['t'])
            x = int(event['x'])
            if not 0 < t <= horizon:
                raise InvalidArgumentError(f'Event time outside (0, {horizon}]: {event}')
            if not x_min <= x <= x_max:
                raise InvalidArgumentError(f'Event site outside window {window}: {event}')
            if event['kind'] == 'death':
                death_lists.setdefault(x, []).append(t)
            elif event['kind'] == 'arrow':
                y = int(event['y'])
                if abs(x - y) != 1 or not x_min <= y <= x_max:
                    raise InvalidArgumentError(f'Arrow must join window nearest neighbors: {event}')
                arrow_lists.setdefault((x, y), []).append((t, bool(event.get('one_only', False))))
            else:
                raise InvalidArgumentError(f'Unknown event kind: {event}')

        deaths = {x: _strictly_increasing(sorted(times), x) for x, times in death_lists.items()}
        arrows, one_only = {}, {}
        for edge, records in arrow_lists.items():
            records.sort()
            arrows[edge] = _strictly_increasing([t for t, _ in records], edge)
            one_only[edge] = np.array([label for _, label in records], dtype=bool)
        return cls((x_min, x_max), horizon, deaths, arrows, one_only, float(lambda_), float(one_only_prob), seed)

    def masked(self, region: Region) -> 'EventTimeline':
        """Copy of the timeline keeping only events inside the region (both arrow endpoints for arrows)."""
        deaths = {}
        for x, times in self.deaths.items():
            keep = np.array([region.contains(x, float(t)) for t in times], dtype=bool)
            deaths[x] = times[keep]
        arrows, one_only = {}, {}
        for (x, y), times in self.arrows.items():
            keep = np.array([region.contains(x, float(t)) and region.contains(y, float(t)) for t in times], dtype=bool)
            arrows[(x, y)] = times[keep]
            one_only[(x, y)] = self.one_only[(x, y)][keep]
        metadata = dict(self.metadata, masked=region.to_dict())
        return EventTimeline(self.window, self.horizon, deaths, arrows, one_only, self.lambda_, self.one_only_prob, self.seed, metadata)

    def header(self) -> dict[str, Any]:
        return {
            'record': 'header',
            'window': list(self.window),
            'horizon': self.horizon,
            'lambda': self.lambda_,
            'one_only_prob': self.one_only_prob,
            'seed': self.seed.to_dict() if self.seed else None,
        }

    def iter_records(self) -> Iterator[dict[str, Any]]:
        events = self.events
        for t, kind, x, y, label in zip(events.times.tolist(), events.kinds.tolist(), events.src.tolist(),
                                        events.dst.tolist(), events.one_only.tolist()):
            if kind == DEATH:
                yield {'kind': 'death', 'x': x, 't': t}
            else:
                yield {'kind': 'arrow', 'x': x, 'y': y, 't': t, 'one_only': label}

    def to_jsonl(self, path: Union[str, Path]) -> None:
        with open(path, mode='w') as file:
            file.write(json.dumps(self.header()) + '\n')
            for record in self.iter_records():
                file.write(json.dumps(record) + '\n')

    @classmethod
    def from_jsonl(cls, path: Union[str, Path]) -> 'EventTimeline':
        with open(path, mode='r') as file:
            lines = [json.loads(line) for line in file if line.strip()]
        if not lines or lines[0].get('record') != 'header':
            raise InvalidArgumentError(f'Missing timeline header record in {path}')
        header = lines[0]
        seed = SeedRecord.from_dict(header['seed']) if header.get('seed') else None
        return cls.from_events(tuple(header['window']), header['horizon'], lines[1:],
                               header.get('lambda', 0.0), header.get('one_only_prob', 0.0), seed)


def _check_window(window: tuple[int, int]) -> tuple[int, int]:
    x_min, x_max = (int(v) for v in window)
    if x_min > x_max:
        raise InvalidArgumentError(f'Empty window: {window}')
    return x_min, x_max


def _check_horizon(horizon: float) -> float:
    horizon = float(horizon)
    if not np.isfinite(horizon) or horizon <= 0:
        raise InvalidArgumentError(f'Horizon must be positive: {horizon}')
    return horizon


def _strictly_increasing(times: list[float], key: Any) -> np.ndarray:
    array = np.asarray(times, dtype=float)
    if np.any(np.diff(array) <= 0):
        raise InvalidArgumentError(f'Event times of {key} must be strictly increasing.')
    return array


def build_timeline(window: tuple[int, int], horizon: float, lambda_: float, one_only_prob: float = 0.0,
                   seed: Union[SeedRecord, int, None] = None) -> EventTimeline:
    """Realizes rate 1 death marks at every window site and rate `lambda_` arrows on every directed window edge,
    each arrow labeled 1-only with probability `one_only_prob`.
    """
    x_min, x_max = _check_window(window)
    horizon = _check_horizon(horizon)
    lambda_ = float(lambda_)
    one_only_prob = float(one_only_prob)
    if not np.isfinite(lambda_) or lambda_ < 0:
        raise InvalidArgumentError(f'Arrow rate must be non-negative: {lambda_}')
    if not 0.0 <= one_only_prob <= 1.0:
        raise InvalidArgumentError(f'1-only probability must lie in [0, 1]: {one_only_prob}')
    seed = as_seed(seed)

    deaths = {}
    for x in range(x_min, x_max + 1):
        deaths[x] = poisson_times(seed.generator(_DEATH_KEY, zigzag(x), 0), 1.0, horizon)
    arrows, one_only = {}, {}
    for x in range(x_min, x_max):
        for direction, (src, dst) in enumerate(((x, x + 1), (x + 1, x))):
            rng = seed.generator(_ARROW_KEY, zigzag(x), direction)
            times = poisson_times(rng, lambda_, horizon)
            arrows[(src, dst)] = times
            if one_only_prob > 0:
                one_only[(src, dst)] = rng.uniform(size=len(times)) < one_only_prob
            else:
                one_only[(src, dst)] = np.zeros(len(times), dtype=bool)
    logger.debug(f'built timeline window={window} horizon={horizon} lambda={lambda_} seed={seed}')
    return EventTimeline((x_min, x_max), horizon, deaths, arrows, one_only, lambda_, one_only_prob, seed)


def segment_inside(intervals: list[tuple[Fraction, Optional[Fraction]]], a: Time, b: Time) -> bool:
    """Whether the closed time segment [a, b] lies in one of the closed intervals."""
    for lo, hi in intervals:
        if lo <= a and (hi is None or b <= hi):
            return True
    return False


def active_path_exists(timeline: EventTimeline, region: Optional[Region], frm: SpaceTimePoint, to: SpaceTimePoint,
                       require_2path: bool = False,
                       block_predicate: Optional[Callable[[int, float], bool]] = None) -> bool:
    """Whether an active path goes up from `frm` to `to` staying inside `region`.

    Vertical segments may not cross death marks in (frm.t, to.t]; arrows are used at their times. With
    `require_2path`, 1-only arrows are skipped. With `block_predicate(x, t)`, a path is cut wherever the
    predicate holds on one of its vertical segments (checked at the start and after every event time).
    """
    timeline.check_point(frm)
    timeline.check_point(to)
    if to.t < frm.t:
        raise InvalidArgumentError(f'Path must go up in time: {frm} -> {to}')
    region = region or FullSpace()
    s, t = as_time(frm.t), as_time(to.t)

    intervals_cache: dict[int, list] = {}

    def intervals(x: int) -> list:
        if x not in intervals_cache:
            intervals_cache[x] = region.intervals(x)
        return intervals_cache[x]

    if not region.contains(frm.x, s):
        return False
    if block_predicate is not None and block_predicate(frm.x, float(s)):
        return False
    reached = {frm.x: s}  # site -> time it was reached
    events = timeline.events
    lo, hi = first_after(events.times, s), first_after(events.times, t)

    def alive_at(x: int, time: Fraction) -> bool:
        return segment_inside(intervals(x), reached[x], time)

    current_time = None
    for i in range(lo, hi):
        event_time = float(events.times[i])
        if block_predicate is not None and current_time is not None and event_time != current_time:
            _apply_block(reached, block_predicate, current_time)
        current_time = event_time
        x = int(events.src[i])
        if events.kinds[i] == DEATH:
            reached.pop(x, None)
            continue
        if require_2path and events.one_only[i]:
            continue
        y = int(events.dst[i])
        if x in reached and alive_at(x, event_time) and (y not in reached or not alive_at(y, event_time)) \
                and region.contains(y, event_time):
            reached[y] = Fraction(event_time)
        if not reached:
            return False
    if block_predicate is not None and current_time is not None:
        _apply_block(reached, block_predicate, current_time)
    return to.x in reached and alive_at(to.x, t)


def _apply_block(reached: dict[int, Fraction], block_predicate: Callable[[int, float], bool], time: float) -> None:
    for x in [x for x in reached if block_predicate(x, time)]:
        del reached[x]
