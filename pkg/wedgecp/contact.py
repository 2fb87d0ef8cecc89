"""Restricted and unrestricted contact processes driven by an event timeline."""
import heapq
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Optional, Union

import numpy as np

from wedgecp.errors import InvalidArgumentError, OutOfWindowError, WindowTooSmallError
from wedgecp.regions import FullSpace, Region, Time, as_time, in_intervals
from wedgecp.replicas import run_replicas
from wedgecp.substrate import (
    ARROW, DEATH, EventTimeline, SeedRecord, Stream, as_seed, build_timeline, first_after
)
from wedgecp.utils import mean_interval

logger = logging.getLogger(__name__)

MAX_TOUCHED_FRACTION = 0.1


@dataclass(frozen=True)
class Configuration:
    """A set of occupied sites: finite `sites` plus optional half-lines x <= `below` and x >= `above`."""
    sites: frozenset = frozenset()
    below: Optional[int] = None
    above: Optional[int] = None
    metadata: dict[str, Any] = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, 'sites', frozenset(int(x) for x in self.sites))

    @classmethod
    def empty(cls) -> 'Configuration':
        return cls()

    @classmethod
    def single(cls, x: int) -> 'Configuration':
        return cls(frozenset([x]))

    @classmethod
    def interval(cls, a: int, b: int) -> 'Configuration':
        return cls(frozenset(range(a, b + 1)))

    @classmethod
    def half_line_below(cls, x: int) -> 'Configuration':
        return cls(below=x)

    @classmethod
    def half_line_above(cls, x: int) -> 'Configuration':
        return cls(above=x)

    @classmethod
    def full(cls) -> 'Configuration':
        return cls(below=0, above=1)

    @classmethod
    def parse(cls, text: str) -> 'Configuration':
        """Parses ``empty``, ``full``, ``single:X``, ``interval:A,B``, ``below:X`` or ``above:X``."""
        name, _, argument = text.strip().partition(':')
        try:
            if name == 'empty':
                return cls.empty()
            if name == 'full':
                return cls.full()
            if name == 'single':
                return cls.single(int(argument))
            if name == 'interval':
                a, b = argument.split(',')
                return cls.interval(int(a), int(b))
            if name == 'below':
                return cls.half_line_below(int(argument))
            if name == 'above':
                return cls.half_line_above(int(argument))
        except ValueError:
            pass
        raise InvalidArgumentError(f'Invalid initial configuration {text!r}; expected empty, full, single:X, '
                                   f'interval:A,B, below:X or above:X.')

    def contains(self, x: int) -> bool:
        return x in self.sites or (self.below is not None and x <= self.below) \
            or (self.above is not None and x >= self.above)

    def clip(self, window: tuple[int, int]) -> frozenset:
        x_min, x_max = window
        sites = {x for x in self.sites if x_min <= x <= x_max}
        if self.below is not None:
            sites.update(range(x_min, min(self.below, x_max) + 1))
        if self.above is not None:
            sites.update(range(max(self.above, x_min), x_max + 1))
        return frozenset(sites)

    def is_empty(self) -> bool:
        return not self.sites and self.below is None and self.above is None


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Change log of a contact process over [start_time, end_time]."""
    initial: Configuration
    initial_sites: frozenset
    window: tuple[int, int]
    start_time: Fraction
    end_time: Fraction
    region: Region
    times: np.ndarray
    sites: np.ndarray
    states: np.ndarray
    edge_touched: bool
    final: frozenset
    extinction_time: Optional[float] = None

    @property
    def survived(self) -> bool:
        return bool(self.final)

    @property
    def n_changes(self) -> int:
        return len(self.times)

    def state_at(self, t: Time) -> frozenset:
        """Occupied sites after all changes at times <= t."""
        if t < self.start_time or t > self.end_time:
            raise OutOfWindowError(f'Time {t} outside trajectory range [{self.start_time}, {self.end_time}].')
        occupied = set(self.initial_sites)
        n = first_after(self.times, t)
        for x, state in zip(self.sites[:n].tolist(), self.states[:n].tolist()):
            if state:
                occupied.add(x)
            else:
                occupied.discard(x)
        return frozenset(occupied)

    def edges_at(self, t: Time) -> Optional[tuple[int, int]]:
        state = self.state_at(t)
        if not state:
            return None
        return min(state), max(state)

    def change_rows(self) -> list[tuple[float, int, int]]:
        return list(zip(self.times.tolist(), self.sites.tolist(), self.states.tolist()))

    def summary(self) -> dict[str, Any]:
        return {
            'survived': self.survived,
            'final_size': len(self.final),
            'edge_touched': self.edge_touched,
            'n_changes': self.n_changes,
            'extinction_time': self.extinction_time,
        }


@dataclass(frozen=True, eq=False)
class EdgePath:
    """Left and right edges after each change; `defined` is False while the configuration is empty."""
    times: np.ndarray
    left: np.ndarray
    right: np.ndarray
    defined: np.ndarray

    def rows(self) -> list[tuple[float, Optional[int], Optional[int]]]:
        rows = []
        for t, l, r, ok in zip(self.times.tolist(), self.left.tolist(), self.right.tolist(), self.defined.tolist()):
            rows.append((t, l if ok else None, r if ok else None))
        return rows


def evolve(timeline: EventTimeline, region: Optional[Region], initial: Configuration, *,
           start_time: Time = 0, end_time: Optional[Time] = None, two_paths_only: bool = False,
           stop_when_empty: bool = True) -> Trajectory:
    """Runs the `region`-restricted contact process on the timeline from `initial` at `start_time`.

    A death clears its site; an arrow x -> y at time t occupies y when x is occupied and (y, t) is in the region;
    a site is cleared right after the last time of a membership interval. Events at `start_time` itself are
    treated as past. With `two_paths_only`, 1-only arrows are ignored.

    `edge_touched` is set when an occupied site comes within one site of a window end that the initial
    configuration does not extend to.
    """
    region = region or FullSpace()
    x_min, x_max = timeline.window
    start = as_time(start_time)
    end = as_time(timeline.horizon if end_time is None else end_time)
    if not 0 <= start <= end or end > timeline.horizon:
        raise OutOfWindowError(f'Evolution range [{start}, {end}] outside timeline horizon {timeline.horizon}.')
    sites = initial.clip(timeline.window)
    for x in sites:
        if not region.contains(x, start):
            raise InvalidArgumentError(f'Initial site {x} is outside the region at time {start}.')

    full = region.is_full
    intervals_cache: dict[int, list] = {}

    def intervals(x: int) -> list:
        if x not in intervals_cache:
            intervals_cache[x] = region.intervals(x)
        return intervals_cache[x]

    exits: list[tuple[Fraction, int]] = []

    def schedule_exit(x: int, t) -> None:
        for a, b in intervals(x):
            if a <= t and (b is None or t <= b):
                if b is not None:
                    heapq.heappush(exits, (b, x))
                return

    state = bytearray(x_max - x_min + 1)
    for x in sites:
        state[x - x_min] = 1
        if not full:
            schedule_exit(x, start)
    count = len(sites)
    guard_low = initial.below is None
    guard_high = initial.above is None
    touched = (guard_low and any(state[:2])) or (guard_high and any(state[-2:]))

    log_times, log_sites, log_states = [], [], []
    extinction_time = None

    events = timeline.events
    lo, hi = first_after(events.times, start), first_after(events.times, end)
    keep = np.arange(lo, hi)
    site_lo, site_hi = region.site_bounds(start, end)
    site_lo = x_min if site_lo is None else max(site_lo, x_min)
    site_hi = x_max if site_hi is None else min(site_hi, x_max)
    src, dst = events.src[keep], events.dst[keep]
    mask = (src >= site_lo) & (src <= site_hi) & (dst >= site_lo) & (dst <= site_hi)
    if two_paths_only:
        mask &= ~((events.kinds[keep] == ARROW) & events.one_only[keep])
    keep = keep[mask]

    if count:
        for t, kind, x, y in zip(events.times[keep].tolist(), events.kinds[keep].tolist(),
                                 events.src[keep].tolist(), events.dst[keep].tolist()):
            while exits and exits[0][0] < t:
                b, z = heapq.heappop(exits)
                if state[z - x_min]:
                    state[z - x_min] = 0
                    count -= 1
                    log_times.append(float(b))
                    log_sites.append(z)
                    log_states.append(0)
            if count == 0 and stop_when_empty:
                break
            if kind == DEATH:
                if state[x - x_min]:
                    state[x - x_min] = 0
                    count -= 1
                    log_times.append(t)
                    log_sites.append(x)
                    log_states.append(0)
            elif state[x - x_min] and not state[y - x_min]:
                if full or in_intervals(intervals(y), t):
                    state[y - x_min] = 1
                    count += 1
                    log_times.append(t)
                    log_sites.append(y)
                    log_states.append(1)
                    if not full:
                        schedule_exit(y, t)
                    if (guard_low and y <= x_min + 1) or (guard_high and y >= x_max - 1):
                        touched = True
            if count == 0 and stop_when_empty:
                break
        while exits and exits[0][0] < end:
            b, z = heapq.heappop(exits)
            if state[z - x_min]:
                state[z - x_min] = 0
                count -= 1
                log_times.append(float(b))
                log_sites.append(z)
                log_states.append(0)

    if sites and count == 0:
        extinction_time = log_times[-1]
    final = frozenset(x_min + i for i, v in enumerate(state) if v)
    return Trajectory(
        initial=initial,
        initial_sites=sites,
        window=timeline.window,
        start_time=start,
        end_time=end,
        region=region,
        times=np.asarray(log_times, dtype=float),
        sites=np.asarray(log_sites, dtype=np.int64),
        states=np.asarray(log_states, dtype=np.int8),
        edge_touched=touched,
        final=final,
        extinction_time=extinction_time,
    )


def extract_edges(trajectory: Trajectory) -> EdgePath:
    """Edges l_t, r_t of the occupied set at the start and after every change."""
    x_min, x_max = trajectory.window
    state = bytearray(x_max - x_min + 1)
    for x in trajectory.initial_sites:
        state[x - x_min] = 1
    count = len(trajectory.initial_sites)
    left = min(trajectory.initial_sites) if count else 0
    right = max(trajectory.initial_sites) if count else 0

    times = [float(trajectory.start_time)]
    lefts, rights, defined = [left], [right], [count > 0]
    for t, x, new_state in trajectory.change_rows():
        if new_state:
            state[x - x_min] = 1
            count += 1
            if count == 1:
                left = right = x
            else:
                left, right = min(left, x), max(right, x)
        else:
            state[x - x_min] = 0
            count -= 1
            if count:
                while not state[right - x_min]:
                    right -= 1
                while not state[left - x_min]:
                    left += 1
        times.append(t)
        lefts.append(left)
        rights.append(right)
        defined.append(count > 0)
    return EdgePath(np.asarray(times), np.asarray(lefts, dtype=np.int64), np.asarray(rights, dtype=np.int64),
                    np.asarray(defined, dtype=bool))


def default_margin(lambda_: float, horizon: float) -> int:
    return int(math.ceil(2 * (lambda_ + 1) * horizon))


def sample_upper_invariant(lambda_: float, window: tuple[int, int], burn_in_time: float,
                           seed: Union[SeedRecord, int, None] = None) -> Configuration:
    """Approximate sample of the upper invariant measure: the full-space process from all ones after a burn-in."""
    if lambda_ < 0 or burn_in_time <= 0:
        raise InvalidArgumentError(f'Upper invariant sampling needs lambda >= 0 and burn_in > 0: {lambda_}, {burn_in_time}')
    seed = as_seed(seed)
    nu_seed = SeedRecord(seed.master, Stream.UPPER_INVARIANT, seed.substream)
    timeline = build_timeline(window, burn_in_time, lambda_, 0.0, nu_seed)
    trajectory = evolve(timeline, FullSpace(), Configuration.full())
    metadata = {'burn_in': burn_in_time, 'lambda': lambda_, 'window': list(window),
                'density': len(trajectory.final) / timeline.n_sites}
    return Configuration(trajectory.final, metadata=metadata)


@dataclass(frozen=True)
class EdgeSpeedEstimate:
    lambda_: float
    horizon: float
    alpha_hat: float
    stderr: float
    interval: tuple[float, float]
    replicas: int
    used: int
    discarded: int
    extinct: int

    def to_dict(self) -> dict[str, Any]:
        return {
            'lambda': self.lambda_,
            'horizon': self.horizon,
            'alpha_hat': self.alpha_hat,
            'stderr': self.stderr,
            'interval': list(self.interval),
            'replicas': self.replicas,
            'used': self.used,
            'discarded': self.discarded,
            'extinct': self.extinct,
        }


def _edge_speed_replica(task: tuple[float, float, int, int, int]) -> tuple[Optional[int], bool]:
    lambda_, horizon, margin, master, replica = task
    window = (-margin, margin)
    timeline = build_timeline(window, horizon, lambda_, 0.0, SeedRecord(master, Stream.EDGE_SPEED, replica))
    trajectory = evolve(timeline, FullSpace(), Configuration.half_line_below(0))
    if not trajectory.final:
        return None, trajectory.edge_touched
    return max(trajectory.final), trajectory.edge_touched


def estimate_edge_speed(lambda_: float, horizon: float, replicas: int, seed: int = 0, *,
                        window_margin: Optional[int] = None, threads: int = 1,
                        confidence: float = 0.95) -> EdgeSpeedEstimate:
    """Mean of r_T / T for the process started from the negative half-line, with a normal-theory interval.

    Replicas whose right edge touched the window are discarded; a replica that died out inside the window
    is recorded at the left window end, since its half-line edge retreated past it.
    """
    if lambda_ < 0 or horizon <= 0 or replicas < 1:
        raise InvalidArgumentError(f'Edge speed needs lambda >= 0, horizon > 0, replicas >= 1: {lambda_}, {horizon}, {replicas}')
    margin = window_margin or default_margin(lambda_, horizon)
    tasks = [(float(lambda_), float(horizon), margin, seed, replica) for replica in range(replicas)]
    results = run_replicas(_edge_speed_replica, tasks, threads=threads)
    touched = sum(1 for _, edge_touched in results if edge_touched)
    if touched > MAX_TOUCHED_FRACTION * replicas:
        raise WindowTooSmallError(touched, replicas)
    speeds, extinct = [], 0
    for right, edge_touched in results:
        if edge_touched:
            continue
        if right is None:
            extinct += 1
            right = -margin
        speeds.append(right / horizon)
    alpha_hat, stderr, interval = mean_interval(speeds, confidence)
    logger.info(f'edge speed lambda={lambda_}: {alpha_hat:.4f} +/- {stderr:.4f} ({touched} discarded, {extinct} extinct)')
    return EdgeSpeedEstimate(float(lambda_), float(horizon), alpha_hat, stderr, interval, replicas, len(speeds),
                             touched, extinct)
