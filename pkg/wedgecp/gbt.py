"""Grass-bushes-trees process: states 0 (grass), 1 (bushes), 2 (trees).

Forward evolution on a labeled timeline follows the graphical construction: 2's spread along arrows that
are not 1-only, onto 0's and 1's; 1's spread along every arrow, onto 0's only. A direct jump simulation of
the transition rates and a dense-generator matrix exponential serve as distributional oracles.
"""
import itertools
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Mapping, Optional, Sequence, Union

import numpy as np
from scipy.linalg import expm

from wedgecp.errors import InvalidArgumentError, OutOfWindowError
from wedgecp.regions import Time, as_time
from wedgecp.substrate import DEATH, EventTimeline, SeedRecord, Stream, as_seed, first_after

logger = logging.getLogger(__name__)

LABEL_TOLERANCE = 1e-12
GBT_STATES = (0, 1, 2)


@dataclass(frozen=True)
class GbtConfiguration:
    """Finite site states plus optional half-lines x <= `below` in `below_state` and x >= `above` in `above_state`."""
    states: tuple = ()
    below: Optional[int] = None
    below_state: int = 0
    above: Optional[int] = None
    above_state: int = 0

    def __post_init__(self):
        pairs = self.states.items() if isinstance(self.states, Mapping) else self.states
        normalized = tuple(sorted((int(x), int(s)) for x, s in pairs))
        for _, s in normalized + ((0, self.below_state), (0, self.above_state)):
            if s not in GBT_STATES:
                raise InvalidArgumentError(f'GBT states must be 0, 1 or 2: {s}')
        object.__setattr__(self, 'states', normalized)

    @classmethod
    def invasion_initial(cls) -> 'GbtConfiguration':
        """2's on the negative half-line, a single 1 at the origin, 0's elsewhere."""
        return cls({0: 1}, below=-1, below_state=2)

    @classmethod
    def from_sequence(cls, states: Sequence[int], x0: int = 0) -> 'GbtConfiguration':
        return cls({x0 + i: s for i, s in enumerate(states)})

    @classmethod
    def parse(cls, text: str) -> 'GbtConfiguration':
        """Parses ``empty``, ``invasion`` or ``sites:X=S,X=S,...``."""
        name, _, argument = text.strip().partition(':')
        if name == 'empty':
            return cls()
        if name == 'invasion':
            return cls.invasion_initial()
        if name == 'sites':
            try:
                pairs = [item.split('=') for item in argument.split(',') if item]
                return cls({int(x): int(s) for x, s in pairs})
            except ValueError:
                pass
        raise InvalidArgumentError(f'Invalid GBT initial configuration {text!r}; expected empty, invasion or sites:X=S,...')

    def clip(self, window: tuple[int, int]) -> dict[int, int]:
        x_min, x_max = window
        clipped = {}
        if self.below is not None and self.below_state:
            clipped.update({x: self.below_state for x in range(x_min, min(self.below, x_max) + 1)})
        if self.above is not None and self.above_state:
            clipped.update({x: self.above_state for x in range(max(self.above, x_min), x_max + 1)})
        for x, s in self.states:
            if x_min <= x <= x_max:
                if s:
                    clipped[x] = s
                else:
                    clipped.pop(x, None)
        return clipped


@dataclass(frozen=True, eq=False)
class GbtTrajectory:
    initial: GbtConfiguration
    initial_states: dict[int, int]
    window: tuple[int, int]
    start_time: Fraction
    end_time: Fraction
    times: np.ndarray
    sites: np.ndarray
    states: np.ndarray
    count_times: np.ndarray
    count1: np.ndarray
    count2: np.ndarray
    edge_touched: bool
    final: dict[int, int] = field(default_factory=dict)

    def state_at(self, t: Time) -> dict[int, int]:
        if t < self.start_time or t > self.end_time:
            raise OutOfWindowError(f'Time {t} outside trajectory range [{self.start_time}, {self.end_time}].')
        state = dict(self.initial_states)
        n = first_after(self.times, t)
        for x, s in zip(self.sites[:n].tolist(), self.states[:n].tolist()):
            if s:
                state[x] = s
            else:
                state.pop(x, None)
        return state

    def sites_in_state(self, t: Time, s: int) -> frozenset:
        return frozenset(x for x, v in self.state_at(t).items() if v == s)

    @property
    def final_ones(self) -> int:
        return sum(1 for v in self.final.values() if v == 1)

    @property
    def final_twos(self) -> int:
        return sum(1 for v in self.final.values() if v == 2)

    def change_rows(self) -> list[tuple[float, int, int]]:
        return list(zip(self.times.tolist(), self.sites.tolist(), self.states.tolist()))

    def count_rows(self) -> list[tuple[float, int, int]]:
        return list(zip(self.count_times.tolist(), self.count1.tolist(), self.count2.tolist()))

    def summary(self) -> dict[str, Any]:
        return {
            'final_ones': self.final_ones,
            'final_twos': self.final_twos,
            'edge_touched': self.edge_touched,
            'n_changes': len(self.times),
        }


class _ChangeLog:
    """Accumulates changes and the running (|1's|, |2's|) counts."""

    def __init__(self, state: bytearray, start: float):
        self.times, self.sites, self.states = [], [], []
        self.n1 = sum(1 for v in state if v == 1)
        self.n2 = sum(1 for v in state if v == 2)
        self.count_times, self.count1, self.count2 = [start], [self.n1], [self.n2]

    def record(self, t: float, x: int, old: int, new: int) -> None:
        self.n1 += (new == 1) - (old == 1)
        self.n2 += (new == 2) - (old == 2)
        self.times.append(t)
        self.sites.append(x)
        self.states.append(new)
        self.count_times.append(t)
        self.count1.append(self.n1)
        self.count2.append(self.n2)


def _check_rates(lambda1: float, lambda2: float) -> None:
    if not lambda1 > lambda2 > 0:
        raise InvalidArgumentError(f'GBT rates must satisfy lambda1 > lambda2 > 0: {lambda1}, {lambda2}')


def one_only_probability(lambda1: float, lambda2: float) -> float:
    return (lambda1 - lambda2) / lambda1


def _trajectory(initial, initial_states, window, start, end, state, log, touched) -> GbtTrajectory:
    x_min = window[0]
    return GbtTrajectory(
        initial=initial,
        initial_states=initial_states,
        window=window,
        start_time=start,
        end_time=end,
        times=np.asarray(log.times, dtype=float),
        sites=np.asarray(log.sites, dtype=np.int64),
        states=np.asarray(log.states, dtype=np.int8),
        count_times=np.asarray(log.count_times, dtype=float),
        count1=np.asarray(log.count1, dtype=np.int64),
        count2=np.asarray(log.count2, dtype=np.int64),
        edge_touched=touched,
        final={x_min + i: v for i, v in enumerate(state) if v},
    )


def evolve_gbt(timeline: EventTimeline, lambda1: float, lambda2: float, initial: GbtConfiguration, *,
               start_time: Time = 0, end_time: Optional[Time] = None) -> GbtTrajectory:
    """GBT evolution on a timeline built with rate lambda1 and 1-only probability (lambda1 - lambda2)/lambda1."""
    _check_rates(lambda1, lambda2)
    if abs(timeline.lambda_ - lambda1) > LABEL_TOLERANCE:
        raise InvalidArgumentError(f'Timeline arrow rate {timeline.lambda_} differs from lambda1={lambda1}.')
    expected = one_only_probability(lambda1, lambda2)
    if abs(timeline.one_only_prob - expected) > LABEL_TOLERANCE:
        raise InvalidArgumentError(f'Timeline 1-only probability {timeline.one_only_prob} differs from '
                                   f'(lambda1 - lambda2)/lambda1 = {expected}.')
    x_min, x_max = timeline.window
    start = as_time(start_time)
    end = as_time(timeline.horizon if end_time is None else end_time)
    if not 0 <= start <= end or end > timeline.horizon:
        raise OutOfWindowError(f'Evolution range [{start}, {end}] outside timeline horizon {timeline.horizon}.')

    initial_states = initial.clip(timeline.window)
    state = bytearray(x_max - x_min + 1)
    for x, s in initial_states.items():
        state[x - x_min] = s
    guard_low = initial.below is None or not initial.below_state
    guard_high = initial.above is None or not initial.above_state
    touched = (guard_low and any(state[:2])) or (guard_high and any(state[-2:]))
    log = _ChangeLog(state, float(start))

    events = timeline.events
    lo, hi = first_after(events.times, start), first_after(events.times, end)
    for t, kind, x, y, label in zip(events.times[lo:hi].tolist(), events.kinds[lo:hi].tolist(),
                                    events.src[lo:hi].tolist(), events.dst[lo:hi].tolist(),
                                    events.one_only[lo:hi].tolist()):
        if kind == DEATH:
            old = state[x - x_min]
            if old:
                state[x - x_min] = 0
                log.record(t, x, old, 0)
            continue
        sx, sy = state[x - x_min], state[y - x_min]
        if sx == 2 and not label and sy != 2:
            new = 2
        elif sx == 1 and sy == 0:
            new = 1
        else:
            continue
        state[y - x_min] = new
        log.record(t, y, sy, new)
        if (guard_low and y <= x_min + 1) or (guard_high and y >= x_max - 1):
            touched = True
    return _trajectory(initial, initial_states, timeline.window, start, end, state, log, touched)


def evolve_gbt_direct(lambda1: float, lambda2: float, initial: GbtConfiguration, horizon: float,
                      seed: Union[SeedRecord, int, None], window: tuple[int, int]) -> GbtTrajectory:
    """Jump-chain simulation of the GBT transition rates on the window (no graphical representation).

    Occupied sites die at rate 1; a 0 becomes 1 at rate lambda1 n1 and 2 at rate lambda2 n2; a 1 becomes 2 at
    rate lambda2 n2, where n_i counts window neighbors in state i.
    """
    if lambda1 < 0 or lambda2 < 0 or horizon <= 0:
        raise InvalidArgumentError('Direct GBT simulation needs non-negative rates and a positive horizon.')
    x_min, x_max = window
    seed = as_seed(seed)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(
        entropy=seed.master, spawn_key=(int(Stream.GBT_DIRECT), seed.stream, seed.substream))))

    initial_states = initial.clip(window)
    n = x_max - x_min + 1
    s = np.zeros(n, dtype=np.int8)
    for x, v in initial_states.items():
        s[x - x_min] = v
    guard_low = initial.below is None or not initial.below_state
    guard_high = initial.above is None or not initial.above_state
    touched = (guard_low and bool(s[:2].any())) or (guard_high and bool(s[-2:].any()))
    log = _ChangeLog(bytearray(s.tobytes()), 0.0)

    t = 0.0
    while True:
        ones, twos = (s == 1).astype(float), (s == 2).astype(float)
        n1, n2 = np.zeros(n), np.zeros(n)
        n1[1:] += ones[:-1]
        n1[:-1] += ones[1:]
        n2[1:] += twos[:-1]
        n2[:-1] += twos[1:]
        death = (s > 0).astype(float)
        to_one = (s == 0) * lambda1 * n1
        to_two = (s < 2) * lambda2 * n2
        rates = np.concatenate([death, to_one, to_two])
        total = rates.sum()
        if total <= 0:
            break
        t += rng.exponential(1.0 / total)
        if t > horizon:
            break
        index = int(np.searchsorted(np.cumsum(rates), rng.uniform(0.0, total), side='right'))
        index = min(index, 3 * n - 1)
        kind, i = divmod(index, n)
        new = (0, 1, 2)[kind]
        old = int(s[i])
        s[i] = new
        log.record(t, x_min + i, old, new)
        if new and ((guard_low and i <= 1) or (guard_high and i >= n - 2)):
            touched = True
    state = bytearray(s.tobytes())
    return _trajectory(initial, initial_states, window, Fraction(0), as_time(horizon), state, log, touched)


def _state_index(states: Sequence[int]) -> int:
    return sum(s * 3 ** i for i, s in enumerate(states))


def gbt_generator(n_sites: int, lambda1: float, lambda2: float) -> np.ndarray:
    """Dense generator of the GBT chain on `n_sites` sites in a row; state index sum(s_i 3^i)."""
    if n_sites < 1:
        raise InvalidArgumentError(f'Generator needs at least one site: {n_sites}')
    size = 3 ** n_sites
    Q = np.zeros((size, size))
    for states in itertools.product(GBT_STATES, repeat=n_sites):
        i = _state_index(states)
        for x, s in enumerate(states):
            neighbors = [states[y] for y in (x - 1, x + 1) if 0 <= y < n_sites]
            n1, n2 = neighbors.count(1), neighbors.count(2)
            moves = []
            if s:
                moves.append((0, 1.0))
            if s == 0 and n1:
                moves.append((1, lambda1 * n1))
            if s < 2 and n2:
                moves.append((2, lambda2 * n2))
            for new, rate in moves:
                target = list(states)
                target[x] = new
                Q[i, _state_index(target)] += rate
        Q[i, i] = -Q[i].sum()
    return Q


def gbt_marginals(initial: Sequence[int], lambda1: float, lambda2: float, t: float) -> np.ndarray:
    """P(zeta_t(x) = s) for every site x of the row and state s, from the matrix exponential."""
    n_sites = len(initial)
    p0 = np.zeros(3 ** n_sites)
    p0[_state_index(initial)] = 1.0
    pt = p0 @ expm(gbt_generator(n_sites, lambda1, lambda2) * t)
    marginals = np.zeros((n_sites, 3))
    for states in itertools.product(GBT_STATES, repeat=n_sites):
        p = pt[_state_index(states)]
        for x, s in enumerate(states):
            marginals[x, s] += p
    return marginals
