from fractions import Fraction

import pytest

from wedgecp.contact import (
    Configuration, default_margin, estimate_edge_speed, evolve, extract_edges, sample_upper_invariant
)
from wedgecp.errors import InvalidArgumentError, OutOfWindowError
from wedgecp.regions import FullSpace, HalfSpace, Parallelogram, Wedge
from wedgecp.substrate import EventTimeline, SeedRecord, Stream, build_timeline

from path_oracle import reached_sites


def hand_timeline(events, window=(-2, 4), horizon=10.0) -> EventTimeline:
    return EventTimeline.from_events(window, horizon, events)


def test_configuration_parse():
    assert Configuration.parse('single:3') == Configuration.single(3)
    assert Configuration.parse('interval:-1,2').sites == frozenset({-1, 0, 1, 2})
    assert Configuration.parse('below:0').clip((-3, 3)) == frozenset({-3, -2, -1, 0})
    assert Configuration.parse('above:2').clip((-3, 3)) == frozenset({2, 3})
    assert Configuration.parse('full').clip((0, 2)) == frozenset({0, 1, 2})
    assert Configuration.parse('empty').is_empty()
    with pytest.raises(InvalidArgumentError):
        Configuration.parse('single:x')
    with pytest.raises(InvalidArgumentError):
        Configuration.parse('cloud')


def test_evolve_on_hand_made_events():
    timeline = hand_timeline([
        {'kind': 'arrow', 'x': 0, 'y': 1, 't': 1.0},
        {'kind': 'death', 'x': 0, 't': 2.0},
        {'kind': 'arrow', 'x': 1, 'y': 2, 't': 2.5},
        {'kind': 'death', 'x': 1, 't': 3.0},
        {'kind': 'death', 'x': 2, 't': 4.0},
        {'kind': 'arrow', 'x': 2, 'y': 3, 't': 4.0},
    ])
    trajectory = evolve(timeline, None, Configuration.single(0))
    assert trajectory.change_rows() == [(1.0, 1, 1), (2.0, 0, 0), (2.5, 2, 1), (3.0, 1, 0), (4.0, 2, 0)]
    assert trajectory.final == frozenset()
    assert not trajectory.survived
    assert trajectory.extinction_time == 4.0
    assert not trajectory.edge_touched
    assert trajectory.state_at(2.0) == frozenset({1})
    assert trajectory.state_at(Fraction(11, 4)) == frozenset({1, 2})
    with pytest.raises(OutOfWindowError):
        trajectory.state_at(11)


def test_events_at_the_start_time_are_past():
    timeline = hand_timeline([
        {'kind': 'arrow', 'x': 0, 'y': 1, 't': 1.0},
        {'kind': 'arrow', 'x': 1, 'y': 2, 't': 2.0},
    ])
    assert evolve(timeline, None, Configuration.single(0), start_time=1.0).final == frozenset({0})
    assert evolve(timeline, None, Configuration.single(1), start_time=1.0).final == frozenset({1, 2})
    assert evolve(timeline, None, Configuration.single(1), start_time=1.0, end_time=1.5).final == frozenset({1})


def test_region_blocks_infection_outside():
    timeline = hand_timeline([
        {'kind': 'arrow', 'x': 0, 'y': 1, 't': 0.5},
        {'kind': 'arrow', 'x': 0, 'y': 1, 't': 1.5},
    ])
    half = HalfSpace(Fraction(1), Fraction(0))
    assert evolve(timeline, half, Configuration.single(0), end_time=1.0).final == frozenset({0})
    assert evolve(timeline, half, Configuration.single(0)).final == frozenset({0, 1})


def test_sites_leave_with_the_region():
    timeline = hand_timeline([], window=(-1, 5))
    trajectory = evolve(timeline, Wedge(Fraction(1, 2), Fraction(1), Fraction(2)), Configuration.interval(0, 2))
    assert trajectory.change_rows() == [(0.0, 0, 0), (2.0, 1, 0), (4.0, 2, 0)]
    assert trajectory.state_at(1) == frozenset({1, 2})
    assert trajectory.extinction_time == 4.0


def test_initial_sites_must_be_inside_the_region():
    timeline = hand_timeline([])
    with pytest.raises(InvalidArgumentError):
        evolve(timeline, Wedge(Fraction(1, 2), Fraction(1), Fraction(2)), Configuration.single(3))
    with pytest.raises(OutOfWindowError):
        evolve(timeline, None, Configuration.single(0), end_time=11.0)


def test_two_paths_only_skips_one_only_arrows():
    timeline = hand_timeline([{'kind': 'arrow', 'x': 0, 'y': 1, 't': 1.0, 'one_only': True}])
    assert evolve(timeline, None, Configuration.single(0)).final == frozenset({0, 1})
    assert evolve(timeline, None, Configuration.single(0), two_paths_only=True).final == frozenset({0})


def test_edge_touched():
    timeline = hand_timeline([{'kind': 'arrow', 'x': 3, 'y': 4, 't': 1.0}])
    assert evolve(timeline, None, Configuration.single(3)).edge_touched
    assert not evolve(timeline, None, Configuration.single(0)).edge_touched
    assert not evolve(timeline, None, Configuration.half_line_below(0)).edge_touched
    timeline = hand_timeline([{'kind': 'arrow', 'x': 2, 'y': 3, 't': 1.0}])
    assert evolve(timeline, None, Configuration.single(2)).edge_touched
    assert evolve(timeline, None, Configuration.single(-1)).edge_touched
    assert not evolve(timeline, None, Configuration.single(1)).edge_touched
    assert not evolve(timeline, None, Configuration.half_line_below(-1)).edge_touched


def test_no_arrows_means_only_deaths():
    timeline = build_timeline((0, 9), 1.0, 0.0, 0.0, 8)
    trajectory = evolve(timeline, None, Configuration.interval(0, 9), stop_when_empty=False)
    assert trajectory.final == frozenset(x for x in range(10) if len(timeline.deaths[x]) == 0)
    assert all(state == 0 for _, _, state in trajectory.change_rows())


@pytest.mark.parametrize('seed', range(3))
def test_additivity(seed):
    timeline = build_timeline((-10, 10), 3.0, 2.0, 0.0, SeedRecord(seed, Stream.TIMELINE, 0))
    a, b = Configuration.single(-3), Configuration.interval(2, 4)
    union = Configuration(a.sites | b.sites)
    assert evolve(timeline, None, union).final == evolve(timeline, None, a).final | evolve(timeline, None, b).final


@pytest.mark.parametrize('seed', range(3))
def test_restricted_process_is_dominated(seed):
    timeline = build_timeline((-2, 30), 5.0, 3.0, 0.0, SeedRecord(seed, Stream.SURVIVAL, 0))
    wedge = Wedge(Fraction(1, 2), Fraction(2), Fraction(6))
    small = Wedge(Fraction(1, 2), Fraction(2), Fraction(3))
    initial = Configuration.interval(0, 3)
    full = evolve(timeline, None, initial).final
    inside = evolve(timeline, wedge, initial).final
    assert evolve(timeline, small, initial).final <= inside <= full


@pytest.mark.parametrize('seed', range(4))
@pytest.mark.parametrize('region', [
    FullSpace(),
    Wedge(Fraction(1, 2), Fraction(1), Fraction(3), dx=Fraction(2)),
    Parallelogram('L', 0, 0, Fraction(21), Fraction(1, 2), Fraction(1, 7)),
], ids=['full', 'wedge', 'parallelogram'])
def test_evolution_matches_graph_reachability(seed, region):
    timeline = build_timeline((0, 9), 3.0, 2.0, 0.0, SeedRecord(seed, Stream.ORACLE, 7))
    sources = [x for x in (1, 2, 3, 5, 8) if region.contains(x, 0)]
    final = evolve(timeline, region, Configuration(frozenset(sources))).final
    assert final == reached_sites(timeline, sources, region)


def test_extract_edges():
    timeline = hand_timeline([
        {'kind': 'arrow', 'x': 0, 'y': 1, 't': 1.0},
        {'kind': 'death', 'x': 0, 't': 2.0},
        {'kind': 'death', 'x': 1, 't': 3.0},
    ])
    edges = extract_edges(evolve(timeline, None, Configuration.single(0)))
    assert edges.rows() == [(0.0, 0, 0), (1.0, 0, 1), (2.0, 1, 1), (3.0, None, None)]


def test_default_margin():
    assert default_margin(4.0, 10.0) == 100
    assert default_margin(0.0, 0.3) == 1


def test_upper_invariant_sample_is_reproducible():
    a = sample_upper_invariant(3.0, (0, 40), 5.0, 2)
    b = sample_upper_invariant(3.0, (0, 40), 5.0, 2)
    assert a.sites == b.sites
    assert 0 < a.metadata['density'] <= 1
    with pytest.raises(InvalidArgumentError):
        sample_upper_invariant(3.0, (0, 40), 0.0)


def test_edge_speed_of_a_dying_process_is_negative():
    estimate = estimate_edge_speed(0.0, 5.0, 20, seed=1)
    assert estimate.used == 20
    assert estimate.discarded == 0
    assert estimate.alpha_hat < 0


def test_edge_speed_of_a_supercritical_process_is_positive():
    estimate = estimate_edge_speed(4.0, 5.0, 20, seed=1)
    assert estimate.alpha_hat > 0
    assert estimate.interval[0] <= estimate.alpha_hat <= estimate.interval[1]
    assert estimate.to_dict()['replicas'] == 20
