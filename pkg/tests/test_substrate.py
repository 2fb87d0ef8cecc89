import numpy as np
import pytest
from numpy.testing import assert_array_equal

from wedgecp.errors import InvalidArgumentError, OutOfWindowError
from wedgecp.regions import HalfSpace, Wedge
from wedgecp.substrate import (
    ARROW, DEATH, EventTimeline, SeedRecord, SpaceTimePoint, Stream, active_path_exists, build_timeline, first_after
)

from path_oracle import has_path, path_graph


def assert_same_events(a: EventTimeline, b: EventTimeline) -> None:
    for name in ('times', 'kinds', 'src', 'dst', 'one_only'):
        assert_array_equal(getattr(a.events, name), getattr(b.events, name))


def test_timeline_is_reproducible():
    record = SeedRecord(3, Stream.TIMELINE, 1)
    a = build_timeline((0, 20), 5.0, 2.0, 0.3, record)
    b = build_timeline((0, 20), 5.0, 2.0, 0.3, SeedRecord(3, Stream.TIMELINE, 1))
    assert_same_events(a, b)
    c = build_timeline((0, 20), 5.0, 2.0, 0.3, SeedRecord(4, Stream.TIMELINE, 1))
    assert not np.array_equal(a.events.times, c.events.times)


def test_site_events_do_not_depend_on_the_window():
    small = build_timeline((0, 5), 4.0, 1.5, 0.0, 11)
    large = build_timeline((-5, 10), 4.0, 1.5, 0.0, 11)
    for x in range(0, 6):
        assert_array_equal(small.deaths[x], large.deaths[x])
    for edge in ((2, 3), (3, 2)):
        assert_array_equal(small.arrows[edge], large.arrows[edge])


def test_poisson_counts():
    timeline = build_timeline((0, 99), 10.0, 2.0, 0.0, 5)
    deaths = sum(len(times) for times in timeline.deaths.values())
    arrows = sum(len(times) for times in timeline.arrows.values())
    assert 850 < deaths < 1150
    assert abs(arrows - 99 * 2 * 2.0 * 10.0) < 400
    assert np.all(np.diff(timeline.events.times) >= 0)
    assert timeline.events.times.min() > 0 and timeline.events.times.max() <= 10.0


def test_one_only_labels():
    timeline = build_timeline((0, 49), 10.0, 4.0, 0.5, 2)
    labels = np.concatenate(list(timeline.one_only.values()))
    assert 0.4 < labels.mean() < 0.6
    assert not build_timeline((0, 49), 10.0, 4.0, 0.0, 2).events.one_only.any()


def test_deaths_come_first_at_equal_times():
    timeline = EventTimeline.from_events((0, 2), 5.0, [
        {'kind': 'arrow', 'x': 0, 'y': 1, 't': 1.0},
        {'kind': 'death', 'x': 1, 't': 1.0},
        {'kind': 'arrow', 'x': 2, 'y': 1, 't': 0.5},
    ])
    assert timeline.events.times.tolist() == [0.5, 1.0, 1.0]
    assert timeline.events.kinds.tolist() == [ARROW, DEATH, ARROW]


@pytest.mark.parametrize('event', [
    {'kind': 'arrow', 'x': 0, 'y': 2, 't': 1.0},
    {'kind': 'death', 'x': 0, 't': 0.0},
    {'kind': 'death', 'x': 0, 't': 6.0},
    {'kind': 'death', 'x': 5, 't': 1.0},
    {'kind': 'birth', 'x': 0, 't': 1.0},
])
def test_from_events_rejects_invalid_records(event):
    with pytest.raises(InvalidArgumentError):
        EventTimeline.from_events((0, 2), 5.0, [event])


def test_build_timeline_rejects_invalid_input():
    with pytest.raises(InvalidArgumentError):
        build_timeline((3, 1), 1.0, 1.0)
    with pytest.raises(InvalidArgumentError):
        build_timeline((0, 3), 0.0, 1.0)
    with pytest.raises(InvalidArgumentError):
        build_timeline((0, 3), 1.0, -1.0)
    with pytest.raises(InvalidArgumentError):
        build_timeline((0, 3), 1.0, 1.0, 1.5)
    with pytest.raises(InvalidArgumentError):
        SeedRecord(-1)


def test_first_after():
    times = np.array([0.5, 1.0, 1.0, 2.0])
    assert first_after(times, 0) == 0
    assert first_after(times, 1.0) == 3
    assert first_after(times, 3) == 4


def test_jsonl_round_trip(tmp_path):
    timeline = build_timeline((-3, 3), 2.0, 3.0, 0.25, SeedRecord(1, Stream.GBT, 2))
    path = tmp_path / 'events.jsonl'
    timeline.to_jsonl(path)
    loaded = EventTimeline.from_jsonl(path)
    assert loaded.window == (-3, 3)
    assert loaded.seed == timeline.seed
    assert_same_events(timeline, loaded)


def test_masked_keeps_events_inside_the_region():
    timeline = build_timeline((0, 9), 5.0, 2.0, 0.0, 4)
    masked = timeline.masked(HalfSpace(0, 3))
    assert all(len(masked.deaths[x]) == 0 for x in range(4, 10))
    assert_array_equal(masked.deaths[2], timeline.deaths[2])
    assert len(masked.arrows[(3, 4)]) == 0
    assert_array_equal(masked.arrows[(2, 3)], timeline.arrows[(2, 3)])


def test_active_path_on_hand_made_events():
    timeline = EventTimeline.from_events((0, 3), 10.0, [
        {'kind': 'arrow', 'x': 0, 'y': 1, 't': 1.0, 'one_only': True},
        {'kind': 'death', 'x': 0, 't': 2.0},
        {'kind': 'arrow', 'x': 1, 'y': 2, 't': 3.0},
        {'kind': 'death', 'x': 1, 't': 4.0},
    ])
    start = SpaceTimePoint(0, 0)
    assert active_path_exists(timeline, None, start, SpaceTimePoint(2, 10))
    assert not active_path_exists(timeline, None, start, SpaceTimePoint(0, 10))
    assert not active_path_exists(timeline, None, start, SpaceTimePoint(1, 10))
    assert active_path_exists(timeline, None, start, SpaceTimePoint(1, 3.5))
    assert not active_path_exists(timeline, None, start, SpaceTimePoint(2, 10), require_2path=True)
    assert not active_path_exists(timeline, None, start, SpaceTimePoint(2, 10),
                                  block_predicate=lambda x, t: x == 1 and t >= 2.0)
    assert not active_path_exists(timeline, HalfSpace(0, 1), start, SpaceTimePoint(2, 10))


def test_active_path_rejects_points_outside_the_window():
    timeline = build_timeline((0, 3), 1.0, 1.0, 0.0, 0)
    with pytest.raises(OutOfWindowError):
        active_path_exists(timeline, None, SpaceTimePoint(0, 0), SpaceTimePoint(4, 1))
    with pytest.raises(OutOfWindowError):
        active_path_exists(timeline, None, SpaceTimePoint(0, 0), SpaceTimePoint(0, 2))
    with pytest.raises(InvalidArgumentError):
        active_path_exists(timeline, None, SpaceTimePoint(0, 1), SpaceTimePoint(0, 0.5))


@pytest.mark.parametrize('seed', range(4))
@pytest.mark.parametrize('lambda_', [1.0, 3.0])
def test_active_paths_match_graph_reachability(seed, lambda_):
    timeline = build_timeline((0, 7), 2.0, lambda_, 0.0, SeedRecord(seed, Stream.ORACLE, 0))
    graph = path_graph(timeline)
    for x in (0, 3, 7):
        for y in range(8):
            expected = has_path(graph, (x, 0.0), (y, 2.0))
            assert active_path_exists(timeline, None, SpaceTimePoint(x, 0), SpaceTimePoint(y, 2.0)) == expected, (x, y)


@pytest.mark.parametrize('seed', range(4))
def test_wedge_restricted_paths_match_graph_reachability(seed):
    wedge = Wedge('1/2', '1', '3', dx='2')
    timeline = build_timeline((0, 9), 3.0, 3.0, 0.0, SeedRecord(seed, Stream.ORACLE, 1))
    graph = path_graph(timeline, wedge)
    for x in (2, 3, 5):
        for y in range(10):
            expected = wedge.contains(y, 3.0) and has_path(graph, (x, 0.0), (y, 3.0))
            assert active_path_exists(timeline, wedge, SpaceTimePoint(x, 0), SpaceTimePoint(y, 3.0)) == expected, (x, y)
