import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import stats

from wedgecp.contact import Configuration, evolve
from wedgecp.errors import InvalidArgumentError
from wedgecp.gbt import (
    GbtConfiguration, evolve_gbt, evolve_gbt_direct, gbt_generator, gbt_marginals, one_only_probability
)
from wedgecp.substrate import EventTimeline, SeedRecord, Stream, build_timeline


def test_configuration():
    assert GbtConfiguration.parse('sites:0=2,2=1').clip((0, 3)) == {0: 2, 2: 1}
    assert GbtConfiguration.invasion_initial().clip((-3, 3)) == {-3: 2, -2: 2, -1: 2, 0: 1}
    assert GbtConfiguration.from_sequence([0, 2, 1], x0=5).clip((0, 10)) == {6: 2, 7: 1}
    with pytest.raises(InvalidArgumentError):
        GbtConfiguration({0: 3})
    with pytest.raises(InvalidArgumentError):
        GbtConfiguration.parse('sites:0=x')


def test_one_only_probability():
    assert one_only_probability(4.0, 2.0) == 0.5
    assert one_only_probability(4.0, 1.0) == 0.75


def test_evolve_gbt_on_hand_made_events():
    timeline = EventTimeline.from_events((-2, 5), 5.0, [
        {'kind': 'arrow', 'x': 0, 'y': 1, 't': 1.0, 'one_only': True},
        {'kind': 'arrow', 'x': 2, 'y': 1, 't': 1.5},
        {'kind': 'arrow', 'x': 0, 'y': 1, 't': 2.0},
        {'kind': 'arrow', 'x': 1, 'y': 2, 't': 3.0, 'one_only': True},
        {'kind': 'death', 'x': 2, 't': 4.0},
    ], lambda_=4.0, one_only_prob=0.5)
    trajectory = evolve_gbt(timeline, 4.0, 2.0, GbtConfiguration({0: 2, 2: 1}))
    assert trajectory.change_rows() == [(1.5, 1, 1), (2.0, 1, 2), (4.0, 2, 0)]
    assert trajectory.final == {0: 2, 1: 2}
    assert trajectory.final_ones == 0
    assert trajectory.final_twos == 2
    assert trajectory.count_rows()[0] == (0.0, 1, 1)
    assert trajectory.count_rows()[-1] == (4.0, 0, 2)
    assert trajectory.state_at(1.75) == {0: 2, 1: 1, 2: 1}
    assert trajectory.sites_in_state(1.75, 1) == frozenset({1, 2})
    assert not trajectory.edge_touched


def test_gbt_edge_touched_one_site_from_the_window_end():
    timeline = EventTimeline.from_events((-2, 5), 5.0, [{'kind': 'arrow', 'x': 3, 'y': 4, 't': 1.0}],
                                         lambda_=4.0, one_only_prob=0.5)
    assert evolve_gbt(timeline, 4.0, 2.0, GbtConfiguration({3: 1})).edge_touched
    assert not evolve_gbt(timeline, 4.0, 2.0, GbtConfiguration({2: 1})).edge_touched
    assert evolve_gbt(timeline, 4.0, 2.0, GbtConfiguration({-1: 2})).edge_touched
    assert not evolve_gbt(timeline, 4.0, 2.0, GbtConfiguration({0: 1}, below=-1, below_state=2)).edge_touched


def test_evolve_gbt_checks_rates_and_labels():
    timeline = build_timeline((0, 5), 1.0, 4.0, 0.5, 0)
    with pytest.raises(InvalidArgumentError):
        evolve_gbt(timeline, 2.0, 4.0, GbtConfiguration())
    with pytest.raises(InvalidArgumentError):
        evolve_gbt(timeline, 4.0, 4.0, GbtConfiguration())
    with pytest.raises(InvalidArgumentError):
        evolve_gbt(timeline, 4.0, 1.0, GbtConfiguration())
    with pytest.raises(InvalidArgumentError):
        evolve_gbt(timeline, 5.0, 2.5, GbtConfiguration())


@pytest.mark.parametrize('seed', range(4))
def test_trees_follow_the_contact_process_on_two_paths(seed):
    timeline = build_timeline((-20, 20), 4.0, 4.0, one_only_probability(4.0, 2.0), SeedRecord(seed, Stream.GBT, 0))
    initial = GbtConfiguration({-2: 2, -1: 2, 0: 1, 1: 1, 3: 2})
    trajectory = evolve_gbt(timeline, 4.0, 2.0, initial)
    twos = frozenset(x for x, s in trajectory.final.items() if s == 2)
    contact = evolve(timeline, None, Configuration(frozenset({-2, -1, 3})), two_paths_only=True)
    assert twos == contact.final


def test_direct_simulation_is_reproducible():
    initial = GbtConfiguration.from_sequence([2, 0, 1, 0, 0])
    a = evolve_gbt_direct(4.0, 2.0, initial, 2.0, SeedRecord(5, Stream.GBT, 3), (0, 4))
    b = evolve_gbt_direct(4.0, 2.0, initial, 2.0, SeedRecord(5, Stream.GBT, 3), (0, 4))
    assert a.change_rows() == b.change_rows()
    assert set(a.final.values()) <= {1, 2}
    assert all(0 < t <= 2.0 for t, _, _ in a.change_rows())


def test_generator_rows_sum_to_zero():
    Q = gbt_generator(3, 4.0, 2.0)
    assert Q.shape == (27, 27)
    assert_allclose(Q.sum(axis=1), 0.0, atol=1e-12)
    off_diagonal = Q - np.diag(np.diag(Q))
    assert (off_diagonal >= 0).all()
    assert Q[0, 0] == 0.0


def test_marginals():
    initial = [2, 0, 1]
    assert_allclose(gbt_marginals(initial, 4.0, 2.0, 0.0), [[0, 0, 1], [1, 0, 0], [0, 1, 0]], atol=1e-12)
    marginals = gbt_marginals(initial, 4.0, 2.0, 0.5)
    assert_allclose(marginals.sum(axis=1), 1.0)
    assert (marginals >= -1e-12).all()
    assert_allclose(gbt_marginals([0, 0, 0], 4.0, 2.0, 1.0)[:, 0], 1.0)


def test_single_site_marginal_is_exponential_decay():
    marginals = gbt_marginals([1], 4.0, 2.0, 1.0)
    assert_allclose(marginals[0], [1 - np.exp(-1.0), np.exp(-1.0), 0.0])


def test_a_lone_tree_dies_at_rate_one():
    times = []
    for i in range(300):
        trajectory = evolve_gbt_direct(1.0, 0.0, GbtConfiguration({0: 2}), 50.0, SeedRecord(0, Stream.GBT, i), (-1, 1))
        ((t, x, state),) = trajectory.change_rows()
        assert (x, state) == (0, 0)
        times.append(t)
    assert stats.kstest(times, 'expon').pvalue > 1e-3
