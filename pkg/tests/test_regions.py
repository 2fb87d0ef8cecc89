from fractions import Fraction

import pytest

from wedgecp.errors import InvalidArgumentError
from wedgecp.regions import (
    FullSpace, HalfSpace, Parallelogram, UnionRegion, Wedge, make_parallelogram, merge_intervals, parse_region,
    region_from_dict, region_membership, wedge_contains
)
from wedgecp.substrate import SpaceTimePoint


def test_wedge_boundaries_are_closed():
    wedge = Wedge(Fraction(1, 2), Fraction(1), Fraction(3))
    assert wedge.contains(0, 0)
    assert wedge.contains(3, 0)
    assert not wedge.contains(4, 0)
    assert wedge.contains(1, 2)
    assert wedge.contains(5, 2)
    assert not wedge.contains(6, 2)
    assert not wedge.contains(0, -1)


def test_wedge_float_times_are_exact():
    wedge = Wedge(Fraction(1, 2), Fraction(1), Fraction(3))
    assert wedge.contains(1, 2.0)
    assert not wedge.contains(1, 2.0000000001)
    assert not wedge.contains(0, 1e-12)


def test_wedge_intervals_agree_with_membership():
    wedge = Wedge(Fraction(1, 2), Fraction(1), Fraction(3), dx=Fraction(2))
    assert wedge.intervals(1) == []
    assert wedge.intervals(2) == [(Fraction(0), Fraction(0))]
    assert wedge.intervals(7) == [(Fraction(2), Fraction(10))]
    for x in range(0, 12):
        for t in [Fraction(n, 4) for n in range(0, 60)]:
            inside = any(a <= t <= b for a, b in wedge.intervals(x))
            assert inside == wedge.contains(x, t), (x, t)


@pytest.mark.parametrize('alpha_l, alpha_r', [(1, 1), (Fraction(3, 2), 1), (0, 1)])
def test_wedge_rejects_bad_speeds(alpha_l, alpha_r):
    with pytest.raises(InvalidArgumentError):
        Wedge(alpha_l, alpha_r, 3)


def test_half_space():
    half = HalfSpace(Fraction(1), Fraction(0))
    assert half.contains(-100, 0)
    assert not half.contains(1, Fraction(1, 2))
    assert half.contains(1, 1)
    assert half.intervals(-3) == [(Fraction(0), None)]
    assert half.intervals(2) == [(Fraction(2), None)]
    assert half.site_bounds(0, 5) == (None, 5)


def test_parallelogram_corners(block_params):
    p = make_parallelogram('L', 0, 0, block_params['M'], block_params['alpha'], block_params['beta'])
    assert p.corners == ((1, 0), (3, 0), (-11, 7), (-13, 7))
    assert p.bottom_sites == [1, 2, 3]
    assert p.top_sites == [-13, -12, -11]
    assert p.label == 'L(0,0)'

    r = make_parallelogram('R_small', 1, 1, block_params['M'], block_params['alpha'], block_params['beta'])
    assert r.corners == ((7, 6), (9, 6), (12, Fraction(15, 2)), (10, Fraction(15, 2)))


def test_parallelogram_membership_follows_the_slanted_sides(block_params):
    p = make_parallelogram('R', 0, 0, block_params['M'], block_params['alpha'], block_params['beta'])
    assert p.contains(-3, 0)
    assert not p.contains(-3, 1)
    assert p.contains(-1, 1)
    assert p.contains(13, 7)
    assert not p.contains(13, Fraction(71, 10))
    assert p.intervals(-1) == [(Fraction(0), Fraction(1))]


def test_make_parallelogram_checks_lattice_and_scale():
    with pytest.raises(InvalidArgumentError):
        make_parallelogram('L', 1, 0, 6, 2, Fraction(1, 3))
    with pytest.raises(InvalidArgumentError):
        make_parallelogram('L', 0, -2, 6, 2, Fraction(1, 3))
    with pytest.raises(InvalidArgumentError):
        make_parallelogram('L', 0, 0, 5, 2, Fraction(1, 3))
    assert make_parallelogram('L', 0, 0, 5, 2, Fraction(1, 3), check_integrality=False).M == 5
    with pytest.raises(InvalidArgumentError):
        Parallelogram('L', 0, 0, Fraction(6), Fraction(2), Fraction(2, 3))
    with pytest.raises(InvalidArgumentError):
        Parallelogram('X', 0, 0, Fraction(6), Fraction(2), Fraction(1, 3))


def test_merge_intervals():
    merged = merge_intervals([(Fraction(3), None), (Fraction(0), Fraction(1)), (Fraction(1), Fraction(2))])
    assert merged == [(Fraction(0), Fraction(2)), (Fraction(3), None)]


def test_union_region(block_params):
    a = make_parallelogram('R', 0, 0, block_params['M'], block_params['alpha'], block_params['beta'])
    b = a.translated(1, 1)
    union = UnionRegion((a, b))
    assert union.contains(-3, 0)
    assert b.corners[0] == (7, 6)
    assert union.contains(7, 6)
    assert union.intervals(-1) == a.intervals(-1)
    assert region_from_dict(union.to_dict()) == union


def test_parse_region():
    assert parse_region('full') == FullSpace()
    assert parse_region('wedge:1/2,1,3') == Wedge(Fraction(1, 2), Fraction(1), Fraction(3))
    assert parse_region('wedge:1/2,1,3,2').dx == 2
    assert parse_region('half:1,0') == HalfSpace(Fraction(1), Fraction(0))
    p = parse_region('parallelogram:L,0,0,6,2,1/3')
    assert p.label == 'L(0,0)'
    assert region_from_dict(p.to_dict()) == p


@pytest.mark.parametrize('text', ['cone:1', 'wedge:1,1/2,3', 'wedge:1/2', 'half:x,0', 'full:1'])
def test_parse_region_rejects_bad_input(text):
    with pytest.raises(InvalidArgumentError):
        parse_region(text)


def test_point_predicates(block_params):
    wedge = Wedge(Fraction(1, 2), Fraction(1), Fraction(10))
    assert wedge_contains(wedge, SpaceTimePoint(0, 0))
    assert not wedge_contains(wedge, SpaceTimePoint(4, 10))
    small = make_parallelogram('L_small', 0, 0, **block_params_without_lattice(block_params))
    assert region_membership(small, SpaceTimePoint(1, 0))
    assert not region_membership(small, SpaceTimePoint(1, 2))
    assert region_membership(FullSpace(), SpaceTimePoint(-100, 7.5))
    assert region_membership(None, SpaceTimePoint(3, 1))


def test_small_parallelograms_keep_the_crossing(block_params):
    params = block_params_without_lattice(block_params)
    big_r, big_l = make_parallelogram('R', 0, 0, **params), make_parallelogram('L', 0, 0, **params)
    small_r, small_l = make_parallelogram('R_small', 0, 0, **params), make_parallelogram('L_small', 0, 0, **params)
    points = [(x, Fraction(i, 4)) for x in range(-15, 16) for i in range(0, 33)]
    crossing = {p for p in points if big_r.contains(*p) and big_l.contains(*p)}
    assert crossing
    assert crossing == {p for p in points if small_r.contains(*p) and big_l.contains(*p)}
    assert crossing == {p for p in points if big_r.contains(*p) and small_l.contains(*p)}


def block_params_without_lattice(block_params):
    return {name: block_params[name] for name in ('M', 'alpha', 'beta')}
