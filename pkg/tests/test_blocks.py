from dataclasses import replace
from fractions import Fraction

import pytest

from wedgecp.blocks import (
    PercolationField, RenormLattice, assemble_y_region, bounding_wedge, common_source, crossing_event,
    integral_block_scale, lemma_bound, open_path, open_path_exists, percolation_field, snap_block_scale,
    solve_integer_wedge, verify_containment, y_slopes
)
from wedgecp.errors import DegenerateGeometryError, InvalidArgumentError, OutOfWindowError
from wedgecp.regions import make_parallelogram
from wedgecp.substrate import build_timeline


def test_renormalized_lattice():
    lattice = RenormLattice(2)
    assert lattice.points == [(0, 0), (-1, 1), (1, 1), (-2, 2), (0, 2), (2, 2)]
    assert lattice.contains(1, 1)
    assert not lattice.contains(1, 2)
    assert RenormLattice.norm(-1, 3) == 2


@pytest.mark.parametrize('alpha, alpha_l, alpha_r, expected', [
    ('2', '1/2', '1', {'m': 3, 'c': 5, 'beta': Fraction(1, 3), 'ell_prime': 7, 'd_prime': 2}),
    ('2', '2/3', '1', {'m': 4, 'c': 6, 'beta': Fraction(1, 2), 'ell_prime': 9, 'd_prime': 2}),
    ('2', '3/5', '7/5', {'m': 3, 'c': 3, 'beta': Fraction(3, 5), 'ell_prime': 5, 'd_prime': 0}),
])
def test_integer_solution(alpha, alpha_l, alpha_r, expected):
    solution = solve_integer_wedge(alpha, alpha_l, alpha_r)
    for name, value in expected.items():
        assert getattr(solution, name) == value, name
    assert 0 < solution.beta < solution.alpha / 3


def test_integer_solution_slopes():
    solution = solve_integer_wedge(2, Fraction(1, 2), 1)
    assert solution.s_l_prime == Fraction(3, 2)
    assert solution.s_r == 1
    assert solution.to_dict()['beta'] == '1/3'
    assert y_slopes(solution.ell_prime, solution.d_prime, solution.alpha, solution.beta).to_dict() == \
        {'s_l': '3/2', 's_r': '1'}


@pytest.mark.parametrize('alpha, alpha_l, alpha_r', [('2', '1', '1/2'), ('2', '1/2', '3'), ('1', '0', '1/2')])
def test_integer_solution_rejects_bad_speeds(alpha, alpha_l, alpha_r):
    with pytest.raises(InvalidArgumentError):
        solve_integer_wedge(alpha, alpha_l, alpha_r)


@pytest.mark.parametrize('ell, d, count', [(5, 0, 12), (5, 1, 15), (5, 2, 21), (5, 3, 25), (7, 2, 25)])
def test_y_region_counts(ell, d, count):
    region = assemble_y_region(ell, d, 6, 2, Fraction(1, 3))
    assert region.count == count
    labels = [p.label for p in region.parallelograms]
    assert len(set(labels)) == count
    assert region.members[0].parallelogram.label == 'R(0,0)'


def test_y_region_count_above_quoted_bound():
    assert lemma_bound(5, 0) == 11
    assert lemma_bound(5, 2) == 18
    assert assemble_y_region(5, 0, 6, 2, Fraction(1, 3)).count > lemma_bound(5, 0)


def test_y_region_rejects_bad_parameters():
    with pytest.raises(InvalidArgumentError):
        assemble_y_region(1, 0, 6, 2, Fraction(1, 3))
    with pytest.raises(InvalidArgumentError):
        assemble_y_region(5, 5, 6, 2, Fraction(1, 3))
    with pytest.raises(InvalidArgumentError):
        assemble_y_region(5, 0, 5, 2, Fraction(1, 3))


def test_bounding_lines(block_params):
    region = assemble_y_region(**block_params)
    assert region.x_l == Fraction(-11, 3)
    assert region.x_r == 35
    wedge = bounding_wedge(**block_params)
    assert wedge.alpha_l == Fraction(2, 3)
    assert wedge.alpha_r == 1
    assert wedge.dx == Fraction(-11, 3)
    for j, k in ((0, 0), (-1, 1), (1, 1), (0, 2)):
        for name, (x, t) in region.corners(j, k):
            assert wedge.contains(x, t), name


def test_degenerate_slopes():
    with pytest.raises(DegenerateGeometryError):
        y_slopes(3, 2, 2, Fraction(1, 3))
    with pytest.raises(DegenerateGeometryError):
        y_slopes(5, 0, 1, 1)


def test_translates_tile_the_lattice(block_params):
    region = assemble_y_region(**block_params)
    assert region.offset(0, 0) == (0, 0)
    assert region.offset(1, 1) == (6 * 6 * Fraction(5, 3), 60)
    assert region.offset(-1, 1) == (6 * 4 * Fraction(5, 3), 60)
    assert [p.label for p in region.translate(0, 2)][0] == 'R(10,20)'
    with pytest.raises(InvalidArgumentError):
        region.offset(1, 2)


def test_containment_passes_for_the_integer_solution():
    solution = solve_integer_wedge(2, Fraction(1, 2), 1)
    M = solution.alpha * (solution.ell_prime + 3) * 6
    report = verify_containment(solution, Fraction(1, 2), 1, M, 50)
    assert report.passed
    assert report.block_M == 6
    assert report.violations == []
    assert report.first_failing_corner is None
    assert report.corners_checked == 25 * 4 * sum(k + 1 for k in range(51))


def test_containment_negative_control_names_a_corner():
    solution = solve_integer_wedge(2, Fraction(1, 2), 1)
    perturbed = replace(solution, beta=solution.beta - Fraction(1, 100))
    M = perturbed.alpha * (perturbed.ell_prime + 3) * 6
    report = verify_containment(perturbed, Fraction(1, 2), 1, M, 50)
    assert not report.passed
    assert not report.slope_equations_ok
    corner = report.first_failing_corner
    assert corner is not None
    assert corner.side == 'right'
    assert corner.label.startswith(f'Y({corner.j},{corner.k}) ')
    assert report.to_dict()['first_failing_corner']['corner'] == corner.label


def test_containment_rejects_bad_input():
    solution = solve_integer_wedge(2, Fraction(1, 2), 1)
    with pytest.raises(InvalidArgumentError):
        verify_containment(solution, Fraction(1, 2), 1, 0, 5)
    with pytest.raises(InvalidArgumentError):
        verify_containment(solution, Fraction(1, 2), 1, 120, -1)


def test_block_scale():
    assert integral_block_scale(2, Fraction(1, 2)) == 4
    assert integral_block_scale(2, Fraction(3, 5)) == 10
    assert integral_block_scale(2, Fraction(1, 3)) == 6
    assert snap_block_scale(5, 2, Fraction(1, 2)) == 8
    assert snap_block_scale(1, 2, Fraction(1, 2)) == 4
    with pytest.raises(InvalidArgumentError):
        integral_block_scale(0, Fraction(1, 2))


def test_no_crossing_without_arrows(block_params):
    p = make_parallelogram('L', 0, 0, block_params['M'], block_params['alpha'], block_params['beta'])
    timeline = build_timeline((-20, 10), 8.0, 0.0, 0.0, 3)
    assert not crossing_event(timeline, p)
    with pytest.raises(OutOfWindowError):
        crossing_event(build_timeline((-5, 10), 8.0, 0.0, 0.0, 3), p)


def test_crossing_at_a_large_rate(block_params):
    p = make_parallelogram('L', 0, 0, block_params['M'], block_params['alpha'], block_params['beta'])
    timeline = build_timeline((-20, 10), 8.0, 50.0, 0.0, 3)
    assert crossing_event(timeline, p)


def test_percolation_field_without_arrows():
    region = assemble_y_region(5, 0, 6, 2, Fraction(1, 3))
    x_lo, x_hi, top = region.extent(1)
    timeline = build_timeline((x_lo - 1, x_hi + 1), float(top) + 1, 0.0, 0.0, 1)
    field = percolation_field(timeline, region, 1)
    assert field.rows() == [(0, 0, 0), (-1, 1, 0), (1, 1, 0)]
    assert len(field.diagnostics[(0, 0)]) == region.count
    assert open_path(field) is None


def test_open_path_on_hand_made_fields():
    values = {(0, 0): True, (-1, 1): False, (1, 1): True, (-2, 2): False, (0, 2): False, (2, 2): True}
    field = PercolationField(2, values)
    assert open_path(field) == [(0, 0), (1, 1), (2, 2)]
    assert open_path_exists(field)

    assert open_path(PercolationField(2, {**values, (1, 1): False})) is None
    assert open_path(PercolationField(2, {**values, (0, 0): False})) is None
    assert open_path(PercolationField(0, {(0, 0): True})) == [(0, 0)]


@pytest.mark.parametrize('lambda_', [0.0, 50.0])
def test_common_source(lambda_):
    region = assemble_y_region(5, 0, 6, 2, Fraction(1, 3))
    x_lo, x_hi, top = region.extent(0)
    timeline = build_timeline((x_lo - 1, x_hi + 1), float(top) + 1, lambda_, 0.0, 4)
    source = common_source(timeline, region)
    if lambda_ == 0:
        assert source is None
    else:
        assert source in region.bottom().bottom_sites
