import json

import pytest

from wedgecp.cli import EXIT_ACCEPTANCE, EXIT_INVALID, EXIT_OK, run

CONTAINMENT = ['geometry', 'containment', '--alpha', '2', '--alpha-l', '1/2', '--alpha-r', '1', '--K', '10']


@pytest.fixture(autouse=True)
def env(clean_env):
    pass


def test_integer_solution(capsys):
    assert run(['geometry', 'integer-solution', '--alpha', '2', '--alpha-l', '1/2', '--alpha-r', '1']) == EXIT_OK
    solution = json.loads(capsys.readouterr().out)
    assert (solution['m'], solution['c'], solution['ell'], solution['d']) == (3, 5, 7, 2)
    assert solution['beta'] == '1/3'


def test_integer_solution_rejects_bad_speeds(capsys):
    assert run(['geometry', 'integer-solution', '--alpha', '2', '--alpha-l', '1', '--alpha-r', '1/2']) == EXIT_INVALID
    assert 'Error' in capsys.readouterr().err


def test_degenerate_slopes():
    assert run(['geometry', 'slopes', '--ell', '3', '--d', '2', '--alpha', '2', '--beta', '1/3']) == EXIT_INVALID


def test_bad_rational_option():
    assert run(['geometry', 'slopes', '--ell', '7', '--d', '2', '--alpha', 'two', '--beta', '1/3']) == EXIT_INVALID


def test_unknown_option():
    assert run(['simulate', '--lambda', '1', '--unknown']) == EXIT_INVALID


def test_y_region(capsys):
    assert run(['geometry', 'y-region', '--ell', '7', '--d', '2', '--M', '6', '--alpha', '2', '--beta', '1/3']) == EXIT_OK
    region = json.loads(capsys.readouterr().out)
    assert region['count'] == 25
    assert region['x_l'] == '-11/3'
    assert region['x_r'] == '35'


def test_containment(capsys):
    assert run(CONTAINMENT + ['--check']) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report['passed']
    assert report['M'] == '120'


def test_containment_negative_control(capsys):
    assert run(CONTAINMENT + ['--beta-shift=-1/100']) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert not report['passed']
    assert report['first_failing_corner']['side'] == 'right'
    assert run(CONTAINMENT + ['--beta-shift=-1/100', '--check']) == EXIT_ACCEPTANCE


def test_corners(capsys):
    assert run(['geometry', 'corners', '--ell', '7', '--d', '2', '--M', '6', '--alpha', '2', '--beta', '1/3']) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == 'parallelogram,corner,x,t,x_float,t_float'
    assert len(lines) == 1 + 25 * 4


def test_corners_svg(tmp_path):
    args = ['geometry', 'corners', '--ell', '7', '--d', '2', '--M', '6', '--alpha', '2', '--beta', '1/3',
            '--j', '1', '--k', '1', '--out-dir', str(tmp_path)]
    assert run(args) == EXIT_OK
    assert (tmp_path / 'corners.csv').exists()
    assert (tmp_path / 'corners.svg').read_text().startswith('<svg')


def test_simulate_writes_reproducible_outputs(tmp_path):
    args = ['simulate', '--lambda', '0', '--sites', '5', '--horizon', '2', '--initial', 'interval:0,4', '--seed', '3']
    assert run(args + ['--out-dir', str(tmp_path / 'a')]) == EXIT_OK
    assert run(args + ['--out-dir', str(tmp_path / 'b')]) == EXIT_OK
    for name in ('report.json', 'trajectory.csv', 'edges.csv', 'events.jsonl', 'manifest.json'):
        assert (tmp_path / 'a' / name).exists(), name
    report = (tmp_path / 'a' / 'report.json').read_text()
    assert report == (tmp_path / 'b' / 'report.json').read_text()
    assert json.loads(report)['seed']['master'] == 3
    manifest = json.loads((tmp_path / 'a' / 'manifest.json').read_text())
    assert manifest['master_seed'] == 3
    assert 'report.json' in manifest['files']


def test_simulate_prints_the_report(capsys):
    assert run(['simulate', '--lambda', '0', '--sites', '3', '--horizon', '1', '--initial', 'empty']) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report['final'] == []
    assert not report['survived']


def test_gbt(capsys):
    args = ['gbt', '--sites', '5', '--horizon', '1', '--initial', 'sites:0=2,2=1', '--seed', '1']
    assert run(args + ['--direct']) == EXIT_OK
    assert json.loads(capsys.readouterr().out)['method'] == 'direct'
    assert run(args) == EXIT_OK
    assert json.loads(capsys.readouterr().out)['method'] == 'graphical'
    assert run(['gbt', '--lambda1', '1', '--lambda2', '2']) == EXIT_INVALID


def test_experiment_command(tmp_path, capsys):
    args = ['experiment', 'containment-sweep', '--set', 'triples=2', '--set', 'k_rows=5', '--seed', '1',
            '--out-dir', str(tmp_path), '--check']
    assert run(args) == EXIT_OK
    assert (tmp_path / 'containment.csv').exists()
    report = json.loads((tmp_path / 'report.json').read_text())
    assert report['report']['reproducibility']['master_seed'] == 1
    assert 'containment' in capsys.readouterr().out


def test_experiment_command_rejects_bad_assignments():
    assert run(['experiment', 'containment-sweep', '--set', 'triples']) == EXIT_INVALID
    assert run(['experiment', 'containment-sweep', '--set', 'no_such_key=1']) == EXIT_INVALID
    assert run(['experiment', 'no-such-experiment']) == EXIT_INVALID


def test_definitions_command(capsys):
    assert run(['definitions']) == EXIT_OK
    out = capsys.readouterr().out
    assert 'gbt-oracle' in out
    assert 'registered experiments' in out
