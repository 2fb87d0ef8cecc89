import logging
import sys
import time
from dataclasses import replace
from fractions import Fraction
from pathlib import Path
from typing import Any, Optional

import click

import wedgecp.loader as loader
from wedgecp import writer
from wedgecp.blocks import (
    assemble_y_region, bounding_wedge, solve_integer_wedge, verify_containment, y_slopes
)
from wedgecp.contact import Configuration, evolve, extract_edges
from wedgecp.definitions import Definitions, load_config_file, make_config
from wedgecp.errors import AcceptanceError, DegenerateGeometryError, InvalidArgumentError, WedgeError
from wedgecp.experiments import factory
from wedgecp.experiments.experiment import Table
from wedgecp.gbt import GbtConfiguration, evolve_gbt, evolve_gbt_direct, one_only_probability
from wedgecp.regions import make_parallelogram, parse_region
from wedgecp.substrate import SeedRecord, Stream, build_timeline
from wedgecp.utils import fraction_str, to_fraction

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_RUNTIME = 2
EXIT_ACCEPTANCE = 3


class RationalType(click.ParamType):
    """Exact rational given as "p/q", an integer or a finite decimal."""
    name = 'rational'

    def convert(self, value: Any, param, ctx) -> Fraction:
        if isinstance(value, Fraction):
            return value
        try:
            return to_fraction(str(value))
        except InvalidArgumentError as e:
            self.fail(str(e), param, ctx)


RATIONAL = RationalType()


def parse_window(window: Optional[str], sites: int) -> tuple[int, int]:
    if window is None:
        return 0, sites - 1
    try:
        x_min, x_max = (int(v) for v in window.split(','))
    except ValueError:
        raise InvalidArgumentError(f'Invalid window {window!r}; expected A,B.') from None
    return x_min, x_max


def echo_json(payload: Any) -> None:
    click.echo(writer.dumps(payload), nl=False)


def emit(out_dir: Optional[str], report: dict[str, Any], tables: dict[str, Table], config_layer: dict[str, Any],
         started: float, timeline=None) -> None:
    """Writes the output files when `out_dir` is given, otherwise prints the report."""
    if not out_dir:
        echo_json(report)
        return
    config = make_config(config_layer)
    for path in writer.write_outputs(out_dir, report, tables, config, started, timeline):
        click.echo(str(path))


def experiment_options(f):
    """Options shared by every experiment command."""
    options = [
        click.option('--seed', type=click.INT, help='Master seed (falls back to WEDGECP_SEED, then 0).'),
        click.option('--replicas', type=click.INT, help='Number of replicas.'),
        click.option('--horizon', type=click.FLOAT, help='Time horizon.'),
        click.option('--window-margin', type=click.INT, help='Sites added on each side of the simulated window.'),
        click.option('--threads', type=click.INT, help='Worker processes for the replicas (0 uses every CPU).'),
        click.option('--out-dir', type=click.Path(file_okay=False), help='Output directory.'),
        click.option('--config', 'config_file', type=click.Path(exists=True, dir_okay=False),
                     help='JSON or YAML configuration file.'),
        click.option('--definition', help='Bundled experiment definition used as the base configuration.'),
        click.option('--check', is_flag=True, default=False, help='Exit with status 3 when an acceptance check fails.'),
    ]
    for option in reversed(options):
        f = option(f)
    return f


def run_experiment(name: Optional[str], options: dict[str, Any]) -> None:
    """Runs a registered experiment. Precedence: definition < config file < command-line flags."""
    out_dir = options.pop('out_dir', None)
    check = options.pop('check', False)
    config_file = options.pop('config_file', None)
    definition = options.pop('definition', None)

    loader.load_experiments()
    layers = []
    if definition:
        layers.append(Definitions().get_experiment(definition).config)
    if config_file:
        layers.append(load_config_file(config_file))
    layers.append(dict(options, experiment=name) if name else options)
    config = make_config(*layers)
    experiment = factory.create_experiment(config.experiment)

    started = time.time()
    result = experiment.execute(config)
    out_dir = out_dir or config.out_dir
    if out_dir:
        for path in writer.write_result(out_dir, result, config, started):
            click.echo(str(path))
        for check_name, passed in result.checks.items():
            click.echo(f'{check_name:<32} {"ok" if passed else "FAILED"}')
    else:
        echo_json(result.to_dict())
    failures = experiment.check(result)
    if check and failures:
        raise AcceptanceError(failures)


@click.group()
@click.option('-v', '--verbose', count=True, help='Verbosity (-v info, -vv debug).')
def cli(verbose):
    """Wedge-restricted contact process simulator.

    Examples:
        $ wedgecp simulate --lambda 4 --sites 100 --horizon 10 --initial single:50
        $ wedgecp geometry integer-solution --alpha 2 --alpha-l 1/2 --alpha-r 1
        $ wedgecp survival-curve --definition survival-curve --out-dir out/survival --check
    """
    level = logging.DEBUG if verbose > 1 else logging.INFO if verbose else logging.WARNING
    logging.basicConfig(level=level, format='%(levelname)s %(name)s: %(message)s')


@cli.command()
@click.option('--lambda', 'lambda_', type=click.FLOAT, required=True, help='Infection rate.')
@click.option('--sites', type=click.INT, default=10, help='Window 0..sites-1 (ignored with --window).')
@click.option('--window', help='Window A,B.')
@click.option('--horizon', type=click.FLOAT, default=10.0, help='Time horizon.')
@click.option('--initial', default='single:0', help='empty, full, single:X, interval:A,B, below:X or above:X.')
@click.option('--region', default='full', help='full, wedge:AL,AR,M[,DX], half:AR,M or parallelogram:KIND,J,K,M,ALPHA,BETA.')
@click.option('--seed', type=click.INT, help='Master seed.')
@click.option('--out-dir', type=click.Path(file_okay=False), help='Output directory.')
def simulate(lambda_, sites, window, horizon, initial, region, seed, out_dir):
    """Runs the region-restricted contact process on one graphical representation.

    Examples:
        $ wedgecp simulate --lambda 0 --sites 10 --horizon 5 --initial single:0
        $ wedgecp simulate --lambda 4 --window -10,60 --horizon 20 --initial interval:0,5 --region wedge:1/2,1,5
    """
    config_layer = {'experiment': 'simulate', 'lambda': lambda_, 'horizon': horizon, 'seed': seed,
                    'initial': initial}
    seed = make_config(config_layer).seed
    window = parse_window(window, sites)
    started = time.time()
    timeline = build_timeline(window, horizon, lambda_, 0.0, SeedRecord(seed, Stream.TIMELINE, 0))
    restriction = parse_region(region)
    trajectory = evolve(timeline, restriction, Configuration.parse(initial))
    report = {
        'lambda': lambda_,
        'window': list(window),
        'horizon': horizon,
        'initial': initial,
        'region': restriction.to_dict(),
        'seed': timeline.seed.to_dict(),
        'n_events': timeline.n_events,
        'final': sorted(trajectory.final),
        **trajectory.summary(),
    }
    tables = {
        'trajectory': Table(['t', 'x', 'state'], trajectory.change_rows()),
        'edges': Table(['t', 'left', 'right'], extract_edges(trajectory).rows()),
    }
    emit(out_dir, report, tables, config_layer, started, timeline)


@cli.command()
@click.option('--lambda1', type=click.FLOAT, default=4.0, help='Rate of 1-arrows.')
@click.option('--lambda2', type=click.FLOAT, default=2.0, help='Rate of 2-arrows.')
@click.option('--sites', type=click.INT, default=10, help='Window 0..sites-1 (ignored with --window).')
@click.option('--window', help='Window A,B.')
@click.option('--horizon', type=click.FLOAT, default=10.0, help='Time horizon.')
@click.option('--initial', default='invasion', help='empty, invasion or sites:X=S,X=S,...')
@click.option('--direct', is_flag=True, default=False, help='Jump-chain simulation instead of the graphical one.')
@click.option('--seed', type=click.INT, help='Master seed.')
@click.option('--out-dir', type=click.Path(file_okay=False), help='Output directory.')
def gbt(lambda1, lambda2, sites, window, horizon, initial, direct, seed, out_dir):
    """Runs the grass-bushes-trees process.

    Examples:
        $ wedgecp gbt --lambda1 4 --lambda2 2 --window -50,50 --horizon 20
        $ wedgecp gbt --sites 5 --horizon 1 --initial sites:0=2,2=1 --direct
    """
    config_layer = {'experiment': 'gbt', 'lambda1': lambda1, 'lambda2': lambda2, 'horizon': horizon, 'seed': seed,
                    'initial': initial}
    seed = make_config(config_layer).seed
    window = parse_window(window, sites)
    configuration = GbtConfiguration.parse(initial)
    record = SeedRecord(seed, Stream.GBT, 0)
    started = time.time()
    timeline = None
    if direct:
        trajectory = evolve_gbt_direct(lambda1, lambda2, configuration, horizon, record, window)
    else:
        timeline = build_timeline(window, horizon, lambda1, one_only_probability(lambda1, lambda2), record)
        trajectory = evolve_gbt(timeline, lambda1, lambda2, configuration)
    report = {
        'lambda1': lambda1,
        'lambda2': lambda2,
        'window': list(window),
        'horizon': horizon,
        'initial': initial,
        'method': 'direct' if direct else 'graphical',
        'seed': record.to_dict(),
        'final': {str(x): s for x, s in sorted(trajectory.final.items())},
        **trajectory.summary(),
    }
    tables = {
        'gbt_changes': Table(['t', 'x', 'state'], trajectory.change_rows()),
        'gbt_counts': Table(['t', 'ones', 'twos'], trajectory.count_rows()),
    }
    emit(out_dir, report, tables, config_layer, started, timeline)


@cli.group()
def geometry():
    """Exact geometry of the block construction."""


def y_region_options(f):
    for option in reversed([
        click.option('--ell', type=click.INT, required=True),
        click.option('--d', type=click.INT, required=True),
        click.option('--M', 'M', type=RATIONAL, required=True, help='Block scale.'),
        click.option('--alpha', type=RATIONAL, required=True),
        click.option('--beta', type=RATIONAL, required=True),
    ]):
        f = option(f)
    return f


@geometry.command('integer-solution')
@click.option('--alpha', type=RATIONAL, required=True, help='Edge speed.')
@click.option('--alpha-l', type=RATIONAL, required=True, help='Left wedge speed.')
@click.option('--alpha-r', type=RATIONAL, required=True, help='Right wedge speed.')
@click.option('--max-m', type=click.INT, default=100_000, help='Search bound on m.')
def integer_solution(alpha, alpha_l, alpha_r, max_m):
    """Finds beta, ell and d with the Y-region slopes inside the wedge slopes.

    Examples:
        $ wedgecp geometry integer-solution --alpha 2 --alpha-l 1/2 --alpha-r 1
    """
    echo_json(solve_integer_wedge(alpha, alpha_l, alpha_r, max_m).to_dict())


@geometry.command()
@click.option('--ell', type=click.INT, required=True)
@click.option('--d', type=click.INT, required=True)
@click.option('--alpha', type=RATIONAL, required=True)
@click.option('--beta', type=RATIONAL, required=True)
def slopes(ell, d, alpha, beta):
    """Slopes (dt/dx) of the lines bounding the Y-region translates."""
    echo_json(y_slopes(ell, d, alpha, beta).to_dict())


@geometry.command('y-region')
@y_region_options
@click.option('--integrality/--no-integrality', default=True, help='Require M beta/2 and M alpha to be integers.')
def y_region(ell, d, M, alpha, beta, integrality):
    """Parallelograms of Y_00 with their attachment stages."""
    echo_json(assemble_y_region(ell, d, M, alpha, beta, integrality).to_dict())


@geometry.command('bounding-wedge')
@y_region_options
def bounding_wedge_command(ell, d, M, alpha, beta):
    """Wedge bounding all Y-region translates."""
    region = assemble_y_region(ell, d, M, alpha, beta, check_integrality=False)
    wedge = bounding_wedge(ell, d, M, alpha, beta, check_integrality=False)
    echo_json({'x_l': fraction_str(region.x_l), 'x_r': fraction_str(region.x_r), 'wedge': wedge.to_dict()})


@geometry.command()
@click.option('--alpha', type=RATIONAL, required=True, help='Edge speed.')
@click.option('--alpha-l', type=RATIONAL, required=True, help='Left wedge speed.')
@click.option('--alpha-r', type=RATIONAL, required=True, help='Right wedge speed.')
@click.option('--M', 'M', type=RATIONAL, help='Wedge width (default alpha (ell + 3) times --block-scale).')
@click.option('--block-scale', type=click.INT, default=6, help='Block scale used when --M is not given.')
@click.option('--K', 'K', type=click.INT, default=50, help='Number of rows.')
@click.option('--beta-shift', type=RATIONAL, default='0', help='Added to beta (negative control).')
@click.option('--check', is_flag=True, default=False, help='Exit with status 3 when containment fails.')
def containment(alpha, alpha_l, alpha_r, M, block_scale, K, beta_shift, check):
    """Checks that every Y_jk, k <= K, lies in the wedge, and names the first failing corner.

    Examples:
        $ wedgecp geometry containment --alpha 2 --alpha-l 1/2 --alpha-r 1 --K 50
        $ wedgecp geometry containment --alpha 2 --alpha-l 1/2 --alpha-r 1 --beta-shift -1/100
    """
    solution = solve_integer_wedge(alpha, alpha_l, alpha_r)
    if beta_shift:
        solution = replace(solution, beta=solution.beta + beta_shift)
    M = M if M is not None else solution.alpha * (solution.ell_prime + 3) * block_scale
    report = verify_containment(solution, alpha_l, alpha_r, M, K)
    echo_json(dict(report.to_dict(), solution=solution.to_dict(), M=fraction_str(M)))
    if check and not report.passed:
        corner = report.first_failing_corner or (report.violations[0] if report.violations else None)
        raise AcceptanceError([f'containment ({corner.label if corner else "slope equations"})'])


@geometry.command()
@click.option('--kind', type=click.Choice(['L', 'R', 'L_small', 'R_small']), required=True)
@click.option('--j', type=click.INT, default=0)
@click.option('--k', type=click.INT, default=0)
@click.option('--M', 'M', type=RATIONAL, required=True)
@click.option('--alpha', type=RATIONAL, required=True)
@click.option('--beta', type=RATIONAL, required=True)
def parallelogram(kind, j, k, M, alpha, beta):
    """A block parallelogram with its corners."""
    p = make_parallelogram(kind, j, k, M, alpha, beta)
    echo_json(dict(p.to_dict(), label=p.label, corners=[[fraction_str(x), fraction_str(t)] for x, t in p.corners]))


@geometry.command()
@y_region_options
@click.option('--j', type=click.INT, default=0)
@click.option('--k', type=click.INT, default=0)
@click.option('--out-dir', type=click.Path(file_okay=False), help='Writes corners.csv and corners.svg.')
def corners(ell, d, M, alpha, beta, j, k, out_dir):
    """Corners of the parallelograms of Y_jk, as CSV (and SVG with the bounding wedge)."""
    region = assemble_y_region(ell, d, M, alpha, beta, check_integrality=False)
    parallelograms = region.translate(j, k)
    table = writer.corner_rows(parallelograms)
    if not out_dir:
        click.echo(','.join(table.header))
        for row in table.rows:
            click.echo(','.join(str(v) for v in row))
        return
    wedge = region.wedge if ell - d - 1 > 0 else None
    for path in (writer.write_csv(Path(out_dir) / 'corners.csv', table),
                 writer.write_corners_svg(Path(out_dir) / 'corners.svg', parallelograms, wedge)):
        click.echo(str(path))


@cli.command()
@click.option('--mode', type=click.Choice(['lemma2', 'omega']), default='lemma2',
              help='Y-region crossing probabilities (lemma2) or open paths of the percolation field (omega).')
@click.option('--lambda', 'lambda_', type=click.FLOAT)
@click.option('--ell', type=click.INT)
@click.option('--d', type=click.INT)
@click.option('--alpha')
@click.option('--beta')
@click.option('--alpha-l')
@click.option('--alpha-r')
@click.option('--m-list', help='Comma-separated block scales.')
@click.option('--k-rows', type=click.INT, help='Rows of the percolation lattice.')
@experiment_options
def percolation(mode, **options):
    """Block construction experiments.

    Examples:
        $ wedgecp percolation --mode lemma2 --lambda 4 --ell 5 --d 0 --alpha 2 --m-list 2,4,6
        $ wedgecp percolation --mode omega --definition omega-infinity --out-dir out/omega
    """
    run_experiment({'lemma2': 'lemma2', 'omega': 'omega-infinity'}[mode], options)


def speed_options(f):
    for option in reversed([
        click.option('--lambda', 'lambda_', type=click.FLOAT, help='Infection rate.'),
        click.option('--alpha-l', help='Left wedge speed.'),
        click.option('--alpha-r', help='Right wedge speed.'),
        click.option('--alpha-hat', type=click.FLOAT, help='Edge speed (estimated when speeds are not given).'),
    ]):
        f = option(f)
    return f


@cli.command('survival-curve')
@speed_options
@click.option('--m-list', help='Comma-separated wedge widths.')
@experiment_options
def survival_curve(**options):
    """Wedge survival proportion as a function of M.

    Examples:
        $ wedgecp survival-curve --lambda 4 --m-list 5,10,20,40 --horizon 200 --replicas 300
    """
    run_experiment('survival-curve', options)


@cli.command('edge-growth')
@speed_options
@click.option('--M', 'M', help='Wedge width.')
@experiment_options
def edge_growth(**options):
    """Edge speeds of the surviving wedge processes and of the half-space process."""
    run_experiment('edge-growth', options)


@cli.command('edge-speed')
@click.option('--lambdas', help='Comma-separated infection rates.')
@experiment_options
def edge_speed(**options):
    """Right edge speed of the process from the negative half-line, for several rates.

    Examples:
        $ wedgecp edge-speed --lambdas 2,3,4 --horizon 200 --replicas 200
    """
    run_experiment('edge-speed', options)


@cli.command('coupling-check')
@speed_options
@click.option('--M', 'M', help='Wedge width.')
@click.option('--burn-in', type=click.FLOAT, help='Burn-in time of the upper invariant measure sample.')
@experiment_options
def coupling_check(**options):
    """Coupling of the wedge process with the process started from the upper invariant measure."""
    run_experiment('coupling-check', options)


@cli.command('gbt-coexistence')
@click.option('--lambda1', type=click.FLOAT)
@click.option('--lambda2', type=click.FLOAT)
@click.option('--threshold', type=click.FLOAT, help='Number of 1s counted as coexistence.')
@click.option('--alpha-l', help='Left wedge speed.')
@click.option('--alpha-r', help='Right wedge speed.')
@click.option('--M', 'M', help='Wedge width.')
@click.option('--x0', help='Left end of the block reached at time x0/alpha_l.')
@experiment_options
def gbt_coexistence(**options):
    """Growth of 1s from a single 1 next to a half-line of 2s.

    Examples:
        $ wedgecp gbt-coexistence --lambda1 4 --lambda2 2 --horizon 100 --replicas 500 --threshold 10
    """
    run_experiment('gbt-coexistence', options)


@cli.command('lambda-c')
@click.option('--tolerance', type=click.FLOAT, help='Bracket width at which the bisection stops.')
@click.option('--threshold', 'lambda_c_threshold', type=click.FLOAT, help='Survival proportion threshold.')
@click.option('--bracket', help='Initial bracket LO,HI.')
@experiment_options
def lambda_c(**options):
    """Finite-time proxy of the critical value by bisection on the survival proportion."""
    run_experiment('lambda-c', options)


@cli.command()
@click.argument('name', required=False)
@click.option('--set', 'assignments', multiple=True, help='KEY=VALUE configuration override.')
@experiment_options
def experiment(name, assignments, **options):
    """Runs any registered experiment by name, or the one of --definition.

    Examples:
        $ wedgecp experiment --definition gbt-oracle --check
        $ wedgecp experiment containment-sweep --set triples=40 --set k_rows=50
    """
    for assignment in assignments:
        key, sep, value = assignment.partition('=')
        if not sep:
            raise InvalidArgumentError(f'Invalid assignment {assignment!r}; expected KEY=VALUE.')
        options[key.strip().replace('-', '_')] = value
    run_experiment(name, options)


@cli.command()
@click.option('--file', 'yaml_file', type=click.Path(exists=True, dir_okay=False), help='Catalog YAML file.')
def definitions(yaml_file):
    """Lists the bundled experiment definitions."""
    click.echo(Definitions(yaml_file=yaml_file).catalog_tree())
    loader.load_experiments()
    click.echo(f'registered experiments: {", ".join(factory.get_experiment_names())}')


def run(argv: Optional[list[str]] = None) -> int:
    """Runs the CLI and maps errors to exit codes."""
    try:
        code = cli.main(args=argv, prog_name='wedgecp', standalone_mode=False)
    except click.exceptions.Abort:
        click.echo('Aborted!', err=True)
        return EXIT_INVALID
    except click.ClickException as e:
        e.show()
        return EXIT_INVALID
    except AcceptanceError as e:
        click.echo(f'Error: {e}', err=True)
        return EXIT_ACCEPTANCE
    except (InvalidArgumentError, DegenerateGeometryError) as e:
        click.echo(f'Error: {e}', err=True)
        return EXIT_INVALID
    except WedgeError as e:
        click.echo(f'Error: {e}', err=True)
        return EXIT_RUNTIME
    return code if isinstance(code, int) else EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == '__main__':
    main()
