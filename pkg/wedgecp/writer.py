"""Output files: report.json, manifest.json, CSV tables, events.jsonl and corner dumps."""
import csv
import json
import logging
import time
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence, Union

import numpy as np

from wedgecp.definitions import ExperimentConfig
from wedgecp.experiments.experiment import ExperimentResult, Table
from wedgecp.regions import Parallelogram, Wedge
from wedgecp.substrate import EventTimeline
from wedgecp.utils import config_hash, fraction_str

logger = logging.getLogger(__name__)

REPORT_FILE = 'report.json'
MANIFEST_FILE = 'manifest.json'
EVENTS_FILE = 'events.jsonl'

PathLike = Union[str, Path]


def _default(value: Any) -> Any:
    if isinstance(value, Fraction):
        return fraction_str(value)
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (set, frozenset)):
        return sorted(value)
    if isinstance(value, Path):
        return str(value)
    if hasattr(value, 'to_dict'):
        return value.to_dict()
    raise TypeError(f'Object of type {type(value).__name__} is not JSON serializable')


def dumps(payload: Any) -> str:
    """Deterministic JSON: sorted keys, fixed indentation, Fractions as "p/q"."""
    return json.dumps(payload, sort_keys=True, indent=2, default=_default, allow_nan=True) + '\n'


def write_json(path: PathLike, payload: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w') as f:
        f.write(dumps(payload))
    return path


def _cell(value: Any) -> Any:
    if isinstance(value, Fraction):
        return fraction_str(value)
    if isinstance(value, np.generic):
        return value.item()
    if value is None:
        return ''
    return value


def write_csv(path: PathLike, table: Table) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(table.header)
        for row in table.rows:
            writer.writerow([_cell(value) for value in row])
    return path


def write_events(path: PathLike, timeline: EventTimeline) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    timeline.to_jsonl(path)
    return path


def write_manifest(out_dir: PathLike, config: ExperimentConfig, started: float, files: Sequence[str],
                   extra: Optional[dict[str, Any]] = None) -> Path:
    """Full configuration, seed and hash, plus timing (kept out of report.json)."""
    reproducible = config.reproducible_dump()
    manifest = {
        'config': config.model_dump(mode='json', by_alias=True),
        'master_seed': config.seed,
        'config_hash': config_hash(reproducible),
        'files': sorted(files),
        'timestamp': datetime.fromtimestamp(started, tz=timezone.utc).isoformat(),
        'runtime_s': round(time.time() - started, 3),
    }
    if extra:
        manifest.update(extra)
    return write_json(Path(out_dir) / MANIFEST_FILE, manifest)


def write_outputs(out_dir: PathLike, report: dict[str, Any], tables: dict[str, Table], config: ExperimentConfig,
                  started: float, timeline: Optional[EventTimeline] = None) -> list[Path]:
    """Writes report.json, one CSV per table, events.jsonl (when a timeline is given) and manifest.json."""
    out_dir = Path(out_dir)
    paths = [write_json(out_dir / REPORT_FILE, report)]
    for name, table in tables.items():
        paths.append(write_csv(out_dir / f'{name}.csv', table))
    if timeline is not None:
        paths.append(write_events(out_dir / EVENTS_FILE, timeline))
    paths.append(write_manifest(out_dir, config, started, [p.name for p in paths]))
    logger.info(f'wrote {", ".join(p.name for p in paths)} to {out_dir}')
    return paths


def write_result(out_dir: PathLike, result: ExperimentResult, config: ExperimentConfig, started: float) -> list[Path]:
    return write_outputs(out_dir, result.to_dict(), result.tables, config, started)


def corner_rows(parallelograms: Iterable[Parallelogram]) -> Table:
    names = ('bottom-left', 'bottom-right', 'top-right', 'top-left')
    rows = []
    for p in parallelograms:
        for name, (x, t) in zip(names, p.corners):
            rows.append((p.label, name, fraction_str(x), fraction_str(t), float(x), float(t)))
    return Table(['parallelogram', 'corner', 'x', 't', 'x_float', 't_float'], rows)


def write_corners_svg(path: PathLike, parallelograms: Sequence[Parallelogram], wedge: Optional[Wedge] = None,
                      size: int = 600) -> Path:
    """Parallelograms (and the wedge lines, if given) as an SVG drawing, time going up."""
    points = [corner for p in parallelograms for corner in p.corners]
    xs = [float(x) for x, _ in points]
    ts = [float(t) for _, t in points]
    x_lo, x_hi, t_lo, t_hi = min(xs), max(xs), min(ts), max(ts)
    if wedge is not None:
        x_lo = min(x_lo, float(wedge.dx + wedge.alpha_l * (t_lo - wedge.dt)))
        x_hi = max(x_hi, float(wedge.dx + wedge.M + wedge.alpha_r * (t_hi - wedge.dt)))
    scale = size / max(x_hi - x_lo, t_hi - t_lo, 1e-9)

    def project(x: float, t: float) -> str:
        return f'{(x - x_lo) * scale:.3f},{(t_hi - t) * scale:.3f}'

    width, height = (x_hi - x_lo) * scale, (t_hi - t_lo) * scale
    lines = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" height="{height:.0f}">']
    for p in parallelograms:
        color = '#1f77b4' if p.kind.startswith('L') else '#d62728'
        corners = ' '.join(project(float(x), float(t)) for x, t in p.corners)
        lines.append(f'  <polygon points="{corners}" fill="{color}" fill-opacity="0.3" stroke="{color}">'
                     f'<title>{p.label}</title></polygon>')
    if wedge is not None:
        for x0, speed in ((wedge.dx, wedge.alpha_l), (wedge.dx + wedge.M, wedge.alpha_r)):
            a = project(float(x0 + speed * (t_lo - wedge.dt)), t_lo)
            b = project(float(x0 + speed * (t_hi - wedge.dt)), t_hi)
            lines.append(f'  <polyline points="{a} {b}" fill="none" stroke="black"/>')
    lines.append('</svg>')
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text('\n'.join(lines) + '\n')
    return path
