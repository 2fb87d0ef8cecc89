"""Small helpers shared across modules: rationals, intervals, hashing."""
import hashlib
import json
import math
from fractions import Fraction
from typing import Any, Sequence, Union

import numpy as np
from scipy import stats

from wedgecp.errors import InvalidArgumentError

Rational = Union[Fraction, int, str, float]

FLOAT_DENOMINATOR_LIMIT = 10**6


def to_fraction(value: Rational) -> Fraction:
    """Returns an exact rational for "p/q" strings, ints and Fractions.

    Floats are only expected from simulation estimates (e.g. 0.3 * alpha_hat) and are
    rounded to the closest rational with denominator at most FLOAT_DENOMINATOR_LIMIT.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise InvalidArgumentError(f'Not a rational value: {value!r}')
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise InvalidArgumentError(f'Not a finite value: {value!r}')
        return Fraction(value).limit_denominator(FLOAT_DENOMINATOR_LIMIT)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError):
            raise InvalidArgumentError(f'Not a rational value: {value!r}') from None
    raise InvalidArgumentError(f'Not a rational value: {value!r}')


def fraction_str(value: Fraction) -> str:
    """Serializes a rational as "p/q" ("p" for integers)."""
    return str(Fraction(value))


def zigzag(x: int) -> int:
    """Maps an integer site onto a non-negative stream key (0, -1, 1, -2, ... -> 0, 1, 2, 3, ...)."""
    return 2 * x if x >= 0 else -2 * x - 1


def z_value(confidence: float = 0.95) -> float:
    return float(stats.norm.ppf(0.5 + confidence / 2.0))


def wilson_interval(successes: int, n: int, confidence: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n <= 0:
        return 0.0, 1.0
    z = z_value(confidence)
    p = successes / n
    denominator = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denominator
    half_width = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denominator
    return max(0.0, center - half_width), min(1.0, center + half_width)


def mean_interval(values: Sequence[float], confidence: float = 0.95) -> tuple[float, float, tuple[float, float]]:
    """Sample mean, standard error and normal-theory interval."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return math.nan, math.nan, (math.nan, math.nan)
    mean = float(values.mean())
    stderr = float(values.std(ddof=1) / math.sqrt(values.size)) if values.size > 1 else 0.0
    z = z_value(confidence)
    return mean, stderr, (mean - z * stderr, mean + z * stderr)


def config_hash(payload: dict[str, Any]) -> str:
    """Stable short hash of a JSON-serializable configuration."""
    blob = json.dumps(payload, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def ceil_fraction(value: Fraction) -> int:
    return -((-value.numerator) // value.denominator)


def floor_fraction(value: Fraction) -> int:
    return value.numerator // value.denominator


