"""Utility helper functions: seeding, serialization and artifact I/O."""

import csv
import json
from datetime import datetime
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable, Sequence, Union

import numpy as np

GENERATED_KEY = "generated"
CSV_HEADER_PREFIX = "# generated"


def spawn_rng(seed: int, *keys: int) -> np.random.Generator:
    """Counter-based generator for the batch addressed by ``keys``.

    The same (seed, keys) always yields the same stream, independent of
    which worker draws it or in what order.
    """
    seq = np.random.SeedSequence(entropy=int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=tuple(keys))
    return np.random.Generator(np.random.Philox(seq))


def format_duration(seconds: float) -> str:
    """Format seconds into a human-readable duration string."""
    if seconds < 1:
        return f"{seconds * 1000:.0f}ms"
    if seconds < 60:
        return f"{seconds:.1f}s"
    if seconds < 3600:
        minutes = int(seconds // 60)
        secs = int(seconds % 60)
        return f"{minutes}m {secs}s"
    hours = int(seconds // 3600)
    minutes = int((seconds % 3600) // 60)
    return f"{hours}h {minutes}m"


def format_float(value: float) -> str:
    """17 significant digits, '.' decimal, no grouping."""
    return format(float(value), ".17g")


def fraction_to_json(value: Fraction) -> list[str]:
    return [str(value.numerator), str(value.denominator)]


def fraction_from_json(value: Union[Sequence, str, int, float]) -> Fraction:
    """Accepts ["num","den"], "num/den" or a plain number."""
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise ValueError(f"rational must be a [num, den] pair, got {value!r}")
        return Fraction(int(value[0]), int(value[1]))
    if isinstance(value, float):
        return Fraction(value).limit_denominator(10**6)
    return Fraction(value)


def to_jsonable(value: Any) -> Any:
    """Convert numpy arrays, fractions and dataclass-like containers for json.dump."""
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, Fraction):
        return fraction_to_json(value)
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if hasattr(value, "to_dict"):
        return to_jsonable(value.to_dict())
    return value


def write_json(path: Union[str, Path], payload: dict) -> Path:
    """Write a JSON artifact with a leading timestamp key."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    document = {GENERATED_KEY: datetime.now().isoformat(timespec="seconds")}
    document.update(to_jsonable(payload))
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(document, handle, indent=2)
        handle.write("\n")
    return path


def write_csv(path: Union[str, Path], columns: Sequence[str], rows: Iterable[Sequence]) -> Path:
    """Write a CSV artifact preceded by a timestamp comment line."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write(f"{CSV_HEADER_PREFIX} {datetime.now().isoformat(timespec='seconds')}\n")
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow(
                [format_float(v) if isinstance(v, (float, np.floating)) else v for v in row]
            )
    return path


def parse_float_list(text: str) -> list[float]:
    """Parse "0,1,2" (or whitespace separated) into floats."""
    parts = [p for p in text.replace(",", " ").split() if p]
    return [float(p) for p in parts]


def parse_count(text: Union[str, int, float]) -> int:
    """Parse counts written like 1e5."""
    value = float(text)
    if value != int(value) or value < 0:
        raise ValueError(f"not a non-negative integer count: {text!r}")
    return int(value)


def parse_matrix(text: Union[str, Sequence]) -> np.ndarray:
    """Parse "1,0;0,1" (rows separated by ';') or nested lists into a 2-D array."""
    if isinstance(text, str):
        rows = [parse_float_list(row) for row in text.split(";") if row.strip()]
    else:
        rows = [list(np.atleast_1d(np.asarray(row, dtype=float))) for row in text]
    if not rows or len({len(r) for r in rows}) != 1:
        raise ValueError(f"not a rectangular matrix: {text!r}")
    return np.array(rows, dtype=float)


def parse_intervals(text: Union[str, Sequence]) -> list[tuple[float, float]]:
    """Parse "0,1;2,3" into [(0, 1), (2, 3)]."""
    pairs = parse_matrix(text)
    if pairs.shape[1] != 2:
        raise ValueError(f"intervals need two endpoints each: {text!r}")
    return [(float(a), float(b)) for a, b in pairs]
