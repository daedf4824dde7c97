"""Compare two CSV or JSON artifacts numerically, ignoring their timestamps."""

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Union

from radonbl.core.errors import SchemaMismatchError
from radonbl.utils.helpers import CSV_HEADER_PREFIX, GENERATED_KEY

logger = logging.getLogger(__name__)


@dataclass
class RegressReport:
    differences: list[str] = field(default_factory=list)
    compared: int = 0

    @property
    def exit_code(self) -> int:
        return 2 if self.differences else 0

    def to_dict(self) -> dict:
        return {"compared": self.compared, "differences": self.differences}


def _close(a: float, b: float, rtol: float) -> bool:
    if math.isnan(a) or math.isnan(b):
        return math.isnan(a) and math.isnan(b)
    if a == b:
        return True
    return math.isinf(rtol) or abs(a - b) <= rtol * max(abs(a), abs(b))


def _as_number(text: str):
    try:
        return float(text)
    except ValueError:
        return None


def _read_csv(path: Path) -> tuple[list[str], list[list[str]]]:
    with open(path, "r", encoding="utf-8", newline="") as handle:
        lines = [line for line in handle if not line.startswith(CSV_HEADER_PREFIX)]
    rows = list(csv.reader(lines))
    if not rows:
        raise SchemaMismatchError(f"{path} has no header row")
    return rows[0], rows[1:]


def _compare_csv(baseline: Path, current: Path, rtol: float, report: RegressReport):
    head_a, rows_a = _read_csv(baseline)
    head_b, rows_b = _read_csv(current)
    if head_a != head_b:
        raise SchemaMismatchError(f"columns differ: {head_a} vs {head_b}")
    if len(rows_a) != len(rows_b):
        raise SchemaMismatchError(f"row counts differ: {len(rows_a)} vs {len(rows_b)}")
    for index, (row_a, row_b) in enumerate(zip(rows_a, rows_b)):
        if len(row_a) != len(head_a) or len(row_b) != len(head_a):
            raise SchemaMismatchError(f"row {index} has the wrong number of fields")
        for column, a, b in zip(head_a, row_a, row_b):
            report.compared += 1
            num_a, num_b = _as_number(a), _as_number(b)
            if num_a is not None and num_b is not None:
                same = _close(num_a, num_b, rtol)
            else:
                same = a == b
            if not same:
                report.differences.append(f"column '{column}' row {index}: {a} vs {b}")


def _compare_json(a: Any, b: Any, where: str, rtol: float, report: RegressReport):
    if isinstance(a, dict) and isinstance(b, dict):
        if set(a) != set(b):
            raise SchemaMismatchError(f"keys differ at {where or '<root>'}")
        for key in a:
            _compare_json(a[key], b[key], f"{where}.{key}" if where else key, rtol, report)
        return
    if isinstance(a, list) and isinstance(b, list):
        if len(a) != len(b):
            raise SchemaMismatchError(f"lengths differ at {where}: {len(a)} vs {len(b)}")
        for i, (x, y) in enumerate(zip(a, b)):
            _compare_json(x, y, f"{where}[{i}]", rtol, report)
        return
    numeric = (int, float)
    if isinstance(a, bool) or isinstance(b, bool) or not (
        isinstance(a, numeric) and isinstance(b, numeric)
    ):
        if type(a) is not type(b) and not (a is None or b is None):
            raise SchemaMismatchError(f"types differ at {where}")
        report.compared += 1
        if a != b:
            report.differences.append(f"{where}: {a!r} vs {b!r}")
        return
    report.compared += 1
    if not _close(float(a), float(b), rtol):
        report.differences.append(f"{where}: {a!r} vs {b!r}")


def _load_json(path: Path) -> Any:
    with open(path, "r", encoding="utf-8") as handle:
        payload = json.load(handle)
    if isinstance(payload, dict):
        payload.pop(GENERATED_KEY, None)
    return payload


def regress(
    baseline: Union[str, Path], current: Union[str, Path], rtol: float = 1e-9
) -> RegressReport:
    """Compare ``current`` against ``baseline`` within relative tolerance ``rtol``.

    Raises:
        SchemaMismatchError: the files cannot be compared field by field.
        FileNotFoundError: either file is missing.
    """
    # pylint: disable=logging-fstring-interpolation
    baseline, current = Path(baseline), Path(current)
    for path in (baseline, current):
        if not path.is_file():
            raise FileNotFoundError(f"{path} does not exist")
    if rtol < 0:
        raise ValueError(f"rtol must be nonnegative, got {rtol}")
    if baseline.suffix.lower() != current.suffix.lower():
        raise SchemaMismatchError(f"file types differ: {baseline.suffix} vs {current.suffix}")

    report = RegressReport()
    if baseline.suffix.lower() == ".csv":
        _compare_csv(baseline, current, rtol, report)
    else:
        try:
            a, b = _load_json(baseline), _load_json(current)
        except json.JSONDecodeError as e:
            raise SchemaMismatchError(f"not a JSON artifact: {e}") from e
        _compare_json(a, b, "", rtol, report)
    for line in report.differences:
        logger.info(f"[Regress] {line}")
    return report
