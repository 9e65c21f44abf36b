"""
Report directory writer for mflab runs.
"""
import csv
import json
import math
import os
from contextlib import contextmanager
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np

from .mflab_logging import get_logger

logger = get_logger("reports")


def to_plain(value: Any) -> Any:
    """Convert numpy containers and scalars into JSON-serializable Python objects."""
    if isinstance(value, dict):
        return {str(k): to_plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_plain(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        # JSON has no inf/nan literals
        return value if math.isfinite(value) else str(value)
    return value


def format_cell(value: Any) -> str:
    """Format a CSV cell; floats use 17 significant digits."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    if value is None:
        return ""
    return str(value)


def make_check(name: str, value: Any, target: Any, tolerance: Any, passed: bool) -> Dict[str, Any]:
    """Build one acceptance-check record for summary.json."""
    return {
        "name": name,
        "value": to_plain(value),
        "target": to_plain(target),
        "tolerance": to_plain(tolerance),
        "passed": bool(passed),
    }


class ReportWriter:
    """Writes the JSON and CSV files of one run into a directory."""

    def __init__(self, output_dir: str):
        self.output_dir = output_dir
        self.written: List[str] = []
        os.makedirs(output_dir, exist_ok=True)

    def path(self, name: str) -> str:
        return os.path.join(self.output_dir, name)

    def write_json(self, name: str, payload: Dict[str, Any]) -> str:
        """
        Write a JSON file with sorted keys.

        Args:
            name: File name inside the output directory
            payload: JSON-like object, numpy values allowed

        Returns:
            Path of the written file
        """
        target = self.path(name)
        with open(target, "w", encoding="utf-8") as handle:
            json.dump(to_plain(payload), handle, indent=2, sort_keys=True)
            handle.write("\n")
        self.written.append(name)
        logger.debug(f"Wrote {target}")
        return target

    def write_csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
        """
        Write an RFC-4180 CSV file with a header row.

        Args:
            name: File name inside the output directory
            header: Column names
            rows: Row sequences, one value per column

        Returns:
            Path of the written file
        """
        target = self.path(name)
        with open(target, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\r\n")
            writer.writerow(header)
            for row in rows:
                if len(row) != len(header):
                    raise ValueError(f"{name}: row has {len(row)} cells, header has {len(header)}")
                writer.writerow([format_cell(v) for v in row])
        self.written.append(name)
        logger.debug(f"Wrote {target}")
        return target


@contextmanager
def open_report(output_dir: str):
    """Context manager yielding a ReportWriter for output_dir."""
    writer: Optional[ReportWriter] = None
    try:
        writer = ReportWriter(output_dir)
        yield writer
        logger.info(f"Report written to {output_dir}: {', '.join(writer.written)}")
    except Exception as e:
        written = ", ".join(writer.written) if writer else "nothing"
        logger.error(f"Report to {output_dir} failed after writing {written}: {e}")
        raise


def read_csv(path: str) -> Dict[str, np.ndarray]:
    """Read a numeric CSV written by ReportWriter into column arrays."""
    with open(path, encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        rows = [row for row in reader if row]
    columns: Dict[str, np.ndarray] = {}
    for j, name in enumerate(header):
        columns[name] = np.array([float(row[j]) for row in rows])
    return columns
