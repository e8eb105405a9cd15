from __future__ import annotations

import json
import math
from pathlib import Path
from typing import TYPE_CHECKING, Any

import numpy as np

if TYPE_CHECKING:
    from collections.abc import Iterable, Mapping, Sequence

    from numpy.typing import NDArray


def format_float(value: float) -> str:
    """Format `value` with 17 significant digits (round-trip safe)."""
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "nan"
    return f"{float(value):.17g}"


def format_cell(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format_float(float(value))
    return str(value)


class CsvWriter:
    """Append rows to a CSV file with a fixed header.

    Uses ``,`` separators, ``.`` decimals and LF line endings; floats carry 17
    significant digits so repeated runs produce byte-identical files.
    """

    def __init__(self, path: str | Path, columns: Sequence[str]) -> None:
        self.path = Path(path)
        self.columns = tuple(columns)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with self.path.open("w", newline="\n", encoding="utf-8") as fh:
            fh.write(",".join(self.columns) + "\n")

    def write(self, row: Mapping[str, Any]) -> None:
        line = ",".join(format_cell(row[c]) for c in self.columns)
        with self.path.open("a", newline="\n", encoding="utf-8") as fh:
            fh.write(line + "\n")

    def write_many(self, rows: Iterable[Mapping[str, Any]]) -> None:
        for row in rows:
            self.write(row)


def dump_json(obj: Any, path: str | Path | None = None) -> str:
    """Serialize `obj` canonically (sorted keys, 2-space indent, final newline)."""
    text = json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"
    if path is not None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    return text


def first_nonfinite(arr: NDArray) -> tuple[int, ...] | None:
    """Return the index of the first non-finite entry of `arr`, if any."""
    bad = ~np.isfinite(arr)
    if not bad.any():
        return None
    return tuple(int(i) for i in np.argwhere(bad)[0])
