"""CSV helpers shared by the library and the command-line front end.

Two formatting regimes: human tables carry 7 significant digits,
machine files carry 17 (the shortest width guaranteeing exact float
round-trips).
"""

from __future__ import annotations

import csv
from typing import Iterable, Sequence

__all__ = ["format_sig", "write_rows", "read_rows", "HUMAN_DIGITS", "MACHINE_DIGITS"]

HUMAN_DIGITS = 7
MACHINE_DIGITS = 17


def format_sig(value, digits: int) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, int):
        return str(value)
    return f"{value:.{digits}g}"


def write_rows(path, header: Sequence[str], rows: Iterable[Sequence], digits: int = HUMAN_DIGITS) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([format_sig(v, digits) for v in row])


def read_rows(path) -> tuple[list[str], list[list]]:
    """Header plus rows with numeric fields parsed back to float/int."""
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        rows = []
        for raw in r:
            row = []
            for cell in raw:
                try:
                    row.append(int(cell))
                except ValueError:
                    try:
                        row.append(float(cell))
                    except ValueError:
                        row.append(cell)
            rows.append(row)
    return header, rows
