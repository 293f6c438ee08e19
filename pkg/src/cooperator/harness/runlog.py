"""Per-generation training log (CSV).

One row per ES generation.  ``iter`` counts generations from 0; the row for
``iter = k`` describes the population sampled around the center after ``k``
updates, so a run of N iterations has rows 0..N and the last row is scored
without a further update.  ``evals`` is the number of episodes spent on
updates before the row, ``iter * population * episodes``.  Floats are written
with ``repr`` so the file round-trips exactly.  ``wallclock_ms`` is
informational and the only column that varies between identical runs.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

COLUMNS = ("iter", "best", "mean", "std", "evals", "wallclock_ms")
HEADER = ",".join(COLUMNS)


@dataclass(frozen=True)
class LogRow:
    iter: int
    best: float
    mean: float
    std: float
    evals: int
    wallclock_ms: int

    def cells(self) -> list[str]:
        return [
            str(self.iter),
            repr(float(self.best)),
            repr(float(self.mean)),
            repr(float(self.std)),
            str(self.evals),
            str(self.wallclock_ms),
        ]


class RunLogWriter:
    """Appends rows and flushes after each one, so partial runs stay readable."""

    def __init__(self, path):
        self.path = Path(path)
        self._f = open(self.path, "w", newline="")
        self._f.write(HEADER + "\n")
        self._f.flush()
        self._last = -1

    def write(self, row: LogRow):
        if row.iter != self._last + 1:
            raise ValueError(f"log rows must count up from 0, got {row.iter} after {self._last}")
        self._f.write(",".join(row.cells()) + "\n")
        self._f.flush()
        self._last = row.iter

    def close(self):
        self._f.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_log(path) -> list[LogRow]:
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or tuple(header) != COLUMNS:
            raise ValueError(f"{path}: expected header {HEADER!r}, got {header!r}")
        rows = []
        for cells in reader:
            if not cells:
                continue
            rows.append(
                LogRow(int(cells[0]), float(cells[1]), float(cells[2]), float(cells[3]), int(cells[4]), int(cells[5]))
            )
    return rows


def without_wallclock(path) -> bytes:
    """Log contents with the timing column dropped, for byte comparisons."""
    lines = Path(path).read_bytes().splitlines(keepends=True)
    return b"".join(line.rsplit(b",", 1)[0] + b"\n" for line in lines)


def best_so_far(rows) -> list[float]:
    out, best = [], -math.inf
    for r in rows:
        best = max(best, r.best)
        out.append(best)
    return out
