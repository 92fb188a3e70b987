"""Loading, sampling and profiling of delimited tabular data sources.

A data source is a named set of columns of string cells. Empty cells are
either mapped to a reserved NUL sentinel (so every column keeps the table's
full row count) or dropped (producing per-column cell counts ``n_i``).
"""

from __future__ import annotations

import csv
import io
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from .errors import (
    EmptySampleError,
    TableLoadError,
    TableParseError,
    UnknownColumnError,
)

# Reserved sentinel for an empty cell. Rendered as "NUL" in reports; the
# \u0000 prefix keeps it distinct from a literal "NUL" value in the data.
NUL = "\u0000NUL"

EMPTY_IS_NUL = "empty_is_nul"
SKIP_EMPTY = "skip_empty"
NUL_POLICIES = (EMPTY_IS_NUL, SKIP_EMPTY)

FORMATS = ("csv", "tsv")


def render_value(value: str) -> str:
    """Human-readable form of a cell value (the NUL sentinel prints as NUL)."""
    return "NUL" if value == NUL else value


@dataclass(frozen=True)
class Column:
    """A named, ordered list of string cells (n_i >= 1)."""

    name: str
    cells: tuple[str, ...]

    def __post_init__(self):
        if len(self.cells) < 1:
            raise TableLoadError(f"column {self.name!r} has no cells")

    def __len__(self) -> int:
        return len(self.cells)


@dataclass(frozen=True)
class DataSource:
    """A named collection of columns sampled from one table."""

    name: str
    columns: tuple[Column, ...]
    _index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        index: dict[str, int] = {}
        for pos, col in enumerate(self.columns):
            if col.name in index:
                raise TableLoadError(f"duplicate column name {col.name!r}")
            index[col.name] = pos
        object.__setattr__(self, "_index", index)

    def column(self, name: str) -> Column:
        try:
            return self.columns[self._index[name]]
        except KeyError:
            raise UnknownColumnError(
                f"no column {name!r} in data source {self.name!r}"
            ) from None

    @property
    def column_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns)

    @property
    def sizes(self) -> tuple[int, ...]:
        """Per-column cell counts n_i."""
        return tuple(len(c) for c in self.columns)

    @property
    def max_cells(self) -> int:
        """N = max_i n_i."""
        return max(self.sizes)

    @property
    def total_cells(self) -> int:
        return sum(self.sizes)

    def renamed(self, name: str) -> "DataSource":
        return DataSource(name, self.columns)


@dataclass(frozen=True)
class ValueHistogram:
    """Exact value counts for one column, descending count then ascending value."""

    column: str
    entries: tuple[tuple[str, int], ...]

    @property
    def total(self) -> int:
        return sum(count for _, count in self.entries)

    def fractions(self) -> dict[str, float]:
        """Empirical fraction of the column's cells holding each value."""
        n = self.total
        return {value: count / n for value, count in self.entries}


def _resolve_headers(raw: list[str]) -> list[str]:
    headers = []
    for position, name in enumerate(raw, start=1):
        headers.append(name if name.strip() else f"Field_{position}")
    seen: set[str] = set()
    for name in headers:
        if name in seen:
            raise TableLoadError(f"duplicate header {name!r}")
        seen.add(name)
    return headers


def _reader(text: str, format: str):
    if format == "csv":
        return csv.reader(io.StringIO(text, newline=""))
    if format == "tsv":
        return csv.reader(io.StringIO(text, newline=""), delimiter="\t", quoting=csv.QUOTE_NONE)
    raise TableLoadError(f"unknown table format {format!r} (expected one of {FORMATS})")


def load_table(
    path: str | Path,
    format: str = "csv",
    nul_policy: str = EMPTY_IS_NUL,
    name: str | None = None,
) -> DataSource:
    """Load a delimited text file with a header row into a DataSource.

    Blank header names are replaced by positional names ("Field_1", ...).
    Empty cells become the NUL sentinel under ``empty_is_nul`` or are dropped
    under ``skip_empty``. Input must be valid UTF-8; any column left without
    cells makes the load fail.
    """
    if nul_policy not in NUL_POLICIES:
        raise TableLoadError(f"unknown nul_policy {nul_policy!r} (expected one of {NUL_POLICIES})")
    path = Path(path)
    try:
        text = path.read_bytes().decode("utf-8")
    except UnicodeDecodeError as exc:
        raise TableLoadError(f"{path}: not valid UTF-8: {exc}") from None
    except OSError as exc:
        raise TableLoadError(f"{path}: {exc}") from None

    reader = _reader(text, format)
    try:
        header_row = next(reader)
    except StopIteration:
        raise TableLoadError(f"{path}: file is empty, no header row") from None
    headers = _resolve_headers(header_row)

    cells: list[list[str]] = [[] for _ in headers]
    data_rows = 0
    while True:
        try:
            row = next(reader)
        except StopIteration:
            break
        except csv.Error as exc:
            raise TableParseError(str(exc), row=reader.line_num) from None
        if not row:
            continue  # blank line
        if len(row) != len(headers):
            raise TableParseError(
                f"expected {len(headers)} fields, found {len(row)}", row=reader.line_num
            )
        data_rows += 1
        for i, cell in enumerate(row):
            if "\u0000" in cell:
                raise TableParseError("cell contains reserved NUL character", row=reader.line_num)
            if cell == "":
                if nul_policy == EMPTY_IS_NUL:
                    cells[i].append(NUL)
                # skip_empty drops the cell
            else:
                cells[i].append(cell)

    if data_rows == 0:
        raise TableLoadError(f"{path}: no data rows")
    for header, column_cells in zip(headers, cells):
        if not column_cells:
            raise TableLoadError(f"{path}: column {header!r} has no cells after {nul_policy}")

    source_name = name if name is not None else path.stem
    return DataSource(
        source_name,
        tuple(Column(h, tuple(c)) for h, c in zip(headers, cells)),
    )


def sample_rows(ds: DataSource, start: int, count: int) -> DataSource:
    """Keep each column's cells in [start, start+count).

    Columns with no cells at or beyond ``start`` are dropped; if that leaves
    no columns at all, the sample is empty and an error is raised.
    """
    if start < 0:
        raise EmptySampleError(f"start must be >= 0, got {start}")
    if count < 1:
        raise EmptySampleError(f"count must be >= 1, got {count}")
    kept = []
    for col in ds.columns:
        window = col.cells[start : start + count]
        if window:
            kept.append(Column(col.name, window))
    if not kept:
        raise EmptySampleError(
            f"start {start} is beyond every column of {ds.name!r} (longest has {ds.max_cells} cells)"
        )
    return DataSource(ds.name, tuple(kept))


def value_histogram(ds: DataSource, column: str) -> ValueHistogram:
    """Exact value counts for ``column``, NUL counted like any other value."""
    col = ds.column(column)
    counts = Counter(col.cells)
    entries = tuple(sorted(counts.items(), key=lambda kv: (-kv[1], kv[0])))
    return ValueHistogram(column, entries)


def histogram_to_csv(hist: ValueHistogram) -> str:
    """Two-column CSV export (value,count); the sentinel renders as NUL."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["value", "count"])
    for value, count in hist.entries:
        writer.writerow([render_value(value), count])
    return out.getvalue()
