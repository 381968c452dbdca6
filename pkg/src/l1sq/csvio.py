"""Deterministic CSV emission for experiment and benchmark tables.

Numbers are formatted with repr(), which python guarantees is the shortest
string that round-trips the exact float64 — so two runs that compute the
same values emit byte-identical files, and a reader recovers the values
exactly.  Line endings are pinned to "\\n" regardless of platform for the
same reason.
"""

from __future__ import annotations

import csv
import io

from .errors import FormatError


def format_cell(value) -> str:
    """Canonical text for one CSV cell."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        # repr of the plain float, not the numpy subclass ("np.float64(x)")
        return repr(float(value))
    if isinstance(value, int):
        return str(int(value))
    if isinstance(value, str):
        return value
    # numpy scalars and anything else with a sensible item() / str()
    item = getattr(value, "item", None)
    if item is not None:
        return format_cell(item())
    return str(value)


def render_csv(header, rows) -> str:
    """CSV text for a header and an iterable of row sequences."""
    header = [str(h) for h in header]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    width = len(header)
    for i, row in enumerate(rows):
        cells = [format_cell(v) for v in row]
        if len(cells) != width:
            raise FormatError(
                f"row {i} has {len(cells)} cells but the header names {width} columns"
            )
        writer.writerow(cells)
    return buf.getvalue()


def write_csv(path, header, rows) -> int:
    """Write a CSV file; returns the number of data rows written."""
    text = render_csv(header, rows)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return text.count("\n") - 1


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    """Read a CSV file back as (header, rows-of-strings)."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path} is empty; expected a header row") from None
        rows = [row for row in reader]
    width = len(header)
    for i, row in enumerate(rows):
        if len(row) != width:
            raise FormatError(
                f"{path} row {i} has {len(row)} cells but the header names "
                f"{width} columns"
            )
    return header, rows
