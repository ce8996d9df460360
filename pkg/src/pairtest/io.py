"""File formats: frequency CSV (long and wide) and the stacked subject layout.

Long frequency format (header required)::

    kind,r,group,count
    bilateral,0,cefaclor,9
    unilateral,1,cefaclor,34

``kind`` is ``bilateral`` (r in 0..2) or ``unilateral`` (r in 0..1);
missing cells default to zero and group order follows first appearance.

Wide format (``--wide``) mirrors the usual frequency-table shape with
groups as columns::

    category,cefaclor,amoxicillin
    m0,9,7
    m1,7,5
    m2,23,13
    n0,20,19
    n1,34,36

The stacked layout has one collapsed subject row per organ response::

    sub_id,response,group,count,replicate

where bilateral subjects contribute two rows per ``sub_id`` and ``count``
carries the cell multiplicity.
"""

from __future__ import annotations

import csv
import io as _io
from dataclasses import dataclass

import numpy as np

from .counts import CombinedCounts, GroupCounts
from .errors import DataError, ParseError

__all__ = ["parse_frequency", "parse_frequency_wide", "render_frequency",
           "StackedRow", "stack_rows", "collapse_rows", "render_stacked",
           "parse_stacked"]

_LONG_HEADER = ["kind", "r", "group", "count"]
_WIDE_CATEGORIES = ("m0", "m1", "m2", "n0", "n1")
_STACKED_HEADER = ["sub_id", "response", "group", "count", "replicate"]


def _open_rows(source):
    """Yield (line_number, row) from a path, file-like object, or CSV text."""
    if hasattr(source, "read"):
        text = source.read()
    else:
        text = str(source)
        if "\n" not in text and "," not in text:
            with open(source, "r", encoding="utf-8", newline="") as fh:
                text = fh.read()
    reader = csv.reader(_io.StringIO(text))
    for lineno, row in enumerate(reader, start=1):
        if not row or all(not cell.strip() for cell in row):
            continue
        yield lineno, [cell.strip() for cell in row]


def _int_field(value: str, what: str, lineno: int) -> int:
    try:
        v = int(value)
    except ValueError:
        raise ParseError(f"{what} {value!r} is not an integer", lineno) from None
    return v


def parse_frequency(source) -> CombinedCounts:
    """Parse the long frequency format into validated counts.

    ``source`` may be a path, an open text file, or the CSV text itself.
    """
    rows = _open_rows(source)
    try:
        lineno, header = next(rows)
    except StopIteration:
        raise ParseError("no groups: the file is empty", None) from None
    if [h.lower() for h in header] != _LONG_HEADER:
        raise ParseError(f"expected header {','.join(_LONG_HEADER)!r}, got "
                         f"{','.join(header)!r}", lineno)
    order: list[str] = []
    cells: dict[tuple[str, int, str], int] = {}
    for lineno, row in rows:
        if len(row) != 4:
            raise ParseError(f"expected 4 fields, got {len(row)}", lineno)
        kind, r_text, group, count_text = row
        kind = kind.lower()
        if kind not in ("bilateral", "unilateral"):
            raise ParseError(f"kind must be 'bilateral' or 'unilateral', got {kind!r}", lineno)
        r = _int_field(r_text, "r", lineno)
        limit = 2 if kind == "bilateral" else 1
        if not 0 <= r <= limit:
            raise ParseError(f"r={r} out of range 0..{limit} for {kind} rows", lineno)
        count = _int_field(count_text, "count", lineno)
        if count < 0:
            raise ParseError(f"count={count} is negative", lineno)
        if not group:
            raise ParseError("empty group label", lineno)
        key = (kind, r, group)
        if key in cells:
            raise ParseError(f"duplicate cell {kind},{r},{group}", lineno)
        cells[key] = count
        if group not in order:
            order.append(group)
    if not order:
        raise ParseError("no groups: the file has a header but no data rows", None)
    try:
        groups = tuple(GroupCounts(m0=cells.get(("bilateral", 0, gl), 0),
                                   m1=cells.get(("bilateral", 1, gl), 0),
                                   m2=cells.get(("bilateral", 2, gl), 0),
                                   n0=cells.get(("unilateral", 0, gl), 0),
                                   n1=cells.get(("unilateral", 1, gl), 0))
                       for gl in order)
        return CombinedCounts(groups, tuple(order))
    except DataError as exc:
        raise ParseError(str(exc), None) from exc


def parse_frequency_wide(source) -> CombinedCounts:
    """Parse the wide (groups-as-columns) frequency format."""
    rows = _open_rows(source)
    try:
        lineno, header = next(rows)
    except StopIteration:
        raise ParseError("no groups: the file is empty", None) from None
    if not header or header[0].lower() != "category" or len(header) < 2:
        raise ParseError("expected header 'category,<group>,...'", lineno)
    labels = header[1:]
    if len(set(labels)) != len(labels):
        raise ParseError("duplicate group labels in header", lineno)
    table = {}
    for lineno, row in rows:
        if len(row) != len(labels) + 1:
            raise ParseError(f"expected {len(labels) + 1} fields, got {len(row)}", lineno)
        cat = row[0].lower()
        if cat not in _WIDE_CATEGORIES:
            raise ParseError(f"unknown category {row[0]!r}; expected one of "
                             f"{', '.join(_WIDE_CATEGORIES)}", lineno)
        if cat in table:
            raise ParseError(f"duplicate category {cat!r}", lineno)
        values = [_int_field(v, cat, lineno) for v in row[1:]]
        if any(v < 0 for v in values):
            raise ParseError(f"negative count in {cat!r} row", lineno)
        table[cat] = values
    if not table:
        raise ParseError("no groups: the file has a header but no data rows", None)
    zeros = [0] * len(labels)
    try:
        groups = tuple(GroupCounts(*(table.get(cat, zeros)[j] for cat in _WIDE_CATEGORIES))
                       for j in range(len(labels)))
        return CombinedCounts(groups, tuple(labels))
    except DataError as exc:
        raise ParseError(str(exc), None) from exc


def render_frequency(data: CombinedCounts) -> str:
    """Long-format CSV text; ``parse_frequency`` inverts this exactly."""
    out = _io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(_LONG_HEADER)
    for label, gc in zip(data.labels, data.groups):
        for r, count in enumerate((gc.m0, gc.m1, gc.m2)):
            writer.writerow(["bilateral", r, label, count])
    for label, gc in zip(data.labels, data.groups):
        for r, count in enumerate((gc.n0, gc.n1)):
            writer.writerow(["unilateral", r, label, count])
    return out.getvalue()


@dataclass(frozen=True)
class StackedRow:
    """One organ response of one collapsed subject pattern."""

    sub_id: int
    response: int
    group: str
    count: int
    replicate: int = 1


_BILATERAL_RESPONSES = ((0, 0), (1, 0), (1, 1))


def stack_rows(data: CombinedCounts, replicate: int = 1) -> list[StackedRow]:
    """Expand counts into the stacked layout (bilateral blocks first).

    Every cell appears, including zero-count ones, so the row pattern is
    the same for every dataset of a given group count.
    """
    rows: list[StackedRow] = []
    sub_id = 0
    for label, gc in zip(data.labels, data.groups):
        for pattern, count in zip(_BILATERAL_RESPONSES, (gc.m0, gc.m1, gc.m2)):
            sub_id += 1
            for resp in pattern:
                rows.append(StackedRow(sub_id, resp, label, count, replicate))
    for label, gc in zip(data.labels, data.groups):
        for resp, count in enumerate((gc.n0, gc.n1)):
            sub_id += 1
            rows.append(StackedRow(sub_id, resp, label, count, replicate))
    return rows


def collapse_rows(rows: list[StackedRow], replicate: int | None = None) -> CombinedCounts:
    """Rebuild the frequency table from stacked rows (inverse of stack_rows)."""
    if replicate is not None:
        rows = [r for r in rows if r.replicate == replicate]
    by_subject: dict[tuple[int, int], list[StackedRow]] = {}
    for row in rows:
        by_subject.setdefault((row.replicate, row.sub_id), []).append(row)
    order: list[str] = []
    m: dict[str, list[int]] = {}
    n: dict[str, list[int]] = {}
    for key in sorted(by_subject):
        subject = by_subject[key]
        if len(subject) not in (1, 2):
            raise DataError(f"sub_id {key[1]} has {len(subject)} rows; expected 1 or 2")
        group = subject[0].group
        count = subject[0].count
        if any(r.group != group or r.count != count for r in subject):
            raise DataError(f"sub_id {key[1]} rows disagree on group or count")
        if group not in order:
            order.append(group)
            m[group] = [0, 0, 0]
            n[group] = [0, 0]
        if len(subject) == 2:
            m[group][subject[0].response + subject[1].response] += count
        else:
            n[group][subject[0].response] += count
    if not order:
        raise DataError("no groups")
    return CombinedCounts.from_arrays([m[gl] for gl in order], [n[gl] for gl in order],
                                      tuple(order))


def render_stacked(rows: list[StackedRow]) -> str:
    out = _io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(_STACKED_HEADER)
    for row in rows:
        writer.writerow([row.sub_id, row.response, row.group, row.count, row.replicate])
    return out.getvalue()


def parse_stacked(source) -> list[StackedRow]:
    rows_iter = _open_rows(source)
    try:
        lineno, header = next(rows_iter)
    except StopIteration:
        raise ParseError("empty stacked file", None) from None
    if [h.lower() for h in header] != _STACKED_HEADER:
        raise ParseError(f"expected header {','.join(_STACKED_HEADER)!r}", lineno)
    rows = []
    for lineno, row in rows_iter:
        if len(row) != 5:
            raise ParseError(f"expected 5 fields, got {len(row)}", lineno)
        sub_id = _int_field(row[0], "sub_id", lineno)
        response = _int_field(row[1], "response", lineno)
        if response not in (0, 1):
            raise ParseError(f"response={response} must be 0 or 1", lineno)
        count = _int_field(row[3], "count", lineno)
        if count < 0:
            raise ParseError(f"count={count} is negative", lineno)
        replicate = _int_field(row[4], "replicate", lineno)
        rows.append(StackedRow(sub_id, response, row[2], count, replicate))
    return rows
