"""Readers for series files and frame stacks, writers for result records."""

from __future__ import annotations

import csv
import io
import json
import re
from pathlib import Path

import numpy as np

from .results import DataError


def _delimiter(line: str) -> str:
    return "\t" if "\t" in line else ","


def _data_lines(text: str):
    return [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]


def read_table(path) -> tuple[list[str], np.ndarray]:
    """Comma- or tab-separated numeric table.

    ``#`` lines are comments. A first non-comment row that does not parse as
    numbers is returned as the header.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    lines = _data_lines(text)
    if not lines:
        raise DataError(f"{path}: no data rows")
    rows = list(csv.reader(io.StringIO("\n".join(lines)), delimiter=_delimiter(lines[0])))
    header: list[str] = []
    try:
        [float(v) for v in rows[0]]
    except ValueError:
        header = [h.strip() for h in rows[0]]
        rows = rows[1:]
    try:
        data = np.array([[float(v) for v in r] for r in rows], dtype=float)
    except ValueError as exc:
        raise DataError(f"{path}: non-numeric entry ({exc})") from exc
    if data.ndim != 2 or data.shape[0] == 0 or len({len(r) for r in rows}) != 1:
        raise DataError(f"{path}: ragged or empty table")
    return header, data


def read_series(path) -> tuple[np.ndarray, np.ndarray]:
    """Two-column series ``(x, counts)``."""
    _, data = read_table(path)
    if data.shape[1] != 2:
        raise DataError(f"{path}: expected 2 columns, found {data.shape[1]}")
    return data[:, 0], data[:, 1]


def write_series(path, x, y, header: str) -> None:
    """Two-column CSV with a ``#`` comment header."""
    # shortest round-trip repr: reading the file back gives the same floats
    lines = [f"# {header}"] + [f"{float(a)!r},{float(b)!r}" for a, b in zip(x, y)]
    Path(path).write_text("\n".join(lines) + "\n")


def _frame_index(p: Path) -> int:
    m = re.findall(r"\d+", p.stem)
    if not m:
        raise DataError(f"frame file without a number: {p.name}")
    return int(m[-1])


def read_frames(path) -> list[tuple[np.ndarray, np.ndarray]]:
    """Frame stack from a directory of numbered series files or one multi-column file.

    A multi-column file has the wavelength in the first column and one
    frame per further column; its header row carries the frame times.
    """
    path = Path(path)
    if path.is_dir():
        files = sorted((p for p in path.iterdir() if p.is_file() and p.suffix in {".csv", ".tsv", ".txt", ".dat"}),
                       key=_frame_index)
        if not files:
            raise DataError(f"{path}: no frame files")
        return [read_series(p) for p in files]
    header, data = read_table(path)
    if data.shape[1] < 2:
        raise DataError(f"{path}: frame stack needs a wavelength column and at least one frame")
    if header:
        try:
            times = [float(h) for h in header[1:]]
        except ValueError as exc:
            raise DataError(f"{path}: frame header must hold numeric times") from exc
        order = np.argsort(times, kind="stable")
    else:
        order = np.arange(data.shape[1] - 1)
    wl = data[:, 0]
    return [(wl.copy(), data[:, 1 + i].copy()) for i in order]


def write_frames(path, frames, times=None) -> None:
    """Multi-column frame stack sharing the first frame's wavelength axis."""
    wl = frames[0][0]
    if any(not np.array_equal(f[0], wl) for f in frames):
        raise ValueError("frames must share a wavelength axis")
    times = list(range(len(frames))) if times is None else list(times)
    cols = np.column_stack([wl] + [f[1] for f in frames])
    lines = ["# spectral frames; first column wavelength (nm), header row frame times (s)",
             ",".join(["wavelength_nm"] + [f"{t:g}" for t in times])]
    lines += [",".join(repr(float(v)) for v in row) for row in cols]
    Path(path).write_text("\n".join(lines) + "\n")


def write_json(path, record: dict) -> None:
    Path(path).write_text(json.dumps(record, indent=2) + "\n")
