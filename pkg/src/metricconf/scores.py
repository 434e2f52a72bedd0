"""Loading metric/human score records and aligning them into score matrices."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import BinaryIO, Iterable

import numpy as np

FIELDS = ("metric", "system_id", "input_id", "score")
POLICIES = ("strict", "drop-incomplete-inputs", "drop-incomplete-systems")


class ScoreError(ValueError):
    """Raised for malformed or inconsistent score data."""


@dataclass(frozen=True)
class ScoreRecord:
    metric_name: str
    system_id: str
    input_id: str
    score: float


@dataclass(frozen=True, eq=False)
class ScoreMatrix:
    """One metric's scores; rows are systems, columns are inputs."""

    metric_name: str
    systems: tuple[str, ...]
    inputs: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.shape != (len(self.systems), len(self.inputs)):
            raise ScoreError(
                f"{self.metric_name}: values shape {values.shape} does not match "
                f"{len(self.systems)} systems x {len(self.inputs)} inputs"
            )
        if len(self.systems) < 2 or len(self.inputs) < 1:
            raise ScoreError(f"{self.metric_name}: need at least 2 systems and 1 input")
        if not np.all(np.isfinite(values)):
            raise ScoreError(f"{self.metric_name}: matrix has non-finite cells")
        values.setflags(write=False)
        object.__setattr__(self, "systems", tuple(self.systems))
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "values", values)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def __eq__(self, other):
        if not isinstance(other, ScoreMatrix):
            return NotImplemented
        return (
            self.metric_name == other.metric_name
            and self.systems == other.systems
            and self.inputs == other.inputs
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None


@dataclass(frozen=True)
class ScoreSet:
    systems: tuple[str, ...]
    inputs: tuple[str, ...]
    matrices: dict[str, ScoreMatrix] = field(default_factory=dict)

    def __getitem__(self, metric: str) -> ScoreMatrix:
        try:
            return self.matrices[metric]
        except KeyError:
            raise KeyError(f"unknown metric {metric!r}; have {sorted(self.matrices)}") from None

    @property
    def metrics(self) -> list[str]:
        return list(self.matrices)

    def to_records(self) -> list[ScoreRecord]:
        out = []
        for name, m in self.matrices.items():
            for i, s in enumerate(self.systems):
                for j, d in enumerate(self.inputs):
                    out.append(ScoreRecord(name, s, d, float(m.values[i, j])))
        return out


def as_values(m) -> np.ndarray:
    """The float matrix behind a ScoreMatrix or any 2-D array-like."""
    if isinstance(m, ScoreMatrix):
        return m.values
    arr = np.asarray(m, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D score matrix, got shape {arr.shape}")
    return arr


def _parse_score(raw, lineno: int) -> float:
    if isinstance(raw, bool) or raw is None:
        raise ScoreError(f"line {lineno}: score must be a number, got {raw!r}")
    try:
        value = float(raw)
    except (TypeError, ValueError):
        raise ScoreError(f"line {lineno}: score must be a number, got {raw!r}") from None
    if not math.isfinite(value):
        raise ScoreError(f"line {lineno}: score is not finite ({raw!r})")
    return value


def _record(row: dict, lineno: int) -> ScoreRecord:
    missing = [k for k in FIELDS if row.get(k) in (None, "")]
    if missing:
        raise ScoreError(f"line {lineno}: missing field(s) {', '.join(missing)}")
    return ScoreRecord(
        str(row["metric"]), str(row["system_id"]), str(row["input_id"]),
        _parse_score(row["score"], lineno),
    )


def parse_scores(stream: BinaryIO | bytes, format: str = "jsonl") -> list[ScoreRecord]:
    """Parse a JSONL or CSV score file; records come back in file order."""
    data = stream if isinstance(stream, (bytes, bytearray)) else stream.read()
    try:
        text = bytes(data).decode("utf-8-sig")
    except UnicodeDecodeError as exc:
        raise ScoreError(f"score file is not valid UTF-8: {exc}") from None

    records = []
    if format == "jsonl":
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ScoreError(f"line {lineno}: malformed JSON ({exc.msg})") from None
            if not isinstance(row, dict):
                raise ScoreError(f"line {lineno}: expected a JSON object")
            records.append(_record(row, lineno))
    elif format == "csv":
        reader = csv.DictReader(io.StringIO(text, newline=""))
        if reader.fieldnames is None:
            return records
        absent = [k for k in FIELDS if k not in reader.fieldnames]
        if absent:
            raise ScoreError(f"line 1: CSV header lacks column(s) {', '.join(absent)}")
        for row in reader:
            if None in row:
                raise ScoreError(f"line {reader.line_num}: too many columns")
            records.append(_record(row, reader.line_num))
    else:
        raise ValueError(f"unknown score format {format!r} (use jsonl or csv)")
    return records


def load_scores(path, format: str | None = None) -> list[ScoreRecord]:
    path = str(path)
    if format is None:
        format = "csv" if path.lower().endswith(".csv") else "jsonl"
    with open(path, "rb") as fh:
        return parse_scores(fh, format)


def write_scores(records: Iterable[ScoreRecord], stream, format: str = "jsonl") -> None:
    """Inverse of :func:`parse_scores` (writes text; floats keep full precision)."""
    if format == "jsonl":
        for r in records:
            row = {"metric": r.metric_name, "system_id": r.system_id,
                   "input_id": r.input_id, "score": r.score}
            stream.write(json.dumps(row) + "\n")
    elif format == "csv":
        w = csv.writer(stream, lineterminator="\n")
        w.writerow(FIELDS)
        for r in records:
            w.writerow([r.metric_name, r.system_id, r.input_id, repr(r.score)])
    else:
        raise ValueError(f"unknown score format {format!r}")


def build_score_set(records: list[ScoreRecord], metrics: list[str],
                    policy: str = "strict") -> ScoreSet:
    """Align the requested metrics into complete, identically indexed matrices.

    ``policy`` decides what happens to cells missing for some metric:
    ``strict`` raises, ``drop-incomplete-inputs`` drops every input with a gap,
    ``drop-incomplete-systems`` drops every system with a gap.
    """
    if policy not in POLICIES:
        raise ValueError(f"unknown missing-data policy {policy!r}; choose from {POLICIES}")
    if not metrics:
        raise ScoreError("no metrics requested")
    wanted = set(metrics)
    cells: dict[tuple[str, str, str], float] = {}
    for r in records:
        if r.metric_name not in wanted:
            continue
        key = (r.metric_name, r.system_id, r.input_id)
        if key in cells:
            raise ScoreError(f"duplicate score for metric={key[0]} system={key[1]} input={key[2]}")
        cells[key] = r.score

    present = {m for m, _, _ in cells}
    absent = [m for m in metrics if m not in present]
    if absent:
        raise ScoreError(f"no scores for metric(s): {', '.join(absent)}")

    systems = sorted({s for _, s, _ in cells})
    inputs = sorted({d for _, _, d in cells})

    def complete(s, d):
        return all((m, s, d) in cells for m in metrics)

    if policy == "strict":
        gaps = [(m, s, d) for s in systems for d in inputs for m in metrics if (m, s, d) not in cells]
        if gaps:
            shown = "; ".join(f"{m}/{s}/{d}" for m, s, d in gaps[:10])
            more = f" (+{len(gaps) - 10} more)" if len(gaps) > 10 else ""
            raise ScoreError(f"{len(gaps)} missing cell(s) (metric/system/input): {shown}{more}")
    elif policy == "drop-incomplete-inputs":
        inputs = [d for d in inputs if all(complete(s, d) for s in systems)]
    else:
        systems = [s for s in systems if all(complete(s, d) for d in inputs)]

    if len(systems) < 2 or not inputs:
        raise ScoreError(
            f"after applying policy {policy!r} only {len(systems)} system(s) x "
            f"{len(inputs)} input(s) remain complete for all metrics"
        )

    matrices = {}
    for m in metrics:
        vals = np.array([[cells[(m, s, d)] for d in inputs] for s in systems])
        matrices[m] = ScoreMatrix(m, tuple(systems), tuple(inputs), vals)
    return ScoreSet(tuple(systems), tuple(inputs), matrices)
