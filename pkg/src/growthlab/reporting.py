"""Run manifests, golden tables and atomic output writing."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import tempfile
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

from . import __version__


class OutputCollision(FileExistsError):
    pass


class SchemaError(ValueError):
    pass


def atomic_write(path, text: str, force: bool = False) -> Path:
    """Write via a temp file in the same directory and rename over the target."""
    path = Path(path)
    if path.exists() and not force:
        raise OutputCollision(f"{path} exists; pass --force to overwrite")
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "item") and callable(obj.item):
        return obj.item()
    if isinstance(obj, float) or isinstance(obj, (int, str, bool)) or obj is None:
        return obj
    return str(obj)


@dataclass
class CriterionOutcome:
    number: int
    name: str
    passed: bool
    measured: dict
    thresholds: dict
    note: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        shown = ", ".join(f"{k}={_fmt(v)}" for k, v in self.measured.items())
        return f"criterion {self.number:2d} {status}  {self.name}: {shown}"


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


@dataclass
class RunManifest:
    subcommand: str
    params: dict
    seed: object = None           # an int, or {check: seed} when each check used its default
    argv: list = field(default_factory=list)
    golden: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    criteria: list = field(default_factory=list)
    started: float = field(default_factory=time.time)
    duration: float = 0.0
    version: str = __version__

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.criteria)

    def record(self, outcome: CriterionOutcome):
        self.criteria.append(_jsonable(asdict(outcome)))

    def to_json(self) -> str:
        return json.dumps(_jsonable(asdict(self)), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        data = json.loads(text)
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in data.items() if k in known})

    @classmethod
    def load(cls, path) -> "RunManifest":
        return cls.from_json(Path(path).read_text())


# ---------------------------------------------------------------------------
# golden tables

_HASH_PREFIX = "# header-sha256: "


def header_hash(header) -> str:
    return hashlib.sha256(",".join(header).encode()).hexdigest()


@dataclass
class GoldenTable:
    header: list
    rows: list

    @property
    def hash(self) -> str:
        return header_hash(self.header)

    def to_text(self) -> str:
        return _HASH_PREFIX + self.hash + "\n" + csv_text(self.header, self.rows)

    @classmethod
    def from_text(cls, text: str) -> "GoldenTable":
        lines = text.splitlines()
        stored = None
        if lines and lines[0].startswith(_HASH_PREFIX):
            stored = lines[0][len(_HASH_PREFIX):].strip()
            lines = lines[1:]
        reader = list(csv.reader(lines))
        if not reader:
            raise SchemaError("empty table")
        header, rows = reader[0], [r for r in reader[1:] if r]
        if stored is not None and stored != header_hash(header):
            raise SchemaError("header hash does not match the header row")
        return cls(header, rows)

    @classmethod
    def load(cls, path) -> "GoldenTable":
        return cls.from_text(Path(path).read_text())


@dataclass(frozen=True)
class CellDiff:
    row: int
    column: str
    got: str
    expected: str


@dataclass
class DiffReport:
    diffs: list

    @property
    def clean(self) -> bool:
        return not self.diffs

    def lines(self):
        return [f"row {d.row} column {d.column}: got {d.got}, expected {d.expected}" for d in self.diffs]


def _is_int(s: str) -> bool:
    try:
        int(s)
        return True
    except ValueError:
        return False


def diff_golden(output: GoldenTable, golden: GoldenTable, tolerances: Optional[dict] = None,
                default_tol: float = 0.0) -> DiffReport:
    """Exact diff on integer columns, |got - expected| <= tol on real ones."""
    if output.hash != golden.hash:
        raise SchemaError(f"schema mismatch: {output.header} vs {golden.header}")
    tolerances = tolerances or {}
    diffs = []
    for i in range(max(len(output.rows), len(golden.rows))):
        if i >= len(output.rows) or i >= len(golden.rows):
            got = ",".join(output.rows[i]) if i < len(output.rows) else "<missing>"
            exp = ",".join(golden.rows[i]) if i < len(golden.rows) else "<missing>"
            diffs.append(CellDiff(i + 1, "*", got, exp))
            continue
        for col, g, e in zip(golden.header, output.rows[i], golden.rows[i]):
            if _is_int(e) and _is_int(g):
                same = int(g) == int(e)
            else:
                try:
                    same = abs(float(g) - float(e)) <= tolerances.get(col, default_tol)
                except ValueError:
                    same = g == e
            if not same:
                diffs.append(CellDiff(i + 1, col, g, e))
    return DiffReport(diffs)
