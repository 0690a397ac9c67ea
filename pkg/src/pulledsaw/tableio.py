"""Table files, manifests, weight-grid specs and the enumeration cache.

A table is a CSV payload with header ``class,d,n,v,h,count`` sorted by
``(n, v, h)`` plus a JSON manifest next to it (``<stem>.manifest.json``).
The manifest checksum covers the payload bytes only, so it is a
deterministic function of the table.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
import re
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from pulledsaw import __version__
from pulledsaw.enumeration import CountTable, WalkClass

SCHEMA_VERSION = 1
HEADER = "class,d,n,v,h,count"
CELL_CONVENTION = {
    "positive": "(v, h) = (visits, endpoint height)",
    "positive-unfolded": "(v, h) = (visits, endpoint height)",
    "full-lattice": "(v, h) = (0, z_n)",
    "plane": "(v, h) = (n, 0)",
}
CACHE_ENV = "PULLEDSAW_CACHE"


class TableFormatError(ValueError):
    pass


class ManifestError(ValueError):
    pass


@dataclass
class Manifest:
    schema_version: int
    dimension: int
    walk_class: str
    n_max: int
    stochastic: bool
    seed: int | None
    generator_version: str
    wall_time: float
    checksum: str
    cell_convention: str = ""
    extra: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "Manifest":
        if data.get("schema_version") != SCHEMA_VERSION:
            raise ManifestError(f"unrecognised schema version {data.get('schema_version')!r}")
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in data.items() if k in known})


def manifest_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".manifest.json")


def _format_count(c) -> str:
    if isinstance(c, (int, np.integer)):
        return str(int(c))
    return repr(float(c))


def payload(table: CountTable) -> bytes:
    lines = [HEADER]
    cls = table.walk_class.value
    for n, v, h, c in table.cells():
        lines.append(f"{cls},{table.dimension},{n},{v},{h},{_format_count(c)}")
    return ("\n".join(lines) + "\n").encode("ascii")


def checksum(table: CountTable) -> str:
    return hashlib.sha256(payload(table)).hexdigest()


def serialize_table(table: CountTable, destination, *, wall_time: float = 0.0,
                    extra: dict | None = None) -> Manifest:
    dest = Path(destination)
    data = payload(table)
    meta = dict(table.meta)
    man = Manifest(
        schema_version=SCHEMA_VERSION,
        dimension=table.dimension,
        walk_class=table.walk_class.value,
        n_max=table.n_max,
        stochastic=table.stochastic,
        seed=meta.pop("seed", None),
        generator_version=__version__,
        wall_time=float(wall_time),
        checksum=hashlib.sha256(data).hexdigest(),
        cell_convention=CELL_CONVENTION[table.walk_class.value],
        extra={**{k: v for k, v in meta.items() if _jsonable(v)}, **(extra or {})},
    )
    dest.parent.mkdir(parents=True, exist_ok=True)
    dest.write_bytes(data)
    manifest_path(dest).write_text(man.to_json() + "\n")
    return man


def _jsonable(v) -> bool:
    try:
        json.dumps(v)
        return True
    except TypeError:
        return False


def parse_table(text: str, *, stochastic: bool | None = None, dimension=None, walk_class=None,
                n_max=None, meta=None) -> CountTable:
    lines = text.splitlines()
    if not lines or lines[0].strip() != HEADER:
        raise TableFormatError(f"expected header {HEADER!r}")
    rows = []
    for i, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 6:
            raise TableFormatError(f"line {i}: expected 6 fields")
        cls, d, n, v, h, c = parts
        rows.append((cls, int(d), int(n), int(v), int(h), c))
    if not rows:
        raise TableFormatError("table has no rows")
    classes = {r[0] for r in rows}
    dims = {r[1] for r in rows}
    if len(classes) != 1 or len(dims) != 1:
        raise TableFormatError("mixed classes or dimensions in one table")
    cls = walk_class or rows[0][0]
    d = dimension or rows[0][1]
    top = n_max if n_max is not None else max(r[2] for r in rows)
    if stochastic is None:
        stochastic = any(("." in r[5]) or ("e" in r[5].lower()) for r in rows)
    levels = [dict() for _ in range(top + 1)]
    for _, _, n, v, h, c in rows:
        if n > top:
            raise TableFormatError(f"row with n={n} beyond n_max={top}")
        levels[n][(v, h)] = float(c) if stochastic else int(c)
    return CountTable(d, WalkClass(cls), top, tuple(levels), stochastic, dict(meta or {}))


def read_manifest(path) -> Manifest:
    mp = manifest_path(path)
    try:
        return Manifest.from_dict(json.loads(mp.read_text()))
    except FileNotFoundError:
        raise ManifestError(f"missing manifest {mp}") from None


def read_table(path, verify: bool = True) -> CountTable:
    path = Path(path)
    data = path.read_bytes()
    mp = manifest_path(path)
    if not mp.exists():
        return parse_table(data.decode("ascii"))
    man = read_manifest(path)
    if verify and hashlib.sha256(data).hexdigest() != man.checksum:
        raise ManifestError(f"checksum mismatch for {path}")
    meta = dict(man.extra)
    if man.seed is not None:
        meta["seed"] = man.seed
    return parse_table(data.decode("ascii"), stochastic=man.stochastic, dimension=man.dimension,
                       walk_class=man.walk_class, n_max=man.n_max, meta=meta)


def table_filename(table: CountTable) -> str:
    tag = "-mc" if table.stochastic else ""
    return f"{table.walk_class.value}-d{table.dimension}-n{table.n_max}{tag}.csv"


# -- grids --------------------------------------------------------------------

def _fmt(x: float) -> str:
    if float(x).is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(float(x))


_RANGE = re.compile(r"^\s*([^:,]+):([^:,]+):([^:,]+)\s*$")


@dataclass(frozen=True)
class GridSpec:
    """``lo:step:hi`` in log-weight, or a comma list of weights.

    ``str(GridSpec.parse(s)) == s`` for specs written in canonical form
    (integers without a decimal point, other numbers as Python prints them).
    """

    lo: float | None = None
    step: float | None = None
    hi: float | None = None
    items: tuple = ()

    @classmethod
    def parse(cls, text: str) -> "GridSpec":
        m = _RANGE.match(text)
        try:
            if m:
                lo, step, hi = (float(g) for g in m.groups())
                if step <= 0 or hi < lo or not all(map(math.isfinite, (lo, step, hi))):
                    raise ValueError
                return cls(lo, step, hi)
            items = tuple(float(t) for t in text.split(","))
        except ValueError:
            raise ValueError(f"bad grid spec {text!r}") from None
        if not items or any(not (x > 0 and math.isfinite(x)) for x in items):
            raise ValueError(f"grid weights must be positive: {text!r}")
        return cls(items=items)

    def __str__(self):
        if self.items:
            return ",".join(_fmt(x) for x in self.items)
        return f"{_fmt(self.lo)}:{_fmt(self.step)}:{_fmt(self.hi)}"

    @property
    def log_values(self) -> np.ndarray:
        if self.items:
            return np.log(np.array(self.items))
        k = int(math.floor((self.hi - self.lo) / self.step + 1e-9))
        return np.round(self.lo + self.step * np.arange(k + 1), 12)

    @property
    def values(self) -> np.ndarray:
        if self.items:
            return np.array(self.items)
        return np.exp(self.log_values)


# -- cache --------------------------------------------------------------------

class TableCache:
    """Enumerated tables keyed by (dimension, class, n_max, generator version)."""

    def __init__(self, root=None):
        if root is None:
            root = os.environ.get(CACHE_ENV) or Path.home() / ".cache" / "pulledsaw"
        self.root = Path(root)

    def path(self, d: int, walk_class, n_max: int) -> Path:
        return self.root / f"{WalkClass(walk_class).value}-d{d}-n{n_max}-v{__version__}.csv"

    def get(self, d, walk_class, n_max) -> CountTable | None:
        p = self.path(d, walk_class, n_max)
        if not p.exists():
            return None
        try:
            return read_table(p)
        except (ManifestError, TableFormatError):
            return None

    def get_or_build(self, d, walk_class, n_max, build: Callable[[], CountTable]) -> CountTable:
        hit = self.get(d, walk_class, n_max)
        if hit is not None:
            return hit
        t0 = time.perf_counter()
        table = build()
        self.root.mkdir(parents=True, exist_ok=True)
        serialize_table(table, self.path(d, walk_class, n_max), wall_time=time.perf_counter() - t0)
        return table


def write_tsv(path, header, rows) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    lines = ["\t".join(header)]
    for r in rows:
        lines.append("\t".join(_cell(x) for x in r))
    Path(path).write_text("\n".join(lines) + "\n")


def _cell(x) -> str:
    if isinstance(x, bool):
        return str(x).lower()
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, np.integer):
        return str(int(x))
    return str(x)


def write_json(path, obj) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not serialisable: {type(o).__name__}")
