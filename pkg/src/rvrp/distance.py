"""Travel distances (meters) and times (seconds) between locations."""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import Sequence

from .model import Location


class MatrixError(ValueError):
    """Base class for matrix construction/loading problems."""


class MatrixParseError(MatrixError):
    pass


class MatrixShapeError(MatrixError):
    pass


class MatrixDomainError(MatrixError):
    pass


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class TravelMatrix:
    ids: tuple[str, ...]
    dist: tuple[tuple[int, ...], ...]
    time: tuple[tuple[int, ...], ...]
    index: dict = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "index", {loc: i for i, loc in enumerate(self.ids)})
        _check(self.ids, self.dist, self.time)

    def __len__(self) -> int:
        return len(self.ids)

    def d(self, a: str, b: str) -> int:
        return self.dist[self.index[a]][self.index[b]]

    def t(self, a: str, b: str) -> int:
        return self.time[self.index[a]][self.index[b]]

    def scaled(self, k: float) -> "TravelMatrix":
        """Copy with distances multiplied by ``k`` (times unchanged)."""
        dist = tuple(tuple(round_half_up(x * k) for x in row) for row in self.dist)
        return TravelMatrix(self.ids, dist, self.time)

    def to_dict(self) -> dict:
        return {"ids": list(self.ids), "dist": [list(r) for r in self.dist],
                "time": [list(r) for r in self.time]}


def _check(ids, dist, time):
    n = len(ids)
    if len(set(ids)) != n:
        raise MatrixShapeError("duplicate location ids")
    for name, m in (("dist", dist), ("time", time)):
        if len(m) != n or any(len(row) != n for row in m):
            raise MatrixShapeError(f"{name} must be {n}x{n}")
    for name, m in (("dist", dist), ("time", time)):
        for i, row in enumerate(m):
            if row[i] != 0:
                raise MatrixDomainError(f"{name}[{i}][{i}] must be 0, got {row[i]}")
            for x in row:
                if x < 0:
                    raise MatrixDomainError(f"negative entry {x} in {name}")


def build_euclidean(locations: Sequence[Location], speed: float) -> TravelMatrix:
    """Planar distances rounded to the meter; times ``dist/speed`` rounded to the second."""
    if not speed > 0:
        raise MatrixDomainError("speed must be positive")
    for loc in locations:
        if not (math.isfinite(loc.x) and math.isfinite(loc.y)):
            raise MatrixDomainError(f"non-finite coordinate at location {loc.id}")
    dist = []
    for a in locations:
        dist.append(tuple(round_half_up(math.hypot(a.x - b.x, a.y - b.y)) for b in locations))
    time = tuple(tuple(round_half_up(d / speed) for d in row) for row in dist)
    return TravelMatrix(tuple(loc.id for loc in locations), tuple(dist), time)


def load_matrix(path) -> TravelMatrix:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise MatrixParseError(f"{path}: {exc}") from exc
    if not isinstance(data, dict) or "dist" not in data or "time" not in data:
        raise MatrixParseError(f"{path}: expected an object with 'dist' and 'time'")
    try:
        dist = tuple(tuple(int(x) for x in row) for row in data["dist"])
        time = tuple(tuple(int(x) for x in row) for row in data["time"])
    except (TypeError, ValueError) as exc:
        raise MatrixParseError(f"{path}: non-numeric entry") from exc
    ids = data.get("ids")
    if ids is None:
        ids = [str(i) for i in range(len(dist))]
    return TravelMatrix(tuple(str(i) for i in ids), dist, time)


def matrix_for(inst, base_dir=None) -> TravelMatrix:
    """Resolve an instance's ``distance`` descriptor to a matrix."""
    src = inst.distance_source or {}
    kind = src.get("kind", "euclidean")
    if kind == "euclidean":
        return build_euclidean(inst.locations, float(src.get("speed_mps", 13.89)))
    if kind == "matrix":
        path = src["path"]
        if base_dir is not None and not os.path.isabs(path):
            path = os.path.join(base_dir, path)
        return load_matrix(path)
    raise MatrixParseError(f"unknown distance kind {kind!r}")
