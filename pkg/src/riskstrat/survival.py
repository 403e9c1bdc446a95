"""Censored survival data and the Kaplan-Meier estimator.

Datasets are stored column-wise (an integer covariate matrix plus time and
event vectors) so that subsetting a node of a tree is a single fancy-index.
A record-level view is available through :class:`SurvivalRecord` for code
that prefers to think one subject at a time.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np


@dataclass(frozen=True)
class CovariateSchema:
    """Ordered categorical axes of the covariate space.

    ``dimensions`` is a sequence of ``(name, levels)`` pairs. Level order
    matters: tree splits are thresholds on the level index.
    """

    dimensions: tuple[tuple[str, tuple[str, ...]], ...]

    def __post_init__(self):
        dims = tuple((str(name), tuple(str(l) for l in levels)) for name, levels in self.dimensions)
        object.__setattr__(self, "dimensions", dims)
        if not dims:
            raise ValueError("schema needs at least one dimension")
        names = [name for name, _ in dims]
        if len(set(names)) != len(names):
            raise ValueError("dimension names must be unique")
        for name, levels in dims:
            if len(levels) < 2:
                raise ValueError(f"dimension {name!r} needs at least 2 levels")
            if len(set(levels)) != len(levels):
                raise ValueError(f"dimension {name!r} has duplicate level labels")

    @classmethod
    def binary(cls, names: Sequence[str]) -> "CovariateSchema":
        return cls(tuple((name, ("0", "1")) for name in names))

    @property
    def d(self) -> int:
        return len(self.dimensions)

    @property
    def names(self) -> list[str]:
        return [name for name, _ in self.dimensions]

    @property
    def n_levels(self) -> tuple[int, ...]:
        return tuple(len(levels) for _, levels in self.dimensions)

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.n_levels, dtype=object))

    def levels(self, dim: int) -> tuple[str, ...]:
        return self.dimensions[dim][1]

    def check(self, x: Sequence[int]) -> tuple[int, ...]:
        """Validate a covariate vector of level indices, returning it as a tuple."""
        x = tuple(int(v) for v in x)
        if len(x) != self.d:
            raise ValueError(f"covariate vector has length {len(x)}, schema has {self.d} dimensions")
        for (name, levels), v in zip(self.dimensions, x):
            if not 0 <= v < len(levels):
                raise ValueError(f"level index {v} out of range for dimension {name!r}")
        return x

    def to_dict(self) -> dict:
        return {"dimensions": [{"name": n, "levels": list(l)} for n, l in self.dimensions]}

    @classmethod
    def from_dict(cls, payload: dict) -> "CovariateSchema":
        return cls(tuple((d["name"], tuple(d["levels"])) for d in payload["dimensions"]))


@dataclass(frozen=True)
class SurvivalRecord:
    covariates: tuple[int, ...]
    time: float
    event: bool = True

    def __post_init__(self):
        if not np.isfinite(self.time) or self.time < 0:
            raise ValueError(f"time must be finite and non-negative, got {self.time!r}")


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Survival records conforming to a schema.

    Attributes
    ----------
    schema : CovariateSchema
    X : (n, d) int array of level indices
    time : (n,) float array of observed times ``min(T*, C)``
    event : (n,) bool array, True where the failure was observed
    """

    schema: CovariateSchema
    X: np.ndarray
    time: np.ndarray
    event: np.ndarray = field(default=None)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.int64)
        if X.ndim == 1 and X.size == 0:
            X = X.reshape(0, self.schema.d)
        time = np.asarray(self.time, dtype=float).reshape(-1)
        event = np.ones(len(time), bool) if self.event is None else np.asarray(self.event, dtype=bool).reshape(-1)
        if X.ndim != 2 or X.shape[1] != self.schema.d:
            raise ValueError(f"X must have shape (n, {self.schema.d})")
        if not (len(X) == len(time) == len(event)):
            raise ValueError("X, time and event lengths differ")
        if len(time) and (not np.all(np.isfinite(time)) or time.min() < 0):
            raise ValueError("times must be finite and non-negative")
        if len(X) and ((X < 0).any() or (X >= np.array(self.schema.n_levels)).any()):
            raise ValueError("covariate level index out of range for schema")
        object.__setattr__(self, "X", _frozen(X))
        object.__setattr__(self, "time", _frozen(time))
        object.__setattr__(self, "event", _frozen(event))

    @classmethod
    def from_records(cls, schema: CovariateSchema, records: Iterable[SurvivalRecord]) -> "Dataset":
        records = list(records)
        X = np.array([schema.check(r.covariates) for r in records], dtype=np.int64).reshape(len(records), schema.d)
        return cls(schema, X, [r.time for r in records], [r.event for r in records])

    def __len__(self) -> int:
        return len(self.time)

    def __iter__(self) -> Iterator[SurvivalRecord]:
        return iter(self.records)

    @property
    def records(self) -> list[SurvivalRecord]:
        return [
            SurvivalRecord(tuple(int(v) for v in x), float(t), bool(e))
            for x, t, e in zip(self.X, self.time, self.event)
        ]

    def subset(self, idx) -> "Dataset":
        return Dataset(self.schema, self.X[idx], self.time[idx], self.event[idx])

    @classmethod
    def concat(cls, parts: Sequence["Dataset"]) -> "Dataset":
        if not parts:
            raise ValueError("nothing to concatenate")
        schema = parts[0].schema
        return cls(
            schema,
            np.concatenate([p.X for p in parts]),
            np.concatenate([p.time for p in parts]),
            np.concatenate([p.event for p in parts]),
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.schema == other.schema
            and np.array_equal(self.X, other.X)
            and np.array_equal(self.time, other.time)
            and np.array_equal(self.event, other.event)
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class SurvivalCurve:
    """Right-continuous product-limit step function.

    ``times[i]`` are the distinct event times; ``survival[i]`` is the value
    on ``[times[i], times[i+1])``. ``max_time`` is the last observed time
    (event or censoring) and bounds where the curve is supported by data.
    """

    times: np.ndarray
    survival: np.ndarray
    at_risk: np.ndarray
    events: np.ndarray
    n_total: int
    max_time: float

    def __post_init__(self):
        for name in ("times", "survival", "at_risk", "events"):
            object.__setattr__(self, name, _frozen(np.asarray(getattr(self, name))))

    def __len__(self) -> int:
        return len(self.times)

    def __call__(self, t):
        """Vectorised step lookup."""
        t = np.asarray(t, dtype=float)
        pos = np.searchsorted(self.times, t, side="right")
        values = np.concatenate([[1.0], self.survival])
        return values[pos]

    def to_dict(self) -> dict:
        return {
            "n_total": int(self.n_total),
            "max_time": float(self.max_time),
            "steps": [
                [float(t), float(s), int(n), int(d)]
                for t, s, n, d in zip(self.times, self.survival, self.at_risk, self.events)
            ],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "SurvivalCurve":
        steps = np.array(payload["steps"], dtype=float).reshape(-1, 4)
        return cls(
            steps[:, 0],
            steps[:, 1],
            steps[:, 2].astype(np.int64),
            steps[:, 3].astype(np.int64),
            int(payload["n_total"]),
            float(payload["max_time"]),
        )


def km_estimate(time, event=None) -> SurvivalCurve:
    """Kaplan-Meier estimate of S(t).

    At a time shared by events and censorings the censored subjects are
    still counted at risk for those events.
    """
    time = np.asarray(time, dtype=float).reshape(-1)
    if time.size == 0:
        raise ValueError("empty group")
    event = np.ones(time.size, bool) if event is None else np.asarray(event, dtype=bool).reshape(-1)
    if event.size != time.size:
        raise ValueError("time and event lengths differ")

    event_times, deaths = np.unique(time[event], return_counts=True)
    sorted_time = np.sort(time)
    at_risk = time.size - np.searchsorted(sorted_time, event_times, side="left")
    survival = np.cumprod(1.0 - deaths / at_risk)
    return SurvivalCurve(event_times, survival, at_risk, deaths, int(time.size), float(sorted_time[-1]))


def survival_at(curve: SurvivalCurve, t: float) -> float:
    """Value of the step function at ``t`` (1 before the first event).

    Beyond ``curve.max_time`` the last value is carried forward; use
    :func:`extrapolated` to detect that case.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    pos = int(np.searchsorted(curve.times, t, side="right"))
    return 1.0 if pos == 0 else float(curve.survival[pos - 1])


def extrapolated(curve: SurvivalCurve, t: float) -> bool:
    return t > curve.max_time


def risk_at(curve: SurvivalCurve, t_star: float) -> float:
    return 1.0 - survival_at(curve, t_star)


def distance_at_time(a: SurvivalCurve, b: SurvivalCurve, t_star: float) -> float:
    return abs(survival_at(a, t_star) - survival_at(b, t_star))


def distance_integrated(a: SurvivalCurve, b: SurvivalCurve, horizon: float | None = None) -> float:
    """Area between two survival curves on ``[0, horizon]``.

    Both curves are step functions, so the integral is an exact sum over
    the merged grid of step times. ``horizon`` defaults to the larger of
    the two curves' last observed times.
    """
    if horizon is None:
        horizon = max(a.max_time, b.max_time)
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    grid = np.union1d(a.times, b.times)
    grid = np.concatenate([[0.0], grid[(grid > 0) & (grid < horizon)], [horizon]])
    widths = np.diff(grid)
    gaps = np.abs(a(grid[:-1]) - b(grid[:-1]))
    return float(np.sum(gaps * widths))
