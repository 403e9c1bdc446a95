"""Regions of the covariate space and partitions built from them.

A region is a union of axis-aligned hypercubes over level indices. Merged
regions are kept as plain cube lists; membership is all that matters, so
there is no attempt to simplify adjacent cubes.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .survival import CovariateSchema, Dataset, SurvivalCurve, risk_at, survival_at


class PartitionError(ValueError):
    pass


@dataclass(frozen=True)
class Hypercube:
    """Inclusive level-index ranges, one ``(lo, hi)`` pair per dimension."""

    bounds: tuple[tuple[int, int], ...]

    def __post_init__(self):
        bounds = tuple((int(lo), int(hi)) for lo, hi in self.bounds)
        for lo, hi in bounds:
            if lo > hi or lo < 0:
                raise ValueError(f"invalid range [{lo}, {hi}]")
        object.__setattr__(self, "bounds", bounds)

    @classmethod
    def full(cls, schema: CovariateSchema) -> "Hypercube":
        return cls(tuple((0, k - 1) for k in schema.n_levels))

    @classmethod
    def cell(cls, x: Sequence[int]) -> "Hypercube":
        return cls(tuple((v, v) for v in x))

    def contains(self, x: Sequence[int]) -> bool:
        return all(lo <= v <= hi for (lo, hi), v in zip(self.bounds, x))

    def mask(self, X: np.ndarray) -> np.ndarray:
        lo = np.array([b[0] for b in self.bounds])
        hi = np.array([b[1] for b in self.bounds])
        return np.all((X >= lo) & (X <= hi), axis=1)

    def intersects(self, other: "Hypercube") -> bool:
        return all(a_lo <= b_hi and b_lo <= a_hi for (a_lo, a_hi), (b_lo, b_hi) in zip(self.bounds, other.bounds))

    def split(self, dim: int, threshold: int) -> tuple["Hypercube", "Hypercube"]:
        lo, hi = self.bounds[dim]
        if not lo <= threshold < hi:
            raise ValueError(f"threshold {threshold} outside [{lo}, {hi - 1}]")
        left = list(self.bounds)
        right = list(self.bounds)
        left[dim] = (lo, threshold)
        right[dim] = (threshold + 1, hi)
        return Hypercube(tuple(left)), Hypercube(tuple(right))

    def cells(self):
        return itertools.product(*(range(lo, hi + 1) for lo, hi in self.bounds))

    def n_cells(self) -> int:
        return int(np.prod([hi - lo + 1 for lo, hi in self.bounds], dtype=object))

    def describe(self, schema: CovariateSchema | None = None) -> str:
        parts = []
        for dim, (lo, hi) in enumerate(self.bounds):
            if schema is None:
                parts.append(f"[{lo},{hi}]")
                continue
            name, levels = schema.dimensions[dim]
            if lo == 0 and hi == len(levels) - 1:
                continue
            if lo == hi:
                parts.append(f"{name}={levels[lo]}")
            else:
                parts.append(f"{name} in {{{','.join(levels[lo:hi + 1])}}}")
        return " & ".join(parts) if parts else "*"


@dataclass(frozen=True)
class Region:
    id: int
    cubes: tuple[Hypercube, ...]
    provenance: tuple[int, ...] = ()

    def __post_init__(self):
        cubes = tuple(self.cubes)
        if not cubes:
            raise ValueError("a region needs at least one cube")
        for a, b in itertools.combinations(cubes, 2):
            if a.intersects(b):
                raise ValueError("cubes of a region must be disjoint")
        object.__setattr__(self, "cubes", cubes)
        object.__setattr__(self, "provenance", tuple(sorted(self.provenance)))

    def mask(self, X: np.ndarray) -> np.ndarray:
        out = np.zeros(len(X), bool)
        for cube in self.cubes:
            out |= cube.mask(X)
        return out

    def describe(self, schema: CovariateSchema | None = None) -> str:
        return " | ".join(f"({c.describe(schema)})" for c in self.cubes)


def region_contains(region: Region, x: Sequence[int], schema: CovariateSchema | None = None) -> bool:
    if schema is not None:
        x = schema.check(x)
    elif len(x) != len(region.cubes[0].bounds):
        raise ValueError("covariate vector does not match region dimension")
    return any(cube.contains(x) for cube in region.cubes)


def merge_regions(a: Region, b: Region, id: int | None = None) -> Region:
    for ca in a.cubes:
        for cb in b.cubes:
            if ca.intersects(cb):
                raise PartitionError("cannot merge overlapping regions")
    return Region(
        a.id if id is None else id,
        a.cubes + b.cubes,
        tuple(sorted(set(a.provenance) | set(b.provenance))),
    )


@dataclass(frozen=True, eq=False)
class Partition:
    """Regions covering the covariate space, optionally with fitted curves.

    ``curves[i]`` and ``sizes[i]`` belong to ``regions[i]``; they are None
    for an unfitted partition.
    """

    schema: CovariateSchema
    regions: tuple[Region, ...]
    curves: tuple[SurvivalCurve, ...] | None = None
    sizes: tuple[int, ...] | None = None
    t_star: float | None = None
    _lookup: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "regions", tuple(self.regions))
        if self.curves is not None:
            object.__setattr__(self, "curves", tuple(self.curves))
            if len(self.curves) != len(self.regions):
                raise ValueError("one curve per region required")

    def __len__(self) -> int:
        return len(self.regions)

    @property
    def ids(self) -> list[int]:
        return [r.id for r in self.regions]

    def risks(self, t_star: float | None = None) -> list[float]:
        t = self.t_star if t_star is None else t_star
        if self.curves is None or t is None:
            raise ValueError("partition is not fitted or has no t_star")
        return [risk_at(c, t) for c in self.curves]

    def survivals(self, t_star: float | None = None) -> list[float]:
        t = self.t_star if t_star is None else t_star
        return [survival_at(c, t) for c in self.curves]

    def _cell_table(self) -> np.ndarray | None:
        # dense cell -> region position table, built once for small spaces
        if "table" not in self._lookup:
            table = None
            if self.schema.n_cells <= 1_000_000:
                grid = np.indices(self.schema.n_levels).reshape(self.schema.d, -1).T
                table = np.full(len(grid), -1, dtype=np.int64)
                for pos, region in enumerate(self.regions):
                    m = region.mask(grid)
                    table[m & (table >= 0)] = -2
                    table[m & (table == -1)] = pos
                table = table.reshape(self.schema.n_levels)
            self._lookup["table"] = table
        return self._lookup["table"]

    def positions(self, X: np.ndarray) -> np.ndarray:
        """Region position (index into ``regions``) for each row of ``X``.

        -1 marks rows covered by no region, -2 rows covered by several.
        """
        X = np.asarray(X, dtype=np.int64).reshape(-1, self.schema.d)
        if len(X) and ((X < 0).any() or (X >= np.array(self.schema.n_levels)).any()):
            raise ValueError("covariate level index out of range for schema")
        table = self._cell_table()
        if table is not None:
            return table[tuple(X.T)] if len(X) else np.zeros(0, np.int64)
        out = np.full(len(X), -1, dtype=np.int64)
        for pos, region in enumerate(self.regions):
            m = region.mask(X)
            out[m & (out >= 0)] = -2
            out[m & (out == -1)] = pos
        return out

    def assign(self, x: Sequence[int]) -> int:
        x = self.schema.check(x)
        hits = [r.id for r in self.regions if any(c.contains(x) for c in r.cubes)]
        if len(hits) != 1:
            raise PartitionError(f"{len(hits)} regions contain {x}")
        return hits[0]

    def split_data(self, data: Dataset) -> list[Dataset]:
        pos = self.positions(data.X)
        if (pos < 0).any():
            raise PartitionError("records not assignable to exactly one region")
        return [data.subset(np.flatnonzero(pos == k)) for k in range(len(self.regions))]

    def with_regions(self, regions: Sequence[Region]) -> "Partition":
        return replace(self, regions=tuple(regions), curves=None, sizes=None, _lookup={})


def _fmt_cell(cell) -> str:
    return "(" + ",".join(str(int(v)) for v in cell) + ")"


def validate_partition(partition: Partition, rng=None, samples: int = 1_000_000) -> list[str]:
    """Check disjointness and cover; returns a list of violations (empty if valid).

    Enumerates every cell when there are at most ``samples`` of them,
    otherwise checks ``samples`` random cells.
    """
    schema = partition.schema
    violations = []
    for region in partition.regions:
        for cube in region.cubes:
            if len(cube.bounds) != schema.d:
                violations.append(f"region {region.id}: cube dimension mismatch")
            elif any(hi >= k for (_, hi), k in zip(cube.bounds, schema.n_levels)):
                violations.append(f"region {region.id}: cube exceeds schema levels")
    if violations:
        return violations

    if schema.n_cells <= samples:
        cells = np.indices(schema.n_levels).reshape(schema.d, -1).T
    else:
        from .rng import SplitMix64

        rng = rng or SplitMix64(0)
        cells = np.column_stack([rng.integers(k, samples) for k in schema.n_levels])

    counts = np.zeros(len(cells), dtype=np.int64)
    for region in partition.regions:
        counts += region.mask(cells)
    for cell in cells[counts > 1]:
        violations.append(f"overlap at {_fmt_cell(cell)}")
    for cell in cells[counts == 0]:
        violations.append(f"uncovered {_fmt_cell(cell)}")
    return violations


def fit_partition(
    schema: CovariateSchema,
    groups: Sequence[tuple[Region, Dataset]],
    t_star: float | None = None,
) -> Partition:
    """Attach pooled KM curves to regions, ordering them by ascending risk.

    Region ids are renumbered to their position in that order. Without
    ``t_star`` the input order is kept.
    """
    from .survival import km_estimate

    fitted = [(region, data, km_estimate(data.time, data.event) if len(data) else None) for region, data in groups]
    if t_star is not None:
        fitted.sort(key=lambda item: (risk_at(item[2], t_star) if item[2] else 0.0, min(item[0].provenance, default=0)))
    regions = tuple(Region(i, r.cubes, r.provenance) for i, (r, _, _) in enumerate(fitted))
    return Partition(
        schema,
        regions,
        curves=tuple(c for _, _, c in fitted) if all(c is not None for _, _, c in fitted) else None,
        sizes=tuple(len(d) for _, d, _ in fitted),
        t_star=t_star,
    )
