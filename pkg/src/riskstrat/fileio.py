"""CSV datasets, tertile discretisation, model files and tree export.

CSV layout: one column per covariate, then ``time`` (non-negative decimal)
and ``event`` (0 or 1). Column order is free; the header names them.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .partition import Hypercube, Partition, Region
from .pipeline import RiskStratifyModel
from .stats import TestKind, TestMethod
from .survival import CovariateSchema, Dataset, SurvivalCurve
from .tree import TreeNode

TERTILE_LEVELS = ("Low", "Medium", "High")
MODEL_FORMAT = "riskstrat-model"
MODEL_VERSION = 1


class DataError(ValueError):
    """Malformed input data; the CLI maps it to exit code 2."""


def discretize_tertiles(values: Sequence[float]) -> tuple[list[str], tuple[float, float]]:
    """Label values Low/Medium/High at the 33rd and 66th percentiles.

    Percentiles use linear interpolation between order statistics (numpy's
    default). A value equal to a cutpoint goes to the lower band.
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise DataError("cannot tertile an empty column")
    if np.all(values == values[0]):
        raise DataError("cannot tertile a constant column")
    cuts = tuple(float(c) for c in np.percentile(values, [33, 66]))
    return apply_tertiles(values, cuts), cuts


def apply_tertiles(values: Sequence[float], cuts: tuple[float, float]) -> list[str]:
    idx = np.searchsorted(np.asarray(cuts), np.asarray(values, dtype=float), side="left")
    return [TERTILE_LEVELS[i] for i in idx]


def _order_levels(labels) -> tuple[str, ...]:
    labels = set(labels)
    if labels <= set(TERTILE_LEVELS):
        return tuple(l for l in TERTILE_LEVELS if l in labels)
    try:
        return tuple(sorted(labels, key=float))
    except ValueError:
        return tuple(sorted(labels))


def load_schema(path: str | Path) -> CovariateSchema:
    return CovariateSchema.from_dict(json.loads(Path(path).read_text()))


@dataclass
class Table:
    """A CSV read into typed columns, before mapping to a schema."""

    covariates: dict[str, list[str]]
    time: list[float] | None
    event: list[bool] | None
    n_rows: int
    cutpoints: dict[str, tuple[float, float]] = field(default_factory=dict)


def read_table(
    path: str | Path,
    covariate_names: Sequence[str] | None = None,
    continuous: Sequence[str] = (),
    cutpoints: dict[str, tuple[float, float]] | None = None,
    require_outcome: bool = True,
) -> Table:
    """Parse and check a CSV. Row numbers in errors count data rows from 1."""
    path = Path(path)
    text = path.read_text()
    if not text.strip():
        if require_outcome:
            raise DataError(f"{path}: file is empty")
        return Table({n: [] for n in covariate_names or ()}, None, None, 0)
    reader = csv.reader(text.splitlines())
    header = [h.strip() for h in next(reader)]
    if len(set(header)) != len(header):
        raise DataError(f"{path}: duplicate column names")
    has_outcome = "time" in header and "event" in header
    if require_outcome:
        for col in ("time", "event"):
            if col not in header:
                raise DataError(f"missing column {col!r}")
    cov_cols = [h for h in header if h not in ("time", "event")]
    if covariate_names is not None:
        unknown = [c for c in cov_cols if c not in covariate_names]
        if unknown:
            raise DataError(f"unknown column {unknown[0]!r}")
        missing = [c for c in covariate_names if c not in header]
        if missing:
            raise DataError(f"missing column {missing[0]!r}")
        cov_cols = list(covariate_names)
    for name in continuous:
        if name not in cov_cols:
            raise DataError(f"continuous column {name!r} not found")

    pos = {h: i for i, h in enumerate(header)}
    covs = {c: [] for c in cov_cols}
    times, events = [], []
    n_rows = 0
    for row_no, row in enumerate(reader, start=1):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise DataError(f"row {row_no}: expected {len(header)} values, got {len(row)}")
        cells = [c.strip() for c in row]
        for c in cov_cols:
            value = cells[pos[c]]
            if value == "":
                raise DataError(f"row {row_no}: missing value in column {c!r}")
            if c in continuous:
                try:
                    value = float(value)
                except ValueError:
                    raise DataError(f"row {row_no}: column {c!r} is not a number: {value!r}") from None
                if not math.isfinite(value):
                    raise DataError(f"row {row_no}: column {c!r} is not finite")
            covs[c].append(value)
        if has_outcome:
            raw_t, raw_e = cells[pos["time"]], cells[pos["event"]]
            if raw_t == "" or raw_e == "":
                raise DataError(f"row {row_no}: missing value in column {'time' if raw_t == '' else 'event'!r}")
            try:
                t = float(raw_t)
            except ValueError:
                raise DataError(f"row {row_no}: time is not a number: {raw_t!r}") from None
            if not math.isfinite(t) or t < 0:
                raise DataError(f"row {row_no}: time must be finite and non-negative, got {raw_t!r}")
            if raw_e not in ("0", "1"):
                raise DataError(f"row {row_no}: event must be 0 or 1")
            times.append(t)
            events.append(raw_e == "1")
        n_rows += 1

    cuts = dict(cutpoints or {})
    for name in continuous:
        if name in cuts:
            covs[name] = apply_tertiles(covs[name], cuts[name])
        else:
            covs[name], cuts[name] = discretize_tertiles(covs[name])
    return Table(covs, times if has_outcome else None, events if has_outcome else None, n_rows, cuts)


def table_to_dataset(table: Table, schema: CovariateSchema | None = None) -> Dataset:
    if schema is None:
        dims = []
        for name, labels in table.covariates.items():
            levels = _order_levels(labels)
            if len(levels) < 2:
                raise DataError(f"column {name!r} has fewer than 2 distinct levels")
            dims.append((name, levels))
        if not dims:
            raise DataError("no covariate columns")
        schema = CovariateSchema(tuple(dims))
    X = np.zeros((table.n_rows, schema.d), dtype=np.int64)
    for dim, (name, levels) in enumerate(schema.dimensions):
        index = {l: i for i, l in enumerate(levels)}
        for row, label in enumerate(table.covariates[name]):
            if label not in index:
                raise DataError(f"row {row + 1}: level {label!r} of column {name!r} not in schema")
            X[row, dim] = index[label]
    time = table.time if table.time is not None else np.zeros(table.n_rows)
    return Dataset(schema, X, time, table.event)


def ingest_csv(
    path: str | Path,
    schema: CovariateSchema | None = None,
    continuous: Sequence[str] = (),
    cutpoints: dict[str, tuple[float, float]] | None = None,
) -> tuple[Dataset, dict[str, tuple[float, float]]]:
    """Read a survival CSV into a Dataset.

    Without a schema, every column other than time/event is a covariate and
    its levels are the distinct values seen (numeric labels in numeric
    order, Low/Medium/High in that order). Columns named in ``continuous``
    are cut into tertiles; the cutpoints are returned for reuse.
    """
    table = read_table(path, schema.names if schema else None, continuous, cutpoints)
    return table_to_dataset(table, schema), table.cutpoints


def write_csv(data: Dataset, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(data.schema.names + ["time", "event"])
        for x, t, e in zip(data.X, data.time, data.event):
            w.writerow([data.schema.levels(d)[v] for d, v in enumerate(x)] + [repr(float(t)), int(e)])


def _method_dict(method: TestMethod) -> dict:
    return {"kind": method.kind.value, "t_star": method.t_star}


def _node_dict(node: TreeNode) -> dict:
    out = {"id": node.node_id, "cube": [list(b) for b in node.cube.bounds], "n": node.n}
    if node.is_leaf:
        out["leaf_id"] = node.leaf_id
    else:
        out.update(
            split_dim=node.split_dim,
            threshold=node.threshold,
            p_value=node.p_value,
            statistic=node.statistic,
            left=_node_dict(node.left),
            right=_node_dict(node.right),
        )
    return out


@dataclass
class ModelFile:
    """Everything prediction needs, with no reference to the training data."""

    schema: CovariateSchema
    partition: Partition
    tree: dict
    leaf_to_region: dict[int, int]
    config: dict
    cutpoints: dict[str, tuple[float, float]] = field(default_factory=dict)

    @classmethod
    def from_model(cls, model: RiskStratifyModel, cutpoints=None) -> "ModelFile":
        cfg = model.config
        config = {
            "alpha": cfg.alpha,
            "alpha_prime": model.tree.config.alpha_prime,
            "method": _method_dict(cfg.method),
            "n_leaf": cfg.n_leaf,
            "min_node": model.tree.config.min_node,
            "delta": cfg.delta,
            "max_depth": cfg.max_depth,
            "horizon": cfg.horizon,
            "t_star": cfg.report_time,
        }
        return cls(model.partition.schema, model.partition, _node_dict(model.tree.root), model.leaf_to_region(), config, dict(cutpoints or {}))

    @property
    def t_star(self) -> float | None:
        return self.partition.t_star

    def to_dict(self) -> dict:
        p = self.partition
        regions = []
        for k, region in enumerate(p.regions):
            entry = {
                "id": region.id,
                "cubes": [[list(b) for b in c.bounds] for c in region.cubes],
                "leaves": list(region.provenance),
                "n": p.sizes[k] if p.sizes else None,
                "curve": p.curves[k].to_dict(),
            }
            if p.t_star is not None:
                entry["risk"] = p.risks()[k]
                entry["survival"] = p.survivals()[k]
            regions.append(entry)
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "schema": self.schema.to_dict(),
            "cutpoints": {k: list(v) for k, v in self.cutpoints.items()},
            "config": self.config,
            "t_star": p.t_star,
            "tree": self.tree,
            "leaf_to_region": {str(k): v for k, v in sorted(self.leaf_to_region.items())},
            "regions": regions,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "ModelFile":
        if payload.get("format") != MODEL_FORMAT:
            raise DataError("not a riskstrat model file")
        if payload.get("version") != MODEL_VERSION:
            raise DataError(f"unsupported model version {payload.get('version')!r}")
        schema = CovariateSchema.from_dict(payload["schema"])
        regions, curves, sizes = [], [], []
        for entry in payload["regions"]:
            cubes = tuple(Hypercube(tuple(tuple(b) for b in c)) for c in entry["cubes"])
            regions.append(Region(entry["id"], cubes, tuple(entry["leaves"])))
            curves.append(SurvivalCurve.from_dict(entry["curve"]))
            sizes.append(entry["n"])
        partition = Partition(schema, tuple(regions), tuple(curves), tuple(sizes), payload["t_star"])
        return cls(
            schema,
            partition,
            payload["tree"],
            {int(k): v for k, v in payload["leaf_to_region"].items()},
            payload["config"],
            {k: tuple(v) for k, v in payload.get("cutpoints", {}).items()},
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "ModelFile":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def method(self) -> TestMethod:
        m = self.config["method"]
        return TestMethod(TestKind(m["kind"]), m["t_star"])

    def predict(self, X: np.ndarray) -> list[tuple[int, float | None, float | None]]:
        """(region id, risk at t*, survival at t*) per row."""
        pos = self.partition.positions(X)
        risks = self.partition.risks() if self.t_star is not None else None
        surv = self.partition.survivals() if self.t_star is not None else None
        out = []
        for k in pos:
            region = self.partition.regions[k]
            out.append((region.id, risks[k] if risks else None, surv[k] if surv else None))
        return out


# qualitative palette; regions beyond its length cycle
PALETTE = ("#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666", "#a6cee3", "#fb9a99")


def tree_to_dot(model: ModelFile) -> str:
    """Graphviz description of the tree; leaves merged into one region share a colour."""
    schema = model.schema
    lines = ["digraph riskstrat {", '  node [shape=box, fontname="Helvetica"];']
    risks = model.partition.risks() if model.t_star is not None else None

    def visit(node):
        nid = f"n{node['id']}"
        if "leaf_id" in node:
            region = model.leaf_to_region[node["leaf_id"]]
            label = f"leaf {node['leaf_id']}\\nregion {region}\\nn={node['n']}"
            if risks is not None:
                label += f"\\nrisk={risks[region]:.4f}"
            color = PALETTE[region % len(PALETTE)]
            lines.append(f'  {nid} [label="{label}", style=filled, fillcolor="{color}", region={region}];')
            return
        name, levels = schema.dimensions[node["split_dim"]]
        lo = node["cube"][node["split_dim"]][0]
        cond = ",".join(levels[lo:node["threshold"] + 1])
        lines.append(f'  {nid} [label="{name} in {{{cond}}}?\\nn={node["n"]}\\np={node["p_value"]:.3g}"];')
        for child, tag in ((node["left"], "yes"), (node["right"], "no")):
            visit(child)
            lines.append(f'  {nid} -> n{child["id"]} [label="{tag}"];')

    visit(model.tree)
    lines.append("}")
    return "\n".join(lines) + "\n"


def region_table(model: ModelFile) -> str:
    p = model.partition
    rows = [("region", "n", "risk", "survival", "cubes")]
    for k, region in enumerate(p.regions):
        risk = f"{p.risks()[k]:.4f}" if p.t_star is not None else "-"
        surv = f"{p.survivals()[k]:.4f}" if p.t_star is not None else "-"
        rows.append((str(region.id), str(p.sizes[k]), risk, surv, region.describe(p.schema)))
    widths = [max(len(r[i]) for r in rows) for i in range(4)]
    return "\n".join("  ".join(r[i].rjust(widths[i]) for i in range(4)) + "  " + r[4] for r in rows)
