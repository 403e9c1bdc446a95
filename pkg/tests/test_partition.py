import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from riskstrat.partition import (
    Hypercube,
    Partition,
    PartitionError,
    Region,
    fit_partition,
    merge_regions,
    region_contains,
    validate_partition,
)
from riskstrat.survival import CovariateSchema, Dataset

B2 = CovariateSchema.binary(["x1", "x2"])


def cell_region(i, *cells):
    return Region(i, tuple(Hypercube.cell(c) for c in cells), (i,))


def xor_partition():
    return Partition(B2, (cell_region(0, (0, 1), (1, 0)), cell_region(1, (0, 0), (1, 1))))


def test_hypercube_split_and_cells():
    cube = Hypercube(((0, 2), (0, 1)))
    left, right = cube.split(0, 0)
    assert left.bounds == ((0, 0), (0, 1)) and right.bounds == ((1, 2), (0, 1))
    assert set(left.cells()) | set(right.cells()) == set(cube.cells())
    assert cube.n_cells() == 6
    with pytest.raises(ValueError):
        cube.split(1, 1)
    with pytest.raises(ValueError):
        Hypercube(((2, 1),))


def test_region_contains_examples():
    full = Region(0, (Hypercube.full(B2),))
    assert all(region_contains(full, c) for c in itertools.product((0, 1), repeat=2))
    diag = cell_region(0, (0, 0), (1, 1))
    assert not region_contains(diag, (0, 1))
    assert region_contains(diag, (1, 1))
    with pytest.raises(ValueError):
        region_contains(diag, (0, 1, 0))
    with pytest.raises(ValueError):
        region_contains(diag, (0, 2), B2)


def test_region_rejects_empty_and_overlapping_cubes():
    with pytest.raises(ValueError):
        Region(0, ())
    with pytest.raises(ValueError):
        Region(0, (Hypercube.full(B2), Hypercube.cell((0, 0))))


def test_assign_examples():
    p = xor_partition()
    assert p.assign((0, 0)) == 1
    assert p.assign((1, 0)) == 0
    whole = Partition(B2, (Region(0, (Hypercube.full(B2),)),))
    assert whole.assign((1, 1)) == 0
    with pytest.raises(ValueError):
        p.assign((0, 2))


def test_assign_fails_on_invalid_partition():
    gap = Partition(B2, (cell_region(0, (0, 0)),))
    with pytest.raises(PartitionError):
        gap.assign((1, 1))


def test_validate_examples():
    assert validate_partition(xor_partition()) == []
    overlap = Partition(B2, (Region(0, (Hypercube.full(B2),)), cell_region(1, (0, 0))))
    assert validate_partition(overlap) == ["overlap at (0,0)"]
    missing = Partition(B2, (cell_region(0, (0, 0), (0, 1), (1, 1)),))
    assert validate_partition(missing) == ["uncovered (1,0)"]


def test_validate_sampling_for_large_spaces():
    schema = CovariateSchema.binary([f"x{i}" for i in range(22)])  # 4M cells
    whole = Partition(schema, (Region(0, (Hypercube.full(schema),)),))
    assert validate_partition(whole, samples=10_000) == []
    bounds = [(0, 1)] * 22
    bounds[0] = (0, 0)
    half = Partition(schema, (Region(0, (Hypercube(tuple(bounds)),)),))
    assert any(v.startswith("uncovered") for v in validate_partition(half, samples=10_000))


def test_merge_regions_examples():
    a, b = cell_region(0, (0, 0)), cell_region(1, (1, 1))
    m = merge_regions(a, b)
    assert m.cubes == a.cubes + b.cubes and m.provenance == (0, 1)
    adjacent = merge_regions(cell_region(0, (0, 0)), cell_region(1, (0, 1)))
    assert len(adjacent.cubes) == 2  # no canonicalisation
    with pytest.raises(PartitionError):
        merge_regions(a, cell_region(2, (0, 0)))


def test_positions_and_split_data():
    p = xor_partition()
    X = np.array([[0, 0], [0, 1], [1, 0], [1, 1]])
    np.testing.assert_array_equal(p.positions(X), [1, 0, 0, 1])
    data = Dataset(B2, X, np.arange(1.0, 5.0))
    groups = p.split_data(data)
    assert [len(g) for g in groups] == [2, 2]
    gap = Partition(B2, (cell_region(0, (0, 0)),))
    with pytest.raises(PartitionError):
        gap.split_data(data)


def test_fit_partition_orders_by_risk():
    low = Dataset(B2, np.array([[0, 1]] * 4), np.array([9.0, 9, 9, 1]))
    high = Dataset(B2, np.array([[0, 0]] * 4), np.array([1.0, 1, 9, 1]))
    part = fit_partition(B2, [(cell_region(0, (0, 0)), high), (cell_region(1, (0, 1)), low)], t_star=5)
    assert part.risks() == pytest.approx([0.25, 0.75])
    assert part.ids == [0, 1]
    assert part.regions[0].provenance == (1,)
    assert part.sizes == (4, 4)


# random partitions built by recursive splitting and then merging

schemas = st.lists(st.integers(2, 4), min_size=1, max_size=3).map(
    lambda ks: CovariateSchema(tuple((f"v{i}", tuple(str(j) for j in range(k))) for i, k in enumerate(ks)))
)


def _random_partition(schema, draw):
    cubes = [Hypercube.full(schema)]
    for _ in range(draw(st.integers(0, 6))):
        idx = draw(st.integers(0, len(cubes) - 1))
        cube = cubes[idx]
        dims = [d for d, (lo, hi) in enumerate(cube.bounds) if lo < hi]
        if not dims:
            continue
        dim = draw(st.sampled_from(dims))
        lo, hi = cube.bounds[dim]
        thr = draw(st.integers(lo, hi - 1))
        cubes[idx:idx + 1] = list(cube.split(dim, thr))
    regions = [Region(i, (c,), (i,)) for i, c in enumerate(cubes)]
    while len(regions) > 1 and draw(st.booleans()):
        i, j = draw(st.lists(st.integers(0, len(regions) - 1), min_size=2, max_size=2, unique=True))
        merged = merge_regions(regions[i], regions[j])
        regions = [r for k, r in enumerate(regions) if k not in (i, j)] + [merged]
    return Partition(schema, tuple(regions))


@settings(max_examples=100, deadline=None)
@given(schemas, st.data())
def test_split_and_merge_keep_partitions_valid(schema, data):
    part = _random_partition(schema, data.draw)
    assert validate_partition(part) == []
    cells = list(Hypercube.full(schema).cells())
    pos = part.positions(np.array(cells))
    for cell, k in zip(cells, pos):
        rid = part.assign(cell)
        assert rid == part.regions[k].id
        assert [region_contains(r, cell) for r in part.regions].count(True) == 1
        assert region_contains(part.regions[k], cell)


@settings(max_examples=50, deadline=None)
@given(schemas, st.data())
def test_membership_ignores_cube_order(schema, data):
    part = _random_partition(schema, data.draw)
    for region in part.regions:
        flipped = Region(region.id, tuple(reversed(region.cubes)), region.provenance)
        for cell in Hypercube.full(schema).cells():
            assert region_contains(region, cell) == region_contains(flipped, cell)
