import numpy as np
import pytest

from conormal_mhd import (
    Grid,
    GridSpec,
    InitialDataSpec,
    PhysicalParams,
    make_initial,
    probe_embedding,
    probe_product_inequality,
    probe_suite,
)
from conormal_mhd._probes import synthetic_suite


@pytest.fixture
def probe_grid() -> Grid:
    return Grid(GridSpec(nx=8, ny=17, ymax=6.0, stretch_beta=1.0))


def test_suite_is_deterministic(probe_grid: Grid) -> None:
    a = synthetic_suite(probe_grid, n_samples=2)
    b = synthetic_suite(probe_grid, n_samples=2)
    for sa, sb in zip(a, b):
        for fa, fb in zip(sa.f, sb.f):
            np.testing.assert_array_equal(fa, fb)
    assert len(a[0].f) == 7


def test_product_probe_is_bounded(probe_grid: Grid) -> None:
    sample = synthetic_suite(probe_grid, n_samples=1)[0]
    ratio = probe_product_inequality(probe_grid, sample.f, sample.g, 2, sample.dt)
    assert 0 < ratio < np.inf


def test_product_probe_scale_invariant(probe_grid: Grid) -> None:
    sample = synthetic_suite(probe_grid, n_samples=1)[0]
    r1 = probe_product_inequality(probe_grid, sample.f, sample.g, 1, sample.dt)
    r2 = probe_product_inequality(
        probe_grid, [3 * a for a in sample.f], [0.5 * a for a in sample.g], 1, sample.dt
    )
    assert r2 == pytest.approx(r1, rel=1e-10)


def test_product_probe_errors(probe_grid: Grid) -> None:
    sample = synthetic_suite(probe_grid, n_samples=1)[0]
    with pytest.raises(ValueError, match="time levels"):
        probe_product_inequality(probe_grid, sample.f, sample.g[:3], 1, sample.dt)
    with pytest.raises(ValueError, match="needs 5 levels"):
        probe_product_inequality(probe_grid, sample.f[:3], sample.g[:3], 2, 0.05, 2)


def test_zero_fields_give_zero(probe_grid: Grid) -> None:
    zeros = [probe_grid.zeros() for _ in range(3)]
    assert probe_product_inequality(probe_grid, zeros, zeros, 1, 0.1) == 0.0
    assert probe_embedding(probe_grid, zeros, 0.1) == 0.0


def test_embedding_accepts_states(probe_grid: Grid) -> None:
    params = PhysicalParams()
    s = make_initial(probe_grid, params, InitialDataSpec(amplitude=0.01))
    levels = [s.replace(time=t) for t in (0.0, 0.1, 0.2)]
    from_states = probe_embedding(probe_grid, levels, 0.1, selector="v1")
    from_arrays = probe_embedding(probe_grid, [x.v1 for x in levels], 0.1)
    assert from_states == from_arrays
    assert from_states > 0


def test_probe_suite(probe_grid: Grid) -> None:
    out = probe_suite(probe_grid, m=1, n_samples=3)
    assert set(out) == {"product", "embedding"}
    assert all(0 < v < np.inf for v in out.values())
