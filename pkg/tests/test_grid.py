import numpy as np
import pytest

from conormal_mhd import Grid, GridSpec, build_grid


def test_build_grid_endpoints() -> None:
    spec = GridSpec(nx=12, ny=20, ymax=5.0, stretch_beta=2.0)
    x, y = build_grid(spec)
    assert x.shape == (12,)
    assert y.shape == (20,)
    assert x[0] == 0.0
    assert x[-1] < spec.length_x
    assert y[0] == 0.0
    assert y[-1] == 5.0
    assert np.all(np.diff(y) > 0)
    # nodes cluster at the wall
    assert np.diff(y)[0] < np.diff(y)[-1]


def test_uniform_grid() -> None:
    _, y = build_grid(GridSpec(nx=4, ny=9, ymax=8.0, stretch_beta=0.0))
    np.testing.assert_allclose(y, np.arange(9.0))


@pytest.mark.parametrize(
    "kwargs, match",
    [
        ({"nx": 0}, "nx must be"),
        ({"ny": 7}, "ny must be"),
        ({"ymax": 0.0}, "ymax must be"),
        ({"length_x": -1.0}, "length_x must be"),
        ({"stretch_beta": -0.5}, "stretch_beta must be"),
    ],
)
def test_invalid_spec(kwargs: dict, match: str) -> None:
    with pytest.raises(ValueError, match=match):
        Grid(GridSpec(**kwargs))


def test_refined() -> None:
    spec = GridSpec(nx=8, ny=17).refined(2)
    assert (spec.nx, spec.ny) == (32, 65)
    # refinement keeps every coarse node
    coarse = Grid(GridSpec(nx=8, ny=17))
    fine = Grid(GridSpec(nx=8, ny=17).refined())
    np.testing.assert_allclose(fine.y[::2], coarse.y, atol=1e-13)


def test_quadrature(small_grid: Grid) -> None:
    spec = small_grid.spec
    assert small_grid.measure == pytest.approx(spec.length_x * spec.ymax, rel=1e-3)
    _, Y = small_grid.mesh()
    exact = spec.length_x * (1 - np.exp(-spec.ymax))
    assert small_grid.integrate(np.exp(-Y)) == pytest.approx(exact, rel=1e-2)


def test_operators_exact_on_low_degree() -> None:
    grid = Grid(GridSpec(nx=8, ny=12, ymax=4.0, stretch_beta=0.0))
    _, Y = grid.mesh()
    f = 3.0 + 2.0 * Y
    np.testing.assert_allclose(grid.ddy(f), 2.0, atol=1e-12)
    np.testing.assert_allclose(grid.ddx(f), 0.0, atol=1e-12)
    np.testing.assert_allclose(grid.ddy2(f), 0.0, atol=1e-10)


def test_operators_do_not_mutate(small_grid: Grid) -> None:
    X, Y = small_grid.mesh()
    f = np.sin(X) * np.exp(-Y)
    before = f.copy()
    for op in (small_grid.ddx, small_grid.ddx2, small_grid.ddy, small_grid.ddy2):
        op(f)
    np.testing.assert_array_equal(f, before)


def _errors(grid: Grid) -> tuple[float, float]:
    X, Y = grid.mesh()
    f = np.sin(X) * np.exp(-Y / 2)
    e1 = np.max(np.abs(grid.ddy(f) + f / 2))
    e2 = np.max(np.abs(grid.ddx(f) - np.cos(X) * np.exp(-Y / 2)))
    return e1, e2


def test_second_order_convergence() -> None:
    base = GridSpec(nx=16, ny=33, ymax=6.0, stretch_beta=1.0)
    coarse = _errors(Grid(base))
    fine = _errors(Grid(base.refined()))
    for ec, ef in zip(coarse, fine):
        assert np.log2(ec / ef) > 1.8


def _smooth_pair(grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    X, Y = grid.mesh()
    return np.sin(X) * np.exp(-Y / 2), np.cos(2 * X) / (1 + Y**2)


def test_operators_are_linear(small_grid: Grid) -> None:
    f, g = _smooth_pair(small_grid)
    a, b = 2.5, -0.75
    for op in (
        small_grid.ddx,
        small_grid.ddx2,
        small_grid.ddy,
        small_grid.ddy2,
    ):
        np.testing.assert_allclose(
            op(a * f + b * g), a * op(f) + b * op(g), rtol=1e-12, atol=1e-10
        )


def test_ddx_has_zero_mean(small_grid: Grid) -> None:
    f, g = _smooth_pair(small_grid)
    rng = np.random.default_rng(0)
    for field in (f, g, rng.standard_normal(small_grid.shape)):
        # periodic differences telescope along x
        np.testing.assert_allclose(
            np.sum(small_grid.ddx(field), axis=0), 0.0, atol=1e-10
        )


def test_mixed_derivatives_commute(small_grid: Grid) -> None:
    f, _ = _smooth_pair(small_grid)
    rng = np.random.default_rng(1)
    for field in (f, rng.standard_normal(small_grid.shape)):
        np.testing.assert_allclose(
            small_grid.ddx(small_grid.ddy(field)),
            small_grid.ddy(small_grid.ddx(field)),
            atol=1e-9,
        )


def test_ddy2_second_order() -> None:
    base = GridSpec(nx=16, ny=33, ymax=6.0, stretch_beta=1.0)
    errors = []
    for spec in (base, base.refined()):
        grid = Grid(spec)
        X, Y = grid.mesh()
        f = np.sin(X) * np.exp(-Y / 2)
        errors.append(np.max(np.abs(grid.ddy2(f) - f / 4)))
    assert np.log2(errors[0] / errors[1]) > 1.8
