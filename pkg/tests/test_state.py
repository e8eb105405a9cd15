import numpy as np
import pytest

from conormal_mhd import (
    Grid,
    InitialDataSpec,
    InitialMode,
    PhysicalParams,
    State,
    div_b_max,
    equilibrium,
    make_initial,
    pressure,
    read_field_dump,
    write_field_dump,
)


@pytest.mark.parametrize(
    "kwargs, match",
    [
        ({"epsilon": 1.5}, "epsilon must lie"),
        ({"epsilon": -0.1}, "epsilon must lie"),
        ({"mu": 0.0}, "mu must be > 0"),
        ({"mu": 1.0, "lambda_": -1.0}, "mu \\+ lambda must be > 0"),
        ({"gamma": 0.5}, "gamma must be >= 1"),
    ],
)
def test_invalid_params(kwargs: dict, match: str) -> None:
    with pytest.raises(ValueError, match=match):
        PhysicalParams(**kwargs)


def test_params_helpers() -> None:
    prm = PhysicalParams(epsilon=0.1, mu=2.0, lambda_=-1.0)
    assert prm.longitudinal == 3.0
    assert not prm.is_ideal
    assert prm.with_epsilon(0.0).is_ideal
    assert prm.with_epsilon(0.0).mu == 2.0


def test_pressure() -> None:
    rho = np.array([[1.0, 2.0]])
    np.testing.assert_allclose(pressure(rho, 1.4), [[1.0, 2.0**1.4]])
    np.testing.assert_array_equal(pressure(rho, 1.0), rho)
    with pytest.raises(ValueError, match="positive density"):
        pressure(np.array([[1.0, 0.0]]), 1.4)


def test_equilibrium(small_grid: Grid, params: PhysicalParams) -> None:
    s = equilibrium(small_grid, params)
    assert s.time == 0.0
    np.testing.assert_array_equal(s.rho, 1.0)
    np.testing.assert_array_equal(s.b2, 1.0)
    for arr in (s.v1, s.v2, s.b1, s.b2_tilde):
        np.testing.assert_array_equal(arr, 0.0)
    np.testing.assert_array_equal(s.p, 1.0)


def test_state_is_read_only(small_grid: Grid, params: PhysicalParams) -> None:
    s = equilibrium(small_grid, params)
    with pytest.raises(ValueError):
        s.rho[0, 0] = 2.0
    t = s.replace(time=1.0)
    assert t.time == 1.0
    assert s.time == 0.0


def test_state_shape_check(small_grid: Grid, params: PhysicalParams) -> None:
    z = small_grid.zeros()
    with pytest.raises(ValueError, match="field 'v2' has shape"):
        State(small_grid, params, z + 1, z, np.zeros((2, 2)), z, z + 1)


def test_zero_amplitude_is_equilibrium(
    small_grid: Grid, params: PhysicalParams
) -> None:
    s = make_initial(small_grid, params, InitialDataSpec(amplitude=0.0))
    eq = equilibrium(small_grid, params)
    for (_, a), (_, b) in zip(s.fields(), eq.fields()):
        np.testing.assert_array_equal(a, b)


def test_make_initial(small_grid: Grid, params: PhysicalParams) -> None:
    spec = InitialDataSpec(
        amplitude=0.05,
        modes=(InitialMode(kx=1), InitialMode(kx=2, profile="wall")),
    )
    s = make_initial(small_grid, params, spec)
    assert np.min(s.rho) > 0
    np.testing.assert_array_equal(s.v1[:, 0], 0.0)
    np.testing.assert_array_equal(s.v2[:, 0], 0.0)
    np.testing.assert_array_equal(s.b2[:, 0], 1.0)
    assert np.max(np.abs(s.rho - 1)) > 0
    # the magnetic perturbation comes from a potential
    assert div_b_max(s) < 1e-2 * np.max(np.abs(s.b1))


def test_missing_coefficients_are_zero(
    small_grid: Grid, params: PhysicalParams
) -> None:
    spec = InitialDataSpec(amplitude=0.1, modes=(InitialMode(coeffs={"v1": 1.0}),))
    s = make_initial(small_grid, params, spec)
    np.testing.assert_array_equal(s.rho, 1.0)
    np.testing.assert_array_equal(s.v2, 0.0)
    np.testing.assert_array_equal(s.b1, 0.0)
    assert np.max(np.abs(s.v1)) > 0


def test_invalid_initial_data() -> None:
    with pytest.raises(ValueError, match="profile must be one of"):
        InitialMode(profile="tophat")
    with pytest.raises(ValueError, match="unknown coefficient"):
        InitialMode(coeffs={"p": 1.0})
    with pytest.raises(ValueError, match="amplitude must be >= 0"):
        InitialDataSpec(amplitude=-1.0)


def test_negative_density_rejected(small_grid: Grid, params: PhysicalParams) -> None:
    spec = InitialDataSpec(amplitude=2.0, modes=(InitialMode(coeffs={"rho": 1.0}),))
    with pytest.raises(ValueError, match="non-positive density"):
        make_initial(small_grid, params, spec)


def test_field_dump(tmp_path, small_grid: Grid, params: PhysicalParams) -> None:
    s = make_initial(small_grid, params, InitialDataSpec(amplitude=0.02)).replace(
        time=0.25
    )
    path = write_field_dump(s, tmp_path / "fields" / "t.bin")
    raw = path.read_bytes()
    assert raw.startswith(b"MHDC1 16 33 0.25\n")
    assert len(raw) == raw.index(b"\n") + 1 + 5 * 16 * 33 * 8
    time, fields = read_field_dump(path)
    assert time == 0.25
    for name, arr in s.fields():
        np.testing.assert_array_equal(fields[name], arr)


def test_field_dump_bad_magic(tmp_path) -> None:
    path = tmp_path / "bad.bin"
    path.write_bytes(b"NOPE 1 1 0\n")
    with pytest.raises(ValueError, match="bad magic"):
        read_field_dump(path)


def test_perturbation_scales_with_amplitude(
    small_grid: Grid, params: PhysicalParams
) -> None:
    modes = (InitialMode(kx=1), InitialMode(kx=3, profile="wall"))
    one = make_initial(small_grid, params, InitialDataSpec(0.02, modes))
    two = make_initial(small_grid, params, InitialDataSpec(0.04, modes))
    # scaling by two is exact in floating point
    for name in ("v1", "v2", "b1"):
        np.testing.assert_array_equal(getattr(two, name), 2 * getattr(one, name))
    np.testing.assert_allclose(two.rho - 1, 2 * (one.rho - 1), rtol=0, atol=1e-15)
    np.testing.assert_allclose(two.b2_tilde, 2 * one.b2_tilde, rtol=0, atol=1e-15)
