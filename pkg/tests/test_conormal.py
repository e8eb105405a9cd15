import math

import numpy as np
import pytest

from conormal_mhd import (
    ConormalImages,
    EnergyAccumulator,
    Grid,
    InitialDataSpec,
    MultiIndex,
    PhysicalParams,
    State,
    TimeRing,
    apply_multi,
    apply_zy,
    conormal_l2,
    conormal_sup,
    energy_Nm,
    equilibrium,
    initial_norm,
    make_initial,
    multi_indices,
    phi_prime,
    phi_weight,
)
from conormal_mhd._conormal import NORM_COLUMNS, time_difference


def test_phi() -> None:
    assert phi_weight(0.0) == 0.0
    assert phi_weight(1.0) == 0.5
    assert phi_prime(0.0) == 1.0
    assert phi_prime(1.0) == 0.25
    y = np.linspace(0, 10, 11)
    assert np.all(np.diff(phi_weight(y)) > 0)
    assert np.all(phi_weight(y) < 1)
    with pytest.raises(ValueError, match="y >= 0"):
        phi_weight(-1.0)


def test_multi_indices() -> None:
    assert multi_indices(0) == (MultiIndex(0, 0, 0),)
    assert len(multi_indices(1)) == 4
    assert len(multi_indices(2)) == 10
    assert len(multi_indices(2, alpha0_max=0)) == 6
    assert all(a.a0 <= 1 for a in multi_indices(3, 1))
    orders = [a.order for a in multi_indices(2)]
    assert orders == sorted(orders)
    assert multi_indices(-1) == ()
    assert str(MultiIndex(1, 0, 2)) == "(1,0,2)"
    with pytest.raises(ValueError, match="must be >= 0"):
        MultiIndex(-1, 0, 0)


def _series(grid: Grid, params: PhysicalParams, times, fn) -> list[State]:
    X, Y = grid.mesh()
    z = grid.zeros()
    return [
        State(grid, params, 1.0 + fn(t, X, Y), z.copy(), z.copy(), z.copy(), z + 1, t)
        for t in times
    ]


def test_time_ring(small_grid: Grid, params: PhysicalParams) -> None:
    ring = TimeRing(3)
    with pytest.raises(ValueError, match="empty TimeRing"):
        ring.center  # noqa: B018
    states = _series(small_grid, params, [0.0, 0.1, 0.2, 0.3], lambda t, X, Y: 0 * X)
    for s in states:
        ring.push(s)
    assert ring.is_full
    assert ring.times == (0.1, 0.2, 0.3)
    assert ring.center_time == 0.2
    assert ring.dt == pytest.approx(0.1)
    with pytest.raises(ValueError, match="must increase"):
        ring.push(states[0])
    with pytest.raises(ValueError, match="non-uniform"):
        ring.push(states[0].replace(time=0.55))
    with pytest.raises(ValueError, match="odd"):
        TimeRing(4)


def test_apply_zy_vanishes_on_wall(small_grid: Grid) -> None:
    X, Y = small_grid.mesh()
    out = apply_zy(small_grid, np.sin(X) * (1 + Y))
    np.testing.assert_array_equal(out[:, 0], 0.0)
    np.testing.assert_allclose(out[:, 1:], (np.sin(X) * Y / (1 + Y))[:, 1:], atol=5e-3)


def test_time_difference() -> None:
    levels = [np.full((2, 2), t**2) for t in (0.0, 0.5, 1.0, 1.5, 2.0)]
    np.testing.assert_allclose(time_difference(levels[1:4], 1, 0.5), 2.0)
    # twice the centred difference of t**2 is 2, exactly
    np.testing.assert_allclose(time_difference(levels, 2, 0.5), 2.0)
    with pytest.raises(ValueError, match="need 3 levels"):
        time_difference(levels, 1, 0.5)


def test_apply_multi(small_grid: Grid, params: PhysicalParams) -> None:
    k = 2 * np.pi / small_grid.spec.length_x
    times = [0.0, 0.01, 0.02]
    ring = TimeRing.from_states(
        _series(small_grid, params, times, lambda t, X, Y: 0.1 * t * np.cos(k * X))
    )
    X, _ = small_grid.mesh()
    np.testing.assert_allclose(
        apply_multi(ring, "rho", MultiIndex(1, 0, 0)), 0.1 * np.cos(k * X), atol=1e-12
    )
    dx_rho = apply_multi(ring, "rho", MultiIndex(0, 1, 0))
    np.testing.assert_allclose(dx_rho, -0.1 * 0.01 * k * np.sin(k * X), atol=1e-4)
    with pytest.raises(ValueError, match="needs 5 levels"):
        apply_multi(ring, "rho", MultiIndex(2, 0, 0))
    with pytest.raises(KeyError, match="unknown field selector"):
        apply_multi(ring, "pressure", MultiIndex())


def test_images_accept_arrays(small_grid: Grid) -> None:
    X, Y = small_grid.mesh()
    f = np.cos(X) * np.exp(-Y)
    images = ConormalImages([f], small_grid)
    np.testing.assert_array_equal(images.apply(lambda a: a, MultiIndex()), f)
    np.testing.assert_allclose(
        images.apply(lambda a: a, MultiIndex(0, 1, 0)), small_grid.ddx(f)
    )


def test_conormal_norms(small_grid: Grid, params: PhysicalParams) -> None:
    ring = TimeRing.from_states(
        _series(small_grid, params, [0.0, 0.1, 0.2], lambda t, X, Y: 0 * X + 0.5)
    )
    rep = conormal_l2(ring, "rho_pert", 2)
    # constant fields only have a zeroth-order image
    assert rep.per_index[MultiIndex()] == pytest.approx(0.25 * small_grid.measure)
    higher = [v for a, v in rep.per_index.items() if a.order]
    assert all(v == pytest.approx(0, abs=1e-20) for v in higher)
    assert rep.sup == pytest.approx(0.5)
    assert conormal_sup(ring, "rho_pert", 2) == pytest.approx(0.5)
    assert rep.time == 0.1


def test_energy_vanishes_at_equilibrium(
    small_grid: Grid, params: PhysicalParams
) -> None:
    eq = equilibrium(small_grid, params)
    ring = TimeRing.from_states([eq.replace(time=t) for t in (0.0, 0.1, 0.2)])
    rep = energy_Nm(ring, 2)
    assert rep.total == 0.0
    assert all(v == 0.0 for v in rep.blocks().values())
    assert initial_norm(eq, 2) == 0.0


def test_energy_blocks(small_grid: Grid, params: PhysicalParams) -> None:
    s0 = make_initial(small_grid, params, InitialDataSpec(amplitude=0.01))
    ring = TimeRing.from_states([s0.replace(time=t) for t in (0.0, 0.1, 0.2)])
    rep = energy_Nm(ring, 2, alpha0_max=1)
    blocks = rep.blocks()
    for name in ("kinetic", "magnetic", "acoustic", "normal_1", "normal_2", "eps_grad"):
        assert blocks[name] > 0
    # a steady ring has no time derivatives
    kin = rep.terms["kinetic"]
    assert kin[MultiIndex(1, 0, 0)] == 0.0
    assert rep.block("normal_2", k=1) == 0.0
    assert rep.block("kinetic", k=0) == kin[MultiIndex()]
    # eps-weighted blocks scale with eps
    scaled = make_initial(small_grid, params.with_epsilon(0.1), InitialDataSpec(0.01))
    ring2 = TimeRing.from_states([scaled.replace(time=t) for t in (0.0, 0.1, 0.2)])
    rep2 = energy_Nm(ring2, 2, alpha0_max=1)
    assert rep2.block("eps_grad") == pytest.approx(2 * rep.block("eps_grad"))
    assert rep2.block("eps2_v1") == pytest.approx(4 * rep.block("eps2_v1"))
    assert rep2.block("kinetic") == pytest.approx(rep.block("kinetic"))


def test_energy_accumulator(small_grid: Grid, params: PhysicalParams) -> None:
    s0 = make_initial(small_grid, params, InitialDataSpec(amplitude=0.01))
    ring = TimeRing(3)
    acc = EnergyAccumulator(1)
    with pytest.raises(ValueError, match="no samples"):
        acc.row()
    assert acc.value == 0.0
    reports = []
    for k, t in enumerate((0.0, 0.1, 0.2, 0.3, 0.4)):
        # a decaying perturbation
        ring.push(
            s0.replace(
                time=t, v1=s0.v1 * math.exp(-k), rho=1 + (s0.rho - 1) * math.exp(-k)
            )
        )
        if ring.is_full:
            rep = energy_Nm(ring, 1, alpha0_max=1)
            reports.append(rep)
            acc.update(rep)
    rows = acc.rows()
    assert [r["m"] for r in rows] == [0, 1]
    assert set(rows[-1]) == set(NORM_COLUMNS)
    last = rows[-1]
    assert last["time"] == pytest.approx(0.3)
    assert last["N_m"] == pytest.approx(last["sup_total"] + last["integral_total"])
    assert last["sup_total"] == pytest.approx(
        last["kinetic"] + last["magnetic"] + last["acoustic"]
    )
    # sup blocks keep the early, larger sample
    assert last["kinetic"] >= reports[-1].block("kinetic")
    # N_k grows with k
    assert rows[1]["N_m"] >= rows[0]["N_m"]
    # trapezoid of the integrated blocks
    expected = 0.05 * sum(r.block("normal_1") for r in reports[:2]) + 0.05 * sum(
        r.block("normal_1") for r in reports[1:]
    )
    assert last["normal_1"] == pytest.approx(expected)
    with pytest.raises(ValueError, match="must advance"):
        acc.update(reports[0])
    with pytest.raises(ValueError, match="order 1 got a report of order 2"):
        acc.update(energy_Nm(ring, 2, alpha0_max=1))


def test_initial_norm(small_grid: Grid, params: PhysicalParams) -> None:
    s = make_initial(small_grid, params, InitialDataSpec(amplitude=0.01))
    n0, n1, n2 = (initial_norm(s, m) for m in range(3))
    assert 0 < n0 <= n1 <= n2
    s2 = make_initial(small_grid, params, InitialDataSpec(amplitude=0.02))
    assert initial_norm(s2, 2) == pytest.approx(4 * n2, rel=1e-6)


def _decaying_ring(s0: State, shift: int = 0) -> TimeRing:
    states = []
    for k, t in enumerate((0.0, 0.1, 0.2)):
        decay = math.exp(-0.5 * k)
        s = s0.replace(
            time=t,
            rho=1 + (s0.rho - 1) * decay,
            v1=s0.v1 * decay,
            b1=s0.b1 * decay,
        )
        rolled = {n: np.roll(a, shift, axis=0) for n, a in s.fields()}
        states.append(s.replace(**rolled))
    return TimeRing.from_states(states)


def test_energy_invariant_under_x_translation(
    small_grid: Grid, params: PhysicalParams
) -> None:
    s0 = make_initial(small_grid, params, InitialDataSpec(amplitude=0.01))
    base = energy_Nm(_decaying_ring(s0), 2, alpha0_max=1)
    shifted = energy_Nm(_decaying_ring(s0, shift=5), 2, alpha0_max=1)
    for name, value in base.blocks().items():
        assert shifted.block(name) == pytest.approx(value, rel=1e-10, abs=1e-20)
    assert initial_norm(s0, 2) == pytest.approx(
        initial_norm(next(iter(_decaying_ring(s0, shift=3))), 2), rel=1e-10
    )


def test_energy_grows_with_order(small_grid: Grid, params: PhysicalParams) -> None:
    s0 = make_initial(small_grid, params, InitialDataSpec(amplitude=0.01))
    ring = _decaying_ring(s0)
    totals = [energy_Nm(ring, m, alpha0_max=1).total for m in (1, 2, 3)]
    assert 0 < totals[0] <= totals[1] <= totals[2]
