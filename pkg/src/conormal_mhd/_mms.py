"""Manufactured solutions and grid-convergence studies for both solvers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from logging import getLogger
from typing import TYPE_CHECKING, Callable

import numpy as np
import sympy as sp

from ._dynamics import RhsBundle, Solver, Stabilization, StepControl
from ._grid import Grid, GridSpec
from ._state import FIELD_NAMES, PhysicalParams, State

if TYPE_CHECKING:
    from collections.abc import Mapping

    from ._grid import Field

logger = getLogger("conormal_mhd")

T, X, Y = sp.symbols("t x y", real=True)

ORDER_RANGE = (1.8, 2.3)


@dataclass(frozen=True)
class ManufacturedSolution:
    """Closed-form wall-compatible fields, periodic in x.

    ``rho = 1 + A cos(k x) exp(-y**2) cos t``,
    ``v1 = A sin(k x) y**2 exp(-y) cos t``,
    ``v2 = A cos(k x) y**2 exp(-y) sin t`` and ``B = e_y + (dy psi, -dx psi)``
    with ``psi = A sin(k x) y**2 exp(-y) cos(t) / k``, ``k = 2 pi kx / L_x``.
    ``amplitude = 0`` describes the background state.
    """

    amplitude: float = 0.1
    kx: int = 1
    length_x: float = 2 * math.pi

    def expressions(self) -> dict[str, sp.Expr]:
        a = sp.Float(self.amplitude)
        k = 2 * sp.pi * self.kx / sp.Float(self.length_x)
        wall = Y**2 * sp.exp(-Y)
        psi = a * sp.sin(k * X) * wall * sp.cos(T) / k
        return {
            "rho": 1 + a * sp.cos(k * X) * sp.exp(-(Y**2)) * sp.cos(T),
            "v1": a * sp.sin(k * X) * wall * sp.cos(T),
            "v2": a * sp.cos(k * X) * wall * sp.sin(T),
            "b1": sp.diff(psi, Y),
            "b2": 1 - sp.diff(psi, X),
        }


def continuous_rhs(
    q: Mapping[str, sp.Expr], params: PhysicalParams
) -> dict[str, sp.Expr]:
    """The evolution operator applied symbolically to closed-form fields."""
    rho, v1, v2, b1, b2 = (q[n] for n in FIELD_NAMES)
    gamma = params.gamma
    p = rho if gamma == 1 else rho ** sp.Float(gamma)
    dx = lambda e: sp.diff(e, X)  # noqa: E731
    dy = lambda e: sp.diff(e, Y)  # noqa: E731
    div = dx(v1) + dy(v2)
    j = dx(b2) - dy(b1)
    eps = sp.Float(params.epsilon)
    mu_e = eps * sp.Float(params.mu)
    bulk_e = eps * sp.Float(params.mu + params.lambda_)
    visc1 = mu_e * (dx(dx(v1)) + dy(dy(v1))) + bulk_e * dx(div)
    visc2 = mu_e * (dx(dx(v2)) + dy(dy(v2))) + bulk_e * dy(div)
    emf = v1 * b2 - v2 * b1
    return {
        "rho": -(v1 * dx(rho) + v2 * dy(rho)) - rho * div,
        "v1": -(v1 * dx(v1) + v2 * dy(v1)) + (-j * b2 - dx(p) + visc1) / rho,
        "v2": -(v1 * dx(v2) + v2 * dy(v2)) + (j * b1 - dy(p) + visc2) / rho,
        "b1": dy(emf),
        "b2": -dx(emf),
    }


def _compile(expr: sp.Expr) -> Callable[[float, Field, Field], Field]:
    fn = sp.lambdify((T, X, Y), expr, "numpy")

    def evaluate(t: float, x: Field, y: Field) -> Field:
        return np.broadcast_to(np.asarray(fn(t, x, y), dtype=float), x.shape).copy()

    return evaluate


@dataclass(frozen=True)
class MmsForcing:
    """Exact fields and source terms of a manufactured solution.

    The source is ``S = dq/dt - RHS(q)`` with ``RHS`` the continuous operator
    at the given parameters; ``epsilon = 0`` gives the ideal source.
    """

    solution: ManufacturedSolution
    params: PhysicalParams
    exact_exprs: Mapping[str, sp.Expr] = field(init=False, repr=False)
    source_exprs: Mapping[str, sp.Expr] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        q = self.solution.expressions()
        rhs = continuous_rhs(q, self.params)
        source = {n: sp.diff(q[n], T) - rhs[n] for n in FIELD_NAMES}
        object.__setattr__(self, "exact_exprs", q)
        object.__setattr__(self, "source_exprs", source)

    @cached_property
    def _exact_fns(self) -> dict[str, Callable]:
        return {n: _compile(e) for n, e in self.exact_exprs.items()}

    @cached_property
    def _source_fns(self) -> dict[str, Callable]:
        return {n: _compile(e) for n, e in self.source_exprs.items()}

    def exact(self, grid: Grid, t: float) -> dict[str, Field]:
        X_, Y_ = grid.mesh()
        return {n: fn(t, X_, Y_) for n, fn in self._exact_fns.items()}

    def exact_state(self, grid: Grid, t: float) -> State:
        return State(grid, self.params, time=t, **self.exact(grid, t))

    def source(self, grid: Grid, t: float) -> RhsBundle:
        X_, Y_ = grid.mesh()
        return RhsBundle(*(self._source_fns[n](t, X_, Y_) for n in FIELD_NAMES))

    def top_values(self, grid: Grid, t: float) -> dict[str, np.ndarray]:
        x = grid.x[:, None]
        y = np.full_like(x, grid.spec.ymax)
        return {n: self._exact_fns[n](t, x, y)[:, 0] for n in ("rho", "v1", "v2")}


def mms_forcing(
    solution: ManufacturedSolution, params: PhysicalParams
) -> MmsForcing:
    """Source terms that make `solution` exact for the given parameters."""
    return MmsForcing(solution, params)


def l2_errors(grid: Grid, state: State, exact: Mapping[str, Field]) -> dict[str, float]:
    return {
        name: math.sqrt(grid.integrate((arr - exact[name]) ** 2))
        for name, arr in state.fields()
    }


def _order(coarse: float, fine: float) -> float:
    if coarse > 0 and fine > 0:
        return math.log2(coarse / fine)
    return math.nan


@dataclass(frozen=True)
class MmsResult:
    """Errors per refinement level and the observed orders between levels."""

    model: str
    grids: tuple[GridSpec, ...]
    errors: tuple[dict[str, float], ...]
    wall: str = "no-slip"

    @property
    def orders(self) -> tuple[dict[str, float], ...]:
        """``log2(e_k / e_{k+1})`` per field; nan where an error vanishes."""
        out = []
        for fine, coarse in zip(self.errors[1:], self.errors[:-1]):
            out.append({n: _order(coarse[n], fine[n]) for n in FIELD_NAMES})
        return tuple(out)

    def passed(self, lo: float = ORDER_RANGE[0], hi: float = ORDER_RANGE[1]) -> bool:
        return bool(self.orders) and all(
            lo <= o <= hi for level in self.orders for o in level.values()
        )


def run_mms(
    base: GridSpec,
    params: PhysicalParams,
    levels: int = 3,
    horizon: float = 0.2,
    model: str = "viscous",
    wall: str | None = None,
    control: StepControl | None = None,
    solution: ManufacturedSolution | None = None,
) -> MmsResult:
    """Solve the forced problem on `levels` grids, halving both spacings each time.

    Filter and sponge are off. The ideal model uses ``epsilon = 0`` and, unless
    `wall` says otherwise, a no-slip wall: with ``B . n != 0`` two characteristics
    enter through the wall, and holding only ``v2`` leaves the tangential pair
    ``(v1, b1)`` without a boundary condition, which costs the wall rows an order.
    """
    if levels < 2:
        raise ValueError(f"a convergence study needs at least 2 levels, got {levels}")
    if model == "ideal":
        params = params.with_epsilon(0.0)
    wall = wall or "no-slip"
    solution = solution or ManufacturedSolution(length_x=base.length_x)
    forcing = mms_forcing(solution, params)
    grids, errors = [], []
    for level in range(levels):
        spec = base.refined(level)
        grid = Grid(spec)
        solver = Solver(
            forcing.exact_state(grid, 0.0),
            model,
            control,
            Stabilization.off(),
            wall=wall,
            forcing=lambda t, g=grid: forcing.source(g, t),
            top_values=lambda t, g=grid: forcing.top_values(g, t),
        )
        final = solver.advance_to(horizon)
        err = l2_errors(grid, final, forcing.exact(grid, horizon))
        logger.info(
            "MMS %s level %d (%dx%d, %d steps): %s",
            model,
            level,
            spec.nx,
            spec.ny,
            solver.steps,
            ", ".join(f"{n}={e:.3e}" for n, e in err.items()),
        )
        grids.append(spec)
        errors.append(err)
    return MmsResult(model, tuple(grids), tuple(errors), wall)
