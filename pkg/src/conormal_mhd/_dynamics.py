from __future__ import annotations

import math
from dataclasses import dataclass
from logging import getLogger
from typing import TYPE_CHECKING, Callable, NamedTuple, Protocol

import numpy as np

from ._state import FIELD_NAMES, State, pressure
from ._util import first_nonfinite

if TYPE_CHECKING:
    from collections.abc import Iterator, Mapping

    from ._grid import Field, Grid
    from ._store import Store

logger = getLogger("conormal_mhd")

WALL_MODES = ("no-slip", "impermeable")
PINNED = ("rho", "v1", "v2")


class SolverAbort(RuntimeError):
    """The time integration cannot continue.

    Parameters
    ----------
    message : str
        What went wrong.
    time : float | None
        Simulation time of the failing step.
    stage : int | None
        Runge-Kutta stage (1-4) at which the failure was detected.
    location : tuple[int, ...] | None
        Index of the first offending node.
    """

    def __init__(
        self,
        message: str,
        *,
        time: float | None = None,
        stage: int | None = None,
        location: tuple[int, ...] | None = None,
    ) -> None:
        parts = [message]
        if time is not None:
            parts.append(f"t={time:.6g}")
        if stage is not None:
            parts.append(f"stage {stage}")
        if location is not None:
            parts.append(f"node {location}")
        super().__init__(", ".join(parts))
        self.time = time
        self.stage = stage
        self.location = location


class RhsBundle(NamedTuple):
    """Time derivatives of the five fields."""

    d_rho: Field
    d_v1: Field
    d_v2: Field
    d_b1: Field
    d_b2: Field


class RhsFunction(Protocol):
    def __call__(
        self, s: State, forcing: RhsBundle | None = None, wall: str = ...
    ) -> RhsBundle: ...


@dataclass(frozen=True)
class StepControl:
    """Courant numbers for the advective and diffusive limits, plus a cap on dt."""

    cfl_adv: float = 0.4
    cfl_visc: float = 0.25
    dt_cap: float | None = None

    def __post_init__(self) -> None:
        for name in ("cfl_adv", "cfl_visc"):
            value = getattr(self, name)
            if not 0 < value <= 1:
                raise ValueError(f"{name} must lie in (0, 1], got {value}")
        if self.dt_cap is not None and not self.dt_cap > 0:
            raise ValueError(f"dt_cap must be positive, got {self.dt_cap}")


@dataclass(frozen=True)
class Stabilization:
    """Fourth-difference filter and far-field sponge settings."""

    filter_coeff: float = 0.002
    sponge_fraction: float = 0.1
    sponge_time: float = 0.1

    def __post_init__(self) -> None:
        if not 0 <= self.filter_coeff <= 1 / 32:
            raise ValueError(
                f"filter_coeff must lie in [0, 1/32], got {self.filter_coeff}"
            )
        if not 0 <= self.sponge_fraction < 0.5:
            raise ValueError(
                f"sponge_fraction must lie in [0, 0.5), got {self.sponge_fraction}"
            )
        if not self.sponge_time > 0:
            raise ValueError(f"sponge_time must be positive, got {self.sponge_time}")

    @classmethod
    def off(cls) -> Stabilization:
        return cls(filter_coeff=0.0, sponge_fraction=0.0)


# ------------------------------ physical terms --------------------------------


def lorentz_force(grid: Grid, b1: Field, b2: Field) -> tuple[Field, Field]:
    """``(curl B) x B`` in the plane, with current ``j = ddx b2 - ddy b1``."""
    j = grid.ddx(b2) - grid.ddy(b1)
    return -j * b2, j * b1


def induction_emf(
    grid: Grid, v1: Field, v2: Field, b1: Field, b2: Field
) -> tuple[Field, Field]:
    """``curl(v x B)`` through the scalar EMF ``E = v1 b2 - v2 b1``."""
    emf = v1 * b2 - v2 * b1
    return grid.ddy(emf), -grid.ddx(emf)


def div_b(s: State) -> Field:
    return s.grid.ddx(s.b1) + s.grid.ddy(s.b2)


def div_b_max(s: State) -> float:
    return float(np.max(np.abs(div_b(s))))


def _check_density(s: State, stage: int | None = None) -> None:
    if np.all(s.rho > 0):
        return
    loc = tuple(int(i) for i in np.unravel_index(np.argmin(s.rho), s.rho.shape))
    raise SolverAbort(
        f"non-positive density {s.rho[loc]!r}", time=s.time, stage=stage, location=loc
    )


def _inviscid_terms(s: State) -> tuple[list[Field], dict[str, Field]]:
    g = s.grid
    rho, v1, v2, b1, b2 = s.rho, s.v1, s.v2, s.b1, s.b2
    _check_density(s)
    p = pressure(rho, s.params.gamma)
    d = {
        "v1x": g.ddx(v1),
        "v1y": g.ddy(v1),
        "v2x": g.ddx(v2),
        "v2y": g.ddy(v2),
    }
    d_rho = -(v1 * g.ddx(rho) + v2 * g.ddy(rho)) - rho * (d["v1x"] + d["v2y"])
    f1, f2 = lorentz_force(g, b1, b2)
    acc1 = -(v1 * d["v1x"] + v2 * d["v1y"]) + (f1 - g.ddx(p)) / rho
    acc2 = -(v1 * d["v2x"] + v2 * d["v2y"]) + (f2 - g.ddy(p)) / rho
    d_b1, d_b2 = induction_emf(g, v1, v2, b1, b2)
    return [d_rho, acc1, acc2, d_b1, d_b2], d


def _add_forcing(out: list[Field], forcing: RhsBundle | None) -> None:
    if forcing is not None:
        for k, src in enumerate(forcing):
            out[k] = out[k] + src


def viscous_rhs(
    s: State, forcing: RhsBundle | None = None, wall: str = "no-slip"
) -> RhsBundle:
    """Right-hand side of the viscous system in non-conservative form.

    ``d_v = [-rho v.grad v - grad p + eps mu lap v + eps (mu + lambda) grad div v
    + (curl B) x B] / rho``; the wall rows of ``d_v`` are zero.

    Raises
    ------
    ValueError
        If ``epsilon == 0`` or `wall` is not ``"no-slip"``.
    SolverAbort
        If the density is not positive.
    """
    prm = s.params
    if prm.is_ideal:
        raise ValueError("viscous_rhs needs epsilon > 0; use ideal_rhs for epsilon = 0")
    if wall != "no-slip":
        raise ValueError(
            f"the viscous system only supports a no-slip wall, got {wall!r}"
        )
    g = s.grid
    out, d = _inviscid_terms(s)
    mu_e = prm.epsilon * prm.mu
    bulk_e = prm.epsilon * (prm.mu + prm.lambda_)
    v1xx, v2xx = g.ddx2(s.v1), g.ddx2(s.v2)
    v1yy, v2yy = g.ddy2(s.v1), g.ddy2(s.v2)
    # no first-order y stencil applied twice
    ddiv_x = v1xx + g.ddx(d["v2y"])
    ddiv_y = g.ddx(d["v1y"]) + v2yy
    out[1] = out[1] + (mu_e * (v1xx + v1yy) + bulk_e * ddiv_x) / s.rho
    out[2] = out[2] + (mu_e * (v2xx + v2yy) + bulk_e * ddiv_y) / s.rho
    _add_forcing(out, forcing)
    out[1][:, 0] = 0.0
    out[2][:, 0] = 0.0
    return RhsBundle(*out)


def ideal_rhs(
    s: State, forcing: RhsBundle | None = None, wall: str = "impermeable"
) -> RhsBundle:
    """Right-hand side of the ideal system (no viscous terms).

    With ``wall="impermeable"`` only ``d_v2`` vanishes on the wall row and the
    tangential velocity evolves with one-sided stencils; ``"no-slip"`` also
    holds ``v1`` at zero.
    """
    if wall not in WALL_MODES:
        raise ValueError(f"wall must be one of {WALL_MODES}, got {wall!r}")
    out, _ = _inviscid_terms(s)
    _add_forcing(out, forcing)
    out[2][:, 0] = 0.0
    if wall == "no-slip":
        out[1][:, 0] = 0.0
    return RhsBundle(*out)


MODELS: Mapping[str, RhsFunction] = {"viscous": viscous_rhs, "ideal": ideal_rhs}


def resolve_model(model: str | RhsFunction, store: Store | None = None) -> RhsFunction:
    """Look up a right-hand side by name: the store first, then the built-ins."""
    if callable(model):
        return model
    if store is not None and store.has_solver(model):
        return store.get_solver(model)
    try:
        return MODELS[model]
    except KeyError:
        raise KeyError(
            f"unknown model {model!r}; choose one of {sorted(MODELS)}"
        ) from None


def cfl(s: State, ctl: StepControl) -> float:
    """Stable step from the fastest wave and the viscous diffusion limit.

    ``dt = min(cfl_adv h / max(|v| + c + |B| / sqrt(rho)),
    cfl_visc h**2 / (eps (2 mu + lambda)))`` capped by ``dt_cap``, where
    ``c = sqrt(gamma rho**(gamma - 1))`` and ``h`` is the smallest spacing.
    """
    _check_density(s)
    prm = s.params
    h = s.grid.h_min
    sound = np.sqrt(prm.gamma * s.rho ** (prm.gamma - 1))
    speed = np.hypot(s.v1, s.v2) + sound + np.hypot(s.b1, s.b2) / np.sqrt(s.rho)
    fastest = float(np.max(speed))
    if not math.isfinite(fastest):
        loc = first_nonfinite(speed)
        raise SolverAbort("non-finite wave speed", time=s.time, location=loc)
    dt = ctl.cfl_adv * h / fastest if fastest > 0 else math.inf
    if not prm.is_ideal:
        dt = min(dt, ctl.cfl_visc * h**2 / (prm.epsilon * prm.longitudinal))
    if ctl.dt_cap is not None:
        dt = min(dt, ctl.dt_cap)
    return dt


# ------------------------------ stabilization ---------------------------------


def fourth_difference_x(f: Field) -> Field:
    return (
        np.roll(f, 2, axis=0)
        - 4 * np.roll(f, 1, axis=0)
        + 6 * f
        - 4 * np.roll(f, -1, axis=0)
        + np.roll(f, -2, axis=0)
    )


def fourth_difference_y(f: Field) -> Field:
    """Index-space fourth difference in y on rows ``2 .. ny-3``, zero elsewhere."""
    out = np.zeros_like(f)
    out[:, 2:-2] = (
        f[:, :-4] - 4 * f[:, 1:-3] + 6 * f[:, 2:-2] - 4 * f[:, 3:-1] + f[:, 4:]
    )
    return out


def apply_filter(fields: dict[str, Field], coeff: float) -> None:
    """Damp grid-scale noise in place.

    Density and velocity are filtered in x and y; the magnetic field in x only,
    which commutes with both difference operators and keeps div B unchanged.
    """
    if coeff == 0:
        return
    for name in ("rho", "v1", "v2"):
        f = fields[name]
        fields[name] = f - coeff * (fourth_difference_x(f) + fourth_difference_y(f))
    for name in ("b1", "b2"):
        fields[name] = fields[name] - coeff * fourth_difference_x(fields[name])


def sponge_rate(grid: Grid, stab: Stabilization) -> Field:
    """Relaxation rate, ramping quadratically from 0 at the sponge start."""
    if stab.sponge_fraction == 0:
        return np.zeros(grid.ny)
    ymax = grid.spec.ymax
    start = (1 - stab.sponge_fraction) * ymax
    ramp = np.clip((grid.y - start) / (ymax - start), 0.0, 1.0)
    return ramp**2 / stab.sponge_time


# ---------------------------------- solver ------------------------------------

Forcing = Callable[[float], RhsBundle]
TopValues = Callable[[float], "Mapping[str, np.ndarray]"]
StepHook = Callable[[State], None]


class Solver:
    """Classical four-stage Runge-Kutta integrator for one state trajectory.

    Boundary conditions are re-imposed after every stage: the wall velocity
    (both components for a no-slip wall, ``v2`` for an impermeable one) and the
    top row of density and velocity, pinned to the background or to
    `top_values`. The magnetic field is never pinned. After each full step the
    filter and the sponge act, then the boundary conditions once more.

    Parameters
    ----------
    state : State
        Initial state.
    model : str | RhsFunction
        ``"viscous"``, ``"ideal"`` or a registered / custom right-hand side.
    control : StepControl
        CFL settings.
    stabilization : Stabilization
        Filter and sponge settings.
    wall : str | None
        Wall condition; defaults to ``"no-slip"`` for the viscous model and
        ``"impermeable"`` otherwise.
    forcing : Callable[[float], RhsBundle] | None
        Source terms evaluated at stage times.
    top_values : Callable[[float], Mapping[str, ndarray]] | None
        Top-row values of ``rho``, ``v1``, ``v2`` at a given time.
    store : Store | None
        Registry consulted for named models.
    on_step : Callable[[State], None] | None
        Called with every accepted state.
    """

    def __init__(
        self,
        state: State,
        model: str | RhsFunction = "viscous",
        control: StepControl | None = None,
        stabilization: Stabilization | None = None,
        *,
        wall: str | None = None,
        forcing: Forcing | None = None,
        top_values: TopValues | None = None,
        store: Store | None = None,
        on_step: StepHook | None = None,
    ) -> None:
        self.state = state
        if isinstance(model, str):
            self.model = model
        else:
            self.model = getattr(model, "__name__", "custom")
        self.rhs = resolve_model(model, store)
        self.control = control or StepControl()
        self.stabilization = stabilization or Stabilization()
        self.wall = wall or ("no-slip" if self.model == "viscous" else "impermeable")
        if self.wall not in WALL_MODES:
            raise ValueError(f"wall must be one of {WALL_MODES}, got {self.wall!r}")
        self.forcing = forcing
        self.top_values = top_values
        self.on_step = on_step
        self.steps = 0
        self._sponge = sponge_rate(state.grid, self.stabilization)

    # -- boundary handling --

    def _top(self, t: float) -> Mapping[str, np.ndarray]:
        if self.top_values is not None:
            return self.top_values(t)
        nx = self.state.grid.nx
        return {"rho": np.ones(nx), "v1": np.zeros(nx), "v2": np.zeros(nx)}

    def _impose(self, fields: dict[str, Field], t: float) -> None:
        fields["v2"][:, 0] = 0.0
        if self.wall == "no-slip":
            fields["v1"][:, 0] = 0.0
        top = self._top(t)
        for name in PINNED:
            fields[name][:, -1] = top[name]

    def _make_state(
        self, fields: dict[str, Field], t: float, stage: int | None
    ) -> State:
        for name in FIELD_NAMES:
            loc = first_nonfinite(fields[name])
            if loc is not None:
                logger.error(
                    "Non-finite %s at t=%.6g, stage %s, node %s", name, t, stage, loc
                )
                raise SolverAbort(
                    f"non-finite {name}", time=t, stage=stage, location=loc
                )
        out = self.state.replace(time=t, **fields)
        try:
            _check_density(out, stage)
        except SolverAbort as e:
            logger.error("%s", e)
            raise
        return out

    def _stage(
        self, base: State, k: RhsBundle, h: float, t: float, stage: int
    ) -> State:
        fields = {n: getattr(base, n) + h * dk for n, dk in zip(FIELD_NAMES, k)}
        self._impose(fields, t)
        return self._make_state(fields, t, stage)

    def _eval(self, s: State, stage: int) -> RhsBundle:
        force = self.forcing(s.time) if self.forcing is not None else None
        try:
            return self.rhs(s, force, wall=self.wall)
        except SolverAbort as e:
            e.stage = stage
            raise

    # -- stepping --

    def step(self, dt: float, t_end: float | None = None) -> State:
        """Advance one RK4 step of size `dt`; `t_end` overrides the new time."""
        if not dt > 0:
            raise ValueError(f"dt must be positive, got {dt}")
        # overflow surfaces as a non-finite field and a SolverAbort
        with np.errstate(over="ignore", invalid="ignore"):
            self._rk4(dt, t_end)
        self.steps += 1
        logger.debug("Step %d: t=%.6g dt=%.3e", self.steps, self.state.time, dt)
        if self.on_step is not None:
            self.on_step(self.state)
        return self.state

    def _rk4(self, dt: float, t_end: float | None) -> None:
        u0 = self.state
        t0 = u0.time
        k1 = self._eval(u0, 1)
        u1 = self._stage(u0, k1, dt / 2, t0 + dt / 2, 1)
        k2 = self._eval(u1, 2)
        u2 = self._stage(u0, k2, dt / 2, t0 + dt / 2, 2)
        k3 = self._eval(u2, 3)
        u3 = self._stage(u0, k3, dt, t0 + dt, 3)
        k4 = self._eval(u3, 4)
        t1 = t0 + dt if t_end is None else t_end
        fields = {
            n: getattr(u0, n) + (dt / 6) * (a + 2 * b + 2 * c + d)
            for n, a, b, c, d in zip(FIELD_NAMES, k1, k2, k3, k4)
        }
        apply_filter(fields, self.stabilization.filter_coeff)
        if np.any(self._sponge > 0):
            decay = np.exp(-self._sponge * dt)
            fields["rho"] = 1.0 + (fields["rho"] - 1.0) * decay
            fields["v1"] = fields["v1"] * decay
            fields["v2"] = fields["v2"] * decay
        self._impose(fields, t1)
        self.state = self._make_state(fields, t1, 4)

    def advance_to(self, t_target: float) -> State:
        """Step with CFL-limited dt, shortening the last step to land on `t_target`."""
        while self.state.time < t_target:
            dt = cfl(self.state, self.control)
            remaining = t_target - self.state.time
            if dt >= remaining * (1 - 1e-12):
                return self.step(remaining, t_end=t_target)
            self.step(dt)
        return self.state

    def iter_stores(self, t_final: float, store_dt: float) -> Iterator[State]:
        """Yield the state at every multiple of `store_dt` after the current time."""
        k0 = round(self.state.time / store_dt)
        n_final = round(t_final / store_dt)
        for k in range(k0 + 1, n_final + 1):
            yield self.advance_to(k * store_dt)


def integrate(
    state: State,
    t_final: float,
    model: str | RhsFunction = "viscous",
    **kwargs: object,
) -> State:
    """Convenience wrapper: build a `Solver` and advance it to `t_final`."""
    return Solver(state, model, **kwargs).advance_to(t_final)  # type: ignore[arg-type]
