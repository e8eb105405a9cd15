"""Residuals of the structural identities behind the normal-derivative estimates.

Every residual is ``LHS - RHS`` of an identity that holds exactly for smooth
solutions of the viscous system, evaluated at the centre of a `TimeRing`
with time derivatives from the same centred differences as ``Z0``.

For output of a forced run, pass the source terms at the centre time as
`forcing`: they are subtracted from every reconstructed time derivative, so
the identities hold again up to discretization error.
"""

from __future__ import annotations

import math
from logging import getLogger
from typing import TYPE_CHECKING, Callable

import numpy as np

from ._conormal import ConormalImages, MultiIndex, multi_indices
from ._dynamics import div_b, induction_emf

if TYPE_CHECKING:
    from collections.abc import Iterable, Mapping, Sequence

    from ._conormal import TimeRing
    from ._dynamics import RhsBundle, Stabilization
    from ._grid import Field, Grid
    from ._state import State

logger = getLogger("conormal_mhd")

_DT = MultiIndex(1, 0, 0)
DIAGNOSTIC_COLUMNS = ("time", "name", "max_norm", "conormal_norm")


class _Ctx:
    """Centre-level fields and derivatives shared by the residuals."""

    def __init__(self, ring: TimeRing, forcing: RhsBundle | None = None) -> None:
        if len(ring) < 3:
            raise ValueError(
                f"residuals need 3 ring levels for the time derivative, got {len(ring)}"
            )
        self.images = ConormalImages.from_ring(ring)
        s = ring.center
        self.s = s
        self.g = s.grid
        self.prm = s.params
        self.p = s.p
        self.forcing = forcing

    def source(self, name: str) -> Field | float:
        """Forced part of ``dt name``; zero without forcing."""
        f = self.forcing
        if f is None:
            return 0.0
        if name in ("p", "p_pert"):
            # dp/drho for p = rho**gamma
            gamma = self.prm.gamma
            if gamma == 1:
                return f.d_rho
            return gamma * self.s.rho ** (gamma - 1) * f.d_rho
        return getattr(f, f"d_{name}")

    def dt(self, name: str) -> Field:
        return self.images.apply(name, _DT) - self.source(name)


def residual_div_identity(ring: TimeRing, forcing: RhsBundle | None = None) -> Field:
    """``div v + (dt p + v . grad p) / (gamma p)``."""
    c = _Ctx(ring, forcing)
    s, g = c.s, c.g
    lhs = g.ddx(s.v1) + g.ddy(s.v2)
    transport = c.dt("p_pert") + s.v1 * g.ddx(c.p) + s.v2 * g.ddy(c.p)
    return lhs + transport / (c.prm.gamma * c.p)


def residual_dyv2(ring: TimeRing, forcing: RhsBundle | None = None) -> Field:
    """``dy v2 + dx v1 + (dt p + v . grad p) / (gamma p)``.

    The same identity as `residual_div_identity`, solved for the normal
    derivative of ``v2``.
    """
    c = _Ctx(ring, forcing)
    s, g = c.s, c.g
    rhs = -g.ddx(s.v1) - (c.dt("p") + s.v1 * g.ddx(c.p) + s.v2 * g.ddy(c.p)) / (
        c.prm.gamma * c.p
    )
    return g.ddy(s.v2) - rhs


def residual_dyv1(ring: TimeRing, forcing: RhsBundle | None = None) -> Field:
    """Normal derivative of ``v1`` recovered from the ``b1`` equation."""
    c = _Ctx(ring, forcing)
    s, g = c.s, c.g
    v1y = g.ddy(s.v1)
    rhs = (
        c.dt("b1")
        - (s.b2 - 1.0) * v1y
        + s.v1 * g.ddx(s.b1)
        + s.v2 * g.ddy(s.b1)
        + s.b1 * g.ddy(s.v2)
    )
    return v1y - rhs


def induction_residual_b1(ring: TimeRing, forcing: RhsBundle | None = None) -> Field:
    """Raw discrete residual ``ddy(E) - dt b1`` of the ``b1`` equation."""
    c = _Ctx(ring, forcing)
    s = c.s
    d_b1, _ = induction_emf(c.g, s.v1, s.v2, s.b1, s.b2)
    return d_b1 - c.dt("b1")


def b1_rearrangement_defect(ring: TimeRing) -> Field:
    """Difference between the EMF form and its expanded rearrangement.

    ``residual_dyv1 + defect == induction_residual_b1`` to roundoff; the defect
    itself is the discrete ``div B`` term ``-v1 (dx b1 + dy b2)`` up to
    product-rule errors.
    """
    c = _Ctx(ring)
    s, g = c.s, c.g
    d_b1, _ = induction_emf(g, s.v1, s.v2, s.b1, s.b2)
    return (
        d_b1
        - s.b2 * g.ddy(s.v1)
        + s.v1 * g.ddx(s.b1)
        + s.v2 * g.ddy(s.b1)
        + s.b1 * g.ddy(s.v2)
    )


def residual_dyp(ring: TimeRing, forcing: RhsBundle | None = None) -> Field:
    """Normal pressure gradient recovered from the ``v2`` equation."""
    c = _Ctx(ring, forcing)
    s, g, prm = c.s, c.g, c.prm
    eps = prm.epsilon
    lhs = g.ddy(c.p) - eps * prm.longitudinal * g.ddy2(s.v2)
    rhs = (
        -s.rho * c.dt("v2")
        + s.b1 * g.ddx(s.b2)
        - s.rho * (s.v1 * g.ddx(s.v2) + s.v2 * g.ddy(s.v2))
        - s.b1 * g.ddy(s.b1)
        + eps * prm.mu * g.ddx2(s.v2)
        + eps * (prm.mu + prm.lambda_) * g.ddx(g.ddy(s.v1))
    )
    return lhs - rhs


def residual_dyb1(ring: TimeRing, forcing: RhsBundle | None = None) -> Field:
    """Normal derivative of ``b1`` recovered from the ``v1`` equation."""
    c = _Ctx(ring, forcing)
    s, g, prm = c.s, c.g, c.prm
    eps = prm.epsilon
    b1y = g.ddy(s.b1)
    lhs = b1y + eps * prm.mu * g.ddy2(s.v1)
    rhs = (
        s.rho * c.dt("v1")
        + g.ddx(c.p)
        + s.b2 * g.ddx(s.b2)
        - (s.b2 - 1.0) * b1y
        + s.rho * (s.v1 * g.ddx(s.v1) + s.v2 * g.ddy(s.v1))
        - eps * prm.mu * g.ddx2(s.v1)
        - eps * (prm.mu + prm.lambda_) * (g.ddx2(s.v1) + g.ddx(g.ddy(s.v2)))
    )
    return lhs - rhs


RESIDUALS: Mapping[str, Callable[..., Field]] = {
    "div_identity": residual_div_identity,
    "dyv1": residual_dyv1,
    "dyv2": residual_dyv2,
    "dyp": residual_dyp,
    "dyb1": residual_dyb1,
}
#: residuals taken from the momentum equations, which the wall row replaces
MOMENTUM_RESIDUALS = frozenset({"dyp", "dyb1"})


def monitored_rows(grid: Grid, sponge_fraction: float, skip_wall: bool) -> slice:
    """Rows below the sponge start, without the pinned top row."""
    start = (1 - sponge_fraction) * grid.spec.ymax
    below = np.nonzero(grid.y < start)[0] if sponge_fraction > 0 else np.arange(grid.ny)
    hi = min(int(below[-1]) + 1, grid.ny - 1)
    return slice(1 if skip_wall else 0, hi)


def _identity(a: Field) -> Field:
    return a


def residual_norms(
    grid: Grid, residual: Field, rows: slice, m: int
) -> tuple[float, float]:
    """Max-norm and spatial conormal ``||.||_{m-1}`` of `residual` on `rows`."""
    region = residual[:, rows]
    max_norm = float(np.max(np.abs(region))) if region.size else 0.0
    images = ConormalImages([residual], grid)
    w = grid.weights[:, rows]
    conormal = math.sqrt(
        math.fsum(
            float(np.sum(w * images.apply(_identity, a)[:, rows] ** 2))
            for a in multi_indices(max(m - 1, 0), 0)
        )
    )
    return max_norm, conormal


def evaluate_residuals(
    ring: TimeRing,
    m: int,
    stabilization: Stabilization,
    names: Iterable[str] | None = None,
    forcing: RhsBundle | None = None,
) -> list[dict[str, object]]:
    """One diagnostics row per residual at the ring's centre time.

    `forcing` holds the source terms at the centre time of a forced run.
    """
    grid = ring.grid
    rows = []
    for name in names or RESIDUALS:
        res = RESIDUALS[name](ring, forcing)
        skip_wall = name in MOMENTUM_RESIDUALS
        region = monitored_rows(grid, stabilization.sponge_fraction, skip_wall)
        max_norm, conormal = residual_norms(grid, res, region, m)
        rows.append(
            {
                "time": ring.center_time,
                "name": name,
                "max_norm": max_norm,
                "conormal_norm": conormal,
            }
        )
    return rows


def wall_trace_drift(wall_rows: Sequence[Field]) -> np.ndarray:
    """``max_x |b2(t, x, 0) - b2(0, x, 0)|`` for every recorded wall row."""
    if not len(wall_rows):
        return np.zeros(0)
    first = np.asarray(wall_rows[0])
    return np.array([float(np.max(np.abs(np.asarray(r) - first))) for r in wall_rows])


class WallTraceMonitor:
    """Incremental `wall_trace_drift` over accepted steps."""

    def __init__(self) -> None:
        self._first: np.ndarray | None = None
        self.max_drift = 0.0

    def record(self, b2: Field) -> float:
        row = np.array(b2[:, 0])
        if self._first is None:
            self._first = row
            return 0.0
        drift = float(np.max(np.abs(row - self._first)))
        self.max_drift = max(self.max_drift, drift)
        return drift


def constraint_rows(state: State, wall_drift: float) -> list[dict[str, object]]:
    """Rows for ``div B`` and the wall-trace drift; they carry no conormal norm."""
    return [
        {
            "time": state.time,
            "name": "div_b",
            "max_norm": float(np.max(np.abs(div_b(state)))),
            "conormal_norm": math.nan,
        },
        {
            "time": state.time,
            "name": "wall_trace",
            "max_norm": wall_drift,
            "conormal_norm": math.nan,
        },
    ]
