from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from logging import getLogger
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from numpy.typing import NDArray

    Field = NDArray[np.float64]

logger = getLogger("conormal_mhd")

MIN_NY = 8


@dataclass(frozen=True)
class GridSpec:
    """Parameters of the truncated half-plane strip.

    Parameters
    ----------
    nx : int
        Number of nodes in the periodic x direction.
    ny : int
        Number of nodes in the wall-normal direction (at least 8).
    length_x : float
        Period of the strip in x.
    ymax : float
        Truncation height of the half plane.
    stretch_beta : float
        Wall-clustering parameter, 0 gives a uniform mesh.
    """

    nx: int = 64
    ny: int = 64
    length_x: float = 2 * np.pi
    ymax: float = 8.0
    stretch_beta: float = 2.0

    def validate(self) -> None:
        """Raise ValueError if the parameters are out of bounds."""
        if self.nx < 1:
            raise ValueError(f"nx must be a positive integer, got {self.nx}")
        if self.ny < MIN_NY:
            raise ValueError(f"ny must be >= {MIN_NY}, got {self.ny}")
        if not self.length_x > 0:
            raise ValueError(f"length_x must be positive, got {self.length_x}")
        if not self.ymax > 0:
            raise ValueError(f"ymax must be positive, got {self.ymax}")
        if not self.stretch_beta >= 0:
            raise ValueError(
                f"stretch_beta must be non-negative, got {self.stretch_beta}"
            )

    def refined(self, level: int = 1) -> GridSpec:
        """Return a GridSpec with both spacings halved `level` times."""
        factor = 2**level
        return GridSpec(
            nx=self.nx * factor,
            ny=(self.ny - 1) * factor + 1,
            length_x=self.length_x,
            ymax=self.ymax,
            stretch_beta=self.stretch_beta,
        )


def build_grid(spec: GridSpec) -> tuple[Field, Field]:
    """Return the node coordinates `(x, y)` of `spec`.

    x is uniform and periodic, ``x_i = i L_x / nx``.  y follows the exponential
    map ``y_j = Y_max (exp(beta s_j) - 1) / (exp(beta) - 1)`` with
    ``s_j = j / (ny - 1)``, reducing to ``Y_max s_j`` for ``beta = 0``.
    """
    spec.validate()
    x = np.arange(spec.nx) * (spec.length_x / spec.nx)
    s = np.arange(spec.ny) / (spec.ny - 1)
    if spec.stretch_beta == 0:
        y = spec.ymax * s
    else:
        y = spec.ymax * (np.expm1(spec.stretch_beta * s) / np.expm1(spec.stretch_beta))
    y[0] = 0.0
    y[-1] = spec.ymax
    return x, y


def _mapping_derivatives(spec: GridSpec, s: Field) -> tuple[Field, Field]:
    """Analytic dy/ds and d2y/ds2 of the wall-normal map."""
    beta = spec.stretch_beta
    if beta == 0:
        return np.full_like(s, spec.ymax), np.zeros_like(s)
    scale = spec.ymax * beta / np.expm1(beta)
    y_s = scale * np.exp(beta * s)
    return y_s, beta * y_s


@dataclass(frozen=True)
class Grid:
    """Discretized strip with second-order finite-difference operators.

    Fields are arrays of shape ``(nx, ny)`` indexed ``[i, j]``.  All operators
    are pure: they never modify their input.
    """

    spec: GridSpec
    x: Field = field(init=False, repr=False, compare=False)
    y: Field = field(init=False, repr=False, compare=False)
    s: Field = field(init=False, repr=False, compare=False)
    y_s: Field = field(init=False, repr=False, compare=False)
    y_ss: Field = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        x, y = build_grid(self.spec)
        s = np.arange(self.spec.ny) / (self.spec.ny - 1)
        y_s, y_ss = _mapping_derivatives(self.spec, s)
        for name, arr in (("x", x), ("y", y), ("s", s), ("y_s", y_s), ("y_ss", y_ss)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        logger.debug(
            "Built grid %sx%s (ymax=%s, beta=%s, h_min=%.3e)",
            self.nx,
            self.ny,
            self.spec.ymax,
            self.spec.stretch_beta,
            self.h_min,
        )

    @property
    def nx(self) -> int:
        return self.spec.nx

    @property
    def ny(self) -> int:
        return self.spec.ny

    @property
    def shape(self) -> tuple[int, int]:
        return (self.spec.nx, self.spec.ny)

    @property
    def dx(self) -> float:
        return self.spec.length_x / self.spec.nx

    @property
    def ds(self) -> float:
        return 1.0 / (self.spec.ny - 1)

    @cached_property
    def h_min(self) -> float:
        """Smallest mapped spacing in either direction."""
        return float(min(self.dx, np.min(np.diff(self.y))))

    @cached_property
    def weights(self) -> Field:
        """Trapezoid quadrature weights including the mapping Jacobian."""
        wy = np.full(self.ny, self.ds)
        wy[0] = wy[-1] = 0.5 * self.ds
        w = self.dx * np.outer(np.ones(self.nx), wy * self.y_s)
        w.flags.writeable = False
        return w

    @property
    def measure(self) -> float:
        """Quadrature measure of the truncated strip."""
        return float(np.sum(self.weights))

    def zeros(self) -> Field:
        return np.zeros(self.shape)

    def full(self, value: float) -> Field:
        return np.full(self.shape, float(value))

    def mesh(self) -> tuple[Field, Field]:
        """Return node coordinates broadcast to field shape."""
        return np.meshgrid(self.x, self.y, indexing="ij")

    def integrate(self, f: Field) -> float:
        return float(np.sum(self.weights * f))

    # ------------------------- derivative operators ------------------------------

    def ddx(self, f: Field) -> Field:
        """Centered periodic first difference in x."""
        return (np.roll(f, -1, axis=0) - np.roll(f, 1, axis=0)) / (2 * self.dx)

    def ddx2(self, f: Field) -> Field:
        """Centered periodic second difference in x."""
        return (np.roll(f, -1, axis=0) - 2 * f + np.roll(f, 1, axis=0)) / self.dx**2

    def dds(self, f: Field) -> Field:
        """First difference in the computational coordinate s.

        Central in the interior, one-sided second order at both ends.
        """
        out = np.empty_like(f, dtype=float)
        h = self.ds
        out[:, 1:-1] = (f[:, 2:] - f[:, :-2]) / (2 * h)
        out[:, 0] = (-3 * f[:, 0] + 4 * f[:, 1] - f[:, 2]) / (2 * h)
        out[:, -1] = (3 * f[:, -1] - 4 * f[:, -2] + f[:, -3]) / (2 * h)
        return out

    def dds2(self, f: Field) -> Field:
        """Second difference in s, four-point one-sided closures at the ends."""
        out = np.empty_like(f, dtype=float)
        h2 = self.ds**2
        out[:, 1:-1] = (f[:, 2:] - 2 * f[:, 1:-1] + f[:, :-2]) / h2
        out[:, 0] = (2 * f[:, 0] - 5 * f[:, 1] + 4 * f[:, 2] - f[:, 3]) / h2
        out[:, -1] = (2 * f[:, -1] - 5 * f[:, -2] + 4 * f[:, -3] - f[:, -4]) / h2
        return out

    def ddy(self, f: Field) -> Field:
        """First derivative in y through the chain rule ``f_y = f_s / y_s``."""
        return self.dds(f) / self.y_s

    def ddy2(self, f: Field) -> Field:
        """Second derivative in y, ``f_yy = (f_ss - f_s y_ss / y_s) / y_s**2``."""
        return (self.dds2(f) - self.dds(f) * (self.y_ss / self.y_s)) / self.y_s**2
