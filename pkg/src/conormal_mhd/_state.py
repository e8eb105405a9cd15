from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from logging import getLogger
from pathlib import Path
from types import MappingProxyType
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from collections.abc import Iterator, Mapping

    from ._grid import Field, Grid

logger = getLogger("conormal_mhd")

FIELD_NAMES = ("rho", "v1", "v2", "b1", "b2")
PROFILES = ("standard", "wall")
COEFF_NAMES = ("rho", "v1", "v2", "psi")
DUMP_MAGIC = "MHDC1"


@dataclass(frozen=True)
class PhysicalParams:
    """Viscosity scale and fluid constants.

    ``epsilon = 0`` is accepted for the ideal system only; viscous solvers
    reject it.
    """

    epsilon: float = 1e-2
    mu: float = 1.0
    lambda_: float = 0.0
    gamma: float = 1.4

    def __post_init__(self) -> None:
        if not 0 <= self.epsilon <= 1:
            raise ValueError(f"epsilon must lie in [0, 1], got {self.epsilon}")
        if not self.mu > 0:
            raise ValueError(f"mu must be > 0, got {self.mu}")
        if not self.mu + self.lambda_ > 0:
            raise ValueError(
                f"mu + lambda must be > 0, got {self.mu} + {self.lambda_}"
            )
        if not self.gamma >= 1:
            raise ValueError(f"gamma must be >= 1, got {self.gamma}")

    @property
    def is_ideal(self) -> bool:
        return self.epsilon == 0

    @property
    def longitudinal(self) -> float:
        """The combination ``2 mu + lambda``."""
        return 2 * self.mu + self.lambda_

    def with_epsilon(self, epsilon: float) -> PhysicalParams:
        return dataclasses.replace(self, epsilon=epsilon)


@dataclass(frozen=True)
class State:
    """Density, velocity and magnetic field at one time.

    The arrays are made read-only on construction; a published State never
    changes.
    """

    grid: Grid
    params: PhysicalParams
    rho: Field
    v1: Field
    v2: Field
    b1: Field
    b2: Field
    time: float = 0.0

    def __post_init__(self) -> None:
        for name in FIELD_NAMES:
            arr = getattr(self, name)
            if arr.shape != self.grid.shape:
                raise ValueError(
                    f"field {name!r} has shape {arr.shape}, grid expects "
                    f"{self.grid.shape}"
                )
            arr.flags.writeable = False
        if self.time < 0:
            raise ValueError(f"time must be >= 0, got {self.time}")

    def fields(self) -> Iterator[tuple[str, Field]]:
        for name in FIELD_NAMES:
            yield name, getattr(self, name)

    def replace(self, **changes: object) -> State:
        return dataclasses.replace(self, **changes)  # type: ignore[arg-type]

    @property
    def p(self) -> Field:
        return pressure(self.rho, self.params.gamma)

    @property
    def b2_tilde(self) -> Field:
        return self.b2 - 1.0


@dataclass(frozen=True)
class InitialMode:
    """One Fourier mode of the initial perturbation."""

    kx: int = 1
    profile: str = "standard"
    coeffs: Mapping[str, float] = field(
        default_factory=lambda: MappingProxyType(dict.fromkeys(COEFF_NAMES, 1.0))
    )

    def __post_init__(self) -> None:
        if self.profile not in PROFILES:
            raise ValueError(f"profile must be one of {PROFILES}, got {self.profile!r}")
        unknown = set(self.coeffs) - set(COEFF_NAMES)
        if unknown:
            raise ValueError(f"unknown coefficient(s) {sorted(unknown)}")
        object.__setattr__(self, "coeffs", MappingProxyType(dict(self.coeffs)))


@dataclass(frozen=True)
class InitialDataSpec:
    """Amplitude and modes of the initial perturbation of the background."""

    amplitude: float = 0.0
    modes: tuple[InitialMode, ...] = (InitialMode(),)

    def __post_init__(self) -> None:
        if self.amplitude < 0:
            raise ValueError(f"amplitude must be >= 0, got {self.amplitude}")
        object.__setattr__(self, "modes", tuple(self.modes))


def pressure(rho: Field, gamma: float) -> Field:
    """Return ``rho ** gamma``; the density must be positive."""
    rho = np.asarray(rho, dtype=float)
    if np.any(rho <= 0):
        idx = np.unravel_index(np.argmin(rho), rho.shape)
        raise ValueError(
            f"pressure needs a positive density, found {rho[idx]!r} at {idx}"
        )
    if gamma == 1:
        return rho.copy()
    return rho**gamma


def equilibrium(grid: Grid, params: PhysicalParams) -> State:
    """Background state ``rho = 1, v = 0, B = e_y`` at time 0."""
    return State(
        grid=grid,
        params=params,
        rho=grid.full(1.0),
        v1=grid.zeros(),
        v2=grid.zeros(),
        b1=grid.zeros(),
        b2=grid.full(1.0),
        time=0.0,
    )


def wall_profile(y: Field) -> Field:
    """``y**2 exp(-y)``: vanishes to second order at the wall."""
    return y**2 * np.exp(-y)


def gauss_profile(y: Field) -> Field:
    return np.exp(-(y**2))


def make_initial(
    grid: Grid, params: PhysicalParams, spec: InitialDataSpec
) -> State:
    """Background plus amplitude-scaled smooth perturbations.

    Every mode contributes ``cos(2 pi kx x / L_x) * profile(y)`` to each field.
    The magnetic perturbation comes from a periodic potential ``psi`` as
    ``(ddy psi, -ddx psi)``, so its discrete divergence vanishes to roundoff.
    The wall row carries ``v = 0`` and ``b2 = 1`` exactly.
    """
    if spec.amplitude < 0:
        raise ValueError(f"amplitude must be >= 0, got {spec.amplitude}")
    if spec.amplitude == 0:
        return equilibrium(grid, params)

    X, Y = grid.mesh()
    drho, dv1, dv2, psi = (grid.zeros() for _ in range(4))
    for mode in spec.modes:
        phase = np.cos(2 * np.pi * mode.kx * X / grid.spec.length_x)
        wall = wall_profile(Y)
        rho_shape = gauss_profile(Y) if mode.profile == "standard" else wall
        c = mode.coeffs
        drho += c.get("rho", 0.0) * phase * rho_shape
        dv1 += c.get("v1", 0.0) * phase * wall
        dv2 += c.get("v2", 0.0) * phase * wall
        psi += c.get("psi", 0.0) * phase * wall

    a = spec.amplitude
    rho = 1.0 + a * drho
    v1, v2 = a * dv1, a * dv2
    psi = a * psi
    b1 = grid.ddy(psi)
    b2 = 1.0 - grid.ddx(psi)
    v1[:, 0] = 0.0
    v2[:, 0] = 0.0
    b2[:, 0] = 1.0
    if np.min(rho) <= 0:
        raise ValueError(
            f"amplitude {a} produces a non-positive density (min {np.min(rho)})"
        )
    logger.debug("Initial data: amplitude=%s, %d mode(s)", a, len(spec.modes))
    return State(grid, params, rho, v1, v2, b1, b2, time=0.0)


# ------------------------------ raw field dumps ---------------------------------


def write_field_dump(state: State, path: str | Path) -> Path:
    """Write `state` as an ASCII header line plus little-endian float64 fields.

    The header is ``MHDC1 nx ny time``; the fields follow row-major in the order
    rho, v1, v2, b1, b2.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    nx, ny = state.grid.shape
    header = f"{DUMP_MAGIC} {nx} {ny} {state.time:.17g}\n".encode("ascii")
    payload = np.stack([np.ascontiguousarray(arr) for _, arr in state.fields()])
    with path.open("wb") as fh:
        fh.write(header)
        fh.write(payload.astype("<f8").tobytes(order="C"))
    return path


def read_field_dump(path: str | Path) -> tuple[float, dict[str, Field]]:
    """Read a dump written by `write_field_dump`; returns ``(time, fields)``."""
    raw = Path(path).read_bytes()
    newline = raw.index(b"\n")
    magic, nx, ny, time = raw[:newline].decode("ascii").split()
    if magic != DUMP_MAGIC:
        raise ValueError(f"not a field dump: bad magic {magic!r}")
    shape = (len(FIELD_NAMES), int(nx), int(ny))
    data = np.frombuffer(raw[newline + 1 :], dtype="<f8").reshape(shape)
    return float(time), {n: data[k].copy() for k, n in enumerate(FIELD_NAMES)}
