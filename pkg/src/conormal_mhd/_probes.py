"""Empirical constants of the conormal product and embedding inequalities.

Both probes take time series of fields sampled at a uniform spacing and
return the largest observed ratio of the left-hand side to the right-hand
side. The inequalities only assert that these ratios stay bounded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from logging import getLogger
from typing import TYPE_CHECKING, Callable

import numpy as np

from ._conormal import ConormalImages, MultiIndex, multi_indices, resolve_selector

if TYPE_CHECKING:
    from collections.abc import Sequence

    from ._grid import Field, Grid

logger = getLogger("conormal_mhd")

RHS_FLOOR = 1e-30
SUITE_SEED = 20240917
SUITE_SIZE = 20


def _identity(a: Field) -> Field:
    return a


def _trapezoid(values: Sequence[float], dt: float) -> float:
    if len(values) < 2:
        return 0.0
    return dt * (math.fsum(values) - 0.5 * (values[0] + values[-1]))


def _as_levels(
    levels: Sequence[object], selector: str | Callable | None
) -> list[np.ndarray]:
    if selector is None:
        return [np.asarray(a, dtype=float) for a in levels]
    fn = resolve_selector(selector)
    return [np.asarray(fn(s), dtype=float) for s in levels]  # type: ignore[arg-type]


def _centres(n_levels: int, alpha0_max: int) -> range:
    if n_levels < 2 * alpha0_max + 1:
        raise ValueError(
            f"time order {alpha0_max} needs {2 * alpha0_max + 1} levels, got {n_levels}"
        )
    return range(alpha0_max, n_levels - alpha0_max)


def _splits(m: int, alpha0_max: int) -> list[tuple[MultiIndex, MultiIndex]]:
    out = []
    for a in multi_indices(m, alpha0_max):
        for b in multi_indices(m - a.order, alpha0_max):
            if a.order + b.order == m:
                out.append((a, b))
    return out


def probe_product_inequality(
    grid: Grid,
    f: Sequence[Field],
    g: Sequence[Field],
    m: int,
    dt: float,
    alpha0_max: int = 1,
) -> float:
    """Largest ratio, over splits ``|alpha| + |beta| = m``, of the product bound.

    The left side is ``int ||Z^alpha f Z^beta g||**2 ds``; the right side is
    ``|f|_inf**2 int ||g||_m**2 ds + |g|_inf**2 int ||f||_m**2 ds``. Time integrals
    run over the levels where every needed ``Z0`` is centred.
    """
    if len(f) != len(g):
        raise ValueError(f"f and g have {len(f)} and {len(g)} time levels")
    fi = ConormalImages(f, grid, dt)
    gi = ConormalImages(g, grid, dt)
    centres = _centres(len(f), alpha0_max)
    indices = multi_indices(m, alpha0_max)

    def norm_m(images: ConormalImages) -> float:
        per_time = [
            math.fsum(
                grid.integrate(images.apply(_identity, a, c) ** 2) for a in indices
            )
            for c in centres
        ]
        return _trapezoid(per_time, dt)

    f_inf = max(float(np.max(np.abs(a))) for a in f)
    g_inf = max(float(np.max(np.abs(a))) for a in g)
    rhs = f_inf**2 * norm_m(gi) + g_inf**2 * norm_m(fi)
    ratio = 0.0
    for a, b in _splits(m, alpha0_max):
        lhs = _trapezoid(
            [
                grid.integrate(
                    (fi.apply(_identity, a, c) * gi.apply(_identity, b, c)) ** 2
                )
                for c in centres
            ],
            dt,
        )
        ratio = max(ratio, lhs / max(rhs, RHS_FLOOR))
    return ratio


def probe_embedding(
    grid: Grid,
    levels: Sequence[object],
    dt: float,
    selector: str | Callable | None = None,
    alpha0_max: int = 1,
) -> float:
    """Ratio of ``|f|_inf**2`` to the anisotropic embedding bound.

    The bound is ``||f(0)||_2**2 + ||dy f(0)||_1**2 +
    int (||f||_3**2 + ||dy f||_2**2) ds``; the initial terms use spatial
    multi-indices. `levels` are arrays, or States picked with `selector`.
    """
    f = _as_levels(levels, selector)
    dyf = [grid.ddy(a) for a in f]
    fi = ConormalImages(f, grid, dt)
    di = ConormalImages(dyf, grid, dt)
    centres = _centres(len(f), alpha0_max)

    def spatial_sq(images: ConormalImages, m: int, level: int) -> float:
        return math.fsum(
            grid.integrate(images.apply(_identity, a, level) ** 2)
            for a in multi_indices(m, 0)
        )

    def integral(images: ConormalImages, m: int) -> float:
        idx = multi_indices(m, alpha0_max)
        return _trapezoid(
            [
                math.fsum(
                    grid.integrate(images.apply(_identity, a, c) ** 2) for a in idx
                )
                for c in centres
            ],
            dt,
        )

    lhs = max(float(np.max(np.abs(a))) for a in f) ** 2
    rhs = (
        spatial_sq(fi, 2, 0)
        + spatial_sq(di, 1, 0)
        + integral(fi, 3)
        + integral(di, 2)
    )
    return lhs / max(rhs, RHS_FLOOR)


@dataclass(frozen=True)
class SyntheticSample:
    """A pair of band-limited space-time fields sampled on a time grid."""

    f: tuple[Field, ...]
    g: tuple[Field, ...]
    dt: float


def _band_limited(
    rng: np.random.Generator, grid: Grid, times: np.ndarray
) -> tuple[Field, ...]:
    X, Y = grid.mesh()
    k = rng.integers(0, 4, size=3)
    amp = rng.normal(size=3)
    shift = rng.uniform(0, 2 * np.pi, size=3)
    omega = rng.uniform(0.5, 2.0, size=3)
    width = rng.uniform(1.0, 3.0)
    slope = rng.uniform(-0.5, 0.5)
    profile = (1 + slope * Y) * np.exp(-((Y / width) ** 2))
    out = []
    for t in times:
        total = sum(
            amp[n]
            * np.cos(2 * np.pi * k[n] * X / grid.spec.length_x + shift[n])
            * np.cos(omega[n] * t)
            for n in range(3)
        )
        out.append(total * profile)
    return tuple(out)


def synthetic_suite(
    grid: Grid,
    n_samples: int = SUITE_SIZE,
    seed: int = SUITE_SEED,
    n_times: int = 7,
    dt: float = 0.05,
) -> list[SyntheticSample]:
    """Deterministic suite of smooth ``(f, g)`` pairs for the inequality probes."""
    rng = np.random.default_rng(seed)
    times = dt * np.arange(n_times)
    return [
        SyntheticSample(
            _band_limited(rng, grid, times), _band_limited(rng, grid, times), dt
        )
        for _ in range(n_samples)
    ]


def probe_suite(
    grid: Grid, m: int = 2, n_samples: int = SUITE_SIZE
) -> dict[str, float]:
    """Maxima of both probe ratios over the synthetic suite."""
    product = embedding = 0.0
    for sample in synthetic_suite(grid, n_samples):
        product = max(
            product, probe_product_inequality(grid, sample.f, sample.g, m, sample.dt)
        )
        embedding = max(embedding, probe_embedding(grid, sample.f, sample.dt))
    logger.info("Probe suite: product %.6g, embedding %.6g", product, embedding)
    return {"product": product, "embedding": embedding}
