"""Conormal derivatives, time rings and the weighted energy norms."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from logging import getLogger
from types import MappingProxyType
from typing import TYPE_CHECKING, Callable, Union

import numpy as np

if TYPE_CHECKING:
    from collections.abc import Iterator, Mapping, Sequence

    from numpy.typing import ArrayLike

    from ._grid import Field, Grid
    from ._state import State

    Selector = Union[str, Callable[[State], Field]]

logger = getLogger("conormal_mhd")

DEFAULT_CAPACITY = 5


# ------------------------------- the weight ----------------------------------


def _check_nonnegative(y: ArrayLike) -> np.ndarray:
    arr = np.asarray(y, dtype=float)
    if np.any(arr < 0):
        raise ValueError(
            f"the conormal weight is defined for y >= 0, got {np.min(arr)}"
        )
    return arr


def phi_weight(y: ArrayLike) -> np.ndarray | float:
    """Return ``phi(y) = y / (1 + y)``."""
    arr = _check_nonnegative(y)
    out = arr / (1.0 + arr)
    return float(out) if out.ndim == 0 else out


def phi_prime(y: ArrayLike) -> np.ndarray | float:
    """Return ``phi'(y) = 1 / (1 + y)**2``."""
    arr = _check_nonnegative(y)
    out = 1.0 / (1.0 + arr) ** 2
    return float(out) if out.ndim == 0 else out


# ------------------------------ multi-indices --------------------------------


@dataclass(frozen=True, order=True)
class MultiIndex:
    """Exponents of ``Z0**a0 Z1**a1 Z2**a2``."""

    a0: int = 0
    a1: int = 0
    a2: int = 0

    def __post_init__(self) -> None:
        if min(self.a0, self.a1, self.a2) < 0:
            raise ValueError(f"multi-index entries must be >= 0, got {tuple(self)}")

    def __iter__(self) -> Iterator[int]:
        yield from (self.a0, self.a1, self.a2)

    def __str__(self) -> str:
        return f"({self.a0},{self.a1},{self.a2})"

    @property
    def order(self) -> int:
        return self.a0 + self.a1 + self.a2


def multi_indices(m: int, alpha0_max: int | None = None) -> tuple[MultiIndex, ...]:
    """All multi-indices with ``|alpha| <= m`` and ``a0 <= alpha0_max``.

    Sorted by order, then lexicographically. Negative `m` gives no indices.
    """
    a0_cap = m if alpha0_max is None else min(m, alpha0_max)
    out = [
        MultiIndex(a0, a1, k - a0 - a1)
        for k in range(m + 1)
        for a0 in range(a0_cap + 1)
        for a1 in range(k - a0 + 1)
        if a0 <= k
    ]
    return tuple(sorted(out, key=lambda a: (a.order, a.a0, a.a1, a.a2)))


# -------------------------------- time ring ----------------------------------


class TimeRing:
    """The most recent States at a fixed store spacing.

    Parameters
    ----------
    capacity : int
        Number of retained levels; must be odd so that the ring has a centre.
    rtol : float
        Relative tolerance on the uniformity of the spacing.
    """

    def __init__(self, capacity: int = DEFAULT_CAPACITY, rtol: float = 1e-12) -> None:
        if capacity < 1 or capacity % 2 == 0:
            raise ValueError(
                f"ring capacity must be a positive odd integer, got {capacity}"
            )
        self.capacity = capacity
        self.rtol = rtol
        self._levels: deque[State] = deque(maxlen=capacity)

    @classmethod
    def from_states(
        cls, states: Sequence[State], capacity: int | None = None
    ) -> TimeRing:
        ring = cls(capacity or len(states))
        for s in states:
            ring.push(s)
        return ring

    def __len__(self) -> int:
        return len(self._levels)

    def __iter__(self) -> Iterator[State]:
        return iter(self._levels)

    def __repr__(self) -> str:
        return f"TimeRing(capacity={self.capacity}, times={self.times})"

    def push(self, state: State) -> None:
        """Append `state`, dropping the oldest level when full."""
        if self._levels:
            last = self._levels[-1]
            if state.grid.spec != last.grid.spec:
                raise ValueError("all levels of a TimeRing must share one grid")
            gap = state.time - last.time
            if gap <= 0:
                raise ValueError(
                    f"ring times must increase: got {state.time} after {last.time}"
                )
            if len(self._levels) >= 2:
                ref = last.time - self._levels[-2].time
                if abs(gap - ref) > self.rtol * max(abs(ref), abs(state.time)):
                    raise ValueError(
                        f"non-uniform ring spacing: {gap!r} after {ref!r}"
                    )
        self._levels.append(state)

    def clear(self) -> None:
        self._levels.clear()

    @property
    def states(self) -> tuple[State, ...]:
        return tuple(self._levels)

    @property
    def times(self) -> tuple[float, ...]:
        return tuple(s.time for s in self._levels)

    @property
    def is_full(self) -> bool:
        return len(self._levels) == self.capacity

    @property
    def grid(self) -> Grid:
        if not self._levels:
            raise ValueError("empty TimeRing has no grid")
        return self._levels[0].grid

    @property
    def dt(self) -> float:
        """Store spacing; needs at least two levels."""
        if len(self._levels) < 2:
            raise ValueError("a TimeRing needs 2 levels to define its spacing")
        return (self._levels[-1].time - self._levels[0].time) / (len(self._levels) - 1)

    @property
    def center_index(self) -> int:
        if not self._levels:
            raise ValueError("empty TimeRing has no centre")
        return (len(self._levels) - 1) // 2

    @property
    def center(self) -> State:
        return self._levels[self.center_index]

    @property
    def center_time(self) -> float:
        return self.center.time


# ------------------------------ field selectors ------------------------------


def _p_pert(s: State) -> Field:
    return s.p - 1.0


SELECTORS: Mapping[str, Callable[[State], Field]] = MappingProxyType(
    {
        "rho": lambda s: s.rho,
        "v1": lambda s: s.v1,
        "v2": lambda s: s.v2,
        "b1": lambda s: s.b1,
        "b2": lambda s: s.b2,
        "rho_pert": lambda s: s.rho - 1.0,
        "b2_pert": lambda s: s.b2 - 1.0,
        "p": lambda s: s.p,
        "p_pert": _p_pert,
    }
)


def resolve_selector(selector: Selector) -> Callable[[State], Field]:
    if callable(selector):
        return selector
    try:
        return SELECTORS[selector]
    except KeyError:
        raise KeyError(
            f"unknown field selector {selector!r}; choose one of {sorted(SELECTORS)}"
        ) from None


# ----------------------------- operator algebra ------------------------------


def apply_zy(grid: Grid, f: Field) -> Field:
    """``Z2 f = phi(y) ddy f``; identically zero on the wall row."""
    out = grid.ddy(f) * phi_weight(grid.y)
    out[:, 0] = 0.0
    return out


def time_difference(levels: Sequence[Field], order: int, dt: float) -> Field:
    """Apply the centred difference ``order`` times to ``2 order + 1`` levels."""
    if len(levels) != 2 * order + 1:
        raise ValueError(
            f"need {2 * order + 1} levels for order {order}, got {len(levels)}"
        )
    vals = list(levels)
    for _ in range(order):
        vals = [(vals[n + 1] - vals[n - 1]) / (2 * dt) for n in range(1, len(vals) - 1)]
    return np.array(vals[0], dtype=float)


class ConormalImages:
    """Memoized ``Z^alpha f`` of selected fields over uniformly spaced levels.

    Levels are States (selected by name or callable) or anything a callable
    selector accepts, such as bare arrays.
    """

    def __init__(
        self,
        levels: Sequence[object],
        grid: Grid,
        dt: float | None = None,
        center: int | None = None,
    ) -> None:
        if not levels:
            raise ValueError("cannot evaluate conormal derivatives without levels")
        self.levels = tuple(levels)
        self.grid = grid
        self.dt = dt
        self.center = (len(self.levels) - 1) // 2 if center is None else center
        self._cache: dict[tuple, Field] = {}

    @classmethod
    def from_ring(cls, ring: TimeRing) -> ConormalImages:
        if not len(ring):
            raise ValueError("cannot evaluate conormal derivatives on an empty ring")
        dt = ring.dt if len(ring) > 1 else None
        return cls(ring.states, ring.grid, dt, ring.center_index)

    def spatial(self, selector: Selector, level: int, a1: int, a2: int) -> Field:
        """``Z1**a1 Z2**a2`` of the selected field at `level`."""
        key = (selector, level, a1, a2)
        if key not in self._cache:
            if a1 > 0:
                out = self.grid.ddx(self.spatial(selector, level, a1 - 1, a2))
            elif a2 > 0:
                out = apply_zy(self.grid, self.spatial(selector, level, 0, a2 - 1))
            else:
                fn = resolve_selector(selector)
                s = self.levels[level]
                out = np.asarray(fn(s), float)  # type: ignore[arg-type]
            self._cache[key] = out
        return self._cache[key]

    def apply(
        self, selector: Selector, alpha: MultiIndex, center: int | None = None
    ) -> Field:
        c = self.center if center is None else center
        if c < alpha.a0 or len(self.levels) - 1 - c < alpha.a0:
            raise ValueError(
                f"Z0^{alpha.a0} needs {2 * alpha.a0 + 1} levels around the centre, "
                f"only {len(self.levels)} are stored"
            )
        images = [
            self.spatial(selector, lv, alpha.a1, alpha.a2)
            for lv in range(c - alpha.a0, c + alpha.a0 + 1)
        ]
        if alpha.a0 == 0:
            return images[0]
        assert self.dt is not None
        return time_difference(images, alpha.a0, self.dt)


def apply_multi(ring: TimeRing, selector: Selector, alpha: MultiIndex) -> Field:
    """``Z^alpha`` of the selected field at the ring's centre time.

    ``Z1`` and ``Z2`` act spatially on every needed level (``Z2`` first), then
    ``Z0**a0`` is the ``a0``-fold centred difference in time.

    Raises
    ------
    ValueError
        If the ring holds fewer than ``2 a0 + 1`` levels around its centre.
    """
    return ConormalImages.from_ring(ring).apply(selector, alpha)


# --------------------------------- norms -------------------------------------

#: order offset of each term: alpha ranges over |alpha| <= m - offset
TERM_OFFSETS: Mapping[str, int] = MappingProxyType(
    {
        "l2": 0,
        "kinetic": 0,
        "magnetic": 0,
        "acoustic": 0,
        "normal_1": 1,
        "normal_2": 2,
        "eps_grad": 0,
        "eps_div": 0,
        "eps2_v1:2": 1,
        "eps2_v1:3": 2,
        "eps2_v2:2": 1,
        "eps2_v2:3": 2,
        "layer:1": 1,
        "layer:2": 2,
    }
)
SUP_BLOCKS = ("kinetic", "magnetic", "acoustic")
INTEGRAL_BLOCKS = (
    "normal_1",
    "normal_2",
    "eps_grad",
    "eps_div",
    "eps2_v1",
    "eps2_v2",
)


def block_of(term: str) -> str:
    return term.split(":", 1)[0]


@dataclass(frozen=True)
class NormReport:
    """Squared conormal L2 norms at one time, kept per term and multi-index.

    A term's entries cover ``|alpha| <= m - offset``; `blocks` sums terms into
    named blocks and can truncate to a lower order ``k <= m``.
    """

    time: float
    m: int
    terms: Mapping[str, Mapping[MultiIndex, float]]
    sup: float | None = None
    extra: Mapping[str, float] = field(default_factory=dict)

    def block(self, name: str, k: int | None = None) -> float:
        k = self.m if k is None else k
        total = 0.0
        for term, entries in self.terms.items():
            if block_of(term) != name:
                continue
            limit = k - TERM_OFFSETS[term]
            total += math.fsum(v for a, v in entries.items() if a.order <= limit)
        return total

    def blocks(self, k: int | None = None) -> dict[str, float]:
        names = dict.fromkeys(block_of(t) for t in self.terms)
        return {name: self.block(name, k) for name in names}

    @property
    def per_index(self) -> Mapping[MultiIndex, float]:
        """Entries of the single ``l2`` term (conormal_l2 reports)."""
        return self.terms["l2"]

    @property
    def total(self) -> float:
        """Sum of every block except the instantaneous boundary-layer block."""
        return math.fsum(v for n, v in self.blocks().items() if n != "layer")


def _weighted_sq(grid: Grid, f: Field, weight: Field | float = 1.0) -> float:
    return grid.integrate(weight * f * f)


def conormal_l2(
    ring: TimeRing, selector: Selector, m: int, alpha0_max: int | None = None
) -> NormReport:
    """``||f(t)||_m**2`` at the ring's centre, per multi-index.

    ``alpha0_max`` defaults to the largest time order the ring supports.
    """
    images = ConormalImages.from_ring(ring)
    if alpha0_max is None:
        alpha0_max = (len(ring) - 1) // 2
    entries = {
        a: _weighted_sq(ring.grid, images.apply(selector, a))
        for a in multi_indices(m, alpha0_max)
    }
    sup = math.fsum(
        float(np.max(np.abs(images.apply(selector, a)))) for a in entries
    )
    return NormReport(ring.center_time, m, {"l2": entries}, sup=sup)


def conormal_sup(
    ring: TimeRing, selector: Selector, m: int, alpha0_max: int | None = None
) -> float:
    """``||f||_{m,inf}``: sum over ``|alpha| <= m`` of ``max |Z^alpha f|``."""
    images = ConormalImages.from_ring(ring)
    if alpha0_max is None:
        alpha0_max = (len(ring) - 1) // 2
    return math.fsum(
        float(np.max(np.abs(images.apply(selector, a))))
        for a in multi_indices(m, alpha0_max)
    )


# ---------------------------------- N_m --------------------------------------


def _dy(name: str, order: int) -> Callable[[State], Field]:
    base = resolve_selector(name)

    def sel(s: State) -> Field:
        f = base(s)
        if order == 1:
            return s.grid.ddy(f)
        if order == 2:
            return s.grid.ddy2(f)
        return s.grid.ddy(s.grid.ddy2(f))

    sel.__name__ = f"dy{order}_{name}"
    return sel


def _dx(name: str) -> Callable[[State], Field]:
    base = resolve_selector(name)

    def sel(s: State) -> Field:
        return s.grid.ddx(base(s))

    sel.__name__ = f"dx_{name}"
    return sel


def _div_v(s: State) -> Field:
    return s.grid.ddx(s.v1) + s.grid.ddy(s.v2)


_DY1 = {n: _dy(n, 1) for n in ("v1", "v2", "b1", "p_pert")}
_DY2 = {n: _dy(n, 2) for n in ("v1", "v2", "b1", "p_pert")}
_DY3 = {n: _dy(n, 3) for n in ("v1", "v2")}
_GRAD_V = (_dx("v1"), _DY1["v1"], _dx("v2"), _DY1["v2"])


def energy_Nm(  # noqa: N802
    ring: TimeRing, m: int, alpha0_max: int | None = None
) -> NormReport:
    """Instantaneous contributions of every block of ``N_m`` at the ring centre.

    The ``kinetic``, ``magnetic`` and ``acoustic`` terms are the integrands of
    the sup-in-time blocks; the remaining blocks are the spatial integrands of
    the time-integrated norms. `EnergyAccumulator` turns a sequence of these
    reports into ``N_m(t)``. The ``layer`` block is the instantaneous
    boundary-layer term that accompanies ``N_m`` in the regularity estimate.
    """
    images = ConormalImages.from_ring(ring)
    grid = ring.grid
    state = ring.center
    prm = state.params
    if alpha0_max is None:
        alpha0_max = (len(ring) - 1) // 2
    rho = state.rho
    inv_gp = 1.0 / (prm.gamma * state.p)

    def term(
        offset: int,
        parts: Sequence[tuple[Selector, Field | float]],
        coeff: float = 1.0,
    ) -> dict[MultiIndex, float]:
        indices = multi_indices(m - offset, alpha0_max)
        if coeff == 0:
            return dict.fromkeys(indices, 0.0)
        return {
            a: coeff
            * math.fsum(_weighted_sq(grid, images.apply(sel, a), w) for sel, w in parts)
            for a in indices
        }

    eps, mu, lam = prm.epsilon, prm.mu, prm.lambda_
    normal = ("v1", "v2", "b1", "p_pert")
    terms = {
        "kinetic": term(0, [("v1", rho), ("v2", rho)]),
        "magnetic": term(0, [("b1", 1.0), ("b2_pert", 1.0)]),
        "acoustic": term(0, [("p_pert", inv_gp)]),
        "normal_1": term(1, [(_DY1[n], 1.0) for n in normal]),
        "normal_2": term(2, [(_DY2[n], 1.0) for n in normal]),
        "eps_grad": term(0, [(g, 1.0) for g in _GRAD_V], eps * mu),
        "eps_div": term(0, [(_div_v, 1.0)], eps * (mu + lam)),
        "eps2_v1:2": term(1, [(_DY2["v1"], 1.0)], (eps * mu) ** 2),
        "eps2_v1:3": term(2, [(_DY3["v1"], 1.0)], (eps * mu) ** 2),
        "eps2_v2:2": term(1, [(_DY2["v2"], 1.0)], (eps * prm.longitudinal) ** 2),
        "eps2_v2:3": term(2, [(_DY3["v2"], 1.0)], (eps * prm.longitudinal) ** 2),
        "layer:1": term(
            1, [(_DY1["p_pert"], prm.longitudinal * inv_gp), (_DY1["b1"], mu)], eps
        ),
        "layer:2": term(
            2, [(_DY2["p_pert"], prm.longitudinal * inv_gp), (_DY2["b1"], mu)], eps
        ),
    }
    return NormReport(ring.center_time, m, terms)


class EnergyAccumulator:
    """Running ``N_k(t)``, ``k = 0..m``, from a sequence of `energy_Nm` reports.

    Each multi-index of the sup-in-time blocks keeps the sample at which its
    combined integrand peaked, so kinetic, magnetic and acoustic columns add up
    to ``sup_total``. Time-integrated blocks use the trapezoid rule between
    consecutive samples and are 0 at the first sample.
    """

    def __init__(self, m: int) -> None:
        self.m = m
        self.time: float | None = None
        self._best: dict[MultiIndex, tuple[float, float, float, float]] = {}
        self._integral: dict[str, dict[MultiIndex, float]] = {}
        self._last: NormReport | None = None

    def update(self, report: NormReport) -> None:
        if report.m != self.m:
            raise ValueError(
                f"accumulator of order {self.m} got a report of order {report.m}"
            )
        if self.time is not None and report.time <= self.time:
            raise ValueError(
                f"samples must advance in time: {report.time} after {self.time}"
            )
        kin, mag, ac = (report.terms[b] for b in SUP_BLOCKS)
        for a in kin:
            combined = kin[a] + mag[a] + ac[a]
            if a not in self._best or combined > self._best[a][0]:
                self._best[a] = (combined, kin[a], mag[a], ac[a])

        last = self._last
        for term, entries in report.terms.items():
            if block_of(term) not in INTEGRAL_BLOCKS:
                continue
            acc = self._integral.setdefault(term, dict.fromkeys(entries, 0.0))
            if last is not None:
                h = report.time - last.time
                prev = last.terms[term]
                for a, v in entries.items():
                    acc[a] += 0.5 * h * (prev[a] + v)
        self._last = report
        self.time = report.time

    def _sum(self, term: str, k: int) -> float:
        limit = k - TERM_OFFSETS[term]
        return math.fsum(
            v for a, v in self._integral.get(term, {}).items() if a.order <= limit
        )

    def row(self, k: int | None = None) -> dict[str, float]:
        """Block values of ``N_k`` at the latest sample."""
        k = self.m if k is None else k
        if self._last is None:
            raise ValueError("no samples accumulated yet")
        best = [v for a, v in self._best.items() if a.order <= k]
        row: dict[str, float] = {"time": self._last.time, "m": k}
        for pos, name in enumerate(SUP_BLOCKS, start=1):
            row[name] = math.fsum(b[pos] for b in best)
        for name in INTEGRAL_BLOCKS:
            row[name] = math.fsum(
                self._sum(t, k) for t in TERM_OFFSETS if block_of(t) == name
            )
        row["layer"] = self._last.block("layer", k)
        row["sup_total"] = math.fsum(b[0] for b in best)
        row["integral_total"] = math.fsum(row[n] for n in INTEGRAL_BLOCKS)
        row["N_m"] = row["sup_total"] + row["integral_total"]
        return row

    def rows(self) -> list[dict[str, float]]:
        return [self.row(k) for k in range(self.m + 1)]

    @property
    def value(self) -> float:
        return self.row()["N_m"] if self._last is not None else 0.0


NORM_COLUMNS = (
    "time",
    "m",
    *SUP_BLOCKS,
    *INTEGRAL_BLOCKS,
    "layer",
    "sup_total",
    "integral_total",
    "N_m",
)


def initial_norm(state: State, m: int) -> float:
    """Smallness functional of initial data.

    ``sum_{i=0..2} ||dy^i (rho - 1, v, B - e_y)||_{m-i}**2`` with spatial
    multi-indices only.
    """
    ring = TimeRing(capacity=1)
    ring.push(state)
    images = ConormalImages.from_ring(ring)
    names = ("rho_pert", "v1", "v2", "b1", "b2_pert")
    sels: list[list[Selector]] = [
        list(names),
        [_dy(n, 1) for n in names],
        [_dy(n, 2) for n in names],
    ]
    total = []
    for i, group in enumerate(sels):
        for a in multi_indices(m - i, 0):
            total.extend(_weighted_sq(state.grid, images.apply(s, a)) for s in group)
    return math.fsum(total)
