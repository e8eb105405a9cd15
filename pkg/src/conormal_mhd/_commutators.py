"""Commutators of ``Z2 = phi(y) d/dy`` with ``d/dy``, ``d2/dy2``, ``phi`` and ``1/phi``.

Coefficients are derived symbolically with an abstract weight ``phi(y)`` and
then specialized to ``phi = y / (1 + y)`` for pointwise evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from logging import getLogger
from typing import TYPE_CHECKING, Callable

import numpy as np
import sympy as sp

from ._conormal import apply_zy, phi_weight

if TYPE_CHECKING:
    from collections.abc import Mapping, Sequence

    from ._grid import Field, Grid

logger = getLogger("conormal_mhd")

MAX_ORDER = 3
#: heights excluded from the discrete check at the wall and below the top
WALL_BAND = 1.0
TOP_BAND = 2.0

Y = sp.Symbol("y", nonnegative=True)
PHI = sp.Function("phi")(Y)
PHI_CONCRETE = Y / (1 + Y)
_G = sp.Function("g")(Y)

#: identity name -> coefficient families it uses
IDENTITIES: Mapping[str, tuple[str, ...]] = {
    "dy_left": ("dy_left",),
    "dy_right": ("dy_right",),
    "dy2_left": ("dy2_left_1", "dy2_left_2"),
    "dy2_right": ("dy2_right_1", "dy2_right_2"),
    "phi_inv": ("phi_inv",),
    "phi": ("phi",),
}


def _z(expr: sp.Expr, k: int = 1) -> sp.Expr:
    for _ in range(k):
        expr = PHI * sp.diff(expr, Y)
    return expr


def _jet(expr: sp.Expr, order: int) -> list[sp.Expr]:
    """Coefficients of ``g, g', ..., g^(order)`` in an expression linear in g."""
    q = sp.symbols(f"q0:{order + 1}")
    table: dict[sp.Basic, sp.Basic] = {
        d: q[d.derivative_count]
        for d in expr.atoms(sp.Derivative)
        if d.expr == _G
    }
    table[_G] = q[0]
    flat = sp.expand(expr.xreplace(table))
    return [flat.coeff(q[j]) for j in range(order + 1)]


def _decompose(
    lhs: sp.Expr, basis: Sequence[sp.Expr], order: int
) -> tuple[sp.Expr, ...]:
    """Solve ``lhs = sum_k c_k basis_k`` for coefficients depending on phi only."""
    c = sp.symbols(f"c0:{len(basis)}")
    rhs_jets = [_jet(b, order) for b in basis]
    lhs_jet = _jet(lhs, order)
    eqs = [
        sum(c[k] * rhs_jets[k][j] for k in range(len(basis))) - lhs_jet[j]
        for j in range(order + 1)
    ]
    (solution,) = sp.linsolve(eqs, c)
    if any(s.free_symbols & set(c) for s in solution):
        raise ArithmeticError("commutator expansion is not unique in this basis")
    return tuple(sp.expand(sp.cancel(s)) for s in solution)


@lru_cache(maxsize=None)
def _dy_families(m: int) -> tuple[tuple[sp.Expr, ...], tuple[sp.Expr, ...]]:
    """Left and right coefficients of ``[Z2^m, d/dy]``."""
    lhs = _z(sp.diff(_G, Y), m) - sp.diff(_z(_G, m), Y)
    left = _decompose(lhs, [_z(sp.diff(_G, Y), k) for k in range(m)], m + 1)
    right = _decompose(lhs, [sp.diff(_z(_G, k), Y) for k in range(m)], m + 1)
    return left, right


def _dy2_left(m: int) -> tuple[list[sp.Expr], list[sp.Expr]]:
    # [Z^m, D^2] = [Z^m, D] D + D [Z^m, D], then D Z^k D = Z^k D^2 - [Z^k, D] D
    first = [sp.Integer(0)] * m
    second = [sp.Integer(0)] * m
    c = _dy_families(m)[0]
    for k, ck in enumerate(c):
        second[k] += 2 * ck
        first[k] += sp.diff(ck, Y)
        if k:
            for j, ckj in enumerate(_dy_families(k)[0]):
                second[j] -= ck * ckj
    return [sp.expand(e) for e in first], [sp.expand(e) for e in second]


def _dy2_right(m: int) -> tuple[list[sp.Expr], list[sp.Expr]]:
    # [Z^m, D^2] = D [Z^m, D] + [Z^m, D] D, then Z^k D = D Z^k + [Z^k, D]
    first = [sp.Integer(0)] * m
    second = [sp.Integer(0)] * m
    d = _dy_families(m)[1]
    for k, dk in enumerate(d):
        first[k] += sp.diff(dk, Y)
        second[k] += 2 * dk
        if k:
            for j, dkj in enumerate(_dy_families(k)[1]):
                first[j] += dk * sp.diff(dkj, Y)
                second[j] += dk * dkj
    return [sp.expand(e) for e in first], [sp.expand(e) for e in second]


def _weight_family(m: int, power: int) -> tuple[sp.Expr, ...]:
    """Coefficients of ``[Z2^m, phi**power] f`` in the basis ``Z2^k (phi**power f)``."""
    h = _G
    lhs = _z(h, m) - PHI**power * _z(PHI ** (-power) * h, m)
    return _decompose(lhs, [_z(h, k) for k in range(m)], m)


def _concrete(expr: sp.Expr) -> sp.Expr:
    return sp.simplify(expr.subs(PHI, PHI_CONCRETE).doit())


@dataclass(frozen=True)
class CommutatorTable:
    """Coefficient families of the commutator identities of order `m`.

    `families` maps a family name to ``m`` expressions in ``phi(y)`` and its
    derivatives, indexed by ``k = 0..m-1``.
    """

    m: int
    families: Mapping[str, tuple[sp.Expr, ...]]
    _numeric: dict[tuple[str, int], Callable] = field(
        default_factory=dict, init=False, repr=False, compare=False
    )

    def expression(self, family: str, k: int) -> sp.Expr:
        return self.families[family][k]

    def concrete(self, family: str, k: int) -> sp.Expr:
        """The coefficient with ``phi = y / (1 + y)`` substituted."""
        return _concrete(self.families[family][k])

    def evaluate(self, family: str, k: int, y: np.ndarray | float) -> np.ndarray:
        """Evaluate a coefficient pointwise at `y`."""
        key = (family, k)
        if key not in self._numeric:
            self._numeric[key] = sp.lambdify(Y, self.concrete(family, k), "numpy")
        y = np.asarray(y, dtype=float)
        return np.broadcast_to(np.asarray(self._numeric[key](y), float), y.shape).copy()

    def symbolic_defect(self, identity: str) -> sp.Expr:
        """``LHS - RHS`` of `identity` on an abstract function; zero when exact."""
        m, g = self.m, _G
        D = lambda e: sp.diff(e, Y)  # noqa: E731
        fam = [self.families[f] for f in IDENTITIES[identity]]
        if identity == "dy_left":
            lhs = _z(D(g), m) - D(_z(g, m))
            rhs = sum(fam[0][k] * _z(D(g), k) for k in range(m))
        elif identity == "dy_right":
            lhs = _z(D(g), m) - D(_z(g, m))
            rhs = sum(fam[0][k] * D(_z(g, k)) for k in range(m))
        elif identity == "dy2_left":
            lhs = _z(D(D(g)), m) - D(D(_z(g, m)))
            rhs = sum(
                fam[0][k] * _z(D(g), k) + fam[1][k] * _z(D(D(g)), k) for k in range(m)
            )
        elif identity == "dy2_right":
            lhs = _z(D(D(g)), m) - D(D(_z(g, m)))
            rhs = sum(
                fam[0][k] * D(_z(g, k)) + fam[1][k] * D(D(_z(g, k))) for k in range(m)
            )
        else:
            power = -1 if identity == "phi_inv" else 1
            f = PHI ** (-power) * g
            lhs = _z(PHI**power * f, m) - PHI**power * _z(f, m)
            rhs = sum(fam[0][k] * _z(PHI**power * f, k) for k in range(m))
        return sp.simplify(sp.expand(lhs - rhs))


@lru_cache(maxsize=None)
def commutator_table(m: int) -> CommutatorTable:
    """Build the commutator coefficient table of order `m` (``1 <= m <= 3``).

    Raises
    ------
    ValueError
        If `m` is outside ``1..3``.
    """
    if not 1 <= m <= MAX_ORDER:
        raise ValueError(f"commutator order must lie in 1..{MAX_ORDER}, got {m}")
    left, right = _dy_families(m)
    l1, l2 = _dy2_left(m)
    r1, r2 = _dy2_right(m)
    families = {
        "dy_left": left,
        "dy_right": right,
        "dy2_left_1": tuple(l1),
        "dy2_left_2": tuple(l2),
        "dy2_right_1": tuple(r1),
        "dy2_right_2": tuple(r2),
        "phi_inv": _weight_family(m, -1),
        "phi": _weight_family(m, 1),
    }
    logger.debug("Built commutator table of order %s", m)
    return CommutatorTable(m, families)


# ----------------------------- discrete check --------------------------------


def _zk(grid: Grid, f: Field, k: int) -> Field:
    for _ in range(k):
        f = apply_zy(grid, f)
    return f


def verify_commutator(
    table: CommutatorTable, grid: Grid, f: Field, identity: str = "dy_left"
) -> float:
    """Max-norm of ``LHS - RHS`` of `identity` applied discretely to `f`.

    The weight identities ``phi`` and ``phi_inv`` are applied to ``phi * f`` so
    that ``phi**-1`` of the argument stays smooth. The max-norm is taken over
    ``WALL_BAND <= y <= ymax - TOP_BAND``, a fixed band in y, so that the nested
    one-sided closures never enter it under refinement. Rows within ``m + 2``
    nodes of either end are excluded as well.

    Raises
    ------
    KeyError
        If `identity` is unknown.
    ValueError
        If the strip is too short to hold the checked band.
    """
    if identity not in IDENTITIES:
        raise KeyError(
            f"unknown identity {identity!r}; choose one of {sorted(IDENTITIES)}"
        )
    rows = checked_rows(grid, table.m)
    m = table.m
    phi = phi_weight(grid.y)
    D, D2 = grid.ddy, grid.ddy2
    coeffs = [
        [table.evaluate(name, k, grid.y) for k in range(m)]
        for name in IDENTITIES[identity]
    ]

    if identity in ("dy_left", "dy_right"):
        lhs = _zk(grid, D(f), m) - D(_zk(grid, f, m))
        if identity == "dy_left":
            rhs = sum(coeffs[0][k] * _zk(grid, D(f), k) for k in range(m))
        else:
            rhs = sum(coeffs[0][k] * D(_zk(grid, f, k)) for k in range(m))
    elif identity in ("dy2_left", "dy2_right"):
        lhs = _zk(grid, D2(f), m) - D2(_zk(grid, f, m))
        if identity == "dy2_left":
            rhs = sum(
                coeffs[0][k] * _zk(grid, D(f), k) + coeffs[1][k] * _zk(grid, D2(f), k)
                for k in range(m)
            )
        else:
            rhs = sum(
                coeffs[0][k] * D(_zk(grid, f, k)) + coeffs[1][k] * D2(_zk(grid, f, k))
                for k in range(m)
            )
    else:
        g = phi * f
        if identity == "phi_inv":
            # phi**-1 (phi f) is f itself, including the wall limit
            inner = np.asarray(f, dtype=float)
            outer = np.where(phi > 0, _zk(grid, g, m) / np.where(phi > 0, phi, 1), 0)
            lhs = _zk(grid, inner, m) - outer
        else:
            inner = phi * g
            lhs = _zk(grid, inner, m) - phi * _zk(grid, g, m)
        rhs = sum(coeffs[0][k] * _zk(grid, inner, k) for k in range(m))

    residual = np.abs(lhs - rhs)[:, rows]
    return float(np.max(residual)) if residual.size else 0.0


def checked_rows(grid: Grid, m: int) -> np.ndarray:
    """Row indices used by `verify_commutator` for order `m`."""
    ymax = grid.spec.ymax
    if ymax <= WALL_BAND + TOP_BAND:
        raise ValueError(
            f"the commutator check needs ymax > {WALL_BAND + TOP_BAND}, got {ymax}"
        )
    j = np.arange(grid.ny)
    margin = m + 2
    keep = (
        (grid.y >= WALL_BAND)
        & (grid.y <= ymax - TOP_BAND)
        & (j >= margin)
        & (j < grid.ny - margin)
    )
    return np.nonzero(keep)[0]


def verify_all(table: CommutatorTable, grid: Grid, f: Field) -> dict[str, float]:
    return {name: verify_commutator(table, grid, f, name) for name in IDENTITIES}


def smooth_test_field(grid: Grid) -> Field:
    """``cos(2 pi x / L_x) (1 + y) exp(-y**2 / 4)``."""
    X, Y_ = grid.mesh()
    return np.cos(2 * np.pi * X / grid.spec.length_x) * (1 + Y_) * np.exp(-(Y_**2) / 4)
