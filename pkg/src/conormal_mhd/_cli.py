"""Command-line entry point: ``conormal-mhd <command> [options]``.

Exit codes: 0 success, 1 configuration or validation failure, 2 solver abort.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from logging import getLogger
from typing import TYPE_CHECKING, Any, NoReturn

import numpy as np

from ._commutators import (
    MAX_ORDER,
    commutator_table,
    smooth_test_field,
    verify_all,
)
from ._config import SweepConfig, parse_config, reference_config
from ._conormal import phi_prime
from ._dynamics import SolverAbort
from ._experiments import run_name, run_single, run_sweep
from ._grid import Grid
from ._mms import ORDER_RANGE, run_mms
from ._probes import probe_suite
from ._util import dump_json, format_float

if TYPE_CHECKING:
    from collections.abc import Sequence

logger = getLogger("conormal_mhd")

EXIT_OK, EXIT_INVALID, EXIT_ABORT = 0, 1, 2
COMMUTATOR_DECAY = (3.2, 4.8)
OPERATOR_MIN_ORDER = 1.8
PROBE_DRIFT = 1.5
RESIDUAL_FLOOR = 1e-12


def _table(rows: Sequence[Sequence[Any]], header: Sequence[str]) -> str:
    cells = [list(header)] + [
        [format_float(c) if isinstance(c, float) else str(c) for c in r] for r in rows
    ]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    return "\n".join(
        "  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in cells
    )


# ---------------------------------- verify ------------------------------------


Check = tuple[str, float, float, float, bool]


def _operator_checks(base: Grid, fine: Grid) -> list[Check]:
    def errors(g: Grid) -> dict[str, float]:
        X, Y = g.mesh()
        k = 2 * np.pi / g.spec.length_x
        f = np.sin(k * X) * np.exp(-Y / 2)
        return {
            "ddx": float(np.max(np.abs(g.ddx(f) - k * np.cos(k * X) * np.exp(-Y / 2)))),
            "ddx2": float(np.max(np.abs(g.ddx2(f) + k**2 * f))),
            "ddy": float(np.max(np.abs(g.ddy(f) + f / 2))),
            "ddy2": float(np.max(np.abs(g.ddy2(f) - f / 4))),
        }

    e0, e1 = errors(base), errors(fine)
    out = []
    for name in e0:
        if e0[name] > 0 and e1[name] > 0:
            order = math.log2(e0[name] / e1[name])
        else:
            order = math.inf
        ok = order >= OPERATOR_MIN_ORDER
        out.append((f"operator {name}", e0[name], e1[name], order, ok))
    return out


def _commutator_checks(base: Grid, fine: Grid) -> list[Check]:
    out = []
    f0, f1 = smooth_test_field(base), smooth_test_field(fine)
    for m in range(1, MAX_ORDER + 1):
        table = commutator_table(m)
        r0, r1 = verify_all(table, base, f0), verify_all(table, fine, f1)
        for name in r0:
            ratio = r0[name] / r1[name] if r1[name] > 0 else math.inf
            ok = r0[name] <= RESIDUAL_FLOOR or (
                COMMUTATOR_DECAY[0] <= ratio <= COMMUTATOR_DECAY[1]
            )
            out.append((f"commutator m={m} {name}", r0[name], r1[name], ratio, ok))
    coeff = commutator_table(1).evaluate("dy_left", 0, base.y)
    defect = float(np.max(np.abs(coeff + phi_prime(base.y))))
    out.append(("coefficient m=1 = -phi'", defect, defect, 1.0, defect <= 1e-12))
    return out


def _probe_checks(base: Grid, fine: Grid, m: int) -> list[Check]:
    p0, p1 = probe_suite(base, max(m, 1)), probe_suite(fine, max(m, 1))
    out = []
    for name in p0:
        ratio = p1[name] / p0[name] if p0[name] > 0 else 1.0
        ok = math.isfinite(p1[name]) and 1 / PROBE_DRIFT <= ratio <= PROBE_DRIFT
        out.append((f"probe {name}", p0[name], p1[name], ratio, ok))
    return out


def verify(config: SweepConfig) -> bool:
    """Run every structural check on the configured grid and its refinement."""
    base, fine = Grid(config.grid), Grid(config.grid.refined())
    rows = [
        *_operator_checks(base, fine),
        *_commutator_checks(base, fine),
        *_probe_checks(base, fine, config.m),
    ]
    print(
        _table(
            [(n, a, b, r, "ok" if ok else "FAIL") for n, a, b, r, ok in rows],
            ("check", "base", "refined", "ratio", "status"),
        )
    )
    return all(r[-1] for r in rows)


# ---------------------------------- commands ----------------------------------


def _cmd_run(args: argparse.Namespace) -> int:
    config = parse_config(args.config)
    eps = None if args.ideal else args.epsilon
    if eps is not None:
        config.physics.params(eps)  # validates the range
    result = run_single(config, eps, out_dir=config.output_dir / run_name(eps))
    sys.stdout.write(dump_json(result.summary()))
    return EXIT_OK


def _cmd_sweep(args: argparse.Namespace) -> int:
    config = parse_config(args.config)
    result = run_sweep(config)
    doc = result.to_dict()
    doc.pop("config")
    sys.stdout.write(dump_json(doc))
    return EXIT_OK


def _cmd_verify(args: argparse.Namespace) -> int:
    return EXIT_OK if verify(parse_config(args.config)) else EXIT_INVALID


def _cmd_mms(args: argparse.Namespace) -> int:
    config = parse_config(args.config)
    models = ("viscous", "ideal") if args.model == "both" else (args.model,)
    ok = True
    for model in models:
        wall = config.physics.ideal_wall if model == "ideal" else None
        res = run_mms(
            config.grid,
            config.physics.params(args.epsilon),
            levels=args.levels,
            horizon=args.horizon,
            model=model,
            wall=wall,
            control=config.time.control,
        )
        rows = [
            (f"{model} {spec.nx}x{spec.ny}", *(err[n] for n in err))
            for spec, err in zip(res.grids, res.errors)
        ]
        rows += [
            (f"{model} order {k}->{k + 1}", *(o[n] for n in o))
            for k, o in enumerate(res.orders)
        ]
        print(_table(rows, ("level", *res.errors[0])))
        passed = res.passed()
        print(f"{model}: {'ok' if passed else 'FAIL'} (orders in {list(ORDER_RANGE)})")
        ok = ok and passed
    return EXIT_OK if ok else EXIT_INVALID


def _cmd_reference(args: argparse.Namespace) -> int:
    sys.stdout.write(dump_json(reference_config()))
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with EXIT_INVALID; 2 is reserved for solver aborts."""

    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG"
    )
    with_config = argparse.ArgumentParser(add_help=False, parents=[common])
    with_config.add_argument(
        "--config", required=True, help="JSON configuration file, '-' for stdin"
    )

    parser = _Parser(
        prog="conormal-mhd",
        description="Viscous and ideal 2D MHD near a wall, measured in conormal norms.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", parents=[with_config], help="one viscous or ideal run")
    which = run.add_mutually_exclusive_group(required=True)
    which.add_argument("--epsilon", type=float, help="viscosity scale of the run")
    which.add_argument("--ideal", action="store_true", help="run the ideal system")
    run.set_defaults(func=_cmd_run)

    sweep = sub.add_parser("sweep", parents=[with_config], help="epsilon sweep")
    sweep.set_defaults(func=_cmd_sweep)

    ver = sub.add_parser(
        "verify",
        parents=[with_config],
        help="commutator identities, inequality probes and operator orders",
    )
    ver.set_defaults(func=_cmd_verify)

    mms = sub.add_parser(
        "mms", parents=[with_config], help="manufactured-solution convergence study"
    )
    mms.add_argument("--levels", type=int, default=3, help="number of grids")
    mms.add_argument("--epsilon", type=float, default=1e-2, help="viscous epsilon")
    mms.add_argument("--horizon", type=float, default=0.2, help="final time")
    mms.add_argument(
        "--model", choices=("viscous", "ideal", "both"), default="both"
    )
    mms.set_defaults(func=_cmd_mms)

    ref = sub.add_parser(
        "reference-config", parents=[common], help="print the default configuration"
    )
    ref.set_defaults(func=_cmd_reference)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = {0: logging.WARNING, 1: logging.INFO}.get(args.verbose, logging.DEBUG)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return int(args.func(args))
    except SolverAbort as e:
        logger.error("Solver aborted: %s", e)
        print(f"error: solver aborted: {e}", file=sys.stderr)
        return EXIT_ABORT
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
