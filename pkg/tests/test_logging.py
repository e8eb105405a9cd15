from typing import TYPE_CHECKING

import pytest

import conormal_mhd as cm
from conormal_mhd._experiments import NormRecord

if TYPE_CHECKING:
    from pytest import LogCaptureFixture


def test_logging(caplog: "LogCaptureFixture") -> None:
    caplog.set_level("DEBUG")

    def rhs(s, forcing=None, wall="no-slip"):
        return cm.viscous_rhs(s, forcing, wall)

    def proc(rec: NormRecord) -> None: ...

    ctx_a = cm.register(solvers={"mine": rhs})
    assert caplog.records[0].message.startswith(
        "Registering solver 'mine': <function test_logging.<locals>.rhs"
    )

    ctx_b = cm.register(processors=[(proc,)])
    assert caplog.records[1].message.startswith(
        "Registering processor of NormRecord: <function test_logging.<locals>.proc"
    )
    assert caplog.records[1].message.endswith("(weight: 0)")

    cm.process(NormRecord("ideal", {}))
    assert [r.message[:40] for r in caplog.records[2:]] == [
        "Invoking processors on NormRecord record",
        "  P: <function test_logging.<locals>.pro",
    ]

    ctx_a.cleanup()
    assert caplog.records[-1].message.startswith(
        "Unregistering solver 'mine': <function test_logging.<locals>.rhs"
    )

    ctx_b.cleanup()
    assert caplog.records[-1].message.startswith(
        "Unregistering processor of NormRecord: <function test_logging.<locals>.proc"
    )


def test_solver_logs_steps(caplog: "LogCaptureFixture", small_grid, params) -> None:
    caplog.set_level("DEBUG", logger="conormal_mhd")
    state = cm.make_initial(small_grid, params, cm.InitialDataSpec(amplitude=0.01))
    cm.Solver(state, "viscous").step(1e-3)
    assert caplog.records[-1].message == "Step 1: t=0.001 dt=1.000e-03"


def test_abort_is_logged(caplog: "LogCaptureFixture", small_grid, params) -> None:
    state = cm.make_initial(small_grid, params, cm.InitialDataSpec(amplitude=0.01))
    solver = cm.Solver(state, "viscous")
    with pytest.raises(cm.SolverAbort):
        for _ in range(20):
            solver.step(10.0)
    errors = [r for r in caplog.records if r.levelname == "ERROR"]
    assert errors
    assert any("density" in r.message or "Non-finite" in r.message for r in errors)
