import csv
import json
import math
import itertools

import numpy as np
import pytest

from conormal_mhd import (
    GridSpec,
    RateFit,
    RunResult,
    SolverAbort,
    SweepFailed,
    fit_rate,
    gap_series,
    read_field_dump,
    run_single,
    run_sweep,
)
from conormal_mhd._config import OutputConfig, SweepSettings
from conormal_mhd._conormal import NORM_COLUMNS
from conormal_mhd._diagnostics import DIAGNOSTIC_COLUMNS, RESIDUALS
from conormal_mhd._experiments import (
    GAP_COLUMNS,
    NormRecord,
    g_max,
    run_name,
    uniformity_ratio,
)


def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_run_name() -> None:
    assert run_name(None) == "ideal"
    assert run_name(0.01) == "eps_0.01"
    assert run_name(1e-3) == "eps_0.001"


def test_run_single_writes_artifacts(tiny_config, tmp_path) -> None:
    out = tmp_path / "eps"
    res = run_single(tiny_config, 0.1, out_dir=out)

    assert res.name == "eps_0.1"
    assert res.report_times == pytest.approx((0.0, 0.02, 0.04))
    assert res.steps > 0
    assert set(res.summary()) == {
        "epsilon",
        "max_N_m",
        "initial_norm",
        "wall_trace_max",
        "div_b_max",
        "steps",
    }

    norms = _read_csv(out / "norms.csv")
    assert tuple(norms[0]) == NORM_COLUMNS
    # one row per order 0..m at each of the two reports
    assert len(norms) == 1 + 2 * 2
    assert [float(r[0]) for r in norms[1:]] == pytest.approx([0.02, 0.02, 0.04, 0.04])

    diags = _read_csv(out / "diagnostics.csv")
    assert tuple(diags[0]) == DIAGNOSTIC_COLUMNS
    names = [r[1] for r in diags[1:]]
    assert names[: len(RESIDUALS) + 2] == [*RESIDUALS, "div_b", "wall_trace"]
    assert len(names) == 2 * (len(RESIDUALS) + 2)

    assert res.max_norm >= res.norm_rows[-1]["N_m"] > 0
    assert res.div_b_max < 1e-10
    assert 0 <= res.wall_trace_max < 1e-2
    assert not (out / "fields").exists()


def test_ideal_run(tiny_config) -> None:
    res = run_single(tiny_config, None)
    assert res.name == "ideal"
    assert res.epsilon is None
    assert res.summary()["epsilon"] is None
    assert math.isfinite(res.max_norm)
    assert len(res.norm_rows) == 4


def test_dump_fields(tiny_config, tmp_path) -> None:
    cfg = tiny_config.replace(output=OutputConfig(dir=str(tmp_path), dump_fields=True))
    res = run_single(cfg, 0.1, out_dir=tmp_path / "run")
    dumps = sorted(p.name for p in (tmp_path / "run" / "fields").iterdir())
    assert dumps == ["t_000000.bin", "t_000002.bin", "t_000004.bin"]
    t, fields = read_field_dump(tmp_path / "run" / "fields" / "t_000004.bin")
    assert t == pytest.approx(0.04)
    np.testing.assert_array_equal(fields["rho"], res.snapshots[-1][1]["rho"])


def test_custom_processor_sees_records(tiny_config, test_store) -> None:
    seen = []

    def on_norm(rec: NormRecord) -> None:
        seen.append((rec.run, rec.row["m"]))

    test_store.register_processor(on_norm)
    res = run_single(tiny_config, 0.05, store=test_store)
    assert seen == [("eps_0.05", 0), ("eps_0.05", 1)] * 2
    assert len(res.norm_rows) == 4


def test_gap_series(tiny_config) -> None:
    visc = run_single(tiny_config, 0.1)
    ideal = run_single(tiny_config, None)
    rows = gap_series(visc, ideal)
    assert [r["time"] for r in rows] == list(visc.report_times)
    assert rows[0]["gap_sup"] == 0.0
    assert rows[0]["gap_dy_sup"] == 0.0
    assert all(r["eps"] == 0.1 for r in rows)
    assert rows[-1]["gap_sup"] > 0
    assert g_max(rows) == max(max(r["gap_sup"], r["gap_dy_sup"]) for r in rows)
    assert g_max([]) == 0.0


def test_gap_series_mismatch() -> None:
    a = RunResult("eps_0.1", 0.1, GridSpec(nx=8, ny=17))
    b = RunResult("ideal", None, GridSpec(nx=16, ny=17))
    with pytest.raises(ValueError, match="different grids"):
        gap_series(a, b)
    a.snapshots.append((0.0, {}))
    with pytest.raises(ValueError, match="different report times"):
        gap_series(a, RunResult("ideal", None, a.grid))


def test_fit_rate() -> None:
    pairs = [(eps, 0.3 * eps**0.5) for eps in (0.1, 0.03, 0.01, 0.003)]
    fit = fit_rate(pairs)
    assert isinstance(fit, RateFit)
    assert fit.q == pytest.approx(0.5)
    assert fit.C == pytest.approx(0.3)
    assert fit.residual == pytest.approx(0.0, abs=1e-12)


def test_fit_rate_errors() -> None:
    with pytest.raises(ValueError, match="at least 3 pairs"):
        fit_rate([(0.1, 1.0), (0.01, 0.5)])
    with pytest.raises(ValueError, match="positive values"):
        fit_rate([(0.1, 1.0), (0.01, 0.0), (0.001, 0.1)])


@pytest.mark.parametrize(
    "maxima, expected",
    [
        ([2.0, 4.0, 8.0], (4.0, "ok")),
        ([3.0, 3.0], (1.0, "ok")),
        ([0.0, 0.0], (1.0, "ok")),
        ([0.0, 1.0], (None, "degenerate")),
    ],
)
def test_uniformity_ratio(maxima, expected) -> None:
    assert uniformity_ratio(maxima) == expected


def test_run_sweep(tiny_config) -> None:
    res = run_sweep(tiny_config)
    root = tiny_config.output_dir
    doc = json.loads((root / "sweep.json").read_text())
    assert doc["status"] == "ok"
    assert set(doc["runs"]) == {"ideal", "eps_0.1", "eps_0.05", "eps_0.02"}
    assert "G_max" in doc["runs"]["eps_0.02"]
    assert doc["uniformity_status"] == "ok"
    assert doc["uniformity_ratio"] == res.uniformity_ratio
    assert doc["rate"]["status"] == res.fit_status == "ok"
    assert doc["rate"]["fit"]["q"] == res.fit.q

    gaps = _read_csv(root / "gaps.csv")
    assert tuple(gaps[0]) == GAP_COLUMNS
    assert len(gaps) == 1 + 3 * 3
    for name in ("ideal", "eps_0.1", "eps_0.05", "eps_0.02"):
        assert (root / name / "norms.csv").exists()
        assert (root / name / "diagnostics.csv").exists()


def test_run_sweep_with_two_members(tiny_config) -> None:
    cfg = tiny_config.replace(sweep=SweepSettings(epsilon_list=(0.1, 0.05)))
    res = run_sweep(cfg)
    assert res.fit is None
    assert res.fit_status == "insufficient"


def test_run_sweep_failure(tiny_config, monkeypatch) -> None:
    import conormal_mhd._experiments as exp

    real = exp.run_single

    def flaky(config, eps=None, **kwargs):
        if eps == 0.05:
            raise SolverAbort("non-positive density", time=0.01, stage=2)
        return real(config, eps, **kwargs)

    monkeypatch.setattr(exp, "run_single", flaky)
    with pytest.raises(SweepFailed) as info:
        run_sweep(tiny_config)
    assert info.value.run == "eps_0.05"
    assert info.value.stage == 2
    doc = json.loads((tiny_config.output_dir / "sweep.json").read_text())
    assert doc["status"] == "failed"
    assert doc["failed_run"] == "eps_0.05"
    assert doc["completed"] == ["eps_0.1", "ideal"]


def test_uniformity_ratio_ignores_order() -> None:
    maxima = [3.0, 0.5, 12.0, 7.25]
    expected = uniformity_ratio(maxima)
    for perm in itertools.permutations(maxima):
        assert uniformity_ratio(perm) == expected


def test_run_sweep_ignores_member_order(tiny_config, tmp_path) -> None:
    forward = run_sweep(tiny_config)
    backward = run_sweep(
        tiny_config.replace(
            sweep=SweepSettings(epsilon_list=(0.02, 0.05, 0.1)),
            output=OutputConfig(dir=str(tmp_path / "backward")),
        )
    )
    assert backward.uniformity_ratio == forward.uniformity_ratio
    assert backward.g_max == forward.g_max
    assert backward.fit == forward.fit
