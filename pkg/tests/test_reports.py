"""
测试: CSV/JSON 产物与轨迹目录读写
运行: python -m pytest tests/test_reports.py -v
"""

import json

import numpy as np
import pytest

from jko_lab.errors import AppError
from jko_lab.services.estimates import EstimateReport, _make_record
from jko_lab.services.jko import run_flow
from jko_lab.services.reports import (
    STEPS_HEADER,
    dump_trajectory,
    format_csv,
    load_trajectory,
    read_manifest,
    report_summary,
    steps_rows,
    write_report_csv,
)


def test_format_csv_header_and_cells():
    """首行为配置哈希，浮点按 .17g，布尔为 true/false，含逗号的文本加引号。"""
    text = format_csv("abc123", ["a[-]", "b"], [[0.1, True], ["x,y", 3]])
    lines = text.splitlines()
    assert lines[0] == "# config_hash=abc123"
    assert lines[1] == "a[-],b"
    assert lines[2] == "0.10000000000000001,true"
    assert lines[3] == '"x,y",3'


def test_report_csv_and_summary(tmp_path):
    report = EstimateReport(
        records=[
            _make_record("ok", 1, 0.0, 1.0, 0.1),
            _make_record("bad", 1, 2.0, 1.0, 0.1),
            _make_record("info", 1, 2.0, 1.0, 0.1, guaranteed=False),
        ],
        constants={"C": 2.0},
        flags={"K_admissible": True},
    )
    write_report_csv(tmp_path / "estimates.csv", report, "h1")
    lines = (tmp_path / "estimates.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0] == "# config_hash=h1"
    assert len(lines) == 5
    summary = report_summary(report)
    assert summary["all_guaranteed_pass"] is False
    assert [item["name"] for item in summary["guaranteed_failures"]] == ["bad"]
    assert [item["name"] for item in summary["informational_failures"]] == ["info"]
    json.dumps(summary)


def test_steps_rows(heat_spec):
    traj = run_flow(heat_spec)
    rows = steps_rows(traj)
    assert len(rows) == heat_spec.N
    assert len(rows[0]) == len(STEPS_HEADER)
    assert rows[-1][1] == pytest.approx(heat_spec.K)


@pytest.mark.parametrize("binary", [False, True])
def test_trajectory_dump_and_load(tmp_path, heat_spec, binary):
    """写出再读回的轨迹: 密度一致，λ 与代价保留。"""
    spec = heat_spec.with_rho0(heat_spec.rho0, N=2, K=2 * heat_spec.h)
    traj = run_flow(spec)
    manifest = dump_trajectory(traj, tmp_path / "trajectory", "hash0", binary=binary)
    assert manifest.partial is False
    suffix = ".bin" if binary else ".txt"
    assert (tmp_path / "trajectory" / f"rho_0002{suffix}").is_file()
    loaded = load_trajectory(tmp_path / "trajectory")
    assert loaded.complete
    assert len(loaded.densities) == 3
    for a, b in zip(loaded.densities, traj.densities):
        assert np.array_equal(a.values, b.values)
    assert loaded.lambdas == pytest.approx(traj.lambdas, rel=1e-12)
    assert [s.transport.cost for s in loaded.steps] == [s.transport.cost for s in traj.steps]
    assert read_manifest(tmp_path / "trajectory").config_hash == "hash0"


def test_partial_trajectory_roundtrip(tmp_path, fokker_planck_spec):
    spec = fokker_planck_spec.with_rho0(fokker_planck_spec.rho0, K=0.2, N=2)
    traj = run_flow(spec)
    manifest = dump_trajectory(traj, tmp_path / "t", "h")
    assert manifest.partial is True
    assert manifest.failure["code"] == "MAP_NOT_INJECTIVE"
    loaded = load_trajectory(tmp_path / "t")
    assert not loaded.complete
    assert loaded.failure.field == "step[1]"
    assert loaded.cap_violations == [0]


def test_load_trajectory_errors(tmp_path, heat_spec):
    with pytest.raises(AppError) as exc:
        load_trajectory(tmp_path / "missing")
    assert exc.value.code == "TRAJECTORY_NOT_FOUND"
    traj = run_flow(heat_spec.with_rho0(heat_spec.rho0, N=1, K=heat_spec.h))
    dump_trajectory(traj, tmp_path / "t", "h")
    (tmp_path / "t" / "rho_0001.txt").unlink()
    with pytest.raises(AppError) as exc:
        load_trajectory(tmp_path / "t")
    assert exc.value.code == "TRAJECTORY_INVALID"
    (tmp_path / "t" / "manifest.json").write_text("{}", encoding="utf-8")
    with pytest.raises(AppError) as exc:
        read_manifest(tmp_path / "t")
    assert exc.value.code == "TRAJECTORY_INVALID"
