"""
测试: TOML 运行配置与轨迹清单模型
运行: python -m pytest tests/test_schemas.py -v
"""

import pytest

from jko_lab.errors import AppError
from jko_lab.schemas.config import RunConfig, TrajectoryManifest, load_run_config


def _write(tmp_path, text):
    path = tmp_path / "run.toml"
    path.write_text(text, encoding="utf-8")
    return path


def test_load_minimal_config(tmp_path):
    """缺省值与 N_list 排序去重。"""
    path = _write(tmp_path, '[problem]\npreset = "heat"\n\n[study]\nN_list = [8, 2, 8]\n')
    config = load_run_config(path)
    assert config.problem.dim == 1
    assert config.problem.rho0 == "cos"
    assert config.solver.ot == "lp"
    assert config.study.N_list == [2, 8]
    assert config.output.binary is False
    assert config.seed == 0


def test_config_hash_stable(tmp_path):
    """相同内容的配置哈希一致，任一值变化则哈希变化。"""
    a = load_run_config(_write(tmp_path, '[problem]\npreset = "heat"\nK = 0.1\n'))
    b = RunConfig.model_validate({"problem": {"preset": "heat", "K": 0.1}})
    c = RunConfig.model_validate({"problem": {"preset": "heat", "K": 0.2}})
    assert a.config_hash() == b.config_hash()
    assert a.config_hash() != c.config_hash()
    assert len(a.config_hash()) == 16


def test_missing_config_file(tmp_path):
    with pytest.raises(AppError) as exc:
        load_run_config(tmp_path / "absent.toml")
    assert exc.value.code == "CONFIG_NOT_FOUND"


@pytest.mark.parametrize(
    "text,key",
    [
        ('[problem]\npreset = "heat"\nK = -1.0\n', "problem.K"),
        ('[problem]\npreset = "heat"\nresolution = 3\n', "problem.resolution"),
        ('[problem]\npreset = "heat"\ncolour = 3\n', "problem.colour"),
        ('[problem]\npreset = "heat"\n[solver]\nname = "newton"\n', "solver.name"),
        ('[problem]\npreset = "heat"\n[study]\nN_list = []\n', "study.N_list"),
    ],
)
def test_invalid_values_name_the_key(tmp_path, text, key):
    """校验失败时错误信息与详情给出出错的配置键。"""
    with pytest.raises(AppError) as exc:
        load_run_config(_write(tmp_path, text))
    assert exc.value.code == "CONFIG_INVALID"
    assert exc.value.exit_code == 1
    assert key in exc.value.message
    assert exc.value.details[0].field == key


def test_problem_requires_source(tmp_path):
    with pytest.raises(AppError) as exc:
        load_run_config(_write(tmp_path, "[problem]\nK = 0.1\n"))
    assert exc.value.code == "CONFIG_INVALID"


def test_malformed_toml(tmp_path):
    with pytest.raises(AppError) as exc:
        load_run_config(_write(tmp_path, "[problem\n"))
    assert exc.value.code == "CONFIG_INVALID"


def test_manifest_rejects_unknown_field():
    payload = {
        "name": "heat",
        "mode": "manufactured",
        "dim": 1,
        "resolution": [8],
        "period": 1.0,
        "K": 0.1,
        "N": 1,
        "h": 0.1,
        "solver": "ma_1d",
        "config_hash": "abc",
        "lambdas": [1.0],
        "steps": [],
    }
    assert TrajectoryManifest.model_validate(payload).partial is False
    with pytest.raises(ValueError):
        TrajectoryManifest.model_validate({**payload, "extra": 1})
