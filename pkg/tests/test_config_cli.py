import csv
import io as _io

import numpy as np
import pytest

from ttdc import cli
from ttdc.config import load_config, parse_config, shipped_config
from ttdc.contraction import ParamDistribution, contract, parameter_specific_advantage
from ttdc.errors import ConfigError
from ttdc.grid import DomainGrid
from ttdc.ttpi import PolicyIterationError, PolicyModel

SMALL_HIT = """\
# small hitting problem
[environment]
name = hit

[grid]
m = param 0.8 2.0 10
mu = param 0.2 0.5 10
x = state -0.6 -0.3 6
y = state -0.15 0.15 6
I_x = action 0.0 4.5 31
I_y = action -1.25 1.25 31

[cross]
eps = 1e-3
r_max = 20
max_sweeps = 6

[ttpi]
seed = 0

[eval]
episodes = 5
seeds = 0
"""


@pytest.fixture
def small_cfg(tmp_path):
    path = tmp_path / "hit.cfg"
    path.write_text(SMALL_HIT)
    return path


@pytest.fixture
def trained(tmp_path, small_cfg):
    out = tmp_path / "model.ttcm"
    assert cli.main(["train", "--config", str(small_cfg), "--out", str(out)]) == 0
    return out


@pytest.mark.parametrize("name", ["hit", "push", "reorientation"])
def test_shipped_configs_parse(name):
    cfg = load_config(shipped_config(name))
    assert cfg.environment.name == name
    assert cfg.seeds == (0, 1, 2) and cfg.episodes == 50
    assert cfg.raw["environment"]["name"] == name


def test_parse_small_config():
    cfg = parse_config(SMALL_HIT, "small")
    g = cfg.grids
    assert g.sizes == (10, 10, 6, 6, 31, 31)
    assert [x.label for x in g.grids] == ["m", "mu", "x", "y", "I_x", "I_y"]
    assert cfg.ttpi.cross.eps == 1e-3 and cfg.ttpi.gamma == 0.0
    assert cfg.episodes == 5 and cfg.seeds == (0,)


@pytest.mark.parametrize("old, new, field, line", [
    ("x = state -0.6 -0.3 6", "x = state -0.6 -0.3 1", "grid.x", 8),
    ("x = state -0.6 -0.3 6", "x = state -0.3 -0.6 6", "grid.x", 8),
    ("x = state -0.6 -0.3 6", "x = stat -0.6 -0.3 6", "grid.x", 8),
    ("x = state -0.6 -0.3 6", "x = state -0.6 6", "grid.x", 8),
    ("x = state -0.6 -0.3 6", "x = state low -0.3 6", "grid.x", 8),
    ("eps = 1e-3", "eps = -1", "cross", 14),
    ("name = hit", "name = juggle", "environment.name", 3),
    ("episodes = 5", "episodes = 0", "eval.episodes", 22),
    ("episodes = 5", "episodes = five", "eval.episodes", 22),
    ("seed = 0\n", "seed = 0\nbogus = 1\n", "ttpi.bogus", 20),
])
def test_errors_name_field_and_line(old, new, field, line):
    with pytest.raises(ConfigError) as info:
        parse_config(SMALL_HIT.replace(old, new), "bad")
    assert info.value.field.startswith(field)
    assert info.value.line == line
    assert f"(line {line})" in str(info.value)


def test_wrong_block_counts_rejected():
    text = SMALL_HIT.replace("mu = param 0.2 0.5 10\n", "")
    with pytest.raises(ConfigError):
        parse_config(text, "bad")


def test_malformed_file():
    with pytest.raises(ConfigError):
        parse_config("name = hit\n", "bad")
    with pytest.raises(ConfigError):
        parse_config("[environment]\nname = hit\n", "bad")


def test_cli_bad_config_exit_code(tmp_path, capsys):
    path = tmp_path / "bad.cfg"
    path.write_text(SMALL_HIT.replace("x = state -0.6 -0.3 6", "x = state -0.6 -0.3 1"))
    assert cli.main(["train", "--config", str(path)]) == 2
    err = capsys.readouterr().err
    assert "grid.x" in err and "n_points" in err and "line 8" in err


def test_cli_missing_files(tmp_path):
    assert cli.main(["train", "--config", str(tmp_path / "none.cfg")]) == 2
    assert cli.main(["contract", str(tmp_path / "none.ttcm")]) == 2
    junk = tmp_path / "junk.ttcm"
    junk.write_bytes(b"not a model")
    assert cli.main(["contract", str(junk)]) == 2


def test_cli_numeric_failure_exit_code(monkeypatch, small_cfg, tmp_path):
    def boom(env, cfg):
        raise PolicyIterationError(4, "value", FloatingPointError("nan"))

    monkeypatch.setattr(cli, "policy_iteration", boom)
    assert cli.main(["train", "--config", str(small_cfg), "--out", str(tmp_path / "m.ttcm")]) == 3


def test_train_is_byte_identical(tmp_path, small_cfg, trained):
    again = tmp_path / "again.ttcm"
    assert cli.main(["train", "--config", str(small_cfg), "--out", str(again)]) == 0
    assert again.read_bytes() == trained.read_bytes()
    model = PolicyModel.load(trained)
    assert model.metadata["config_source"]["environment"]["name"] == "hit"


def test_contract_one_is_slice(tmp_path, trained):
    from ttdc import io

    model = PolicyModel.load(trained)
    out = tmp_path / "c.ttcm"
    assert cli.main(["contract", str(trained), "--center", "1.3,0.41", "--window-w", "1", "--out", str(out)]) == 0
    tt, grids, meta = io.load(out)
    j = [g.nearest_index(np.array([c]))[0] for g, c in zip(model.grids.param_grids, (1.3, 0.41))]
    np.testing.assert_allclose(tt.full(), parameter_specific_advantage(model, j).full(), atol=1e-10)
    assert meta["kind"] == "contracted" and meta["w"] == 1 and meta["center"] == [1.3, 0.41]
    assert grids.sizes == model.grids.sizes[2:]


def test_contract_full_width_ignores_center(tmp_path, trained):
    from ttdc import io

    a, b = tmp_path / "a.ttcm", tmp_path / "b.ttcm"
    assert cli.main(["contract", str(trained), "--center", "0.8,0.2", "--window-w", "10", "--out", str(a)]) == 0
    assert cli.main(["contract", str(trained), "--center", "2.0,0.5", "--window-w", "10", "--out", str(b)]) == 0
    ta, tb = io.load(a)[0], io.load(b)[0]
    np.testing.assert_array_equal(ta.full(), tb.full())
    model = PolicyModel.load(trained)
    want = contract(model, ParamDistribution.uniform((10, 10))).full()
    np.testing.assert_allclose(ta.full(), want, atol=1e-12)


@pytest.mark.parametrize("args", [["--window-w", "0"], ["--window-w", "11"], ["--center", "0.5"],
                                  ["--center", "9,0.3"]])
def test_contract_rejects_bad_window(trained, tmp_path, args):
    assert cli.main(["contract", str(trained), *args, "--out", str(tmp_path / "x.ttcm")]) == 2


def test_contract_rejects_contracted_input(trained, tmp_path):
    out = tmp_path / "c.ttcm"
    assert cli.main(["contract", str(trained), "--out", str(out)]) == 0
    assert cli.main(["contract", str(out), "--out", str(tmp_path / "cc.ttcm")]) == 2


def test_eval_outputs(trained, small_cfg, tmp_path, capsys):
    summary, episodes = tmp_path / "s.csv", tmp_path / "e.csv"
    code = cli.main(["eval", str(trained), "--config", str(small_cfg), "--window-w", "1", "5",
                     "--out", str(summary), "--episodes-out", str(episodes)])
    assert code == 0
    rows = list(csv.DictReader(_io.StringIO(summary.read_text())))
    assert [r["w"] for r in rows] == ["1", "5"]
    assert float(rows[0]["reward_mean"]) == 1.0
    assert len(list(csv.DictReader(_io.StringIO(episodes.read_text())))) == 10
    assert cli.main(["eval", str(trained), "--config", str(small_cfg), "--episodes", "2", "--seed", "4"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("schema,environment,w,seed") and len(out.strip().splitlines()) == 4


def test_eval_rejects_mismatched_config(trained, tmp_path):
    path = tmp_path / "other.cfg"
    path.write_text(SMALL_HIT.replace("x = state -0.6 -0.3 6", "x = state -0.6 -0.3 7"))
    assert cli.main(["eval", str(trained), "--config", str(path)]) == 2


def test_bench_retrieval(trained, tmp_path, capsys):
    out = tmp_path / "bench.csv"
    assert cli.main(["bench-retrieval", str(trained), "--repeats", "3", "--window-w", "5", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "path,mean_s,std_s,repeats"
    assert lines[1].startswith("core-level,") and lines[2].startswith("function-level (dense),")
    assert float(lines[3].split(",")[1]) > 0
    assert capsys.readouterr().out == out.read_text()


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as info:
        cli.main(["frobnicate"])
    assert info.value.code == 2


def test_setting_keys_are_case_insensitive():
    cfg = parse_config(SMALL_HIT.replace("eps = 1e-3", "EPS = 2e-3"), "mixed")
    assert cfg.ttpi.cross.eps == 2e-3
    with pytest.raises(ConfigError):
        parse_config(SMALL_HIT.replace("eps = 1e-3", "eps = 1e-3\nEps = 2e-3"), "dup")


def test_shipped_name_as_config(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert cli._config("hit").environment.name == "hit"
    assert cli.main(["train", "--config", "nonexistent-name"]) == 2
