import pandas as pd
import pytest

import fog_placement
from fog_placement import main, parse_int_list, parse_sizes
from utils.errors import ParameterError
from utils.experiment import RESULT_COLUMNS
from utils.placement import read_placement
from utils.workload import format_experiment_config, read_scenario


@pytest.fixture
def config_file(tmp_path, small_config, monkeypatch):
    for name in ("FOG_PLACEMENT_CONFIG", "FOG_PLACEMENT_OUT_DIR", "FOG_PLACEMENT_WORKERS"):
        monkeypatch.delenv(name, raising=False)
    monkeypatch.setattr(fog_placement, "load_dotenv", lambda: False)
    path = tmp_path / "small.cfg"
    path.write_text(format_experiment_config(small_config))
    return str(path)


def run(config_file, out, *args):
    return main([*args, "--config", config_file, "--out", str(out)])


def test_parse_sizes():
    assert parse_sizes("100x200,110X200") == [(100, 200), (110, 200)]
    with pytest.raises(ParameterError):
        parse_sizes("100-200")
    assert parse_int_list("100,200") == [100, 200]
    with pytest.raises(ParameterError):
        parse_int_list("100,big")


def test_generate_is_reproducible(config_file, tmp_path, capsys):
    assert run(config_file, tmp_path / "a", "generate", "--seed", "3") == 0
    assert run(config_file, tmp_path / "b", "generate", "--seed", "3") == 0
    first = (tmp_path / "a" / "scenario.txt").read_bytes()
    assert first == (tmp_path / "b" / "scenario.txt").read_bytes()
    scenario = read_scenario(str(tmp_path / "a" / "scenario.txt"))
    assert len(scenario.files) == 8 and scenario.rng_seed == 3
    assert "Wrote" in capsys.readouterr().out


@pytest.mark.parametrize("policy", ["replica-aware", "single-file", "fogstore", "cloud"])
def test_place_writes_placement_and_trace(config_file, tmp_path, policy):
    run(config_file, tmp_path, "generate", "--seed", "5")
    scenario = str(tmp_path / "scenario.txt")
    assert run(config_file, tmp_path, "place", "--scenario", scenario, "--policy", policy, "--trace") == 0
    placement = read_placement(str(tmp_path / f"placement_{policy}.txt"))
    assert placement.policy == policy
    assert len(placement.assignments) == 8
    assert (tmp_path / f"trace_{policy}.jsonl").read_text().count("\n") == 1 + 8


def test_eval_writes_results_and_availability(config_file, tmp_path, capsys):
    run(config_file, tmp_path, "generate", "--seed", "6")
    run(config_file, tmp_path, "place", "--scenario", str(tmp_path / "scenario.txt"))
    code = run(config_file, tmp_path, "eval", "--scenario", str(tmp_path / "scenario.txt"),
               "--placement", str(tmp_path / "placement_replica-aware.txt"), "--failures", "0.1", "--masks", "3")
    assert code == 0
    results = pd.read_csv(tmp_path / "results.csv")
    assert list(results.columns) == RESULT_COLUMNS
    assert results.loc[0, "policy"] == "replica-aware"
    assert results.loc[0, "n_devices"] == 30
    assert len(pd.read_csv(tmp_path / "availability.csv")) == 3
    assert "PLACEMENT METRICS" in capsys.readouterr().out


def test_seeds_default_to_the_configuration(small_config, config_file, tmp_path, monkeypatch):
    seeded = tmp_path / "seeded.cfg"
    seeded.write_text(format_experiment_config(small_config.model_copy(update={"rng_seed": 9})))
    policy_seeds, mask_seeds = [], []
    real_policy, real_cell_seed = fog_placement.get_policy, fog_placement.cell_seed
    monkeypatch.setattr(fog_placement, "get_policy",
                        lambda name, seed: policy_seeds.append(seed) or real_policy(name, seed))
    monkeypatch.setattr(fog_placement, "cell_seed",
                        lambda *keys: mask_seeds.append(keys[0]) or real_cell_seed(*keys))

    scenario = str(tmp_path / "scenario.txt")
    placement = str(tmp_path / "placement_fogstore.txt")
    run(str(seeded), tmp_path, "generate")
    run(str(seeded), tmp_path, "place", "--scenario", scenario, "--policy", "fogstore")
    # an explicit zero is a seed like any other
    run(str(seeded), tmp_path, "place", "--scenario", scenario, "--policy", "fogstore", "--seed", "0")
    run(str(seeded), tmp_path, "eval", "--scenario", scenario, "--placement", placement, "--masks", "1")
    run(str(seeded), tmp_path, "eval", "--scenario", scenario, "--placement", placement, "--masks", "1",
        "--seed", "0")
    assert policy_seeds == [9, 0]
    assert mask_seeds == [9, 0]


def test_sweep_outputs_are_byte_identical_on_rerun(config_file, tmp_path):
    args = ("sweep", "--sizes", "8x30", "--repeats", "1", "--masks", "2", "--seed", "1")
    assert run(config_file, tmp_path / "a", *args) == 0
    assert run(config_file, tmp_path / "b", *args) == 0
    for name in ("results.csv", "summary.csv", "improvement.csv", "availability.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    improvement = pd.read_csv(tmp_path / "a" / "improvement.csv")
    assert improvement["n_files"].astype(str).tolist() == ["8", "average"]


def test_sweep_without_fogstore_skips_improvement(config_file, tmp_path):
    code = run(config_file, tmp_path, "sweep", "--sizes", "8x30", "--repeats", "1", "--masks", "0",
               "--policy", "replica-aware", "--policy", "cloud")
    assert code == 0
    assert not (tmp_path / "improvement.csv").exists()
    assert pd.read_csv(tmp_path / "results.csv")["policy"].tolist() == ["replica-aware", "cloud"]


def test_time_prints_growth(config_file, tmp_path, capsys):
    assert run(config_file, tmp_path, "time", "--sizes", "20,30", "--repeats", "1") == 0
    assert len(pd.read_csv(tmp_path / "timing.csv")) == 2
    assert "Growth exponent" in capsys.readouterr().out


class TestErrors:
    def test_missing_scenario_file(self, config_file, tmp_path, capsys):
        code = run(config_file, tmp_path, "eval", "--scenario", str(tmp_path / "none.txt"),
                   "--placement", str(tmp_path / "none.txt"))
        assert code == 1
        assert "Error:" in capsys.readouterr().err

    def test_bad_configuration(self, config_file, tmp_path, capsys):
        bad = tmp_path / "bad.cfg"
        bad.write_text("netSpeed=3\n")
        assert main(["generate", "--config", str(bad), "--out", str(tmp_path)]) == 1
        assert "unknown" in capsys.readouterr().err

    def test_bad_sizes(self, config_file, tmp_path):
        assert run(config_file, tmp_path, "sweep", "--sizes", "eight") == 1

    def test_unknown_policy_is_a_usage_error(self, config_file, tmp_path):
        with pytest.raises(SystemExit):
            run(config_file, tmp_path, "place", "--policy", "random")
