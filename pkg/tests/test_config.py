from pathlib import Path

import pytest

from config import (
    PRESETS,
    ExperimentSpec,
    SimulatorConfig,
    apply_preset,
    config,
    load_config_file,
    resolve_output_dir,
    validate_config,
)
from errors import ConfigError, ParseError, RangeError

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def test_empty_file_gives_the_defaults():
    spec = validate_config("")
    assert spec == ExperimentSpec(instance_params=spec.instance_params)
    assert spec.combinations() == [("complete", 5, 1e-5)]
    assert spec.instance_params["lipschitz_box"] == 2.0


def test_exponent_floats_are_numbers():
    spec = validate_config("algorithm:\n  gamma: [1e-5, 1e-6]\n  beta: 1e-1\n")
    assert spec.gammas == (1e-5, 1e-6)
    assert spec.beta == 0.1


def test_sweep_order_is_m_then_topology_then_gamma():
    spec = validate_config("network:\n  topology: [ring, complete]\n  m: [1, 5]\nalgorithm:\n  gamma: [0.1, 0.2]\n")
    assert spec.combinations() == [
        ("ring", 1, 0.1), ("ring", 1, 0.2), ("complete", 1, 0.1), ("complete", 1, 0.2),
        ("ring", 5, 0.1), ("ring", 5, 0.2), ("complete", 5, 0.1), ("complete", 5, 0.2),
    ]


def test_scalars_are_accepted_for_list_keys():
    spec = validate_config("network:\n  topology: ring\n  m: 10\n")
    assert spec.topologies == ("ring",) and spec.m_values == (10,)


def test_unknown_section_reports_its_line():
    with pytest.raises(ParseError) as info:
        validate_config("instance:\n  name: benchmark\nwidgets:\n  a: 1\n")
    assert info.value.field == "widgets"
    assert info.value.line == 3


def test_unknown_key_reports_its_line():
    with pytest.raises(ParseError) as info:
        validate_config("network:\n  m: [5]\n  colour: red\n")
    assert info.value.field == "network.colour"
    assert info.value.line == 3
    assert "line 3" in str(info.value)


@pytest.mark.parametrize("text", ["network: [1, 2", "- 1\n- 2\n", "network: 5\n"])
def test_malformed_files(text):
    with pytest.raises(ParseError):
        validate_config(text)


@pytest.mark.parametrize("text, field", [
    ("algorithm:\n  K: abc\n", "K"),
    ("algorithm:\n  K: 2.5\n", "K"),
    ("algorithm:\n  warm_start: 3\n", "warm_start"),
    ("algorithm:\n  inner_budget: 2.5\n", "inner_budget"),
    ("network:\n  m: [5, x]\n", "m_values"),
])
def test_unreadable_values(text, field):
    with pytest.raises(ParseError) as info:
        validate_config(text)
    assert info.value.field == field


@pytest.mark.parametrize("text, field", [
    ("algorithm:\n  gamma: [-1.0]\n", "gamma"),
    ("network:\n  m: [0]\n", "m"),
    ("network:\n  topology: [torus]\n", "topology"),
    ("network:\n  topology: [custom]\n", "edge_list"),
    ("algorithm:\n  eta: 0\n", "eta"),
    ("algorithm:\n  gamma_rule: adaptive\n", "gamma_rule"),
    ("algorithm:\n  inner_budget: 0\n", "inner_budget"),
    ("instance:\n  name: lasso\n", "instance"),
    ("noise:\n  zeta_std: -0.1\n", "zeta_std"),
    ("output:\n  parallel: 0\n", "parallel"),
    ("network:\n  weights: hamming\n", "weights"),
    ("network:\n  laplacian_scale: 0\n", "laplacian_scale"),
    ("network:\n  laplacian_scale: 1.5\n", "laplacian_scale"),
])
def test_out_of_range_values(text, field):
    with pytest.raises(RangeError) as info:
        validate_config(text)
    assert info.value.field == field
    assert isinstance(info.value, ConfigError)


def test_fixed_inner_budget():
    assert validate_config("algorithm:\n  inner_budget: 50\n").inner_budget == 50
    assert validate_config("algorithm:\n  inner_budget: 5e1\n").inner_budget == 50
    assert validate_config("").inner_budget == "sqrt"


def test_bad_inner_budget_names_its_own_key():
    with pytest.raises(ParseError) as info:
        validate_config("algorithm:\n  inner_budget: abc\n")
    assert info.value.field == "inner_budget"
    assert info.value.line == 2


def test_presets_update_a_private_config():
    target = SimulatorConfig()
    assert apply_preset("desk_smoke", target=target)
    assert target.network_settings["m"] == [1, 3]
    assert config.network_settings["m"] == [5]
    assert not apply_preset("nonexistent", target=target)


def test_file_values_override_the_preset():
    base = SimulatorConfig()
    apply_preset("benchmark_sweep", target=base)
    spec = validate_config("algorithm:\n  K: 7\n", base=base)
    assert spec.K == 7
    assert spec.gammas == (1e-5, 1e-6)
    assert len(spec.combinations()) == 24


def test_every_preset_validates():
    for name in PRESETS:
        base = SimulatorConfig()
        apply_preset(name, target=base)
        validate_config("", base=base)


def test_shipped_config_files_validate():
    files = sorted(CONFIG_DIR.glob("*.yaml"))
    assert files
    for path in files:
        load_config_file(path)
    sweep = load_config_file(CONFIG_DIR / "benchmark_sweep.yaml")
    assert len(sweep.combinations()) == 24 and sweep.seed == 2024
    assert sweep.topology_params()["weights"] == "laplacian"
    assert sweep.topology_params()["laplacian_scale"] == 0.05


def test_output_directory_precedence(monkeypatch):
    spec = validate_config("output:\n  directory: from_file\n")
    monkeypatch.setenv("SMPEC_OUTPUT_DIR", "from_env")
    assert resolve_output_dir(spec, "from_cli") == "from_cli"
    assert resolve_output_dir(spec) == "from_env"
    monkeypatch.delenv("SMPEC_OUTPUT_DIR")
    monkeypatch.setattr("config.load_dotenv", lambda *args, **kwargs: False)
    assert resolve_output_dir(spec) == "from_file"


def test_output_paths(tmp_path):
    settings = SimulatorConfig()
    assert settings.get_output_path("summary.csv", str(tmp_path)) == str(tmp_path / "summary.csv")
    created = settings.ensure_directories(str(tmp_path / "nested" / "dir"))
    assert Path(created).is_dir()
