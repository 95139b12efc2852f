import pytest

from obslab.config import load_config
from obslab.errors import ConfigError


def write(tmp_path, text):
    path = tmp_path / "config.toml"
    path.write_text(text, encoding="utf-8")
    return path


def test_minimal_config_fills_defaults(tmp_path):
    cfg = load_config(write(tmp_path, 'kind = "sweep_noise"\n'))
    assert cfg.kind == "sweep_noise"
    assert cfg.master_seed == 1
    assert cfg.trials == 10
    assert cfg.base.n == 10
    assert cfg.family.test_levels == 50
    assert cfg.sweep.d_noise == (50, 100, 200, 400)
    assert cfg.policy.init_kind == "orthogonal"
    assert cfg.output_dir == "runs"


def test_full_config_round_trip(tmp_path):
    cfg = load_config(write(tmp_path, """
kind = "sweep_depth"
master_seed = 7
trials = 3

[base]
n = 6
a_scale = 0.85

[family]
d_noise = 40
train_levels = 4
test_levels = 11

[sweep]
depths = [1, 2]

[policy]
width = 32
init_scale = 0.4
step_size = 2e-4
max_steps = 500
grad_tol = 1e-5
log_interval = 100

[output]
dir = "out/depth"
"""))
    assert cfg.base.n == 6
    assert cfg.sweep.depths == (1, 2)
    assert cfg.policy.width == 32
    assert cfg.output_dir == "out/depth"
    echoed = cfg.to_dict()
    assert echoed["family"]["d_noise"] == 40
    assert echoed["output"]["dir"] == "out/depth"


def test_missing_file_rejected(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "nope.toml")


def test_parse_error_reported(tmp_path):
    with pytest.raises(ConfigError, match="parse error"):
        load_config(write(tmp_path, "kind = [unterminated\n"))


def test_unknown_key_rejected_with_name(tmp_path):
    with pytest.raises(ConfigError, match="lerning_rate"):
        load_config(write(tmp_path, """
kind = "sweep_noise"
[policy]
lerning_rate = 0.1
"""))


def test_unknown_section_rejected(tmp_path):
    with pytest.raises(ConfigError, match="plotting"):
        load_config(write(tmp_path, """
kind = "sweep_noise"
[plotting]
dpi = 300
"""))


def test_missing_kind_rejected(tmp_path):
    with pytest.raises(ConfigError, match="kind"):
        load_config(write(tmp_path, "master_seed = 3\n"))


def test_noise_arm_below_state_dim_rejected(tmp_path):
    with pytest.raises(ConfigError, match=r"sweep\.d_noise"):
        load_config(write(tmp_path, """
kind = "sweep_noise"
[base]
n = 10
[sweep]
d_noise = [5, 100]
"""))


def test_family_noise_below_state_dim_rejected(tmp_path):
    with pytest.raises(ConfigError, match=r"family\.d_noise"):
        load_config(write(tmp_path, """
kind = "sweep_depth"
[base]
n = 10
[family]
d_noise = 5
"""))


def test_wrong_type_reported_with_field(tmp_path):
    with pytest.raises(ConfigError, match=r"policy\.max_steps"):
        load_config(write(tmp_path, """
kind = "sweep_noise"
[policy]
max_steps = "many"
"""))


def test_nonpositive_step_size_rejected(tmp_path):
    with pytest.raises(ConfigError, match=r"policy\.step_size"):
        load_config(write(tmp_path, """
kind = "sweep_noise"
[policy]
step_size = 0.0
"""))


def test_theorem_grid_divisibility_checked(tmp_path):
    with pytest.raises(ConfigError, match=r"theorem\.p"):
        load_config(write(tmp_path, """
kind = "verify_theorem"
[theorem]
n = [3]
p = [10]
m = [1]
"""))
    with pytest.raises(ConfigError, match=r"theorem\.m"):
        load_config(write(tmp_path, """
kind = "verify_theorem"
[theorem]
n = [5]
p = [50]
m = [11]
"""))


def test_measures_report_requires_stack_path(tmp_path):
    with pytest.raises(ConfigError, match=r"measures\.stack_path"):
        load_config(write(tmp_path, 'kind = "measures_report"\n'))


def test_bad_kind_rejected(tmp_path):
    with pytest.raises(ConfigError, match="kind"):
        load_config(write(tmp_path, 'kind = "sweep_everything"\n'))


def test_empty_arm_list_rejected(tmp_path):
    with pytest.raises(ConfigError, match=r"sweep\.depths"):
        load_config(write(tmp_path, """
kind = "sweep_depth"
[sweep]
depths = []
"""))
