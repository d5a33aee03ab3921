import pytest

from config import CONFIG_ENV, OUT_ENV, config_hash, load_run_config
from errors import ConfigError
from models import DayOfWeek

TOML = """
seed = 9

[paths]
out_dir = "from_file"

[data]
periods = 6
split = [10, 5, 5]

[[buildings]]
name = "office_2"

[training.tree]
min_leaf = 3

[schedule]
target_day_of_week = "fri"
"""


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text(TOML, encoding="utf-8")
    return str(path)


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    monkeypatch.delenv(CONFIG_ENV, raising=False)
    monkeypatch.delenv(OUT_ENV, raising=False)


def test_defaults_without_file():
    config = load_run_config()
    assert config.seed == 1
    assert [b.name for b in config.buildings] == ["office_1", "office_2", "supermarket"]
    assert config.training.alpha == 0.05


def test_file_values_are_read(config_file):
    config = load_run_config(config_file)
    assert config.seed == 9
    assert config.data.periods == 6
    assert config.training.tree.min_leaf == 3
    assert config.schedule.target_day_of_week is DayOfWeek.FRI
    assert config.buildings[0].plant_config().hvac_capacity_kw == 8.0


def test_precedence(config_file, monkeypatch):
    monkeypatch.setenv(CONFIG_ENV, config_file)
    monkeypatch.setenv(OUT_ENV, "from_env")
    assert load_run_config().paths.out_dir == "from_env"
    config = load_run_config(seed=4, out_dir="from_cli")
    assert config.paths.out_dir == "from_cli"
    assert config.seed == 4


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_run_config(str(tmp_path / "absent.toml"))


def test_unparseable_file(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text("seed = = 1\n", encoding="utf-8")
    with pytest.raises(ConfigError, match="cannot parse"):
        load_run_config(str(path))


def test_duplicate_building_names(tmp_path):
    path = tmp_path / "dup.json"
    path.write_text('{"buildings": [{"name": "a", "preset": "office_1"}, {"name": "a", "preset": "office_2"}]}')
    with pytest.raises(ConfigError, match="unique"):
        load_run_config(str(path))


def test_missing_wind_file(tmp_path):
    path = tmp_path / "wind.json"
    path.write_text('{"paths": {"wind_csv": "%s"}}' % (tmp_path / "absent.csv"))
    with pytest.raises(ConfigError, match="wind scenario file"):
        load_run_config(str(path))


def test_config_hash_tracks_content(config_file):
    first = load_run_config(config_file)
    assert config_hash(first) == config_hash(load_run_config(config_file))
    assert config_hash(first) != config_hash(load_run_config(config_file, seed=10))
