import json

import pytest

from app import main
from datastore import read_report
from errors import EXIT_OK, EXIT_VALIDATION

SMALL_RUN = {
    "seed": 3,
    "data": {"periods": 4, "split": [28, 10, 10]},
    "buildings": [{"name": "office_1"}, {"name": "office_2"}],
    "training": {
        "cluster_candidates": [1, 2],
        "beta_grid_size": 5,
        "selection_beta_grid_size": 4,
        "kmeans_restarts": 2,
        "alpha": 0.2,
        "tree": {"max_depth": 3, "min_leaf": 2},
    },
    "schedule": {
        "buildings": 3,
        "v_grid": [0.0, 2.0],
        "alpha_grid": [0.1, 0.2],
        "wind_scenarios": 4,
        "noise_scenarios": 2,
        "timing_buildings": [1, 2],
    },
}


def write_config(tmp_path, overrides=None):
    config = json.loads(json.dumps(SMALL_RUN))
    config["paths"] = {"out_dir": str(tmp_path / "out")}
    for key, value in (overrides or {}).items():
        config[key] = value
    path = tmp_path / "run.json"
    path.write_text(json.dumps(config), encoding="utf-8")
    return str(path)


@pytest.mark.slow
def test_full_pipeline(tmp_path):
    config = write_config(tmp_path)
    out = tmp_path / "out"
    for command in ("generate-data", "train", "validate", "report"):
        assert main([command, "--config", config]) == EXIT_OK, command

    for building in ("office_1", "office_2"):
        for name in ("train.csv", "cv.csv", "test.csv"):
            assert (out / "data" / building / name).is_file()
        assert (out / "bundles" / f"{building}.json").is_file()
        assert (out / "reports" / f"trees_{building}.txt").read_text(encoding="utf-8").startswith("# period 1")
        selection = read_report(out / "reports" / f"selection_{building}.csv")
        assert selection["selected"].sum() == 1

    validation = read_report(out / "reports" / "validation.csv")
    assert set(validation["t"].astype(str)) == {"1", "2", "3", "4", "all"}
    comparison = read_report(out / "reports" / "comparison.csv")
    assert set(comparison["model"]) == {"rc", "blse_central", "blse_0.2"}
    first_line = (out / "reports" / "validation.csv").read_text(encoding="utf-8").splitlines()[0]
    assert first_line == "# schema_version=1"

    # learned regions may be empty for an unlucky target day
    code = main(["schedule", "--config", config])
    assert code in (EXIT_OK, 3)
    if code == EXIT_OK:
        report = json.loads((out / "reports" / "schedule.json").read_text(encoding="utf-8"))
        assert set(report["clusters"]) == {"office_1", "office_2", "office_1_2"}
        assert len(read_report(out / "reports" / "sweep_v.csv")) == 2
        assert len(read_report(out / "reports" / "timing.csv")) == 2


@pytest.mark.slow
def test_training_rerun_is_byte_identical(tmp_path):
    config = write_config(tmp_path, {"buildings": [{"name": "office_2"}]})
    bundle = tmp_path / "out" / "bundles" / "office_2.json"
    assert main(["generate-data", "--config", config]) == EXIT_OK
    assert main(["train", "--config", config]) == EXIT_OK
    first = bundle.read_bytes()
    assert main(["train", "--config", config]) == EXIT_OK
    assert bundle.read_bytes() == first


def test_missing_config_file_is_a_validation_error(tmp_path):
    assert main(["generate-data", "--config", str(tmp_path / "absent.toml")]) == EXIT_VALIDATION


def test_invalid_config_value_is_a_validation_error(tmp_path):
    config = write_config(tmp_path, {"training": {"alpha": 2.0}})
    assert main(["train", "--config", config]) == EXIT_VALIDATION


def test_training_without_data_is_a_validation_error(tmp_path):
    assert main(["train", "--config", write_config(tmp_path)]) == EXIT_VALIDATION


def test_validate_without_bundle_is_a_validation_error(tmp_path):
    config = write_config(tmp_path, {"buildings": [{"name": "office_1"}], "data": {"periods": 2, "split": [6, 3, 3]}})
    assert main(["generate-data", "--config", config]) == EXIT_OK
    assert main(["validate", "--config", config]) == EXIT_VALIDATION


def test_unknown_command_exits_through_argparse():
    with pytest.raises(SystemExit):
        main(["frobnicate"])


@pytest.mark.slow
def test_train_and_schedule_rerun_is_byte_identical(tmp_path):
    config = write_config(tmp_path)
    out = tmp_path / "out"
    artifacts = [out / "bundles" / "office_1.json", out / "bundles" / "office_2.json"] + [
        out / "reports" / name for name in ("schedule.json", "sweep_v.csv", "sweep_alpha.csv")
    ]
    assert main(["generate-data", "--config", config]) == EXIT_OK
    codes, snapshots = [], []
    for _ in range(2):
        assert main(["train", "--config", config]) == EXIT_OK
        codes.append(main(["schedule", "--config", config]))
        snapshots.append({path.name: path.read_bytes() for path in artifacts if path.is_file()})
    assert codes[0] == codes[1]
    assert snapshots[0] == snapshots[1]
    assert {"office_1.json", "office_2.json"} <= set(snapshots[0])
