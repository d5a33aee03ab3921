import numpy as np
import pytest

from conftest import linear_dataset, make_day
from errors import DataValidationError, EmptyDatasetError
from models import DatasetRole, DayOfWeek, TrainingDataset
from services import data_service

HEADER = "day,hour,load_kw,indoor_temp_c,outdoor_temp_c,solar_wm2,day_of_week\n"


def write_csv(tmp_path, body: str, header: str = HEADER):
    path = tmp_path / "data.csv"
    path.write_text(header + body, encoding="utf-8")
    return path


def test_load_dataset_reads_days_in_order(tmp_path):
    body = (
        "2,0,,21.0,,,tue\n"
        "2,1,5.0,21.5,30.0,100.0,tue\n"
        "2,2,6.0,21.2,31.0,200.0,tue\n"
        "1,0,,22.0,,,mon\n"
        "1,1,4.0,22.5,29.0,0.0,mon\n"
        "1,2,3.0,22.7,28.0,50.0,mon\n"
    )
    ds = data_service.load_dataset(write_csv(tmp_path, body), periods=2)
    assert ds.day_ids == [1, 2]
    first = ds.day(1)
    assert first.initial_indoor_temp_c == 22.0
    assert first.load_kw == (4.0, 3.0)
    assert first.day_of_week is DayOfWeek.MON
    assert first.hvac_kw is None
    assert first.daily_mean_outdoor_c == pytest.approx(28.5)


def test_load_dataset_reports_malformed_row(tmp_path):
    body = "1,0,,22.0,,,mon\n1,1,abc,22.5,29.0,0.0,mon\n"
    with pytest.raises(DataValidationError) as excinfo:
        data_service.load_dataset(write_csv(tmp_path, body), periods=1)
    assert str(excinfo.value).startswith("row 3:")
    assert "load_kw" in str(excinfo.value)


def test_load_dataset_rejects_incomplete_day(tmp_path):
    body = "1,0,,22.0,,,mon\n1,1,4.0,22.5,29.0,0.0,mon\n"
    with pytest.raises(DataValidationError, match="incomplete day 1"):
        data_service.load_dataset(write_csv(tmp_path, body), periods=2)


def test_load_dataset_rejects_duplicate_key(tmp_path):
    body = "1,0,,22.0,,,mon\n1,1,4.0,22.5,29.0,0.0,mon\n1,1,4.0,22.5,29.0,0.0,mon\n"
    with pytest.raises(DataValidationError, match="duplicate key"):
        data_service.load_dataset(write_csv(tmp_path, body), periods=1)


def test_load_dataset_rejects_non_finite(tmp_path):
    body = "1,0,,22.0,,,mon\n1,1,inf,22.5,29.0,0.0,mon\n"
    with pytest.raises(DataValidationError, match="non-finite"):
        data_service.load_dataset(write_csv(tmp_path, body), periods=1)


def test_extra_columns_become_features(tmp_path):
    header = HEADER.strip() + ",humidity\n"
    body = "1,0,,22.0,,,mon,\n1,1,4.0,22.5,29.0,0.0,mon,55.0\n"
    ds = data_service.load_dataset(write_csv(tmp_path, body, header), periods=1)
    assert ds.day(1).explanatory(1).numeric("humidity") == 55.0


def test_write_then_load_reproduces_every_field(tmp_path):
    ds = linear_dataset(n_days=5, periods=4, seed=3)
    ds = ds.model_copy(
        update={"days": (ds.days[0].model_copy(update={"hvac_kw": (0.1, 1 / 3, 2.0, 0.0)}),) + ds.days[1:]}
    )
    path = data_service.write_dataset(ds, tmp_path / "out" / "train.csv")
    again = data_service.load_dataset(path, periods=4)
    assert again.days == ds.days


def test_split_is_disjoint_and_sized():
    ds = linear_dataset(n_days=20, periods=2, seed=1)
    train, cv, test = data_service.split_dataset(ds, (10, 5, 5), seed=4)
    assert (train.size, cv.size, test.size) == (10, 5, 5)
    assert set(train.day_ids).isdisjoint(cv.day_ids)
    assert set(train.day_ids) | set(cv.day_ids) | set(test.day_ids) == set(ds.day_ids)
    assert train.day_ids == sorted(train.day_ids)
    assert test.role is DatasetRole.TEST


def test_split_rejects_oversized_request():
    ds = linear_dataset(n_days=5, periods=2, seed=1)
    with pytest.raises(DataValidationError):
        data_service.split_dataset(ds, (4, 1, 1), seed=0)


def test_feature_vector_and_matrix():
    days = (
        make_day(1, [1.0, 2.0, 3.0], [21.0, 22.0, 23.0], [30.0, 31.0, 32.0], phi_0=20.0),
        make_day(2, [4.0, 5.0, 6.0], [24.0, 25.0, 26.0], [33.0, 34.0, 35.0], phi_0=21.0),
    )
    ds = TrainingDataset(days=days, periods=3)
    np.testing.assert_array_equal(data_service.build_feature_vector(ds, 0, 2), [1.0, 2.0, 20.0, 22.0, 31.0])
    W = data_service.feature_matrix(ds, 2)
    assert W.shape == (5, 2)
    np.testing.assert_array_equal(W[:, 1], [4.0, 5.0, 21.0, 25.0, 34.0])


def test_feature_vector_rejects_bad_period():
    ds = linear_dataset(n_days=2, periods=2, seed=1)
    with pytest.raises(DataValidationError):
        data_service.build_feature_vector(ds, 0, 3)


def test_require_days_on_empty_dataset():
    with pytest.raises(EmptyDatasetError):
        data_service.require_days(TrainingDataset(periods=2), "clustering")
