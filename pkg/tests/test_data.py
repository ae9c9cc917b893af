import numpy as np
import pytest

from itr.data import TrialDataset, load_dataset_csv, save_dataset_csv
from itr.errors import InputError


def _dataset():
    x = np.array([[0.1, -0.2], [0.3, 0.4], [-0.5, 0.6]])
    arms = np.array([1, -1, 1], dtype=object)
    r = np.array([1.5, -0.25, 2.0])
    prob = np.array([0.5, 0.5, 0.5])
    return TrialDataset(x, arms, r, prob)


def test_roundtrip_with_prob(tmp_path):
    ds = _dataset()
    path = tmp_path / "d.csv"
    save_dataset_csv(ds, path, include_prob=True)
    back = load_dataset_csv(path)
    assert np.array_equal(back.x, ds.x)
    assert list(back.arms) == list(ds.arms)
    assert np.array_equal(back.r, ds.r)
    assert np.array_equal(back.propensity, ds.propensity)


def test_roundtrip_without_prob(tmp_path):
    ds = _dataset()
    path = tmp_path / "d.csv"
    save_dataset_csv(ds, path)
    back = load_dataset_csv(path)
    assert back.propensity is None
    assert back.n == 3 and back.p == 2


def test_string_arm_identifiers(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("x1,arm,r\n0.5,drugA,1.0\n0.25,drugB,2.0\n")
    ds = load_dataset_csv(path)
    assert list(ds.arms) == ["drugA", "drugB"]


def test_non_numeric_field_reports_line_number(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("x1,arm,r\n0.5,1,1.0\noops,1,2.0\n")
    with pytest.raises(InputError, match=r"d\.csv:3"):
        load_dataset_csv(path)


def test_short_row_reports_line_number(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("x1,arm,r\n0.5,1\n")
    with pytest.raises(InputError, match=r"d\.csv:2"):
        load_dataset_csv(path)


def test_bad_header_rejected(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("x1,x3,arm,r\n0.5,0.5,1,1.0\n")
    with pytest.raises(InputError, match="header"):
        load_dataset_csv(path)


def test_empty_file_rejected(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("")
    with pytest.raises(InputError, match="empty"):
        load_dataset_csv(path)


def test_header_only_rejected(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("x1,arm,r\n")
    with pytest.raises(InputError, match="no data rows"):
        load_dataset_csv(path)


def test_validation_errors():
    with pytest.raises(InputError):
        TrialDataset(np.zeros((2, 1)), np.array([1], dtype=object), np.zeros(2))
    with pytest.raises(InputError):
        TrialDataset(np.array([[np.nan]]), np.array([1], dtype=object), np.zeros(1))
    with pytest.raises(InputError):
        TrialDataset(np.zeros((1, 1)), np.array([1], dtype=object),
                     np.zeros(1), np.array([0.0]))


def test_subset_keeps_propensity():
    ds = _dataset()
    sub = ds.subset(np.array([True, False, True]))
    assert sub.n == 2
    assert np.array_equal(sub.propensity, np.array([0.5, 0.5]))
