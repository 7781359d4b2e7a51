import numpy as np
import pytest

from mxfar.core.panel_io import load_exogenous, load_panel, panel_to_frame, validate_panel, write_panel
from mxfar.core.types import Panel
from mxfar.exceptions import IngestionError
from tests.conftest import write_csv


def _rows(subjects=("1", "2"), groups=(0, 1), n_time=3):
    rows = []
    for subject, group in zip(subjects, groups):
        for t in range(1, n_time + 1):
            rows.append(f"{subject},{group},{t},{t * 0.5},{-t}")
    return rows


def test_valid_panel(tmp_path):
    report = validate_panel(write_csv(tmp_path / "panel.csv", _rows()))
    assert report.ok
    panel = report.panel
    assert panel.values.shape == (2, 2, 3)
    np.testing.assert_array_equal(panel.group_of, [0, 1])
    np.testing.assert_allclose(panel.values[0, 0], [0.5, 1.0, 1.5])
    np.testing.assert_allclose(panel.values[1, 1], [-1, -2, -3])
    assert "N=2, k=2, T=3, G=2" in report.summary()


def test_numeric_subject_ids_sort_naturally(tmp_path):
    report = validate_panel(write_csv(tmp_path / "panel.csv", _rows(subjects=("2", "10"))))
    assert report.ok
    assert report.panel.subject_ids == ("2", "10")


def test_unsorted_subjects_rejected(tmp_path):
    report = validate_panel(write_csv(tmp_path / "panel.csv", _rows(subjects=("10", "2"))))
    assert not report.ok
    assert any("not sorted by subject_id" in v for v in report.violations)


def test_time_gap_reported(tmp_path):
    rows = [r for r in _rows() if not r.startswith("1,0,2,")]
    report = validate_panel(write_csv(tmp_path / "panel.csv", rows))
    assert not report.ok
    assert any("missing 2" in v for v in report.violations)


def test_non_finite_value_reported(tmp_path):
    rows = _rows()
    rows[1] = "1,0,2,nan,-2"
    report = validate_panel(write_csv(tmp_path / "panel.csv", rows))
    assert report.violations == [f"{tmp_path / 'panel.csv'}:3: non-finite value in ch_1 (subject 1, time_index 2)"]


def test_bad_header(tmp_path):
    report = validate_panel(write_csv(tmp_path / "panel.csv", _rows(), header="subject,group_id,time_index,ch_1,ch_2"))
    assert not report.ok
    assert ":1: header must be" in report.violations[0]


def test_group_labels_must_be_contiguous(tmp_path):
    report = validate_panel(write_csv(tmp_path / "panel.csv", _rows(groups=(0, 2))))
    assert any("group_id values must form 0..G-1" in v for v in report.violations)


def test_unequal_lengths(tmp_path):
    rows = _rows()[:-1]
    report = validate_panel(write_csv(tmp_path / "panel.csv", rows))
    assert any("one series length" in v for v in report.violations)


def test_load_panel_raises_with_violations(tmp_path):
    rows = _rows()
    rows[0] = "1,0,1,inf,-1"
    with pytest.raises(IngestionError) as info:
        load_panel(write_csv(tmp_path / "panel.csv", rows))
    assert len(info.value.violations) == 1


def test_write_then_load_is_exact(tmp_path):
    rng = np.random.default_rng(1)
    panel = Panel(values=rng.normal(size=(3, 2, 5)), group_of=[0, 0, 1], subject_ids=("1", "2", "3"))
    write_panel(panel, tmp_path / "panel.csv")
    loaded = load_panel(tmp_path / "panel.csv")
    np.testing.assert_array_equal(loaded.values, panel.values)
    assert list(panel_to_frame(panel).columns) == ["subject_id", "group_id", "time_index", "ch_1", "ch_2"]


def test_load_exogenous(tmp_path):
    panel = load_panel(write_csv(tmp_path / "panel.csv", _rows()))
    lines = [f"{s},{t},{t * 10}" for s in ("1", "2") for t in (1, 2, 3)]
    path = write_csv(tmp_path / "exo.csv", lines, header="subject_id,time_index,value")
    with_exogenous = load_exogenous(path, panel)
    np.testing.assert_allclose(with_exogenous.exogenous[1], [10, 20, 30])

    path = write_csv(tmp_path / "short.csv", lines[:-1], header="subject_id,time_index,value")
    with pytest.raises(IngestionError):
        load_exogenous(path, panel)


def test_panel_rejects_non_finite():
    with pytest.raises(IngestionError):
        Panel(values=np.full((1, 1, 3), np.nan), group_of=[0], subject_ids=("a",))


def test_panel_subset_reindexes_groups():
    panel = Panel(values=np.zeros((3, 1, 4)), group_of=[0, 1, 1], subject_ids=("a", "b", "c"))
    subset = panel.subset([1, 2])
    np.testing.assert_array_equal(subset.group_of, [0, 0])
    assert subset.subject_ids == ("b", "c")
    assert panel.window(1, 3).n_time == 2
