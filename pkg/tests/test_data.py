import numpy as np
import pytest

from mqrl.data import ClusteredDataset, QrlSpec, load_dataset, save_dataset, validate_for_fit
from mqrl.errors import DataValidationError, RiskSetError


def write(tmp_path, text, name="d.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestFromArrays:
    def test_groups_by_first_appearance(self):
        ds = ClusteredDataset.from_arrays(["b", "a", "b", "c"], [1, 2, 3, 4], [1, 0, 1, 1], [[10], [20], [30], [40]])
        assert ds.cluster_ids == ("b", "a", "c")
        np.testing.assert_array_equal(ds.time, [1, 3, 2, 4])
        np.testing.assert_array_equal(ds.X[:, 1], [10, 30, 20, 40])
        np.testing.assert_array_equal(ds.sizes, [2, 1, 1])
        assert (ds.n, ds.N, ds.p) == (3, 4, 2)

    def test_intercept_only(self):
        ds = ClusteredDataset.from_arrays([1, 1], [1.0, 2.0], [1, 1])
        assert ds.p == 1
        assert ds.covariate_names == ()

    def test_arrays_are_read_only(self):
        ds = ClusteredDataset.from_arrays([1, 2], [1.0, 2.0], [1, 0])
        with pytest.raises(ValueError):
            ds.time[0] = 5.0

    @pytest.mark.parametrize(
        "time, status",
        [([0.0, 1.0], [1, 1]), ([-1.0, 1.0], [1, 1]), ([np.nan, 1.0], [1, 1]), ([1.0, 2.0], [2, 1])],
    )
    def test_rejects_bad_values(self, time, status):
        with pytest.raises(DataValidationError):
            ClusteredDataset.from_arrays([1, 2], time, status)

    def test_clusters_iterates_observations(self):
        ds = ClusteredDataset.from_arrays(["a", "a", "b"], [1, 2, 3], [1, 0, 1], [[0.5], [0.6], [0.7]])
        groups = list(ds.clusters())
        assert [len(g) for g in groups] == [2, 1]
        assert groups[0][1].covariates == (1.0, 0.6)
        assert groups[1][0].cluster_id == "b"


class TestCsv:
    def test_round_trip(self, tmp_path):
        ds = ClusteredDataset.from_arrays(["a", "a", "b"], [1.25, 2.0, 1 / 3], [1, 0, 1], [[0.1], [0.2], [1e-17]], ("x",))
        path = tmp_path / "out.csv"
        save_dataset(ds, path)
        assert load_dataset(path).same_as(ds)

    def test_schema_remap(self, tmp_path):
        path = write(tmp_path, "id,T,D,age\n1,2.5,1,40\n1,3.0,0,41\n2,1.0,1,50\n")
        ds = load_dataset(path, {"cluster": "id", "time": "T", "status": "D"})
        assert ds.covariate_names == ("age",)
        assert ds.n == 2

    def test_missing_column(self, tmp_path):
        path = write(tmp_path, "cluster,time\n1,2\n")
        with pytest.raises(DataValidationError, match="status"):
            load_dataset(path)

    def test_non_numeric_cell_reports_row(self, tmp_path):
        path = write(tmp_path, "cluster,time,status\n1,2,1\n1,abc,0\n")
        with pytest.raises(DataValidationError, match="row 3"):
            load_dataset(path)

    def test_missing_value_rejected(self, tmp_path):
        path = write(tmp_path, "cluster,time,status,x\n1,2,1,\n")
        with pytest.raises(DataValidationError, match="row 2"):
            load_dataset(path)

    @pytest.mark.parametrize("bad", ["0", "-1.5"])
    def test_nonpositive_time(self, tmp_path, bad):
        path = write(tmp_path, f"cluster,time,status\n1,{bad},1\n")
        with pytest.raises(DataValidationError, match="time must be > 0"):
            load_dataset(path)

    def test_bad_status(self, tmp_path):
        path = write(tmp_path, "cluster,time,status\n1,2,2\n")
        with pytest.raises(DataValidationError, match="status"):
            load_dataset(path)

    def test_empty_file(self, tmp_path):
        with pytest.raises(DataValidationError, match="empty"):
            load_dataset(write(tmp_path, ""))


class TestSpecAndRiskSet:
    @pytest.mark.parametrize("tau", [0.0, 1.0, -0.2, 1.5])
    def test_tau_range(self, tau):
        with pytest.raises(ValueError):
            QrlSpec(tau)

    def test_negative_t0(self):
        with pytest.raises(ValueError):
            QrlSpec(0.5, -1.0)

    def test_report_counts(self):
        ds = ClusteredDataset.from_arrays([1, 1, 2, 3], [1.0, 2.0, 3.0, 4.0], [1, 0, 1, 1], [[0], [1], [0], [1]])
        rep = validate_for_fit(ds, QrlSpec(0.5, 2.0))
        assert (rep.size, rep.events) == (3, 2)

    def test_empty_risk_set(self):
        ds = ClusteredDataset.from_arrays([1, 2], [1.0, 2.0], [1, 1])
        with pytest.raises(RiskSetError, match="empty risk set"):
            validate_for_fit(ds, QrlSpec(0.5, 3.0))

    def test_too_few_events(self):
        ds = ClusteredDataset.from_arrays([1, 2, 3], [1.0, 2.0, 3.0], [1, 0, 0], [[0], [1], [2]])
        with pytest.raises(RiskSetError, match="need at least p=2"):
            validate_for_fit(ds, QrlSpec(0.5))
