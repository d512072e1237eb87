import numpy as np
import pytest

from adaptrix.dataset import (
    MANIFOLD_KINDS,
    PointCloud,
    generate_manifolds,
    load_csv,
    load_iris,
    sample_manifolds,
    save_matrix,
    torus_residual,
)
from adaptrix.errors import ArgumentError, DataError


def write(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestPointCloud:
    def test_rejects_single_row(self):
        with pytest.raises(DataError):
            PointCloud(np.zeros((1, 3)))

    def test_rejects_non_finite(self):
        with pytest.raises(DataError):
            PointCloud(np.array([[0.0, 1.0], [np.nan, 2.0]]))

    def test_label_length_must_match(self):
        with pytest.raises(DataError):
            PointCloud(np.zeros((3, 2)), labels=np.array([0, 1]))

    def test_arrays_are_read_only(self):
        cloud = PointCloud(np.zeros((3, 2)), labels=np.array([0, 1, 1]))
        with pytest.raises(ValueError):
            cloud.coords[0, 0] = 1.0

    def test_caller_array_stays_writable(self):
        raw = np.zeros((3, 2))
        PointCloud(raw)
        raw[0, 0] = 1.0

    def test_subset_keeps_labels(self):
        cloud = PointCloud(np.arange(8.0).reshape(4, 2), labels=np.array([0, 1, 2, 3]))
        sub = cloud.subset([3, 1])
        assert sub.labels.tolist() == [3, 1]
        assert sub.coords[0].tolist() == [6.0, 7.0]


class TestLoadCsv:
    def test_plain_parse(self, tmp_path):
        cloud = load_csv(write(tmp_path, "0,0\n1,0\n0,1\n"))
        assert (cloud.n, cloud.dim) == (3, 2)
        assert cloud.labels is None

    def test_labels_are_last_column(self, tmp_path):
        cloud = load_csv(write(tmp_path, "0.5,1,2\n1.5,2,0\n"), has_labels=True)
        assert cloud.dim == 2
        assert cloud.labels.tolist() == [2, 0]

    def test_header_and_delimiter(self, tmp_path):
        cloud = load_csv(write(tmp_path, "a;b\n1;2\n3;4\n"), delimiter=";", skip_header=True)
        np.testing.assert_array_equal(cloud.coords, [[1, 2], [3, 4]])

    def test_bad_cell_names_row_and_column(self, tmp_path):
        with pytest.raises(DataError, match=r"row 1, column 2"):
            load_csv(write(tmp_path, "1,x,3\n4,5,6\n"))

    def test_ragged_rows_name_the_line(self, tmp_path):
        with pytest.raises(DataError, match=r"line 2"):
            load_csv(write(tmp_path, "1,2\n3\n"))

    def test_needs_two_rows(self, tmp_path):
        with pytest.raises(DataError):
            load_csv(write(tmp_path, "1,2\n"))

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            load_csv(tmp_path / "nope.csv")

    def test_non_integer_label(self, tmp_path):
        with pytest.raises(DataError):
            load_csv(write(tmp_path, "1,2,0.5\n3,4,1\n"), has_labels=True)


def test_bundled_iris():
    iris = load_iris()
    assert (iris.n, iris.dim) == (150, 4)
    assert sorted(np.unique(iris.labels).tolist()) == [0, 1, 2]
    assert np.bincount(iris.labels).tolist() == [50, 50, 50]


class TestSaveMatrix:
    def test_round_trip_identity(self, tmp_path):
        path = tmp_path / "eye.csv"
        save_matrix(path, np.eye(2))
        np.testing.assert_array_equal(load_csv(path).coords, np.eye(2))

    def test_round_trip_is_exact(self, tmp_path):
        rng = np.random.default_rng(3)
        m = rng.standard_normal((20, 4)) * 10.0 ** rng.integers(-8, 8, (20, 4))
        path = tmp_path / "m.csv"
        save_matrix(path, m, labels=np.arange(20) % 3)
        back = load_csv(path, has_labels=True)
        np.testing.assert_array_equal(back.coords, m)
        assert back.labels.tolist() == (np.arange(20) % 3).tolist()

    def test_rejects_empty(self, tmp_path):
        with pytest.raises(ArgumentError):
            save_matrix(tmp_path / "e.csv", np.zeros((0, 3)))

    def test_line_count(self, tmp_path):
        path = tmp_path / "big.csv"
        save_matrix(path, np.zeros((5100, 3)))
        assert len(path.read_text().splitlines()) == 5100

    def test_unwritable_path_names_it(self, tmp_path):
        target = tmp_path / "missing" / "x.csv"
        with pytest.raises(DataError, match="missing"):
            save_matrix(target, np.eye(2))


class TestGenerateManifolds:
    def test_shape_and_labels(self):
        cloud = generate_manifolds(1700, 0.05, 17, seed=0)
        assert (cloud.n, cloud.dim) == (5100, 20)
        assert np.bincount(cloud.labels).tolist() == [1700, 1700, 1700]

    def test_same_seed_is_bitwise_identical(self):
        a = generate_manifolds(50, seed=11)
        b = generate_manifolds(50, seed=11)
        assert a.coords.tobytes() == b.coords.tobytes()
        assert a.labels.tobytes() == b.labels.tobytes()

    def test_different_seeds_differ(self):
        assert not np.array_equal(
            generate_manifolds(20, seed=1).coords, generate_manifolds(20, seed=2).coords
        )

    def test_single_noiseless_sphere_point(self):
        coords, labels = sample_manifolds(1, 0.0, 0, seed=5, kinds=("sphere",), signal_scale=1.0)
        assert coords.shape == (1, 3)
        assert labels.tolist() == [MANIFOLD_KINDS.index("sphere")]
        assert np.linalg.norm(coords[0]) == pytest.approx(1.0, abs=1e-12)

    def test_noiseless_shapes_satisfy_their_equations(self):
        cloud = generate_manifolds(300, 0.0, 4, seed=9, signal_scale=1.0)
        sphere = cloud.coords[cloud.labels == MANIFOLD_KINDS.index("sphere"), :3]
        torus = cloud.coords[cloud.labels == MANIFOLD_KINDS.index("torus"), :3]
        np.testing.assert_allclose(np.linalg.norm(sphere, axis=1), 1.0, atol=1e-12)
        assert np.max(np.abs(torus_residual(torus))) < 1e-9
        assert np.all(cloud.coords[:, 3:] == 0.0)

    def test_scaled_shapes_keep_their_equations(self):
        cloud = generate_manifolds(100, 0.0, 0, seed=9, signal_scale=2.5)
        torus = cloud.coords[cloud.labels == MANIFOLD_KINDS.index("torus")]
        assert np.max(np.abs(torus_residual(torus, signal_scale=2.5))) < 1e-9

    def test_noise_dimensions_have_requested_spread(self):
        cloud = generate_manifolds(2000, 0.05, 3, seed=4)
        assert np.std(cloud.coords[:, 3:]) == pytest.approx(0.05, rel=0.03)

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"points_per_manifold": 0},
            {"points_per_manifold": 10, "noise_sigma": -1.0},
            {"points_per_manifold": 10, "n_noise_dims": -1},
            {"points_per_manifold": 10, "kinds": ("cube",)},
            {"points_per_manifold": 10, "signal_scale": 0.0},
        ],
    )
    def test_rejects_invalid_arguments(self, kwargs):
        with pytest.raises(ArgumentError):
            generate_manifolds(**kwargs)
