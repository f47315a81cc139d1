import numpy as np
import pytest

from robust_mspca import (
    DegenerateInstance,
    InvalidMatrix,
    IoError,
    ParseError,
    SecondMomentSet,
    ShapeError,
    SourceSamples,
    compute_second_moment,
    load_moment_matrices,
    load_sources,
    operator_norm,
    rescale_by_max_opnorm,
    solve,
)


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


class TestComputeSecondMoment:
    def test_two_unit_rows(self):
        samples = SourceSamples([np.array([[1.0, 0.0], [0.0, 1.0]])], ["a"], 2)
        m = compute_second_moment(samples)
        assert np.allclose(m.matrices[0], 0.5 * np.eye(2), atol=1e-15)

    def test_centering_annihilates_constants(self):
        samples = SourceSamples([np.tile([2.0, -3.0], (7, 1))], ["a"], 2)
        m = compute_second_moment(samples, center=True)
        assert np.abs(m.matrices[0]).max() <= 1e-14

    def test_monte_carlo_population(self):
        rng = np.random.default_rng(5)
        x = rng.normal(size=(200, 2)) * np.sqrt([3.0, 1.0])
        m = compute_second_moment(SourceSamples([x], ["a"], 2))
        assert np.abs(m.matrices[0] - np.diag([3.0, 1.0])).max() < 0.5

    def test_output_psd(self, rng):
        for _ in range(20):
            x = rng.normal(size=(rng.integers(2, 30), 4))
            m = compute_second_moment(SourceSamples([x], ["a"], 4))
            assert np.linalg.eigvalsh(m.matrices[0])[0] >= -1e-8

    def test_row_permutation_invariance(self, rng):
        x = rng.normal(size=(40, 3))
        perm = rng.permutation(40)
        a = compute_second_moment(SourceSamples([x], ["a"], 3)).matrices[0]
        b = compute_second_moment(SourceSamples([x[perm]], ["a"], 3)).matrices[0]
        assert np.abs(a - b).max() <= 1e-12

    def test_shape_mismatch(self):
        samples = SourceSamples([np.ones((3, 4))], ["a"], 2)
        with pytest.raises(ShapeError):
            compute_second_moment(samples)


class TestSecondMomentSet:
    def test_rho_max_matches_operator_norm(self, rng):
        mats = [(lambda a: a @ a.T)(rng.normal(size=(4, 4))) for _ in range(3)]
        m = SecondMomentSet.from_matrices(mats)
        assert m.rho_max == pytest.approx(max(operator_norm(s) for s in mats), abs=1e-10)

    def test_rejects_asymmetric_and_indefinite(self):
        with pytest.raises(InvalidMatrix):
            SecondMomentSet.from_matrices([np.array([[1.0, 1.0], [0.0, 1.0]])])
        with pytest.raises(InvalidMatrix):
            SecondMomentSet.from_matrices([np.diag([1.0, -1.0])])
        # indefinite admitted when PSD validation is off (shifted variants)
        m = SecondMomentSet.from_matrices([np.diag([1.0, -1.0])], require_psd=False)
        assert m.rho_max == pytest.approx(1.0)


class TestLoadSources:
    def test_per_file_mode(self, tmp_path):
        write(tmp_path / "a.csv", "1,2\n3,4\n5,6\n")
        write(tmp_path / "b.csv", "1,0\n0,1\n2,2\n3,3\n4,4\n")
        samples = load_sources(tmp_path)
        assert samples.labels == ["a", "b"]
        assert samples.dim == 2
        assert samples.sample_sizes == [3, 5]

    def test_label_order_is_lexicographic(self, tmp_path):
        write(tmp_path / "zeta.csv", "1,1\n")
        write(tmp_path / "alpha.csv", "2,2\n")
        samples = load_sources(tmp_path)
        assert samples.labels == ["alpha", "zeta"]
        assert samples.matrices[0][0, 0] == 2.0

    def test_header_autodetected(self, tmp_path):
        p = write(tmp_path / "a.csv", "x,y\n1,2\n3,4\n")
        samples = load_sources([p])
        assert samples.sample_sizes == [2]

    def test_single_file_source_column(self, tmp_path):
        p = write(tmp_path / "all.csv", "x1,x2,source\n1,2,s2\n3,4,s1\n5,6,s2\n")
        samples = load_sources(p, source_column="source")
        assert samples.labels == ["s1", "s2"]
        assert samples.matrices[0].shape == (1, 2)
        assert np.allclose(samples.matrices[1], [[1, 2], [5, 6]])

    def test_missing_source_column(self, tmp_path):
        p = write(tmp_path / "all.csv", "x1,x2\n1,2\n")
        with pytest.raises(ParseError, match="group"):
            load_sources(p, source_column="group")

    def test_nan_cell_rejected_with_location(self, tmp_path):
        p = write(tmp_path / "a.csv", "1,2\n3,NaN\n")
        with pytest.raises(ParseError, match=r"row 2, column 2"):
            load_sources([p])

    def test_non_numeric_cell_location(self, tmp_path):
        p = write(tmp_path / "a.csv", "1,2\n3,4\nfive,6\n")
        with pytest.raises(ParseError, match=r"'five' at row 3, column 1"):
            load_sources([p])

    def test_unreadable_file(self, tmp_path):
        with pytest.raises(IoError):
            load_sources([tmp_path / "missing.csv"])

    def test_inconsistent_columns(self, tmp_path):
        p = write(tmp_path / "a.csv", "1,2\n3,4,5\n")
        with pytest.raises(ShapeError):
            load_sources([p])

    def test_cross_file_dim_mismatch(self, tmp_path):
        write(tmp_path / "a.csv", "1,2\n")
        write(tmp_path / "b.csv", "1,2,3\n")
        with pytest.raises(ShapeError):
            load_sources(tmp_path)

    def test_duplicated_sources_bitwise_identical(self, tmp_path, rng):
        body = "\n".join(",".join(repr(float(v)) for v in row)
                         for row in rng.normal(size=(20, 3))) + "\n"
        write(tmp_path / "a.csv", body)
        write(tmp_path / "b.csv", body)
        m = compute_second_moment(load_sources(tmp_path))
        assert np.array_equal(m.matrices[0], m.matrices[1])


class TestMomentMatrixMode:
    def test_load_square(self, tmp_path):
        write(tmp_path / "s1.csv", "4,0\n0,2\n")
        write(tmp_path / "s2.csv", "1,0\n0,3\n")
        m = load_moment_matrices(tmp_path)
        assert m.labels == ["s1", "s2"]
        assert m.rho_max == pytest.approx(4.0)

    def test_rejects_non_square(self, tmp_path):
        write(tmp_path / "s1.csv", "1,0,0\n0,1,0\n")
        with pytest.raises(ShapeError):
            load_moment_matrices(tmp_path)


class TestRescale:
    def test_example(self):
        m = SecondMomentSet.from_matrices([np.diag([4.0, 2.0])])
        scaled, scale = rescale_by_max_opnorm(m)
        assert scale == pytest.approx(4.0)
        assert np.allclose(scaled.matrices[0], np.diag([1.0, 0.5]))
        assert scaled.rho_max == pytest.approx(1.0, abs=1e-10)

    def test_already_normalized(self):
        m = SecondMomentSet.from_matrices([np.diag([1.0, 0.5])])
        scaled, scale = rescale_by_max_opnorm(m)
        assert scale == pytest.approx(1.0, abs=1e-12)
        assert np.allclose(scaled.matrices[0], m.matrices[0])

    def test_all_zero_instance(self):
        m = SecondMomentSet.from_matrices([np.zeros((2, 2))])
        with pytest.raises(DegenerateInstance):
            rescale_by_max_opnorm(m)

    def test_scaled_solve_recovers_same_subspace(self, rng):
        from conftest import wishart_instance
        m = wishart_instance(rng, 6, 3, rescaled=False)
        scaled, _ = rescale_by_max_opnorm(m)
        p1 = solve(m, 2, 120).P_rounded.matrix
        p2 = solve(scaled, 2, 120).P_rounded.matrix
        assert np.abs(p1 - p2).max() <= 1e-8
