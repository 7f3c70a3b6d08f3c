import numpy as np
import pytest

from fiberpnr import ConfidenceTable, CountHistogram, PhotonDistribution, ValidationError, build_matrix
from fiberpnr import ModeProbabilities
from fiberpnr.io import (
    read_confidence_csv,
    read_distribution_csv,
    read_histogram_csv,
    read_matrix_csv,
    read_records,
    write_confidence_csv,
    write_distribution_csv,
    write_gnuplot_script,
    write_histogram_csv,
    write_manifest,
    write_matrix_csv,
    write_records,
)
from fiberpnr.simulator import ClickRecord


def test_matrix_round_trip(tmp_path, balanced_matrix):
    path = tmp_path / "m.csv"
    write_matrix_csv(balanced_matrix, path)
    header = path.read_text().splitlines()[0]
    assert header == "k\\n,0,1,2,3,4,5,6,7,8"
    np.testing.assert_array_equal(read_matrix_csv(path).p, balanced_matrix.p)


def test_lossy_matrix_round_trip(tmp_path):
    m = build_matrix(ModeProbabilities.balanced(8, 0.56), 8)
    write_matrix_csv(m, tmp_path / "m.csv")
    np.testing.assert_array_equal(read_matrix_csv(tmp_path / "m.csv").p, m.p)


def test_histogram_round_trip(tmp_path):
    hist = CountHistogram(np.array([4512, 3571, 1453, 378, 74, 11, 1, 0, 0]))
    write_histogram_csv(hist, tmp_path / "h.csv")
    assert (tmp_path / "h.csv").read_text().splitlines()[:2] == ["k,count", "0,4512"]
    np.testing.assert_array_equal(read_histogram_csv(tmp_path / "h.csv").counts, hist.counts)


@pytest.mark.parametrize(
    "text",
    ["n,count\n0,1\n", "k,count\n0,1\n2,3\n", "k,count\n0,x\n", "k,count\n0,-3\n"],
)
def test_bad_histograms(tmp_path, text):
    (tmp_path / "h.csv").write_text(text)
    with pytest.raises(ValidationError):
        read_histogram_csv(tmp_path / "h.csv")


def test_distribution_round_trip(tmp_path):
    dist = PhotonDistribution(rho=np.array([0.5, 0.6, -0.1]), signed=True, std_err=np.array([0.01, 0.02, 0.03]))
    write_distribution_csv(dist, tmp_path / "d.csv")
    back = read_distribution_csv(tmp_path / "d.csv")
    np.testing.assert_array_equal(back.rho, dist.rho)
    np.testing.assert_array_equal(back.std_err, dist.std_err)


def test_distribution_without_errors(tmp_path):
    dist = PhotonDistribution(rho=np.array([0.25, 0.75]))
    write_distribution_csv(dist, tmp_path / "d.csv")
    assert (tmp_path / "d.csv").read_text().splitlines()[1] == "0,0.25,"
    back = read_distribution_csv(tmp_path / "d.csv", signed=False)
    assert back.std_err is None and not back.signed


def test_confidence_round_trip(tmp_path):
    table = ConfidenceTable(ls=(1, 2), columns=((1.0, 0.25), (0.7, 0.5)), values=np.array([[0.9, 0.8], [0.7, 0.6]]))
    write_confidence_csv(table, tmp_path / "c.csv")
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "eta,1.0,0.7" and lines[1] == "mean,0.25,0.5"
    back = read_confidence_csv(tmp_path / "c.csv")
    assert back.ls == table.ls and back.columns == table.columns
    np.testing.assert_array_equal(back.values, table.values)


def test_records_round_trip(tmp_path):
    recs = [ClickRecord(()), ClickRecord((3,)), ClickRecord((0, 2, 7))]
    write_records(recs, tmp_path / "r.txt")
    assert (tmp_path / "r.txt").read_text() == "0\t\n1\t3\n2\t0 2 7\n"
    assert read_records(tmp_path / "r.txt") == recs


def test_manifest_and_plot_script(tmp_path):
    target = write_manifest(tmp_path / "out.csv", {"command": "x", "seed": 3})
    assert target.name == "out.csv.manifest.json"
    write_gnuplot_script(tmp_path / "d.csv", tmp_path / "p.gp", reference=[0.5, 0.5])
    script = (tmp_path / "p.gp").read_text()
    assert "yerrorbars" in script and "$ref" in script
