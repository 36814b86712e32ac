import numpy as np
import pytest

from stochvort.io import read_grid_csv, read_spectral_csv, write_grid_csv, write_rows, write_spectral_csv
from stochvort.spectral import GridField, random_field, synthesize


def test_grid_round_trip_is_exact(tmp_path, rng):
    g = GridField(synthesize(random_field(5, rng).coeffs, 12))
    write_grid_csv(tmp_path / "g.csv", g)
    assert (tmp_path / "g.csv").read_text().startswith("n=12\n")
    np.testing.assert_array_equal(read_grid_csv(tmp_path / "g.csv").values, g.values)


def test_spectral_round_trip_is_exact(tmp_path, rng):
    f = random_field(6, rng)
    write_spectral_csv(tmp_path / "f.csv", f)
    np.testing.assert_array_equal(read_spectral_csv(tmp_path / "f.csv").coeffs, f.coeffs)


def test_spectral_reader_completes_conjugates(tmp_path):
    (tmp_path / "f.csv").write_text("k1,k2,re,im\n1,0,0.0,-3.0\n")
    f = read_spectral_csv(tmp_path / "f.csv")
    assert f[(-1, 0)] == 3j


def test_bad_headers(tmp_path):
    (tmp_path / "g.csv").write_text("1,2\n")
    with pytest.raises(ValueError, match="n=<n>"):
        read_grid_csv(tmp_path / "g.csv")
    (tmp_path / "f.csv").write_text("a,b,c,d\n")
    with pytest.raises(ValueError, match="k1,k2,re,im"):
        read_spectral_csv(tmp_path / "f.csv")


def test_write_rows_formats(tmp_path):
    write_rows(tmp_path / "r.csv", ["a", "b", "c"], [{"a": 0.1, "b": True, "c": np.int64(3)}])
    assert (tmp_path / "r.csv").read_text() == "a,b,c\n0.1,true,3\n"
