import os
from pathlib import Path

import numpy as np
import pytest

from linattack import datasets
from linattack.errors import CsvParseError
from linattack.regress import Dataset

FIXTURES = Path(__file__).parent / "fixtures"


def test_three_line_readback(tmp_path):
    p = tmp_path / "tiny.csv"
    p.write_text("y,a,b\n1.5,2,3\n-1,0.25,7\n4,5,-6\n")
    d = datasets.load_csv(p)
    assert np.array_equal(d.y, [1.5, -1.0, 4.0])
    assert np.array_equal(d.X, [[2, 3], [0.25, 7], [5, -6]])
    assert d.feature_names == ["a", "b"]


def test_date_column_skipped(tmp_path):
    p = tmp_path / "dated.csv"
    p.write_text("Date,y,a\n2009-01-05,1,2\n2009-01-06,3,4\n2009-01-07,5,7\n")
    d = datasets.load_csv(p)
    assert np.array_equal(d.y, [1, 3, 5]) and d.m == 1


def test_malformed_row_reports_line():
    with pytest.raises(CsvParseError) as exc:
        datasets.load_istanbul(FIXTURES / "malformed_row17.csv")
    assert exc.value.line == 17
    assert "17" in str(exc.value)


def test_ragged_row(tmp_path):
    p = tmp_path / "ragged.csv"
    p.write_text("y,a\n1,2\n3\n")
    with pytest.raises(CsvParseError) as exc:
        datasets.load_csv(p)
    assert exc.value.line == 3


def test_istanbul_layout_fixture():
    d = datasets.load_istanbul(FIXTURES / "istanbul_sample.csv")
    assert (d.n, d.m) == (24, 7)
    assert d.feature_names == list(datasets.ISTANBUL_FEATURES)
    raw = np.genfromtxt(FIXTURES / "istanbul_sample.csv", delimiter=",", skip_header=1)
    assert np.array_equal(d.y, raw[:, 1])
    assert np.array_equal(d.X, raw[:, 3:])
    usd = datasets.load_istanbul(FIXTURES / "istanbul_sample.csv", response="ISE.1")
    assert np.array_equal(usd.y, raw[:, 2])


def test_standardize_and_intercept():
    d = datasets.load_istanbul(FIXTURES / "istanbul_sample.csv", standardize=True, intercept=True)
    assert d.m == 8 and np.allclose(d.X[:, -1], 1)
    assert np.allclose(d.X[:, :-1].mean(axis=0), 0, atol=1e-12)
    assert abs(d.y.mean()) < 1e-15


def test_write_csv_round_trip(tmp_path):
    d = datasets.synthetic_regression(n=12, m=3, seed=4)
    p = tmp_path / "out.csv"
    datasets.write_csv(p, d)
    back = datasets.load_csv(p)
    assert np.array_equal(back.X, d.X) and np.array_equal(back.y, d.y)


def test_synthetic_stand_in_shape():
    d = datasets.synthetic_istanbul()
    assert (d.n, d.m) == (536, 7)
    s = np.linalg.svd(d.X, compute_uv=False)
    assert s[-1] > 0 and s[0] / s[-1] < 10
    assert np.array_equal(datasets.synthetic_istanbul().X, d.X)


def test_fallback_without_file(monkeypatch):
    monkeypatch.delenv(datasets.ISTANBUL_ENV, raising=False)
    d, source = datasets.istanbul_or_synthetic(None)
    assert source == "synthetic" and isinstance(d, Dataset)


def test_rng_is_philox_and_seeded():
    a = datasets.make_rng(5).standard_normal(4)
    assert np.array_equal(a, datasets.make_rng(5).standard_normal(4))
    assert isinstance(datasets.make_rng(5).bit_generator, np.random.Philox)


@pytest.mark.skipif(not os.environ.get(datasets.ISTANBUL_ENV), reason="set ISTANBUL_CSV to the real file")
def test_real_istanbul_shape():
    d = datasets.load_istanbul(os.environ[datasets.ISTANBUL_ENV])
    assert d.X.shape == (536, 7) and d.y.shape == (536,)
