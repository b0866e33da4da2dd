import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from blogfeat import dataset as ds
from blogfeat.errors import (
    BadRatios,
    EmptyInput,
    RaggedRow,
    SchemaMismatch,
    UnparseableCell,
    ZeroVariance,
)


def table(rows):
    return ds.RawTable(np.asarray(rows, dtype=float))


def test_parse_simple():
    t = ds.parse_table("1,2\n3,4\n5,6")
    assert (t.n_rows, t.n_cols) == (3, 2)
    np.testing.assert_array_equal(t.values, [[1, 2], [3, 4], [5, 6]])


def test_parse_crlf_and_trailing_newline():
    t = ds.parse_table("1,2\r\n3,4\r\n")
    assert (t.n_rows, t.n_cols) == (2, 2)


def test_parse_ragged_reports_row():
    with pytest.raises(RaggedRow) as exc:
        ds.parse_table("1,2\n3")
    assert exc.value.row == 2


def test_parse_bad_cell_reports_position():
    with pytest.raises(UnparseableCell) as exc:
        ds.parse_table("1,2\n3,abc")
    assert (exc.value.row, exc.value.column) == (2, 2)


def test_parse_rejects_nan():
    with pytest.raises(UnparseableCell):
        ds.parse_table("1,nan")


def test_parse_other_delimiter():
    assert ds.parse_table("1;2\n3;4", ";").n_cols == 2


def test_load_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        ds.load_table(tmp_path / "nope.csv")


def test_load_tables_stacks(tmp_path):
    (tmp_path / "a.csv").write_text("1,2\n")
    (tmp_path / "b.csv").write_text("3,4\n5,6\n")
    t = ds.load_tables([tmp_path / "a.csv", tmp_path / "b.csv"])
    assert t.n_rows == 3


@pytest.mark.parametrize(
    "col, kind",
    [
        ([0, 0, 0], ds.ColumnKind.ALL_ZERO),
        ([0, 1, 1, 0], ds.ColumnKind.BINARY),
        ([1, 1, 1], ds.ColumnKind.BINARY),
        ([0, 5, 0], ds.ColumnKind.CONTINUOUS),
        ([0.5, 1, 0], ds.ColumnKind.CONTINUOUS),
    ],
)
def test_classify_column(col, kind):
    assert ds.classify_column(np.array(col, dtype=float)) is kind


def test_classify_columns_skips_target():
    t = table([[0, 1, 2.5, 9], [0, 0, 3.5, 7]])
    assert ds.classify_columns(t, target_col=3) == [
        ds.ColumnKind.ALL_ZERO, ds.ColumnKind.BINARY, ds.ColumnKind.CONTINUOUS]


def test_fit_preprocess_worked_example():
    # columns: continuous [1,2,3], binary [0,1,0], zero, target [10,20,30]
    t = table([[1, 0, 0, 10], [2, 1, 0, 20], [3, 0, 0, 30]])
    d, params = ds.fit_preprocess(t)
    np.testing.assert_allclose(d.X[:, 0], [-1, 0, 1])
    np.testing.assert_array_equal(d.X[:, 1], [0, 1, 0])
    assert d.p == 2
    assert params.dropped_indices == [2]
    assert params.means == [2.0] and params.sds == [1.0]
    np.testing.assert_allclose(d.y, [-1, 0, 1])
    assert params.target_mean == 20.0 and params.target_sd == 10.0


def test_fit_preprocess_zero_variance():
    t = table([[5, 1, 1.0], [5, 0, 2.0], [5, 1, 3.0]])  # 5 is neither 0 nor 1: continuous
    with pytest.raises(ZeroVariance) as exc:
        ds.fit_preprocess(t)
    assert exc.value.column == 0


def test_fit_preprocess_needs_two_rows():
    with pytest.raises(EmptyInput):
        ds.fit_preprocess(table([[1, 2]]))


def test_blog_shaped_census(rng):
    # 280 features: 4 zero, 58 continuous, 218 binary, then target
    n = 200
    zero = np.zeros((n, 4))
    cont = rng.normal(size=(n, 58))
    binary = rng.integers(0, 2, size=(n, 218)).astype(float)
    binary[0], binary[1] = 0.0, 1.0  # every binary column takes both values
    cols = np.hstack([cont[:, :30], zero[:, :2], binary, zero[:, 2:], cont[:, 30:]])
    raw = ds.RawTable(np.column_stack([cols, rng.poisson(3, n)]))
    assert raw.n_cols == 281
    assert ds.census(ds.classify_columns(raw)) == {"dropped": 4, "continuous": 58, "binary": 218}
    d, _ = ds.fit_preprocess(raw)
    assert d.p == 276


def test_apply_reproduces_fit_exactly(rng):
    raw = ds.RawTable(np.column_stack([rng.normal(size=(30, 3)), rng.integers(0, 2, 30),
                                       np.zeros(30), rng.normal(size=30)]))
    d, params = ds.fit_preprocess(raw)
    d2 = ds.apply_preprocess(raw, -1, params)
    np.testing.assert_array_equal(d.X, d2.X)
    np.testing.assert_array_equal(d.y, d2.y)


def test_apply_uses_stored_stats():
    params = ds.ScalerParams([], [ds.ColumnKind.CONTINUOUS], [2.0], [1.0], 0.0, 1.0)
    d = ds.apply_preprocess(table([[4, 0.0]]), -1, params)
    assert d.X[0, 0] == 2.0


def test_apply_schema_mismatch():
    params = ds.ScalerParams([0], [ds.ColumnKind.CONTINUOUS] * 279, [0.0] * 279, [1.0] * 279, 0.0, 1.0)
    assert params.n_features == 280
    with pytest.raises(SchemaMismatch):
        ds.apply_preprocess(ds.RawTable(np.zeros((2, 280))), -1, params)


def test_scaler_json_round_trip(tmp_path, rng):
    raw = ds.RawTable(np.column_stack([rng.normal(size=(20, 2)) * 1e-7 + 1 / 3,
                                       rng.integers(0, 2, 20), rng.normal(size=20)]))
    _, params = ds.fit_preprocess(raw)
    params.save(tmp_path / "s.json")
    back = ds.ScalerParams.load(tmp_path / "s.json")
    assert back == params
    assert set(json.loads((tmp_path / "s.json").read_text())) == {
        "dropped_indices", "kinds", "means", "sds", "target_mean", "target_sd"}


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(3, 20), st.integers(2, 6)),
              elements=st.floats(-1e3, 1e3)))
def test_preprocess_standardises(values):
    raw = ds.RawTable(values)
    try:
        d, params = ds.fit_preprocess(raw)
    except ZeroVariance:
        return
    kinds = ds.classify_columns(raw)
    assert len(kinds) == raw.n_cols - 1
    for j, k in enumerate(d.kinds):
        if k is ds.ColumnKind.CONTINUOUS:
            col = d.X[:, j]
            scale = max(1.0, np.abs(values).max() / min(params.sds))
            assert abs(col.mean()) < 1e-10 * scale
            assert abs(col.std(ddof=1) - 1) < 1e-10 * scale


def test_split_sizes_and_determinism():
    d = ds.Dataset(np.arange(20.0).reshape(10, 2), np.arange(10.0))
    tr, va, te = ds.split(d, (0.6, 0.2, 0.2), seed=3)
    assert (tr.n, va.n, te.n) == (6, 2, 2)
    a = ds.split_indices(10, (0.6, 0.2, 0.2), 3)
    b = ds.split_indices(10, (0.6, 0.2, 0.2), 3)
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x, y)


def test_split_remainder_goes_to_train():
    tr, va, te = ds.split_indices(11, (0.6, 0.2, 0.2), 0)
    assert (len(tr), len(va), len(te)) == (7, 2, 2)


@pytest.mark.parametrize("ratios", [(0.5, 0.5, 0.5), (1.0, 0.0, 0.0), (0.6, 0.4)])
def test_split_bad_ratios(ratios):
    with pytest.raises(BadRatios):
        ds.split_indices(10, ratios, 0)


@given(st.integers(3, 500), st.integers(0, 2**32))
def test_split_partitions(n, seed):
    idx = ds.split_indices(n, (0.6, 0.2, 0.2), seed)
    allrows = np.concatenate(idx)
    assert sorted(allrows.tolist()) == list(range(n))


def test_histogram_two_masses():
    h = ds.histogram([0, 0, 1, 1], 2)
    np.testing.assert_array_equal(h.counts, [2, 2])
    np.testing.assert_allclose(h.bin_edges, [0, 0.5, 1])


@pytest.mark.parametrize("bins", [1, 3, 50])
def test_histogram_single_value(bins):
    h = ds.histogram([2.5, 2.5, 2.5], bins)
    assert h.counts.sum() == 3 and np.count_nonzero(h.counts) == 1
    assert np.all(np.diff(h.bin_edges) > 0)


def test_histogram_empty():
    with pytest.raises(EmptyInput):
        ds.histogram([], 5)


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=200), st.integers(1, 60))
def test_histogram_counts_match_direct_count(values, bins):
    h = ds.histogram(values, bins)
    assert h.counts.sum() == len(values)
    assert np.all(np.diff(h.bin_edges) > 0)
    # direct counting oracle: half-open bins, last bin closed
    edges = h.bin_edges.tolist()
    expected = [0] * bins
    for v in values:
        i = max(j for j in range(bins) if edges[j] <= v)
        expected[i] += 1
    assert h.counts.tolist() == expected
    assert edges[0] <= min(values) and max(values) <= edges[-1]
