import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from frwkv.data import (
    SeriesTable, load_csv, make_windows, split_borders, synth_multiperiodic,
)
from frwkv.errors import DataError
from frwkv.spectral import rfft


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def table(L, N=2, name="synthetic"):
    vals = np.arange(L * N, dtype=float).reshape(L, N)
    return SeriesTable([f"v{j}" for j in range(N)], vals, source=name)


# csv ------------------------------------------------------------------------

def test_three_rows_recovered_exactly(tmp_path):
    p = write(tmp_path, "date,a,b\n2020-01-01,1.5,-2\n2020-01-02,0.25,3e2\n2020-01-03,7,8\n")
    t = load_csv(p, expected_vars=2, expected_rows=3)
    assert t.names == ["a", "b"]
    assert np.array_equal(t.values, [[1.5, -2.0], [0.25, 300.0], [7.0, 8.0]])
    assert t.timestamps[0] == "2020-01-01"


def test_blank_cell_names_location(tmp_path):
    p = write(tmp_path, "date,a,b\nt0,1,2\nt1,,4\n")
    with pytest.raises(DataError, match=r":3: missing value in column 'a'"):
        load_csv(p)


def test_unparsable_cell_names_location(tmp_path):
    p = write(tmp_path, "date,a,b\nt0,1,2\nt1,3,x\n")
    with pytest.raises(DataError, match=r":3: cannot parse 'x' in column 'b'"):
        load_csv(p)


def test_missing_file_names_path(tmp_path):
    with pytest.raises(FileNotFoundError, match="absent.csv"):
        load_csv(tmp_path / "absent.csv")


def test_declared_shape_checked(tmp_path):
    p = write(tmp_path, "date,a\nt0,1\n")
    with pytest.raises(DataError, match="expected 7 variables"):
        load_csv(p, expected_vars=7)


# windows --------------------------------------------------------------------

def test_single_split_window_count():
    ds = make_windows(table(200), 96, 96, "single", scale=False)
    assert ds.n_windows("train") == 9


def test_boundary_gives_one_window():
    ds = make_windows(table(192), 96, 96, "single", scale=False)
    assert ds.n_windows("train") == 1
    x, y = ds.batch(ds.starts("train"))
    assert x.shape == (1, 2, 96) and y.shape == (1, 2, 96)


def test_too_short_states_minimum():
    with pytest.raises(DataError, match="192"):
        make_windows(table(191), 96, 96, "single")


def test_ett_hourly_borders():
    assert split_borders("ETTh1", 17420) == [(0, 8640), (8640, 11520), (11520, 14400)]
    assert split_borders("ETTm1", 69680)[2] == (46080, 57600)


def test_generic_ratio_borders():
    assert split_borders("Weather", 1000) == [(0, 700), (700, 800), (800, 1000)]


def test_targets_follow_inputs():
    ds = make_windows(table(60, N=1), 8, 4, (0.6, 0.2, 0.2), scale=False)
    x, y = ds.batch(ds.starts("val"))
    # the series is 0..59, so values equal row indices
    assert np.array_equal(y[:, 0, 0], x[:, 0, -1] + 1)
    assert ds.starts("val")[0] == 36


def test_global_scaling_fit_on_train_only():
    t = table(100, N=1)
    ds = make_windows(t, 8, 4, (0.7, 0.1, 0.2), scale=True)
    raw = t.values[:70]
    np.testing.assert_allclose(ds.series[:70].mean(), 0.0, atol=1e-12)
    np.testing.assert_allclose(ds.scaler_std, raw.std(axis=0))


@settings(max_examples=40, deadline=None)
@given(st.integers(30, 400), st.integers(2, 16), st.integers(1, 12))
def test_window_invariants(L, T, tau):
    if L < 3 * (T + tau):
        return
    ds = make_windows(table(L, N=1), T, tau, (0.7, 0.1, 0.2), scale=False)
    last = {}
    for split in ("train", "val", "test"):
        s, e = ds.borders[split]
        # count formula per segment
        assert ds.n_windows(split) == max(0, (e - s) - (T + tau) + 1)
        starts = ds.starts(split)
        if len(starts) == 0:
            continue
        x, y = ds.batch(starts)
        # values are row indices: inputs end strictly before targets begin
        assert np.all(x[:, 0, -1] < y[:, 0, 0])
        assert np.all(x[:, 0, 0] >= s) and np.all(y[:, 0, -1] < e)
        last[split] = (x[:, 0, 0].min(), y[:, 0, -1].max())
    # chronology
    if "val" in last:
        assert last["train"][1] < last["val"][0]
    if "val" in last and "test" in last:
        assert last["val"][1] < last["test"][0]


# synthetic ------------------------------------------------------------------

def test_single_period_exactly_periodic():
    v = synth_multiperiodic(200, 2, [7], 0.0, seed=3).values
    assert np.abs(v[:-7] - v[7:]).max() < 1e-12


def test_period_eight_energy_at_bin_twelve():
    v = synth_multiperiodic(96, 1, [8], 0.0, seed=1).values[:, 0]
    power = np.abs(rfft(v).to_complex()) ** 2
    assert power.argmax() == 12
    assert power[12] / power.sum() > 1 - 1e-12


def test_synthetic_deterministic():
    a = synth_multiperiodic(50, 3, [12, 5], 0.1, seed=9)
    b = synth_multiperiodic(50, 3, [12, 5], 0.1, seed=9)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, synth_multiperiodic(50, 3, [12, 5], 0.1, seed=10).values)


def test_synthetic_rejects_bad_periods():
    with pytest.raises(DataError):
        synth_multiperiodic(10, 1, [])
    with pytest.raises(DataError):
        synth_multiperiodic(10, 1, [1])
