import numpy as np
import pytest

from fcvae.data import (PreprocessConfig, TimeSeries, WindowBatch,
                        apply_standardization, augment, augment_pattern,
                        augment_value, fill_missing, inject_missing, load_csv,
                        load_dataset, make_windows, pool_windows,
                        preprocess_curve, standardize, write_csv)
from fcvae.errors import ConfigError, DataError, ParseError


def series(values, labels=None, missing=None, interval=1, curve_id="c"):
    values = np.asarray(values, dtype=np.float64)
    n = len(values)
    return TimeSeries(
        curve_id,
        np.arange(n, dtype=np.int64) * interval,
        values,
        np.zeros(n, dtype=np.int8) if labels is None else np.asarray(labels),
        np.zeros(n, dtype=bool) if missing is None else np.asarray(missing, dtype=bool),
    )


# ---------------------------------------------------------------------------
# CSV parsing


def test_csv_round_trip(tmp_path):
    ts = series([1.5, np.nan, -2.0, 0.25], labels=[0, 0, 1, 0],
                missing=[False, True, False, False], interval=60)
    path = tmp_path / "curve_a.csv"
    write_csv(ts, path)
    back = load_csv(path)
    assert back.curve_id == "curve_a"
    assert np.array_equal(back.timestamps, ts.timestamps)
    assert np.array_equal(back.labels, ts.labels)
    assert np.array_equal(back.missing, ts.missing)
    present = ~ts.missing
    assert np.array_equal(back.values[present], ts.values[present])
    assert np.isnan(back.values[1])


def test_csv_sorts_rows_by_timestamp(tmp_path):
    path = tmp_path / "c.csv"
    path.write_text("timestamp,value,label\n120,3.0,0\n0,1.0,0\n60,2.0,1\n")
    ts = load_csv(path)
    assert np.array_equal(ts.timestamps, [0, 60, 120])
    assert np.array_equal(ts.values, [1.0, 2.0, 3.0])
    assert np.array_equal(ts.labels, [0, 1, 0])


def test_csv_skips_blank_lines(tmp_path):
    path = tmp_path / "c.csv"
    path.write_text("timestamp,value,label\n0,1.0,0\n\n60,2.0,0\n\n")
    assert len(load_csv(path)) == 2


def test_csv_empty_value_is_missing(tmp_path):
    path = tmp_path / "c.csv"
    path.write_text("timestamp,value,label\n0,,0\n60,2.0,0\n")
    ts = load_csv(path)
    assert ts.missing[0] and not ts.missing[1]
    assert np.isnan(ts.values[0])


def test_csv_header_and_field_errors(tmp_path):
    bad_header = tmp_path / "h.csv"
    bad_header.write_text("time,value,label\n0,1.0,0\n")
    with pytest.raises(ParseError, match=":1:"):
        load_csv(bad_header)

    bad_label = tmp_path / "l.csv"
    bad_label.write_text("timestamp,value,label\n0,1.0,0\n60,1.0,2\n")
    with pytest.raises(ParseError, match=":3:"):
        load_csv(bad_label)

    bad_value = tmp_path / "v.csv"
    bad_value.write_text("timestamp,value,label\n0,abc,0\n")
    with pytest.raises(ParseError, match="bad value"):
        load_csv(bad_value)

    bad_ts = tmp_path / "t.csv"
    bad_ts.write_text("timestamp,value,label\n1.5,1.0,0\n")
    with pytest.raises(ParseError, match="bad timestamp"):
        load_csv(bad_ts)

    wide = tmp_path / "w.csv"
    wide.write_text("timestamp,value,label\n0,1.0,0,9\n")
    with pytest.raises(ParseError, match="3 fields"):
        load_csv(wide)


def test_csv_duplicate_timestamp(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("timestamp,value,label\n0,1.0,0\n60,2.0,0\n60,3.0,0\n")
    with pytest.raises(DataError, match="duplicate"):
        load_csv(path)


def test_load_dataset(tmp_path):
    for name in ["b", "a"]:
        write_csv(series([1.0, 2.0, 3.0], curve_id=name), tmp_path / f"{name}.csv")
    curves = load_dataset(tmp_path)
    assert [c.curve_id for c in curves] == ["a", "b"]
    with pytest.raises(DataError):
        load_dataset(tmp_path / "nope")
    empty = tmp_path / "empty"
    empty.mkdir()
    with pytest.raises(DataError):
        load_dataset(empty)


def test_time_series_length_mismatch():
    with pytest.raises(DataError):
        TimeSeries("x", np.arange(3), np.zeros(2), np.zeros(3, np.int8),
                   np.zeros(3, bool))


# ---------------------------------------------------------------------------
# filling and standardization


def test_fill_missing_interpolates_gaps():
    # grid 0,60,...: timestamps 120 and 180 absent entirely
    ts = TimeSeries("c", np.array([0, 60, 240, 300]), np.array([0.0, 1.0, 4.0, 5.0]),
                    np.zeros(4, np.int8), np.zeros(4, bool))
    out = fill_missing(ts)
    assert np.array_equal(out.timestamps, [0, 60, 120, 180, 240, 300])
    assert np.allclose(out.values, [0, 1, 2, 3, 4, 5])
    assert np.array_equal(out.missing, [False, False, True, True, False, False])
    assert np.array_equal(out.labels, [0, 0, 0, 0, 0, 0])


def test_fill_missing_edges_take_nearest():
    ts = series([np.nan, np.nan, 3.0, 4.0, np.nan], missing=[1, 1, 0, 0, 1])
    out = fill_missing(ts)
    assert np.allclose(out.values, [3.0, 3.0, 3.0, 4.0, 4.0])


def test_fill_missing_label_handling():
    vals = [1.0, 2.0, 100.0, 4.0, 5.0]
    labs = [0, 0, 1, 0, 0]
    bridged = fill_missing(series(vals, labels=labs))
    # training mode treats the labeled point as untrusted and bridges it
    assert abs(bridged.values[2] - 3.0) < 1e-12
    assert bridged.labels[2] == 1
    kept = fill_missing(series(vals, labels=labs), use_labels=False)
    # scoring mode must hand the anomalous value through unchanged
    assert kept.values[2] == 100.0


def test_fill_missing_idempotent():
    rng = np.random.default_rng(0)
    vals = rng.normal(size=50)
    miss = rng.random(50) < 0.2
    vals[miss] = np.nan
    labs = (rng.random(50) < 0.1).astype(np.int8)
    ts = series(vals, labels=labs, missing=miss, interval=30)
    once = fill_missing(ts)
    twice = fill_missing(once)
    assert np.array_equal(once.timestamps, twice.timestamps)
    assert np.array_equal(once.values, twice.values)
    assert np.array_equal(once.missing, twice.missing)


def test_fill_missing_errors():
    ts = TimeSeries("c", np.array([0, 60, 120, 121]), np.zeros(4), np.zeros(4, np.int8),
                    np.zeros(4, bool))
    with pytest.raises(DataError, match="not aligned"):
        fill_missing(ts)  # 121 is off the modal 60-grid
    all_bad = series([np.nan, np.nan], missing=[1, 1])
    with pytest.raises(DataError, match="no normal points"):
        fill_missing(all_bad)
    with pytest.raises(DataError):
        fill_missing(series([1.0]))


def test_standardize_example():
    out, mean, std = standardize(series([2.0, 4.0, 6.0]))
    assert mean == 4.0
    assert abs(std - np.sqrt(8.0 / 3.0)) < 1e-12
    want = np.array([-1.224744871391589, 0.0, 1.224744871391589])
    assert np.allclose(out.values, want, atol=1e-12)


def test_standardize_excludes_labeled_and_missing():
    ts = series([2.0, 4.0, 6.0, 1000.0, np.nan],
                labels=[0, 0, 0, 1, 0], missing=[0, 0, 0, 0, 1])
    out, mean, std = standardize(ts)
    assert mean == 4.0  # stats from the three normal points only
    # but every value is transformed, including the anomalous one
    assert out.values[3] == (1000.0 - mean) / std


def test_standardize_constant_series_clamps_std():
    out, mean, std = standardize(series([5.0, 5.0, 5.0]))
    assert std == 1.0
    assert np.allclose(out.values, 0.0)


def test_apply_standardization_round_trip():
    rng = np.random.default_rng(1)
    ts = series(rng.normal(3.0, 2.5, size=40))
    out, mean, std = standardize(ts)
    back = apply_standardization(out, -mean / std, 1.0 / std)
    assert np.allclose(back.values, ts.values, atol=1e-9)


def test_preprocess_curve_composes():
    ts = TimeSeries("c", np.array([0, 60, 180]), np.array([2.0, 4.0, 6.0]),
                    np.zeros(3, np.int8), np.zeros(3, bool))
    out, mean, std = preprocess_curve(ts)
    assert len(out) == 4  # gap at 120 completed
    assert not np.any(np.isnan(out.values))
    normal = ~out.missing
    assert abs(out.values[normal].mean()) < 1e-12


# ---------------------------------------------------------------------------
# windowing


def test_make_windows_counts_and_ends():
    ts = series(np.arange(10.0))
    got = make_windows(ts, 4)
    assert got.n == 7
    assert np.array_equal(got.last_index, [3, 4, 5, 6, 7, 8, 9])
    assert np.array_equal(got.windows[0], [0, 1, 2, 3])
    assert np.array_equal(got.windows[-1], [6, 7, 8, 9])

    strided = make_windows(ts, 4, stride=3)
    assert strided.n == 3
    assert np.array_equal(strided.last_index, [3, 6, 9])


def test_make_windows_alpha_from_flags():
    ts = series(np.arange(6.0), labels=[0, 1, 0, 0, 0, 0],
                missing=[0, 0, 0, 0, 1, 0])
    got = make_windows(ts, 3)
    assert np.array_equal(got.alpha, [[1, 0, 1], [0, 1, 1], [1, 1, 0], [1, 0, 1]])


def test_make_windows_short_series(caplog):
    ts = series([1.0, 2.0])
    got = make_windows(ts, 5)
    assert got.n == 0
    assert got.windows.shape == (0, 5)


def test_pool_windows_provenance():
    a = make_windows(series(np.arange(6.0)), 3)
    b = make_windows(series(np.arange(8.0) * 2), 3)
    pooled = pool_windows([a, b])
    assert pooled.n == a.n + b.n
    assert np.array_equal(pooled.curve_index, [0] * a.n + [1] * b.n)
    with pytest.raises(ConfigError):
        pool_windows([a, make_windows(series(np.arange(8.0)), 4)])
    with pytest.raises(ConfigError):
        pool_windows([])


# ---------------------------------------------------------------------------
# corruption and augmentation


def test_inject_missing_rate_and_effect():
    rng = np.random.default_rng(2)
    batch = WindowBatch(np.ones((100, 100)), np.ones((100, 100)),
                        np.arange(100, dtype=np.int64))
    out = inject_missing(batch, 0.1, rng)
    frac = np.mean(out.windows == 0.0)
    assert abs(frac - 0.1) < 0.01
    assert np.array_equal(out.windows == 0.0, out.alpha == 0.0)
    # original untouched, zero rate is an identity copy
    assert np.all(batch.windows == 1.0)
    same = inject_missing(batch, 0.0, rng)
    assert np.array_equal(same.windows, batch.windows)


def test_augment_pattern_splice():
    rng = np.random.default_rng(3)
    a = np.zeros(30)
    b = np.ones(30)
    for _ in range(50):
        out, alpha = augment_pattern(a, b, rng)
        j = int(np.argmax(out == 1.0)) if out.any() else 30
        assert 1 <= j < 30  # always keeps at least one original point
        assert np.all(out[:j] == 0.0) and np.all(out[j:] == 1.0)
        zeros = np.flatnonzero(alpha == 0.0)
        assert 1 <= zeros.size <= 4
        assert np.array_equal(zeros, np.arange(j, min(j + 4, 30)))
    with pytest.raises(ConfigError):
        augment_pattern(a, np.ones(29), rng)


def test_augment_value_contracts():
    rng = np.random.default_rng(4)
    for w in [1, 5, 20, 40, 100]:
        window = rng.normal(size=w)
        for _ in range(20):
            out, alpha = augment_value(window, rng)
            moved = np.flatnonzero(out != window)
            m_max = max(1, w // 20)
            assert 1 <= moved.size <= m_max
            assert np.array_equal(np.sort(np.flatnonzero(alpha == 0.0)), moved)
            assert alpha.sum() == w - moved.size


def test_augment_value_on_constant_window_still_mutates():
    rng = np.random.default_rng(5)
    for _ in range(50):
        out, alpha = augment_value(np.zeros(10), rng)
        changed = np.flatnonzero(out != 0.0)
        assert changed.size == np.sum(alpha == 0.0) >= 1


def test_augment_replaces_requested_fraction():
    rng = np.random.default_rng(6)
    curves = [series(np.full(60, float(i)), curve_id=f"c{i}") for i in range(3)]
    batches = [make_windows(c, 10) for c in curves]
    pooled = pool_windows(batches)
    out = augment(pooled, 0.2, curves, rng)
    changed = np.flatnonzero(np.any(out.windows != pooled.windows, axis=1))
    assert changed.size == round(0.2 * pooled.n)
    # untouched rows keep alpha
    keep = np.setdiff1d(np.arange(pooled.n), changed)
    assert np.array_equal(out.alpha[keep], pooled.alpha[keep])
    # zero rate is a pure copy
    same = augment(pooled, 0.0, curves, rng)
    assert np.array_equal(same.windows, pooled.windows)


def test_augment_pattern_uses_donor_from_other_curve():
    rng = np.random.default_rng(7)
    # curve values identify their origin: curve 0 is all 10s, curve 1 all -10s
    curves = [series(np.full(50, 10.0), curve_id="a"),
              series(np.full(50, -10.0), curve_id="b")]
    pooled = pool_windows([make_windows(c, 8) for c in curves])
    out = augment(pooled, 0.5, curves, rng)
    changed = np.flatnonzero(np.any(out.windows != pooled.windows, axis=1))
    n_rep = round(0.5 * pooled.n)
    spliced = 0
    for i in changed:
        own = 10.0 if pooled.curve_index[i] == 0 else -10.0
        other = -own
        w = out.windows[i]
        if np.any(w == other):
            spliced += 1
            j = int(np.argmax(w == other))
            assert np.all(w[:j] == own) and np.all(w[j:] == other)
    assert spliced == n_rep // 2


def test_augment_alpha_carries_donor_flags():
    rng = np.random.default_rng(8)
    donor = series(np.full(40, -5.0), labels=[1] * 40, curve_id="bad_donor")
    own = series(np.zeros(40), curve_id="own")
    pooled = pool_windows([make_windows(own, 8), make_windows(donor, 8)])
    # only windows of curve 0 can be pattern-spliced (donor must differ)
    out = augment(pooled, 0.4, [own, donor], rng)
    for i in range(pooled.n):
        w = out.windows[i]
        if pooled.curve_index[i] == 0 and np.any(w == -5.0):
            # every point taken from the all-anomalous donor must be masked
            assert np.all(out.alpha[i][w == -5.0] == 0.0)


def test_augment_single_curve_falls_back_to_value_mutation():
    rng = np.random.default_rng(9)
    curves = [series(np.zeros(40), curve_id="only")]
    pooled = pool_windows([make_windows(curves[0], 8)])
    out = augment(pooled, 0.3, curves, rng)
    changed = np.flatnonzero(np.any(out.windows != pooled.windows, axis=1))
    assert changed.size == round(0.3 * pooled.n)
    for i in changed:
        moved = np.flatnonzero(out.windows[i] != 0.0)
        assert 1 <= moved.size <= max(1, 8 // 20)


def test_preprocess_config_validation():
    PreprocessConfig().validate()
    with pytest.raises(ConfigError):
        PreprocessConfig(window=4).validate()
    with pytest.raises(ConfigError):
        PreprocessConfig(stride=0).validate()
    with pytest.raises(ConfigError):
        PreprocessConfig(missing_rate=1.0).validate()
    with pytest.raises(ConfigError):
        PreprocessConfig(augment_rate=-0.1).validate()
