import numpy as np
import pytest

from gsekit import (
    DataError,
    Dataset,
    SyntheticSpec,
    TrainStatScaler,
    load_feature_csv,
    load_interactions_tsv,
    synth_generate,
    write_feature_csv,
    write_interactions_tsv,
    zscore_fit_apply,
)


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_load_feature_csv_minimal(tmp_path):
    path = _write(tmp_path / "d.csv", "sample_id,label,p1,p2\ns1,0,1.5,2.0\ns2,1,0.5,-1.0\n")
    ds = load_feature_csv(path)
    assert ds.n_samples == 2 and ds.n_features == 2
    assert ds.y.tolist() == [-1, 1]
    assert ds.feature_names == ("p1", "p2")
    assert ds.X[0].tolist() == [1.5, 2.0]


def test_load_feature_csv_single_class_loads(tmp_path):
    path = _write(tmp_path / "d.csv", "sample_id,label,p1\ns1,1,1.0\ns2,1,2.0\n")
    ds = load_feature_csv(path)
    assert np.all(ds.y == 1)


@pytest.mark.parametrize(
    "body",
    [
        "sample_id,label,p1\ns1,0,1.0,9.9\n",          # ragged
        "sample_id,label,p1\ns1,0,abc\n",               # non-numeric
        "sample_id,label,p1\ns1,0,1.0\ns1,1,2.0\n",     # duplicate id
        "sample_id,label,p1\ns1,2,1.0\n",               # unknown label
        "id,label,p1\ns1,0,1.0\n",                      # bad header
    ],
)
def test_load_feature_csv_errors(tmp_path, body):
    path = _write(tmp_path / "d.csv", body)
    with pytest.raises(DataError):
        load_feature_csv(path)


def test_feature_csv_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(70)
    ds = Dataset(
        X=rng.standard_normal((7, 4)) * 10.0 ** rng.integers(-8, 8, (7, 4)),
        y=np.where(rng.random(7) < 0.5, 1, -1),
        feature_names=tuple(f"p{i}" for i in range(4)),
        sample_ids=tuple(f"s{i}" for i in range(7)),
    )
    path = tmp_path / "d.csv"
    write_feature_csv(ds, path)
    back = load_feature_csv(path)
    assert np.array_equal(back.X, ds.X)
    assert np.array_equal(back.y, ds.y)
    assert back.sample_ids == ds.sample_ids


def test_load_interactions_basic(tmp_path):
    path = _write(
        tmp_path / "i.tsv",
        "protein1\tprotein2\tcombined_score\nA\tB\t500\nB\tC\t800\n",
    )
    loaded = load_interactions_tsv(path, ["A", "B", "C"])
    assert loaded.skipped == 0
    assert loaded.network.n_edges == 2
    assert loaded.network.edge_weights.tolist() == [0.5, 0.8]


def test_load_interactions_skips_unknown(tmp_path):
    path = _write(
        tmp_path / "i.tsv",
        "protein1\tprotein2\tcombined_score\nA\tB\t500\nA\tZZZ\t900\n",
    )
    loaded = load_interactions_tsv(path, ["A", "B"])
    assert loaded.skipped == 1
    assert loaded.network.n_edges == 1


def test_load_interactions_symmetric_duplicates_merge(tmp_path):
    path = _write(
        tmp_path / "i.tsv",
        "protein1\tprotein2\tcombined_score\nA\tB\t500\nB\tA\t500\n",
    )
    loaded = load_interactions_tsv(path, ["A", "B"])
    assert loaded.network.n_edges == 1


def test_load_interactions_conflicting_duplicate(tmp_path):
    path = _write(
        tmp_path / "i.tsv",
        "protein1\tprotein2\tcombined_score\nA\tB\t500\nB\tA\t600\n",
    )
    with pytest.raises(DataError):
        load_interactions_tsv(path, ["A", "B"])


@pytest.mark.parametrize(
    "body",
    [
        "protein1\tprotein2\tcombined_score\nA\tB\t1500\n",   # score out of range
        "protein1\tprotein2\tcombined_score\nA\tB\tx\n",      # non-integer score
        "protein1\tprotein2\tcombined_score\nA\tB\n",         # malformed row
        "p1\tp2\tscore\nA\tB\t500\n",                         # bad header
    ],
)
def test_load_interactions_errors(tmp_path, body):
    path = _write(tmp_path / "i.tsv", body)
    with pytest.raises(DataError):
        load_interactions_tsv(path, ["A", "B"])


def test_load_interactions_extra_columns(tmp_path):
    path = _write(
        tmp_path / "i.tsv",
        "protein1\tprotein2\texperiments\tcombined_score\nA\tB\t10\t250\n",
    )
    loaded = load_interactions_tsv(path, ["A", "B"])
    assert loaded.network.edge_weights.tolist() == [0.25]


def test_interactions_round_trip(tmp_path):
    ds, net, _ = synth_generate(SyntheticSpec(n_features=12, n_samples=5, seed=3,
                                              edge_density=0.3, n_signal_edges=2))
    path = tmp_path / "net.tsv"
    write_interactions_tsv(net, path)
    back = load_interactions_tsv(path, list(net.feature_names)).network
    assert back.n_edges == net.n_edges
    np.testing.assert_allclose(back.edge_weights, net.edge_weights, atol=5e-4)


def test_zscore_hand_case():
    Z, _, mu, sigma = zscore_fit_apply(np.array([[1.0], [3.0]]))
    assert Z[:, 0].tolist() == [-1.0, 1.0]  # population sigma convention
    assert mu[0] == 2.0 and sigma[0] == 1.0


def test_zscore_constant_column():
    Z, other, _, sigma = zscore_fit_apply(
        np.array([[5.0, 1.0], [5.0, 3.0]]), np.array([[5.0, 2.0]])
    )
    assert np.all(Z[:, 0] == 0.0)
    assert sigma[0] == 1.0
    assert other[0, 0] == 0.0


def test_zscore_train_stats_reproduce_zero_mean():
    rng = np.random.default_rng(71)
    X = rng.standard_normal((40, 6)) * 3 + 1
    Z, _, _, _ = zscore_fit_apply(X)
    assert np.all(np.abs(Z.mean(axis=0)) < 1e-12)


def test_train_stat_scaler():
    rng = np.random.default_rng(72)
    X_train = rng.standard_normal((30, 4)) * 2 + 5
    X_test = rng.standard_normal((10, 4))
    scaler = TrainStatScaler().fit(X_train)
    Z_train, Z_test, _, _ = zscore_fit_apply(X_train, X_test)
    np.testing.assert_allclose(scaler.transform(X_train), Z_train)
    np.testing.assert_allclose(scaler.transform(X_test), Z_test)


def test_synth_deterministic():
    spec = SyntheticSpec(n_features=20, n_samples=100, seed=17, edge_density=0.2)
    a_ds, a_net, a_sig = synth_generate(spec)
    b_ds, b_net, b_sig = synth_generate(spec)
    assert np.array_equal(a_ds.X, b_ds.X)
    assert np.array_equal(a_ds.y, b_ds.y)
    assert a_net.uid == b_net.uid
    assert a_sig == b_sig


def test_synth_noiseless_labels_match_construction():
    spec = SyntheticSpec(n_features=15, n_samples=300, seed=5, edge_density=0.3,
                         n_signal_edges=1, noise_std=0.0)
    ds, net, signal = synth_generate(spec)
    (i, j) = signal[0]
    w = net.adjacency[i, j]
    expected = np.where(w * ds.X[:, i] * ds.X[:, j] >= 0, 1, -1)
    assert np.array_equal(ds.y, expected)


def test_synth_label_balance():
    ds, _, _ = synth_generate(SyntheticSpec(seed=9))
    share = float((ds.y == 1).mean())
    assert 0.45 <= share <= 0.55


def test_synth_weights_in_unit_interval():
    _, net, _ = synth_generate(SyntheticSpec(n_features=25, n_samples=10, seed=2,
                                             edge_density=0.4))
    w = net.edge_weights
    assert np.all(w > 0) and np.all(w <= 1.0)


def test_synth_density_too_low():
    with pytest.raises(DataError):
        synth_generate(SyntheticSpec(n_features=10, n_samples=10, edge_density=0.02,
                                     n_signal_edges=5))


def test_dataset_validation():
    with pytest.raises(DataError):
        Dataset(np.zeros((2, 2)), np.array([1, -1]), ("a",), ("s1", "s2"))
    with pytest.raises(DataError):
        Dataset(np.zeros((2, 2)), np.array([1, -1]), ("a", "b"), ("s1", "s1"))
    with pytest.raises(DataError):
        Dataset(np.zeros((2, 2)), np.array([1, 3]), ("a", "b"), ("s1", "s2"))
