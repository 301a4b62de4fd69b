import math
import time

import numpy as np
import pytest

from gsekit import (
    DataError,
    GraphSpaceEmbedding,
    GuardError,
    InstanceGraph,
    KernelSpec,
    build_network,
    complete_network,
    dense_matrix_view,
    edge_value_matrix,
    gse_from_distances,
    gse_matrix,
    gse_series_reference,
    gse_value,
    instance_graph,
    instance_graphs,
    kernel_matrix,
    min_eigenvalue_ratio,
    pairwise_sq_distances,
    rbf_matrix,
    read_kernel_binary,
    read_kernel_csv,
    rw_exp_kernel,
    rw_finite_kernel,
    squared_frobenius_distance,
    write_kernel_binary,
    write_kernel_csv,
)
from gsekit.kernels import _r_e


def _random_network(rng, n, density=1.0):
    triples = [
        (i, j, rng.uniform(0.05, 1.0))
        for i in range(n)
        for j in range(i + 1, n)
        if rng.random() < density
    ]
    return build_network([f"f{i}" for i in range(n)], triples)


def test_gse_value_identical_graphs():
    assert gse_value(0.0, 0.7) == 1.0


def test_gse_value_closed_form():
    assert gse_value(2.0, 0.5) == pytest.approx(math.exp(-1.0), abs=1e-12)


def test_gse_value_monotone():
    assert gse_value(1, 1) > gse_value(2, 1) > gse_value(3, 1)


def test_gse_value_validation():
    with pytest.raises(DataError):
        gse_value(-1.0, 1.0)
    with pytest.raises(DataError):
        gse_value(1.0, 0.0)


def test_gse_matrix_trivial():
    net = build_network(["a", "b"], [(0, 1, 1.0)])
    g = instance_graph(net, [1.0, 2.0])
    assert gse_matrix([g], 0.5).values.tolist() == [[1.0]]
    K = gse_matrix([g, g], 0.5).values
    assert np.array_equal(K, np.ones((2, 2)))


def test_gse_matrix_from_hand_distance():
    net = build_network(["a", "b", "c"], [(0, 1, 0.5), (1, 2, 0.8)])
    g = instance_graph(net, [1.0, 2.0, -1.0])
    h = instance_graph(net, [1.0, 1.0, 0.5])
    K = gse_matrix([g, h], 0.2).values
    assert K[0, 1] == pytest.approx(math.exp(-0.85), rel=1e-9)
    assert K[0, 0] == K[1, 1] == 1.0


def test_series_reference_identical_graph_reaches_one():
    net = build_network(["a", "b", "c"], [(0, 1, 0.5), (1, 2, 0.8)])
    g = instance_graph(net, [0.6, 0.8, -0.4])
    assert gse_series_reference(g, g, 0.9, 25) == pytest.approx(1.0, abs=1e-8)


def test_series_reference_single_edge_scalar_series():
    net = build_network(["a", "b"], [(0, 1, 1.0)])
    g = instance_graph(net, [1.0, 1.0])
    for nu in (0.1, 0.5, 1.0):
        closed = gse_value(squared_frobenius_distance(g, g), nu)
        assert gse_series_reference(g, g, nu, 25) == pytest.approx(closed, abs=1e-10)


def test_series_reference_multinomial_oracle():
    rng = np.random.default_rng(21)
    net = build_network(["a", "b", "c", "d"],
                        [(0, 1, 0.5), (1, 2, 0.8), (2, 3, 0.9)])
    for _ in range(10):
        x = rng.standard_normal(4)
        y = rng.standard_normal(4)
        g = instance_graph(net, x / np.linalg.norm(x))
        h = instance_graph(net, y / np.linalg.norm(y))
        closed = gse_value(squared_frobenius_distance(g, h), 1.0)
        assert gse_series_reference(g, h, 1.0, 20) == pytest.approx(closed, abs=1e-6)


def test_series_reference_guards():
    net = complete_network([f"f{i}" for i in range(5)])  # 10 edges
    g = instance_graph(net, np.ones(5))
    with pytest.raises(GuardError):
        gse_series_reference(g, g, 1.0, 10)
    small = build_network(["a", "b"], [(0, 1, 1.0)])
    gs = instance_graph(small, [1.0, 1.0])
    with pytest.raises(GuardError):
        gse_series_reference(gs, gs, 1.0, 26)


def test_multinomial_identity_per_order():
    # enumerated layer equals <G, G'>^n / n! for each fixed order n
    rng = np.random.default_rng(22)
    inv_fact = [1.0 / math.factorial(k) for k in range(7)]
    for n_edges in (1, 2, 3, 4):
        products = rng.uniform(-1.5, 1.5, n_edges).tolist()
        inner = sum(products)
        for n in range(7):
            expected = inner ** n / math.factorial(n)
            assert _r_e(products, n, inv_fact) == pytest.approx(expected, abs=1e-10)


def test_rbf_matrix_trivial():
    X = np.array([[1.0, 2.0], [1.0, 2.0]])
    assert np.array_equal(rbf_matrix(X, 1.0).values, np.ones((2, 2)))
    X = np.array([[0.0, 0.0], [3.0, 4.0]])  # squared norm 25
    assert rbf_matrix(X, 5.0).values[0, 1] == pytest.approx(math.exp(-1.0), rel=1e-12)


def test_gse_rbf_bridge():
    # gse over graphs == rbf over edge vectors with 1 / sigma^2 = nu
    rng = np.random.default_rng(23)
    net = _random_network(rng, 6, density=0.7)
    X = rng.standard_normal((9, 6))
    graphs = instance_graphs(net, X)
    V = edge_value_matrix(net, X)
    nu = 0.37
    K_gse = gse_matrix(graphs, nu).values
    K_rbf = rbf_matrix(V, 1.0 / math.sqrt(nu)).values
    np.testing.assert_allclose(K_gse, K_rbf, atol=1e-12)


def test_rw_finite_single_term_reduction():
    rng = np.random.default_rng(24)
    net = _random_network(rng, 5, density=0.8)
    g = instance_graph(net, rng.standard_normal(5))
    h = instance_graph(net, rng.standard_normal(5))
    theta = 0.3
    expected = theta ** 2 * np.vdot(dense_matrix_view(g), dense_matrix_view(h))
    assert rw_finite_kernel(g, h, theta, 1) == pytest.approx(expected, rel=1e-12)
    same = rw_finite_kernel(g, g, 1.0, 1)
    assert same == pytest.approx(np.sum(dense_matrix_view(g) ** 2), rel=1e-12)


def test_rw_finite_two_node_hand_case():
    net = build_network(["a", "b"], [(0, 1, 1.0)])
    for a, b in ((0.7, -0.3), (1.2, 0.5)):
        g = instance_graph(net, [1.0, a])
        h = instance_graph(net, [1.0, b])
        expected = 2 * a * b + 2 * a ** 2 * b ** 2
        assert rw_finite_kernel(g, h, 1.0, 2) == pytest.approx(expected, rel=1e-12)


def test_rw_finite_overflow_guard():
    net = build_network(["a", "b"], [(0, 1, 1.0)])
    g = instance_graph(net, [1e4, 1e4])
    with pytest.raises(GuardError):
        rw_finite_kernel(g, g, 1.0, 200)


def test_rw_exp_beta_zero_is_identity_product():
    net = _random_network(np.random.default_rng(25), 5, density=0.9)
    g = instance_graph(net, np.random.default_rng(26).standard_normal(5))
    assert rw_exp_kernel(g, g, 0.0) == pytest.approx(5.0, abs=1e-10)


def _expm_series(M, beta, terms=30):
    out = np.eye(M.shape[0])
    P = np.eye(M.shape[0])
    for k in range(1, terms + 1):
        P = P @ (beta * M) / k
        out = out + P
    return out


def test_rw_exp_spectral_identity_vs_series():
    rng = np.random.default_rng(27)
    net = _random_network(rng, 4, density=1.0)
    g = instance_graph(net, 0.5 * rng.standard_normal(4))
    M = dense_matrix_view(g)
    w = np.linalg.eigvalsh(M)
    beta = 0.8
    self_kernel = rw_exp_kernel(g, g, beta)
    assert self_kernel == pytest.approx(np.sum(np.exp(2 * beta * w)), rel=1e-10)
    series = np.vdot(_expm_series(M, beta), _expm_series(M, beta))
    assert self_kernel == pytest.approx(series, rel=1e-8)


def test_rw_exp_two_node_series_cross_check():
    net = build_network(["a", "b"], [(0, 1, 1.0)])
    g = instance_graph(net, [1.0, 0.9])
    h = instance_graph(net, [1.0, -0.4])
    value = rw_exp_kernel(g, h, 1.0)
    series = np.vdot(
        _expm_series(dense_matrix_view(g), 1.0),
        _expm_series(dense_matrix_view(h), 1.0),
    )
    assert value == pytest.approx(series, abs=1e-10)


def test_rw_exp_non_finite_input():
    net = build_network(["a", "b"], [(0, 1, 1.0)])
    g = instance_graph(net, [1.0, 2.0])
    bad = InstanceGraph(network=net, values=np.array([np.inf]))
    with pytest.raises(DataError):
        rw_exp_kernel(bad, g, 0.5)


def test_kernel_matrix_dispatch_trivial():
    net = build_network(["a", "b"], [(0, 1, 1.0)])
    g = instance_graph(net, [1.0, 2.0])
    K = kernel_matrix([g, g, g], KernelSpec("gse", nu=1.0)).values
    assert np.array_equal(K, np.ones((3, 3)))

    net5 = _random_network(np.random.default_rng(28), 5, density=0.8)
    graphs = instance_graphs(net5, np.random.default_rng(29).standard_normal((3, 5)))
    K = kernel_matrix(graphs, KernelSpec("rw_exp", beta=0.0)).values
    np.testing.assert_allclose(K, np.full((3, 3), 5.0), atol=1e-9)


def test_kernel_matrix_agrees_with_pairwise_functions():
    rng = np.random.default_rng(30)
    net = _random_network(rng, 5, density=0.8)
    graphs = instance_graphs(net, rng.standard_normal((4, 5)))
    K_fin = kernel_matrix(graphs, KernelSpec("rw_finite", theta=0.2, n_max=3)).values
    K_exp = kernel_matrix(graphs, KernelSpec("rw_exp", beta=0.3)).values
    for i in range(4):
        for j in range(4):
            assert K_fin[i, j] == pytest.approx(
                rw_finite_kernel(graphs[i], graphs[j], 0.2, 3), rel=1e-9
            )
            assert K_exp[i, j] == pytest.approx(
                rw_exp_kernel(graphs[i], graphs[j], 0.3), rel=1e-9
            )


def test_gse_gram_is_psd():
    rng = np.random.default_rng(31)
    net = _random_network(rng, 8, density=0.5)
    graphs = instance_graphs(net, rng.standard_normal((20, 8)))
    K = gse_matrix(graphs, 0.7).values
    assert min_eigenvalue_ratio(K) >= -1e-8


def test_kernel_spec_validation():
    with pytest.raises(DataError):
        KernelSpec("gse", sigma=1.0)
    with pytest.raises(DataError):
        KernelSpec("rw_finite", theta=0.5)
    with pytest.raises(DataError):
        KernelSpec("rw_exp")
    with pytest.raises(DataError):
        KernelSpec("gse", nu=-1.0)
    with pytest.raises(DataError):
        KernelSpec("banana")


def test_amortized_nu_reevaluation_is_cheap():
    # distances are computed once; a new nu costs only the exponential map
    rng = np.random.default_rng(32)
    net = complete_network([f"f{i}" for i in range(300)])
    X = rng.standard_normal((100, 300))
    graphs = instance_graphs(net, X)

    t0 = time.perf_counter()
    K1 = gse_matrix(graphs, 0.5)
    full_time = time.perf_counter() - t0

    V = edge_value_matrix(net, X)
    D = pairwise_sq_distances(V)
    t0 = time.perf_counter()
    K2 = gse_from_distances(D, 0.9)
    cached_time = time.perf_counter() - t0

    assert K1.values.shape == K2.shape == (100, 100)
    assert cached_time * 100 <= full_time


def test_kernel_csv_round_trip(tmp_path):
    rng = np.random.default_rng(33)
    net = _random_network(rng, 5, density=0.9)
    graphs = instance_graphs(net, rng.standard_normal((4, 5)))
    km = kernel_matrix(graphs, KernelSpec("gse", nu=0.4), sample_ids=["p1", "p2", "p3", "p4"])
    path = tmp_path / "kernel.csv"
    write_kernel_csv(km, path)
    back = read_kernel_csv(path)
    assert back.sample_ids == ("p1", "p2", "p3", "p4")
    assert np.array_equal(back.values, km.values)


def test_kernel_binary_round_trip(tmp_path):
    rng = np.random.default_rng(34)
    values = rng.standard_normal((6, 6))
    values = values @ values.T
    from gsekit import KernelMatrix

    km = KernelMatrix(values=values, spec=None)
    path = tmp_path / "kernel.gsek"
    write_kernel_binary(km, path)
    back = read_kernel_binary(path)
    assert np.array_equal(back.values, values)
    raw = path.read_bytes()
    assert raw[:4] == b"GSEK"
    assert raw[4] == 1


def test_kernel_binary_bad_magic(tmp_path):
    path = tmp_path / "bad.gsek"
    path.write_bytes(b"NOPE" + bytes(16))
    with pytest.raises(DataError):
        read_kernel_binary(path)


def test_graph_space_embedding_estimator():
    rng = np.random.default_rng(35)
    net = _random_network(rng, 6, density=0.7)
    X_train = rng.standard_normal((12, 6))
    X_test = rng.standard_normal((5, 6))

    est = GraphSpaceEmbedding(network=net, nu=0.8)
    K_train = est.fit_transform(X_train)
    expected = gse_matrix(instance_graphs(net, X_train), 0.8).values
    np.testing.assert_allclose(K_train, expected, atol=1e-12)

    K_cross = est.transform(X_test)
    assert K_cross.shape == (5, 12)
    g_test = instance_graph(net, X_test[0])
    g_tr = instance_graph(net, X_train[0])
    d = squared_frobenius_distance(g_test, g_tr)
    assert K_cross[0, 0] == pytest.approx(math.exp(-0.8 * d), rel=1e-9)

    params = est.get_params()
    assert params["nu"] == 0.8 and params["network"] is net


def test_graph_space_embedding_auto_nu():
    rng = np.random.default_rng(36)
    net = _random_network(rng, 6, density=0.7)
    X = rng.standard_normal((15, 6))
    est = GraphSpaceEmbedding(network=net, nu="auto").fit(X)
    assert est.nu_ > 0
    assert est.search_result_.converged
