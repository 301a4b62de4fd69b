"""Feature selection, stratified splits, ROC AUC, and the cross-validation harness.

The harness reproduces, per split: z-score features with training statistics,
select features on the training rows only, build instance graphs on the
induced sub-network, tune the kernel rate on the training distance set, train
the precomputed-kernel SVM, and score the held-out rows by ROC AUC. Wall
times are recorded per stage so kernel families can be compared on speed as
well as accuracy.
"""

import time
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .data import zscore_fit_apply
from .errors import DataError, GsekitError
from .graphs import (
    IDENTITY,
    complete_network,
    cross_sq_distances,
    edge_value_matrix,
    instance_graphs,
    pairwise_sq_distances,
    subnetwork,
)
from .kernels import KernelSpec, _rw_feature_matrix
from .nu import DistanceSet, NuSearchConfig, find_nu_star
from .svm import decision_values, smo_train
from .validation import as_float_matrix, check_both_classes


@dataclass(frozen=True)
class SplitPlan:
    """Stratified shuffle plan: independent splits, reproducible from the seed."""

    n_splits: int = 10
    test_fraction: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.n_splits < 1:
            raise DataError("n_splits must be >= 1")
        if not 0.0 < self.test_fraction < 1.0:
            raise DataError("test_fraction must lie in (0, 1)")


def stratified_shuffle_splits(y, plan):
    """Independent shuffled splits preserving per-class proportions within one sample.

    Each split draws its RNG stream from (seed, split_index), so splits are
    deterministic and independent of evaluation order.
    """
    y = check_both_classes(y)
    splits = []
    for s in range(plan.n_splits):
        rng = np.random.default_rng([plan.seed, s])
        train, test = [], []
        for cls in (-1, 1):
            idx = np.flatnonzero(y == cls)
            n_test = int(round(plan.test_fraction * idx.size))
            if n_test < 1 or idx.size - n_test < 1:
                raise DataError(
                    f"class {cls} with {idx.size} samples is too small to stratify "
                    f"at test_fraction {plan.test_fraction}"
                )
            rng.shuffle(idx)
            test.append(idx[:n_test])
            train.append(idx[n_test:])
        splits.append(
            (np.sort(np.concatenate(train)), np.sort(np.concatenate(test)))
        )
    return splits


def f_statistic(X, y):
    """One-way ANOVA F between the two classes, per feature.

    Globally constant features get F = 0; zero pooled within-class variance
    with separated means gets F = +inf so it sorts first.
    """
    X = as_float_matrix(X, "X")
    y = check_both_classes(y)
    pos = y == 1
    n1, n2 = int(pos.sum()), int((~pos).sum())
    m1 = X[pos].mean(axis=0)
    m2 = X[~pos].mean(axis=0)
    grand = X.mean(axis=0)
    ssb = n1 * (m1 - grand) ** 2 + n2 * (m2 - grand) ** 2
    ssw = np.sum((X[pos] - m1) ** 2, axis=0) + np.sum((X[~pos] - m2) ** 2, axis=0)
    dfw = n1 + n2 - 2
    constant = X.min(axis=0) == X.max(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        F = np.where(ssw > 0, ssb / (ssw / dfw), np.inf)
    F = np.where(constant, 0.0, F)
    return F


def f_statistic_select(X, y, k):
    """Indices of the k features with largest F, ranked, ties broken by lower index."""
    F = f_statistic(X, y)
    k = int(k)
    if not 1 <= k <= F.shape[0]:
        raise DataError(f"k must lie in 1..{F.shape[0]}, got {k}")
    order = np.argsort(-F, kind="stable")
    return order[:k]


class FStatisticSelector(BaseEstimator, TransformerMixin):
    """Keep the k features with the largest between-class F statistic."""

    def __init__(self, k=10):
        self.k = k

    def fit(self, X, y):
        ranked = f_statistic_select(X, y, self.k)
        self.support_ = np.sort(ranked)
        self.ranking_ = ranked
        return self

    def transform(self, X):
        X = as_float_matrix(X, "X")
        return X[:, self.support_]


def roc_auc(scores, labels):
    """Probability a random positive outranks a random negative; ties count 0.5.

    Rank-sum form of the Mann-Whitney statistic, exactly equal to brute-force
    pair counting.
    """
    scores = np.asarray(scores, dtype=float)
    labels = check_both_classes(labels)
    order = np.argsort(scores, kind="mergesort")
    sorted_scores = scores[order]
    ranks = np.empty(scores.shape[0])
    i = 0
    while i < sorted_scores.shape[0]:
        j = i
        while j + 1 < sorted_scores.shape[0] and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    n_pos = int(np.sum(labels == 1))
    n_neg = labels.shape[0] - n_pos
    rank_sum = float(np.sum(ranks[labels == 1]))
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


@dataclass
class FittedSplit:
    """Training-side state of one split; scoring needs nothing else."""

    spec: KernelSpec
    mu: np.ndarray
    sigma: np.ndarray
    feat_idx: np.ndarray
    subnet: object
    phi: object
    train_repr: np.ndarray
    rw_diag: np.ndarray | None
    nu_eff: float | None
    model: object
    timings: dict


def _timed(timings, stage, fn):
    start = time.perf_counter()
    out = fn()
    timings[stage] = time.perf_counter() - start
    return out


def fit_split(X_train, y_train, net, spec, k_features=None, C=1.0, phi=IDENTITY,
              nu_config=None, svm_tol=1e-3, svm_max_iter=100_000):
    """Run every training-side stage on training rows only.

    Normalization statistics, feature selection, graph construction, rate
    tuning, and SVM training all happen here and never see held-out rows.
    """
    X_train = as_float_matrix(X_train, "X_train")
    y_train = check_both_classes(y_train)
    timings = {}

    Z, _, mu, sigma = _timed(timings, "normalize", lambda: zscore_fit_apply(X_train))

    if k_features is None or int(k_features) >= X_train.shape[1]:
        feat_idx = np.arange(X_train.shape[1])
        timings["select"] = 0.0
    else:
        ranked = _timed(
            timings, "select", lambda: f_statistic_select(Z, y_train, int(k_features))
        )
        feat_idx = np.sort(ranked)
    Zs = Z[:, feat_idx]
    names = [net.feature_names[i] for i in feat_idx] if net is not None else None

    subnet = None
    nu_eff = None
    rw_diag = None
    if spec.kind == "gse":
        subnet = subnetwork(net, feat_idx)
        V = _timed(timings, "graphs", lambda: edge_value_matrix(subnet, Zs, phi))
        D = _timed(timings, "kernel", lambda: pairwise_sq_distances(V))
        if spec.nu is None:
            result = _timed(
                timings,
                "tune_nu",
                lambda: find_nu_star(DistanceSet.from_matrix(D), nu_config or NuSearchConfig()),
            )
            nu_eff = result.nu_star
        else:
            nu_eff = float(spec.nu)
            timings["tune_nu"] = 0.0
        K = np.exp(-nu_eff * D)
        np.fill_diagonal(K, 1.0)
        train_repr = V
    elif spec.kind == "rbf":
        D = _timed(timings, "kernel", lambda: pairwise_sq_distances(Zs))
        if spec.sigma is None:
            result = _timed(
                timings,
                "tune_nu",
                lambda: find_nu_star(DistanceSet.from_matrix(D), nu_config or NuSearchConfig()),
            )
            nu_eff = result.nu_star
        else:
            nu_eff = 1.0 / float(spec.sigma) ** 2
            timings["tune_nu"] = 0.0
        K = np.exp(-nu_eff * D)
        np.fill_diagonal(K, 1.0)
        train_repr = Zs
    else:
        subnet = subnetwork(net, feat_idx)
        graphs = _timed(timings, "graphs", lambda: instance_graphs(subnet, Zs, phi))

        def build():
            F = _rw_feature_matrix(graphs, spec)
            K = F @ F.T
            return F, 0.5 * (K + K.T)

        train_repr, K_raw = _timed(timings, "kernel", build)
        timings["tune_nu"] = 0.0
        # cosine-normalize to unit diagonal for SVM conditioning
        rw_diag = np.sqrt(np.maximum(np.diag(K_raw), 1e-300))
        K = K_raw / np.outer(rw_diag, rw_diag)

    model = _timed(
        timings, "train", lambda: smo_train(K, y_train, C=C, tol=svm_tol, max_iter=svm_max_iter)
    )
    return FittedSplit(
        spec=spec,
        mu=mu,
        sigma=sigma,
        feat_idx=feat_idx,
        subnet=subnet,
        phi=phi,
        train_repr=train_repr,
        rw_diag=rw_diag,
        nu_eff=nu_eff,
        model=model,
        timings=timings,
    )


def score_split(fit, X_test):
    """Decision values for held-out rows using the fitted split state."""
    X_test = as_float_matrix(X_test, "X_test")
    Zs = ((X_test - fit.mu) / fit.sigma)[:, fit.feat_idx]
    if fit.spec.kind == "gse":
        V = edge_value_matrix(fit.subnet, Zs, fit.phi)
        K_cross = np.exp(-fit.nu_eff * cross_sq_distances(V, fit.train_repr))
    elif fit.spec.kind == "rbf":
        K_cross = np.exp(-fit.nu_eff * cross_sq_distances(Zs, fit.train_repr))
    else:
        graphs = instance_graphs(fit.subnet, Zs, fit.phi)
        F = _rw_feature_matrix(graphs, fit.spec)
        raw = F @ fit.train_repr.T
        diag = np.sqrt(np.maximum(np.sum(F * F, axis=1), 1e-300))
        K_cross = raw / np.outer(diag, fit.rw_diag)
    return decision_values(fit.model, K_cross)


@dataclass
class CvResult:
    """Per-split AUCs with summary statistics and per-stage wall times."""

    aucs: np.ndarray
    mean_auc: float
    std_auc: float
    timings: list = field(repr=False)
    nus: list = field(default_factory=list)

    def to_json(self):
        return {
            "aucs": [float(a) for a in self.aucs],
            "mean_auc": self.mean_auc,
            "std_auc": self.std_auc,
            "nus": [None if v is None else float(v) for v in self.nus],
        }


def cross_validate(ds, net, spec, plan, k_features=None, C=1.0, phi=IDENTITY,
                   nu_config=None, svm_tol=1e-3, svm_max_iter=100_000):
    """Stratified shuffle cross-validation of one kernel method.

    Every training-side stage sees training rows only; held-out rows enter at
    scoring time. Deterministic for a fixed plan seed.
    """
    splits = stratified_shuffle_splits(ds.y, plan)
    aucs, timings, nus = [], [], []
    for s, (tr, te) in enumerate(splits):
        try:
            fit = fit_split(
                ds.X[tr], ds.y[tr], net, spec, k_features=k_features, C=C, phi=phi,
                nu_config=nu_config, svm_tol=svm_tol, svm_max_iter=svm_max_iter,
            )
            t0 = time.perf_counter()
            scores = score_split(fit, ds.X[te])
            fit.timings["score"] = time.perf_counter() - t0
            aucs.append(roc_auc(scores, ds.y[te]))
        except GsekitError as exc:
            raise type(exc)(f"split {s}: {exc}") from exc
        timings.append(fit.timings)
        nus.append(fit.nu_eff)
    aucs = np.asarray(aucs)
    return CvResult(
        aucs=aucs,
        mean_auc=float(aucs.mean()),
        std_auc=float(aucs.std()),
        timings=timings,
        nus=nus,
    )


def nu_sweep(ds, net, multiples, plan, k_features=None, C=1.0, phi=IDENTITY,
             nu_config=None, svm_tol=1e-3, svm_max_iter=100_000):
    """Validation AUC at multiples of the tuned rate, per split.

    Each split tunes nu* on its training distance set once, then reuses the
    cached distances to evaluate the kernel at every multiple. Returns a dict
    with the per-split tuned rates and the (n_splits, n_multiples) AUC grid.
    """
    multiples = [float(m) for m in multiples]
    if not multiples or any(m <= 0 for m in multiples):
        raise DataError("multiples must be positive")
    splits = stratified_shuffle_splits(ds.y, plan)
    auc_grid = np.zeros((len(splits), len(multiples)))
    nu_stars = []
    for s, (tr, te) in enumerate(splits):
        Z, Z_te, _, _ = zscore_fit_apply(ds.X[tr], ds.X[te])
        if k_features is None or int(k_features) >= ds.n_features:
            feat_idx = np.arange(ds.n_features)
        else:
            feat_idx = np.sort(f_statistic_select(Z, ds.y[tr], int(k_features)))
        subnet = subnetwork(net, feat_idx)
        V_tr = edge_value_matrix(subnet, Z[:, feat_idx], phi)
        V_te = edge_value_matrix(subnet, Z_te[:, feat_idx], phi)
        D_tr = pairwise_sq_distances(V_tr)
        D_te = cross_sq_distances(V_te, V_tr)
        result = find_nu_star(DistanceSet.from_matrix(D_tr), nu_config or NuSearchConfig())
        nu_stars.append(result.nu_star)
        for m_idx, mult in enumerate(multiples):
            nu = result.nu_star * mult
            K = np.exp(-nu * D_tr)
            np.fill_diagonal(K, 1.0)
            model = smo_train(K, ds.y[tr], C=C, tol=svm_tol, max_iter=svm_max_iter)
            scores = decision_values(model, np.exp(-nu * D_te))
            auc_grid[s, m_idx] = roc_auc(scores, ds.y[te])
    return {
        "multiples": multiples,
        "nu_stars": nu_stars,
        "auc_matrix": auc_grid,
        "mean_auc": auc_grid.mean(axis=0),
        "std_auc": auc_grid.std(axis=0),
    }


BENCHMARK_METHODS = ("gse", "gse-star", "rbf", "rw-finite", "rw-exp")


def benchmark_spec(method, theta=0.1, n_max=3, beta=0.01):
    """KernelSpec for one benchmark method name (rates left to per-split tuning)."""
    if method in ("gse", "gse-star"):
        return KernelSpec("gse")
    if method == "rbf":
        return KernelSpec("rbf")
    if method == "rw-finite":
        return KernelSpec("rw_finite", theta=theta, n_max=int(n_max))
    if method == "rw-exp":
        return KernelSpec("rw_exp", beta=beta)
    raise DataError(f"unknown benchmark method {method!r}; choose from {BENCHMARK_METHODS}")


def run_benchmark(ds, net, methods, plan, k_features=None, C=1.0,
                  theta=0.1, n_max=3, beta=0.01, nu_config=None):
    """cross_validate each method; gse-star swaps in an all-ones network."""
    results = {}
    for method in methods:
        spec = benchmark_spec(method, theta=theta, n_max=n_max, beta=beta)
        use_net = complete_network(list(ds.feature_names)) if method == "gse-star" else net
        results[method] = cross_validate(
            ds, use_net, spec, plan, k_features=k_features, C=C, nu_config=nu_config
        )
    return results
