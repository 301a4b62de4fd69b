"""Data containers, file ingestion, normalization, and the synthetic generator."""

import csv
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import DataError
from .graphs import InteractionNetwork, build_network
from .validation import as_float_matrix, check_labels


@dataclass(frozen=True)
class Dataset:
    """Feature matrix with -1/+1 labels, feature names, and sample ids."""

    X: np.ndarray
    y: np.ndarray
    feature_names: tuple
    sample_ids: tuple

    def __post_init__(self):
        X = as_float_matrix(self.X, "X")
        y = check_labels(self.y)
        if y.shape[0] != X.shape[0]:
            raise DataError("X and y disagree on the number of samples")
        if len(self.feature_names) != X.shape[1]:
            raise DataError("feature_names length does not match X columns")
        if len(self.sample_ids) != X.shape[0]:
            raise DataError("sample_ids length does not match X rows")
        if len(set(self.sample_ids)) != len(self.sample_ids):
            raise DataError("duplicate sample id")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "sample_ids", tuple(self.sample_ids))

    @property
    def n_samples(self):
        return self.X.shape[0]

    @property
    def n_features(self):
        return self.X.shape[1]


def load_feature_csv(path):
    """Load a dataset from CSV with header ``sample_id,label,<feature names...>``.

    Labels are 0/1 in the file and mapped to -1/+1. Row order is preserved.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if len(header) < 3 or header[0] != "sample_id" or header[1] != "label":
            raise DataError(
                f"{path}: header must start with sample_id,label followed by feature names"
            )
        feature_names = header[2:]
        ids, labels, rows = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(
                    f"{path}:{lineno}: ragged row with {len(row)} of {len(header)} cells"
                )
            ids.append(row[0])
            if row[1] == "0":
                labels.append(-1)
            elif row[1] == "1":
                labels.append(1)
            else:
                raise DataError(f"{path}:{lineno}: unknown label value {row[1]!r}")
            try:
                rows.append([float(cell) for cell in row[2:]])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: non-numeric cell ({exc})") from None
    if len(set(ids)) != len(ids):
        raise DataError(f"{path}: duplicate sample id")
    if not rows:
        raise DataError(f"{path}: no data rows")
    return Dataset(
        X=np.asarray(rows, dtype=float),
        y=np.asarray(labels, dtype=np.int8),
        feature_names=tuple(feature_names),
        sample_ids=tuple(ids),
    )


def write_feature_csv(ds, path):
    """Inverse of load_feature_csv; floats carry 17 significant digits."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("sample_id,label," + ",".join(ds.feature_names) + "\n")
        for s in range(ds.n_samples):
            label = "1" if ds.y[s] > 0 else "0"
            cells = ",".join(f"{v:.17g}" for v in ds.X[s])
            fh.write(f"{ds.sample_ids[s]},{label},{cells}\n")


class InteractionLoad(NamedTuple):
    network: InteractionNetwork
    skipped: int


def load_interactions_tsv(path, names):
    """Build a network from a protein1/protein2/combined_score interaction table.

    Scores follow the 0..1000 integer convention and are divided by 1000.
    Rows mentioning features outside ``names`` are skipped and counted;
    symmetric duplicates must agree on the score.
    """
    index = {name: i for i, name in enumerate(names)}
    triples = {}
    skipped = 0
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().split()
        required = ("protein1", "protein2", "combined_score")
        if not all(col in header for col in required):
            raise DataError(f"{path}: header must contain columns {required}")
        cols = {col: header.index(col) for col in required}
        for lineno, line in enumerate(fh, start=2):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != len(header):
                raise DataError(
                    f"{path}:{lineno}: malformed row with {len(parts)} of "
                    f"{len(header)} fields"
                )
            p1 = parts[cols["protein1"]]
            p2 = parts[cols["protein2"]]
            raw = parts[cols["combined_score"]]
            try:
                score = int(raw)
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-integer score {raw!r}") from None
            if not 0 <= score <= 1000:
                raise DataError(f"{path}:{lineno}: score {score} outside 0..1000")
            if p1 not in index or p2 not in index:
                skipped += 1
                continue
            i, j = index[p1], index[p2]
            key = (min(i, j), max(i, j))
            w = score / 1000.0
            if key in triples and triples[key] != w:
                raise DataError(
                    f"{path}:{lineno}: conflicting scores for pair {p1}/{p2}"
                )
            triples[key] = w
    net = build_network(list(names), [(i, j, w) for (i, j), w in sorted(triples.items())])
    return InteractionLoad(network=net, skipped=skipped)


def write_interactions_tsv(net, path):
    """Write a network as a protein1/protein2/combined_score table."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("protein1\tprotein2\tcombined_score\n")
        weights = net.edge_weights
        for e, (i, j) in enumerate(net.edges):
            score = int(round(weights[e] * 1000))
            fh.write(f"{net.feature_names[i]}\t{net.feature_names[j]}\t{score}\n")


def zscore_fit_apply(X_train, X_other=None):
    """Z-score with training statistics (population sigma; zero sigma becomes 1).

    Returns (Z_train, Z_other or None, mu, sigma). Test rows are never
    consulted for the statistics.
    """
    X_train = as_float_matrix(X_train, "X_train")
    if X_train.shape[0] == 0:
        raise DataError("empty training matrix")
    mu = X_train.mean(axis=0)
    sigma = X_train.std(axis=0)
    sigma = np.where(sigma == 0, 1.0, sigma)
    Z_train = (X_train - mu) / sigma
    Z_other = None
    if X_other is not None:
        X_other = as_float_matrix(X_other, "X_other")
        if X_other.shape[1] != X_train.shape[1]:
            raise DataError("X_other and X_train disagree on feature count")
        Z_other = (X_other - mu) / sigma
    return Z_train, Z_other, mu, sigma


class TrainStatScaler(BaseEstimator, TransformerMixin):
    """Per-feature z-scoring with statistics frozen at fit time."""

    def fit(self, X, y=None):
        _, _, self.mu_, self.sigma_ = zscore_fit_apply(X)
        return self

    def transform(self, X):
        X = as_float_matrix(X, "X")
        return (X - self.mu_) / self.sigma_


@dataclass(frozen=True)
class SyntheticSpec:
    """Shape of a generated interaction-classification problem.

    The label of a sample is the sign of the summed edge values over a hidden
    subset of network edges plus gaussian noise, so the class information
    lives in feature interactions rather than marginal feature values.
    """

    n_features: int = 60
    n_samples: int = 2000
    edge_density: float = 0.1
    n_signal_edges: int = 8
    noise_std: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.n_features < 2:
            raise DataError("need at least 2 features")
        if self.n_samples < 1:
            raise DataError("need at least 1 sample")
        if not 0.0 < self.edge_density < 1.0:
            raise DataError("edge_density must lie in (0, 1)")
        if self.n_signal_edges < 1:
            raise DataError("need at least 1 signal edge")
        if self.noise_std < 0:
            raise DataError("noise_std must be nonnegative")


def synth_generate(spec):
    """Generate (Dataset, InteractionNetwork, signal edge list) from a spec.

    The network holds round(edge_density * n_pairs) edges with weights
    uniform in (0, 1]; features are standard normal; labels are
    sign(sum_{(i,j) in signal} A_ij x_i x_j + noise). Deterministic from the
    seed.
    """
    rng = np.random.default_rng(spec.seed)
    n = spec.n_features
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    n_edges = int(round(spec.edge_density * len(pairs)))
    if n_edges < spec.n_signal_edges:
        raise DataError(
            f"edge_density {spec.edge_density} yields {n_edges} edges, fewer than "
            f"{spec.n_signal_edges} signal edges"
        )
    chosen = np.sort(rng.choice(len(pairs), size=n_edges, replace=False))
    weights = 1.0 - rng.uniform(0.0, 1.0, size=n_edges)  # uniform in (0, 1]
    names = tuple(f"F{i:03d}" for i in range(n))
    net = build_network(names, [(pairs[p][0], pairs[p][1], w) for p, w in zip(chosen, weights)])

    signal_positions = np.sort(rng.choice(n_edges, size=spec.n_signal_edges, replace=False))
    signal_edges = [tuple(int(v) for v in pairs[chosen[p]]) for p in signal_positions]

    X = rng.standard_normal((spec.n_samples, n))
    score = np.zeros(spec.n_samples)
    for pos in signal_positions:
        i, j = pairs[chosen[pos]]
        score += weights[pos] * X[:, i] * X[:, j]
    noise = spec.noise_std * rng.standard_normal(spec.n_samples)
    y = np.where(score + noise >= 0, 1, -1).astype(np.int8)
    ds = Dataset(
        X=X,
        y=y,
        feature_names=names,
        sample_ids=tuple(f"S{i:05d}" for i in range(spec.n_samples)),
    )
    return ds, net, signal_edges
