"""Binary C-SVM on a precomputed kernel, trained by sequential minimal optimization.

Solves the dual

    max  sum_i alpha_i - 1/2 sum_ij alpha_i alpha_j y_i y_j K_ij
    s.t. 0 <= alpha_i <= C,  sum_i alpha_i y_i = 0

by pairwise coordinate ascent with maximal-violating-pair working-set
selection: each step picks i maximizing (y_i - f_i) over the up-feasible set
and j minimizing it over the down-feasible set, then solves the two-variable
subproblem analytically with box clipping. Training stops when the maximal
KKT violation drops below ``tol``.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from .errors import DataError, NonConvergenceWarning
from .validation import as_float_matrix, check_both_classes, check_symmetric, positive_scalar

_BOUND_EPS = 1e-12


@dataclass
class SvmModel:
    """Fitted dual solution: nonnegative alphas, bias, and the support set."""

    alphas: np.ndarray
    bias: float
    C: float
    support_indices: np.ndarray
    labels: np.ndarray
    kernel: np.ndarray = field(repr=False)
    iterations: int = 0
    kkt_violation: float = 0.0
    converged: bool = True


def _selection_masks(alpha, y, C):
    pos = y > 0
    up = (pos & (alpha < C - _BOUND_EPS)) | (~pos & (alpha > _BOUND_EPS))
    low = (~pos & (alpha < C - _BOUND_EPS)) | (pos & (alpha > _BOUND_EPS))
    return up, low


def smo_train(K, y, C=1.0, tol=1e-3, max_iter=100_000):
    """Train the C-SVM dual on a precomputed kernel matrix.

    Parameters
    ----------
    K : (m, m) array
        Symmetric positive semidefinite training kernel.
    y : (m,) array
        Labels in {-1, +1}, both classes present.
    C : float
        Box constraint on the duals.
    tol : float
        Stop when the maximal KKT violation falls below this.
    max_iter : int
        Cap on pair updates; exceeding it emits a NonConvergenceWarning and
        returns the current iterate with ``converged=False``.
    """
    K = check_symmetric(K, "K")
    y = check_both_classes(y)
    C = positive_scalar(C, "C")
    m = K.shape[0]
    if y.shape[0] != m:
        raise DataError(f"kernel is {m}x{m} but got {y.shape[0]} labels")

    yf = y.astype(float)
    alpha = np.zeros(m)
    u = np.zeros(m)  # u_k = sum_j alpha_j y_j K_jk, maintained incrementally
    iterations = 0
    violation = np.inf
    converged = False
    stalled = 0

    while iterations < max_iter:
        crit = yf - u
        up, low = _selection_masks(alpha, yf, C)
        if not up.any() or not low.any():
            violation = 0.0
            converged = True
            break
        i = int(np.argmax(np.where(up, crit, -np.inf)))
        j = int(np.argmin(np.where(low, crit, np.inf)))
        violation = float(crit[i] - crit[j])
        if violation < tol:
            converged = True
            break

        a_i, a_j = alpha[i], alpha[j]
        if yf[i] != yf[j]:
            L = max(0.0, a_j - a_i)
            H = min(C, C + a_j - a_i)
        else:
            L = max(0.0, a_i + a_j - C)
            H = min(C, a_i + a_j)
        eta = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if eta < _BOUND_EPS:
            # flat direction of a PSD kernel: the optimum sits on a box edge
            eta = _BOUND_EPS
        # E_i - E_j with E_k = u_k - y_k; the bias cancels in the difference
        a_j_new = min(max(a_j + yf[j] * ((u[i] - yf[i]) - (u[j] - yf[j])) / eta, L), H)
        delta_j = a_j_new - a_j
        if abs(delta_j) < _BOUND_EPS:
            stalled += 1
            if stalled >= 3:
                break
            continue
        stalled = 0
        # the box on alpha_j keeps alpha_i in [0, C] exactly; clamp float dust
        a_i_new = min(max(a_i - yf[i] * yf[j] * delta_j, 0.0), C)
        u += (a_i_new - a_i) * yf[i] * K[i] + delta_j * yf[j] * K[j]
        alpha[i] = a_i_new
        alpha[j] = a_j_new
        iterations += 1

    crit = yf - u
    up, low = _selection_masks(alpha, yf, C)
    free = (alpha > _BOUND_EPS) & (alpha < C - _BOUND_EPS)
    if up.any() and low.any():
        bias = 0.5 * (float(np.max(crit[up])) + float(np.min(crit[low])))
    elif free.any():
        bias = float(np.mean(crit[free]))
    else:
        bias = 0.5 * (float(np.max(crit)) + float(np.min(crit)))

    if not converged:
        warnings.warn(
            f"SMO stopped after {iterations} pair updates with KKT violation "
            f"{violation:.3e} (tol {tol:.1e})",
            NonConvergenceWarning,
            stacklevel=2,
        )
    return SvmModel(
        alphas=alpha,
        bias=bias,
        C=C,
        support_indices=np.flatnonzero(alpha > 0),
        labels=y,
        kernel=K,
        iterations=iterations,
        kkt_violation=max(violation, 0.0),
        converged=converged,
    )


def decision_values(model, K_cross):
    """f(x) = sum_i alpha_i y_i K(x, x_i) + bias for each row of K_cross."""
    K_cross = as_float_matrix(K_cross, "K_cross")
    if K_cross.shape[1] != model.alphas.shape[0]:
        raise DataError(
            f"K_cross has {K_cross.shape[1]} columns, model was trained on "
            f"{model.alphas.shape[0]} samples"
        )
    return K_cross @ (model.alphas * model.labels.astype(float)) + model.bias


def dual_objective(K, y, alpha):
    """Dual objective sum(alpha) - 1/2 (alpha y)' K (alpha y)."""
    v = np.asarray(alpha, dtype=float) * np.asarray(y, dtype=float)
    return float(np.sum(alpha) - 0.5 * v @ (np.asarray(K, dtype=float) @ v))


def kkt_violation(model):
    """Current maximal-violating-pair gap of a fitted model (0 when optimal)."""
    u = model.kernel @ (model.alphas * model.labels.astype(float))
    crit = model.labels.astype(float) - u
    up, low = _selection_masks(model.alphas, model.labels.astype(float), model.C)
    if not up.any() or not low.any():
        return 0.0
    return float(np.max(crit[up]) - np.min(crit[low]))


class PrecomputedKernelSVC(BaseEstimator):
    """Binary SVM over a precomputed kernel matrix.

    fit expects the (m, m) training Gram matrix; decision_function and
    predict expect (n, m) blocks of kernel values against the training
    samples, as produced by e.g. GraphSpaceEmbedding.transform.

    Parameters
    ----------
    C : float
        Regularization bound on the dual coefficients.
    tol : float
        KKT stopping tolerance for the SMO solver.
    max_iter : int
        Cap on SMO pair updates.
    """

    def __init__(self, C=1.0, tol=1e-3, max_iter=100_000):
        self.C = C
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, K, y):
        self.model_ = smo_train(K, y, C=self.C, tol=self.tol, max_iter=self.max_iter)
        self.alpha_ = self.model_.alphas
        self.intercept_ = self.model_.bias
        self.support_ = self.model_.support_indices
        return self

    def decision_function(self, K_cross):
        return decision_values(self.model_, K_cross)

    def predict(self, K_cross):
        scores = self.decision_function(K_cross)
        return np.where(scores >= 0, 1, -1).astype(np.int8)
