"""Variance-guided search for the kernel rate parameter nu.

The kernel entry for a graph pair at squared distance d is exp(-nu * d).
Rates that are too small saturate every entry near 1 and rates that are too
large collapse every entry to 0; in both regimes the Gram matrix carries no
information. The empirical variance of the off-diagonal entries peaks in
between, and its gradient admits a closed form, so the best rate is found by
gradient ascent. The ascent is stable at any learning rate up to
D / (2 * (D - 1) * d_max), the reciprocal of the Lipschitz bound on the
variance derivative over a set of D pairwise distances with maximum d_max.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, NonConvergenceWarning
from .graphs import graphs_to_matrix, pairwise_sq_distances
from .validation import as_float_vector

NU_FLOOR = 1e-12


@dataclass(frozen=True)
class DistanceSet:
    """Flattened pairwise squared distances (unordered pairs, self-pairs excluded)."""

    values: np.ndarray

    def __post_init__(self):
        values = as_float_vector(self.values, "distances")
        if np.any(values < 0):
            raise DataError("squared distances must be nonnegative")
        object.__setattr__(self, "values", values)

    @property
    def size(self):
        return self.values.shape[0]

    @property
    def d_max(self):
        return float(self.values.max()) if self.size else 0.0

    @classmethod
    def from_matrix(cls, D):
        """Take the strict upper triangle of a full pairwise distance matrix."""
        D = np.asarray(D, dtype=float)
        iu = np.triu_indices(D.shape[0], k=1)
        return cls(D[iu].copy())

    @classmethod
    def from_graphs(cls, graphs):
        V, _ = graphs_to_matrix(graphs)
        return cls.from_matrix(pairwise_sq_distances(V))


def kernel_variance(ds, nu):
    """Empirical variance of the D kernel entries {exp(-nu * d_k)}.

    Bounded in [0, 0.25] because every entry lies in (0, 1].
    """
    e = np.exp(-nu * ds.values)
    return float(np.mean(e * e) - np.mean(e) ** 2)


def variance_gradient(ds, nu):
    """Analytic derivative of kernel_variance with respect to nu."""
    d = ds.values
    e = np.exp(-nu * d)
    m1 = np.mean(e)
    return float(np.mean(-2.0 * d * e * e) + 2.0 * m1 * np.mean(d * e))


def lipschitz_rate(ds):
    """Largest guaranteed-stable ascent rate, D / (2 * (D - 1) * d_max).

    The reciprocal of the Lipschitz constant 2 * ((D - 1) / D) * d_max of the
    variance derivative.
    """
    if ds.size < 2:
        raise DataError(f"need D >= 2 distances, got D = {ds.size} (D < 2)")
    if ds.d_max <= 0:
        raise DataError("all distances are zero; variance is constant")
    D = ds.size
    return D / (2.0 * (D - 1) * ds.d_max)


@dataclass(frozen=True)
class NuSearchConfig:
    """Settings for find_nu_star.

    ``learning_rate="auto"`` resolves to the Lipschitz-safe rate for plain
    gradient ascent and to 0.05 for adam. ``nu_init="auto"`` starts at
    1 / median(positive distances), which puts typical kernel entries near
    exp(-1).
    """

    optimizer: str = "gradient_ascent"
    learning_rate: float | str = "auto"
    max_iters: int = 5000
    tolerance: float = 1e-12
    nu_init: float | str = "auto"
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8

    def __post_init__(self):
        if self.optimizer not in ("gradient_ascent", "adam"):
            raise DataError(f"unknown optimizer {self.optimizer!r}")
        if self.learning_rate != "auto" and float(self.learning_rate) <= 0:
            raise DataError("learning_rate must be positive or 'auto'")
        if self.max_iters < 1:
            raise DataError("max_iters must be >= 1")
        if self.tolerance <= 0:
            raise DataError("tolerance must be positive")
        if self.nu_init != "auto" and float(self.nu_init) <= 0:
            raise DataError("nu_init must be positive or 'auto'")


@dataclass(frozen=True)
class NuSearchResult:
    """Outcome of the variance ascent, with the full (nu, variance) trace."""

    nu_star: float
    variance_at_star: float
    iterations: int
    trace: list = field(repr=False)
    converged: bool = True

    def to_json(self):
        return {
            "nu_star": self.nu_star,
            "variance": self.variance_at_star,
            "iterations": self.iterations,
            "converged": self.converged,
            "trace": [[nu, var] for nu, var in self.trace],
        }


def find_nu_star(ds, cfg=None):
    """Ascend the kernel variance from nu_init and return the best rate found.

    Stops when the variance change per step falls below ``cfg.tolerance`` or
    after ``cfg.max_iters`` steps; nu is kept positive by projection onto
    [1e-12, inf). Non-convergence is reported through a NonConvergenceWarning
    and the ``converged`` flag, with the trace attached either way.
    """
    cfg = cfg or NuSearchConfig()
    if ds.size < 2:
        raise DataError(f"need D >= 2 distances, got D = {ds.size} (D < 2)")
    if np.unique(ds.values).size < 2:
        raise DataError("no distinct distances; variance is identically zero")

    if cfg.nu_init == "auto":
        positive = ds.values[ds.values > 0]
        nu = 1.0 / float(np.median(positive))
    else:
        nu = float(cfg.nu_init)

    if cfg.learning_rate == "auto":
        rate = lipschitz_rate(ds) if cfg.optimizer == "gradient_ascent" else 0.05
    else:
        rate = float(cfg.learning_rate)

    var = kernel_variance(ds, nu)
    trace = [(nu, var)]
    best_nu, best_var = nu, var
    converged = False
    iterations = 0
    m1 = m2 = 0.0  # adam moments
    for iterations in range(1, cfg.max_iters + 1):
        g = variance_gradient(ds, nu)
        if cfg.optimizer == "gradient_ascent":
            step = rate * g
        else:
            m1 = cfg.adam_beta1 * m1 + (1 - cfg.adam_beta1) * g
            m2 = cfg.adam_beta2 * m2 + (1 - cfg.adam_beta2) * g * g
            m1_hat = m1 / (1 - cfg.adam_beta1 ** iterations)
            m2_hat = m2 / (1 - cfg.adam_beta2 ** iterations)
            step = rate * m1_hat / (np.sqrt(m2_hat) + cfg.adam_epsilon)
        nu_next = max(nu + step, NU_FLOOR)
        var_next = kernel_variance(ds, nu_next)
        trace.append((nu_next, var_next))
        if var_next > best_var:
            best_nu, best_var = nu_next, var_next
        delta = abs(var_next - var)
        nu, var = nu_next, var_next
        if delta < cfg.tolerance:
            converged = True
            break
    if not converged:
        warnings.warn(
            f"nu search did not converge in {cfg.max_iters} iterations "
            f"(last variance change {abs(trace[-1][1] - trace[-2][1]):.3e}); "
            f"returning the best iterate, variance {best_var:.6g}",
            NonConvergenceWarning,
            stacklevel=2,
        )
    return NuSearchResult(
        nu_star=best_nu,
        variance_at_star=best_var,
        iterations=iterations,
        trace=trace,
        converged=converged,
    )
