"""Even-descent sampling around one instance and the weighted surrogate tree.

A black-box scorer is probed along its local gradient, with step sizes drawn
from an adaptive density built so that consecutive outputs land roughly a
target gap apart: a trapezoid-shaped confidence profile over the step size
(zero below ``a``, ramping to its plateau at ``b``, cut off at ``c``) is
multiplied by an exponential trust factor ``lambda * exp(-lambda * delta)``
and renormalized. The trajectory of perturbed inputs and outputs then trains
a kernel-weighted regression tree over edge features, whose impurity
decreases rank the interactions the model is most sensitive to. The report
describes model sensitivity, not causal effects.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, NonConvergenceWarning
from .graphs import IDENTITY, instance_graph
from .tree import WeightedTreeRegressor
from .validation import as_float_vector

_GRID_POINTS = 4096
DEFAULT_GRID = tuple((d, s) for d in (1, 2, 3, 4) for s in (2, 5, 10))


@dataclass(frozen=True)
class SamplerConfig:
    """Even-descent parameters.

    ``tau`` is the target output gap between consecutive samples. ``b`` is
    the step size of maximal confidence; None derives it as twice the initial
    step-estimate scale. ``c_l`` (> 2) multiplies ``b`` into the cutoff.
    ``theta_a`` controls how slowly the minimal step decays toward the
    estimated gap-preserving step; the decay reaches it at ``m_min``
    iterations, which keeps trajectories alive at least that long.
    ``lambda0`` scales the exponential trust factor and ``sigma2_dist`` sets
    how the factor responds to the squared distance from the origin sample.
    """

    tau: float
    lambda0: float = 1.0
    theta_a: float = 1.0
    b: float | None = None
    c_l: float = 3.0
    m_min: int = 20
    sigma2_dist: float = 1.0
    fd_step: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.tau <= 0:
            raise DataError("tau must be positive")
        if self.lambda0 <= 0:
            raise DataError("lambda0 must be positive")
        if self.theta_a < 0:
            raise DataError("theta_a must be nonnegative")
        if self.b is not None and self.b <= 0:
            raise DataError("b must be positive")
        if self.c_l <= 2:
            raise DataError("c_l must be > 2")
        if self.m_min < 1:
            raise DataError("m_min must be >= 1")
        if self.sigma2_dist <= 0:
            raise DataError("sigma2_dist must be positive")
        if self.fd_step <= 0:
            raise DataError("fd_step must be positive")


def gradient_fd(f, x, step=1e-6):
    """Central-difference gradient with per-coordinate step ``step * (1 + |x_i|)``."""
    x = as_float_vector(x, "x")
    grad = np.empty(x.shape[0])
    for i in range(x.shape[0]):
        h = step * (1.0 + abs(x[i]))
        forward = x.copy()
        backward = x.copy()
        forward[i] += h
        backward[i] -= h
        f_plus = float(f(forward))
        f_minus = float(f(backward))
        if not (math.isfinite(f_plus) and math.isfinite(f_minus)):
            raise DataError(f"scorer returned a non-finite value near coordinate {i}")
        grad[i] = (f_plus - f_minus) / (2.0 * h)
    return grad


@dataclass(frozen=True)
class StepEstimate:
    """Per-coordinate step sizes that keep the predicted output gap at tau.

    Entry i is ``tau / (N' * |grad_i|)`` where N' counts nonzero gradient
    entries; zero-gradient coordinates are undefined (NaN). ``norm`` is the
    l2 norm over defined entries and ``scale`` their root mean square, the
    scalar used by the step-floor decay law. ``n_nonzero == 0`` signals the
    all-zero-gradient termination condition to the caller.
    """

    values: np.ndarray
    n_nonzero: int
    norm: float
    scale: float


def tau0(grad, tau):
    """Estimate the gap-preserving step from a gradient. See StepEstimate."""
    grad = as_float_vector(grad, "grad")
    if tau <= 0:
        raise DataError("tau must be positive")
    nonzero = grad != 0.0
    n_nonzero = int(nonzero.sum())
    values = np.full(grad.shape[0], np.nan)
    if n_nonzero == 0:
        return StepEstimate(values=values, n_nonzero=0, norm=0.0, scale=0.0)
    values[nonzero] = tau / (n_nonzero * np.abs(grad[nonzero]))
    norm = float(np.sqrt(np.sum(values[nonzero] ** 2)))
    return StepEstimate(
        values=values, n_nonzero=n_nonzero, norm=norm, scale=norm / math.sqrt(n_nonzero)
    )


@dataclass(frozen=True)
class PiecewiseDensity:
    """Trapezoid step-confidence profile times an exponential trust factor.

    The confidence term integrates to exactly 1 over (a, c] by construction:
    with u = b - a and v = 2c - a - b, the ramp contributes u / v and the
    plateau 2 (c - b) / v, summing to (2c - a - b) / v = 1.
    """

    a: float
    b: float
    c: float
    lam: float

    def __post_init__(self):
        if not self.a < self.b < self.c:
            raise DataError(
                f"degenerate density support: need a < b < c, got "
                f"({self.a}, {self.b}, {self.c})"
            )
        if self.lam <= 0:
            raise DataError("lambda must be positive")

    @property
    def u(self):
        return self.b - self.a

    @property
    def v(self):
        return 2.0 * self.c - self.a - self.b

    def confidence(self, delta):
        """The trapezoid factor alone (integrates to 1 over the support)."""
        delta = np.asarray(delta, dtype=float)
        ramp = (2.0 / self.v) * (delta - self.a) / self.u
        flat = 2.0 / self.v
        out = np.where((delta > self.a) & (delta <= self.b), ramp, 0.0)
        return np.where((delta > self.b) & (delta <= self.c), flat, out)

    def normalization(self):
        """Closed-form integral of confidence * lam * exp(-lam * delta) over (a, c]."""
        lam = self.lam
        x_u = lam * self.u
        # 1 - exp(-x) * (1 + x), series-expanded when the cancellation bites
        if x_u < 1e-4:
            ramp_core = x_u * x_u / 2.0 - x_u ** 3 / 3.0 + x_u ** 4 / 8.0
        else:
            ramp_core = 1.0 - math.exp(-x_u) * (1.0 + x_u)
        i_ramp = ramp_core / lam ** 2
        i_flat = (math.exp(-lam * self.u) - math.exp(-lam * (self.c - self.a))) / lam
        return math.exp(-lam * self.a) * lam * (
            (2.0 / (self.v * self.u)) * i_ramp + (2.0 / self.v) * i_flat
        )

    def pdf(self, delta):
        delta = np.asarray(delta, dtype=float)
        trust = self.lam * np.exp(-self.lam * delta)
        return self.confidence(delta) * trust / self.normalization()

    def grid_cdf(self, n_points=_GRID_POINTS):
        """(grid, cdf) pair on [a, c]; cdf is a normalized trapezoid cumulative."""
        grid = np.linspace(self.a, self.c, n_points + 1)
        # keep the exponential factored around exp(-lam * a) for stability
        density = self.confidence(grid) * np.exp(-self.lam * (grid - self.a))
        steps = 0.5 * (density[1:] + density[:-1]) * np.diff(grid)
        cdf = np.concatenate([[0.0], np.cumsum(steps)])
        return grid, cdf / cdf[-1]


def update_density(iteration, estimate, mean_norm, b, cfg, dist):
    """Per-iteration density update.

    The minimal step ``a`` follows the decay law
    scale * (1 + theta_a * (m_min - i) / m_min), clamped into [0, b); the
    cutoff ``c`` is b * (c_l + (E[norm] - norm) / (E[norm] + norm)), widening
    where the gradient is locally small; lambda is
    lambda0 * exp(-dist / sigma2_dist).
    """
    if iteration < 1:
        raise DataError("iteration must be >= 1")
    a = estimate.scale * (1.0 + cfg.theta_a * (cfg.m_min - iteration) / cfg.m_min)
    a = max(a, 0.0)
    if a >= b:
        warnings.warn(
            f"step floor a={a:.3e} reached b={b:.3e}; clamping below b",
            UserWarning,
            stacklevel=2,
        )
        a = b * (1.0 - 1e-6)
    denom = mean_norm + estimate.norm
    balance = (mean_norm - estimate.norm) / denom if denom > 0 else 0.0
    c = b * (cfg.c_l + balance)
    lam = cfg.lambda0 * math.exp(-dist / cfg.sigma2_dist)
    return PiecewiseDensity(a=a, b=b, c=c, lam=lam)


def even_sample(pd, rng):
    """Draw one step size from the density by inverse CDF on a fixed grid."""
    grid, cdf = pd.grid_cdf()
    delta = float(np.interp(rng.random(), cdf, grid))
    return min(max(delta, np.nextafter(pd.a, pd.c)), pd.c)


@dataclass(frozen=True)
class Trajectory:
    """Ordered even-descent samples: the origin first, then the ascent path,
    then the descent path reversed."""

    samples: np.ndarray
    outputs: np.ndarray
    directions: np.ndarray
    graphs: list = field(repr=False)
    n_ascent: int = 0
    n_descent: int = 0
    ascent_converged: bool = True
    descent_converged: bool = True

    def __post_init__(self):
        n = self.samples.shape[0]
        if not (self.outputs.shape[0] == self.directions.shape[0] == len(self.graphs) == n):
            raise DataError("trajectory fields disagree on length")
        if 1 + self.n_ascent + self.n_descent != n:
            raise DataError("trajectory segment lengths do not add up")

    def __len__(self):
        return self.samples.shape[0]

    def ascent_outputs(self):
        """Outputs along the ascent walk, origin first."""
        return np.concatenate([self.outputs[:1], self.outputs[1 : 1 + self.n_ascent]])

    def descent_outputs(self):
        """Outputs along the descent walk, origin first."""
        tail = self.outputs[1 + self.n_ascent :]
        return np.concatenate([self.outputs[:1], tail[::-1]])

    def output_gaps(self):
        """Absolute consecutive output gaps along both walks."""
        gaps = [np.abs(np.diff(self.ascent_outputs()))]
        gaps.append(np.abs(np.diff(self.descent_outputs())))
        return np.concatenate(gaps)


def even_descent(f, x0, net, cfg, phi=IDENTITY):
    """Probe a scorer along its gradient with approximately even output gaps.

    Runs an ascent walk and a descent walk from ``x0``. Each iteration takes
    the local central-difference gradient, estimates the gap-preserving step,
    updates the sampling density, draws a step size, and moves by that length
    along the unit gradient direction (ascent) or against it (descent). A
    walk ends when the realized output gap falls below ``cfg.tau`` or the
    gradient vanishes; a hard cap of 10 * m_min iterations is reported as
    non-termination. Each walk owns an RNG stream derived from
    (seed, direction), so the two may run in any order with the same result.
    """
    x0 = as_float_vector(x0, "x0")
    f0 = float(f(x0))
    if not math.isfinite(f0):
        raise DataError("scorer is non-finite at the origin sample")

    grad0 = gradient_fd(f, x0, cfg.fd_step)
    est0 = tau0(grad0, cfg.tau)
    b = cfg.b if cfg.b is not None else 2.0 * est0.scale

    walks = {}
    converged_flags = {}
    for direction, stream in ((1, 0), (-1, 1)):
        rng = np.random.default_rng([cfg.seed, stream])
        xs, fs = [], []
        converged = True
        if est0.n_nonzero > 0:
            x_prev, f_prev = x0, f0
            mean_norm = 0.0
            iteration = 0
            while True:
                iteration += 1
                if iteration > 10 * cfg.m_min:
                    warnings.warn(
                        f"even descent (direction {direction:+d}) hit the "
                        f"{10 * cfg.m_min} iteration cap",
                        NonConvergenceWarning,
                        stacklevel=2,
                    )
                    converged = False
                    break
                grad = gradient_fd(f, x_prev, cfg.fd_step) if iteration > 1 else grad0
                est = tau0(grad, cfg.tau)
                if est.n_nonzero == 0:
                    break
                dist = float(np.sum((x_prev - x0) ** 2))
                pd = update_density(iteration, est, mean_norm, b, cfg, dist)
                mean_norm = (mean_norm * (iteration - 1) + est.norm) / iteration
                delta = even_sample(pd, rng)
                x_next = x_prev + direction * delta * grad / np.linalg.norm(grad)
                f_next = float(f(x_next))
                if not math.isfinite(f_next):
                    raise DataError("scorer returned a non-finite value on the walk")
                xs.append(x_next)
                fs.append(f_next)
                if abs(f_next - f_prev) < cfg.tau:
                    break
                x_prev, f_prev = x_next, f_next
        walks[direction] = (xs, fs)
        converged_flags[direction] = converged

    asc_x, asc_f = walks[1]
    des_x, des_f = walks[-1]
    samples = np.vstack([x0[None, :]] + [np.asarray(v)[None, :] for v in asc_x + des_x[::-1]])
    outputs = np.asarray([f0] + asc_f + des_f[::-1])
    directions = np.asarray([0] + [1] * len(asc_x) + [-1] * len(des_x), dtype=np.int8)
    graphs = [instance_graph(net, samples[s], phi) for s in range(samples.shape[0])]
    return Trajectory(
        samples=samples,
        outputs=outputs,
        directions=directions,
        graphs=graphs,
        n_ascent=len(asc_x),
        n_descent=len(des_x),
        ascent_converged=converged_flags[1],
        descent_converged=converged_flags[-1],
    )


def theta_scale(losses, complexities, epsilon):
    """Complexity weight theta = epsilon * mean(losses) / mean(complexities)."""
    losses = as_float_vector(np.asarray(losses, dtype=float), "losses")
    complexities = as_float_vector(np.asarray(complexities, dtype=float), "complexities")
    if losses.size == 0 or complexities.size == 0:
        raise DataError("losses and complexities must be nonempty")
    if epsilon < 0:
        raise DataError("epsilon must be nonnegative")
    mean_complexity = float(np.mean(complexities))
    if mean_complexity <= 0:
        raise DataError("mean complexity must be positive")
    return epsilon * float(np.mean(losses)) / mean_complexity


@dataclass(frozen=True)
class ExplanationReport:
    """Chosen surrogate with its objective pieces and ranked edge importances."""

    trajectory: Trajectory = field(repr=False)
    nu: float
    epsilon: float
    theta: float
    max_depth: int
    min_samples_split: int
    loss: float
    omega: float
    w_d: float
    w_s: float
    importances: list  # (feature_i, feature_j, score), descending score

    def network(self):
        return self.trajectory.graphs[0].network

    def to_json(self):
        net = self.network()
        return {
            "max_depth": self.max_depth,
            "min_samples_split": self.min_samples_split,
            "loss": self.loss,
            "omega": self.omega,
            "theta": self.theta,
            "epsilon": self.epsilon,
            "nu": self.nu,
            "importances": [
                [net.feature_names[i], net.feature_names[j], score]
                for i, j, score in self.importances
            ],
            "trajectory": {
                "samples": self.trajectory.samples.tolist(),
                "outputs": self.trajectory.outputs.tolist(),
                "directions": self.trajectory.directions.tolist(),
            },
        }


def fit_surrogate(traj, nu, grid=DEFAULT_GRID, epsilon=0.1, w_d=1.0, w_s=1.0):
    """Fit kernel-weighted regression trees over edge features and pick one.

    Each grid cell (max_depth, min_samples_split) is fit on the trajectory's
    edge values predicting the black-box outputs, weighted by
    exp(-nu * ||G_i - G_0||^2). The complexity penalty is
    w_d * max_depth + w_s / min_samples_split, scaled by theta so its mean
    is an epsilon fraction of the mean loss; the cell minimizing
    loss + theta * penalty wins, ties going to the lexicographically smallest
    hyperparameters. Importances are per-edge weighted impurity decreases.
    """
    if len(traj) < 1:
        raise DataError("empty trajectory")
    F = np.stack([g.values for g in traj.graphs])
    if F.shape[1] == 0:
        raise DataError("the network has no edges to attribute importance to")
    targets = traj.outputs
    d0 = np.sum((F - F[0]) ** 2, axis=1)
    weights = np.exp(-nu * d0)

    cells = sorted((int(d), int(s)) for d, s in grid)
    feasible = [(d, s) for d, s in cells if len(traj) >= s]
    if not feasible:
        raise DataError(
            f"all grid cells infeasible: trajectory has {len(traj)} samples"
        )
    fits, losses, omegas = [], [], []
    for depth, mss in feasible:
        model = WeightedTreeRegressor(max_depth=depth, min_samples_split=mss)
        model.fit(F, targets, sample_weight=weights)
        residual = targets - model.predict(F)
        sw = float(weights.sum())
        loss = float(np.dot(weights, residual ** 2) / sw) if sw > 0 else float(
            np.mean(residual ** 2)
        )
        fits.append(model)
        losses.append(loss)
        omegas.append(w_d * depth + w_s / mss)

    theta = theta_scale(losses, omegas, epsilon)
    best = None
    for idx, (depth, mss) in enumerate(feasible):
        objective = losses[idx] + theta * omegas[idx]
        if best is None or objective < best[0]:
            best = (objective, idx)
    idx = best[1]
    chosen = fits[idx]
    scores = chosen.feature_importances_
    ranked = np.argsort(-scores, kind="stable")
    net = traj.graphs[0].network
    importances = [
        (int(net.edges[e, 0]), int(net.edges[e, 1]), float(scores[e]))
        for e in ranked
        if scores[e] > 0
    ]
    depth, mss = feasible[idx]
    return ExplanationReport(
        trajectory=traj,
        nu=float(nu),
        epsilon=float(epsilon),
        theta=float(theta),
        max_depth=depth,
        min_samples_split=mss,
        loss=losses[idx],
        omega=float(omegas[idx]),
        w_d=float(w_d),
        w_s=float(w_s),
        importances=importances,
    )


def write_trajectory_csv(report, path, top_k=2):
    """Companion CSV: one row per sample with its output and top-edge values."""
    traj = report.trajectory
    net = report.network()
    top = report.importances[:top_k]
    edge_cols = []
    for i, j, _ in top:
        matches = np.flatnonzero((net.edges[:, 0] == i) & (net.edges[:, 1] == j))
        edge_cols.append((f"{net.feature_names[i]}x{net.feature_names[j]}", int(matches[0])))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        header = ["sample_index", "direction", "f_value"] + [name for name, _ in edge_cols]
        fh.write(",".join(header) + "\n")
        for s in range(len(traj)):
            row = [str(s), str(int(traj.directions[s])), f"{traj.outputs[s]:.17g}"]
            row += [f"{traj.graphs[s].values[e]:.17g}" for _, e in edge_cols]
            fh.write(",".join(row) + "\n")
