"""Command-line interface.

Subcommands: synth (generate data files), kernel (emit a Gram matrix),
tune-nu (variance-ascent rate search), benchmark (cross-validated kernel
comparison), nu-sweep (validation AUC at multiples of the tuned rate), and
explain (even-descent sampling plus surrogate tree).

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical
non-convergence. Errors print one JSON line to stderr. Heavy imports happen
after argument parsing so --threads can cap the BLAS pools via environment
variables before numpy loads.

The kernel rate nu is the exponential rate form k = exp(-nu * d); under the
sigma^2/gamma ratio convention the same kernel reads exp(-d / nu_ratio) with
nu_ratio = 1 / nu.
"""

import argparse
import json
import os
import sys

from .errors import ConvergenceError, DataError, GsekitError

_THREAD_ENV_VARS = (
    "OMP_NUM_THREADS",
    "OPENBLAS_NUM_THREADS",
    "MKL_NUM_THREADS",
    "NUMEXPR_NUM_THREADS",
)


class _Parser(argparse.ArgumentParser):
    """argparse with usage failures mapped to exit code 1 and a JSON line."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(json.dumps({"error": message, "type": "usage"}), file=sys.stderr)
        raise SystemExit(1)


def _positive_float(value):
    out = float(value)
    if out <= 0:
        raise argparse.ArgumentTypeError(f"{value} is not positive")
    return out


def _nu_or_auto(value):
    return value if value == "auto" else _positive_float(value)


def _float_list(value):
    try:
        return [float(v) for v in value.split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad float list {value!r}") from None


def _int_list(value):
    try:
        return [int(v) for v in value.split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad int list {value!r}") from None


def build_parser():
    parser = _Parser(prog="gsekit", description=__doc__.splitlines()[0])
    parser.add_argument("--threads", type=int, default=None,
                        help="cap BLAS thread pools (set before numpy loads)")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", default=None,
                       help="JSON file of option defaults; explicit flags win")
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("synth", help="generate a synthetic interaction dataset")
    common(p)
    p.add_argument("--features", type=int, default=60)
    p.add_argument("--samples", type=int, default=2000)
    p.add_argument("--density", type=float, default=0.1)
    p.add_argument("--signal-edges", type=int, default=8)
    p.add_argument("--noise", type=float, default=0.5)
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("kernel", help="emit a Gram matrix over a dataset")
    common(p)
    p.add_argument("--features", required=True, help="feature CSV path")
    p.add_argument("--interactions", required=True, help="interaction TSV path")
    p.add_argument("--kind", choices=("gse", "rbf", "rw-finite", "rw-exp"), default="gse")
    p.add_argument("--nu", type=_nu_or_auto, default="auto",
                   help="rate for gse: positive float or 'auto' (variance ascent)")
    p.add_argument("--sigma", type=_nu_or_auto, default="auto",
                   help="bandwidth for rbf: positive float or 'auto'")
    p.add_argument("--theta", type=float, default=0.1)
    p.add_argument("--n-max", type=int, default=3)
    p.add_argument("--beta", type=float, default=0.01)
    p.add_argument("--format", choices=("csv", "gsek"), default="csv")
    p.add_argument("--out", required=True)

    p = sub.add_parser("tune-nu", help="variance-ascent search for the kernel rate")
    common(p)
    p.add_argument("--features", required=True)
    p.add_argument("--interactions", required=True)
    p.add_argument("--optimizer", choices=("gradient_ascent", "adam"),
                   default="gradient_ascent")
    p.add_argument("--learning-rate", type=_nu_or_auto, default="auto")
    p.add_argument("--max-iters", type=int, default=2000)
    p.add_argument("--tolerance", type=_positive_float, default=1e-12)
    p.add_argument("--nu-init", type=_nu_or_auto, default="auto")
    p.add_argument("--out", default=None, help="output JSON path (default stdout)")

    p = sub.add_parser("benchmark", help="cross-validated kernel comparison")
    common(p)
    p.add_argument("--features", required=True)
    p.add_argument("--interactions", required=True)
    p.add_argument("--methods", default="gse,gse-star,rbf,rw-finite,rw-exp")
    p.add_argument("--splits", type=int, default=10)
    p.add_argument("--test-fraction", type=float, default=0.5)
    p.add_argument("--k-features", type=int, default=None)
    p.add_argument("--C", dest="C", type=_positive_float, default=1.0)
    p.add_argument("--theta", type=float, default=0.1)
    p.add_argument("--n-max", type=int, default=3)
    p.add_argument("--beta", type=float, default=0.01)
    p.add_argument("--out", required=True)
    p.add_argument("--timing-csv", default=None)

    p = sub.add_parser("nu-sweep", help="validation AUC at multiples of the tuned rate")
    common(p)
    p.add_argument("--features", required=True)
    p.add_argument("--interactions", required=True)
    p.add_argument("--multiples", type=_float_list, default=[0.1, 1 / 3, 1.0, 3.0, 10.0])
    p.add_argument("--splits", type=int, default=20)
    p.add_argument("--test-fraction", type=float, default=0.5)
    p.add_argument("--k-features", type=int, default=None)
    p.add_argument("--C", dest="C", type=_positive_float, default=1.0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("explain", help="even-descent sampling plus surrogate tree")
    common(p)
    p.add_argument("--features", required=True)
    p.add_argument("--interactions", required=True)
    p.add_argument("--sample-id", required=True)
    p.add_argument("--k-features", type=int, default=None)
    p.add_argument("--C", dest="C", type=_positive_float, default=1.0)
    p.add_argument("--tau", type=_positive_float, default=0.05)
    p.add_argument("--lambda0", type=_positive_float, default=1.0)
    p.add_argument("--theta-a", type=float, default=1.0)
    p.add_argument("--b", type=_positive_float, default=None)
    p.add_argument("--c-l", type=_positive_float, default=3.0)
    p.add_argument("--m-min", type=int, default=20)
    p.add_argument("--sigma2-dist", type=_positive_float, default=1.0)
    p.add_argument("--fd-step", type=_positive_float, default=1e-6)
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--w-d", type=float, default=1.0)
    p.add_argument("--w-s", type=float, default=1.0)
    p.add_argument("--depths", type=_int_list, default=[1, 2, 3, 4])
    p.add_argument("--min-splits", type=_int_list, default=[2, 5, 10])
    p.add_argument("--top-k", type=int, default=2)
    p.add_argument("--out", required=True)
    p.add_argument("--trajectory-csv", default=None)

    return parser


def _apply_config(args, parser, argv):
    """Merge a --config JSON file under explicit flags; unknown keys are errors."""
    if not getattr(args, "config", None):
        return args
    with open(args.config, "r", encoding="utf-8") as fh:
        try:
            config = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"{args.config}: invalid JSON ({exc})") from None
    if not isinstance(config, dict):
        raise DataError(f"{args.config}: config must be a JSON object")
    known = {k for k in vars(args) if k not in ("command", "config")}
    option_map = {}
    actions = list(parser._actions)
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            actions.extend(action.choices[args.command]._actions)
    for action in actions:
        option_map[action.dest] = tuple(action.option_strings)
    for key, value in config.items():
        dest = key.replace("-", "_")
        if dest not in known:
            raise DataError(f"{args.config}: unknown config key {key!r}")
        explicit = False
        for opt in option_map.get(dest, ()):
            if opt in argv or any(a.startswith(opt + "=") for a in argv):
                explicit = True
        if not explicit:
            setattr(args, dest, value)
    return args


def _resolved_config(args):
    skip = {"command", "config", "threads"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _write_text(path, text):
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _emit_json(payload, path=None):
    text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    if path:
        _write_text(path, text)
    else:
        sys.stdout.write(text)


def _load_inputs(args):
    from .data import load_feature_csv, load_interactions_tsv

    ds = load_feature_csv(args.features)
    loaded = load_interactions_tsv(args.interactions, list(ds.feature_names))
    return ds, loaded


def _cmd_synth(args):
    from .data import SyntheticSpec, synth_generate, write_feature_csv, write_interactions_tsv

    spec = SyntheticSpec(
        n_features=args.features,
        n_samples=args.samples,
        edge_density=args.density,
        n_signal_edges=args.signal_edges,
        noise_std=args.noise,
        seed=args.seed,
    )
    ds, net, signal_edges = synth_generate(spec)
    os.makedirs(args.out_dir, exist_ok=True)
    features_path = os.path.join(args.out_dir, "features.csv")
    interactions_path = os.path.join(args.out_dir, "interactions.tsv")
    signal_path = os.path.join(args.out_dir, "signal_edges.json")
    write_feature_csv(ds, features_path)
    write_interactions_tsv(net, interactions_path)
    _write_text(
        signal_path,
        json.dumps(
            [[net.feature_names[i], net.feature_names[j]] for i, j in signal_edges],
            indent=2,
        )
        + "\n",
    )
    _emit_json(
        {
            "config": _resolved_config(args),
            "results": {
                "n_samples": ds.n_samples,
                "n_features": ds.n_features,
                "n_edges": net.n_edges,
                "n_positive": int((ds.y == 1).sum()),
                "files": {
                    "features": features_path,
                    "interactions": interactions_path,
                    "signal_edges": signal_path,
                },
            },
        }
    )
    return 0


def _cmd_kernel(args):
    import numpy as np

    from .data import zscore_fit_apply
    from .graphs import instance_graphs
    from .kernels import KernelSpec, kernel_matrix, write_kernel_binary, write_kernel_csv
    from .nu import DistanceSet, find_nu_star

    ds, loaded = _load_inputs(args)
    Z, _, _, _ = zscore_fit_apply(ds.X)
    kind = args.kind.replace("-", "_")
    if kind == "gse":
        graphs = instance_graphs(loaded.network, Z)
        nu = args.nu
        if nu == "auto":
            nu = find_nu_star(DistanceSet.from_graphs(graphs)).nu_star
        km = kernel_matrix(graphs, KernelSpec("gse", nu=nu), sample_ids=ds.sample_ids)
    elif kind == "rbf":
        sigma = args.sigma
        if sigma == "auto":
            from .graphs import pairwise_sq_distances

            result = find_nu_star(DistanceSet.from_matrix(pairwise_sq_distances(Z)))
            sigma = float(1.0 / np.sqrt(result.nu_star))
        km = kernel_matrix(Z, KernelSpec("rbf", sigma=sigma), sample_ids=ds.sample_ids)
    elif kind == "rw_finite":
        graphs = instance_graphs(loaded.network, Z)
        spec = KernelSpec("rw_finite", theta=args.theta, n_max=args.n_max)
        km = kernel_matrix(graphs, spec, sample_ids=ds.sample_ids)
    else:
        graphs = instance_graphs(loaded.network, Z)
        km = kernel_matrix(graphs, KernelSpec("rw_exp", beta=args.beta),
                           sample_ids=ds.sample_ids)
    if args.format == "csv":
        write_kernel_csv(km, args.out)
    else:
        write_kernel_binary(km, args.out)
    _emit_json(
        {
            "config": _resolved_config(args),
            "results": {
                "out": args.out,
                "size": km.size,
                "skipped_interaction_rows": loaded.skipped,
                "spec": km.spec.to_json(),
            },
        }
    )
    return 0


def _cmd_tune_nu(args):
    from .data import zscore_fit_apply
    from .graphs import edge_value_matrix, pairwise_sq_distances
    from .nu import DistanceSet, NuSearchConfig, find_nu_star

    ds, loaded = _load_inputs(args)
    Z, _, _, _ = zscore_fit_apply(ds.X)
    V = edge_value_matrix(loaded.network, Z)
    result = find_nu_star(
        DistanceSet.from_matrix(pairwise_sq_distances(V)),
        NuSearchConfig(
            optimizer=args.optimizer,
            learning_rate=args.learning_rate,
            max_iters=args.max_iters,
            tolerance=args.tolerance,
            nu_init=args.nu_init,
        ),
    )
    if not result.converged:
        raise ConvergenceError(
            f"nu search did not converge in {args.max_iters} iterations"
        )
    _emit_json(
        {"config": _resolved_config(args), "results": result.to_json()},
        args.out,
    )
    if args.out:
        print(json.dumps({"out": args.out, "nu_star": result.nu_star}))
    return 0


def _cmd_benchmark(args):
    from .evaluation import BENCHMARK_METHODS, SplitPlan, run_benchmark

    ds, loaded = _load_inputs(args)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    for method in methods:
        if method not in BENCHMARK_METHODS:
            raise DataError(f"unknown method {method!r}; choose from {BENCHMARK_METHODS}")
    plan = SplitPlan(n_splits=args.splits, test_fraction=args.test_fraction, seed=args.seed)
    results = run_benchmark(
        ds, loaded.network, methods, plan,
        k_features=args.k_features, C=args.C,
        theta=args.theta, n_max=args.n_max, beta=args.beta,
    )
    report = {
        "config": _resolved_config(args),
        "results": {m: r.to_json() for m, r in results.items()},
        "timings": {m: r.timings for m, r in results.items()},
    }
    _emit_json(report, args.out)
    if args.timing_csv:
        lines = ["split,method,auc,seconds"]
        for method, r in results.items():
            for s, auc in enumerate(r.aucs):
                seconds = sum(r.timings[s].values())
                lines.append(f"{s},{method},{auc:.17g},{seconds:.17g}")
        _write_text(args.timing_csv, "\n".join(lines) + "\n")
    print(json.dumps({"out": args.out,
                      "mean_auc": {m: r.mean_auc for m, r in results.items()}}))
    return 0


def _cmd_nu_sweep(args):
    from .evaluation import SplitPlan, nu_sweep

    ds, loaded = _load_inputs(args)
    plan = SplitPlan(n_splits=args.splits, test_fraction=args.test_fraction, seed=args.seed)
    sweep = nu_sweep(
        ds, loaded.network, args.multiples, plan, k_features=args.k_features, C=args.C
    )
    _emit_json(
        {
            "config": _resolved_config(args),
            "results": {
                "multiples": sweep["multiples"],
                "nu_stars": sweep["nu_stars"],
                "mean_auc": sweep["mean_auc"].tolist(),
                "std_auc": sweep["std_auc"].tolist(),
                "auc_matrix": sweep["auc_matrix"].tolist(),
            },
        },
        args.out,
    )
    print(json.dumps({"out": args.out, "mean_auc": sweep["mean_auc"].tolist()}))
    return 0


def _cmd_explain(args):
    import numpy as np

    from .evaluation import fit_split
    from .explain import SamplerConfig, even_descent, fit_surrogate, write_trajectory_csv
    from .graphs import cross_sq_distances, edge_value_matrix
    from .kernels import KernelSpec
    from .svm import decision_values

    ds, loaded = _load_inputs(args)
    if args.sample_id not in ds.sample_ids:
        raise DataError(f"sample id {args.sample_id!r} not found")
    target = ds.sample_ids.index(args.sample_id)
    rest = np.asarray([s for s in range(ds.n_samples) if s != target])
    fit = fit_split(
        ds.X[rest], ds.y[rest], loaded.network, KernelSpec("gse"),
        k_features=args.k_features, C=args.C,
    )

    def scorer(x):
        V = edge_value_matrix(fit.subnet, np.asarray(x)[None, :], fit.phi)
        K = np.exp(-fit.nu_eff * cross_sq_distances(V, fit.train_repr))
        return float(decision_values(fit.model, K)[0])

    x0 = ((ds.X[target] - fit.mu) / fit.sigma)[fit.feat_idx]
    cfg = SamplerConfig(
        tau=args.tau, lambda0=args.lambda0, theta_a=args.theta_a, b=args.b,
        c_l=args.c_l, m_min=args.m_min, sigma2_dist=args.sigma2_dist,
        fd_step=args.fd_step, seed=args.seed,
    )
    traj = even_descent(scorer, x0, fit.subnet, cfg)
    grid = [(d, s) for d in args.depths for s in args.min_splits]
    report = fit_surrogate(
        traj, fit.nu_eff, grid=grid, epsilon=args.epsilon, w_d=args.w_d, w_s=args.w_s
    )
    payload = report.to_json()
    payload["note"] = "importances describe model sensitivity, not causal effects"
    _emit_json({"config": _resolved_config(args), "results": payload}, args.out)
    if args.trajectory_csv:
        write_trajectory_csv(report, args.trajectory_csv, top_k=args.top_k)
    print(json.dumps({"out": args.out, "n_samples": len(traj),
                      "top": payload["importances"][: args.top_k]}))
    return 0


_HANDLERS = {
    "synth": _cmd_synth,
    "kernel": _cmd_kernel,
    "tune-nu": _cmd_tune_nu,
    "benchmark": _cmd_benchmark,
    "nu-sweep": _cmd_nu_sweep,
    "explain": _cmd_explain,
}


def cli_dispatch(argv):
    """Parse argv, run one subcommand, and map failures to exit codes."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads is not None:
        if args.threads < 1:
            parser.error("--threads must be >= 1")
        for var in _THREAD_ENV_VARS:
            os.environ[var] = str(args.threads)
    try:
        args = _apply_config(args, parser, argv)
        return _HANDLERS[args.command](args)
    except ConvergenceError as exc:
        print(json.dumps({"error": str(exc), "type": "convergence"}), file=sys.stderr)
        return 3
    except (DataError, OSError) as exc:
        print(json.dumps({"error": str(exc), "type": "data"}), file=sys.stderr)
        return 2
    except GsekitError as exc:
        print(json.dumps({"error": str(exc), "type": "data"}), file=sys.stderr)
        return 2


def main():
    raise SystemExit(cli_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
