"""Command-line entry point: simulate, estimate, and evaluate runs.

Every command writes its artifacts plus one manifest.json into --out.
Exit codes: 0 success, 2 usage or input error, 3 I/O failure, 4 estimation
hit the iteration cap (estimates are still written), 5 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import io as ksio
from .core import KsModel, sample_stats
from .evaluate import bic, pr_auc, pr_curve, precision_recall, support_edges
from .exceptions import InputError, KsglassoError, NumericalError
from .simulate import GraphSpec, gen_cluster_graph, gen_random_graph, sample_data
from .solver import SolverConfig, fit

USAGE_ERROR = 2
IO_ERROR = 3
MAX_ITERS_EXIT = 4
NUMERICAL_ERROR = 5


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ksglasso",
        description="Kronecker-sum sparse inverse covariance estimation",
    )
    parser.add_argument(
        "--config",
        help="key=value file supplying defaults; explicit flags win",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate truth graphs and data")
    sim.add_argument("--kind", choices=["random", "clustered"], default="random")
    sim.add_argument("--p", type=int, required=True)
    sim.add_argument("--q", type=int, required=True)
    sim.add_argument("--nnz", type=int, help="target nonzeros (random kind)")
    sim.add_argument("--blocks", type=int, help="cluster count (clustered kind)")
    sim.add_argument("--n", type=int, default=1, help="replicate count")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", required=True)

    est = sub.add_parser("estimate", help="fit the two graphs from data files")
    est.add_argument("--data", action="append", required=True,
                     help="CSV data matrix; repeat for replicates")
    est.add_argument("--gamma-theta", type=float, required=True)
    est.add_argument("--gamma-psi", type=float, required=True)
    est.add_argument("--k", type=int, default=1, help="0 = exact Hessian")
    est.add_argument("--rho", type=float, help="trace ratio (default q/p)")
    est.add_argument("--eps", type=float, default=1e-3)
    est.add_argument("--max-iters", type=int, default=100)
    est.add_argument("--seed", type=int, default=0)
    est.add_argument("--screening", action="store_true")
    est.add_argument("--out", required=True)

    ev = sub.add_parser("eval", help="grid evaluation: PR curve and BIC")
    ev.add_argument("--data", action="append", required=True)
    ev.add_argument("--truth-theta")
    ev.add_argument("--truth-psi")
    ev.add_argument("--gamma-grid", required=True,
                    help="comma-separated regularization values")
    ev.add_argument("--k", type=int, default=1)
    ev.add_argument("--rho", type=float)
    ev.add_argument("--eps", type=float, default=1e-3)
    ev.add_argument("--max-iters", type=int, default=100)
    ev.add_argument("--seed", type=int, default=0)
    ev.add_argument("--screening", action="store_true")
    ev.add_argument("--jobs", type=int, default=1)
    ev.add_argument("--out", required=True)
    return parser


def _apply_config_file(parser, argv):
    """Config file entries become parser defaults; CLI flags still win."""
    probe = argparse.ArgumentParser(add_help=False)
    probe.add_argument("--config")
    known, _ = probe.parse_known_args(argv)
    if not known.config:
        return
    entries = ksio.read_sidecar(known.config)
    defaults = {}
    for key, value in entries.items():
        dest = key.replace("-", "_")
        defaults[dest] = value
    for action_group in parser._subparsers._group_actions:
        for sub_parser in action_group.choices.values():
            _coerce_defaults(sub_parser, defaults)
    _coerce_defaults(parser, defaults)


def _coerce_defaults(parser, defaults):
    usable = {}
    for action in parser._actions:
        if action.dest in defaults:
            raw = defaults[action.dest]
            if action.type is int:
                usable[action.dest] = int(raw)
            elif action.type is float:
                usable[action.dest] = float(raw)
            elif isinstance(action, argparse._StoreTrueAction):
                usable[action.dest] = raw.lower() in ("1", "true", "yes")
            else:
                usable[action.dest] = raw
            action.required = False  # the config satisfied this flag
    parser.set_defaults(**usable)


def _make_out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(args) -> int:
    if args.kind == "random" and args.nnz is None:
        raise InputError("--nnz is required for --kind random")
    if args.kind == "clustered" and args.blocks is None:
        raise InputError("--blocks is required for --kind clustered")
    out = _make_out_dir(args.out)
    rng = np.random.default_rng(args.seed)

    def build(kind, size):
        if kind == "random":
            return gen_random_graph(
                GraphSpec("random", size, target_nnz=args.nnz, seed=args.seed), rng
            )
        return gen_cluster_graph(
            GraphSpec(
                "clustered", size, target_nnz=args.nnz or size,
                num_blocks=args.blocks, seed=args.seed,
            ),
            rng,
        )

    theta = build(args.kind, args.p)
    psi = build(args.kind, args.q)
    model = KsModel.create(theta, psi)
    data = sample_data(model, args.n, rng)

    manifest = ksio.ManifestWriter("simulate", out, vars(args) | {"config": None})
    for name, mat in (("theta_true.csv", theta), ("psi_true.csv", psi)):
        ksio.write_matrix_csv(out / name, mat)
        manifest.add_artifact(out / name)
    for idx, y in enumerate(data):
        name = f"data_{idx:03d}.csv"
        ksio.write_matrix_csv(out / name, y)
        manifest.add_artifact(out / name)
    ksio.write_sidecar(
        out / "metadata.txt",
        {
            "kind": args.kind,
            "p": args.p,
            "q": args.q,
            "n": args.n,
            "seed": args.seed,
            "target_nnz": args.nnz if args.nnz is not None else "",
            "num_blocks": args.blocks if args.blocks is not None else "",
        },
    )
    manifest.add_artifact(out / "metadata.txt")
    manifest.write()
    return 0


def _load_stats(paths):
    mats = [ksio.read_matrix_csv(p) for p in paths]
    return sample_stats(mats)


def _config_from_args(args, gamma_theta, gamma_psi) -> SolverConfig:
    return SolverConfig(
        gamma_theta=gamma_theta,
        gamma_psi=gamma_psi,
        k_trunc=args.k,
        rho=args.rho,
        epsilon=args.eps,
        max_newton_iters=args.max_iters,
        rng_seed=args.seed,
        screening=args.screening,
    )


def cmd_estimate(args) -> int:
    out = _make_out_dir(args.out)
    stats = _load_stats(args.data)
    cfg = _config_from_args(args, args.gamma_theta, args.gamma_psi)
    manifest = ksio.ManifestWriter(
        "estimate", out, _public_config(cfg), inputs=args.data
    )
    try:
        model, trace = fit(stats, cfg)
    except NumericalError as exc:
        manifest.set("error", {"type": type(exc).__name__, "detail": str(exc)})
        manifest.write()
        raise
    for name, mat in (("theta_hat.csv", model.theta), ("psi_hat.csv", model.psi)):
        ksio.write_matrix_csv(out / name, mat)
        manifest.add_artifact(out / name)
    ksio.write_trace_csv(out / "trace.csv", trace)
    manifest.add_artifact(out / "trace.csv")
    manifest.set("termination", trace.termination_reason)
    manifest.set("iterations", len(trace.records))
    manifest.write()
    return 0 if trace.termination_reason == "converged" else MAX_ITERS_EXIT


def cmd_eval(args) -> int:
    grid = [float(x) for x in args.gamma_grid.split(",") if x.strip()]
    if not grid:
        raise InputError("--gamma-grid must contain at least one value")
    if (args.truth_theta is None) != (args.truth_psi is None):
        raise InputError("supply both --truth-theta and --truth-psi or neither")
    out = _make_out_dir(args.out)
    stats = _load_stats(args.data)
    base_cfg = _config_from_args(args, grid[0], grid[0])
    manifest = ksio.ManifestWriter(
        "eval", out, _public_config(base_cfg) | {"gamma_grid": grid},
        inputs=args.data,
    )

    def fit_one(gamma):
        return fit(stats, base_cfg.with_gammas(gamma))

    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        fits = list(pool.map(fit_one, grid))

    bics = [bic(stats, model) for model, _ in fits]
    with open(out / "bic.csv", "w", encoding="ascii") as fh:
        fh.write("gamma,bic,nnz_theta,nnz_psi,converged\n")
        for gamma, (model, trace), score in zip(grid, fits, bics):
            fh.write(
                f"{gamma:.17g},{score:.17g},{2 * len(support_edges(model.theta))},"
                f"{2 * len(support_edges(model.psi))},"
                f"{int(trace.termination_reason == 'converged')}\n"
            )
    manifest.add_artifact(out / "bic.csv")

    best_idx = int(np.argmin(bics))
    best_model = fits[best_idx][0]
    for name, mat in (
        ("theta_best.csv", best_model.theta),
        ("psi_best.csv", best_model.psi),
    ):
        ksio.write_matrix_csv(out / name, mat)
        manifest.add_artifact(out / name)
    summary = {
        "config": _public_config(base_cfg) | {"gamma_grid": grid},
        "seed": args.seed,
        "best_gamma": grid[best_idx],
        "best_bic": bics[best_idx],
        "terminations": [t.termination_reason for _, t in fits],
    }

    if args.truth_theta is not None:
        truth = (
            ksio.read_matrix_csv(args.truth_theta),
            ksio.read_matrix_csv(args.truth_psi),
        )
        points = []
        for gamma, (model, _) in zip(grid, fits):
            prec, rec = precision_recall(model.theta, model.psi, *truth)
            points.append((gamma, prec, rec, model))
        with open(out / "pr_curve.csv", "w", encoding="ascii") as fh:
            fh.write("gamma,precision,recall,nnz_theta,nnz_psi\n")
            for gamma, prec, rec, model in points:
                fh.write(
                    f"{gamma:.17g},{prec:.17g},{rec:.17g},"
                    f"{2 * len(support_edges(model.theta))},"
                    f"{2 * len(support_edges(model.psi))}\n"
                )
        manifest.add_artifact(out / "pr_curve.csv")
        from .evaluate import PRPoint

        summary["pr_auc"] = pr_auc(
            [PRPoint(g, p_, r_, 0, 0) for g, p_, r_, _ in points]
        )
    manifest.set("summary", summary)
    manifest.write()
    with open(out / "summary.json", "w", encoding="ascii") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    manifest.add_artifact(out / "summary.json")
    manifest.write()
    return 0


def _public_config(cfg: SolverConfig) -> dict:
    out = {}
    for key, value in vars(cfg).items():
        out[key] = value if not callable(value) else getattr(
            value, "__name__", "custom"
        )
    return out


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    try:
        _apply_config_file(parser, argv)
    except (OSError, InputError) as exc:
        print(f"error reading config: {exc}", file=sys.stderr)
        return USAGE_ERROR
    args = parser.parse_args(argv)
    handlers = {
        "simulate": cmd_simulate,
        "estimate": cmd_estimate,
        "eval": cmd_eval,
    }
    try:
        return handlers[args.command](args)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return IO_ERROR
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return NUMERICAL_ERROR
    except KsglassoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return NUMERICAL_ERROR


if __name__ == "__main__":
    sys.exit(main())
