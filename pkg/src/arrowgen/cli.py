"""Command-line orchestration: prepare | train | generate | evaluate | sweep-l | sbm.

Exit codes: 0 success, 1 usage, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path


def _pin_threads():
    threads = os.environ.get("ARROWGEN_THREADS")
    if "--threads" in sys.argv:
        i = sys.argv.index("--threads")
        if i + 1 < len(sys.argv):
            threads = sys.argv[i + 1]
    if threads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(threads)


_pin_threads()

import yaml  # noqa: E402  (imported after thread pinning)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2; we use 1 for usage
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        sys.exit(1)


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    with open(path) as fh:
        cfg = yaml.safe_load(fh) or {}
    if not isinstance(cfg, dict):
        raise ValueError(f"{path}: config root must be a mapping")
    return cfg


def _opt(args, cfg: dict, key: str, default):
    """Flag value beats config file beats built-in default."""
    val = getattr(args, key.replace("-", "_"), None)
    if val is not None:
        return val
    if key in cfg:
        return cfg[key]
    return default


def _check_out(path: Path, overwrite: bool):
    if path.exists() and not overwrite:
        raise FileExistsError(f"{path} exists; pass --overwrite to replace it")


def _write(path: Path, text: str, overwrite: bool):
    _check_out(path, overwrite)
    path.write_text(text)


# -- subcommands -----------------------------------------------------------


def cmd_prepare(args) -> int:
    from . import graph as gr

    cfg = _load_config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    text = Path(args.edges).read_text()
    g = gr.load_edge_list(text, undirected=True)
    lcc, _ = gr.largest_connected_component(g)
    split = gr.split_edges(
        lcc,
        _opt(args, cfg, "val-frac", 0.1),
        _opt(args, cfg, "test-frac", 0.05),
        seed=_opt(args, cfg, "seed", 0),
    )
    if args.features:
        x = gr.load_features(Path(args.features).read_text())
        if x.shape[0] != lcc.num_nodes:
            raise ValueError(
                f"feature rows ({x.shape[0]}) != LCC nodes ({lcc.num_nodes})"
            )
    else:
        x = gr.positional_encodings(lcc.num_nodes, _opt(args, cfg, "positional-dim", 64))
    _write(out / "lcc.edges", gr.to_edge_list_text(lcc), args.overwrite)
    _write(out / "split.txt", gr.save_split(split), args.overwrite)
    _write(out / "features.txt", gr.save_features(x), args.overwrite)
    print(f"prepared: N={lcc.num_nodes} undirected_edges={lcc.num_undirected_edges} "
          f"train={len(split.train_edges)} val={len(split.val_edges)} "
          f"test={len(split.test_edges)}")
    return 0


def _load_prepared(prepared: str):
    from . import graph as gr

    pdir = Path(prepared)
    lcc = gr.load_edge_list((pdir / "lcc.edges").read_text())
    split = gr.load_split((pdir / "split.txt").read_text())
    x = gr.load_features((pdir / "features.txt").read_text())
    return lcc, split, x


def cmd_train(args) -> int:
    from . import checkpoint as ck
    from .denoiser import DenoiserConfig, train_denoiser
    from .gnn import GcnConfig, train_gnn

    cfg = _load_config(args.config)
    _, split, x = _load_prepared(args.prepared)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dn_path = out / "denoiser.ckpt"
    gnn_path = out / "gnn.ckpt"

    dn_cfg = DenoiserConfig(
        walk_len=_opt(args, cfg, "walk-len", 16),
        embed_dim=_opt(args, cfg, "embed-dim", 64),
        lr=_opt(args, cfg, "denoiser-lr", 1e-3),
        batch_size=_opt(args, cfg, "batch-size", 128),
        steps=_opt(args, cfg, "steps", 20000),
        time_budget_s=_opt(args, cfg, "time-budget-s", None),
        seed=_opt(args, cfg, "seed", 0),
    )
    if args.resume and dn_path.exists():
        print("denoiser checkpoint present; skipping (resume)")
    else:
        _check_out(dn_path, args.overwrite or args.resume)
        params, log = train_denoiser(split.train_graph(), dn_cfg)
        ck.save_denoiser(dn_path, params)
        (out / "denoiser_loss.csv").write_text(
            "step,loss,wall_ms\n"
            + "".join(f"{s},{l:.6f},{w:.1f}\n" for s, l, w in log)
        )
        print(f"denoiser trained: final loss {log[-1][1]:.4f} after {log[-1][0]} steps")

    gnn_cfg = GcnConfig(
        hidden_dim=_opt(args, cfg, "gnn-hidden", 100),
        out_dim=_opt(args, cfg, "gnn-out", 10),
        lr=_opt(args, cfg, "gnn-lr", 1e-2),
        steps=_opt(args, cfg, "gnn-steps", 2000),
        seed=_opt(args, cfg, "seed", 0),
    )
    if args.resume and gnn_path.exists():
        print("gnn checkpoint present; skipping (resume)")
    else:
        _check_out(gnn_path, args.overwrite or args.resume)
        gnn_params, gnn_log = train_gnn(split, x, gnn_cfg)
        ck.save_gcn(gnn_path, gnn_params)
        (out / "gnn_loss.csv").write_text(
            "step,train_loss,val_loss\n"
            + "".join(
                f"{s},{tr:.6f},{'' if v is None else f'{v:.6f}'}\n"
                for s, tr, v in gnn_log
            )
        )
        print(f"gnn trained: {len(gnn_log)} steps")
    return 0


def cmd_generate(args) -> int:
    from . import checkpoint as ck
    from . import graph as gr
    from .generator import generate

    cfg = _load_config(args.config)
    lcc, _, x = _load_prepared(args.prepared)
    models = Path(args.models)
    dn_params = ck.load_denoiser(models / "denoiser.ckpt")
    gnn_params = ck.load_gcn(models / "gnn.ckpt")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    runs = _opt(args, cfg, "runs", 10)
    iterations = _opt(args, cfg, "iterations", 10)
    seed = _opt(args, cfg, "seed", 0)
    d_target = lcc.degrees()
    for k in range(runs):
        g, manifest = generate(
            dn_params, gnn_params, x, d_target, iterations, seed=seed + k
        )
        _write(out / f"run_{k:03d}.edges", gr.to_edge_list_text(g), args.overwrite)
        _write(
            out / f"run_{k:03d}.manifest.json",
            json.dumps(manifest, indent=2) + "\n",
            args.overwrite,
        )
        print(
            f"run {k}: {g.num_undirected_edges} edges in "
            f"{manifest['total_wall_s']:.2f}s"
        )
    return 0


def cmd_evaluate(args) -> int:
    from . import graph as gr
    from . import metrics as mt

    lcc, _, _ = _load_prepared(args.prepared)
    report: dict = {"original": mt.compute_report(lcc).to_dict()}
    if not args.original_only:
        run_files = sorted(Path(args.runs).glob("run_*.edges")) if args.runs else []
        if not run_files:
            raise ValueError("no run_*.edges files found; pass --runs or --original-only")
        graphs = []
        for f in run_files:
            raw = gr.load_edge_list(f.read_text())
            edges = raw.edge_array()
            if raw.orig_ids is not None:
                # undo dense relabeling so ids line up with the original graph
                edges = raw.orig_ids[edges]
            graphs.append(gr.Graph.from_edges(lcc.num_nodes, edges, undirected=True))
        mean, std = mt.evaluate_runs(graphs, lcc)
        report["generated_mean"] = mean.to_dict()
        report["generated_std"] = std.to_dict()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write(out / "report.json", json.dumps(report, indent=2) + "\n", args.overwrite)
    hist = mt.degree_histogram(lcc)
    _write(
        out / "degree_hist.csv",
        "degree,count\n" + "".join(f"{i},{c}\n" for i, c in enumerate(hist)),
        args.overwrite,
    )
    logbin = mt.log_binned_histogram(lcc)
    _write(
        out / "degree_hist_logbin.csv",
        "lo,hi,count\n" + "".join(f"{lo:.6g},{hi:.6g},{c}\n" for lo, hi, c in logbin),
        args.overwrite,
    )
    print(json.dumps(report["original"], indent=2))
    return 0


def cmd_sweep_l(args) -> int:
    from . import checkpoint as ck
    from .generator import generate

    lcc, _, x = _load_prepared(args.prepared)
    models = Path(args.models)
    dn_params = ck.load_denoiser(models / "denoiser.ckpt")
    gnn_params = ck.load_gcn(models / "gnn.ckpt")
    l_values = [int(tok) for tok in args.l_values.split(",")]
    d_target = lcc.degrees()
    rows = ["L,run,edges,wall_s"]
    for l in l_values:
        for k in range(args.runs_per_l):
            g, manifest = generate(
                dn_params, gnn_params, x, d_target, l, seed=args.seed + 1000 * l + k
            )
            rows.append(f"{l},{k},{g.num_undirected_edges},{manifest['total_wall_s']:.3f}")
            print(rows[-1])
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    _write(out, "\n".join(rows) + "\n", args.overwrite)
    return 0


def cmd_sbm(args) -> int:
    from . import graph as gr

    sizes = [int(tok) for tok in args.sizes.split(",")]
    g = gr.sbm_generate(sizes, args.p_in, args.p_out, args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    _write(out, gr.to_edge_list_text(g), args.overwrite)
    print(f"sbm: N={g.num_nodes} undirected_edges={g.num_undirected_edges}")
    return 0


# -- argument wiring -------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="arrowgen")
    parser.add_argument("--threads", type=int, help="cap BLAS/worker threads")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="YAML config file; flags override it")
        p.add_argument("--overwrite", action="store_true")
        p.add_argument("--seed", type=int)
        p.add_argument("--threads", type=int)

    p = sub.add_parser("prepare", help="LCC + edge split + features")
    common(p)
    p.add_argument("--edges", required=True, help="edge-list file")
    p.add_argument("--out", required=True)
    p.add_argument("--features", help="feature file; default positional encodings")
    p.add_argument("--val-frac", type=float)
    p.add_argument("--test-frac", type=float)
    p.add_argument("--positional-dim", type=int)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", help="train denoiser and GCN")
    common(p)
    p.add_argument("--prepared", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--resume", action="store_true")
    p.add_argument("--walk-len", type=int)
    p.add_argument("--embed-dim", type=int)
    p.add_argument("--steps", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--denoiser-lr", type=float)
    p.add_argument("--time-budget-s", type=float)
    p.add_argument("--gnn-hidden", type=int)
    p.add_argument("--gnn-out", type=int)
    p.add_argument("--gnn-lr", type=float)
    p.add_argument("--gnn-steps", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("generate", help="generate graphs from checkpoints")
    common(p)
    p.add_argument("--prepared", required=True)
    p.add_argument("--models", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--runs", type=int)
    p.add_argument("--iterations", type=int)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("evaluate", help="graph statistics report")
    common(p)
    p.add_argument("--prepared", required=True)
    p.add_argument("--runs")
    p.add_argument("--out", required=True)
    p.add_argument("--original-only", action="store_true")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep-l", help="edge counts across iteration counts")
    common(p)
    p.add_argument("--prepared", required=True)
    p.add_argument("--models", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--l-values", default="1,2,5,10,20,30")
    p.add_argument("--runs-per-l", type=int, default=3)
    p.set_defaults(func=cmd_sweep_l)
    p.set_defaults(seed=0)

    p = sub.add_parser("sbm", help="write a stochastic block model graph")
    common(p)
    p.add_argument("--sizes", default="60,100,200")
    p.add_argument("--p-in", type=float, default=0.13)
    p.add_argument("--p-out", type=float, default=0.007)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sbm)
    p.set_defaults(seed=0)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.seed is None:
        args.seed = 0
    try:
        return args.func(args)
    except (FloatingPointError, ArithmeticError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
