"""Command-line surface: cluster, simulate, benchmark, tune, eval, hoeffding-check.

Every subcommand honors --seed and writes a manifest, so a run can be
reproduced byte for byte from its recorded configuration.  Hyperparameter
flags can also be supplied through a flat key=value config file
(--config) or MPCLUST_* environment variables; precedence is
flag > environment > config file > built-in default.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .consensus import save_consensus_binary, save_consensus_csv
from .dataio import DataMatrix, load_matrix, log2_plus_one, rescale_unit, write_matrix
from .dist import METRICS, deviation_experiment, pairwise
from .hclust import cut_k, ward_linkage
from .metrics import ari, f1_features, select_by_score
from .pipeline import FINAL_ALGOS, MODES, HyperParams, run, tune_minipatch_size
from .synthgen import REGIMES, SynthSpec, generate

_ENV_PREFIX = "MPCLUST_"

# name -> (type, default); flags, env vars, and config keys share these names
_HP_FIELDS: dict[str, tuple[type, object]] = {
    "m_frac": (float, 0.1),
    "n_frac": (float, 0.25),
    "h": (float, 0.95),
    "eta": (float, 0.05),
    "alpha_f": (float, 0.5),
    "tau": (float, 1.0),
    "alpha_i": (float, 0.5),
    "theta": (float, 0.95),
    "epochs_e": (int, 2),
    "t_max": (int, None),
    "k": (int, None),
    "final_algo": (str, "hierarchical"),
    "seed": (int, 0),
    "metric": (str, "manhattan"),
    "mode": (str, "mpcc"),
}


def _coerce(name: str, raw: str) -> object:
    typ, _ = _HP_FIELDS[name]
    if raw == "" or raw.lower() == "none":
        return None
    if typ is int:
        return int(raw)
    if typ is float:
        return float(raw)
    return raw


def _load_config_file(path: str) -> dict[str, object]:
    out: dict[str, object] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip().lower()
        if key not in _HP_FIELDS:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = _coerce(key, value.strip())
    return out


def _env_overrides() -> dict[str, object]:
    out: dict[str, object] = {}
    for name in _HP_FIELDS:
        raw = os.environ.get(_ENV_PREFIX + name.upper())
        if raw is not None:
            out[name] = _coerce(name, raw)
    return out


def _defaults(argv: list[str] | None) -> dict[str, object]:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", default=None)
    known, _ = pre.parse_known_args(argv)
    merged = {name: default for name, (_, default) in _HP_FIELDS.items()}
    if known.config:
        merged.update(_load_config_file(known.config))
    merged.update(_env_overrides())
    return merged


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _digest_config(config: dict) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True).encode()).hexdigest()


def _write_manifest(out_dir: Path, command: str, config: dict, digest: str, timings: dict, extra: dict | None = None) -> None:
    manifest = {
        "version": __version__,
        "command": command,
        "seed": config.get("seed"),
        "input_digest": digest,
        "config": config,
        "timings": {k: round(v, 6) for k, v in timings.items()},
    }
    if extra:
        manifest.update(extra)
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _write_labels(path: Path, ids: tuple[str, ...], labels: np.ndarray) -> None:
    with path.open("w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["id", "label"])
        for name, lab in zip(ids, labels):
            out.writerow([name, int(lab)])


def _read_labels(path: Path) -> np.ndarray:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    if rows and rows[0][:1] == ["id"]:
        rows = rows[1:]
    if not rows:
        raise ValueError(f"{path}: no label rows")
    column = 1 if len(rows[0]) > 1 else 0
    return np.array([r[column] for r in rows])


def _hp_from_args(args: argparse.Namespace) -> HyperParams:
    return HyperParams(
        m_frac=args.m_frac,
        n_frac=args.n_frac,
        h=args.h,
        eta=args.eta,
        alpha_f=args.alpha_f,
        tau=args.tau,
        alpha_i=args.alpha_i,
        theta=args.theta,
        epochs_e=args.epochs_e,
        t_max=args.t_max,
        k_final=args.k,
        final_algo=args.final_algo,
        seed=args.seed,
        metric=args.metric,
    )


def _config_snapshot(args: argparse.Namespace, keys: list[str]) -> dict:
    return {k: getattr(args, k) for k in keys}


def _add_hp_flags(p: argparse.ArgumentParser, d: dict[str, object]) -> None:
    p.add_argument("--m-frac", type=float, default=d["m_frac"], help="minipatch feature fraction")
    p.add_argument("--n-frac", type=float, default=d["n_frac"], help="minipatch observation fraction")
    p.add_argument("--h", type=float, default=d["h"], help="tree-height cut quantile")
    p.add_argument("--eta", type=float, default=d["eta"], help="p-value percentile cutoff")
    p.add_argument("--alpha-f", type=float, default=d["alpha_f"], help="feature learning rate")
    p.add_argument("--tau", type=float, default=d["tau"], help="high-importance cutoff (mean + tau*sd)")
    p.add_argument("--alpha-i", type=float, default=d["alpha_i"], help="observation learning rate")
    p.add_argument("--theta", type=float, default=d["theta"], help="high-uncertainty weight quantile")
    p.add_argument("--epochs-e", type=int, default=d["epochs_e"], help="burn-in epochs per axis")
    p.add_argument("--t-max", type=int, default=d["t_max"], help="iteration cap")
    p.add_argument("--k", type=int, default=d["k"], help="final cluster count (omit for quantile cut)")
    p.add_argument("--final-algo", choices=FINAL_ALGOS, default=d["final_algo"])
    p.add_argument("--seed", type=int, default=d["seed"])
    p.add_argument("--metric", choices=METRICS, default=d["metric"])
    p.add_argument("--config", default=None, help="flat key=value config file")


def _add_io_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--delimiter", default=",")
    p.add_argument("--no-header", action="store_true", help="input has no header row")
    p.add_argument("--no-ids", action="store_true", help="input has no id column")
    p.add_argument("--transpose", action="store_true", help="input is features x observations")
    p.add_argument("--log2", action="store_true", help="apply x -> log2(1+x) first")
    p.add_argument("--rescale", action="store_true", help="min-max rescale to [0,1] first")


def _load_input(args: argparse.Namespace) -> DataMatrix:
    matrix = load_matrix(
        args.input,
        delimiter=args.delimiter,
        header=not args.no_header,
        ids=not args.no_ids,
        transpose=args.transpose,
    )
    if args.log2:
        matrix = log2_plus_one(matrix)
    if args.rescale:
        matrix = rescale_unit(matrix)
    return matrix


# -- subcommands --------------------------------------------------------------


def _cmd_cluster(args: argparse.Namespace) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    timings: dict[str, float] = {}

    t0 = time.perf_counter()
    data = _load_input(args)
    timings["load"] = time.perf_counter() - t0

    hp = _hp_from_args(args)
    t0 = time.perf_counter()
    result = run(data, args.mode, hp, workers=args.workers, collect_weight_trace=args.weight_trace)
    timings["run"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    _write_labels(out_dir / "labels.csv", data.row_ids, result.labels)
    if args.consensus_format == "csv":
        save_consensus_csv(result.s, out_dir / "consensus.csv", data.row_ids)
    else:
        save_consensus_binary(result.s, out_dir / "consensus.bin")
    if result.feature_scores is not None:
        with (out_dir / "feature_scores.csv").open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["feature_id", "score"])
            for name, score in zip(data.col_ids, result.feature_scores):
                w.writerow([name, f"{score:.17g}"])
    with (out_dir / "trace.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "n_clusters", "confusion_pct", "high_obs", "high_feat", "seconds"])
        for rec in result.trace:
            w.writerow(
                [rec.iteration, rec.n_clusters, f"{rec.confusion_pct:.17g}", rec.high_obs, rec.high_feat, f"{rec.seconds:.6f}"]
            )
    if args.weight_trace and result.weight_trace is not None:
        with (out_dir / "obs_weight_trace.csv").open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iteration", "index", "value"])
            for t, obs_w, _ in result.weight_trace:
                for i, v in enumerate(obs_w):
                    w.writerow([t, i, f"{v:.17g}"])
        if args.mode == "impacc":
            with (out_dir / "feature_score_trace.csv").open("w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["iteration", "index", "value"])
                for t, _, scores in result.weight_trace:
                    if scores is None:
                        continue
                    for i, v in enumerate(scores):
                        w.writerow([t, i, f"{v:.17g}"])
    timings["write"] = time.perf_counter() - t0

    keys = ["mode", "m_frac", "n_frac", "h", "eta", "alpha_f", "tau", "alpha_i",
            "theta", "epochs_e", "t_max", "k", "final_algo", "seed", "metric",
            "delimiter", "no_header", "no_ids", "transpose", "log2", "rescale",
            "consensus_format", "workers"]
    _write_manifest(
        out_dir,
        "cluster",
        _config_snapshot(args, keys),
        _digest(Path(args.input)),
        timings,
        {"iterations_run": result.iterations_run, "stop_reason": result.stop_reason},
    )
    print(
        f"{args.mode}: {result.iterations_run} iterations ({result.stop_reason}), "
        f"{int(result.labels.max()) + 1} clusters -> {out_dir}"
    )
    return 0


def _cmd_simulate(args: argparse.Namespace) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    n_features = args.n_features
    if n_features is None:
        n_features = 100 if args.regime == "no_sparse" else 5000
    sizes = tuple(int(s) for s in args.cluster_sizes.split(",")) if args.cluster_sizes else None
    spec = SynthSpec(
        snr=args.snr,
        n_obs=args.n_obs,
        n_features=n_features,
        cluster_sizes=sizes,
        n_signal=args.n_signal,
        rho=args.rho,
        regime=args.regime,
        seed=args.seed,
    )
    t0 = time.perf_counter()
    data = generate(spec)
    timings = {"generate": time.perf_counter() - t0}

    write_matrix(data.matrix, out_dir / "matrix.csv")
    _write_labels(out_dir / "labels.csv", data.matrix.row_ids, data.labels)
    with (out_dir / "mask.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["feature_id", "is_signal"])
        for name, flag in zip(data.matrix.col_ids, data.signal_mask):
            w.writerow([name, int(flag)])

    config = {
        "snr": args.snr, "n_obs": args.n_obs, "n_features": n_features,
        "cluster_sizes": list(spec.sizes()), "n_signal": args.n_signal,
        "rho": args.rho, "regime": args.regime, "seed": args.seed,
    }
    _write_manifest(out_dir, "simulate", config, _digest_config(config), timings)
    print(f"{args.regime}: {args.n_obs}x{n_features} -> {out_dir}")
    return 0


def _cmd_benchmark(args: argparse.Namespace) -> int:
    snrs = [float(s) for s in args.snr.split(",") if s.strip()]
    if not snrs:
        raise ValueError("need at least one SNR value")
    if args.reps < 1:
        raise ValueError("reps must be >= 1")
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    known = ("mpcc", "impacc", "hclust")
    for mth in methods:
        if mth not in known:
            raise ValueError(f"unknown method {mth!r}; choose from {known}")

    n_features = args.n_features
    if n_features is None:
        n_features = 100 if args.regime == "no_sparse" else 5000
    rows: list[tuple[str, float, int, float, str, float]] = []
    for snr in snrs:
        for rep in range(args.reps):
            seed = args.seed + rep
            spec = SynthSpec(
                snr=snr, n_obs=args.n_obs, n_features=n_features,
                n_signal=args.n_signal, rho=args.rho, regime=args.regime, seed=seed,
            )
            data = generate(spec)
            k = 4
            for method in methods:
                t0 = time.perf_counter()
                if method == "hclust":
                    labels = cut_k(ward_linkage(pairwise(data.matrix.values, "manhattan")), k)
                    f1_text = ""
                else:
                    hp = HyperParams(k_final=k, seed=seed)
                    result = run(data.matrix, method, hp)
                    labels = result.labels
                    f1_text = ""
                    if result.feature_scores is not None:
                        mask = select_by_score(result.feature_scores)
                        f1_text = f"{f1_features(mask, data.signal_mask):.6f}"
                elapsed = time.perf_counter() - t0
                rows.append((method, snr, seed, ari(labels, data.labels), f1_text, elapsed))

    rows.sort(key=lambda r: (r[0], r[1], r[2]))
    out = Path(args.out)
    with out.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "snr", "seed", "ari", "f1", "seconds"])
        for method, snr, seed, ari_val, f1_text, elapsed in rows:
            w.writerow([method, f"{snr:g}", seed, f"{ari_val:.6f}", f1_text, f"{elapsed:.4f}"])
    print(f"{len(rows)} rows -> {out}")
    return 0


def _cmd_tune(args: argparse.Namespace) -> int:
    data = _load_input(args)
    m_grid = [float(v) for v in args.m_grid.split(",") if v.strip()]
    n_grid = [float(v) for v in args.n_grid.split(",") if v.strip()]
    if not m_grid or not n_grid:
        raise ValueError("both --m-grid and --n-grid need at least one value")
    grid = [(mf, nf) for mf in m_grid for nf in n_grid]
    hp = _hp_from_args(args)
    result = tune_minipatch_size(data, args.mode, grid, hp)

    out = Path(args.out)
    with out.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["m_frac", "n_frac", "max_confusion", "iterations"])
        for m_frac, n_frac, conf, iters in result.cells:
            w.writerow([f"{m_frac:g}", f"{n_frac:g}", f"{conf:.17g}", iters])
    print(f"chosen m_frac={result.m_frac:g} n_frac={result.n_frac:g} "
          f"max_confusion={result.max_confusion:.6g}")
    if not result.converged:
        print("warning: no grid cell reached max confusion < 0.01; "
              "reporting the most stable cell", file=sys.stderr)
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    if args.what == "ari":
        a = _read_labels(Path(args.a))
        b = _read_labels(Path(args.b))
        print(f"{ari(a, b):.17g}")
    else:
        scores = _read_score_column(Path(args.a))
        truth = _read_score_column(Path(args.b)).astype(bool)
        mask = select_by_score(scores, top_k=args.top_k)
        print(f"{f1_features(mask, truth):.17g}")
    return 0


def _read_score_column(path: Path) -> np.ndarray:
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if rows and not _is_number(rows[0][-1]):
        rows = rows[1:]
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return np.array([float(r[-1]) for r in rows])


def _is_number(text: str) -> bool:
    try:
        float(text)
        return True
    except ValueError:
        return False


def _cmd_hoeffding(args: argparse.Namespace) -> int:
    if args.input:
        data = _load_input(args)
    else:
        rng = np.random.default_rng(args.seed)
        vals = rng.random((args.n_obs, args.n_features))
        data = DataMatrix(
            vals,
            tuple(f"obs_{i}" for i in range(args.n_obs)),
            tuple(f"feat_{j}" for j in range(args.n_features)),
        )
    eps_grid = [float(e) for e in args.eps.split(",") if e.strip()]
    m_feats = [int(v) for v in args.m_feat.split(",") if v.strip()]
    if not eps_grid or not m_feats:
        raise ValueError("need at least one --eps and one --m-feat value")

    out = Path(args.out)
    with out.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["m_feat", "eps", "empirical", "bound"])
        for m_feat in m_feats:
            table = deviation_experiment(data, args.metric, m_feat, args.trials, eps_grid, args.seed)
            for eps, empirical, bound in table:
                w.writerow([m_feat, f"{eps:g}", f"{empirical:.17g}", f"{bound:.17g}"])
    print(f"{len(m_feats) * len(eps_grid)} rows -> {out}")
    return 0


# -- parser -------------------------------------------------------------------


def _build_parser(d: dict[str, object]) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mpclust",
        description="Minipatch consensus clustering (uniform and adaptive sampling)",
    )
    parser.add_argument("--version", action="version", version=f"mpclust {__version__}")
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("cluster", help="cluster a matrix and write labels + consensus")
    p.add_argument("input", help="matrix CSV/TSV (observations x features)")
    p.add_argument("--mode", choices=MODES, default=d["mode"])
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--consensus-format", choices=("csv", "binary"), default="csv")
    p.add_argument("--workers", type=int, default=1, help="parallel minipatch workers (mpcc)")
    p.add_argument("--weight-trace", action="store_true",
                   help="also write per-iteration weight/score traces")
    _add_hp_flags(p, d)
    _add_io_flags(p)
    p.set_defaults(func=_cmd_cluster)

    p = sub.add_parser("simulate", help="generate a synthetic benchmark dataset")
    p.add_argument("--regime", choices=REGIMES, default="sparse")
    p.add_argument("--snr", type=float, required=True)
    p.add_argument("--n-obs", type=int, default=500)
    p.add_argument("--n-features", type=int, default=None,
                   help="default 5000 (sparse/weak_sparse) or 100 (no_sparse)")
    p.add_argument("--n-signal", type=int, default=25)
    p.add_argument("--cluster-sizes", default=None, help="comma list summing to n-obs")
    p.add_argument("--rho", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=d["seed"])
    p.add_argument("--out", default=".", help="output directory")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("benchmark", help="ARI/F1/runtime grid over SNR and seeds")
    p.add_argument("--snr", required=True, help="comma list of SNR values")
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--methods", default="mpcc,impacc,hclust")
    p.add_argument("--regime", choices=REGIMES, default="sparse")
    p.add_argument("--n-obs", type=int, default=500)
    p.add_argument("--n-features", type=int, default=None)
    p.add_argument("--n-signal", type=int, default=25)
    p.add_argument("--rho", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=d["seed"])
    p.add_argument("--out", default="benchmark.csv")
    p.set_defaults(func=_cmd_benchmark)

    p = sub.add_parser("tune", help="pick the smallest adequate minipatch size")
    p.add_argument("input")
    p.add_argument("--mode", choices=MODES, default=d["mode"])
    p.add_argument("--m-grid", required=True, help="comma list of m_frac values")
    p.add_argument("--n-grid", required=True, help="comma list of n_frac values")
    p.add_argument("--out", default="tune_report.csv")
    _add_hp_flags(p, d)
    _add_io_flags(p)
    p.set_defaults(func=_cmd_tune)

    p = sub.add_parser("eval", help="score labels (ARI) or feature scores (F1)")
    p.add_argument("what", choices=("ari", "f1"))
    p.add_argument("a", help="labels CSV / scores CSV")
    p.add_argument("b", help="labels CSV / truth-mask CSV")
    p.add_argument("--top-k", type=int, default=None,
                   help="select the k best-scored features instead of mean+sd")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("hoeffding-check", help="feature-subsampling deviation table")
    p.add_argument("--input", default=None, help="matrix CSV (default: uniform random)")
    p.add_argument("--n-obs", type=int, default=50)
    p.add_argument("--n-features", type=int, default=100)
    p.add_argument("--m-feat", default="10", help="comma list of subsample sizes")
    p.add_argument("--eps", default="0.05,0.1,0.2,0.3", help="comma list of deviations")
    p.add_argument("--trials", type=int, default=10000)
    p.add_argument("--metric", choices=METRICS, default="manhattan")
    p.add_argument("--seed", type=int, default=d["seed"])
    p.add_argument("--out", default="hoeffding.csv")
    _add_io_flags(p)
    p.set_defaults(func=_cmd_hoeffding)

    return parser


def main(argv: list[str] | None = None) -> int:
    defaults = _defaults(argv if argv is not None else sys.argv[1:])
    parser = _build_parser(defaults)
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
