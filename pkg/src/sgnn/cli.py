"""Command-line interface: training runs, method comparisons, parameter
sweeps, clock benchmarks, and dataset utilities.

Every run directory receives a ``manifest.txt`` of sorted ``key=value``
lines holding the fully resolved configuration and the dataset checksum;
``reproduce`` replays a manifest and must regenerate the CSV byte for
byte.  Exit codes: 0 success, 1 usage/config, 2 data, 3 numeric fault.
``SGNN_THREADS`` caps fan-out across runs in compare and sweep.
"""

from __future__ import annotations

import itertools
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import click
import numpy as np

from .bench import run_bench
from .data import (
    DatasetBundle,
    SBMConfig,
    compute_checksum,
    generate_sbm,
    load_dataset,
    parse_synthetic_spec,
    save_dataset,
)
from .errors import ConfigError, DataFormatError, GraphValidationError, NumericFault
from .regularizers import KINDS, RegularizerConfig
from .trainer import RunConfig, train

MANIFEST_NAME = "manifest.txt"
COMPARE_METHODS = ("dropout", "drop_edge", "drop_node", "sgnn")
_GRID_KEYS = {"lambda": "lam", "tcut": "t_cut", "p": "p"}


# ---------------------------------------------------------------- helpers

def _worker_count(jobs: int) -> int:
    cap = int(os.environ.get("SGNN_THREADS", "1"))
    return max(1, min(jobs, cap))


def _resolve_source(data: str | None, synthetic: str | None):
    """Returns (bundle, manifest entries describing the dataset)."""
    if (data is None) == (synthetic is None):
        raise click.UsageError("exactly one of --data or --synthetic is required")
    if data is not None:
        bundle = load_dataset(data)
        entries = {"data.path": str(data)}
    else:
        cfg = parse_synthetic_spec(synthetic)
        bundle = generate_sbm(cfg)
        entries = {
            "data.synthetic": synthetic,
            "data.sbm_intra": repr(cfg.intra),
            "data.sbm_inter": repr(cfg.inter),
            "data.sbm_feature_dim": str(cfg.feature_dim),
            "data.sbm_noise": repr(cfg.noise),
            "data.sbm_seed": str(cfg.seed),
        }
    entries["data.checksum"] = bundle.checksum or compute_checksum(bundle)
    for note in bundle.warnings:
        click.echo(f"note: {note}", err=True)
    return bundle, entries


def _write_manifest(out_dir: Path, entries: dict[str, str]) -> None:
    lines = [f"{k}={entries[k]}" for k in sorted(entries)]
    (out_dir / MANIFEST_NAME).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_manifest(path) -> dict[str, str]:
    entries = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not raw.strip():
            continue
        key, sep, value = raw.partition("=")
        if not sep:
            raise DataFormatError(f"manifest line is not key=value: {raw!r}", lineno)
        entries[key] = value
    return entries


def _bundle_from_entries(entries: dict[str, str]) -> DatasetBundle:
    if "data.path" in entries:
        bundle = load_dataset(entries["data.path"])
    else:
        cfg = SBMConfig(
            **{
                "blocks": parse_synthetic_spec(entries["data.synthetic"]).blocks,
                "per_block": parse_synthetic_spec(entries["data.synthetic"]).per_block,
                "intra": float(entries["data.sbm_intra"]),
                "inter": float(entries["data.sbm_inter"]),
                "feature_dim": int(entries["data.sbm_feature_dim"]),
                "noise": float(entries["data.sbm_noise"]),
                "seed": int(entries["data.sbm_seed"]),
            }
        )
        bundle = generate_sbm(cfg)
    checksum = bundle.checksum or compute_checksum(bundle)
    if checksum != entries["data.checksum"]:
        raise DataFormatError(
            f"dataset checksum {checksum[:12]}... does not match manifest "
            f"{entries['data.checksum'][:12]}...")
    return bundle


def _run_job(args) -> dict:
    """Executed in worker processes; loads data and trains one run."""
    entries, cfg, tag = args
    bundle = _bundle_from_entries(entries)
    result = train(bundle.graph, cfg)
    final = result.record.final
    row = result.record.best_val_row() if cfg.best_val else final
    return {
        "tag": tag,
        "seed": cfg.seed,
        "val": row.val_acc,
        "test": row.test_acc,
        "active": result.record.mean_active_frac(),
        "skipped": result.record.skipped_steps,
    }


def _fan_out(jobs: list) -> list[dict]:
    workers = _worker_count(len(jobs))
    if workers == 1:
        return [_run_job(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_job, jobs))


def _parse_seeds(text: str) -> list[int]:
    try:
        seeds = [int(s) for s in text.replace(",", " ").split()]
    except ValueError as exc:
        raise click.UsageError(f"cannot parse seed list {text!r}") from exc
    if not seeds:
        raise click.UsageError("seed list is empty")
    return seeds


def _reg_from_flags(reg: str, p: float, lam: float, tcut: float,
                    rate_mode: str) -> RegularizerConfig:
    return RegularizerConfig(kind=reg, p=p, lam=lam, t_cut=tcut,
                             rate_mode=rate_mode).validate()


_shared_train_options = [
    click.option("--data", type=click.Path(), default=None,
                 help="Dataset file in the engine text format."),
    click.option("--synthetic", default=None, metavar="SPEC",
                 help="Generate a synthetic dataset, e.g. sbm:3x100."),
    click.option("--seed", default=1, show_default=True),
    click.option("--epochs", default=200, show_default=True),
    click.option("--regime", type=click.Choice(["epoch", "poisson_dynamic"]),
                 default="epoch", show_default=True),
    click.option("--total-time", "-T", "total_time", default=100.0,
                 show_default=True, help="Horizon for the dynamic regime."),
    click.option("--dt", default=0.5, show_default=True,
                 help="Step size for the dynamic regime."),
    click.option("--eval-every", default=1, show_default=True),
    click.option("--hidden", default=16, show_default=True),
    click.option("--lr", default=0.01, show_default=True),
    click.option("--weight-decay", default=5e-4, show_default=True),
    click.option("--rate-mode", type=click.Choice(["uniform", "degree"]),
                 default="uniform", show_default=True),
    click.option("--renormalize-subgraph", is_flag=True, default=False,
                 help="Recompute degrees on each induced subgraph."),
    click.option("--fresh-clocks", is_flag=True, default=False,
                 help="Dynamic regime: redraw clocks each step instead of "
                      "renewal resampling."),
    click.option("--best-val", is_flag=True, default=False,
                 help="Report the best-validation row instead of the final one."),
    click.option("--timing", is_flag=True, default=False,
                 help="Record wall-clock ms per step (output is then not "
                      "byte-reproducible)."),
]


def _with_options(options):
    def wrap(fn):
        for option in reversed(options):
            fn = option(fn)
        return fn
    return wrap


def _config_from_flags(reg_cfg: RegularizerConfig, seed: int, epochs: int,
                       regime: str, total_time: float, dt: float,
                       eval_every: int, hidden: int, lr: float,
                       weight_decay: float, renormalize_subgraph: bool,
                       fresh_clocks: bool, best_val: bool,
                       timing: bool, lam: float) -> RunConfig:
    return RunConfig(
        reg=reg_cfg, regime=regime, epochs=epochs, total_time=total_time,
        dt=dt, lam=lam, eval_every=eval_every, seed=seed, hidden=hidden,
        lr=lr, weight_decay=weight_decay,
        renormalize_subgraph=renormalize_subgraph,
        clock_persistence=not fresh_clocks, best_val=best_val,
        deterministic_output=not timing,
    ).validate()


# ---------------------------------------------------------------- commands

@click.group()
def cli():
    """Stochastic-clock training engine for graph node classification."""


@cli.command("train")
@_with_options(_shared_train_options)
@click.option("--reg", type=click.Choice(KINDS), default="none", show_default=True)
@click.option("--p", default=0.5, show_default=True,
              help="Drop probability for the baseline regularizers.")
@click.option("--lambda", "lam", default=1.0, show_default=True,
              help="Clock intensity.")
@click.option("--tcut", default=1.0, show_default=True,
              help="Ring-time cutoff for clock-based selection.")
@click.option("--out", type=click.Path(), default="run_out", show_default=True)
def cmd_train(data, synthetic, seed, epochs, regime, total_time, dt,
              eval_every, hidden, lr, weight_decay, rate_mode,
              renormalize_subgraph, fresh_clocks, best_val, timing,
              reg, p, lam, tcut, out):
    """Train one model and write run.csv plus its manifest."""
    bundle, entries = _resolve_source(data, synthetic)
    reg_cfg = _reg_from_flags(reg, p, lam, tcut, rate_mode)
    cfg = _config_from_flags(reg_cfg, seed, epochs, regime, total_time, dt,
                             eval_every, hidden, lr, weight_decay,
                             renormalize_subgraph, fresh_clocks, best_val,
                             timing, lam)
    result = train(bundle.graph, cfg)

    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "run.csv").write_text(result.record.to_csv(), encoding="utf-8")
    entries.update(cfg.to_manifest())
    entries["command"] = "train"
    _write_manifest(out_dir, entries)

    row = result.record.best_val_row() if cfg.best_val else result.record.final
    click.echo(
        f"{bundle.name} reg={reg} seed={seed}: "
        f"val={row.val_acc:.4f} test={row.test_acc:.4f} "
        f"({len(result.record.rows)} rows, {result.record.skipped_steps} skipped)"
    )
    click.echo(f"wrote {out_dir / 'run.csv'} and {out_dir / MANIFEST_NAME}")


@cli.command("reproduce")
@click.option("--manifest", type=click.Path(exists=False), required=True)
@click.option("--out", type=click.Path(), required=True)
def cmd_reproduce(manifest, out):
    """Re-run a training manifest; output must match byte for byte."""
    entries = read_manifest(manifest)
    if entries.get("command") != "train":
        raise ConfigError("only train manifests can be reproduced")
    bundle = _bundle_from_entries(entries)
    cfg = RunConfig.from_manifest(entries)
    result = train(bundle.graph, cfg)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "run.csv").write_text(result.record.to_csv(), encoding="utf-8")
    _write_manifest(out_dir, entries)
    click.echo(f"reproduced into {out_dir}")


@cli.command("compare")
@_with_options(_shared_train_options)
@click.option("--p", default=0.5, show_default=True)
@click.option("--lambda", "lam", default=1.0, show_default=True)
@click.option("--tcut", default=0.7, show_default=True)
@click.option("--seeds", default="1,2,3,4,5", show_default=True)
@click.option("--out", type=click.Path(), default="compare_out", show_default=True)
def cmd_compare(data, synthetic, seed, epochs, regime, total_time, dt,
                eval_every, hidden, lr, weight_decay, rate_mode,
                renormalize_subgraph, fresh_clocks, best_val, timing,
                p, lam, tcut, seeds, out):
    """Run all four regularizers over a seed list and tabulate accuracy."""
    bundle, entries = _resolve_source(data, synthetic)
    seed_list = _parse_seeds(seeds)
    jobs = []
    for method in COMPARE_METHODS:
        reg_cfg = _reg_from_flags(method, p, lam, tcut, rate_mode)
        for s in seed_list:
            cfg = _config_from_flags(reg_cfg, s, epochs, regime, total_time,
                                     dt, eval_every, hidden, lr, weight_decay,
                                     renormalize_subgraph, fresh_clocks,
                                     best_val, timing, lam)
            jobs.append((entries, cfg, method))
    results = _fan_out(jobs)

    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = ["method,val_mean,val_std,test_mean,test_std"]
    click.echo(f"{'method':<10} {'val':>15} {'test':>15}   (n={len(seed_list)})")
    for method in COMPARE_METHODS:
        vals = np.array(sorted(r["val"] for r in results if r["tag"] == method))
        tests = np.array(sorted(r["test"] for r in results if r["tag"] == method))
        lines.append(",".join([
            method, repr(float(vals.mean())), repr(float(vals.std())),
            repr(float(tests.mean())), repr(float(tests.std()))]))
        click.echo(f"{method:<10} {vals.mean():.4f}±{vals.std():.4f} "
                   f"{tests.mean():.4f}±{tests.std():.4f}")
    (out_dir / "compare.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    entries.update(RunConfig(reg=RegularizerConfig(kind="sgnn", p=p, lam=lam, t_cut=tcut,
                                                   rate_mode=rate_mode),
                             regime=regime, epochs=epochs, total_time=total_time,
                             dt=dt, lam=lam, eval_every=eval_every, seed=seed_list[0],
                             hidden=hidden, lr=lr, weight_decay=weight_decay,
                             renormalize_subgraph=renormalize_subgraph,
                             clock_persistence=not fresh_clocks, best_val=best_val,
                             deterministic_output=not timing).to_manifest())
    entries["command"] = "compare"
    entries["seeds"] = ",".join(str(s) for s in seed_list)
    entries["methods"] = ",".join(COMPARE_METHODS)
    _write_manifest(out_dir, entries)
    click.echo(f"wrote {out_dir / 'compare.csv'}")


@cli.command("sweep")
@_with_options(_shared_train_options)
@click.option("--reg", type=click.Choice(KINDS), default="sgnn", show_default=True)
@click.option("--p", default=0.5, show_default=True)
@click.option("--lambda", "lam", default=1.0, show_default=True)
@click.option("--tcut", default=1.0, show_default=True)
@click.option("--grid", multiple=True, metavar="KEY=V1,V2 ...",
              help="Grid assignments over lambda, tcut, p; space-separated "
                   "assignments may share one --grid value.")
@click.option("--seeds", default="1,2,3,4,5", show_default=True)
@click.option("--out", type=click.Path(), default="sweep_out", show_default=True)
def cmd_sweep(data, synthetic, seed, epochs, regime, total_time, dt,
              eval_every, hidden, lr, weight_decay, rate_mode,
              renormalize_subgraph, fresh_clocks, best_val, timing,
              reg, p, lam, tcut, grid, seeds, out):
    """Grid-search regularizer parameters; one CSV row per point and seed."""
    bundle, entries = _resolve_source(data, synthetic)
    seed_list = _parse_seeds(seeds)
    axes: dict[str, list[float]] = {}
    for chunk in grid:
        for token in chunk.split():
            key, sep, values = token.partition("=")
            if not sep or key not in _GRID_KEYS:
                raise ConfigError(
                    f"grid token {token!r} is not one of "
                    f"{'/'.join(_GRID_KEYS)}=v1,v2,...")
            try:
                axes[key] = [float(v) for v in values.split(",") if v]
            except ValueError as exc:
                raise ConfigError(f"bad grid values in {token!r}") from exc
            if not axes[key]:
                raise ConfigError(f"grid axis {key!r} has no values")
    if not axes:
        raise ConfigError("empty grid: pass at least one --grid KEY=V1,V2")

    keys = sorted(axes)
    points = list(itertools.product(*(axes[k] for k in keys)))
    jobs = []
    for point in points:
        overrides = dict(zip(keys, point))
        reg_cfg = RegularizerConfig(
            kind=reg,
            p=overrides.get("p", p),
            lam=overrides.get("lambda", lam),
            t_cut=overrides.get("tcut", tcut),
            rate_mode=rate_mode,
        ).validate()
        for s in seed_list:
            cfg = _config_from_flags(reg_cfg, s, epochs, regime, total_time,
                                     dt, eval_every, hidden, lr, weight_decay,
                                     renormalize_subgraph, fresh_clocks,
                                     best_val, timing,
                                     overrides.get("lambda", lam))
            jobs.append((entries, cfg, point))
    results = _fan_out(jobs)

    rows = sorted(results, key=lambda r: (r["tag"], r["seed"]))
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    header = ",".join([*keys, "seed", "val_acc", "test_acc", "mean_active_frac"])
    lines = [header]
    for r in rows:
        cells = [repr(v) for v in r["tag"]] + [
            str(r["seed"]), repr(r["val"]), repr(r["test"]), repr(r["active"])]
        lines.append(",".join(cells))
    (out_dir / "sweep.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    by_point: dict[tuple, list[dict]] = {}
    for r in results:
        by_point.setdefault(r["tag"], []).append(r)
    best_point, best_stats = max(
        ((point, group) for point, group in sorted(by_point.items())),
        key=lambda item: np.mean([g["val"] for g in item[1]]),
    )
    summary = " ".join(f"{k}={v!r}" for k, v in zip(keys, best_point))
    best_val_mean = float(np.mean([g["val"] for g in best_stats]))
    best_test_mean = float(np.mean([g["test"] for g in best_stats]))
    click.echo(f"{len(rows)} rows over {len(points)} grid points x "
               f"{len(seed_list)} seeds")
    click.echo(f"best by val: {summary} "
               f"(val={best_val_mean:.4f}, test={best_test_mean:.4f})")
    (out_dir / "best.txt").write_text(
        f"{summary} val={best_val_mean!r} test={best_test_mean!r}\n",
        encoding="utf-8")
    base_cfg = _config_from_flags(
        RegularizerConfig(kind=reg, p=p, lam=lam, t_cut=tcut,
                          rate_mode=rate_mode),
        seed_list[0], epochs, regime, total_time, dt, eval_every, hidden, lr,
        weight_decay, renormalize_subgraph, fresh_clocks, best_val, timing, lam)
    entries.update(base_cfg.to_manifest())
    entries["command"] = "sweep"
    entries["seeds"] = ",".join(str(s) for s in seed_list)
    entries["grid"] = " ".join(f"{k}={','.join(repr(v) for v in axes[k])}"
                               for k in keys)
    _write_manifest(out_dir, entries)


@cli.command("bench-clocks")
@click.option("--sizes", default="10000,100000,1000000,10000000", show_default=True)
@click.option("--repeats", default=3, show_default=True)
@click.option("--lambda", "lam", default=1.0, show_default=True)
@click.option("--out", type=click.Path(), default=None)
def cmd_bench_clocks(sizes, repeats, lam, out):
    """Time the clock kernels across sizes and fit the scaling exponent."""
    size_list = [int(s) for s in sizes.replace(",", " ").split()]
    report = run_bench(size_list, lam=lam, repeats=repeats)
    for p in report.points:
        click.echo(f"N={p.size:>10}  {p.seconds * 1e3:10.3f} ms  "
                   f"{p.per_node_ns:8.2f} ns/node")
    click.echo(f"fitted scaling exponent: {report.exponent:.3f}")
    if out:
        Path(out).write_text(report.to_csv(), encoding="utf-8")
        click.echo(f"wrote {out}")


@cli.command("gen-sbm")
@click.option("--blocks", default=3, show_default=True)
@click.option("--per-block", default=100, show_default=True)
@click.option("--intra", default=0.1, show_default=True)
@click.option("--inter", default=0.005, show_default=True)
@click.option("--feature-dim", default=16, show_default=True)
@click.option("--noise", default=1.0, show_default=True)
@click.option("--seed", default=42, show_default=True)
@click.option("--out", type=click.Path(), required=True)
def cmd_gen_sbm(blocks, per_block, intra, inter, feature_dim, noise, seed, out):
    """Generate a synthetic block-model dataset file."""
    cfg = SBMConfig(blocks=blocks, per_block=per_block, intra=intra,
                    inter=inter, feature_dim=feature_dim, noise=noise,
                    seed=seed)
    bundle = generate_sbm(cfg)
    digest = save_dataset(bundle, out)
    g = bundle.graph
    click.echo(f"wrote {out}: {g.num_nodes} nodes, "
               f"{g.num_undirected_edges} edges, {g.num_classes} classes, "
               f"checksum {digest[:12]}...")


@cli.command("validate-data")
@click.option("--data", type=click.Path(), required=True)
def cmd_validate_data(data):
    """Load a dataset file, run every validation, and print its stats."""
    bundle = load_dataset(data)
    g = bundle.graph
    click.echo(f"{bundle.name}: {g.num_nodes} nodes, "
               f"{g.num_undirected_edges} undirected edges, "
               f"{g.num_classes} classes, feature_dim {g.feature_dim}")
    click.echo(f"splits: train={int(g.train_mask.sum())} "
               f"val={int(g.val_mask.sum())} test={int(g.test_mask.sum())}")
    if "num_edges_directed" in bundle.meta:
        click.echo(f"directed edge count at source: "
                   f"{bundle.meta['num_edges_directed']}")
    for note in bundle.warnings:
        click.echo(f"note: {note}")
    click.echo("ok")


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        return 1
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        return 1
    except (DataFormatError, GraphValidationError, FileNotFoundError) as exc:
        click.echo(f"data error: {exc}", err=True)
        return 2
    except NumericFault as exc:
        click.echo(f"numeric fault: {exc}", err=True)
        return 3


if __name__ == "__main__":
    sys.exit(main())
