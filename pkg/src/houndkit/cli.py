"""Command-line front end: synth, dataset, train, locate, eval, baseline.

Every stage reads only declared inputs, writes its versioned artifact plus
a run manifest (resolved config, seed, input/output content hashes, wall
time), and exits nonzero on failure: 2 for usage/config problems, 3 for a
format-version mismatch, 4 for a ``--strict`` hash mismatch, 5 for missing
input files.
"""

from __future__ import annotations

import json
import os
import sys
import time
from pathlib import Path

import click
import numpy as np

from . import dataset as ds_mod
from . import evalkit, locator, manifest, plot
from .errors import (
    ConfigError,
    FormatVersionError,
    HoundkitError,
    MissingInputError,
    StrictHashError,
)
from .nn import io as nn_io
from .nn import train as nn_train
from .presets import ExperimentConfig, get_preset, read_config_file
from .trace import load_trace, save_trace


def _default_threads() -> int:
    env = os.environ.get("HOUNDKIT_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"HOUNDKIT_THREADS must be an integer, got {env!r}") from None
    try:
        import psutil

        physical = psutil.cpu_count(logical=False)
    except Exception:
        physical = None
    return physical or os.cpu_count() or 1


def _thread_limit(threads: int | None):
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=threads or _default_threads())


def _resolve_config(preset: str, config_path: str | None,
                    opts: tuple[str, ...], **flags) -> ExperimentConfig:
    cfg = get_preset(preset)
    if config_path:
        if not Path(config_path).exists():
            raise MissingInputError(f"config file not found: {config_path}")
        cfg = cfg.with_overrides(read_config_file(config_path))
    pairs: dict[str, str] = {}
    for item in opts:
        if "=" not in item:
            raise ConfigError(f"--opt expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        pairs[key.strip()] = value.strip()
    if pairs:
        cfg = cfg.with_overrides(pairs)
    direct = {k: v for k, v in flags.items() if v is not None}
    if direct:
        cfg = cfg.with_overrides({k: str(v) for k, v in direct.items()})
    return cfg


def _common_options(fn):
    fn = click.option("--preset", "-p", default="desk-default", show_default=True,
                      help="Named parameter set.")(fn)
    fn = click.option("--config", "-c", "config_path", type=click.Path(), default=None,
                      help="Flat key=value config file applied over the preset.")(fn)
    fn = click.option("--opt", "-O", "opts", multiple=True, metavar="KEY=VALUE",
                      help="Single config override; repeatable.")(fn)
    fn = click.option("--threads", type=int, default=None,
                      help="Worker/BLAS thread cap (default: physical cores, "
                           "or HOUNDKIT_THREADS).")(fn)
    return fn


@click.group()
def cli():
    """Locate crypto-primitive executions in frequency-scaled power traces."""


@cli.command("synth")
@_common_options
@click.option("--out", "-o", required=True, type=click.Path(), help="Output trace base path.")
@click.option("--cps", type=int, default=None, help="Number of CP instances (0 = pure noise).")
@click.option("--seed", type=int, default=None)
@click.option("--noise-apps/--no-noise-apps", "noise_apps", default=None,
              help="Interleave general-purpose activity between CPs.")
@click.option("--dfs/--no-dfs", "dfs", default=None,
              help="Enable the frequency-scaling deformation.")
@click.option("--gap-min", type=int, default=None)
@click.option("--gap-max", type=int, default=None)
@click.option("--id", "trace_id", default=None, help="Trace identifier (default: output stem).")
def cmd_synth(preset, config_path, opts, threads, out, cps, seed, noise_apps, dfs,
              gap_min, gap_max, trace_id):
    """Generate a seeded trace with exact ground truth."""
    cfg = _resolve_config(
        preset, config_path, opts,
        n_cps=cps, seed=seed, interleave_noise=noise_apps, dfs_enabled=dfs,
        gap_min=gap_min, gap_max=gap_max,
    )
    from .synth import compose_trace

    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    with _thread_limit(threads):
        trace, gt = compose_trace(cfg.synth_config(), cfg.template(),
                                  trace_id=trace_id or out.stem)
        paths = save_trace(trace, out, gt)
    manifest.write_manifest(out, "synth", cfg.as_flat_dict(), cfg.seed,
                            inputs=[], outputs=paths,
                            timings={"wall_s": time.perf_counter() - t0})
    click.echo(f"synth: {len(trace)} samples, {len(gt)} CPs -> {paths[0]}")


@cli.command("dataset")
@_common_options
@click.option("--cipher", "ciphers", multiple=True, required=True, type=click.Path(),
              help="Cipher trace base (repeatable); sidecar must carry ground truth.")
@click.option("--noise", "noise_base", required=True, type=click.Path(),
              help="Noise trace base.")
@click.option("--out", "-o", required=True, type=click.Path())
@click.option("--seed", type=int, default=None)
@click.option("--window", "window_n", type=int, default=None, help="Window size in samples.")
@click.option("--strict", is_flag=True, help="Verify input hashes against producer manifests.")
def cmd_dataset(preset, config_path, opts, threads, ciphers, noise_base, out, seed,
                window_n, strict):
    """Build the balanced three-class window dataset."""
    cfg = _resolve_config(preset, config_path, opts, seed=seed, n=window_n)
    input_paths = []
    for base in list(ciphers) + [noise_base]:
        stem = Path(base).with_suffix("") if Path(base).suffix in (".f32", ".json") else Path(base)
        input_paths += [stem.with_suffix(".f32"), stem.with_suffix(".json")]
    for p in input_paths:
        if not p.exists():
            raise MissingInputError(f"missing input: {p}")
    if strict:
        manifest.verify_strict(input_paths)
    t0 = time.perf_counter()
    with _thread_limit(threads):
        cipher_pairs = []
        for base in ciphers:
            trace, gt = load_trace(base)
            if gt is None or len(gt) == 0:
                raise FormatVersionError(f"{base}: cipher trace sidecar lacks ground truth")
            cipher_pairs.append((trace, gt))
        noise_trace, _ = load_trace(noise_base)
        rng = np.random.default_rng(cfg.seed)
        dataset = ds_mod.build_dataset(cipher_pairs, noise_trace, cfg.n, rng)
        paths = ds_mod.save_dataset(dataset, out)
    manifest.write_manifest(out, "dataset", cfg.as_flat_dict(), cfg.seed,
                            inputs=input_paths, outputs=paths,
                            timings={"wall_s": time.perf_counter() - t0})
    counts = dataset.class_counts()
    click.echo(
        f"dataset: {len(dataset)} windows of {cfg.n} "
        f"(start/spare/noise = {counts[0]}/{counts[1]}/{counts[2]}) -> {paths[0]}"
    )


@cli.command("train")
@_common_options
@click.option("--dataset", "dataset_base", required=True, type=click.Path())
@click.option("--out", "-o", required=True, type=click.Path())
@click.option("--seed", type=int, default=None)
@click.option("--epochs", type=int, default=None)
@click.option("--batch-size", type=int, default=None)
@click.option("--lr", "lr_max", type=float, default=None)
@click.option("--dropout", "dropout_p", type=float, default=None)
@click.option("--strict", is_flag=True)
def cmd_train(preset, config_path, opts, threads, dataset_base, out, seed, epochs,
              batch_size, lr_max, dropout_p, strict):
    """Train the window classifier and keep the best-validation checkpoint."""
    cfg = _resolve_config(preset, config_path, opts, seed=seed, epochs=epochs,
                          batch_size=batch_size, lr_max=lr_max, dropout_p=dropout_p)
    stem = Path(dataset_base).with_suffix("") if Path(dataset_base).suffix == ".json" else Path(dataset_base)
    input_paths = [stem.with_suffix(".json"),
                   stem.parent / (stem.name + ".windows.f32"),
                   stem.parent / (stem.name + ".labels.u8")]
    for p in input_paths:
        if not p.exists():
            raise MissingInputError(f"missing input: {p}")
    if strict:
        manifest.verify_strict(input_paths)
    dataset = ds_mod.load_dataset(dataset_base)
    if dataset.n != cfg.n:
        raise ConfigError(f"dataset window size {dataset.n} != configured n {cfg.n}")
    dataset_hash = manifest.hash_files(input_paths)
    t0 = time.perf_counter()
    with _thread_limit(threads):
        model, metrics = nn_train.train(dataset, cfg.model_config(), cfg.train_config())
    wall = time.perf_counter() - t0
    best = min(metrics, key=lambda m: (m.val_loss, m.epoch))
    provenance = {
        "seed": cfg.seed,
        "preset": cfg.preset,
        "dataset_hash": dataset_hash,
        "epochs": cfg.epochs,
        "best_epoch": best.epoch,
        "best_val_loss": best.val_loss,
        "best_val_accuracy": best.val_accuracy,
    }
    paths = nn_io.save_model(model, out, provenance)
    metrics_path = Path(out).with_suffix("") if Path(out).suffix in (".json", ".f32") else Path(out)
    metrics_path = metrics_path.parent / (metrics_path.name + ".metrics.json")
    metrics_path.write_text(json.dumps(
        [m.__dict__ for m in metrics], indent=2, sort_keys=True) + "\n")
    manifest.write_manifest(out, "train", cfg.as_flat_dict(), cfg.seed,
                            inputs=input_paths, outputs=list(paths) + [metrics_path],
                            timings={"wall_s": wall})
    click.echo(
        f"train: best epoch {best.epoch} val_loss {best.val_loss:.4f} "
        f"val_acc {best.val_accuracy:.4f} ({wall:.1f}s) -> {paths[0]}"
    )


def _load_model_checked(model_base):
    return nn_io.load_model(model_base)


@cli.command("locate")
@_common_options
@click.option("--model", "model_base", required=True, type=click.Path())
@click.option("--trace", "trace_base", required=True, type=click.Path())
@click.option("--out", "-o", required=True, type=click.Path())
@click.option("--stride", type=int, default=None)
@click.option("--k0", type=int, default=None)
@click.option("--avg-cp", "avg_cp", type=int, default=None)
@click.option("--csv", "csv_path", type=click.Path(), default=None,
              help="Also export the segmentation track as CSV.")
@click.option("--svg", "svg_path", type=click.Path(), default=None,
              help="Also render the trace with located starts as SVG.")
@click.option("--strict", is_flag=True)
def cmd_locate(preset, config_path, opts, threads, model_base, trace_base, out,
               stride, k0, avg_cp, csv_path, svg_path, strict):
    """Sliding-window classification plus screening on an unseen trace."""
    cfg = _resolve_config(preset, config_path, opts, stride=stride, k0=k0, avg_cp=avg_cp)
    model_stem = Path(model_base).with_suffix("") if Path(model_base).suffix in (".json", ".f32") else Path(model_base)
    trace_stem = Path(trace_base).with_suffix("") if Path(trace_base).suffix in (".json", ".f32") else Path(trace_base)
    input_paths = [model_stem.with_suffix(".json"), model_stem.with_suffix(".f32"),
                   trace_stem.with_suffix(".f32"), trace_stem.with_suffix(".json")]
    for p in input_paths:
        if not p.exists():
            raise MissingInputError(f"missing input: {p}")
    if strict:
        manifest.verify_strict(input_paths)
    t0 = time.perf_counter()
    with _thread_limit(threads):
        model, model_manifest = _load_model_checked(model_base)
        trace, gt = load_trace(trace_base)
        n = model.cfg.input_len
        track = locator.classify_track(model, trace, n, cfg.stride)
        locations = locator.screen(track, cfg.screen_config())
        out_paths = [locator.save_locations(locations, out, trace.id, n, cfg.stride)]
        if csv_path:
            out_paths.append(locator.save_track_csv(track, csv_path))
        if svg_path:
            out_paths.append(plot.render_locate_svg(trace, gt, locations, svg_path))
    manifest.write_manifest(out, "locate", cfg.as_flat_dict(), cfg.seed,
                            inputs=input_paths, outputs=out_paths,
                            timings={"wall_s": time.perf_counter() - t0})
    click.echo(f"locate: {len(locations)} starts -> {out_paths[0]}")


@cli.command("eval")
@_common_options
@click.option("--locations", "loc_base", required=True, type=click.Path())
@click.option("--trace", "trace_base", required=True, type=click.Path(),
              help="Trace base; the sidecar must carry ground truth.")
@click.option("--out", "-o", required=True, type=click.Path())
@click.option("--tolerance", type=float, default=None,
              help="Match tolerance in samples (default: avg_cp / 2).")
@click.option("--svg", "svg_path", type=click.Path(), default=None)
@click.option("--strict", is_flag=True)
def cmd_eval(preset, config_path, opts, threads, loc_base, trace_base, out,
             tolerance, svg_path, strict):
    """Score located starts against ground truth (hits + IoU)."""
    cfg = _resolve_config(preset, config_path, opts, tolerance=tolerance)
    loc_stem = Path(loc_base).with_suffix("") if Path(loc_base).suffix == ".json" else Path(loc_base)
    trace_stem = Path(trace_base).with_suffix("") if Path(trace_base).suffix in (".json", ".f32") else Path(trace_base)
    input_paths = [loc_stem.with_suffix(".json"),
                   trace_stem.with_suffix(".f32"), trace_stem.with_suffix(".json")]
    for p in input_paths:
        if not p.exists():
            raise MissingInputError(f"missing input: {p}")
    if strict:
        manifest.verify_strict(input_paths)
    t0 = time.perf_counter()
    locations, loc_meta = locator.load_locations(loc_base)
    trace, gt = load_trace(trace_base)
    if gt is None or len(gt) == 0:
        raise MissingInputError(f"{trace_base}: sidecar carries no ground truth to score against")
    tol = cfg.score_tolerance()
    hits, iou_report = evalkit.score_locations(locations, gt, tolerance=tol)
    matched = evalkit.match_locations(locations, gt, tol)
    out = Path(out)
    base = out.with_suffix("") if out.suffix == ".json" else out
    json_path = evalkit.save_report_json(
        hits, iou_report, base.with_suffix(".json"),
        extra={"trace_id": trace.id, "locations": loc_meta.get("starts", [])},
    )
    csv_path = evalkit.save_report_csv(gt, locations, matched, iou_report,
                                       base.parent / (base.name + ".csv"))
    out_paths = [json_path, csv_path]
    if svg_path:
        out_paths.append(plot.render_locate_svg(trace, gt, locations, svg_path))
    manifest.write_manifest(base, "eval", cfg.as_flat_dict(), cfg.seed,
                            inputs=input_paths, outputs=out_paths,
                            timings={"wall_s": time.perf_counter() - t0})
    click.echo(json.dumps({
        "hits": {"detection_ratio": hits.detection_ratio,
                 "matched_rate": hits.matched_rate,
                 "tolerance": hits.tolerance},
        "iou": {"mean": iou_report.mean, "std": iou_report.std},
    }, indent=2, sort_keys=True))


@cli.command("baseline")
@_common_options
@click.option("--trace", "trace_base", required=True, type=click.Path())
@click.option("--out", "-o", required=True, type=click.Path())
@click.option("--quantile", type=float, default=None,
              help="Correlation threshold quantile.")
@click.option("--strict", is_flag=True)
def cmd_baseline(preset, config_path, opts, threads, trace_base, out, quantile, strict):
    """Matched-filter locator using the preset's clean CP template."""
    cfg = _resolve_config(preset, config_path, opts, mf_quantile=quantile)
    trace_stem = Path(trace_base).with_suffix("") if Path(trace_base).suffix in (".json", ".f32") else Path(trace_base)
    input_paths = [trace_stem.with_suffix(".f32"), trace_stem.with_suffix(".json")]
    for p in input_paths:
        if not p.exists():
            raise MissingInputError(f"missing input: {p}")
    if strict:
        manifest.verify_strict(input_paths)
    t0 = time.perf_counter()
    with _thread_limit(threads):
        trace, _ = load_trace(trace_base)
        locations = evalkit.matched_filter_locate(trace, cfg.template(),
                                                  threshold_quantile=cfg.mf_quantile)
        out_path = locator.save_locations(locations, out, trace.id,
                                          n=len(cfg.template()), s=1)
    manifest.write_manifest(out, "baseline", cfg.as_flat_dict(), cfg.seed,
                            inputs=input_paths, outputs=[out_path],
                            timings={"wall_s": time.perf_counter() - t0})
    click.echo(f"baseline: {len(locations)} starts -> {out_path}")


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.UsageError as exc:
        exc.show(file=sys.stderr)
        return 2
    except click.Abort:
        return 130
    except click.ClickException as exc:
        exc.show(file=sys.stderr)
        return exc.exit_code
    except ConfigError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    except FormatVersionError as exc:
        click.echo(f"error: {exc}", err=True)
        return 3
    except StrictHashError as exc:
        click.echo(f"error: {exc}", err=True)
        return 4
    except MissingInputError as exc:
        click.echo(f"error: {exc}", err=True)
        return 5
    except HoundkitError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1


if __name__ == "__main__":
    sys.exit(main())
