"""
Command implementations behind the command line: training, evaluation,
sampling, pattern completion, classification probes and the pixel-space
mixture baseline. Every command reads a validated RunConfig and writes only
under the resolved output directory.
"""

# Python libraries
import csv
import hashlib
import json
import logging
import math
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import List

# Numeric libraries
import numpy as np
from tqdm import tqdm

# Local libraries
from .checkpoint import load_checkpoint, load_gmm, save_checkpoint, save_gmm
from .config import ConfigError
from .constants import LOG_PX_STDERR_BASIS, OUTPUT_DIR_ENV, TRAIN_CSV, TRAIN_CSV_HEADER
from .dataio import build_mask, load_dataset, minibatch_iterator, read_pgm, split_train_val, write_pgm_grid
from .evaluation import (
    MetricReport,
    bce,
    classification_error,
    gmm_baseline_log_px,
    masked_mse,
    maxent_fit,
    maxent_predict,
    mean_fill_completion,
    monte_carlo_log_px,
    sparsity_levels,
    write_metric_report,
)
from .gmm import fit_em, sample as gmm_sample
from .model import ancestral_decode, apply_updates, complete_pattern, init_params, settle_parallel

log = logging.getLogger(__name__)


class TrainingDivergedError(RuntimeError):
    pass


@dataclass
class SettledData:
    reconstruction: np.ndarray  # D x S Bernoulli means
    latents: List[np.ndarray]   # layers 1..L, each J_l x S


# Output directory: config first, then the environment.
def resolve_output_dir(config):
    out = config.output_dir or os.environ.get(OUTPUT_DIR_ENV)
    if not out:
        raise ConfigError(f"No output directory: set output_dir in the config or ${OUTPUT_DIR_ENV}.")
    return Path(out)

def default_checkpoint_dir(config):
    return resolve_output_dir(config) / "checkpoint"

def config_hash(config):
    text = json.dumps(config.to_dict(), sort_keys=True)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]

def _sidecar(config, **extra):
    return {"config_hash": config_hash(config), "seed": config.seed, "n_samples": config.eval.mc_samples, **extra}

# Load the train or test split named in the data config.
def load_split(config, which, n_classes=None, need_labels=False):
    data = config.data
    images = getattr(data, f"{which}_images")
    labels = getattr(data, f"{which}_labels")
    if images is None:
        raise ConfigError(f"data.{which}_images is not set.")
    split = load_dataset(images, labels, threshold=data.threshold, inclusive=data.inclusive,
                         limit=getattr(data, f"{which}_limit"), n_classes=n_classes)
    if need_labels and split.Y is None:
        raise ConfigError(f"Labels missing for the {which} split (data.{which}_labels).")
    return split

# Settle a whole design matrix in mini-batches, keeping means and latents.
def settle_dataset(params, X, batch_size, threads=1):
    recon, latents = [], [[] for _ in range(params.L)]
    for start in range(0, X.shape[1], batch_size):
        state = settle_parallel(params, X[:, start:start + batch_size], threads=threads)
        recon.append(state.mu[0])
        for ell in range(1, params.L + 1):
            latents[ell - 1].append(state.z[ell])
    return SettledData(
        reconstruction=np.concatenate(recon, axis=1),
        latents=[np.concatenate(z, axis=1) for z in latents],
    )

def _progress(iterable, total, desc, quiet):
    return tqdm(iterable, total=total, desc=desc, leave=False,
                disable=quiet or not sys.stderr.isatty())


# ---------------------------------------------------------------------
#                         Commands
# ---------------------------------------------------------------------

# Settle-then-update over mini-batches for every epoch, then fit the prior.
def cmd_train(config, checkpoint_dir=None, quiet=False):
    config.validate()
    out = resolve_output_dir(config)
    out.mkdir(parents=True, exist_ok=True)
    checkpoint_dir = Path(checkpoint_dir) if checkpoint_dir else default_checkpoint_dir(config)
    opt = config.optimizer
    full = load_split(config, "train")
    train, val = split_train_val(full, config.data.n_val, config.seed)
    params = init_params(config.model)
    csv_path = out / TRAIN_CSV
    with open(csv_path, "w", newline="") as f:
        csv.writer(f).writerow(TRAIN_CSV_HEADER)
    if val.n_records:
        init_val = bce(val.X, settle_dataset(params, val.X, opt.batch_size, config.threads).reconstruction)
        log.info("Initial validation BCE: %.4f nats", init_val)
    n_batches = math.ceil(train.n_records / opt.batch_size)
    for epoch in range(1, opt.epochs + 1):
        start = time.perf_counter()
        total = 0.0
        batches = minibatch_iterator(train, opt.batch_size, config.seed, epoch)
        for idx, Xb in _progress(batches, n_batches, f"epoch {epoch}", quiet):
            state = settle_parallel(params, Xb, threads=config.threads)
            batch_bce = bce(Xb, state.mu[0], params.config.p_eps)
            if not np.isfinite(batch_bce):
                raise TrainingDivergedError(f"Non-finite training BCE at epoch {epoch}.")
            total += batch_bce * idx.size
            apply_updates(params, state, opt.eta_w, opt.precision_rate)
        train_bce = total / train.n_records
        val_bce = float("nan")
        if val.n_records:
            val_bce = bce(val.X, settle_dataset(params, val.X, opt.batch_size, config.threads).reconstruction)
            if not np.isfinite(val_bce):
                raise TrainingDivergedError(f"Non-finite validation BCE at epoch {epoch}.")
        wall = time.perf_counter() - start
        with open(csv_path, "a", newline="") as f:
            csv.writer(f).writerow([epoch, f"{train_bce:.6f}", "" if not val.n_records else f"{val_bce:.6f}", f"{wall:.3f}"])
        log.info("Epoch %d: train BCE %.4f, val BCE %.4f (%.1fs)", epoch, train_bce, val_bce, wall)
    save_checkpoint(checkpoint_dir, params, epoch=opt.epochs)
    codes = settle_dataset(params, train.X, opt.batch_size, config.threads).latents[-1]
    gmm = fit_em(codes, config.gmm.n_components, config.gmm.em_iters, config.gmm.tol,
                 seed=config.seed, covariance=config.gmm.covariance)
    save_gmm(checkpoint_dir, gmm)
    log.info("Fit a %d-component prior on %d training codes.", gmm.n_components, codes.shape[1])
    return {"checkpoint": str(checkpoint_dir), "metrics": str(csv_path)}

# Test BCE, Monte-Carlo log p(x) and latent sparsity.
def cmd_eval(config, checkpoint_dir=None):
    out = resolve_output_dir(config)
    checkpoint_dir = Path(checkpoint_dir) if checkpoint_dir else default_checkpoint_dir(config)
    params, _ = load_checkpoint(checkpoint_dir)
    gmm = load_gmm(checkpoint_dir)
    test = load_split(config, "test")
    settled = settle_dataset(params, test.X, config.optimizer.batch_size, config.threads)
    estimate = monte_carlo_log_px(params, gmm, test.X, config.eval.mc_samples, config.seed)
    report = MetricReport(
        bce=bce(test.X, settled.reconstruction, params.config.p_eps),
        log_px=estimate.mean,
        log_px_stderr=estimate.stderr,
        sparsity=sparsity_levels(settled.latents, config.eval.sparsity_eps),
    )
    write_metric_report(report, out, "eval", _sidecar(config, log_px_stderr_basis=LOG_PX_STDERR_BASIS))
    return report

# Sample the prior, decode ancestrally and tile the Bernoulli means.
def cmd_sample(config, checkpoint_dir=None, n=None, grid=None):
    out = resolve_output_dir(config)
    checkpoint_dir = Path(checkpoint_dir) if checkpoint_dir else default_checkpoint_dir(config)
    params, _ = load_checkpoint(checkpoint_dir)
    gmm = load_gmm(checkpoint_dir)
    n = config.eval.n_samples if n is None else int(n)
    if grid is None:
        cols = min(n, config.eval.grid_cols)
        grid = (math.ceil(n / cols), cols)
    means = ancestral_decode(params, gmm_sample(gmm, n, config.seed))
    return write_pgm_grid(means, grid[0], grid[1], out / "samples.pgm")

# Complete masked test records; compare with filling in the mean image.
def cmd_complete(config, checkpoint_dir=None, mask_kind=None):
    out = resolve_output_dir(config)
    checkpoint_dir = Path(checkpoint_dir) if checkpoint_dir else default_checkpoint_dir(config)
    params, _ = load_checkpoint(checkpoint_dir)
    train = load_split(config, "train")
    test = load_split(config, "test")
    X = test.X
    kind = mask_kind or config.eval.mask_kind
    custom = None
    if kind == "custom":
        if not config.eval.mask_path:
            raise ConfigError("mask_kind \"custom\" needs eval.mask_path.")
        custom = (read_pgm(config.eval.mask_path) > 0).astype(np.float64).reshape(-1)
    mask = build_mask(kind, X.shape[0], X.shape[1], custom)
    batch = config.optimizer.batch_size
    completed = np.concatenate([
        complete_pattern(params, X[:, s:s + batch], mask.M[:, s:s + batch])
        for s in range(0, X.shape[1], batch)
    ], axis=1)
    mmse = masked_mse(X, completed, mask.M)
    baseline = masked_mse(X, mean_fill_completion(X, mask.M, train.X.mean(axis=1)), mask.M)
    rows, cols = config.eval.grid_rows, config.eval.grid_cols
    shown = min(X.shape[1], rows * cols)
    write_pgm_grid(np.where(mask.M[:, :shown] == 1, X[:, :shown], 0.0), rows, cols, out / "completion_input.pgm")
    write_pgm_grid(completed[:, :shown], rows, cols, out / "completion_output.pgm")
    write_metric_report(MetricReport(mmse=mmse), out, "complete",
                        _sidecar(config, mask_kind=mask.kind, baseline_mmse=baseline))
    return mmse, baseline

# Softmax probe on top-layer codes versus the same probe on raw pixels.
def cmd_classify(config, checkpoint_dir=None):
    out = resolve_output_dir(config)
    checkpoint_dir = Path(checkpoint_dir) if checkpoint_dir else default_checkpoint_dir(config)
    params, _ = load_checkpoint(checkpoint_dir)
    train = load_split(config, "train", need_labels=True)
    test = load_split(config, "test", n_classes=train.Y.shape[0], need_labels=True)
    batch = config.optimizer.batch_size
    ev = config.eval
    train_codes = settle_dataset(params, train.X, batch, config.threads).latents[-1]
    test_codes = settle_dataset(params, test.X, batch, config.threads).latents[-1]
    probe = maxent_fit(train_codes, train.Y, ev.maxent_epochs, ev.maxent_lr, config.seed, ev.maxent_batch)
    err = classification_error(test.Y, maxent_predict(probe, test_codes))
    pixel_probe = maxent_fit(train.X, train.Y, ev.maxent_epochs, ev.maxent_lr, config.seed, ev.maxent_batch)
    baseline = classification_error(test.Y, maxent_predict(pixel_probe, test.X))
    write_metric_report(MetricReport(err_pct=err), out, "classify", _sidecar(config, baseline_err_pct=baseline))
    return err, baseline

# Mixture fit directly on training pixels, scored with the same estimator.
def cmd_baseline(config):
    out = resolve_output_dir(config)
    train = load_split(config, "train")
    test = load_split(config, "test")
    g = config.gmm
    gmm = fit_em(train.X, g.pixel_components, g.em_iters, g.tol, seed=config.seed, covariance="diagonal")
    save_gmm(out / "pixel_gmm", gmm, name="pixel_gmm")
    estimate = gmm_baseline_log_px(gmm, test.X, config.eval.mc_samples, config.seed, config.model.p_eps)
    report = MetricReport(log_px=estimate.mean, log_px_stderr=estimate.stderr)
    write_metric_report(report, out, "baseline", _sidecar(config, log_px_stderr_basis=LOG_PX_STDERR_BASIS))
    return report
