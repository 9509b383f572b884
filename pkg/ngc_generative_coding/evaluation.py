"""
Metrics and probes: reconstruction BCE, Monte-Carlo log p(x), masked MSE,
latent sparsity, and the maximum-entropy (softmax regression) classifier.
"""

# Python libraries
import csv
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Optional

# Numeric libraries
import numpy as np
from scipy.special import logsumexp, softmax

# Local libraries
from .constants import P_EPS, REPORT_CSV, REPORT_CSV_HEADER, REPORT_JSON, SPARSITY_EPS
from .gmm import sample as gmm_sample
from .model import ancestral_decode

log = logging.getLogger(__name__)


@dataclass
class MetricReport:
    bce: Optional[float] = None            # nats per record
    log_px: Optional[float] = None         # nats per record
    log_px_stderr: Optional[float] = None  # over test records, not over prior samples
    mmse: Optional[float] = None
    err_pct: Optional[float] = None
    sparsity: List[float] = field(default_factory=list)

    def check(self):
        for name in ("bce", "log_px", "log_px_stderr", "mmse", "err_pct"):
            value = getattr(self, name)
            if value is not None and not np.isfinite(value):
                raise FloatingPointError(f"Metric {name} is not finite ({value}).")
        if self.err_pct is not None and not 0.0 <= self.err_pct <= 100.0:
            raise ValueError(f"err_pct out of range: {self.err_pct}")
        if any(not 0.0 <= rho <= 1.0 for rho in self.sparsity):
            raise ValueError(f"sparsity out of range: {self.sparsity}")
        return self


@dataclass
class LogPxEstimate:
    mean: float
    stderr: float  # std of per-record log p(x) over sqrt(S); excludes Monte-Carlo error
    per_record: np.ndarray


@dataclass
class MaxentParams:
    weights: np.ndarray  # C x J
    bias: np.ndarray     # (C,)
    shift: np.ndarray    # (J,) feature standardization fit on the training codes
    scale: np.ndarray    # (J,)

    @property
    def n_classes(self):
        return self.weights.shape[0]


def _check_same_shape(*arrays):
    shapes = {np.shape(a) for a in arrays}
    if len(shapes) != 1:
        raise ValueError(f"Shape mismatch: {sorted(shapes)}")


# Negative Bernoulli log-likelihood, summed over dimensions, mean over records.
def bce(X, X_hat, p_eps=P_EPS):
    X = np.asarray(X, dtype=np.float64)
    X_hat = np.asarray(X_hat, dtype=np.float64)
    _check_same_shape(X, X_hat)
    if X.ndim == 1:
        X, X_hat = X.reshape(-1, 1), X_hat.reshape(-1, 1)
    X_hat = np.clip(X_hat, p_eps, 1.0 - p_eps)
    total = np.sum(X * np.log(X_hat) + (1.0 - X) * np.log(1.0 - X_hat))
    return float(-total / X.shape[1])

# log p(x) ~ logsumexp_n log p(x | mean_n) - log n for every record of X,
#  given Bernoulli mean vectors (D x n). Records are processed in chunks.
def bernoulli_mc_log_px(means, X, p_eps=P_EPS, chunk=512):
    means = np.clip(np.asarray(means, dtype=np.float64), p_eps, 1.0 - p_eps)
    X = np.asarray(X, dtype=np.float64)
    if means.shape[0] != X.shape[0]:
        raise ValueError(f"Means have {means.shape[0]} rows, data has {X.shape[0]}.")
    log_mu = np.log(means)
    log_one_minus = np.log(1.0 - means)
    n = means.shape[1]
    per_record = np.empty(X.shape[1])
    for start in range(0, X.shape[1], chunk):
        Xc = X[:, start:start + chunk]
        ll = Xc.T @ log_mu + (1.0 - Xc).T @ log_one_minus
        per_record[start:start + chunk] = logsumexp(ll, axis=1) - np.log(n)
    S = per_record.size
    stderr = float(np.std(per_record, ddof=1) / np.sqrt(S)) if S > 1 else 0.0
    return LogPxEstimate(mean=float(np.mean(per_record)), stderr=stderr, per_record=per_record)

# Prior-sampling estimate: draw codes from the mixture, decode once, score X.
def monte_carlo_log_px(params, gmm, X_test, n_samples, seed):
    means = ancestral_decode(params, gmm_sample(gmm, n_samples, seed))
    return bernoulli_mc_log_px(means, X_test, params.config.p_eps)

# Same estimator for a mixture fit directly on pixels (samples clipped to [0, 1]).
def gmm_baseline_log_px(gmm, X_test, n_samples, seed, p_eps=P_EPS):
    means = np.clip(gmm_sample(gmm, n_samples, seed), 0.0, 1.0)
    return bernoulli_mc_log_px(means, X_test, p_eps)

# Squared error over masked coordinates (M == 0), divided by the record count.
def masked_mse(X, X_hat, M):
    X = np.asarray(X, dtype=np.float64)
    X_hat = np.asarray(X_hat, dtype=np.float64)
    M = np.asarray(M)
    _check_same_shape(X, X_hat, M)
    if X.ndim == 1:
        X, X_hat, M = X.reshape(-1, 1), X_hat.reshape(-1, 1), M.reshape(-1, 1)
    sq = np.where(M == 0, (X_hat - X) ** 2, 0.0)
    return float(np.sum(sq) / X.shape[1])

# Baseline completion: masked coordinates take the mean training image.
def mean_fill_completion(X, M, mean_image):
    mean_image = np.asarray(mean_image, dtype=np.float64).reshape(-1, 1)
    return np.where(np.asarray(M) == 1, X, mean_image)

# Fraction of units with z > eps, one value per given layer.
def sparsity_levels(states, eps=SPARSITY_EPS):
    return [float(np.mean(np.asarray(z) > eps)) for z in states]


# ---------------------------------------------------------------------
#                         Maximum-entropy probe
# ---------------------------------------------------------------------

def _standardize(params, latents):
    return (np.asarray(latents, dtype=np.float64) - params.shift[:, None]) / params.scale[:, None]

# Class probabilities (C x N) for a set of codes.
def maxent_predict(params, latents):
    logits = params.weights @ _standardize(params, latents) + params.bias[:, None]
    return softmax(logits, axis=0)

# Softmax regression by mini-batch gradient descent on the cross-entropy.
def maxent_fit(latents, labels, epochs, lr, seed, batch_size=200):
    X = np.asarray(latents, dtype=np.float64)
    Y = np.asarray(labels, dtype=np.float64)
    if X.shape[1] != Y.shape[1]:
        raise ValueError(f"{X.shape[1]} codes but {Y.shape[1]} labels.")
    present = np.unique(np.argmax(Y, axis=0))
    if present.size < 2:
        raise ValueError("The maxent probe needs at least two distinct classes.")
    C, J = Y.shape[0], X.shape[0]
    scale = X.std(axis=1)
    params = MaxentParams(
        weights=np.zeros((C, J)),
        bias=np.zeros(C),
        shift=X.mean(axis=1),
        scale=np.where(scale > 0, scale, 1.0),
    )
    Xs = _standardize(params, X)
    rng = np.random.default_rng(seed)
    N = X.shape[1]
    for epoch in range(epochs):
        order = rng.permutation(N)
        for start in range(0, N, batch_size):
            idx = order[start:start + batch_size]
            Xb, Yb = Xs[:, idx], Y[:, idx]
            probs = softmax(params.weights @ Xb + params.bias[:, None], axis=0)
            grad = probs - Yb
            params.weights -= lr * (grad @ Xb.T) / idx.size
            params.bias -= lr * grad.mean(axis=1)
    if not (np.all(np.isfinite(params.weights)) and np.all(np.isfinite(params.bias))):
        raise FloatingPointError("Maxent probe diverged; lower maxent_lr.")
    return params

# 100 * (1 - accuracy); argmax ties go to the lowest index.
def classification_error(Y, Y_hat):
    Y = np.asarray(Y)
    Y_hat = np.asarray(Y_hat)
    _check_same_shape(Y, Y_hat)
    hits = np.argmax(Y, axis=0) == np.argmax(Y_hat, axis=0)
    return float(100.0 * (1.0 - np.mean(hits)))


# ---------------------------------------------------------------------
#                         Report files
# ---------------------------------------------------------------------

# Append one CSV row and rewrite the JSON sidecar for an evaluation.
def write_metric_report(report, out_dir, command, sidecar=None):
    report.check()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / REPORT_CSV
    new_file = not csv_path.exists()
    row = asdict(report)
    with open(csv_path, "a", newline="") as f:
        writer = csv.writer(f)
        if new_file:
            writer.writerow(REPORT_CSV_HEADER)
        writer.writerow([command] + [
            "" if row[name] is None else row[name] for name in REPORT_CSV_HEADER[1:-1]
        ] + [";".join(f"{rho:.6f}" for rho in report.sparsity)])
    json_path = out_dir / REPORT_JSON
    with open(json_path, "w") as f:
        json.dump({"command": command, "report": row, **(sidecar or {})}, f, indent=2, sort_keys=True)
    log.info("Wrote %s and %s.", csv_path, json_path)
    return csv_path, json_path
