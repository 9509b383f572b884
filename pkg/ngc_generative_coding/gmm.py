"""
Gaussian mixture model fit by expectation-maximization. Used as the sampling
prior over top-layer codes and, on raw pixels, as a standalone density
baseline. Data matrices hold one record per column (dim x N).
"""

# Python libraries
import logging
from dataclasses import dataclass

# Numeric libraries
import numpy as np
import scipy.linalg
from scipy.special import logsumexp

# Local libraries
from .constants import VAR_FLOOR

log = logging.getLogger(__name__)

COVARIANCE_TYPES = ("full", "diagonal")


@dataclass
class GmmParams:
    weights: np.ndarray      # (K,) on the simplex
    means: np.ndarray        # (K, dim)
    covariances: np.ndarray  # (K, dim, dim) when full, (K, dim) when diagonal
    covariance: str = "full"

    @property
    def n_components(self):
        return self.weights.shape[0]

    @property
    def dim(self):
        return self.means.shape[1]


# Per-component log N(x; mu_k, Sigma_k) for rows of X (N x dim) -> N x K.
def _component_log_pdf(gmm, X):
    N, dim = X.shape
    out = np.empty((N, gmm.n_components))
    const = dim * np.log(2.0 * np.pi)
    for k in range(gmm.n_components):
        diff = X - gmm.means[k]
        if gmm.covariance == "diagonal":
            var = gmm.covariances[k]
            out[:, k] = -0.5 * (const + np.sum(np.log(var)) + np.sum(diff ** 2 / var, axis=1))
        else:
            chol = scipy.linalg.cholesky(gmm.covariances[k], lower=True)
            soln = scipy.linalg.solve_triangular(chol, diff.T, lower=True)
            out[:, k] = -0.5 * (const + np.sum(soln ** 2, axis=0)) - np.sum(np.log(np.diag(chol)))
    return out

def _weighted_log_probs(gmm, X):
    with np.errstate(divide="ignore"):
        log_weights = np.log(gmm.weights)
    return _component_log_pdf(gmm, X) + log_weights

def _as_rows(gmm, v):
    v = np.asarray(v, dtype=np.float64)
    single = v.ndim == 1
    X = v.reshape(1, -1) if single else v.T
    if X.shape[1] != gmm.dim:
        raise ValueError(f"Expected vectors of dimension {gmm.dim}, got {X.shape[1]}.")
    return X, single

# log sum_k pi_k N(v; mu_k, Sigma_k); scalar for a vector, (n,) for dim x n.
def log_density(gmm, v):
    X, single = _as_rows(gmm, v)
    values = logsumexp(_weighted_log_probs(gmm, X), axis=1)
    return float(values[0]) if single else values

# Posterior component probabilities; (K,) for a vector, K x n for dim x n.
def responsibilities(gmm, v):
    X, single = _as_rows(gmm, v)
    log_probs = _weighted_log_probs(gmm, X)
    resp = np.exp(log_probs - logsumexp(log_probs, axis=1, keepdims=True))
    return resp[0] if single else resp.T

# Draw n codes (dim x n): a component from pi, then a Gaussian draw.
def sample(gmm, n, seed):
    rng = np.random.default_rng(seed)
    comps = rng.choice(gmm.n_components, size=n, p=gmm.weights)
    eps = rng.standard_normal((n, gmm.dim))
    if gmm.covariance == "diagonal":
        draws = gmm.means[comps] + np.sqrt(gmm.covariances[comps]) * eps
    else:
        chols = np.stack([scipy.linalg.cholesky(c, lower=True) for c in gmm.covariances])
        draws = gmm.means[comps] + np.einsum("nij,nj->ni", chols[comps], eps)
    return draws.T


# ---------------------------------------------------------------------
#                         Expectation-maximization
# ---------------------------------------------------------------------

# k-means++ seeding: each new center drawn with probability ~ squared distance.
def _kmeans_pp(X, K, rng):
    N = X.shape[0]
    centers = [X[rng.integers(N)]]
    d2 = np.sum((X - centers[0]) ** 2, axis=1)
    for _ in range(1, K):
        total = d2.sum()
        idx = rng.integers(N) if total <= 0 else rng.choice(N, p=d2 / total)
        centers.append(X[idx])
        d2 = np.minimum(d2, np.sum((X - X[idx]) ** 2, axis=1))
    return np.array(centers)

# Maximizer of the Gaussian term under the eigenvalue floor.
def _floor_covariance(S, var_floor):
    S = 0.5 * (S + S.T)
    eigvals, eigvecs = np.linalg.eigh(S)
    S = (eigvecs * np.maximum(eigvals, var_floor)) @ eigvecs.T
    return 0.5 * (S + S.T)

def _scatter(X, weights, mean, covariance, var_floor):
    diff = X - mean
    total = weights.sum()
    if covariance == "diagonal":
        return np.maximum(weights @ (diff ** 2) / total, var_floor)
    return _floor_covariance((diff * weights[:, None]).T @ diff / total, var_floor)

def _m_step(X, resp, covariance, var_floor, point_log_density):
    N, dim = X.shape
    K = resp.shape[1]
    counts = resp.sum(axis=0)
    means = np.empty((K, dim))
    covs = np.empty((K, dim) if covariance == "diagonal" else (K, dim, dim))
    empty = counts < 10.0 * np.finfo(np.float64).eps * N
    for k in np.flatnonzero(~empty):
        means[k] = resp[:, k] @ X / counts[k]
        covs[k] = _scatter(X, resp[:, k], means[k], covariance, var_floor)
    if empty.any():
        # Re-seed empty components from the worst-explained data points.
        order = np.argsort(point_log_density)
        global_cov = _scatter(X, np.ones(N), X.mean(axis=0), covariance, var_floor)
        for i, k in enumerate(np.flatnonzero(empty)):
            idx = order[i % N]
            log.warning("Mixture component %d lost all responsibility; re-seeding at record %d.", k, idx)
            means[k] = X[idx]
            covs[k] = global_cov
            counts[k] = 1.0
    return GmmParams(weights=counts / counts.sum(), means=means, covariances=covs, covariance=covariance)

# Fit a K-component mixture to dim x N data. The log-likelihood of every
#  iteration is appended to `history` when given.
def fit_em(data, n_components, max_iters=100, tol=1e-4, seed=0, covariance="full",
           var_floor=VAR_FLOOR, history=None):
    if covariance not in COVARIANCE_TYPES:
        raise ValueError(f"covariance must be one of {COVARIANCE_TYPES}, got {covariance!r}.")
    X = np.asarray(data, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    X = X.T
    N, dim = X.shape
    K = int(n_components)
    if K < 1 or N < K:
        raise ValueError(f"Need at least as many records ({N}) as mixture components ({K}).")
    rng = np.random.default_rng(seed)
    global_cov = _scatter(X, np.ones(N), X.mean(axis=0), covariance, var_floor)
    gmm = GmmParams(
        weights=np.full(K, 1.0 / K),
        means=_kmeans_pp(X, K, rng),
        covariances=np.stack([global_cov] * K),
        covariance=covariance,
    )
    previous = -np.inf
    for it in range(max_iters):
        log_probs = _weighted_log_probs(gmm, X)
        point_ll = logsumexp(log_probs, axis=1)
        ll = float(point_ll.sum())
        if history is not None:
            history.append(ll)
        log.debug("EM iteration %d: log-likelihood %.6f", it, ll)
        if it > 0 and ll - previous < tol:
            break
        previous = ll
        resp = np.exp(log_probs - point_ll[:, None])
        gmm = _m_step(X, resp, covariance, var_floor, point_ll)
    return gmm
