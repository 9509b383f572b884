"""
The generative neural coding network (GNCN): construction, settling
inference, total discrepancy, local parameter updates, ancestral decoding
and pattern completion.

Every matrix holds one record per column. Layer 0 is the sensory layer
(Bernoulli means), layers 1..L are latent. Parameters are kept in dicts keyed
by layer index so that ``W[0]`` maps layer 1 activity down to layer 0,
``E[1]`` carries layer 0 errors up to layer 1, and ``P[l]``/``V[l]`` belong
to latent layer ``l``.
"""

# Python libraries
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional

# Numeric libraries
import numpy as np
import scipy.linalg

# Local libraries
from .activations import get_activation
from .config import ModelConfig
from .constants import COLUMN_NORM_GUARD

log = logging.getLogger(__name__)


class GradientUnavailableError(ValueError):
    pass


@dataclass
class GncnParams:
    config: ModelConfig
    W: Dict[int, np.ndarray]  # l = 0..L-1, shape J_l x J_{l+1}
    E: Dict[int, np.ndarray]  # l = 1..L,   shape J_l x J_{l-1}
    P: Dict[int, np.ndarray]  # l = 1..L-1, shape J_l x J_l
    V: Dict[int, np.ndarray]  # l = 1..L,   shape J_l x J_l (fixed)

    @property
    def L(self):
        return self.config.L

    def copy(self):
        return GncnParams(
            config=ModelConfig.from_dict(self.config.to_dict()),
            W={k: v.copy() for k, v in self.W.items()},
            E={k: v.copy() for k, v in self.E.items()},
            P={k: v.copy() for k, v in self.P.items()},
            V={k: v.copy() for k, v in self.V.items()},
        )


@dataclass
class InferenceState:
    z: List[np.ndarray]    # l = 0..L
    mu: List[np.ndarray]   # l = 0..L-1
    err: List[np.ndarray]  # l = 0..L-1, no error neurons at the top layer

    @property
    def batch_size(self):
        return self.z[0].shape[1]


@dataclass
class Gradients:
    W: Dict[int, np.ndarray]
    P: Dict[int, np.ndarray]
    z: Dict[int, np.ndarray]  # l = 1..L


# ---------------------------------------------------------------------
#                         Construction
# ---------------------------------------------------------------------

# Block-diagonal mask with J/K all-ones K x K blocks (neural columns).
def build_group_mask(J, K):
    if K < 1 or J < 1 or J % K != 0:
        raise ValueError(f"Layer width {J} is not divisible by group size {K}.")
    # Stack J/K slabs of shape J x K, each holding one K x K block of ones.
    slabs = []
    for k in range(J // K):
        slab = np.zeros((J, K))
        slab[k * K:(k + 1) * K, :] = 1.0
        slabs.append(slab)
    return np.concatenate(slabs, axis=1)

# V = alpha_h * (M * (1 - I)) - alpha_e * I
def build_lateral_matrix(M, alpha_e, alpha_h):
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"Lateral mask must be square, got shape {M.shape}.")
    eye = np.eye(M.shape[0])
    return alpha_h * (M * (1.0 - eye)) - alpha_e * eye

# Scale every column to unit Euclidean norm (near-zero columns are kept).
def normalize_weight_columns(matrix, guard=COLUMN_NORM_GUARD):
    norms = np.linalg.norm(matrix, axis=0, keepdims=True)
    norms = np.where(norms < guard, 1.0, norms)
    return matrix / norms

# Draw a fresh set of parameters from the configuration's seed.
def init_params(config, rng=None):
    config.validate()
    rng = np.random.default_rng(config.seed) if rng is None else rng
    sizes = [int(j) for j in config.layer_sizes]
    L = config.L
    W, E, P, V = {}, {}, {}, {}
    for ell in range(L):
        W[ell] = normalize_weight_columns(rng.normal(0.0, config.weight_std, size=(sizes[ell], sizes[ell + 1])))
    for ell in range(1, L + 1):
        E[ell] = normalize_weight_columns(rng.normal(0.0, config.weight_std, size=(sizes[ell], sizes[ell - 1])))
    for ell in range(1, L):
        P[ell] = np.eye(sizes[ell])
    for ell in range(1, L + 1):
        mask = build_group_mask(sizes[ell], config.group_size[ell - 1])
        V[ell] = build_lateral_matrix(mask, config.alpha_e, config.alpha_h)
    log.debug("Initialized GNCN with layer sizes %s (seed %d).", sizes, config.seed)
    return GncnParams(config=config, W=W, E=E, P=P, V=V)

# Replace error synapses by transposed forward weights (no normalization).
def tie_error_weights(params):
    for ell in range(1, params.L + 1):
        params.E[ell] = params.W[ell - 1].T.copy()
    return params


# ---------------------------------------------------------------------
#                         Settling inference
# ---------------------------------------------------------------------

def _as_batch(x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    return x

def _check_input(params, x):
    if x.shape[0] != params.config.layer_sizes[0]:
        raise ValueError(f"Input has {x.shape[0]} rows, model expects {params.config.layer_sizes[0]}.")

# Step 1: clamp the input and zero every latent layer.
def new_state(params, x):
    x = _as_batch(x)
    _check_input(params, x)
    batch = x.shape[1]
    z = [x.copy()] + [np.zeros((j, batch)) for j in params.config.layer_sizes[1:]]
    return InferenceState(z=z, mu=[None] * params.L, err=[None] * params.L)

# mu[l] = g^l(W[l] . phi(z[l+1])), with the output squashed and clipped.
def predict_means(params, state):
    cfg = params.config
    phi = get_activation(cfg.act_hidden)
    g_out = get_activation(cfg.act_out)
    for ell in range(params.L):
        h = params.W[ell] @ phi(state.z[ell + 1])
        if ell == 0:
            state.mu[0] = np.clip(g_out(h), cfg.p_eps, 1.0 - cfg.p_eps)
        else:
            state.mu[ell] = h
    return state

# Bernoulli error dpsi/dmu^0 before the output derivative is folded in.
def raw_output_error(x, mu0, p_eps):
    mu0 = np.clip(mu0, p_eps, 1.0 - p_eps)
    return x / mu0 - (1.0 - x) / (1.0 - mu0)

# e^0 = z^0 - mu^0 and e^l = P[l] (z^l - mu^l).
def compute_error_neurons(params, state):
    state.err[0] = state.z[0] - state.mu[0]
    for ell in range(1, params.L):
        state.err[ell] = params.P[ell] @ (state.z[ell] - state.mu[ell])
    return state

# One correction of every latent layer from the current error neurons.
#  z[0] is never written here: settle keeps it clamped and
#  complete_pattern owns its masked coordinates.
def state_update_step(params, state):
    cfg = params.config
    phi = get_activation(cfg.act_hidden)
    L = params.L
    updated = []
    for ell in range(1, L + 1):
        z = state.z[ell]
        pressure = -cfg.gamma * z + params.E[ell] @ state.err[ell - 1] - params.V[ell] @ phi(z)
        if ell < L:
            pressure = pressure - state.err[ell]
        updated.append(z + cfg.beta * pressure)
    state.z[1:] = updated
    return state

# Steps 1-5: clamp x, then alternate state corrections and error updates T times.
def settle(params, x, T=None):
    T = params.config.T if T is None else int(T)
    state = new_state(params, x)
    predict_means(params, state)
    compute_error_neurons(params, state)
    for _ in range(T):
        state_update_step(params, state)
        predict_means(params, state)
        compute_error_neurons(params, state)
    return state

# Settle column chunks on a thread pool; columns never interact.
def settle_parallel(params, x, T=None, threads=1):
    x = _as_batch(x)
    batch = x.shape[1]
    if threads <= 1 or batch < 2:
        return settle(params, x, T)
    chunks = [idx for idx in np.array_split(np.arange(batch), min(threads, batch)) if idx.size]
    with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
        states = list(pool.map(lambda idx: settle(params, x[:, idx], T), chunks))
    return InferenceState(
        z=[np.concatenate([s.z[ell] for s in states], axis=1) for ell in range(params.L + 1)],
        mu=[np.concatenate([s.mu[ell] for s in states], axis=1) for ell in range(params.L)],
        err=[np.concatenate([s.err[ell] for s in states], axis=1) for ell in range(params.L)],
    )

# Top-layer codes for a batch (used for the prior fit and the probes).
def infer_latents(params, x, T=None):
    return settle(params, x, T).z[params.L]

# Deterministic top-down pass from z^L to the Bernoulli means.
def ancestral_decode(params, z_top):
    cfg = params.config
    phi = get_activation(cfg.act_hidden)
    g_out = get_activation(cfg.act_out)
    z = _as_batch(z_top)
    if z.shape[0] != cfg.layer_sizes[-1]:
        raise ValueError(f"Top-layer code has {z.shape[0]} rows, model expects {cfg.layer_sizes[-1]}.")
    for ell in reversed(range(params.L)):
        h = params.W[ell] @ phi(z)
        if ell == 0:
            return np.clip(g_out(h), cfg.p_eps, 1.0 - cfg.p_eps)
        z = h

# Fill in the coordinates where m == 0 by treating z^0 as a partial latent.
def complete_pattern(params, x, m, T=None):
    T = params.config.T if T is None else int(T)
    beta = params.config.beta
    x = _as_batch(x)
    m = np.asarray(m).astype(bool)
    if m.ndim == 1:
        m = m.reshape(-1, 1)
    m = np.broadcast_to(m, x.shape)
    state = new_state(params, np.where(m, x, 0.0))
    predict_means(params, state)
    compute_error_neurons(params, state)
    for _ in range(T):
        state_update_step(params, state)
        state.z[0] = np.where(m, x, state.z[0] - beta * state.err[0])
        predict_means(params, state)
        compute_error_neurons(params, state)
    return state.z[0]


# ---------------------------------------------------------------------
#                         Total discrepancy
# ---------------------------------------------------------------------

# psi: Bernoulli log-likelihood plus Gaussian log-densities of layers 1..L-1,
#  summed over the batch columns.
def total_discrepancy(params, state, x):
    x = _as_batch(x)
    mu0 = state.mu[0]
    psi = np.sum(x * np.log(mu0) + (1.0 - x) * np.log(1.0 - mu0))
    batch = x.shape[1]
    for ell in range(1, params.L):
        P = params.P[ell]
        r = state.z[ell] - state.mu[ell]
        _, logdet = np.linalg.slogdet(P)
        psi += 0.5 * batch * logdet - 0.5 * np.sum(r * (P @ r))
    if not np.isfinite(psi):
        raise FloatingPointError("Total discrepancy is not finite; check the output clipping (p_eps).")
    return float(psi)

# psi for an explicit list of layer states z[0..L] (z[0] is replaced by x).
def evaluate_discrepancy(params, z, x):
    x = _as_batch(x)
    state = InferenceState(z=[x] + [np.asarray(v, dtype=np.float64) for v in z[1:]],
                           mu=[None] * params.L, err=[None] * params.L)
    predict_means(params, state)
    return total_discrepancy(params, state, x)

# Exact partial derivatives of psi (weight transport and activation
#  derivatives included). Verification oracle only.
def full_gradients(params, state, x):
    cfg = params.config
    phi = get_activation(cfg.act_hidden)
    g_out = get_activation(cfg.act_out)
    if not (phi.smooth and g_out.smooth):
        raise GradientUnavailableError(
            f"Exact gradients need smooth activations, got phi={phi.name!r}, g0={g_out.name!r}.")
    x = _as_batch(x)
    L = params.L
    z = state.z
    batch = x.shape[1]
    # Pre-activations and dpsi/dh for every predicted layer.
    h = [params.W[ell] @ phi(z[ell + 1]) for ell in range(L)]
    mu0 = np.clip(g_out(h[0]), cfg.p_eps, 1.0 - cfg.p_eps)
    dh = [g_out.deriv(h[0]) * raw_output_error(x, mu0, cfg.p_eps)]
    residual = {}
    for ell in range(1, L):
        P = params.P[ell]
        residual[ell] = z[ell] - h[ell]
        dh.append(0.5 * (P + P.T) @ residual[ell])
    grad_W = {ell: dh[ell] @ phi(z[ell + 1]).T for ell in range(L)}
    grad_z = {}
    for ell in range(1, L + 1):
        g = phi.deriv(z[ell]) * (params.W[ell - 1].T @ dh[ell - 1])
        if ell < L:
            g = g - dh[ell]
        grad_z[ell] = g
    grad_P = {}
    for ell in range(1, L):
        r = residual[ell]
        grad_P[ell] = 0.5 * batch * np.linalg.inv(params.P[ell]).T - 0.5 * (r @ r.T)
    return Gradients(W=grad_W, P=grad_P, z=grad_z)


# ---------------------------------------------------------------------
#                         Parameter updates
# ---------------------------------------------------------------------

# dW[l] = err[l] . phi(z[l+1])^T, averaged over the batch.
def forward_weight_deltas(params, state):
    phi = get_activation(params.config.act_hidden)
    batch = state.batch_size
    return {ell: state.err[ell] @ phi(state.z[ell + 1]).T / batch for ell in range(params.L)}

# dE[l] = lambda * phi(z[l]) . err[l-1]^T, averaged over the batch.
def error_weight_deltas(params, state):
    cfg = params.config
    phi = get_activation(cfg.act_hidden)
    batch = state.batch_size
    return {ell: cfg.lambda_e * (phi(state.z[ell]) @ state.err[ell - 1].T) / batch
            for ell in range(1, params.L + 1)}

# Covariance of a precision matrix through its Cholesky factor.
def _covariance(P, eig_floor):
    try:
        factor = scipy.linalg.cho_factor(P, lower=True)
    except np.linalg.LinAlgError as e:
        raise np.linalg.LinAlgError(f"Precision matrix is not positive definite (eig_floor={eig_floor}).") from e
    return scipy.linalg.cho_solve(factor, np.eye(P.shape[0]))

# dP[l] = 1/2 Sigma - 1/2 mean(r r^T) with r = z[l] - mu[l].
def precision_deltas(params, state):
    batch = state.batch_size
    deltas = {}
    for ell in range(1, params.L):
        r = state.z[ell] - state.mu[ell]
        sigma = _covariance(params.P[ell], params.config.eig_floor)
        deltas[ell] = 0.5 * sigma - 0.5 * (r @ r.T) / batch
    return deltas

# Symmetrize and lift every eigenvalue to at least eig_floor.
def project_precision(P, eig_floor, diagonal=False):
    P = 0.5 * (P + P.T)
    if diagonal:
        return np.diag(np.maximum(np.diag(P), eig_floor))
    eigvals, eigvecs = np.linalg.eigh(P)
    P = (eigvecs * np.maximum(eigvals, eig_floor)) @ eigvecs.T
    return 0.5 * (P + P.T)

def update_forward_weights(params, state, eta_w):
    deltas = forward_weight_deltas(params, state)
    for ell, delta in deltas.items():
        params.W[ell] = normalize_weight_columns(params.W[ell] + eta_w * delta)
    return deltas

def update_error_weights(params, state, eta_w):
    deltas = error_weight_deltas(params, state)
    for ell, delta in deltas.items():
        params.E[ell] = normalize_weight_columns(params.E[ell] + eta_w * delta)
    return deltas

def update_precisions(params, state, eta_p):
    cfg = params.config
    if cfg.precision_mode == "identity":
        return {}
    deltas = precision_deltas(params, state)
    for ell, delta in deltas.items():
        params.P[ell] = project_precision(params.P[ell] + eta_p * delta, cfg.eig_floor,
                                          diagonal=(cfg.precision_mode == "diagonal"))
    return deltas

# Step 6: every local update from one settled state.
def apply_updates(params, state, eta_w, eta_p):
    update_precisions(params, state, eta_p)
    update_forward_weights(params, state, eta_w)
    update_error_weights(params, state, eta_w)
    return params
