import unittest

import numpy as np
from numpy.testing import assert_allclose

from ngc_generative_coding.model import (
    compute_error_neurons,
    evaluate_discrepancy,
    forward_weight_deltas,
    full_gradients,
    init_params,
    predict_means,
)

from tests.helpers import random_binary, small_config, state_from

H = 1e-5
N_INSTANCES = 50


# A random three-layer instance with smooth activations and SPD precisions.
def random_instance(seed, act_hidden="tanh"):
    rng = np.random.default_rng(seed)
    sizes = [int(v) for v in rng.integers(2, 9, size=4)]
    batch = int(rng.integers(1, 5))
    params = init_params(small_config(layer_sizes=sizes, group_size=[1, 1, 1], act_hidden=act_hidden, seed=seed))
    for ell in params.P:
        A = rng.normal(scale=0.3, size=(sizes[ell], sizes[ell]))
        params.P[ell] = A @ A.T + np.eye(sizes[ell])
    x = random_binary(rng, sizes[0], batch)
    z = [x] + [rng.normal(size=(j, batch)) for j in sizes[1:]]
    return params, z, x

def relative_error(a, b):
    scale = max(np.linalg.norm(a), np.linalg.norm(b), 1e-8)
    return np.linalg.norm(a - b) / scale

# Central differences of psi with respect to every entry of `target`.
def numeric_gradient(psi, target):
    grad = np.zeros_like(target)
    for idx in np.ndindex(target.shape):
        saved = target[idx]
        target[idx] = saved + H
        up = psi()
        target[idx] = saved - H
        down = psi()
        target[idx] = saved
        grad[idx] = (up - down) / (2.0 * H)
    return grad


class TestFullGradients(unittest.TestCase):

    def test_matches_finite_differences(self):
        for seed in range(N_INSTANCES):
            params, z, x = random_instance(seed)
            grads = full_gradients(params, state_from(z), x)
            psi = lambda: evaluate_discrepancy(params, z, x)
            for ell, W in params.W.items():
                self.assertLessEqual(relative_error(numeric_gradient(psi, W), grads.W[ell]), 1e-5,
                                     f"W[{ell}], instance {seed}")
            for ell, P in params.P.items():
                self.assertLessEqual(relative_error(numeric_gradient(psi, P), grads.P[ell]), 1e-5,
                                     f"P[{ell}], instance {seed}")
            for ell in range(1, params.L + 1):
                self.assertLessEqual(relative_error(numeric_gradient(psi, z[ell]), grads.z[ell]), 1e-5,
                                     f"z[{ell}], instance {seed}")

    def test_other_smooth_activations(self):
        for seed, act in enumerate(("identity", "logistic", "softplus")):
            params, z, x = random_instance(100 + seed, act_hidden=act)
            grads = full_gradients(params, state_from(z), x)
            psi = lambda: evaluate_discrepancy(params, z, x)
            for ell, W in params.W.items():
                self.assertLessEqual(relative_error(numeric_gradient(psi, W), grads.W[ell]), 1e-5)


class TestHebbianIdentity(unittest.TestCase):

    # Batch-averaged dW[l] (l >= 1) times the batch size is the exact gradient.
    def test_forward_delta_equals_gradient(self):
        for seed in range(N_INSTANCES):
            params, z, x = random_instance(seed)
            state = state_from(z)
            predict_means(params, state)
            compute_error_neurons(params, state)
            deltas = forward_weight_deltas(params, state)
            grads = full_gradients(params, state, x)
            batch = x.shape[1]
            for ell in range(1, params.L):
                assert_allclose(batch * deltas[ell], grads.W[ell], rtol=0, atol=1e-10)


if __name__ == "__main__":
    unittest.main()
