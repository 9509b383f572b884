# Python libraries
from dataclasses import dataclass
from typing import Callable, Optional

# Numeric libraries
import numpy as np
from scipy.special import expit


# A named point-wise function with its first derivative (None when the
# function is not smooth enough for exact gradients).
@dataclass(frozen=True)
class Activation:
    name: str
    fn: Callable[[np.ndarray], np.ndarray]
    deriv: Optional[Callable[[np.ndarray], np.ndarray]]

    def __call__(self, v):
        return self.fn(v)

    @property
    def smooth(self):
        return self.deriv is not None


def _identity(v):
    return v

def _identity_deriv(v):
    return np.ones_like(v)

def _relu(v):
    return np.maximum(v, 0.0)

def _logistic_deriv(v):
    s = expit(v)
    return s * (1.0 - s)

def _tanh_deriv(v):
    return 1.0 - np.tanh(v) ** 2

def _softplus(v):
    return np.logaddexp(0.0, v)

def _heaviside(v):
    return (v > 0.0).astype(np.float64)


ACTIVATIONS = {
    "identity": Activation("identity", _identity, _identity_deriv),
    "relu": Activation("relu", _relu, None),
    "logistic": Activation("logistic", expit, _logistic_deriv),
    "tanh": Activation("tanh", np.tanh, _tanh_deriv),
    "softplus": Activation("softplus", _softplus, expit),
    "heaviside": Activation("heaviside", _heaviside, None),
}


# Look up an activation by its id.
def get_activation(name):
    try:
        return ACTIVATIONS[name]
    except KeyError:
        raise ValueError(f"Unknown activation {name!r}, expected one of {sorted(ACTIVATIONS)}.") from None
