# Python libraries
import gzip
import struct
from pathlib import Path

# Numeric libraries
import numpy as np

# Local libraries
from ngc_generative_coding.config import ModelConfig
from ngc_generative_coding.model import InferenceState, init_params


# A small model configuration; keyword arguments override any field.
def small_config(**overrides):
    values = dict(
        layer_sizes=[6, 4, 3],
        group_size=[2, 3],
        T=10,
        beta=0.05,
        gamma=0.001,
        act_hidden="relu",
        act_out="logistic",
        seed=0,
    )
    values.update(overrides)
    return ModelConfig(**values)

def small_params(**overrides):
    return init_params(small_config(**overrides))

def random_binary(rng, D, S):
    return (rng.random((D, S)) < 0.5).astype(np.float64)

# An inference state holding explicit layer values (means and errors unset).
def state_from(z):
    L = len(z) - 1
    return InferenceState(z=[np.asarray(v, dtype=np.float64) for v in z], mu=[None] * L, err=[None] * L)

# Write an unsigned-byte IDX file (optionally gzipped).
def write_idx(path, array, compress=False):
    array = np.asarray(array, dtype=np.uint8)
    header = bytes([0, 0, 0x08, array.ndim]) + struct.pack(">" + "I" * array.ndim, *array.shape)
    data = header + array.tobytes()
    path = Path(path)
    if compress:
        with gzip.open(path, "wb") as f:
            f.write(data)
    else:
        path.write_bytes(data)
    return path

# Two noisy 4 x 4 prototypes (left bar, right bar) with their labels.
def toy_images(n, seed):
    rng = np.random.default_rng(seed)
    protos = np.zeros((2, 4, 4), dtype=np.uint8)
    protos[0, :, :2] = 255
    protos[1, :, 2:] = 255
    labels = np.arange(n) % 2
    images = protos[labels].copy()
    flips = rng.random(images.shape) < 0.05
    images[flips] = 255 - images[flips]
    return images, labels.astype(np.uint8)

# Noisy 8 x 8 prototypes: top half, bottom half, left half, 2 x 2 checkerboard.
#  The first two are complements of each other.
def prototype_images(n, seed, n_prototypes=4, flip=0.03):
    rng = np.random.default_rng(seed)
    protos = np.zeros((4, 8, 8), dtype=np.uint8)
    protos[0, :4] = 255
    protos[1, 4:] = 255
    protos[2, :, :4] = 255
    blocks = np.arange(8) // 2
    protos[3] = 255 * ((blocks[:, None] + blocks[None, :]) % 2)
    labels = np.arange(n) % n_prototypes
    images = protos[labels].copy()
    flips = rng.random(images.shape) < flip
    images[flips] = 255 - images[flips]
    return images, labels.astype(np.uint8)
