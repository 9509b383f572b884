# Python libraries
import json
import logging
from pathlib import Path

# Numeric libraries
import numpy as np

# Local libraries
from .config import ModelConfig
from .constants import (
    CHECKPOINT_FORMAT_VERSION,
    CHECKPOINT_MANIFEST,
    GMM_MANIFEST,
    TENSOR_DTYPE,
)
from .gmm import GmmParams
from .model import GncnParams

log = logging.getLogger(__name__)


class CheckpointError(ValueError):
    pass

class PriorNotFittedError(CheckpointError):
    pass


# Raw row-major little-endian float64 tensor file.
def _write_tensor(directory, name, array):
    path = Path(directory) / f"{name}.bin"
    with open(path, "wb") as f:
        f.write(np.ascontiguousarray(array, dtype=TENSOR_DTYPE).tobytes())
    return list(array.shape)

def _read_tensor(directory, name, shape):
    path = Path(directory) / f"{name}.bin"
    if not path.exists():
        raise CheckpointError(f"Missing tensor file {path}.")
    data = path.read_bytes()
    expected = int(np.prod(shape)) * 8
    if len(data) != expected:
        raise CheckpointError(f"{path} holds {len(data)} bytes, manifest shape {shape} needs {expected}.")
    return np.frombuffer(data, dtype=TENSOR_DTYPE).reshape(shape).astype(np.float64)

# Expected tensor shapes for a model configuration, keyed by file stem.
def tensor_shapes(config):
    J = [int(j) for j in config.layer_sizes]
    shapes = {}
    for ell in range(config.L):
        shapes[f"w{ell}"] = [J[ell], J[ell + 1]]
    for ell in range(1, config.L + 1):
        shapes[f"e{ell}"] = [J[ell], J[ell - 1]]
        shapes[f"v{ell}"] = [J[ell], J[ell]]
    for ell in range(1, config.L):
        shapes[f"p{ell}"] = [J[ell], J[ell]]
    return shapes

def _tensors(params):
    tensors = {f"w{ell}": m for ell, m in params.W.items()}
    tensors.update({f"e{ell}": m for ell, m in params.E.items()})
    tensors.update({f"v{ell}": m for ell, m in params.V.items()})
    tensors.update({f"p{ell}": m for ell, m in params.P.items()})
    return tensors


def save_checkpoint(directory, params, epoch=0):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    shapes = {name: _write_tensor(directory, name, array) for name, array in sorted(_tensors(params).items())}
    manifest = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "config": params.config.to_dict(),
        "layer_shapes": shapes,
        "seed": params.config.seed,
        "epoch": int(epoch),
    }
    with open(directory / CHECKPOINT_MANIFEST, "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
    log.info("Saved checkpoint (epoch %d) to %s.", epoch, directory)
    return directory

# Load (params, epoch), validating tensor shapes against the manifest.
def load_checkpoint(directory):
    directory = Path(directory)
    manifest_path = directory / CHECKPOINT_MANIFEST
    if not manifest_path.exists():
        raise CheckpointError(f"No {CHECKPOINT_MANIFEST} in {directory}.")
    with open(manifest_path, "r") as f:
        manifest = json.load(f)
    if manifest.get("format_version") != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointError(f"Unsupported checkpoint format {manifest.get('format_version')!r}.")
    config = ModelConfig.from_dict(manifest["config"]).validate()
    expected = tensor_shapes(config)
    declared = manifest["layer_shapes"]
    if set(declared) != set(expected):
        raise CheckpointError(f"Manifest tensors {sorted(declared)} do not match the configuration {sorted(expected)}.")
    for name, shape in expected.items():
        if list(declared[name]) != shape:
            raise CheckpointError(f"Tensor {name} has shape {declared[name]}, configuration needs {shape}.")
    t = {name: _read_tensor(directory, name, shape) for name, shape in expected.items()}
    params = GncnParams(
        config=config,
        W={ell: t[f"w{ell}"] for ell in range(config.L)},
        E={ell: t[f"e{ell}"] for ell in range(1, config.L + 1)},
        P={ell: t[f"p{ell}"] for ell in range(1, config.L)},
        V={ell: t[f"v{ell}"] for ell in range(1, config.L + 1)},
    )
    return params, int(manifest.get("epoch", 0))


def _gmm_manifest_name(name):
    return GMM_MANIFEST if name == "gmm" else f"{name}.manifest.json"

def save_gmm(directory, gmm, name="gmm"):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    shapes = {
        "weights": _write_tensor(directory, f"{name}_weights", gmm.weights),
        "means": _write_tensor(directory, f"{name}_means", gmm.means),
        "covariances": _write_tensor(directory, f"{name}_covariances", gmm.covariances),
    }
    manifest = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "covariance": gmm.covariance,
        "n_components": gmm.n_components,
        "shapes": shapes,
    }
    manifest_name = _gmm_manifest_name(name)
    with open(directory / manifest_name, "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
    return directory

def has_prior(directory, name="gmm"):
    return (Path(directory) / _gmm_manifest_name(name)).exists()

def load_gmm(directory, name="gmm"):
    directory = Path(directory)
    if not has_prior(directory, name):
        raise PriorNotFittedError(f"Prior not fitted: no mixture manifest for {name!r} in {directory}.")
    manifest_name = _gmm_manifest_name(name)
    with open(directory / manifest_name, "r") as f:
        manifest = json.load(f)
    shapes = manifest["shapes"]
    return GmmParams(
        weights=_read_tensor(directory, f"{name}_weights", shapes["weights"]),
        means=_read_tensor(directory, f"{name}_means", shapes["means"]),
        covariances=_read_tensor(directory, f"{name}_covariances", shapes["covariances"]),
        covariance=manifest["covariance"],
    )
