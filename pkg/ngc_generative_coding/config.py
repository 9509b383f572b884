# Python libraries
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import List, Optional

# Local libraries
from .activations import ACTIVATIONS
from .constants import (
    ALPHA_E,
    ALPHA_H,
    ACT_HIDDEN,
    ACT_OUT,
    BINARIZE_THRESHOLD,
    DEFAULT_BATCH_SIZE,
    DEFAULT_BETA,
    DEFAULT_EPOCHS,
    DEFAULT_ETA_W,
    DEFAULT_GAMMA,
    DEFAULT_GMM_COMPONENTS,
    DEFAULT_GROUP_SIZE,
    DEFAULT_LAMBDA_E,
    DEFAULT_LAYER_SIZES,
    DEFAULT_MC_SAMPLES,
    DEFAULT_N_VAL,
    DEFAULT_PIXEL_GMM_COMPONENTS,
    DEFAULT_T,
    DEFAULT_WEIGHT_STD,
    EIG_FLOOR,
    MASK_KINDS,
    P_EPS,
    PRECISION_MODES,
    SPARSITY_EPS,
)


class ConfigError(ValueError):
    pass


# Build a dataclass from a dictionary, rejecting keys it does not declare.
def _from_dict(cls, data, nested=None):
    if not isinstance(data, dict):
        raise ConfigError(f"Expected a JSON object for {cls.__name__}, got {type(data).__name__}.")
    nested = nested or {}
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"Unknown key(s) for {cls.__name__}: {', '.join(unknown)}")
    kwargs = {}
    for key, value in data.items():
        kwargs[key] = nested[key].from_dict(value) if key in nested else value
    return cls(**kwargs)


@dataclass
class ModelConfig:
    layer_sizes: List[int] = field(default_factory=lambda: list(DEFAULT_LAYER_SIZES))
    T: int = DEFAULT_T
    beta: float = DEFAULT_BETA
    gamma: float = DEFAULT_GAMMA
    lambda_e: float = DEFAULT_LAMBDA_E
    alpha_e: float = ALPHA_E
    alpha_h: float = ALPHA_H
    group_size: List[int] = field(default_factory=lambda: list(DEFAULT_GROUP_SIZE))
    act_hidden: str = ACT_HIDDEN
    act_out: str = ACT_OUT
    precision_mode: str = "full"
    weight_std: float = DEFAULT_WEIGHT_STD
    p_eps: float = P_EPS
    eig_floor: float = EIG_FLOOR
    seed: int = 0

    # Number of latent layers (layers 1..L).
    @property
    def L(self):
        return len(self.layer_sizes) - 1

    @classmethod
    def from_dict(cls, data):
        return _from_dict(cls, data)

    def to_dict(self):
        return asdict(self)

    def validate(self):
        if len(self.layer_sizes) < 2:
            raise ConfigError("layer_sizes needs the input width and at least one latent layer.")
        if any(int(j) < 1 for j in self.layer_sizes):
            raise ConfigError(f"Every layer width must be at least 1, got {self.layer_sizes}.")
        if len(self.group_size) != self.L:
            raise ConfigError(f"group_size needs one entry per latent layer ({self.L}), got {len(self.group_size)}.")
        for ell, (width, k) in enumerate(zip(self.layer_sizes[1:], self.group_size), start=1):
            if k < 1 or width % k != 0:
                raise ConfigError(f"Layer {ell} width {width} is not divisible by group size {k}.")
        if self.T < 1:
            raise ConfigError(f"T must be a positive integer, got {self.T}.")
        if self.beta < 0:
            raise ConfigError(f"beta must be non-negative, got {self.beta}.")
        if self.gamma < 0:
            raise ConfigError(f"gamma must be non-negative, got {self.gamma}.")
        if not 0.0 <= self.lambda_e <= 1.0:
            raise ConfigError(f"lambda_e must lie in [0, 1], got {self.lambda_e}.")
        for name in (self.act_hidden, self.act_out):
            if name not in ACTIVATIONS:
                raise ConfigError(f"Unknown activation {name!r}.")
        if self.precision_mode not in PRECISION_MODES:
            raise ConfigError(f"precision_mode must be one of {PRECISION_MODES}, got {self.precision_mode!r}.")
        if not 0.0 < self.p_eps < 0.5:
            raise ConfigError(f"p_eps must lie in (0, 0.5), got {self.p_eps}.")
        if not self.eig_floor > 0:
            raise ConfigError(f"eig_floor must be positive, got {self.eig_floor}.")
        return self


@dataclass
class OptimizerConfig:
    eta_w: float = DEFAULT_ETA_W
    eta_p: Optional[float] = None  # None means eta_w / 10.
    epochs: int = DEFAULT_EPOCHS
    batch_size: int = DEFAULT_BATCH_SIZE

    @property
    def precision_rate(self):
        return self.eta_w / 10.0 if self.eta_p is None else self.eta_p

    @classmethod
    def from_dict(cls, data):
        return _from_dict(cls, data)

    def to_dict(self):
        return asdict(self)

    def validate(self):
        if self.epochs < 0:
            raise ConfigError(f"epochs must be non-negative, got {self.epochs}.")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be at least 1, got {self.batch_size}.")
        if self.eta_w < 0 or (self.eta_p is not None and self.eta_p < 0):
            raise ConfigError("Learning rates must be non-negative.")
        return self


@dataclass
class DataConfig:
    train_images: Optional[str] = None
    train_labels: Optional[str] = None
    test_images: Optional[str] = None
    test_labels: Optional[str] = None
    n_val: int = DEFAULT_N_VAL
    train_limit: Optional[int] = None
    test_limit: Optional[int] = None
    threshold: float = BINARIZE_THRESHOLD
    inclusive: bool = True

    @classmethod
    def from_dict(cls, data):
        return _from_dict(cls, data)

    def to_dict(self):
        return asdict(self)

    def validate(self):
        if self.n_val < 0:
            raise ConfigError(f"n_val must be non-negative, got {self.n_val}.")
        for name in ("train_limit", "test_limit"):
            limit = getattr(self, name)
            if limit is not None and limit < 1:
                raise ConfigError(f"{name} must be at least 1 when set, got {limit}.")
        return self


@dataclass
class GmmConfig:
    n_components: int = DEFAULT_GMM_COMPONENTS
    em_iters: int = 100
    tol: float = 1e-4
    covariance: str = "full"
    pixel_components: int = DEFAULT_PIXEL_GMM_COMPONENTS

    @classmethod
    def from_dict(cls, data):
        return _from_dict(cls, data)

    def to_dict(self):
        return asdict(self)

    def validate(self):
        if self.n_components < 1 or self.pixel_components < 1:
            raise ConfigError("Mixture component counts must be at least 1.")
        if self.em_iters < 1:
            raise ConfigError(f"em_iters must be at least 1, got {self.em_iters}.")
        if self.covariance not in ("full", "diagonal"):
            raise ConfigError(f"covariance must be 'full' or 'diagonal', got {self.covariance!r}.")
        return self


@dataclass
class EvalConfig:
    mc_samples: int = DEFAULT_MC_SAMPLES
    mask_kind: str = "right-half"
    mask_path: Optional[str] = None  # PGM of one image for mask_kind "custom"; nonzero = observed
    n_samples: int = 64
    grid_rows: int = 8
    grid_cols: int = 8
    maxent_epochs: int = 50
    maxent_lr: float = 0.1
    maxent_batch: int = 200
    sparsity_eps: float = SPARSITY_EPS

    @classmethod
    def from_dict(cls, data):
        return _from_dict(cls, data)

    def to_dict(self):
        return asdict(self)

    def validate(self):
        if self.mc_samples < 1:
            raise ConfigError(f"mc_samples must be at least 1, got {self.mc_samples}.")
        if self.mask_kind not in MASK_KINDS:
            raise ConfigError(f"mask_kind must be one of {MASK_KINDS}, got {self.mask_kind!r}.")
        if self.mask_kind == "custom" and not self.mask_path:
            raise ConfigError("mask_kind \"custom\" needs eval.mask_path.")
        if self.n_samples < 1 or self.grid_rows < 1 or self.grid_cols < 1:
            raise ConfigError("Sample count and grid shape must be positive.")
        if self.maxent_epochs < 0 or self.maxent_batch < 1:
            raise ConfigError("maxent_epochs must be non-negative and maxent_batch positive.")
        return self


@dataclass
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    data: DataConfig = field(default_factory=DataConfig)
    gmm: GmmConfig = field(default_factory=GmmConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    output_dir: Optional[str] = None
    seed: int = 0
    threads: int = 1

    @classmethod
    def from_dict(cls, data):
        return _from_dict(cls, data, nested={
            "model": ModelConfig,
            "optimizer": OptimizerConfig,
            "data": DataConfig,
            "gmm": GmmConfig,
            "eval": EvalConfig,
        })

    def to_dict(self):
        return asdict(self)

    def validate(self):
        for section in (self.model, self.optimizer, self.data, self.gmm, self.eval):
            section.validate()
        if self.threads < 1:
            raise ConfigError(f"threads must be at least 1, got {self.threads}.")
        return self


# Read a run configuration from a single JSON document.
def load_run_config(path):
    try:
        with open(path, "r") as f:
            data = json.load(f)
    except OSError as e:
        raise ConfigError(f"Could not read config file {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"Config file {path} is not valid JSON: {e}") from e
    try:
        return RunConfig.from_dict(data).validate()
    except TypeError as e:
        raise ConfigError(f"Malformed config file {path}: {e}") from e

# Write a run configuration as JSON (stable key order).
def save_run_config(config, path):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(config.to_dict(), f, indent=2, sort_keys=True)
        f.write("\n")
