"""
Dataset ingestion (IDX and headered CSV), binarization, splitting,
mini-batching, masks and PGM image grids. Design matrices are D x S with one
record per column.
"""

# Python libraries
import gzip
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

# Numeric libraries
import numpy as np

# Local libraries
from .constants import BINARIZE_THRESHOLD

log = logging.getLogger(__name__)

IDX_UNSIGNED_BYTE = 0x08
IDX_MAX_ELEMENTS = 2 ** 31


class IdxFormatError(ValueError):
    pass

class BadMagicError(IdxFormatError):
    pass

class TruncatedPayloadError(IdxFormatError):
    pass

class DimensionOverflowError(IdxFormatError):
    pass


@dataclass
class DatasetSplit:
    X: np.ndarray                   # D x S, entries in {0, 1}
    Y: Optional[np.ndarray] = None  # C x S one-hot, or None
    names: dict = field(default_factory=dict)

    @property
    def n_records(self):
        return self.X.shape[1]

    def subset(self, idx):
        return DatasetSplit(
            X=self.X[:, idx],
            Y=None if self.Y is None else self.Y[:, idx],
            names=dict(self.names),
        )


@dataclass
class MaskSpec:
    kind: str
    M: np.ndarray  # D x S, 1 = observed, 0 = masked


# ---------------------------------------------------------------------
#                         Loading
# ---------------------------------------------------------------------

def _read_bytes(path):
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rb") as f:
        return f.read()

# Parse an IDX file: zero bytes, type code 0x08, rank, big-endian dims, payload.
def load_idx(path):
    data = _read_bytes(path)
    if len(data) < 4:
        raise BadMagicError(f"{path}: file too short for an IDX header.")
    if data[0] != 0 or data[1] != 0 or data[2] != IDX_UNSIGNED_BYTE:
        raise BadMagicError(f"{path}: bad magic 0x{data[:4].hex()}, expected 0x000008xx (unsigned byte).")
    rank = data[3]
    if rank < 1:
        raise BadMagicError(f"{path}: IDX rank must be at least 1.")
    header_end = 4 + 4 * rank
    if len(data) < header_end:
        raise TruncatedPayloadError(f"{path}: header declares rank {rank} but ends after {len(data)} bytes.")
    dims = tuple(int(d) for d in np.frombuffer(data, dtype=">u4", count=rank, offset=4))
    n_elements = 1
    for d in dims:
        n_elements *= d
        if n_elements > IDX_MAX_ELEMENTS:
            raise DimensionOverflowError(f"{path}: dims {dims} exceed {IDX_MAX_ELEMENTS} elements.")
    payload = len(data) - header_end
    if payload < n_elements:
        raise TruncatedPayloadError(f"{path}: expected {n_elements} payload bytes, found {payload}.")
    if payload > n_elements:
        log.warning("%s: ignoring %d trailing bytes after the IDX payload.", path, payload - n_elements)
    array = np.frombuffer(data, dtype=np.uint8, count=n_elements, offset=header_end).reshape(dims)
    return array, dims

# Headered CSV: optional leading `label` column, then pixel bytes 0..255.
def load_csv(path):
    path = Path(path)
    with open(path, "r") as f:
        header = f.readline().strip().split(",")
    values = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if header and header[0].strip().lower() == "label":
        return values[:, 1:], values[:, 0].astype(np.int64)
    return values, None

# Byte values to {0, 1}: v / 255 >= threshold (or > when not inclusive).
def binarize(raw, threshold=BINARIZE_THRESHOLD, inclusive=True):
    scaled = np.asarray(raw, dtype=np.float64) / 255.0
    hit = scaled >= threshold if inclusive else scaled > threshold
    return hit.astype(np.float64)

# Integer labels (S,) to a C x S one-hot matrix.
def one_hot(labels, n_classes=None):
    labels = np.asarray(labels, dtype=np.int64).ravel()
    n_classes = int(labels.max()) + 1 if n_classes is None else int(n_classes)
    Y = np.zeros((n_classes, labels.size))
    Y[labels, np.arange(labels.size)] = 1.0
    return Y

# Load images (and optional labels) into a binarized DatasetSplit.
def load_dataset(images, labels=None, threshold=BINARIZE_THRESHOLD, inclusive=True, limit=None, n_classes=None):
    if str(images).endswith(".csv"):
        raw, label_values = load_csv(images)
    else:
        array, dims = load_idx(images)
        raw = array.reshape(dims[0], -1)
        label_values = None
    if labels is not None:
        label_array, _ = load_idx(labels)
        label_values = label_array.ravel()
    if limit is not None:
        raw = raw[:limit]
        label_values = None if label_values is None else label_values[:limit]
    X = binarize(raw, threshold, inclusive).T
    Y = None
    if label_values is not None:
        if len(label_values) != X.shape[1]:
            raise ValueError(f"{len(label_values)} labels for {X.shape[1]} images.")
        Y = one_hot(label_values, n_classes)
    names = {"images": str(images), "labels": None if labels is None else str(labels),
             "threshold": threshold, "inclusive": inclusive, "limit": limit}
    log.info("Loaded %d records of dimension %d from %s.", X.shape[1], X.shape[0], images)
    return DatasetSplit(X=X, Y=Y, names=names)


# ---------------------------------------------------------------------
#                         Splitting and batching
# ---------------------------------------------------------------------

# Seeded disjoint split into (train', val) with n_val validation records.
def split_train_val(split, n_val, seed):
    S = split.n_records
    if n_val >= S:
        raise ValueError(f"n_val ({n_val}) must be smaller than the number of records ({S}).")
    if n_val <= 0:
        return split, split.subset(np.arange(0))
    order = np.random.default_rng(seed).permutation(S)
    return split.subset(np.sort(order[n_val:])), split.subset(np.sort(order[:n_val]))

# Yield (column indices, X batch) for one epoch; every record exactly once.
def minibatch_iterator(split, batch_size, seed, epoch):
    if batch_size < 1:
        raise ValueError(f"batch_size must be at least 1, got {batch_size}.")
    order = np.random.default_rng([seed, epoch]).permutation(split.n_records)
    for start in range(0, order.size, batch_size):
        idx = order[start:start + batch_size]
        yield idx, split.X[:, idx]


# ---------------------------------------------------------------------
#                         Masks
# ---------------------------------------------------------------------

def _image_side(D):
    side = int(round(np.sqrt(D)))
    if side * side != D:
        raise ValueError(f"Record dimension {D} is not a perfect square.")
    return side

# Observe the left part of every image; mask the right side/2 pixel columns.
def right_half_mask(D, S):
    side = _image_side(D)
    image = np.ones((side, side))
    image[:, side - side // 2:] = 0.0
    return MaskSpec(kind="right-half", M=np.repeat(image.reshape(D, 1), S, axis=1))

def build_mask(kind, D, S, custom=None):
    if kind == "right-half":
        return right_half_mask(D, S)
    if kind == "all-ones":
        return MaskSpec(kind=kind, M=np.ones((D, S)))
    if kind == "custom":
        if custom is None:
            raise ValueError("A custom mask needs an explicit matrix.")
        M = np.broadcast_to(np.asarray(custom, dtype=np.float64).reshape(D, -1), (D, S)).copy()
        if not np.all((M == 0) | (M == 1)):
            raise ValueError("Mask entries must be 0 or 1.")
        return MaskSpec(kind=kind, M=M)
    raise ValueError(f"Unknown mask kind {kind!r}.")


# ---------------------------------------------------------------------
#                         Image grids
# ---------------------------------------------------------------------

# Tile D x n images (values in [0, 1]) into one binary PGM (P5, maxval 255).
def write_pgm_grid(images, rows, cols, path):
    images = np.asarray(images, dtype=np.float64)
    if images.ndim == 1:
        images = images.reshape(-1, 1)
    D, n = images.shape
    if n > rows * cols:
        raise ValueError(f"{n} images do not fit a {rows} x {cols} grid.")
    side = _image_side(D)
    canvas = np.zeros((rows * side, cols * side), dtype=np.uint8)
    pixels = np.rint(np.clip(images, 0.0, 1.0) * 255.0).astype(np.uint8)
    for i in range(n):
        r, c = divmod(i, cols)
        canvas[r * side:(r + 1) * side, c * side:(c + 1) * side] = pixels[:, i].reshape(side, side)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(f"P5\n{canvas.shape[1]} {canvas.shape[0]}\n255\n".encode("ascii"))
        f.write(canvas.tobytes())
    return path

# Read back a P5 PGM written by write_pgm_grid (height x width uint8).
def read_pgm(path):
    data = Path(path).read_bytes()
    parts = data.split(b"\n", 3)
    if parts[0] != b"P5":
        raise ValueError(f"{path} is not a binary PGM.")
    width, height = (int(v) for v in parts[1].split())
    return np.frombuffer(parts[3], dtype=np.uint8, count=width * height).reshape(height, width)
