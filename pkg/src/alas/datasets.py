"""Datasets: sparse classification text parsing, a binary cache format, and
synthetic teacher-network data generation."""

from __future__ import annotations

import io
import os
import struct
from dataclasses import dataclass

import numpy as np


class DatasetParseError(ValueError):
    pass


@dataclass(frozen=True)
class Dataset:
    """Dense feature matrix (N x d) with per-row labels and a provenance tag.

    Labels are {-1, +1} for classification sources or real-valued for
    regression-style targets.
    """

    features: np.ndarray
    labels: np.ndarray
    provenance: str = ""

    def __post_init__(self):
        feats = np.ascontiguousarray(self.features, dtype=np.float64)
        labs = np.ascontiguousarray(self.labels, dtype=np.float64)
        if feats.ndim != 2 or labs.ndim != 1 or feats.shape[0] != labs.shape[0]:
            raise ValueError("features must be N x d with N matching labels")
        if feats.shape[0] < 1 or feats.shape[1] < 1:
            raise ValueError("dataset must have at least one row and one feature")
        if not (np.isfinite(feats).all() and np.isfinite(labs).all()):
            raise ValueError("dataset contains non-finite entries")
        feats.setflags(write=False)
        labs.setflags(write=False)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labs)

    @property
    def N(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.provenance == other.provenance
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.labels, other.labels)
        )


def libsvm_parse(stream, num_features: int | None = None,
                 provenance: str = "libsvm") -> Dataset:
    """Parse the sparse "label index:value ..." text format (1-based indices,
    strictly increasing within a line).  Absent indices are zero-filled;
    {0, 1} label files are mapped to {-1, +1} (0 -> -1).
    """
    if isinstance(stream, (str, bytes)):
        stream = io.StringIO(stream if isinstance(stream, str) else stream.decode())
    rows: list[list[tuple[int, float]]] = []
    labels: list[float] = []
    max_index = 0
    for lineno, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line:
            continue
        tokens = line.split()
        try:
            label = float(tokens[0])
        except ValueError:
            raise DatasetParseError(f"line {lineno}: bad label {tokens[0]!r}") from None
        entries: list[tuple[int, float]] = []
        prev = 0
        for token in tokens[1:]:
            idx_str, _, val_str = token.partition(":")
            try:
                idx = int(idx_str)
                val = float(val_str)
            except ValueError:
                raise DatasetParseError(f"line {lineno}: bad token {token!r}") from None
            if idx < 1:
                raise DatasetParseError(f"line {lineno}: index {idx} below 1")
            if idx <= prev:
                raise DatasetParseError(
                    f"line {lineno}: indices must be strictly increasing (got {idx} after {prev})"
                )
            prev = idx
            entries.append((idx, val))
        max_index = max(max_index, prev)
        labels.append(label)
        rows.append(entries)
    if not rows:
        raise DatasetParseError("no data lines found")
    d = num_features if num_features is not None else max_index
    if d < max_index:
        raise DatasetParseError(f"num_features={d} below max feature index {max_index}")
    if d < 1:
        raise DatasetParseError("could not infer a positive feature count")
    features = np.zeros((len(rows), d))
    for r, entries in enumerate(rows):
        for idx, val in entries:
            features[r, idx - 1] = val
    y = np.asarray(labels)
    if set(np.unique(y)) <= {0.0, 1.0}:
        y = np.where(y == 0.0, -1.0, 1.0)
    return Dataset(features, y, provenance)


_CACHE_MAGIC = b"ALASDATA"
_CACHE_VERSION = 1


def save_dataset(dataset: Dataset, path) -> None:
    """Write the versioned binary cache (header + raw float64 arrays).

    The write is atomic (temp file + rename) and round-trips bit-exactly.
    """
    tag = dataset.provenance.encode("utf-8")
    header = _CACHE_MAGIC + struct.pack(
        "<IQQI", _CACHE_VERSION, dataset.N, dataset.d, len(tag)
    )
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(header)
        fh.write(tag)
        fh.write(np.ascontiguousarray(dataset.features).tobytes())
        fh.write(np.ascontiguousarray(dataset.labels).tobytes())
    os.replace(tmp, path)


def load_dataset(path) -> Dataset:
    with open(path, "rb") as fh:
        magic = fh.read(len(_CACHE_MAGIC))
        if magic != _CACHE_MAGIC:
            raise DatasetParseError(f"{path}: not a dataset cache file")
        version, n, d, tag_len = struct.unpack("<IQQI", fh.read(24))
        if version != _CACHE_VERSION:
            raise DatasetParseError(f"{path}: unsupported cache version {version}")
        tag = fh.read(tag_len).decode("utf-8")
        features = np.frombuffer(fh.read(n * d * 8), dtype=np.float64).reshape(n, d)
        labels = np.frombuffer(fh.read(n * 8), dtype=np.float64)
    return Dataset(features, labels, tag)


@dataclass(frozen=True)
class TeacherSpec:
    """Synthetic regression task: a fixed random tanh network labels points
    drawn uniformly from (0,1)^d.

    ``layer_sizes`` runs input..output, e.g. (2, 4, 2, 1).  Weights and
    biases are drawn N(0, weight_std); pass sqrt(v) to read the scale as a
    variance instead.  Generation is stream-stable: growing n_points extends
    the point set without perturbing earlier rows.
    """

    layer_sizes: tuple[int, ...]
    n_points: int
    seed: int
    weight_std: float = 3.0

    def __post_init__(self):
        object.__setattr__(self, "layer_sizes", tuple(int(s) for s in self.layer_sizes))
        if len(self.layer_sizes) < 2 or min(self.layer_sizes) < 1:
            raise ValueError("layer_sizes needs at least input and output, all positive")
        if self.layer_sizes[-1] != 1:
            raise ValueError("teacher networks must have a single output")
        if self.n_points < 1:
            raise ValueError("n_points must be positive")


def teacher_weights(spec: TeacherSpec) -> list[tuple[np.ndarray, np.ndarray]]:
    """The (W, b) pairs of the teacher network (test hooks may zero them)."""
    rng = np.random.default_rng([spec.seed, 0])
    layers = []
    for fan_in, fan_out in zip(spec.layer_sizes[:-1], spec.layer_sizes[1:]):
        W = rng.normal(0.0, spec.weight_std, size=(fan_out, fan_in))
        b = rng.normal(0.0, spec.weight_std, size=fan_out)
        layers.append((W, b))
    return layers


def teacher_forward(layers, X: np.ndarray) -> np.ndarray:
    a = X
    for W, b in layers:
        a = np.tanh(a @ W.T + b)
    return a[:, 0]


def teacher_generate(spec: TeacherSpec, layers=None) -> Dataset:
    """Generate the teacher dataset: inputs uniform on (0,1)^d, labels the
    teacher's tanh outputs (hence inside (-1, 1))."""
    if layers is None:
        layers = teacher_weights(spec)
    rng = np.random.default_rng([spec.seed, 1])
    X = rng.random((spec.n_points, spec.layer_sizes[0]))
    y = teacher_forward(layers, X)
    arch = "-".join(str(s) for s in spec.layer_sizes)
    return Dataset(X, y, provenance=f"teacher[{arch}]seed{spec.seed}")


# Default hidden widths for the deeper 4-input synthetic task; explicit
# widths in TeacherSpec override this.
NN2_DEFAULT_LAYERS = (4, 4, 4, 4, 1)
