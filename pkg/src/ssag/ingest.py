"""Dataset acquisition: IDX binary parsing, delimited text, synthetic blobs.

The IDX reader is byte-order exact (big-endian magic and dimension words,
magic 2051 for image files and 2049 for label files).  The text format is
one sample per line, comma-separated features with the label last, after a
header line ``p=<int>,C=<int>,labels=<int|real>``; floats are written with
full round-trip precision.
"""

from __future__ import annotations

import gzip
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import Dataset, partition_by_class, single_cell_partition
from .errors import FormatError

IDX_IMAGE_MAGIC = 2051
IDX_LABEL_MAGIC = 2049


def _read_idx_payload(path, expected_magic: int, n_dims: int) -> tuple[tuple[int, ...], np.ndarray]:
    raw = Path(path).read_bytes()
    if raw[:2] == b"\x1f\x8b":  # gzip-compressed IDX file
        raw = gzip.decompress(raw)
    header_len = 4 + 4 * n_dims
    if len(raw) < header_len:
        raise FormatError(f"{path}: truncated header ({len(raw)} bytes)")
    magic = int.from_bytes(raw[:4], "big")
    if magic != expected_magic:
        raise FormatError(f"{path}: magic {magic} does not match expected {expected_magic}")
    dims = tuple(int.from_bytes(raw[4 + 4 * i:8 + 4 * i], "big") for i in range(n_dims))
    expected_len = int(np.prod(dims))
    payload = raw[header_len:]
    if len(payload) != expected_len:
        raise FormatError(f"{path}: payload holds {len(payload)} bytes, "
                          f"dimensions {dims} require {expected_len}")
    return dims, np.frombuffer(payload, dtype=np.uint8)


def read_idx(image_path, label_path, *, add_bias: bool = False,
             limit: int | None = None) -> Dataset:
    """Parse an IDX image/label file pair into a classification dataset.

    Pixels are scaled to [0, 1] by /255 and images flattened row-major.
    Labels must be digits 0-9; the partition always has 10 cells.  ``limit``
    keeps only the first ``limit`` samples.  ``add_bias`` appends a constant
    1 feature column.
    """
    (n_img, rows, cols), pixels = _read_idx_payload(image_path, IDX_IMAGE_MAGIC, 3)
    (n_lab,), labels = _read_idx_payload(label_path, IDX_LABEL_MAGIC, 1)
    if n_img != n_lab:
        raise FormatError(f"image count {n_img} does not match label count {n_lab}")
    if labels.size and labels.max() > 9:
        raise FormatError(f"label byte {int(labels.max())} outside the digit range 0-9")
    features = pixels.astype(np.float64).reshape(n_img, rows * cols) / 255.0
    labels = labels.astype(np.int64)
    if limit is not None:
        features = features[:limit]
        labels = labels[:limit]
    if add_bias:
        features = np.hstack([features, np.ones((features.shape[0], 1))])
    # one partition cell per digit actually present (all ten for real MNIST);
    # absent digits cannot form drawable strata
    cells = tuple(np.flatnonzero(labels == d) for d in np.unique(labels))
    return Dataset(features, labels, cells)


def write_idx(image_path, label_path, images: np.ndarray, labels: np.ndarray) -> None:
    """Write a uint8 image stack (n, rows, cols) and labels as an IDX pair."""
    images = np.ascontiguousarray(images, dtype=np.uint8)
    labels = np.ascontiguousarray(labels, dtype=np.uint8)
    if images.ndim != 3 or labels.ndim != 1 or images.shape[0] != labels.shape[0]:
        raise ValueError("need images of shape (n, rows, cols) and matching labels")
    with open(image_path, "wb") as fh:
        fh.write(IDX_IMAGE_MAGIC.to_bytes(4, "big"))
        for d in images.shape:
            fh.write(int(d).to_bytes(4, "big"))
        fh.write(images.tobytes())
    with open(label_path, "wb") as fh:
        fh.write(IDX_LABEL_MAGIC.to_bytes(4, "big"))
        fh.write(int(labels.shape[0]).to_bytes(4, "big"))
        fh.write(labels.tobytes())


@dataclass(frozen=True, eq=False)
class SyntheticSpec:
    """Gaussian class blobs: one mean vector per class, shared stddev."""

    means: np.ndarray       # (C, p)
    counts: tuple[int, ...]
    stddev: float
    seed: int = 0

    def __post_init__(self):
        means = np.asarray(self.means, dtype=np.float64)
        if means.ndim != 2:
            raise ValueError("means must be a (C, p) matrix")
        if len(self.counts) != means.shape[0]:
            raise ValueError("need one sample count per class mean")
        if any(c < 1 for c in self.counts):
            raise ValueError("every class needs at least one sample")
        if self.stddev < 0.0:
            raise ValueError("stddev must be >= 0")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))


def gen_synthetic(spec: SyntheticSpec) -> Dataset:
    """Deterministic Gaussian blobs around the per-class means.

    Samples are laid out class by class (class 0 block first); the partition
    is derived from the generating class.
    """
    labels = np.repeat(np.arange(len(spec.counts)), spec.counts)
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    noise = rng.standard_normal((labels.size, spec.means.shape[1]))
    features = spec.means[labels] + spec.stddev * noise
    return Dataset.from_class_labels(features, labels, num_classes=len(spec.counts))


def write_text(dataset: Dataset, path) -> None:
    """Write a dataset in the delimited text format (UTF-8, LF endings)."""
    labels_int = np.issubdtype(dataset.labels.dtype, np.integer)
    lines = [f"p={dataset.n_features},C={dataset.n_classes},"
             f"labels={'int' if labels_int else 'real'}"]
    for i in range(dataset.n_samples):
        feats = ",".join(repr(float(v)) for v in dataset.features[i])
        label = repr(int(dataset.labels[i])) if labels_int else repr(float(dataset.labels[i]))
        lines.append(f"{feats},{label}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def read_text(path, *, add_bias: bool = False) -> Dataset:
    """Load a dataset from the delimited text format."""
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise FormatError(f"{path}: empty file")
    try:
        header = dict(part.split("=", 1) for part in lines[0].split(","))
        p = int(header["p"])
        C = int(header["C"])
        label_kind = header.get("labels", "int")
    except (KeyError, ValueError) as exc:
        raise FormatError(f"{path}: malformed header {lines[0]!r}") from exc
    rows = []
    labels = []
    for ln_no, ln in enumerate(lines[1:], start=2):
        cells = ln.split(",")
        if len(cells) != p + 1:
            raise FormatError(f"{path}:{ln_no}: expected {p + 1} columns, got {len(cells)}")
        rows.append([float(v) for v in cells[:p]])
        labels.append(float(cells[p]))
    features = np.asarray(rows, dtype=np.float64)
    if features.size == 0:
        raise FormatError(f"{path}: no samples")
    if add_bias:
        features = np.hstack([features, np.ones((features.shape[0], 1))])
    if label_kind == "int":
        lab = np.asarray(labels, dtype=np.int64)
        return Dataset(features, lab, partition_by_class(lab, num_classes=C))
    return Dataset(features, np.asarray(labels, dtype=np.float64),
                   single_cell_partition(features.shape[0]))
