"""Dataset loading, normalization, controls, and on-disk formats.

Three formats are understood:

* IDX — the standard big-endian MNIST distribution layout (image files start
  with magic 0x00000803, label files with 0x00000801). Gzipped files are
  detected and decompressed transparently.
* OCR letters — plain text, one record per line: a lowercase letter followed
  by 128 whitespace-separated binary digits (the 16x8 pixel raster). This
  layout is fixed here because the upstream data ships in several ad-hoc
  packagings.
* Canonical dataset — this package's own little-endian binary format,
  versioned, documented in :func:`save_dataset`.

All randomized operations take an explicit integer seed and are pure
functions of (input, seed). Dataset values are immutable after construction.
"""

import dataclasses
import gzip
import struct
from pathlib import Path

import numpy as np

from .errors import ConsistencyError, DataError, FormatError
from .seeding import rng_for

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801

CANONICAL_MAGIC = b"LLDS"
CANONICAL_VERSION = 1

SHUFFLE_MODES = ("global_permutation", "per_image_permutation", "pixel_resample")


@dataclasses.dataclass(frozen=True)
class Dataset:
    """An M x N sample matrix with values in [0, 1] plus optional labels."""

    samples: np.ndarray
    labels: np.ndarray | None = None
    name: str = "dataset"
    seed_provenance: int | None = None

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float32)
        if samples.ndim != 2 or samples.shape[0] < 1 or samples.shape[1] < 1:
            raise DataError(f"samples must be a non-empty 2-d matrix, got shape {samples.shape}")
        if not np.isfinite(samples).all():
            raise DataError("samples contain non-finite values")
        if samples.min() < 0.0 or samples.max() > 1.0:
            raise DataError("sample values must lie in [0, 1]")
        object.__setattr__(self, "samples", samples)
        if self.labels is not None:
            labels = np.asarray(self.labels)
            if not np.issubdtype(labels.dtype, np.integer):
                raise DataError(f"labels must be integers, got dtype {labels.dtype}")
            if labels.shape != (samples.shape[0],):
                raise ConsistencyError(
                    f"label count {labels.shape} does not match sample count {samples.shape[0]}"
                )
            if labels.min() < 0 or labels.max() > 255:
                raise DataError("labels must be small non-negative integers (0..255)")
            object.__setattr__(self, "labels", labels.astype(np.uint8))

    @property
    def n_samples(self):
        return self.samples.shape[0]

    @property
    def n_features(self):
        return self.samples.shape[1]

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


@dataclasses.dataclass(frozen=True)
class SplitSpec:
    """Requested sizes for a train/validation/test partition."""

    train_count: int
    validation_count: int
    test_count: int

    def __post_init__(self):
        for field in ("train_count", "validation_count", "test_count"):
            if getattr(self, field) < 0:
                raise DataError(f"{field} must be non-negative")

    @property
    def total(self):
        return self.train_count + self.validation_count + self.test_count


def _read_binary(path):
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    raw = path.read_bytes()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return raw


def load_idx(path_images, path_labels=None, name=None):
    """Load IDX image (and optionally label) files into a Dataset.

    Pixel bytes are scaled by 1/255 into [0, 1]. Raises FormatError on a bad
    magic number, DataError on truncated payloads, and ConsistencyError when
    the label count disagrees with the image count.
    """
    raw = _read_binary(path_images)
    if len(raw) < 16:
        raise FormatError(f"{path_images}: too short for an IDX image header")
    magic, count, rows, cols = struct.unpack(">IIII", raw[:16])
    if magic != IDX_IMAGE_MAGIC:
        raise FormatError(f"{path_images}: bad IDX image magic 0x{magic:08x}")
    payload = raw[16:]
    expected = count * rows * cols
    if len(payload) < expected:
        raise DataError(
            f"{path_images}: truncated payload ({len(payload)} bytes, expected {expected})"
        )
    pixels = np.frombuffer(payload[:expected], dtype=np.uint8)
    samples = (pixels.astype(np.float32) / 255.0).reshape(count, rows * cols)

    labels = None
    if path_labels is not None:
        raw = _read_binary(path_labels)
        if len(raw) < 8:
            raise FormatError(f"{path_labels}: too short for an IDX label header")
        magic, label_count = struct.unpack(">II", raw[:8])
        if magic != IDX_LABEL_MAGIC:
            raise FormatError(f"{path_labels}: bad IDX label magic 0x{magic:08x}")
        if label_count != count:
            raise ConsistencyError(
                f"label count {label_count} does not match image count {count}"
            )
        payload = raw[8:]
        if len(payload) < label_count:
            raise DataError(f"{path_labels}: truncated payload")
        labels = np.frombuffer(payload[:label_count], dtype=np.uint8).copy()

    if name is None:
        name = Path(path_images).name.split(".")[0]
    return Dataset(samples=samples, labels=labels, name=name)


def load_ocr(path, name=None):
    """Load the 16x8 lowercase-letter dataset (one text record per line).

    Each record is a letter a..z followed by 128 binary digits. Returns a
    Dataset with N=128 binary-valued samples and labels 0..25.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    rows = []
    labels = []
    with open(path, "r", encoding="ascii") as f:
        for lineno, line in enumerate(f, start=1):
            fields = line.split()
            if not fields:
                continue
            if len(fields) != 129:
                raise FormatError(
                    f"{path}:{lineno}: expected a letter plus 128 pixels, got {len(fields)} fields"
                )
            letter = fields[0]
            if len(letter) != 1 or not ("a" <= letter <= "z"):
                raise FormatError(f"{path}:{lineno}: bad letter label {letter!r}")
            try:
                pixels = [int(v) for v in fields[1:]]
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: non-integer pixel") from exc
            if any(v not in (0, 1) for v in pixels):
                raise FormatError(f"{path}:{lineno}: pixels must be 0 or 1")
            rows.append(pixels)
            labels.append(ord(letter) - ord("a"))
    if not rows:
        raise FormatError(f"{path}: no records")
    samples = np.asarray(rows, dtype=np.float32)
    if name is None:
        name = path.name.split(".")[0]
    return Dataset(samples=samples, labels=np.asarray(labels, dtype=np.uint8), name=name)


def shuffle_control(dataset, mode, seed):
    """Destroy image structure while keeping per-image pixel statistics.

    ``global_permutation`` applies one fixed permutation of the pixel
    positions to every image; ``per_image_permutation`` draws an independent
    permutation per image; ``pixel_resample`` redraws every pixel with
    replacement from that image's own pixel values. The permutation modes
    preserve each image's pixel-value multiset exactly; labels are always
    carried through unchanged.
    """
    if mode not in SHUFFLE_MODES:
        raise ValueError(f"unknown shuffle mode {mode!r}, expected one of {SHUFFLE_MODES}")
    rng = rng_for(seed, "shuffle_control", mode)
    x = dataset.samples
    m, n = x.shape
    if mode == "global_permutation":
        perm = rng.permutation(n)
        shuffled = x[:, perm]
    elif mode == "per_image_permutation":
        order = rng.random((m, n)).argsort(axis=1)
        shuffled = np.take_along_axis(x, order, axis=1)
    else:  # pixel_resample
        idx = rng.integers(0, n, size=(m, n))
        shuffled = np.take_along_axis(x, idx, axis=1)
    return Dataset(
        samples=shuffled,
        labels=dataset.labels,
        name=f"{dataset.name}/shuffled-{mode}",
        seed_provenance=seed,
    )


def split(dataset, spec, seed):
    """Partition a dataset into disjoint (train, validation, test) subsets.

    Membership is decided by one seeded permutation of the sample indices;
    labels travel with their samples.
    """
    m = dataset.n_samples
    if spec.total > m:
        raise ValueError(f"split sizes sum to {spec.total} but dataset has {m} samples")
    perm = rng_for(seed, "split").permutation(m)
    bounds = np.cumsum([0, spec.train_count, spec.validation_count, spec.test_count])
    parts = []
    for part_name, lo, hi in zip(("train", "validation", "test"), bounds[:-1], bounds[1:]):
        idx = perm[lo:hi]
        labels = dataset.labels[idx] if dataset.labels is not None else None
        if len(idx) == 0:
            parts.append(None)
            continue
        parts.append(
            Dataset(
                samples=dataset.samples[idx],
                labels=labels,
                name=f"{dataset.name}/{part_name}",
                seed_provenance=seed,
            )
        )
    return tuple(parts)


def save_dataset(path, dataset):
    """Write a dataset in the canonical binary format.

    Layout (all integers little-endian):

    ====================  =====================================
    bytes 0..3            magic ``LLDS``
    u32                   format version (currently 1)
    u32, u32              M, N
    u8                    has_labels (0 or 1)
    u8                    value encoding (1 = float32 in [0, 1])
    u8                    has_seed_provenance (0 or 1)
    u8                    reserved (0)
    i64                   seed_provenance (0 when absent)
    u16 + bytes           name length, UTF-8 name
    M*N float32           samples, row-major
    M bytes               labels (uint8, only when has_labels)
    ====================  =====================================
    """
    name_bytes = dataset.name.encode("utf-8")
    has_labels = dataset.labels is not None
    has_seed = dataset.seed_provenance is not None
    header = CANONICAL_MAGIC + struct.pack(
        "<IIIBBBBqH",
        CANONICAL_VERSION,
        dataset.n_samples,
        dataset.n_features,
        int(has_labels),
        1,
        int(has_seed),
        0,
        dataset.seed_provenance if has_seed else 0,
        len(name_bytes),
    )
    with open(path, "wb") as f:
        f.write(header)
        f.write(name_bytes)
        f.write(np.ascontiguousarray(dataset.samples, dtype="<f4").tobytes())
        if has_labels:
            f.write(dataset.labels.astype(np.uint8).tobytes())


def load_dataset(path):
    """Read a dataset written by :func:`save_dataset`."""
    raw = _read_binary(path)
    if raw[:4] != CANONICAL_MAGIC:
        raise FormatError(f"{path}: not a canonical dataset file")
    fixed = struct.calcsize("<IIIBBBBqH")
    version, m, n, has_labels, encoding, has_seed, _, seed, name_len = struct.unpack(
        "<IIIBBBBqH", raw[4 : 4 + fixed]
    )
    if version != CANONICAL_VERSION:
        raise FormatError(f"{path}: unsupported dataset format version {version}")
    if encoding != 1:
        raise FormatError(f"{path}: unknown value encoding {encoding}")
    offset = 4 + fixed
    name = raw[offset : offset + name_len].decode("utf-8")
    offset += name_len
    n_payload = m * n * 4
    if len(raw) < offset + n_payload + (m if has_labels else 0):
        raise DataError(f"{path}: truncated payload")
    samples = np.frombuffer(raw[offset : offset + n_payload], dtype="<f4").reshape(m, n)
    offset += n_payload
    labels = None
    if has_labels:
        labels = np.frombuffer(raw[offset : offset + m], dtype=np.uint8).copy()
    return Dataset(
        samples=samples.copy(),
        labels=labels,
        name=name,
        seed_provenance=seed if has_seed else None,
    )
