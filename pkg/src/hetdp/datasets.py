"""Dataset loading, label-ratio sampling, and synthetic generation.

Real datasets come from two binary formats: big-endian magic-tagged image and
label files (28x28 grayscale images flattened to 784 coordinates) and fixed
record-length RGB image files (3073- or 3074-byte records flattened to 3072
coordinates). Pixels are normalized by 255 into [0, 1].

Heterogeneity of a working subset is controlled by stratified sampling with
explicit per-label ratios; a deterministic synthetic generator provides
label-clustered data for dataset-free runs.
"""

from __future__ import annotations

import enum
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from hetdp.measures import VectorDataset

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801
CIFAR10_RECORD = 3073  # 1 label byte + 32*32*3 pixels
CIFAR100_RECORD = 3074  # coarse + fine label bytes + 32*32*3 pixels


class DatasetFormatError(ValueError):
    """A data file violated its binary format; carries path and byte offset."""

    def __init__(self, message: str, *, path: str | Path | None = None, offset: int | None = None):
        detail = message
        if path is not None:
            detail += f" in {path}"
        if offset is not None:
            detail += f" at offset {offset}"
        super().__init__(detail)
        self.path = str(path) if path is not None else None
        self.offset = offset


class SampleCapacityError(RuntimeError):
    """A stratified sample asked for more records of a label than exist."""


class DataFormat(enum.Enum):
    IDX_IMAGES = "idx_images"
    CIFAR10_BIN = "cifar10_bin"
    CIFAR100_BIN = "cifar100_bin"
    SYNTHETIC = "synthetic"


class LabelScheme(enum.Enum):
    """Whether labels are used as stored or bucketed from coarse pairs."""

    FINE = "fine"
    COARSE_BUCKETED = "coarse_bucketed"


@dataclass(frozen=True)
class HeterogeneityProfile:
    """Per-label-bucket sampling ratios plus the sample fraction.

    ratios[i] is the relative share of bucket i; buckets map to the
    label_count smallest labels in ascending order.
    """

    ratios: tuple[int, ...]
    label_count: int = 0
    sample_fraction: float = 0.02

    def __post_init__(self) -> None:
        if self.label_count == 0:
            object.__setattr__(self, "label_count", len(self.ratios))
        if self.label_count not in (2, 5, 10):
            raise ValueError(f"label_count must be one of 2, 5, 10, got {self.label_count}")
        if len(self.ratios) != self.label_count:
            raise ValueError(
                f"need one ratio per label bucket: {len(self.ratios)} ratios for "
                f"{self.label_count} buckets"
            )
        if any(int(r) != r or r < 1 for r in self.ratios):
            raise ValueError(f"ratios must be positive integers, got {self.ratios!r}")
        if not 0.0 < self.sample_fraction <= 1.0:
            raise ValueError(f"sample fraction must lie in (0, 1], got {self.sample_fraction!r}")


@dataclass(frozen=True)
class DatasetDescriptor:
    """Recipe for obtaining one VectorDataset; `name` keys result rows.

    File-backed formats list their paths (images then labels for the
    magic-tagged format; one or more batch files for the fixed-record
    formats). The synthetic format ignores paths and uses the shape fields.
    A declared d is validated against the loaded data. The canonical real
    datasets have d=784 (28x28 grayscale) and d=3072 (32x32 RGB).
    """

    format: DataFormat
    name: str
    paths: tuple[str, ...] = ()
    d: int | None = None
    label_scheme: LabelScheme = LabelScheme.FINE
    synth_n: int = 0
    heterogeneity: float = 0.0
    synth_seed: int = 0

    def __post_init__(self) -> None:
        if self.format is DataFormat.CIFAR100_BIN:
            if self.label_scheme is not LabelScheme.COARSE_BUCKETED:
                raise ValueError("the 3074-byte record format always buckets coarse labels")
        elif self.label_scheme is not LabelScheme.FINE:
            raise ValueError(f"{self.format.value} stores fine labels only")
        if self.format is DataFormat.SYNTHETIC:
            if self.synth_n < 2 or not self.d or self.d < 1:
                raise ValueError("synthetic descriptor needs synth_n >= 2 and d >= 1")
        elif self.format is DataFormat.IDX_IMAGES:
            if len(self.paths) != 2:
                raise ValueError("image format needs an images path and a labels path")
        elif not self.paths:
            raise ValueError(f"{self.format.value} descriptor needs at least one path")


def load_dataset(desc: DatasetDescriptor) -> VectorDataset:
    """Materialize a descriptor into vectors and labels.

    Raises:
        DatasetFormatError: malformed files, or loaded width differing from
            a declared d.
    """
    if desc.format is DataFormat.SYNTHETIC:
        data = synthetic_dataset(desc.synth_n, desc.d, desc.heterogeneity, desc.synth_seed)
    elif desc.format is DataFormat.IDX_IMAGES:
        data = load_idx(desc.paths[0], desc.paths[1])
    elif desc.format is DataFormat.CIFAR10_BIN:
        data = load_cifar(list(desc.paths), CifarVariant.TEN)
    else:
        data = load_cifar(list(desc.paths), CifarVariant.HUNDRED)
    if desc.d is not None and data.d != desc.d:
        raise DatasetFormatError(
            f"descriptor {desc.name} declares d={desc.d} but the data has d={data.d}"
        )
    return data


#: The six canonical sampling profiles: a balanced and a skewed ratio at each
#: of 10, 5 and 2 label buckets.
CANONICAL_PROFILES: dict[str, HeterogeneityProfile] = {
    "uniform-10": HeterogeneityProfile((1,) * 10, 10),
    "skewed-10": HeterogeneityProfile((91,) + (1,) * 9, 10),
    "uniform-5": HeterogeneityProfile((1,) * 5, 5),
    "skewed-5": HeterogeneityProfile((96, 1, 1, 1, 1), 5),
    "uniform-2": HeterogeneityProfile((1, 1), 2),
    "skewed-2": HeterogeneityProfile((99, 1), 2),
}


def _read_be_u32(buf: bytes, offset: int, path: str | Path, what: str) -> int:
    if len(buf) < offset + 4:
        raise DatasetFormatError(f"truncated while reading {what}", path=path, offset=len(buf))
    return struct.unpack_from(">I", buf, offset)[0]


def load_idx(images_path: str | Path, labels_path: str | Path) -> VectorDataset:
    """Parse big-endian magic-tagged image/label files into a dataset.

    Image files carry magic 0x00000803 then count, rows, cols and unsigned
    pixel bytes; label files carry magic 0x00000801 then count and label
    bytes. Pixels are divided by 255 and flattened row-major.

    Raises:
        DatasetFormatError: wrong magic, truncation, or image/label count
            mismatch, with the offending byte offset.
    """
    image_buf = Path(images_path).read_bytes()
    magic = _read_be_u32(image_buf, 0, images_path, "image magic")
    if magic != IDX_IMAGE_MAGIC:
        raise DatasetFormatError(
            f"bad image magic 0x{magic:08x}, expected 0x{IDX_IMAGE_MAGIC:08x}",
            path=images_path,
            offset=0,
        )
    count = _read_be_u32(image_buf, 4, images_path, "image count")
    rows = _read_be_u32(image_buf, 8, images_path, "row count")
    cols = _read_be_u32(image_buf, 12, images_path, "column count")
    pixel_bytes = count * rows * cols
    if len(image_buf) < 16 + pixel_bytes:
        raise DatasetFormatError(
            f"truncated pixel data: need {pixel_bytes} bytes for "
            f"{count} images of {rows}x{cols}",
            path=images_path,
            offset=len(image_buf),
        )
    pixels = np.frombuffer(image_buf, dtype=np.uint8, count=pixel_bytes, offset=16)
    vectors = pixels.reshape(count, rows * cols).astype(np.float64) / 255.0

    label_buf = Path(labels_path).read_bytes()
    label_magic = _read_be_u32(label_buf, 0, labels_path, "label magic")
    if label_magic != IDX_LABEL_MAGIC:
        raise DatasetFormatError(
            f"bad label magic 0x{label_magic:08x}, expected 0x{IDX_LABEL_MAGIC:08x}",
            path=labels_path,
            offset=0,
        )
    label_count = _read_be_u32(label_buf, 4, labels_path, "label count")
    if label_count != count:
        raise DatasetFormatError(
            f"label count {label_count} does not match image count {count}",
            path=labels_path,
            offset=4,
        )
    if len(label_buf) < 8 + label_count:
        raise DatasetFormatError(
            f"truncated label data: need {label_count} bytes",
            path=labels_path,
            offset=len(label_buf),
        )
    labels = np.frombuffer(label_buf, dtype=np.uint8, count=label_count, offset=8)
    return VectorDataset(vectors=vectors, labels=labels.astype(np.int64))


def write_idx(data: VectorDataset, images_path: str | Path, labels_path: str | Path) -> None:
    """Write a dataset as image/label files readable by load_idx.

    Coordinates are quantized to the 1/255 grid; the image file declares the
    d coordinates as one row of d columns. Labels must fit in one byte.
    """
    if data.labels.max(initial=0) > 255:
        raise ValueError("labels above 255 cannot be stored in one byte")
    pixels = np.rint(data.vectors * 255.0).astype(np.uint8)
    with open(images_path, "wb") as fh:
        fh.write(struct.pack(">IIII", IDX_IMAGE_MAGIC, data.n, 1, data.d))
        fh.write(pixels.tobytes())
    with open(labels_path, "wb") as fh:
        fh.write(struct.pack(">II", IDX_LABEL_MAGIC, data.n))
        fh.write(data.labels.astype(np.uint8).tobytes())


class CifarVariant(enum.Enum):
    TEN = "ten"
    HUNDRED = "hundred"


def load_cifar(paths: "list[str | Path]", variant: CifarVariant) -> VectorDataset:
    """Parse fixed-record binary RGB image batches into one dataset.

    Ten-class records are 3073 bytes (label + 3072 pixels); hundred-class
    records are 3074 bytes (coarse label + fine label + 3072 pixels) and are
    relabeled by bucketing coarse labels pairwise: (0,1)->0, (2,3)->1, and so
    on. Pixels keep all 3072 channel values, normalized by 255.

    Raises:
        DatasetFormatError: file length not a whole number of records, or a
            label byte out of range.
    """
    record = CIFAR10_RECORD if variant is CifarVariant.TEN else CIFAR100_RECORD
    all_vectors: list[np.ndarray] = []
    all_labels: list[np.ndarray] = []
    for path in paths:
        buf = Path(path).read_bytes()
        if len(buf) == 0 or len(buf) % record != 0:
            raise DatasetFormatError(
                f"file length {len(buf)} is not a positive multiple of the "
                f"{record}-byte record size",
                path=path,
                offset=len(buf) - (len(buf) % record),
            )
        records = np.frombuffer(buf, dtype=np.uint8).reshape(-1, record)
        if variant is CifarVariant.TEN:
            labels = records[:, 0].astype(np.int64)
            bad = np.nonzero(labels > 9)[0]
            if bad.size:
                raise DatasetFormatError(
                    f"label byte {labels[bad[0]]} out of range 0..9",
                    path=path,
                    offset=int(bad[0]) * record,
                )
            pixels = records[:, 1:]
        else:
            coarse = records[:, 0].astype(np.int64)
            fine = records[:, 1].astype(np.int64)
            bad = np.nonzero(coarse > 19)[0]
            if bad.size:
                raise DatasetFormatError(
                    f"coarse label byte {coarse[bad[0]]} out of range 0..19",
                    path=path,
                    offset=int(bad[0]) * record,
                )
            bad = np.nonzero(fine > 99)[0]
            if bad.size:
                raise DatasetFormatError(
                    f"fine label byte {fine[bad[0]]} out of range 0..99",
                    path=path,
                    offset=int(bad[0]) * record + 1,
                )
            labels = coarse // 2  # pairwise buckets: (0,1)->0, (2,3)->1, ...
            pixels = records[:, 2:]
        all_vectors.append(pixels.astype(np.float64) / 255.0)
        all_labels.append(labels)
    return VectorDataset(vectors=np.vstack(all_vectors), labels=np.concatenate(all_labels))


def write_cifar(data: VectorDataset, path: str | Path, variant: CifarVariant) -> None:
    """Write a dataset as one fixed-record binary batch readable by load_cifar.

    For the hundred-class variant the stored coarse label is 2*label (the
    bucketing's canonical representative) and the fine label is 0.
    """
    if data.d != 3072:
        raise ValueError(f"record format stores 3072 pixel bytes, got d={data.d}")
    pixels = np.rint(data.vectors * 255.0).astype(np.uint8)
    with open(path, "wb") as fh:
        for i in range(data.n):
            if variant is CifarVariant.TEN:
                fh.write(bytes([int(data.labels[i])]))
            else:
                fh.write(bytes([2 * int(data.labels[i]), 0]))
            fh.write(pixels[i].tobytes())


def _allocate(total: int, shares: np.ndarray) -> np.ndarray:
    """Integer allocation of `total` by nonnegative shares.

    Each bucket gets floor(total * share / sum); the remainder goes to
    buckets in descending share order (ties broken by lower index).
    """
    shares = np.asarray(shares, dtype=np.float64)
    exact = total * shares / shares.sum()
    counts = np.floor(exact).astype(np.int64)
    remainder = total - int(counts.sum())
    if remainder > 0:
        order = np.argsort(-shares, kind="stable")
        counts[order[:remainder]] += 1
    return counts


def stratified_sample(
    data: VectorDataset, profile: HeterogeneityProfile, seed: int
) -> VectorDataset:
    """Draw a label-ratio-controlled subset without replacement.

    The total is floor(sample_fraction * n); per-bucket counts follow the
    profile ratios via floor-plus-remainder allocation. Bucket i draws
    uniformly from the rows whose label equals the i-th smallest label
    present. Deterministic given the seed.

    Raises:
        SampleCapacityError: a bucket asks for more rows than its label has.
    """
    total = math.floor(profile.sample_fraction * data.n)
    if total < 1:
        raise ValueError(
            f"sample of {profile.sample_fraction} * {data.n} rows is empty"
        )
    counts = _allocate(total, np.asarray(profile.ratios, dtype=np.float64))
    present = np.unique(data.labels)
    if present.size < profile.label_count:
        raise SampleCapacityError(
            f"profile needs {profile.label_count} label buckets but the data "
            f"has only {present.size} distinct labels"
        )
    rng = np.random.default_rng(seed)
    picked: list[np.ndarray] = []
    for bucket, want in enumerate(counts):
        label = int(present[bucket])
        pool = np.nonzero(data.labels == label)[0]
        if pool.size < want:
            raise SampleCapacityError(
                f"bucket {bucket} (label {label}) needs {int(want)} records "
                f"but only {pool.size} are available"
            )
        picked.append(rng.choice(pool, size=int(want), replace=False))
    index = np.concatenate(picked)
    return VectorDataset(vectors=data.vectors[index], labels=data.labels[index])


# Synthetic generator geometry: ten label clusters sit at distinct base
# levels inside a compact band (multiplicatively shuffled so low labels are
# far apart); each cluster adds its own fixed pattern at a log-spaced
# amplitude (diversifying within-row variances, hence weights) plus flat
# per-row jitter. Raising the heterogeneity knob shrinks the within-row
# scale geometrically and skews cluster sizes.
_CLUSTERS = 10
_LEVEL_LOW, _LEVEL_HIGH = 0.35, 0.65
_AMP_LOW_EXP, _AMP_HIGH_EXP = -2.0, 0.2
_BASE_SCALE = 0.05
_SCALE_DECADES = 2.0
_FLAT_JITTER = 0.6
_JITTER_SHRINK = 0.9
_IMBALANCE_RATIO = 0.55


def synthetic_dataset(n: int, d: int, heterogeneity: float, seed: int) -> VectorDataset:
    """Label-clustered vectors with a tunable heterogeneity level in [0, 1].

    At heterogeneity 0 the clusters are equal-sized and noisy enough to blur
    together (the heterogeneity fraction of the result stays low); toward 1
    the rows flatten onto their cluster levels and cluster sizes skew, so
    inverse-variance weights and the weighted statistics grow sharply. All
    coordinates are clipped to [0, 1]; output is deterministic given the seed.
    """
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")
    if d < 1:
        raise ValueError(f"need d >= 1, got {d}")
    if not 0.0 <= heterogeneity <= 1.0:
        raise ValueError(f"heterogeneity must lie in [0, 1], got {heterogeneity!r}")
    rng = np.random.default_rng(seed)
    k = _CLUSTERS
    shuffle = (7 * np.arange(k)) % k
    levels = _LEVEL_LOW + (_LEVEL_HIGH - _LEVEL_LOW) * (shuffle + 0.5) / k
    amplitudes = 10.0 ** np.linspace(_AMP_LOW_EXP, _AMP_HIGH_EXP, k)
    scale = _BASE_SCALE * 10.0 ** (-_SCALE_DECADES * heterogeneity)
    jitter = _FLAT_JITTER * (1.0 - _JITTER_SHRINK * heterogeneity)
    geometric = _IMBALANCE_RATIO ** np.arange(k)
    shares = (1.0 - heterogeneity) / k + heterogeneity * geometric / geometric.sum()
    counts = _allocate(n, shares)

    patterns = rng.standard_normal((k, d))
    blocks: list[np.ndarray] = []
    labels: list[np.ndarray] = []
    for cluster, count in enumerate(counts):
        if count == 0:
            continue
        noise = rng.standard_normal((count, d))
        rows = levels[cluster] + scale * (
            amplitudes[cluster] * patterns[cluster] + jitter * noise
        )
        blocks.append(rows)
        labels.append(np.full(count, cluster, dtype=np.int64))
    vectors = np.clip(np.vstack(blocks), 0.0, 1.0)
    order = rng.permutation(n)
    return VectorDataset(vectors=vectors[order], labels=np.concatenate(labels)[order])
