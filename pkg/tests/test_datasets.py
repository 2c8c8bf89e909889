"""Binary loaders, stratified sampling, synthetic data, descriptors."""

import numpy as np
import pytest

from hetdp.datasets import (
    CANONICAL_PROFILES,
    CifarVariant,
    DataFormat,
    DatasetDescriptor,
    DatasetFormatError,
    HeterogeneityProfile,
    LabelScheme,
    SampleCapacityError,
    _allocate,
    load_cifar,
    load_dataset,
    load_idx,
    stratified_sample,
    synthetic_dataset,
    write_cifar,
    write_idx,
)
from hetdp.measures import VectorDataset, build_context, i_squared, q_statistic


def _grid_dataset(n, d, seed=0, labels=None):
    """Vectors on the 1/255 grid so byte round-trips are exact."""
    rng = np.random.default_rng(seed)
    vectors = rng.integers(0, 256, size=(n, d)).astype(np.float64) / 255.0
    if labels is None:
        labels = rng.integers(0, 10, size=n).astype(np.int64)
    return VectorDataset(vectors, np.asarray(labels, dtype=np.int64))


class TestHeterogeneityProfile:
    def test_label_count_defaults_to_ratio_length(self):
        assert HeterogeneityProfile((1, 1, 1, 1, 1)).label_count == 5

    def test_supported_bucket_counts(self):
        with pytest.raises(ValueError, match="2, 5, 10"):
            HeterogeneityProfile((1, 1, 1))

    def test_ratio_length_must_match(self):
        with pytest.raises(ValueError, match="one ratio per label bucket"):
            HeterogeneityProfile((1, 1), label_count=5)

    def test_ratios_positive_integers(self):
        with pytest.raises(ValueError, match="positive integers"):
            HeterogeneityProfile((1.5, 1.5))
        with pytest.raises(ValueError, match="positive integers"):
            HeterogeneityProfile((0, 1))

    def test_fraction_bounds(self):
        with pytest.raises(ValueError, match="sample fraction"):
            HeterogeneityProfile((1, 1), sample_fraction=0.0)
        with pytest.raises(ValueError, match="sample fraction"):
            HeterogeneityProfile((1, 1), sample_fraction=1.2)

    def test_canonical_profiles(self):
        assert set(CANONICAL_PROFILES) == {
            "uniform-10", "skewed-10", "uniform-5", "skewed-5", "uniform-2", "skewed-2",
        }
        assert CANONICAL_PROFILES["uniform-10"].ratios == (1,) * 10
        assert CANONICAL_PROFILES["skewed-10"].ratios == (91,) + (1,) * 9
        assert CANONICAL_PROFILES["skewed-5"].ratios == (96, 1, 1, 1, 1)
        assert CANONICAL_PROFILES["skewed-2"].ratios == (99, 1)
        for name, profile in CANONICAL_PROFILES.items():
            assert profile.label_count == int(name.rsplit("-", 1)[1])
            if name.startswith("skewed"):
                assert sum(profile.ratios) == 100


class TestAllocator:
    @pytest.mark.parametrize(
        "total,shares,expected",
        [
            (10, [3, 1, 1], [6, 2, 2]),
            (7, [1, 1, 1], [3, 2, 2]),
            (10, [1, 1], [5, 5]),
            (100, [99, 1], [99, 1]),
            (5, [1, 1, 1], [2, 2, 1]),
        ],
    )
    def test_hand_values(self, total, shares, expected):
        assert _allocate(total, np.array(shares, dtype=np.float64)).tolist() == expected

    def test_sums_and_proximity(self):
        rng = np.random.default_rng(3)
        for trial in range(50):
            shares = rng.integers(1, 100, size=rng.integers(2, 8))
            total = int(rng.integers(1, 500))
            counts = _allocate(total, shares.astype(np.float64))
            assert counts.sum() == total
            exact = total * shares / shares.sum()
            assert np.all(counts >= np.floor(exact))
            assert np.all(counts <= np.floor(exact) + 1)


class TestIdxFiles:
    def test_round_trip(self, tmp_path):
        data = _grid_dataset(12, 6, seed=1)
        images, labels = tmp_path / "img.bin", tmp_path / "lab.bin"
        write_idx(data, images, labels)
        loaded = load_idx(images, labels)
        assert np.array_equal(loaded.vectors, data.vectors)
        assert np.array_equal(loaded.labels, data.labels)

    def test_bad_image_magic(self, tmp_path):
        data = _grid_dataset(3, 4)
        images, labels = tmp_path / "img.bin", tmp_path / "lab.bin"
        write_idx(data, images, labels)
        raw = bytearray(images.read_bytes())
        raw[:4] = b"\x12\x34\x56\x78"
        images.write_bytes(bytes(raw))
        with pytest.raises(DatasetFormatError, match="bad image magic 0x12345678") as err:
            load_idx(images, labels)
        assert err.value.offset == 0
        assert str(images) in str(err.value)

    def test_bad_label_magic(self, tmp_path):
        data = _grid_dataset(3, 4)
        images, labels = tmp_path / "img.bin", tmp_path / "lab.bin"
        write_idx(data, images, labels)
        raw = bytearray(labels.read_bytes())
        raw[3] = 0x99
        labels.write_bytes(bytes(raw))
        with pytest.raises(DatasetFormatError, match="bad label magic") as err:
            load_idx(images, labels)
        assert err.value.offset == 0

    def test_count_mismatch(self, tmp_path):
        data = _grid_dataset(3, 4)
        images, labels = tmp_path / "img.bin", tmp_path / "lab.bin"
        write_idx(data, images, labels)
        raw = bytearray(labels.read_bytes())
        raw[7] = 9
        labels.write_bytes(bytes(raw))
        with pytest.raises(DatasetFormatError, match="label count 9 does not match") as err:
            load_idx(images, labels)
        assert err.value.offset == 4

    def test_truncated_pixels(self, tmp_path):
        data = _grid_dataset(3, 4)
        images, labels = tmp_path / "img.bin", tmp_path / "lab.bin"
        write_idx(data, images, labels)
        images.write_bytes(images.read_bytes()[:20])
        with pytest.raises(DatasetFormatError, match="truncated pixel data") as err:
            load_idx(images, labels)
        assert err.value.offset == 20

    def test_truncated_header(self, tmp_path):
        images, labels = tmp_path / "img.bin", tmp_path / "lab.bin"
        images.write_bytes(b"\x00\x00")
        labels.write_bytes(b"")
        with pytest.raises(DatasetFormatError, match="truncated while reading image magic") as err:
            load_idx(images, labels)
        assert err.value.offset == 2

    def test_empty_image_file(self, tmp_path):
        images, labels = tmp_path / "img.bin", tmp_path / "lab.bin"
        images.write_bytes(b"")
        labels.write_bytes(b"")
        with pytest.raises(DatasetFormatError) as err:
            load_idx(images, labels)
        assert err.value.offset == 0

    def test_truncated_labels(self, tmp_path):
        data = _grid_dataset(5, 4)
        images, labels = tmp_path / "img.bin", tmp_path / "lab.bin"
        write_idx(data, images, labels)
        labels.write_bytes(labels.read_bytes()[:10])
        with pytest.raises(DatasetFormatError, match="truncated label data") as err:
            load_idx(images, labels)
        assert err.value.offset == 10

    def test_wide_labels_rejected_on_write(self, tmp_path):
        data = VectorDataset(np.zeros((2, 2)), np.array([0, 300]))
        with pytest.raises(ValueError, match="255"):
            write_idx(data, tmp_path / "img.bin", tmp_path / "lab.bin")


class TestCifarFiles:
    def test_ten_class_round_trip(self, tmp_path):
        data = _grid_dataset(4, 3072, seed=2)
        path = tmp_path / "batch.bin"
        write_cifar(data, path, CifarVariant.TEN)
        loaded = load_cifar([path], CifarVariant.TEN)
        assert np.array_equal(loaded.vectors, data.vectors)
        assert np.array_equal(loaded.labels, data.labels)

    def test_hundred_class_round_trip(self, tmp_path):
        data = _grid_dataset(4, 3072, seed=3)
        path = tmp_path / "batch.bin"
        write_cifar(data, path, CifarVariant.HUNDRED)
        loaded = load_cifar([path], CifarVariant.HUNDRED)
        assert np.array_equal(loaded.vectors, data.vectors)
        assert np.array_equal(loaded.labels, data.labels)

    def test_coarse_labels_bucket_pairwise(self, tmp_path):
        path = tmp_path / "batch.bin"
        with open(path, "wb") as fh:
            for coarse in (0, 1, 2, 3):
                fh.write(bytes([coarse, 5]) + bytes(3072))
        loaded = load_cifar([path], CifarVariant.HUNDRED)
        assert loaded.labels.tolist() == [0, 0, 1, 1]

    def test_multiple_batches_concatenate(self, tmp_path):
        a, b = _grid_dataset(3, 3072, seed=4), _grid_dataset(2, 3072, seed=5)
        pa, pb = tmp_path / "a.bin", tmp_path / "b.bin"
        write_cifar(a, pa, CifarVariant.TEN)
        write_cifar(b, pb, CifarVariant.TEN)
        loaded = load_cifar([pa, pb], CifarVariant.TEN)
        assert loaded.n == 5
        assert np.array_equal(loaded.vectors[:3], a.vectors)
        assert np.array_equal(loaded.vectors[3:], b.vectors)

    def test_ragged_file_rejected(self, tmp_path):
        data = _grid_dataset(2, 3072, seed=6)
        path = tmp_path / "batch.bin"
        write_cifar(data, path, CifarVariant.TEN)
        path.write_bytes(path.read_bytes() + b"\x00" * 5)
        with pytest.raises(DatasetFormatError, match="3073-byte record size") as err:
            load_cifar([path], CifarVariant.TEN)
        assert err.value.offset == 2 * 3073

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "batch.bin"
        path.write_bytes(b"")
        with pytest.raises(DatasetFormatError, match="not a positive multiple") as err:
            load_cifar([path], CifarVariant.TEN)
        assert err.value.offset == 0

    def test_label_out_of_range(self, tmp_path):
        path = tmp_path / "batch.bin"
        path.write_bytes(bytes([77]) + bytes(3072))
        with pytest.raises(DatasetFormatError, match="label byte 77 out of range 0..9") as err:
            load_cifar([path], CifarVariant.TEN)
        assert err.value.offset == 0

    def test_coarse_and_fine_range_offsets(self, tmp_path):
        path = tmp_path / "batch.bin"
        good = bytes([3, 7]) + bytes(3072)
        path.write_bytes(good + bytes([25, 7]) + bytes(3072))
        with pytest.raises(DatasetFormatError, match="coarse label byte 25") as err:
            load_cifar([path], CifarVariant.HUNDRED)
        assert err.value.offset == 3074
        path.write_bytes(good + bytes([3, 120]) + bytes(3072))
        with pytest.raises(DatasetFormatError, match="fine label byte 120") as err:
            load_cifar([path], CifarVariant.HUNDRED)
        assert err.value.offset == 3074 + 1

    def test_write_requires_full_width(self, tmp_path):
        with pytest.raises(ValueError, match="3072"):
            write_cifar(_grid_dataset(2, 10), tmp_path / "x.bin", CifarVariant.TEN)


class TestDescriptors:
    def test_synthetic_load(self):
        desc = DatasetDescriptor(
            format=DataFormat.SYNTHETIC, name="syn", d=6, synth_n=40, heterogeneity=0.3
        )
        data = load_dataset(desc)
        assert (data.n, data.d) == (40, 6)

    def test_declared_d_checked_against_loaded(self, tmp_path):
        data = _grid_dataset(4, 6)
        images, labels = tmp_path / "img.bin", tmp_path / "lab.bin"
        write_idx(data, images, labels)
        desc = DatasetDescriptor(
            format=DataFormat.IDX_IMAGES,
            name="imgs",
            paths=(str(images), str(labels)),
            d=7,
        )
        with pytest.raises(DatasetFormatError, match="declares d=7 but the data has d=6"):
            load_dataset(desc)

    def test_label_scheme_constraints(self):
        with pytest.raises(ValueError, match="buckets coarse labels"):
            DatasetDescriptor(
                format=DataFormat.CIFAR100_BIN, name="x", paths=("a",),
                label_scheme=LabelScheme.FINE,
            )
        with pytest.raises(ValueError, match="fine labels only"):
            DatasetDescriptor(
                format=DataFormat.CIFAR10_BIN, name="x", paths=("a",),
                label_scheme=LabelScheme.COARSE_BUCKETED,
            )

    def test_path_arity(self):
        with pytest.raises(ValueError, match="images path and a labels path"):
            DatasetDescriptor(format=DataFormat.IDX_IMAGES, name="x", paths=("only",))
        with pytest.raises(ValueError, match="at least one path"):
            DatasetDescriptor(format=DataFormat.CIFAR10_BIN, name="x")

    def test_synthetic_shape_required(self):
        with pytest.raises(ValueError, match="synth_n >= 2 and d >= 1"):
            DatasetDescriptor(format=DataFormat.SYNTHETIC, name="x", synth_n=1, d=4)


class TestStratifiedSample:
    def test_deterministic_and_seed_sensitive(self):
        data = synthetic_dataset(400, 5, 0.0, seed=8)
        profile = HeterogeneityProfile((1, 1), sample_fraction=0.2)
        a = stratified_sample(data, profile, seed=10)
        b = stratified_sample(data, profile, seed=10)
        c = stratified_sample(data, profile, seed=11)
        assert np.array_equal(a.vectors, b.vectors)
        assert np.array_equal(a.labels, b.labels)
        assert not np.array_equal(a.vectors, c.vectors)

    def test_exact_histogram_when_divisible(self):
        labels = np.repeat(np.arange(2), 50)
        data = VectorDataset(np.random.default_rng(0).random((100, 3)), labels)
        profile = HeterogeneityProfile((1, 1), sample_fraction=0.2)
        sample = stratified_sample(data, profile, seed=1)
        assert np.bincount(sample.labels, minlength=2).tolist() == [10, 10]

    def test_remainder_goes_to_largest_share(self):
        labels = np.repeat(np.arange(2), 50)
        data = VectorDataset(np.random.default_rng(0).random((100, 3)), labels)
        profile = HeterogeneityProfile((3, 1), sample_fraction=0.1)
        sample = stratified_sample(data, profile, seed=1)
        assert np.bincount(sample.labels, minlength=2).tolist() == [8, 2]

    def test_buckets_use_smallest_labels_ascending(self):
        rng = np.random.default_rng(2)
        labels = np.array([3, 7, 9] * 20)
        data = VectorDataset(rng.random((60, 2)), labels)
        profile = HeterogeneityProfile((1, 1), sample_fraction=0.3)
        sample = stratified_sample(data, profile, seed=4)
        assert set(sample.labels.tolist()) == {3, 7}
        assert np.count_nonzero(sample.labels == 3) == 9

    def test_rows_are_drawn_without_replacement(self):
        rng = np.random.default_rng(5)
        data = VectorDataset(rng.random((50, 2)), np.repeat(np.arange(2), 25))
        profile = HeterogeneityProfile((1, 1), sample_fraction=1.0)
        sample = stratified_sample(data, profile, seed=6)
        assert sample.n == 50
        assert np.array_equal(np.sort(sample.vectors[:, 0]), np.sort(data.vectors[:, 0]))

    def test_capacity_error_names_bucket(self):
        rng = np.random.default_rng(6)
        labels = np.array([0] * 3 + [1] * 57)
        data = VectorDataset(rng.random((60, 2)), labels)
        profile = HeterogeneityProfile((9, 1), sample_fraction=0.5)
        with pytest.raises(
            SampleCapacityError,
            match=r"bucket 0 \(label 0\) needs 27 records but only 3 are available",
        ):
            stratified_sample(data, profile, seed=0)

    def test_too_few_distinct_labels(self):
        data = VectorDataset(np.random.default_rng(7).random((40, 2)), np.zeros(40, dtype=np.int64))
        profile = HeterogeneityProfile((1, 1), sample_fraction=0.5)
        with pytest.raises(SampleCapacityError, match="2 label buckets.*1 distinct"):
            stratified_sample(data, profile, seed=0)

    def test_empty_sample_rejected(self):
        data = VectorDataset(np.random.default_rng(8).random((30, 2)), np.repeat(np.arange(2), 15))
        profile = HeterogeneityProfile((1, 1), sample_fraction=0.01)
        with pytest.raises(ValueError, match="is empty"):
            stratified_sample(data, profile, seed=0)


class TestSyntheticData:
    def test_deterministic(self):
        a = synthetic_dataset(60, 5, 0.4, seed=9)
        b = synthetic_dataset(60, 5, 0.4, seed=9)
        c = synthetic_dataset(60, 5, 0.4, seed=10)
        assert np.array_equal(a.vectors, b.vectors)
        assert np.array_equal(a.labels, b.labels)
        assert not np.array_equal(a.vectors, c.vectors)

    def test_bounded_coordinates_and_labels(self):
        data = synthetic_dataset(300, 6, 1.0, seed=1)
        assert data.vectors.min() >= 0.0
        assert data.vectors.max() <= 1.0
        assert set(np.unique(data.labels)) <= set(range(10))
        assert np.unique(data.labels).size >= 2

    def test_validation(self):
        with pytest.raises(ValueError, match="n >= 2"):
            synthetic_dataset(1, 4, 0.5, seed=0)
        with pytest.raises(ValueError, match="d >= 1"):
            synthetic_dataset(10, 0, 0.5, seed=0)
        with pytest.raises(ValueError, match=r"\[0, 1\]"):
            synthetic_dataset(10, 4, 1.5, seed=0)

    def test_flat_setting_stays_homogeneous(self):
        # Regression guard: with the knob at zero the heterogeneity fraction
        # must stay small across seeds, so sweeps genuinely start from a
        # near-homogeneous population.
        worst = 0.0
        for seed in range(20):
            data = synthetic_dataset(200, 8, 0.0, seed=seed)
            q = q_statistic(data, build_context(data))
            worst = max(worst, i_squared(q, data.n))
        assert worst <= 0.25

    @staticmethod
    def _fraction(data):
        return i_squared(q_statistic(data, build_context(data)), data.n)

    def test_knob_raises_heterogeneity_fraction(self):
        low = synthetic_dataset(400, 8, 0.1, seed=3)
        high = synthetic_dataset(400, 8, 0.9, seed=3)
        assert self._fraction(high) > self._fraction(low)

    def test_knob_raises_weighted_q(self):
        low = synthetic_dataset(400, 8, 0.1, seed=4)
        high = synthetic_dataset(400, 8, 0.9, seed=4)
        assert q_statistic(high, build_context(high)) > q_statistic(low, build_context(low))
