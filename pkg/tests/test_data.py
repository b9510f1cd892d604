import gzip

import numpy as np
import pytest

from layerlens import data
from layerlens.errors import ConsistencyError, DataError, FormatError

from conftest import MNIST_IMAGES, MNIST_LABELS, make_idx_images, make_idx_labels


class TestLoadIdx:
    def test_single_max_pixel_scales_to_one(self, tmp_path):
        path = make_idx_images(np.array([[[255]]]), tmp_path / "one.idx")
        ds = data.load_idx(path)
        assert ds.samples.shape == (1, 1)
        assert ds.samples[0, 0] == 1.0

    def test_byte_scaling(self, tmp_path):
        images = np.array(
            [[[0, 51], [102, 255]], [[10, 20], [30, 40]]], dtype=np.uint8
        )
        path = make_idx_images(images, tmp_path / "two.idx")
        ds = data.load_idx(path)
        assert ds.samples.shape == (2, 4)
        np.testing.assert_allclose(ds.samples[0], [0.0, 0.2, 0.4, 1.0], atol=1e-6)
        np.testing.assert_allclose(ds.samples[1], np.array([10, 20, 30, 40]) / 255.0, atol=1e-6)

    def test_labels_round_trip(self, tmp_path):
        images = np.zeros((3, 2, 2), dtype=np.uint8)
        labels = np.array([7, 0, 3], dtype=np.uint8)
        ipath = make_idx_images(images, tmp_path / "im.idx", compress=True)
        lpath = make_idx_labels(labels, tmp_path / "lb.idx", compress=True)
        ds = data.load_idx(ipath, lpath)
        np.testing.assert_array_equal(ds.labels, labels)

    def test_bad_magic_is_format_error(self, tmp_path):
        path = tmp_path / "bad.idx"
        path.write_bytes(b"\x00\x00\x09\x03" + b"\x00" * 16)
        with pytest.raises(FormatError):
            data.load_idx(path)

    def test_truncated_payload_is_data_error(self, tmp_path):
        path = make_idx_images(np.zeros((4, 2, 2), dtype=np.uint8), tmp_path / "t.idx")
        raw = path.read_bytes()
        path.write_bytes(raw[:-3])
        with pytest.raises(DataError):
            data.load_idx(path)

    def test_count_mismatch_is_consistency_error(self, tmp_path):
        ipath = make_idx_images(np.zeros((3, 1, 1), dtype=np.uint8), tmp_path / "i.idx")
        lpath = make_idx_labels(np.zeros(2, dtype=np.uint8), tmp_path / "l.idx")
        with pytest.raises(ConsistencyError):
            data.load_idx(ipath, lpath)

    def test_bundled_mnist_subset(self, mnist10k):
        assert mnist10k.n_samples == 10000
        assert mnist10k.n_features == 784
        assert mnist10k.samples.min() >= 0.0 and mnist10k.samples.max() <= 1.0
        assert set(np.unique(mnist10k.labels)) == set(range(10))


class TestLoadOcr:
    def _write(self, tmp_path, lines):
        path = tmp_path / "letters.txt"
        path.write_text("\n".join(lines) + "\n")
        return path

    def test_parses_records(self, tmp_path):
        bits_a = "1 0" * 64
        bits_z = "0 1" * 64
        path = self._write(tmp_path, [f"a {bits_a}", f"z {bits_z}"])
        ds = data.load_ocr(path)
        assert ds.samples.shape == (2, 128)
        np.testing.assert_array_equal(ds.labels, [0, 25])
        assert ds.samples[0, 0] == 1.0 and ds.samples[0, 1] == 0.0

    def test_empty_file_is_error(self, tmp_path):
        path = tmp_path / "empty.txt"
        path.write_text("")
        with pytest.raises(FormatError):
            data.load_ocr(path)

    def test_short_record_is_error(self, tmp_path):
        path = self._write(tmp_path, ["a 1 0 1"])
        with pytest.raises(FormatError):
            data.load_ocr(path)

    def test_bad_pixel_value_is_error(self, tmp_path):
        bits = "1 " * 127 + "2"
        path = self._write(tmp_path, [f"b {bits}"])
        with pytest.raises(FormatError):
            data.load_ocr(path)

    def test_bad_label_is_error(self, tmp_path):
        bits = "0 " * 127 + "1"
        path = self._write(tmp_path, [f"Q {bits}"])
        with pytest.raises(FormatError):
            data.load_ocr(path)


class TestShuffleControl:
    def test_constant_image_unchanged_by_permutations(self):
        ds = data.Dataset(samples=np.full((3, 16), 0.25, dtype=np.float32))
        for mode in ("global_permutation", "per_image_permutation", "pixel_resample"):
            out = data.shuffle_control(ds, mode, seed=5)
            np.testing.assert_array_equal(out.samples, ds.samples)

    def test_same_seed_same_output(self, mnist10k):
        small = data.Dataset(samples=mnist10k.samples[:20], labels=mnist10k.labels[:20])
        for mode in data.SHUFFLE_MODES:
            a = data.shuffle_control(small, mode, seed=11)
            b = data.shuffle_control(small, mode, seed=11)
            np.testing.assert_array_equal(a.samples, b.samples)

    def test_different_seed_differs(self, mnist10k):
        small = data.Dataset(samples=mnist10k.samples[:20])
        a = data.shuffle_control(small, "global_permutation", seed=1)
        b = data.shuffle_control(small, "global_permutation", seed=2)
        assert not np.array_equal(a.samples, b.samples)

    def test_per_image_permutation_preserves_multisets(self, mnist10k):
        small = data.Dataset(samples=mnist10k.samples[:10])
        out = data.shuffle_control(small, "per_image_permutation", seed=3)
        for before, after in zip(small.samples, out.samples):
            np.testing.assert_array_equal(np.sort(before), np.sort(after))

    def test_global_permutation_is_one_fixed_permutation(self, mnist10k):
        small = data.Dataset(samples=mnist10k.samples[:10])
        out = data.shuffle_control(small, "global_permutation", seed=3)
        # recover the permutation from the first image and check it explains the rest
        n = small.n_features
        perm = np.empty(n, dtype=int)
        used = np.zeros(n, dtype=bool)
        for j in range(n):
            candidates = np.nonzero(
                (small.samples[0] == out.samples[0, j]) & ~used
            )[0]
            perm[j] = candidates[0]
            used[candidates[0]] = True
        # positions of equal values are interchangeable, so compare values
        for img_in, img_out in zip(small.samples, out.samples):
            assert np.array_equal(np.sort(img_in), np.sort(img_out))
        np.testing.assert_array_equal(small.samples[:, perm][0], out.samples[0])

    def test_labels_and_shape_preserved(self, mnist10k):
        small = data.Dataset(samples=mnist10k.samples[:10], labels=mnist10k.labels[:10])
        for mode in data.SHUFFLE_MODES:
            out = data.shuffle_control(small, mode, seed=9)
            assert out.samples.shape == small.samples.shape
            np.testing.assert_array_equal(out.labels, small.labels)

    def test_unknown_mode(self, mnist10k):
        small = data.Dataset(samples=mnist10k.samples[:5])
        with pytest.raises(ValueError):
            data.shuffle_control(small, "bogus", seed=0)


class TestSplit:
    def _indexed_dataset(self, m):
        samples = np.zeros((m, 2), dtype=np.float32)
        samples[:, 0] = np.arange(m) / max(m - 1, 1)
        return data.Dataset(samples=samples, labels=np.arange(m) % 7)

    def _recover_indices(self, ds, part):
        m = ds.n_samples
        return set(np.rint(part.samples[:, 0] * (m - 1)).astype(int))

    def test_requested_sizes(self):
        ds = self._indexed_dataset(100)
        train, val, test = data.split(ds, data.SplitSpec(60, 25, 15), seed=4)
        assert (train.n_samples, val.n_samples, test.n_samples) == (60, 25, 15)

    def test_union_is_everything_disjoint(self):
        ds = self._indexed_dataset(97)
        train, val, test = data.split(ds, data.SplitSpec(50, 30, 17), seed=8)
        sets = [self._recover_indices(ds, p) for p in (train, val, test)]
        assert sets[0] | sets[1] | sets[2] == set(range(97))
        assert len(sets[0]) + len(sets[1]) + len(sets[2]) == 97

    def test_full_train_is_permutation(self):
        ds = self._indexed_dataset(30)
        train, val, test = data.split(ds, data.SplitSpec(30, 0, 0), seed=1)
        assert val is None and test is None
        assert self._recover_indices(ds, train) == set(range(30))

    def test_labels_travel_with_samples(self):
        ds = self._indexed_dataset(50)
        train, _, _ = data.split(ds, data.SplitSpec(50, 0, 0), seed=2)
        idx = np.rint(train.samples[:, 0] * 49).astype(int)
        np.testing.assert_array_equal(train.labels, idx % 7)

    def test_oversized_spec_is_error(self):
        ds = self._indexed_dataset(10)
        with pytest.raises(ValueError):
            data.split(ds, data.SplitSpec(8, 2, 1), seed=0)


class TestCanonicalFormat:
    def test_round_trip_values(self, tmp_path, mnist10k):
        ds = data.Dataset(
            samples=mnist10k.samples[:32],
            labels=mnist10k.labels[:32],
            name="probe",
            seed_provenance=77,
        )
        path = tmp_path / "probe.llds"
        data.save_dataset(path, ds)
        loaded = data.load_dataset(path)
        np.testing.assert_array_equal(loaded.samples, ds.samples)
        np.testing.assert_array_equal(loaded.labels, ds.labels)
        assert loaded.name == "probe"
        assert loaded.seed_provenance == 77

    def test_save_load_save_is_byte_identical(self, tmp_path):
        rng = np.random.default_rng(0)
        ds = data.Dataset(samples=rng.random((5, 3)).astype(np.float32))
        p1, p2 = tmp_path / "a.llds", tmp_path / "b.llds"
        data.save_dataset(p1, ds)
        data.save_dataset(p2, data.load_dataset(p1))
        assert p1.read_bytes() == p2.read_bytes()

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "junk.llds"
        path.write_bytes(b"NOPE" + b"\x00" * 64)
        with pytest.raises(FormatError):
            data.load_dataset(path)

    def test_gzip_transparent(self, tmp_path):
        ds = data.Dataset(samples=np.eye(3, dtype=np.float32) * 0.5)
        plain = tmp_path / "x.llds"
        data.save_dataset(plain, ds)
        packed = tmp_path / "x.llds.gz"
        packed.write_bytes(gzip.compress(plain.read_bytes()))
        loaded = data.load_dataset(packed)
        np.testing.assert_array_equal(loaded.samples, ds.samples)


class TestDatasetValidation:
    def test_rejects_out_of_range(self):
        with pytest.raises(DataError):
            data.Dataset(samples=np.array([[1.5]], dtype=np.float32))

    def test_rejects_label_mismatch(self):
        with pytest.raises(ConsistencyError):
            data.Dataset(samples=np.zeros((3, 2), dtype=np.float32), labels=np.array([0, 1]))

    def test_rejects_empty(self):
        with pytest.raises(DataError):
            data.Dataset(samples=np.zeros((0, 4), dtype=np.float32))
