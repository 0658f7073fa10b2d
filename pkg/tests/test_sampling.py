import numpy as np
import pytest

from transfermetrics.errors import ValidationError
from transfermetrics.formats import EmbeddingSet
from transfermetrics.sampling import (
    ClassSubsetSpec,
    PixelObservationSpec,
    load_selection,
    sample_class_subsets,
    sample_pixels,
    save_selection,
    select_pixels,
)


def image(h, w, labels_flat, d=3, seed=0):
    rng = np.random.default_rng(seed)
    label_map = np.asarray(labels_flat).reshape(h, w)
    feats = rng.standard_normal((h, w, d)).astype(np.float32)
    return label_map, feats


class TestSelectPixels:
    def test_balanced_split_uniform_case(self):
        # 50/50 classes: weights equal, selection is plain uniform
        labels = np.array([0] * 50 + [1] * 50)
        label_map, _ = image(10, 10, labels)
        spec = PixelObservationSpec(pixels_per_image=20, seed=1)
        counts = np.zeros(2)
        for trial in range(500):
            idx = select_pixels(label_map, spec, trial)
            sel = label_map.ravel()[idx]
            counts += np.bincount(sel, minlength=2)
        frac = counts / counts.sum()
        assert abs(frac[0] - 0.5) < 0.03

    def test_inverse_frequency_rebalances_90_10(self):
        labels = np.array([0] * 810 + [1] * 90)
        label_map, _ = image(30, 30, labels)
        spec = PixelObservationSpec(pixels_per_image=10, seed=2)
        counts = np.zeros(2)
        draws = 0
        trial = 0
        while draws < 10**5:
            idx = select_pixels(label_map, spec, trial)
            counts += np.bincount(label_map.ravel()[idx], minlength=2)
            draws += len(idx)
            trial += 1
        frac = counts / counts.sum()
        assert abs(frac[1] - 0.5) < 0.03

    def test_fixed_seed_reproduces(self):
        labels = np.arange(100) % 4
        label_map, _ = image(10, 10, labels)
        spec = PixelObservationSpec(pixels_per_image=17, seed=42)
        a = select_pixels(label_map, spec, 3)
        b = select_pixels(label_map, spec, 3)
        assert np.array_equal(a, b)

    def test_different_image_index_differs(self):
        labels = np.arange(100) % 4
        label_map, _ = image(10, 10, labels)
        spec = PixelObservationSpec(pixels_per_image=17, seed=42)
        assert not np.array_equal(select_pixels(label_map, spec, 0),
                                  select_pixels(label_map, spec, 1))

    def test_skips_unlabeled(self):
        label_map = np.full((5, 5), -1)
        label_map[0, 0] = 2
        idx = select_pixels(label_map, PixelObservationSpec(pixels_per_image=10), 0)
        assert np.array_equal(idx, [0])

    def test_no_labeled_pixels_raises(self):
        with pytest.raises(ValidationError):
            select_pixels(np.full((4, 4), -1), PixelObservationSpec(), 0)

    def test_without_replacement(self):
        labels = np.arange(100) % 2
        label_map, _ = image(10, 10, labels)
        idx = select_pixels(label_map, PixelObservationSpec(pixels_per_image=60), 0)
        assert len(idx) == len(set(idx.tolist())) == 60


class TestSamplePixels:
    def _images(self, count=3):
        out = []
        for i in range(count):
            labels = (np.arange(64) % 3).copy()
            out.append(image(8, 8, labels, seed=i))
        return out

    def test_builds_embedding_set(self):
        spec = PixelObservationSpec(pixels_per_image=10, seed=0)
        s = sample_pixels(self._images(), spec)
        assert s.n == 30 and s.dim == 3

    def test_cache_replays_identical(self, tmp_path):
        spec = PixelObservationSpec(pixels_per_image=10, seed=0)
        imgs = self._images()
        a = sample_pixels(imgs, spec, cache_dir=tmp_path)
        b = sample_pixels(imgs, spec, cache_dir=tmp_path)
        assert a.features.tobytes() == b.features.tobytes()
        assert np.array_equal(a.labels, b.labels)
        assert len(list(tmp_path.glob("*.psel"))) == 3

    def test_skips_empty_image(self, caplog):
        imgs = self._images(2)
        empty = (np.full((8, 8), -1), np.zeros((8, 8, 3), dtype=np.float32))
        s = sample_pixels([imgs[0], empty, imgs[1]], PixelObservationSpec(pixels_per_image=5))
        assert s.n == 10

    def test_psel_roundtrip(self, tmp_path):
        indices = np.array([3, 1, 4, 1 + 58, 9], dtype=np.int64)
        save_selection(tmp_path / "x.psel", 7, indices)
        image_id, loaded = load_selection(tmp_path / "x.psel")
        assert image_id == 7 and np.array_equal(loaded, indices)


class TestClassSubsets:
    def _set(self, classes=10, per_class=6, d=4, seed=0):
        rng = np.random.default_rng(seed)
        labels = np.repeat(np.arange(classes), per_class).astype(np.int32)
        feats = rng.standard_normal((classes * per_class, d)).astype(np.float32)
        return EmbeddingSet(feats, labels, classes)

    def test_full_fraction_identity_up_to_relabel(self):
        s = self._set()
        (sub,) = sample_class_subsets(s, ClassSubsetSpec(1.0, 1.0, seed=0), 1)
        assert sub.n == s.n
        assert np.array_equal(np.unique(sub.labels), np.arange(10))
        assert sub.features.tobytes() == s.features.tobytes()

    def test_small_fraction_two_classes(self):
        s = self._set(classes=100, per_class=2)
        (sub,) = sample_class_subsets(s, ClassSubsetSpec(0.02, 0.02, seed=1), 1)
        assert sub.class_count == 2
        assert sub.n == 4  # all rows of the two selected classes

    def test_deterministic(self):
        s = self._set()
        spec = ClassSubsetSpec(0.2, 0.8, seed=9)
        a = sample_class_subsets(s, spec, 5)
        b = sample_class_subsets(s, spec, 5)
        for x, y in zip(a, b):
            assert x.features.tobytes() == y.features.tobytes()
            assert np.array_equal(x.labels, y.labels)

    def test_dense_relabeling_and_byte_preservation(self):
        s = self._set()
        subs = sample_class_subsets(s, ClassSubsetSpec(0.3, 0.6, seed=2), 10)
        for sub in subs:
            assert np.array_equal(np.unique(sub.labels), np.arange(sub.class_count))
            assert sub.class_count >= 2
            # every subset row's bytes appear in the source set
            src_rows = {s.features[i].tobytes() for i in range(s.n)}
            assert all(sub.features[i].tobytes() in src_rows for i in range(sub.n))

    def test_needs_two_classes(self):
        single = EmbeddingSet(np.zeros((4, 2), np.float32), np.zeros(4, np.int32), 1)
        with pytest.raises(ValueError):
            sample_class_subsets(single, ClassSubsetSpec(), 1)

    def test_bad_fraction_range(self):
        with pytest.raises(ValueError):
            ClassSubsetSpec(0.5, 0.2)
