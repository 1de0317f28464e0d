import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isimed.errors import ClassExhausted, VolumeTooSmall
from isimed.sampling import (
    PatchBatch,
    pairwise_distances,
    patch_has_lesion,
    physical_distance_matrix,
    sample_labeled_patches,
    sample_patch_batch,
)
from isimed.synthvol import PhantomConfig, Volume, generate_phantom


def tiny_volumes(n, shape=(10, 12, 14), seed=0):
    rng = np.random.default_rng(seed)
    return [Volume(rng.random(shape), subject_id=f"v{i}") for i in range(n)]


def brute_distances(points):
    n = len(points)
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            out[i, j] = math.sqrt(sum((a - b) ** 2 for a, b in zip(points[i], points[j])))
    return out


class TestSamplePatchBatch:
    def test_paper_batch_size(self):
        vols = tiny_volumes(64, shape=(4, 4, 4))
        batch = sample_patch_batch(vols, 16, patch_size=2)
        assert len(batch) == 1024
        assert batch.values().shape == (1024, 2, 2, 2)

    def test_patch_fills_volume(self):
        batch = sample_patch_batch(tiny_volumes(1, shape=(6, 6, 6)), 5, patch_size=6)
        assert all(p.origin == (0, 0, 0) for p in batch.patches)
        np.testing.assert_array_equal(batch.centers, np.full((5, 3), 2.5))

    def test_deterministic(self):
        vols = tiny_volumes(3)
        a = sample_patch_batch(vols, 7, 4, rng_seed=9)
        b = sample_patch_batch(vols, 7, 4, rng_seed=9)
        assert [p.origin for p in a.patches] == [p.origin for p in b.patches]
        c = sample_patch_batch(vols, 7, 4, rng_seed=10)
        assert [p.origin for p in a.patches] != [p.origin for p in c.patches]

    def test_containment_and_content(self):
        vols = tiny_volumes(4)
        batch = sample_patch_batch(vols, 20, 5, rng_seed=1)
        by_id = {v.subject_id: v for v in vols}
        for p, c in zip(batch.patches, batch.centers):
            v = by_id[p.volume_ref]
            assert all(0 <= o and o + 5 <= n for o, n in zip(p.origin, v.shape))
            x, y, z = p.origin
            np.testing.assert_array_equal(p.data, v.data[x : x + 5, y : y + 5, z : z + 5])
            np.testing.assert_allclose(c, np.array(p.origin) + 2.0)

    def test_volume_major_order(self):
        batch = sample_patch_batch(tiny_volumes(3), 4, 3)
        assert [p.volume_ref for p in batch.patches] == ["v0"] * 4 + ["v1"] * 4 + ["v2"] * 4

    def test_too_small(self):
        with pytest.raises(VolumeTooSmall):
            sample_patch_batch(tiny_volumes(1, shape=(8, 8, 3)), 1, 4)

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            sample_patch_batch(tiny_volumes(1), 1, 4, mode="furlong")

    def test_millimeter_centers(self):
        vol = Volume(np.zeros((6, 6, 6)), spacing=(2.0, 2.0, 3.0))
        batch = sample_patch_batch([vol], 10, 2, mode="millimeter", rng_seed=4)
        for p, c in zip(batch.patches, batch.centers):
            np.testing.assert_allclose(c, (np.array(p.origin) + 0.5) * [2.0, 2.0, 3.0])


class TestDistances:
    def test_345(self):
        d = pairwise_distances(np.array([[0.0, 0, 0], [3, 4, 0]]))
        assert d[0, 1] == 5.0 and d[1, 0] == 5.0

    def test_millimeter_mode(self):
        batch = PatchBatch([None, None], np.array([[0, 0, 0], [1, 1, 1]]) * np.array([2.0, 2.0, 3.0]), "millimeter")
        d = physical_distance_matrix(batch)
        assert d[0, 1] == pytest.approx(math.sqrt(2**2 + 2**2 + 3**2), abs=1e-12)
        assert d[0, 1] == pytest.approx(4.1231, abs=1e-4)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(1, 12), st.integers(0, 2**32 - 1))
    def test_against_double_loop(self, n, seed):
        pts = np.random.default_rng(seed).normal(scale=20, size=(n, 3))
        d = physical_distance_matrix(PatchBatch([None] * n, pts))
        assert np.all(np.diag(d) == 0)
        assert np.array_equal(d, d.T)
        ref = brute_distances(pts.tolist())
        np.testing.assert_allclose(d, ref, rtol=1e-6, atol=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(2, 10), st.integers(0, 2**32 - 1))
    def test_permutation_equivariant(self, n, seed):
        rng = np.random.default_rng(seed)
        pts = rng.normal(size=(n, 3))
        perm = rng.permutation(n)
        d = pairwise_distances(pts)
        np.testing.assert_allclose(pairwise_distances(pts[perm]), d[np.ix_(perm, perm)], rtol=1e-12)


@pytest.fixture(scope="module")
def volumes():
    cfg = PhantomConfig(shape=(24, 24, 24), lesion_count_range=(3, 4), lesion_radius_range=(2.0, 3.0), seed=5)
    return [generate_phantom(cfg, i) for i in range(3)]


class TestLabeledPatches:
    def test_balance(self, volumes):
        patches = sample_labeled_patches(volumes, 8, 100, rng_seed=1)
        labels = [p.label for p in patches]
        assert labels.count(1) == 100 and labels.count(0) == 100

    def test_positive_patches_overlap_mask(self, volumes):
        by_id = {v.subject_id: v for v in volumes}
        for p in sample_labeled_patches(volumes, 8, 50, rng_seed=2):
            x, y, z = p.origin
            overlap = by_id[p.volume_ref].mask[x : x + 8, y : y + 8, z : z + 8].sum()
            assert (overlap > 0) == (p.label == 1)
            assert patch_has_lesion(by_id[p.volume_ref], p.origin, 8) == bool(p.label)

    def test_no_lesions(self):
        vols = [Volume(np.zeros((8, 8, 8)), mask=np.zeros((8, 8, 8)))]
        with pytest.raises(ClassExhausted) as info:
            sample_labeled_patches(vols, 4, 5, max_attempts=200)
        assert info.value.label == 1

    def test_all_lesion(self):
        vols = [Volume(np.zeros((8, 8, 8)), mask=np.ones((8, 8, 8)))]
        with pytest.raises(ClassExhausted) as info:
            sample_labeled_patches(vols, 4, 5, max_attempts=200)
        assert info.value.label == 0

    def test_deterministic(self, volumes):
        a = sample_labeled_patches(volumes, 8, 20, rng_seed=3)
        b = sample_labeled_patches(volumes, 8, 20, rng_seed=3)
        assert [(p.volume_ref, p.origin, p.label) for p in a] == [(p.volume_ref, p.origin, p.label) for p in b]
