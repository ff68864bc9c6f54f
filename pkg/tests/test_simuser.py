import numpy as np
import pytest

from querysteer.dataset import Region
from querysteer.simuser import (
    PLACEMENT_DENSE,
    PLACEMENT_MIXQ,
    SimUserConfig,
    SimUserError,
    TargetQuery,
    _density_ratio,
    generate_target,
    label,
    label_with_similarity,
    skew_blob_boxes,
    synth_dataset,
)
from querysteer.tree import IRRELEVANT, RELEVANT, SIMILAR


class TestGenerateTarget:
    def test_single_large_area_widths(self):
        t = generate_target(2, count=1, size_class="large", seed=1)
        assert t.count == 1
        widths = t.regions[0].widths()
        assert np.all(widths >= 7.0) and np.all(widths <= 9.0)

    def test_seven_small_areas_disjoint(self):
        t = generate_target(2, count=7, size_class="small", seed=3)
        assert len(t.regions) == 7
        for i, a in enumerate(t.regions):
            for b in t.regions[i + 1 :]:
                assert not a.overlaps(b)

    def test_deterministic(self):
        a = generate_target(3, count=3, size_class="medium", seed=9)
        b = generate_target(3, count=3, size_class="medium", seed=9)
        for ra, rb in zip(a.regions, b.regions):
            assert np.array_equal(ra.lows, rb.lows)
            assert np.array_equal(ra.highs, rb.highs)

    def test_unknown_size_class(self):
        with pytest.raises(SimUserError):
            generate_target(2, 1, "huge", seed=0)

    def test_dict_roundtrip(self):
        t = generate_target(2, count=3, size_class="large", seed=5)
        t2 = TargetQuery.from_dict(t.to_dict())
        assert t2.count == 3
        for ra, rb in zip(t.regions, t2.regions):
            assert np.array_equal(ra.lows, rb.lows)


class TestLabel:
    def target(self):
        return TargetQuery(
            regions=[Region([40.0, 40.0], [48.0, 48.0])], size_class="large", count=1
        )

    def test_center_relevant(self):
        assert label(self.target(), np.array([44.0, 44.0])) == RELEVANT

    def test_outside_irrelevant(self):
        assert label(self.target(), np.array([10.0, 90.0])) == IRRELEVANT

    def test_boundary_inclusive(self):
        assert label(self.target(), np.array([40.0, 48.0])) == RELEVANT

    def test_similarity_one_axis_gap(self):
        lab, dims = label_with_similarity(
            self.target(), np.array([44.0, 53.0]), SimUserConfig(0.10)
        )
        assert lab == SIMILAR
        assert dims == (1,)

    def test_far_point_irrelevant(self):
        lab, dims = label_with_similarity(
            self.target(), np.array([98.0, 98.0]), SimUserConfig(0.10)
        )
        assert lab == IRRELEVANT and dims is None

    def test_inside_wins_over_similar(self):
        lab, dims = label_with_similarity(
            self.target(), np.array([44.0, 44.0]), SimUserConfig(0.99)
        )
        assert lab == RELEVANT

    def test_two_axis_gap_not_similar(self):
        lab, _ = label_with_similarity(
            self.target(), np.array([50.0, 50.0]), SimUserConfig(0.10)
        )
        assert lab == IRRELEVANT

    def test_zero_threshold_reduces_to_label(self):
        cfg = SimUserConfig(0.0)
        rng = np.random.default_rng(0)
        t = self.target()
        for p in rng.uniform(0, 100, (200, 2)):
            lab, _ = label_with_similarity(t, p, cfg)
            assert lab == label(t, p)

    def test_multi_region_dims_union(self):
        t = TargetQuery(
            regions=[
                Region([10.0, 10.0], [20.0, 20.0]),
                Region([10.0, 30.0], [20.0, 40.0]),
            ],
            size_class="large",
            count=2,
        )
        # point between the two areas: above region 1 on dim1, below region 2
        lab, dims = label_with_similarity(t, np.array([15.0, 25.0]), SimUserConfig(0.10))
        assert lab == SIMILAR
        assert dims == (1,)


class TestSynthDataset:
    def test_uniform_moments(self):
        n = 100_000
        ds = synth_dataset("uniform", n, 2, seed=4)
        tol = 3 * 100.0 / np.sqrt(12 * n)
        for j in range(2):
            assert abs(ds.tuples[:, j].mean() - 50.0) <= tol

    def test_skewed_blob_mass(self):
        n = 50_000
        ds = synth_dataset("skewed", n, 2, seed=7)
        boxes = skew_blob_boxes(2, seed=7)
        mask = np.zeros(n, dtype=bool)
        for b in boxes:
            mask |= b.contains_points(ds.tuples)
        assert mask.mean() >= 0.90

    def test_hybrid_dimension_split(self):
        n = 50_000
        ds = synth_dataset("hybrid", n, 2, seed=11)
        tol = 3 * 100.0 / np.sqrt(12 * n) + 1.0
        assert abs(ds.tuples[:, 0].mean() - 50.0) <= tol  # uniform axis
        boxes = skew_blob_boxes(2, seed=11)
        mask = np.zeros(n, dtype=bool)
        for b in boxes:
            lo, hi = b.lows[1], b.highs[1]
            mask |= (ds.tuples[:, 1] >= lo) & (ds.tuples[:, 1] <= hi)
        assert mask.mean() >= 0.90  # skewed axis

    def test_deterministic(self):
        a = synth_dataset("uniform", 1000, 2, seed=2)
        b = synth_dataset("uniform", 1000, 2, seed=2)
        assert np.array_equal(a.tuples, b.tuples)

    def test_unknown_kind(self):
        with pytest.raises(SimUserError):
            synth_dataset("zipf", 10, 2, seed=0)


class TestPlacement:
    def test_dense_in_skewed_space(self):
        ds = synth_dataset("skewed", 30_000, 2, seed=13)
        t = generate_target(2, 1, "large", seed=5, ds=ds, placement=PLACEMENT_DENSE)
        ratio, inside = _density_ratio(ds, t.regions[0])
        assert ratio >= 1.0 and inside >= 20

    def test_mixq_in_hybrid_space(self):
        ds = synth_dataset("hybrid", 30_000, 2, seed=13)
        t = generate_target(2, 1, "large", seed=5, ds=ds, placement=PLACEMENT_MIXQ)
        ratio, inside = _density_ratio(ds, t.regions[0])
        assert 0.05 <= ratio <= 0.9 and inside >= 20
