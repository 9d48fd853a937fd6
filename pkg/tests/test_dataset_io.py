import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from cellsynth import (
    Blob,
    DatasetManifest,
    DimensionMismatchError,
    FileFormatError,
    ManifestEntry,
    PerlinParams,
    SpacingDist,
    blob_stats,
    flatten,
    load_annotated_pair,
    read_manifest,
    select_reference,
    tile_image,
    tiles_with_counts,
    write_manifest,
)
from cellsynth.blobs import BlobProvenance
from cellsynth.dataset_io import (
    aspect_ratio,
    load_blob_pool,
    load_mask_png,
    load_perlin_params,
    load_placement_log,
    load_prior_png,
    load_spacing,
    save_blob_pool,
    save_gray_png,
    save_mask_png,
    save_perlin_params,
    save_placement_log,
    save_spacing,
    select_reference_index,
)
from cellsynth.demo import disk_blob, make_shape_pool
from cellsynth.placement import PlacementLog, PlacementRecord


class TestFlatten:
    def test_all_zero(self):
        assert flatten(np.zeros((16, 16), dtype=np.int32)).sum() == 0

    def test_foreground_count_equals_total_area(self, square_mask):
        out = flatten(square_mask)
        assert out.dtype == np.uint8
        assert (out == 255).sum() == 50
        assert set(np.unique(out)) <= {0, 255}

    def test_invariant_under_relabeling(self, square_mask):
        relabeled = np.where(square_mask == 1, 9, square_mask)
        relabeled = np.where(relabeled == 2, 77, relabeled)
        assert np.array_equal(flatten(square_mask), flatten(relabeled))


class TestTiling:
    def test_exact_grid(self):
        tiles = tile_image(np.zeros((512, 512), dtype=np.uint8), 256)
        assert len(tiles) == 4

    def test_partial_border_discarded(self):
        tiles = tile_image(np.zeros((500, 500), dtype=np.uint8), 256)
        assert len(tiles) == 1

    def test_row_major_order(self):
        image = np.arange(16, dtype=np.uint8).reshape(4, 4)
        tiles = tile_image(image, 2)
        assert [int(t[0, 0]) for t in tiles] == [0, 2, 8, 10]

    def test_tile_size_validation(self):
        with pytest.raises(ValueError):
            tile_image(np.zeros((100, 100)), 128)

    def test_counts_by_centroid(self):
        image = np.zeros((128, 128), dtype=np.uint8)
        mask = np.zeros((128, 128), dtype=np.int32)
        mask[10:20, 10:20] = 1  # centroid (14.5, 14.5) -> tile 0
        mask[70:80, 70:80] = 2  # centroid (74.5, 74.5) -> tile 3
        pairs = tiles_with_counts(image, mask, 64)
        assert [c for _, c in pairs] == [1, 0, 0, 1]

    def test_centroid_on_border_goes_to_lower_index(self):
        image = np.zeros((128, 128), dtype=np.uint8)
        mask = np.zeros((128, 128), dtype=np.int32)
        mask[63:65, 10:12] = 1  # row centroid exactly 63.5+0.5 = 64? -> rows 63,64 mean 63.5
        mask[60:69, 40] = 2  # rows 60..68, centroid 64.0: exactly on the border
        pairs = tiles_with_counts(image, mask, 64)
        counts = [c for _, c in pairs]
        assert sum(counts) == 2
        assert counts[0] == 2  # both centroids resolve to the upper-left tile

    def test_centroid_in_discarded_border_not_counted(self):
        image = np.zeros((100, 100), dtype=np.uint8)
        mask = np.zeros((100, 100), dtype=np.int32)
        mask[80:90, 80:90] = 1  # centroid beyond the single 64x64 tile grid
        pairs = tiles_with_counts(image, mask, 64)
        assert [c for _, c in pairs] == [0]


class TestSelectReference:
    def test_argmin(self):
        mask = np.zeros((8, 8), dtype=np.int32)
        mask.ravel()[:12] = np.arange(1, 13)
        tiles = [(np.full((4, 4), v, dtype=np.uint8), c) for v, c in enumerate([3, 11, 30])]
        chosen = select_reference(tiles, mask)
        assert chosen[0, 0] == 1  # the count-11 tile

    def test_tie_breaks_to_lower_index(self):
        assert select_reference_index([10, 14], 12) == 0

    @given(
        counts=st.lists(st.integers(min_value=0, max_value=60), min_size=1, max_size=30),
        target=st.integers(min_value=0, max_value=60),
    )
    @settings(max_examples=60, deadline=None)
    def test_matches_bruteforce_argmin(self, counts, target):
        assert select_reference_index(counts, target) == oracles.argmin_abs_diff(counts, target)

    def test_empty_list_rejected(self):
        with pytest.raises(ValueError):
            select_reference_index([], 3)


class TestBlobStats:
    def test_disks_have_unit_aspect_ratio(self):
        for r in (5, 9, 14):
            assert aspect_ratio(disk_blob(r).footprint) == pytest.approx(1.0, abs=0.05)

    def test_single_pixel_ratio_is_one(self):
        assert aspect_ratio(np.ones((1, 1), dtype=bool)) == 1.0

    def test_elongated_shape(self):
        fp = np.ones((3, 12), dtype=bool)
        assert aspect_ratio(fp) > 3.0

    def test_rotation_invariance(self):
        from cellsynth.demo import ellipse_blob

        ratios = [
            aspect_ratio(ellipse_blob(14, 8, angle=a).footprint)
            for a in (0.0, 0.5, 1.0, 1.4)
        ]
        assert max(ratios) - min(ratios) < 0.12

    def test_quantiles_match_sort_oracle(self, rng):
        pool = make_shape_pool(40, rng)
        stats = blob_stats(pool)
        med_a, iqr_a = oracles.median_and_iqr([b.area for b in pool])
        med_r, iqr_r = oracles.median_and_iqr([oracles.aspect_ratio_bruteforce(b.footprint) for b in pool])
        assert stats.median_area == pytest.approx(med_a, rel=1e-9)
        assert stats.iqr_area == pytest.approx(iqr_a, rel=1e-9)
        assert stats.median_aspect_ratio == pytest.approx(med_r, rel=1e-9)
        assert stats.iqr_aspect_ratio == pytest.approx(iqr_r, rel=1e-9)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            blob_stats([])


class TestPngIO:
    def test_mask_round_trip_16bit(self, tmp_path):
        mask = np.zeros((64, 64), dtype=np.int32)
        for lab in range(1, 301):
            mask[(lab - 1) // 32, ((lab - 1) % 32) * 2] = lab
        path = tmp_path / "m.png"
        save_mask_png(path, mask)
        back = load_mask_png(path)
        assert np.array_equal(back, mask)
        assert len(np.unique(back)) == 301

    def test_annotated_pair_ok(self, tmp_path):
        mask = np.zeros((32, 32), dtype=np.int32)
        mask[4:8, 4:8] = 7
        save_mask_png(tmp_path / "m.png", mask)
        save_gray_png(tmp_path / "i.png", np.full((32, 32), 90, dtype=np.uint8))
        image, back = load_annotated_pair(tmp_path / "i.png", tmp_path / "m.png")
        assert image.shape == (32, 32)
        assert np.array_equal(back, mask)

    def test_dimension_mismatch(self, tmp_path):
        save_mask_png(tmp_path / "m.png", np.zeros((16, 16), dtype=np.int32))
        save_gray_png(tmp_path / "i.png", np.zeros((32, 32), dtype=np.uint8))
        with pytest.raises(DimensionMismatchError):
            load_annotated_pair(tmp_path / "i.png", tmp_path / "m.png")

    def test_missing_files(self, tmp_path):
        with pytest.raises(FileFormatError, match="not found"):
            load_mask_png(tmp_path / "nope.png")

    def test_rgb_mask_rejected(self, tmp_path):
        from PIL import Image

        Image.fromarray(np.zeros((8, 8, 3), dtype=np.uint8)).save(tmp_path / "rgb.png")
        with pytest.raises(FileFormatError, match="single-channel"):
            load_mask_png(tmp_path / "rgb.png")

    def test_prior_png_rescaled(self, tmp_path):
        save_gray_png(tmp_path / "p8.png", np.array([[0, 255]], dtype=np.uint8))
        prior = load_prior_png(tmp_path / "p8.png")
        assert prior.tolist() == [[0.0, 1.0]]
        from PIL import Image

        Image.fromarray(np.array([[0, 65535]], dtype=np.uint16)).save(tmp_path / "p16.png")
        prior16 = load_prior_png(tmp_path / "p16.png")
        assert prior16.tolist() == [[0.0, 1.0]]


class TestPoolAndParamsIO:
    def test_pool_round_trip(self, tmp_path, rng):
        pool = make_shape_pool(5, rng)
        pool[0] = Blob(
            pool[0].footprint,
            offset=(3, 9),
            provenance=BlobProvenance(pair=(1, 2), alpha=0.25),
        )
        save_blob_pool(tmp_path / "pool", pool)
        back = load_blob_pool(tmp_path / "pool")
        assert len(back) == 5
        assert np.array_equal(back[0].footprint, pool[0].footprint)
        assert back[0].offset == (3, 9)
        assert back[0].provenance.pair == (1, 2)
        assert back[0].provenance.alpha == 0.25

    def test_perlin_params_round_trip(self, tmp_path):
        params = PerlinParams(3.5, 2, 0.6, -0.1, seed=9)
        save_perlin_params(tmp_path / "p.json", params)
        assert load_perlin_params(tmp_path / "p.json") == params

    def test_spacing_round_trip(self, tmp_path):
        spacing = SpacingDist(np.array([1.0, 2.5, 9.0]))
        save_spacing(tmp_path / "s.json", spacing)
        assert np.array_equal(load_spacing(tmp_path / "s.json").samples, spacing.samples)

    def test_placement_log_round_trip(self, tmp_path):
        log = PlacementLog(
            [
                PlacementRecord(label=1, y=5, x=9, z=2.5, blob_id=3, pool_index=0),
                PlacementRecord(label=2, y=50, x=90, z=0.0, blob_id=1, pool_index=2),
            ]
        )
        save_placement_log(tmp_path / "log.jsonl", log)
        back = load_placement_log(tmp_path / "log.jsonl")
        assert back.records == log.records


class TestManifest:
    def _manifest(self, tmp_path):
        for rel in ("masks", "content", "tiles", "logs"):
            (tmp_path / rel).mkdir(exist_ok=True)
        save_mask_png(tmp_path / "masks/mask_0000.png", np.zeros((8, 8), dtype=np.int32))
        save_gray_png(tmp_path / "content/content_0000.png", np.zeros((8, 8), dtype=np.uint8))
        save_gray_png(tmp_path / "tiles/tile_0000.png", np.zeros((4, 4), dtype=np.uint8))
        (tmp_path / "logs/placement_0000.jsonl").write_text("")
        entry = ManifestEntry(
            generated_mask_path="masks/mask_0000.png",
            content_image_path="content/content_0000.png",
            reference_tile_path="tiles/tile_0000.png",
            seed=12345,
            prior_params={"type": "perlin", "base_frequency": 3.0, "octaves": 1,
                          "persistence": 0.5, "threshold_shift": 0.0, "seed": 7},
            blob_provenance_path="logs/placement_0000.jsonl",
        )
        return DatasetManifest(
            entries=[entry], real_images=2, generated_images=1,
            real_blobs=50, generated_blobs=10, master_seed=5,
        )

    def test_round_trip_structurally_identical(self, tmp_path):
        manifest = self._manifest(tmp_path)
        write_manifest(tmp_path / "manifest.json", manifest)
        back = read_manifest(tmp_path / "manifest.json")
        assert back.to_dict() == manifest.to_dict()

    def test_missing_referenced_file_rejected(self, tmp_path):
        manifest = self._manifest(tmp_path)
        manifest.entries[0].reference_tile_path = "tiles/absent.png"
        with pytest.raises(FileFormatError, match="missing"):
            write_manifest(tmp_path / "manifest.json", manifest)

    def test_unsupported_schema_version(self, tmp_path):
        manifest = self._manifest(tmp_path)
        write_manifest(tmp_path / "manifest.json", manifest)
        data = json.loads((tmp_path / "manifest.json").read_text())
        data["schema_version"] = 999
        (tmp_path / "manifest.json").write_text(json.dumps(data))
        with pytest.raises(FileFormatError, match="schema_version"):
            read_manifest(tmp_path / "manifest.json")
