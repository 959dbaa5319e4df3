import numpy as np
import pytest

from filamentqc.errors import DataError
from filamentqc.masks import FRAME_GLOBAL, FRAME_TILE, InstanceMask, SegmentationResult
from filamentqc.tiles import (
    GlobalInstance,
    TileGrid,
    merge_instances,
    read_manifest,
    reattach,
    tile,
    write_manifest,
)


def seg_result(origin, bitmap, conf=0.8, image_id="t"):
    mask = InstanceMask.from_bitmap(1, bitmap, conf, FRAME_TILE, origin)
    return SegmentationResult(image_id, bitmap.shape[1], bitmap.shape[0],
                              (mask,), "baseline", FRAME_TILE, origin)


class TestTileGrid:
    def test_single_tile(self):
        grid = TileGrid(512, 512, 512, 64)
        assert grid.origins == [(0, 0)]

    def test_spec_anchor_example_1024(self):
        grid = TileGrid(1024, 512, 512, 64)
        xs = sorted({o[0] for o in grid.origins})
        assert xs == [0, 448, 512]
        assert len(grid.origins) == 3

    def test_three_tiles_when_flush_matches_stride(self):
        grid = TileGrid(1408, 512, 512, 64)
        xs = sorted({o[0] for o in grid.origins})
        assert xs == [0, 448, 896]

    def test_small_image_single_undersized_tile(self):
        grid = TileGrid(100, 40, 512, 64)
        assert grid.origins == [(0, 0)]
        assert grid.tile_rect((0, 0)) == (0, 0, 100, 40)

    def test_coverage_property(self, rng):
        for _ in range(50):
            w = int(rng.integers(1, 1600))
            h = int(rng.integers(1, 900))
            t = int(rng.integers(2, 600))
            o = int(rng.integers(0, t))
            grid = TileGrid(w, h, t, o)
            painted = np.zeros((h, w), dtype=int)
            for origin in grid.origins:
                x0, y0, tw, th = grid.tile_rect(origin)
                painted[y0:y0 + th, x0:x0 + tw] += 1
            assert painted.min() >= 1

    def test_invalid_params(self):
        with pytest.raises(ValueError):
            TileGrid(100, 100, 64, 64)
        with pytest.raises(ValueError):
            TileGrid(0, 100, 64, 0)

    def test_tile_cuts_match_origins(self, rng):
        img = rng.integers(0, 255, size=(300, 700, 3), dtype=np.uint8)
        grid = TileGrid(700, 300, 256, 32)
        cuts = tile(img, grid)
        assert len(cuts) == len(grid.origins)
        for (x0, y0), sub in cuts:
            assert np.array_equal(sub, img[y0:y0 + sub.shape[0],
                                           x0:x0 + sub.shape[1]])


class TestReattach:
    def test_translation(self):
        bitmap = np.zeros((20, 30), dtype=bool)
        bitmap[10, 10] = True
        out = reattach([((448, 0), seg_result((448, 0), bitmap))], 600, 20)
        assert len(out) == 1
        gm = out[0].to_bitmap()
        assert gm[10, 458]
        assert gm.sum() == 1
        assert out[0].frame == FRAME_GLOBAL
        assert out[0].source_rect == (448, 0, 30, 20)

    def test_empty_input(self):
        assert reattach([], 100, 100) == []

    def test_crop_paste_roundtrip(self, rng):
        w, h = 120, 60
        full = rng.random((h, w)) < 0.3
        full[0, 0] = True
        grid = TileGrid(w, h, 48, 16)
        results = []
        for origin in grid.origins:
            x0, y0, tw, th = grid.tile_rect(origin)
            crop = full[y0:y0 + th, x0:x0 + tw]
            if crop.any():
                results.append((origin, seg_result(origin, crop)))
        out = reattach(results, w, h)
        union = np.zeros((h, w), dtype=bool)
        for m in out:
            restored = m.to_bitmap()
            x0, y0, tw, th = m.source_rect
            assert np.array_equal(restored[y0:y0 + th, x0:x0 + tw],
                                  full[y0:y0 + th, x0:x0 + tw])
            union |= restored
        assert np.array_equal(union, full)

    def test_out_of_bounds_rejected(self):
        bitmap = np.ones((20, 30), dtype=bool)
        with pytest.raises(DataError):
            reattach([((90, 0), seg_result((90, 0), bitmap))], 100, 20)


def band_mask_global(w, h, rows, rect, conf=0.8, mask_id=1):
    bitmap = np.zeros((h, w), dtype=bool)
    x0, y0, tw, th = rect
    bitmap[rows, x0:x0 + tw] = True
    return InstanceMask.from_bitmap(mask_id, bitmap, conf, FRAME_GLOBAL,
                                    (0, 0), rect)


class TestMerge:
    W, H = 1408, 512

    def make_band_pieces(self, overlap=64, conf=(0.5, 0.9, 0.7)):
        grid = TileGrid(self.W, self.H, 512, overlap)
        rows = slice(100, 120)
        pieces = []
        for k, origin in enumerate(grid.origins):
            rect = grid.tile_rect(origin)
            pieces.append(band_mask_global(self.W, self.H, rows, rect,
                                           conf[k % len(conf)], k + 1))
        return grid, pieces

    def test_identical_masks_merge(self):
        rect_a = (0, 0, 512, 512)
        rect_b = (448, 0, 512, 512)
        rows = slice(10, 30)
        a = band_mask_global(self.W, self.H, rows, (448, 0, 64, 512), 0.5, 1)
        b = band_mask_global(self.W, self.H, rows, (448, 0, 64, 512), 0.9, 2)
        a = InstanceMask(1, a.rle, self.W, self.H, 0.5, FRAME_GLOBAL, (0, 0),
                         rect_a)
        b = InstanceMask(2, b.rle, self.W, self.H, 0.9, FRAME_GLOBAL, (0, 0),
                         rect_b)
        out = merge_instances([a, b], 0.5, self.W, self.H)
        assert len(out) == 1
        assert out[0].confidence == 0.9

    def test_disjoint_masks_stay_apart(self):
        a = band_mask_global(self.W, self.H, slice(10, 30), (0, 0, 512, 512),
                             0.5, 1)
        b = band_mask_global(self.W, self.H, slice(200, 230),
                             (448, 0, 512, 512), 0.6, 2)
        out = merge_instances([a, b], 0.5, self.W, self.H)
        assert len(out) == 2

    def test_band_across_three_tiles_unifies(self):
        grid, pieces = self.make_band_pieces()
        out = merge_instances(pieces, 0.5, self.W, self.H)
        assert len(out) == 1
        expect = np.zeros((self.H, self.W), dtype=bool)
        expect[100:120, :] = True
        assert np.array_equal(out[0].mask.to_bitmap(), expect)
        assert out[0].confidence == 0.9
        assert len(out[0].member_tiles) == 3

    def test_zero_overlap_keeps_three(self):
        grid = TileGrid(1536, self.H, 512, 0)
        rows = slice(100, 120)
        pieces = [band_mask_global(1536, self.H, rows, grid.tile_rect(o),
                                   0.5, k + 1)
                  for k, o in enumerate(grid.origins)]
        out = merge_instances(pieces, 0.5, 1536, self.H)
        assert len(out) == 3

    def test_permutation_invariance(self, rng):
        _, pieces = self.make_band_pieces()
        extra = band_mask_global(self.W, self.H, slice(300, 315),
                                 (0, 0, 512, 512), 0.4, 9)
        base = merge_instances(pieces + [extra], 0.5, self.W, self.H)
        for _ in range(5):
            perm = list(rng.permutation(len(pieces) + 1))
            shuffled = [(pieces + [extra])[k] for k in perm]
            got = merge_instances(shuffled, 0.5, self.W, self.H)
            assert len(got) == len(base)
            for a, b in zip(base, got):
                assert a.id == b.id
                assert np.array_equal(a.mask.rle, b.mask.rle)
                assert a.confidence == b.confidence

    def test_threshold_zero_needs_shared_pixel(self):
        a = band_mask_global(self.W, self.H, slice(10, 30), (0, 0, 512, 512),
                             0.5, 1)
        b = band_mask_global(self.W, self.H, slice(200, 230),
                             (448, 0, 512, 512), 0.6, 2)
        out = merge_instances([a, b], 0.0, self.W, self.H)
        assert len(out) == 2  # no shared pixel, tau=0 must not merge
        c = band_mask_global(self.W, self.H, slice(10, 30),
                             (448, 0, 512, 512), 0.6, 3)
        out = merge_instances([a, c], 0.0, self.W, self.H)
        assert len(out) == 1

    def test_threshold_validated(self):
        with pytest.raises(ValueError):
            merge_instances([], 1.5, 10, 10)

    def test_merged_mask_is_exact_union(self, rng):
        grid, pieces = self.make_band_pieces()
        out = merge_instances(pieces, 0.5, self.W, self.H)
        union = np.zeros((self.H, self.W), dtype=bool)
        for p in pieces:
            union |= p.to_bitmap()
        assert np.array_equal(out[0].mask.to_bitmap(), union)
        assert out[0].mask.area >= max(p.area for p in pieces)

    def test_mask_inside_single_tile_survives_pipeline(self):
        w, h = 1024, 512
        grid = TileGrid(w, h, 512, 64)
        full = np.zeros((h, w), dtype=bool)
        full[40:60, 10:200] = True  # strictly inside tile (0, 0)
        results = []
        for origin in grid.origins:
            x0, y0, tw, th = grid.tile_rect(origin)
            crop = full[y0:y0 + th, x0:x0 + tw]
            if crop.any():
                results.append((origin, seg_result(origin, crop)))
        gl = reattach(results, w, h)
        out = merge_instances(gl, 0.5, w, h)
        assert len(out) == 1
        assert np.array_equal(out[0].mask.to_bitmap(), full)


class TestManifest:
    def test_roundtrip(self, tmp_path):
        grid = TileGrid(1024, 512, 512, 64)
        names = [f"tiles/t{k}.png" for k in range(len(grid.origins))]
        path = tmp_path / "manifest.json"
        write_manifest(path, "img", grid, 0.001, names)
        doc = read_manifest(path)
        assert doc["image_id"] == "img"
        assert doc["width"] == 1024
        assert [tuple(t["origin"]) for t in doc["tiles"]] == grid.origins
        assert doc["tiles"][0]["file"] == "tiles/t0.png"

    def test_missing_fields_detected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"image_id": "x"}')
        with pytest.raises(DataError):
            read_manifest(path)
