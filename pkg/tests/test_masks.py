import numpy as np
import pytest

from filamentqc.errors import DataError
from filamentqc.masks import (
    FRAME_GLOBAL,
    FRAME_TILE,
    InstanceMask,
    SegmentationResult,
    export_masks,
    filter_masks,
    import_masks,
    rle_decode,
    rle_encode,
)


class TestRle:
    def test_center_pixel_3x3(self):
        bitmap = np.zeros((3, 3), dtype=bool)
        bitmap[1, 1] = True
        assert rle_encode(bitmap).tolist() == [4, 1, 4]

    def test_leading_foreground_gets_zero_run(self):
        bitmap = np.array([[True, False]])
        assert rle_encode(bitmap).tolist() == [0, 1, 1]

    def test_decode_encode_roundtrip(self, rng):
        for _ in range(100):
            h = int(rng.integers(1, 40))
            w = int(rng.integers(1, 40))
            bitmap = rng.random((h, w)) < rng.uniform(0.1, 0.9)
            assert np.array_equal(rle_decode(rle_encode(bitmap), w, h), bitmap)

    def test_decode_rejects_wrong_sum(self):
        with pytest.raises(DataError):
            rle_decode(np.array([1, 2]), 2, 2)

    def test_decode_rejects_negative(self):
        with pytest.raises(DataError):
            rle_decode(np.array([-1, 5]), 2, 2)


class TestInstanceMask:
    def test_requires_nonempty_foreground(self):
        with pytest.raises(ValueError):
            InstanceMask(1, np.array([9]), 3, 3, 0.5)

    def test_requires_run_sum(self):
        with pytest.raises(ValueError):
            InstanceMask(1, np.array([1, 1]), 3, 3, 0.5)

    def test_confidence_bounds(self):
        with pytest.raises(ValueError):
            InstanceMask(1, np.array([4, 1, 4]), 3, 3, 1.5)

    def test_bitmap_roundtrip(self, rng):
        bitmap = rng.random((8, 11)) < 0.5
        bitmap[0, 0] = True
        m = InstanceMask.from_bitmap(3, bitmap, 0.7)
        assert np.array_equal(m.to_bitmap(), bitmap)
        assert m.area == int(bitmap.sum())


class TestInterchange:
    def make_result(self, rng, n_masks=5, w=32, h=24):
        masks = []
        for k in range(n_masks):
            bitmap = rng.random((h, w)) < 0.4
            bitmap[k % h, k % w] = True
            masks.append(InstanceMask.from_bitmap(
                k + 1, bitmap, float(rng.random()), FRAME_TILE, (16, 8)))
        return SegmentationResult("img-7", w, h, tuple(masks), "baseline",
                                  FRAME_TILE, (16, 8))

    def test_empty_file_roundtrip(self, tmp_path):
        res = SegmentationResult("none", 10, 10, (), "baseline",
                                 FRAME_TILE, (0, 0))
        path = tmp_path / "empty.json"
        export_masks(res, path)
        back = import_masks(path)
        assert back.masks == ()
        assert back.width == 10

    def test_roundtrip_is_lossless(self, tmp_path, rng):
        res = self.make_result(rng)
        path = tmp_path / "masks.json"
        export_masks(res, path)
        back = import_masks(path)
        assert back.image_id == res.image_id
        assert back.origin == res.origin
        for a, b in zip(res.masks, back.masks):
            assert a.id == b.id
            assert np.array_equal(a.rle, b.rle)
            assert abs(a.confidence - b.confidence) < 1e-6

    def test_double_export_byte_identical(self, tmp_path, rng):
        for k in range(100):
            res = self.make_result(rng, n_masks=int(rng.integers(0, 4)))
            p1 = tmp_path / f"a{k}.json"
            p2 = tmp_path / f"b{k}.json"
            export_masks(res, p1)
            export_masks(import_masks(p1), p2)
            assert p1.read_bytes() == p2.read_bytes()

    def test_schema_violation_names_mask(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"image_id": "x", "width": 3, "height": 3, '
                        '"frame": "tile", "origin": [0, 0], '
                        '"masks": [{"id": 42, "confidence": 0.5, '
                        '"rle": [4, 1, 3]}]}')
        with pytest.raises(DataError, match="42"):
            import_masks(path)

    def test_missing_field_rejected(self, tmp_path):
        path = tmp_path / "bad2.json"
        path.write_text('{"image_id": "x", "width": 3, "height": 3, '
                        '"masks": []}')
        with pytest.raises(DataError, match="frame"):
            import_masks(path)

    def test_dim_mismatch_names_mask(self, tmp_path):
        path = tmp_path / "bad3.json"
        path.write_text('{"image_id": "x", "width": 3, "height": 3, '
                        '"frame": "global", '
                        '"masks": [{"id": 7, "confidence": 0.5, '
                        '"rle": [3, 1, 4]}]}')
        with pytest.raises(DataError, match="7"):
            import_masks(path)


class TestFilter:
    def test_identity_with_zero_thresholds(self, rng):
        res = TestInterchange().make_result(rng)
        assert filter_masks(res, 0, 0.0).masks == res.masks

    def test_all_removed(self, rng):
        res = TestInterchange().make_result(rng)
        assert filter_masks(res, 10**6, 0.0).masks == ()

    def test_matches_brute_force_predicate(self, rng):
        res = TestInterchange().make_result(rng, n_masks=8)
        got = filter_masks(res, 300, 0.5).masks
        expect = tuple(m for m in res.masks
                       if m.area >= 300 and m.confidence >= 0.5)
        assert got == expect
