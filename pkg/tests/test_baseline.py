import numpy as np
import pytest

from filamentqc.baseline import segment_baseline


def band_image(width=200, height=90, n_bands=5, band_px=12, groove_px=4,
               band_val=220, groove_val=40):
    """Bright horizontal bands separated by dark grooves on black background."""
    img = np.zeros((height, width, 3), dtype=np.uint8)
    y = 5
    for _ in range(n_bands):
        img[y:y + band_px, :, :] = band_val
        y += band_px
        img[y:y + groove_px, :, :] = groove_val
        y += groove_px
    return img


class TestBaseline:
    def test_five_bands_five_masks(self):
        res = segment_baseline(band_image(), min_area_px=50)
        assert len(res.masks) == 5
        total = sum(m.area for m in res.masks)
        assert total > 5 * 12 * 200 * 0.8

    def test_uniform_image_no_masks(self):
        img = np.full((64, 64, 3), 180, dtype=np.uint8)
        assert segment_baseline(img).masks == ()

    def test_all_black_image_empty_result(self):
        img = np.zeros((64, 64, 3), dtype=np.uint8)
        res = segment_baseline(img)
        assert res.masks == ()

    def test_vertical_gap_splits_band(self):
        img = band_image()
        img[:, 100:104, :] = 0  # gap through every band
        res = segment_baseline(img, min_area_px=50)
        assert len(res.masks) == 10

    def test_empty_rows_separate_bands(self):
        # grooves at intensity zero (true gaps) must still split bands
        img = band_image(groove_val=0)
        res = segment_baseline(img, min_area_px=50)
        assert len(res.masks) == 5

    def test_vertical_flip_symmetry(self):
        img = band_image(n_bands=3)
        res = segment_baseline(img, min_area_px=50)
        flipped = segment_baseline(img[::-1], min_area_px=50)
        got = {m.to_bitmap()[::-1].tobytes() for m in flipped.masks}
        expect = {m.to_bitmap().tobytes() for m in res.masks}
        assert got == expect

    def test_masks_never_overlap(self):
        res = segment_baseline(band_image(), min_area_px=10)
        acc = np.zeros((90, 200), dtype=int)
        for m in res.masks:
            acc += m.to_bitmap()
        assert acc.max() <= 1

    def test_min_area_drops_specks(self):
        img = band_image()
        img[40:41, 150:153, :] = 0  # tiny hole, no new instance
        res_small = segment_baseline(img, min_area_px=5000)
        assert res_small.masks == ()

    def test_confidence_in_unit_range_and_monotone(self):
        strong = segment_baseline(band_image(band_val=250, groove_val=10),
                                  min_area_px=50)
        weak = segment_baseline(band_image(band_val=120, groove_val=90),
                                min_area_px=50)
        assert all(0 <= m.confidence <= 1 for m in strong.masks + weak.masks)
        if strong.masks and weak.masks:
            assert min(m.confidence for m in strong.masks) >= \
                max(m.confidence for m in weak.masks)

    def test_rejects_bad_shape(self):
        with pytest.raises(ValueError):
            segment_baseline(np.zeros((4, 4, 2), dtype=np.uint8))
