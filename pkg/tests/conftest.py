import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def brute_force_edt(mask: np.ndarray) -> np.ndarray:
    """Independent O(n^2) oracle: per foreground pixel, the minimum Euclidean
    distance to any background pixel, after the same 1-px background pad the
    implementation applies. Integer arithmetic throughout, sqrt at the end."""
    fg = np.asarray(mask, dtype=bool)
    h, w = fg.shape
    padded = np.zeros((h + 2, w + 2), dtype=bool)
    padded[1:-1, 1:-1] = fg
    bg_r, bg_c = np.nonzero(~padded)
    fr, fc = np.nonzero(padded)
    out = np.zeros(padded.shape, dtype=np.float64)
    chunk = 1024
    for lo in range(0, fr.size, chunk):
        hi = min(fr.size, lo + chunk)
        d2 = (fr[lo:hi, None] - bg_r[None, :]) ** 2 \
            + (fc[lo:hi, None] - bg_c[None, :]) ** 2
        out[fr[lo:hi], fc[lo:hi]] = np.sqrt(d2.min(axis=1))
    return out[1:-1, 1:-1]


def random_mask(rng, max_side=64) -> np.ndarray:
    h = int(rng.integers(1, max_side + 1))
    w = int(rng.integers(1, max_side + 1))
    density = rng.uniform(0.05, 0.95)
    return rng.random((h, w)) < density
