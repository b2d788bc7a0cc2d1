"""Freezes MS-SSIM reference values from TensorFlow's tf.image.ssim_multiscale.

Writes tests/fixtures/msssim_pairs.png (20 pairs of 64x64 RGB tiles, pair k
in row k: left tile a, right tile b) and tests/fixtures/msssim_reference.json.
Run once; the C++ tests only read the outputs.
"""
import json
import os
import sys

import numpy as np
from PIL import Image
from scipy.ndimage import gaussian_filter

os.environ.setdefault("TF_CPP_MIN_LOG_LEVEL", "3")
import tensorflow as tf  # noqa: E402
from tensorflow.python.ops import image_ops_impl  # noqa: E402

# ssim_multiscale casts its inputs to float32; keep float64 end to end so the
# frozen values carry more digits than the 1e-6 comparison needs.
_convert = image_ops_impl.convert_image_dtype
image_ops_impl.convert_image_dtype = lambda x, dtype, *a, **k: x if x.dtype == tf.float64 else _convert(x, dtype, *a, **k)

WEIGHTS = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333]
N, S = 20, 64
LEVELS = 3  # largest L with 64 >= 2^(L-1) * 11


def make_pairs(rng):
    pairs = []
    for k in range(N):
        base = gaussian_filter(rng.uniform(0, 255, (S, S, 3)), sigma=(1 + k % 4, 1 + k % 4, 0))
        base = (base - base.min()) / (np.ptp(base) + 1e-9) * 255
        noise = rng.normal(0, 4 + 3 * k, (S, S, 3))
        a = np.clip(np.rint(base), 0, 255).astype(np.uint8)
        b = np.clip(np.rint(base + noise), 0, 255).astype(np.uint8)
        pairs.append((a, b))
    return pairs


def luma(img):
    x = img.astype(np.float64) / 255.0
    return (0.299 * x[..., 0] + 0.587 * x[..., 1] + 0.114 * x[..., 2])[..., None]


def main(root):
    rng = np.random.default_rng(20240611)
    pairs = make_pairs(rng)
    strip = np.zeros((N * S, 2 * S, 3), np.uint8)
    for k, (a, b) in enumerate(pairs):
        strip[k * S:(k + 1) * S, :S] = a
        strip[k * S:(k + 1) * S, S:] = b
    Image.fromarray(strip, "RGB").save(os.path.join(root, "tests/fixtures/msssim_pairs.png"))

    w = np.array(WEIGHTS[:LEVELS], np.float64)
    w = w / w.sum()
    values, ssim_single = [], []
    for a, b in pairs:
        la, lb = tf.constant(luma(a)), tf.constant(luma(b))
        assert la.dtype == tf.float64
        v = tf.image.ssim_multiscale(la, lb, max_val=1.0, power_factors=tf.constant(w), filter_size=11,
                                     filter_sigma=1.5, k1=0.01, k2=0.03)
        s = tf.image.ssim(la, lb, max_val=1.0, filter_size=11, filter_sigma=1.5, k1=0.01, k2=0.03)
        values.append(float(v.numpy()))
        ssim_single.append(float(s.numpy()))
    out = {"generator": "tf.image.ssim_multiscale (float64) " + tf.__version__, "levels": LEVELS,
           "power_factors": w.tolist(), "ms_ssim": values, "ssim": ssim_single}
    with open(os.path.join(root, "tests/fixtures/msssim_reference.json"), "w") as f:
        json.dump(out, f, indent=1)
        f.write("\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else os.path.join(os.path.dirname(__file__), "../.."))
