#!/usr/bin/env python3
"""Regenerates the bundled sample images and the LPIPS linear-layer weights.

Sample images come from the scikit-image sample data (CC0 / public domain).
The LPIPS linear weights come from the `lpips` wheel (BSD-2-Clause) and are
stored as raw little-endian float32 in layer order.
"""
import hashlib
import pathlib
import sys
import zipfile
import io

import numpy as np
import skimage.data
from skimage.transform import resize
from PIL import Image

ROOT = pathlib.Path(__file__).resolve().parent.parent / "data"
NAMES = ["astronaut", "brick", "camera", "chelsea", "coffee",
         "grass", "gravel", "rocket", "coins", "immunohistochemistry"]


def to_rgb(img):
    if img.ndim == 2:
        img = np.stack([img] * 3, axis=-1)
    return img[..., :3]


def write_images():
    out = ROOT / "images"
    out.mkdir(parents=True, exist_ok=True)
    for name in NAMES:
        img = to_rgb(getattr(skimage.data, name)())
        h, w = img.shape[:2]
        s = min(h, w)
        y0, x0 = (h - s) // 2, (w - s) // 2
        crop = img[y0:y0 + s, x0:x0 + s]
        small = resize(crop, (256, 256), anti_aliasing=True, preserve_range=True)
        Image.fromarray(np.clip(small + 0.5, 0, 255).astype(np.uint8)).save(out / f"{name}.png")


def write_lpips(wheel):
    import torch
    with zipfile.ZipFile(wheel) as z:
        state = torch.load(io.BytesIO(z.read("lpips/weights/v0.1/vgg.pth")), map_location="cpu")
    chunks = [state[f"lin{i}.model.1.weight"].flatten().numpy().astype("<f4") for i in range(5)]
    blob = np.concatenate(chunks).tobytes()
    (ROOT / "lpips_vgg_lin_v0.1.bin").write_bytes(blob)
    print("lpips sha256", hashlib.sha256(blob).hexdigest(), "floats", len(blob) // 4)


if __name__ == "__main__":
    write_images()
    if len(sys.argv) > 1:
        write_lpips(sys.argv[1])
