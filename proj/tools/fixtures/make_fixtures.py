#!/usr/bin/env python3
"""Regenerates the frozen test fixtures under tests/fixtures/.

Every value written here comes from an implementation that is independent of
the C++ code under test:

  * SplitMix64 vectors from a pure-Python transcription of the generator.
  * MS-SSIM reference scores from tf.image.ssim_multiscale.
  * A Brotli stream produced by the reference encoder (python `brotli`).
  * Wire-protocol recordings whose PNG payloads are encoded by Pillow.
  * Natural test images from scikit-image's bundled data set.

Usage: python3 tools/fixtures/make_fixtures.py [--skip-tf]
"""

import argparse
import base64
import io
import json
import pathlib
import zlib

import numpy as np
from PIL import Image

ROOT = pathlib.Path(__file__).resolve().parents[2]
FIX = ROOT / "tests" / "fixtures"

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


def splitmix64_at(seed: int, index: int) -> int:
    z = (seed + (index + 1) * GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def write_prng():
    out = FIX / "prng"
    out.mkdir(parents=True, exist_ok=True)
    vectors = []
    for seed in (0, 1, 42, 0xDEADBEEFCAFEF00D):
        vectors.append({
            "seed": str(seed),
            "outputs": [f"{splitmix64_at(seed, i):016x}" for i in range(8)],
        })
    # Flip pattern of apply_bsc(p=0.25) on 4 zero bytes.
    seed, p, nbytes = 7, 0.25, 4
    flipped = bytearray(nbytes)
    for i in range(nbytes * 8):
        u = (splitmix64_at(seed, i) >> 11) * (1.0 / (1 << 53))
        if u < p:
            flipped[i // 8] |= 0x80 >> (i % 8)
    doc = {
        "generator": "splitmix64-counter",
        "vectors": vectors,
        "bsc": {"seed": seed, "p": p, "input_hex": "00" * nbytes,
                "output_hex": flipped.hex()},
        "crc32": {"": f"{zlib.crc32(b''):08x}",
                  "123456789": f"{zlib.crc32(b'123456789'):08x}"},
    }
    (out / "splitmix64_vectors.json").write_text(json.dumps(doc, indent=2) + "\n")


def save_png(arr: np.ndarray, path: pathlib.Path):
    Image.fromarray(arr).save(path, optimize=True)


def natural_images():
    import skimage.data as d
    return {
        "camera": d.camera(),
        "astronaut": d.astronaut(),
        "coffee": d.coffee(),
        "coins": d.coins(),
        "moon": d.moon(),
        "chelsea": d.chelsea(),
        "rocket": d.rocket(),
        "clock": d.clock(),
        "brick": d.brick(),
        "grass": d.grass(),
    }


def gray(a):
    if a.ndim == 2:
        return a
    return np.clip(np.round(0.299 * a[..., 0] + 0.587 * a[..., 1] + 0.114 * a[..., 2]), 0, 255).astype(np.uint8)


def write_msssim(skip_tf: bool):
    out = FIX / "msssim"
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(20241014)
    imgs = natural_images()

    def crop(a, h, w, y=40, x=60):
        return np.ascontiguousarray(a[y:y + h, x:x + w])

    def noise(a, sigma):
        return np.clip(np.round(a.astype(np.float64) + rng.normal(0, sigma, a.shape)), 0, 255).astype(np.uint8)

    def box_blur(a):
        f = a.astype(np.float64)
        p = np.pad(f, [(1, 1), (1, 1)] + [(0, 0)] * (a.ndim - 2), mode="edge")
        acc = sum(p[dy:dy + a.shape[0], dx:dx + a.shape[1]] for dy in range(3) for dx in range(3))
        return np.round(acc / 9.0).astype(np.uint8)

    cases = [
        ("camera_noise5", gray(crop(imgs["camera"], 192, 192)), lambda a: noise(a, 5)),
        ("camera_noise25", gray(crop(imgs["camera"], 192, 192)), lambda a: noise(a, 25)),
        ("coins_blur", gray(crop(imgs["coins"], 192, 192)), box_blur),
        ("moon_invert", gray(crop(imgs["moon"], 192, 192)), lambda a: (255 - a).astype(np.uint8)),
        ("brick_shift", gray(crop(imgs["brick"], 192, 192)),
         lambda a: np.clip(a.astype(np.int32) + 20, 0, 255).astype(np.uint8)),
        ("grass_contrast", gray(crop(imgs["grass"], 192, 192)),
         lambda a: np.clip(np.round((a.astype(np.float64) - 128) * 0.6 + 128), 0, 255).astype(np.uint8)),
        ("clock_odd_noise10", gray(crop(imgs["clock"], 181, 185)), lambda a: noise(a, 10)),
        ("coffee_rgb_noise12", crop(imgs["coffee"], 192, 192), lambda a: noise(a, 12)),
        ("astronaut_rgb_blur", crop(imgs["astronaut"], 200, 192), box_blur),
        ("chelsea_rgb_downup", crop(imgs["chelsea"], 192, 192),
         lambda a: np.repeat(np.repeat(a[::2, ::2], 2, axis=0), 2, axis=1)),
    ]

    entries = []
    pairs = []
    for name, ref, fn in cases:
        dist = fn(ref)
        save_png(ref, out / f"{name}_ref.png")
        save_png(dist, out / f"{name}_dist.png")
        pairs.append((name, ref, dist))

    if not skip_tf:
        import tensorflow as tf
        for name, ref, dist in pairs:
            a = ref if ref.ndim == 3 else ref[..., None]
            b = dist if dist.ndim == 3 else dist[..., None]
            score = tf.image.ssim_multiscale(
                tf.constant(a[None].astype(np.float64)),
                tf.constant(b[None].astype(np.float64)),
                max_val=255.0, filter_size=11, filter_sigma=1.5, k1=0.01, k2=0.03)
            entries.append({"name": name, "reference": f"{name}_ref.png",
                            "distorted": f"{name}_dist.png",
                            "ms_ssim": float(score.numpy()[0])})
        doc = {"reference_implementation": "tf.image.ssim_multiscale (float64, max_val=255)",
               "tolerance": 1e-3, "cases": entries}
        (out / "reference.json").write_text(json.dumps(doc, indent=2) + "\n")


def write_codec():
    import brotli
    out = FIX / "codec"
    out.mkdir(parents=True, exist_ok=True)
    fox = (b"the quick brown fox " * 512)[:10240]
    body = brotli.compress(fox)
    (out / "fox_10k.br").write_bytes(body)
    meta = {"original_len": len(fox), "reference_encoder_len": len(body),
            "plaintext": "\"the quick brown fox \" repeated to 10240 bytes"}
    (out / "fox_10k.json").write_text(json.dumps(meta, indent=2) + "\n")


def png_b64(arr: np.ndarray) -> str:
    buf = io.BytesIO()
    Image.fromarray(arr, mode="RGB").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def write_protocol():
    out = FIX / "protocol"
    out.mkdir(parents=True, exist_ok=True)
    w, h = 8, 6
    bits = np.zeros((h, w), dtype=np.uint8)
    bits[1, 1:7] = 1
    bits[4, 1:7] = 1
    bits[1:5, 1] = 1
    bits[1:5, 6] = 1
    edge_rgb = np.repeat((bits * 255)[..., None], 3, axis=2)
    ref = np.zeros((h, w, 3), dtype=np.uint8)
    ref[..., 0] = np.arange(w, dtype=np.uint8)[None, :] * 30
    ref[..., 1] = np.arange(h, dtype=np.uint8)[:, None] * 40
    ref[..., 2] = 200
    request = {
        "prompt": "a lake Context: stone bridge with pedestrians; ",
        "edge_map_png_b64": png_b64(edge_rgb),
        "reference_png_b64": [png_b64(ref)],
        "width": w,
        "height": h,
        "seed": 1234,
        "steps": 30,
    }
    (out / "generate_request.json").write_text(json.dumps(request, indent=2) + "\n")
    (out / "reference.png").write_bytes(base64.b64decode(request["reference_png_b64"][0]))
    (out / "edge_bits.txt").write_text("\n".join("".join(str(v) for v in row) for row in bits) + "\n")

    img = np.zeros((h, w, 3), dtype=np.uint8)
    img[..., 0] = (np.arange(h * w).reshape(h, w) * 5) % 256
    img[..., 1] = 255 - img[..., 0]
    img[..., 2] = 17
    response = {"image_png_b64": png_b64(img), "generator_id": "sdxl-controlnet-canny"}
    (out / "generate_response.json").write_text(json.dumps(response, indent=2) + "\n")
    (out / "generate_response_pixels.json").write_text(
        json.dumps({"width": w, "height": h, "rgb": img.reshape(-1).tolist()}) + "\n")


def write_images():
    out = FIX / "images"
    out.mkdir(parents=True, exist_ok=True)
    imgs = natural_images()
    save_png(imgs["astronaut"], out / "astronaut_512.png")
    save_png(np.ascontiguousarray(imgs["camera"][100:356, 128:384]), out / "camera_256.png")
    save_png(np.ascontiguousarray(imgs["coffee"][50:306, 120:376]), out / "coffee_256.png")
    save_png(np.ascontiguousarray(imgs["rocket"][100:356, 200:456]), out / "rocket_256.png")
    captions = {
        "astronaut_512.png": "an astronaut in a white spacesuit posing in front of a flag",
        "camera_256.png": "a photographer in a dark coat operating a camera on a tripod",
        "coffee_256.png": "a cup of coffee with latte art on a saucer",
        "rocket_256.png": "a rocket standing on the launch pad against the sky",
    }
    for name, text in captions.items():
        (out / (pathlib.Path(name).stem + ".txt")).write_text(text + "\n")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--skip-tf", action="store_true")
    args = ap.parse_args()
    write_prng()
    write_codec()
    write_protocol()
    write_images()
    write_msssim(args.skip_tf)


if __name__ == "__main__":
    main()
