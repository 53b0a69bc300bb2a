import json
import math
import zlib
from pathlib import Path

import numpy as np
import pytest

import ragsc

FIXTURES = Path(__file__).resolve().parents[1] / "fixtures"
IMAGES = FIXTURES / "images"


@pytest.fixture(scope="module")
def camera():
    return ragsc.read_image(IMAGES / "camera_256.png")


@pytest.fixture(scope="module")
def camera_edges(camera):
    gray = camera if camera.ndim == 2 else ragsc.to_grayscale(camera)
    return ragsc.canny(gray)


def test_image_round_trip(tmp_path, camera):
    out = tmp_path / "copy.png"
    ragsc.write_image(camera, out)
    np.testing.assert_array_equal(ragsc.read_image(out), camera)


def test_canny_output_is_binary_and_sparse(camera_edges, camera):
    assert camera_edges.shape == camera.shape[:2]
    assert set(np.unique(camera_edges)) <= {0, 1}
    assert 0 < camera_edges.mean() < 0.2


@pytest.mark.parametrize("scheme", ["RLE", "SPARSE", "RAW"])
def test_edge_codecs_are_lossless(camera_edges, scheme):
    name, body = ragsc.encode_edges(camera_edges, scheme)
    assert name == scheme
    h, w = camera_edges.shape
    np.testing.assert_array_equal(ragsc.decode_edges(name, body, w, h), camera_edges)


def test_auto_scheme_picks_smallest_body(camera_edges):
    sizes = {s: len(ragsc.encode_edges(camera_edges, s)[1]) for s in ("RLE", "SPARSE", "RAW")}
    name, body = ragsc.encode_edges(camera_edges)
    assert len(body) == min(sizes.values())
    assert sizes[name] == len(body)


def test_raw_body_is_msb_first_bitpack():
    edges = np.zeros((3, 5), dtype=np.uint8)
    edges[0, 0] = edges[1, 2] = edges[2, 4] = 1
    _, body = ragsc.encode_edges(edges, "RAW")
    assert body == np.packbits(edges.reshape(-1)).tobytes()


def test_text_codec_interoperates_with_python_brotli():
    brotli = pytest.importorskip("brotli")
    text = ("the quick brown fox " * 512)[:10240]
    codec, body = ragsc.compress_text(text)
    assert codec == "GENERAL"
    assert brotli.decompress(body).decode() == text
    assert ragsc.decompress_text("GENERAL", brotli.compress(text.encode()), len(text)) == text


def test_short_text_falls_back_to_identity():
    codec, body = ragsc.compress_text("a")
    assert codec == "IDENTITY"
    assert body == b"a"


def test_crc32_matches_zlib():
    data = bytes(range(256)) * 7
    assert ragsc.crc32(data) == zlib.crc32(data)


def test_bsc_rate_within_three_sigma():
    data = bytes(125_000)
    p = 0.01
    flipped = ragsc.apply_bsc(data, p, 7)
    n = 8 * len(data)
    rate = ragsc.measured_ber(data, flipped)
    assert abs(rate - p) <= 3 * math.sqrt(p * (1 - p) / n)
    assert ragsc.apply_bsc(data, p, 7) == flipped
    assert ragsc.apply_bsc(data, 0.0, 7) == data


def test_ms_ssim_matches_reference_values():
    ref = json.loads((FIXTURES / "msssim" / "reference.json").read_text())
    for case in ref["cases"]:
        a = ragsc.read_image(FIXTURES / "msssim" / case["reference"])
        b = ragsc.read_image(FIXTURES / "msssim" / case["distorted"])
        assert ragsc.ms_ssim(a, b) == pytest.approx(case["ms_ssim"], abs=ref["tolerance"]), case["name"]


def test_ms_ssim_self_similarity(camera):
    assert ragsc.ms_ssim(camera, camera) == pytest.approx(1.0, abs=1e-12)


def test_errors_carry_codes(camera):
    with pytest.raises(ragsc.RagscError) as info:
        ragsc.ms_ssim(camera, camera[:128, :128])
    assert info.value.args[0] == "DimensionMismatch"
    with pytest.raises(ragsc.RagscError):
        ragsc.parse_config("no_such_key = 1")


def test_knowledge_base_persists(tmp_path):
    kb = ragsc.KnowledgeBase()
    kb.add_image("camera", IMAGES / "camera_256.png")
    kb.add_document("doc", "a photographer behind a tripod", ["note"])
    assert kb.embed_mock() == 2
    kb.persist(tmp_path / "kb")
    loaded = ragsc.KnowledgeBase.load(tmp_path / "kb")
    assert loaded.ids() == ["camera", "doc"]
    assert loaded.text("camera") == (IMAGES / "camera_256.txt").read_text().strip()
    (tmp_path / "kb" / "embeddings.f32").write_bytes(b"\0" * 8)
    with pytest.raises(ragsc.RagscError) as info:
        ragsc.KnowledgeBase.load(tmp_path / "kb")
    assert info.value.args[0] == "CorruptStore"


def test_experiment_is_deterministic(tmp_path):
    kb = ragsc.KnowledgeBase()
    for name in ("camera_256", "coffee_256"):
        kb.add_image(name, IMAGES / f"{name}.png")
    kb.persist(tmp_path / "kb")
    config = "\n".join(
        [
            f"inputs = {IMAGES / 'camera_256.png'}",
            f"kb_path = {tmp_path / 'kb'}",
            "ber_sweep = 0, 0.001",
            "seeds = 0, 1",
            "ablation = true",
        ]
    )
    first = ragsc.run_experiment(config)
    second = ragsc.run_experiment(config, ["threads=2"])
    assert first == second
    data = first.split("# summary")[0].strip().splitlines()
    assert data[0].startswith("config_id,ber,seed,")
    assert len(data) == 1 + 2 * 4 * 2
    zero_ber_both = [r for r in data[1:] if r.startswith("both,0,")]
    assert all(float(r.split(",")[5]) == 1.0 for r in zero_ber_both)
