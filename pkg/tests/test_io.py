import hashlib
import io as stdio
import struct
import zlib

import numpy as np
import pytest

from fringesim.detectors import feature_distance, profile_embedding
from fringesim.io import (
    ImageFormatError,
    Manifest,
    ManifestEntry,
    decode_image,
    encode_image,
    load_image,
    quantize_u8,
    save_image,
    synth_face,
    write_sweep_csv,
)

# generated once from synth_face(0, 960, 1280) encoded as PGM, then frozen
GOLDEN_FACE_SHA256 = "cf0808bbd449e26ffdd4c952cccd34c1134a86a213b6516ac90f2f0c955b133f"


class TestQuantization:
    def test_round_half_up(self):
        np.testing.assert_array_equal(
            quantize_u8(np.array([0.0, 0.5 / 255, 1.5 / 255, 1.0])), [0, 1, 2, 255]
        )

    def test_clamps_out_of_range(self):
        np.testing.assert_array_equal(quantize_u8(np.array([-0.2, 1.7])), [0, 255])


class TestPnm:
    def test_pgm_round_trip_quantization_bound(self):
        rng = np.random.default_rng(0)
        img = rng.uniform(0, 1, (24, 31))
        out = decode_image(encode_image(img, "pgm"))
        assert np.abs(out - img).max() <= 1 / 510 + 1e-12

    def test_ppm_round_trip_quantization_bound(self):
        rng = np.random.default_rng(1)
        img = rng.uniform(0, 1, (16, 9, 3))
        out = decode_image(encode_image(img, "ppm"))
        assert out.shape == (16, 9, 3)
        assert np.abs(out - img).max() <= 1 / 510 + 1e-12

    def test_already_quantized_images_round_trip_exactly(self):
        rng = np.random.default_rng(2)
        img = rng.integers(0, 256, (12, 7)).astype(np.float64) / 255.0
        out = decode_image(encode_image(img, "pgm"))
        np.testing.assert_array_equal(out, img)

    def test_p5_header_with_comment(self):
        raw = b"P5 # sixteen gray pixels\n4 4 255\n" + bytes(range(16))
        img = decode_image(raw)
        assert img.shape == (4, 4)
        assert img[0, 1] == 1 / 255

    def test_p5_single_space_header(self):
        img = decode_image(b"P5 4 4 255 " + bytes(16))
        assert img.shape == (4, 4)

    def test_truncated_raster(self):
        raw = b"P5\n4 4\n255\n" + bytes(10)
        with pytest.raises(ImageFormatError):
            decode_image(raw)

    def test_dimension_overflow(self):
        raw = b"P5\n100000 100000\n255\n"
        with pytest.raises(ImageFormatError):
            decode_image(raw)

    def test_sixteen_bit_maxval_unsupported(self):
        raw = b"P5\n2 2\n65535\n" + bytes(8)
        with pytest.raises(ImageFormatError):
            decode_image(raw)

    def test_pgm_rejects_color(self):
        with pytest.raises(ImageFormatError):
            encode_image(np.ones((4, 4, 3)), "pgm")

    def test_ppm_rejects_gray(self):
        with pytest.raises(ImageFormatError):
            encode_image(np.ones((4, 4)), "ppm")


class TestPng:
    def test_gray_round_trip_is_idempotent(self):
        rng = np.random.default_rng(3)
        img = rng.uniform(0, 1, (20, 15))
        once = decode_image(encode_image(img, "png"))
        twice = decode_image(encode_image(once, "png"))
        np.testing.assert_array_equal(once, twice)

    def test_color_round_trip(self):
        rng = np.random.default_rng(4)
        img = rng.uniform(0, 1, (10, 11, 3))
        out = decode_image(encode_image(img, "png"))
        assert out.shape == (10, 11, 3)
        # sRGB quantization error in linear space is largest near white
        assert np.abs(out - img).max() < 1 / 100

    def test_decode_matches_independent_codec(self):
        # Pillow acts as the independent encoder; its adaptive row filters
        # exercise the Sub/Up/Average/Paeth reconstruction paths
        PIL = pytest.importorskip("PIL.Image")
        rng = np.random.default_rng(5)
        base = np.linspace(0, 255, 64 * 48).reshape(64, 48)
        arr = (base + rng.integers(0, 40, (64, 48))).clip(0, 255).astype(np.uint8)
        buf = stdio.BytesIO()
        PIL.fromarray(arr, mode="L").save(buf, format="PNG")
        ours = decode_image(buf.getvalue())
        encoded = arr / 255.0
        expected = np.where(encoded <= 0.04045, encoded / 12.92,
                            ((encoded + 0.055) / 1.055) ** 2.4)
        np.testing.assert_allclose(ours, expected, atol=1e-12)

    def test_decode_rgb_matches_independent_codec(self):
        PIL = pytest.importorskip("PIL.Image")
        rng = np.random.default_rng(6)
        arr = rng.integers(0, 256, (50, 37, 3)).astype(np.uint8)
        buf = stdio.BytesIO()
        PIL.fromarray(arr, mode="RGB").save(buf, format="PNG")
        ours = decode_image(buf.getvalue())
        encoded = arr / 255.0
        expected = np.where(encoded <= 0.04045, encoded / 12.92,
                            ((encoded + 0.055) / 1.055) ** 2.4)
        np.testing.assert_allclose(ours, expected, atol=1e-12)

    def test_interlaced_png_unsupported(self):
        header = struct.pack(">LLBBBBB", 4, 4, 8, 0, 0, 0, 1)  # interlace = 1
        chunk = struct.pack(">L", len(header)) + b"IHDR" + header
        chunk += struct.pack(">L", zlib.crc32(b"IHDR" + header) & 0xFFFFFFFF)
        raw = b"\x89PNG\r\n\x1a\n" + chunk
        with pytest.raises(ImageFormatError, match="interlaced"):
            decode_image(raw)

    def test_sixteen_bit_png_unsupported(self):
        header = struct.pack(">LLBBBBB", 4, 4, 16, 0, 0, 0, 0)
        chunk = struct.pack(">L", len(header)) + b"IHDR" + header
        chunk += struct.pack(">L", zlib.crc32(b"IHDR" + header) & 0xFFFFFFFF)
        raw = b"\x89PNG\r\n\x1a\n" + chunk
        with pytest.raises(ImageFormatError, match="bit depth"):
            decode_image(raw)

    def test_bad_crc_rejected(self):
        blob = bytearray(encode_image(np.ones((4, 4)), "png"))
        blob[-5] ^= 0xFF  # corrupt the IEND checksum
        with pytest.raises(ImageFormatError, match="CRC"):
            decode_image(bytes(blob))

    def test_unknown_blob_rejected(self):
        with pytest.raises(ImageFormatError):
            decode_image(b"GIF89a....")


class TestFileRoundTrip:
    def test_save_and_load_by_extension(self, tmp_path):
        rng = np.random.default_rng(7)
        img = rng.uniform(0, 1, (32, 32))
        for name in ("x.pgm", "x.png"):
            path = tmp_path / name
            save_image(img, path)
            out = load_image(path)
            assert out.shape == img.shape

    def test_unsupported_extension(self, tmp_path):
        with pytest.raises(ImageFormatError):
            save_image(np.ones((4, 4)), tmp_path / "x.webp")


class TestSynthFace:
    def test_determinism(self):
        a = synth_face(12, 128, 96)
        b = synth_face(12, 128, 96)
        np.testing.assert_array_equal(a, b)

    def test_seeds_give_distinct_embeddings(self):
        a = synth_face(0, 128, 96)
        b = synth_face(1, 128, 96)
        dist = feature_distance(profile_embedding(a, 16), profile_embedding(b, 16))
        assert dist > 0

    def test_golden_hash(self):
        blob = encode_image(synth_face(0, 960, 1280), "pgm")
        assert hashlib.sha256(blob).hexdigest() == GOLDEN_FACE_SHA256

    def test_image_invariants(self):
        for seed in range(5):
            img = synth_face(seed, 96, 64)
            assert img.shape == (96, 64)
            assert np.isfinite(img).all()
            assert img.min() >= 0
            assert img.max() <= 1.0

    def test_minimum_size_enforced(self):
        with pytest.raises(ValueError):
            synth_face(0, 32, 128)

    def test_feature_band_does_not_trip_detector(self):
        from fringesim.detectors import fringe_run_verdict

        for seed in range(4):
            img = synth_face(seed, 240, 320)
            assert fringe_run_verdict(img, (0.4, 0.6), 0.5, 2).label == 1

    def test_face_scale(self):
        near = synth_face(0, 128, 128, face_scale=1.0)
        far = synth_face(0, 128, 128, face_scale=0.5)
        assert far.mean() < near.mean()  # smaller bright oval


class TestManifest:
    def test_round_trip(self, tmp_path):
        manifest = Manifest([
            ManifestEntry("a.pgm", "s1", {"period_us": 1000, "duty": 0.5}, "18cm", "0"),
            ManifestEntry("b.pgm", "s2", "normal"),
        ])
        path = tmp_path / "manifest.json"
        manifest.save(path)
        loaded = Manifest.load(path)
        assert loaded == manifest

    def test_duplicate_paths_rejected(self):
        with pytest.raises(ValueError):
            Manifest([ManifestEntry("a.pgm", "s1"), ManifestEntry("a.pgm", "s2")])

    def test_condition_validation(self):
        with pytest.raises(ValueError):
            ManifestEntry("a.pgm", "s1", condition="modulated")


class TestSweepCsv:
    def test_header_and_rows(self):
        buf = stdio.StringIO()
        write_sweep_csv(buf, [("stub", "period=1000us", 30, 30, "1.0000")])
        lines = buf.getvalue().strip().splitlines()
        assert lines[0] == "model,condition,n_b,n_a,rate"
        assert lines[1] == "stub,period=1000us,30,30,1.0000"
