"""Image codecs, synthetic test faces, dataset manifests, and report tables.

Pixels live in linear-light floats. PGM (P5) and PPM (P6) bytes map
linearly to [0, 1]; PNG is treated as sRGB-encoded, so its transfer curve
is applied on decode and encode. Only 8-bit, non-interlaced PNG without a
palette is supported; that keeps the codec small and fully verifiable.
"""

from __future__ import annotations

import csv
import json
import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from .validation import check_image

# refuse absurd header dimensions before allocating
MAX_PIXELS = 1 << 28

_PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"


class ImageFormatError(ValueError):
    """Unsupported, truncated, or malformed image file."""


def quantize_u8(image) -> np.ndarray:
    """Clamp to [0, 1] and quantize to bytes, rounding half up."""
    arr = np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0)
    return np.floor(arr * 255.0 + 0.5).astype(np.uint8)


def _srgb_encode(linear: np.ndarray) -> np.ndarray:
    linear = np.clip(linear, 0.0, 1.0)
    low = linear * 12.92
    high = 1.055 * np.power(linear, 1.0 / 2.4) - 0.055
    return np.where(linear <= 0.0031308, low, high)


def _srgb_decode(encoded: np.ndarray) -> np.ndarray:
    low = encoded / 12.92
    high = np.power((encoded + 0.055) / 1.055, 2.4)
    return np.where(encoded <= 0.04045, low, high)


# ---------------------------------------------------------------------------
# PGM / PPM


def _read_netpbm_header(data: bytes, magic: bytes):
    # tokens separated by whitespace, '#' comments run to end of line
    pos = len(magic)
    tokens = []
    while len(tokens) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos >= len(data):
            raise ImageFormatError("truncated header")
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    if pos >= len(data):
        raise ImageFormatError("truncated header")
    pos += 1  # single whitespace byte after maxval
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError as exc:
        raise ImageFormatError(f"bad header token: {exc}") from exc
    if width < 1 or height < 1:
        raise ImageFormatError(f"bad dimensions {width}x{height}")
    if width * height > MAX_PIXELS:
        raise ImageFormatError(f"dimension overflow: {width}x{height}")
    if not 0 < maxval <= 255:
        raise ImageFormatError(f"unsupported maxval {maxval}, only 8-bit supported")
    return width, height, maxval, pos


def _decode_pnm(data: bytes) -> np.ndarray:
    magic = data[:2]
    channels = 1 if magic == b"P5" else 3
    width, height, maxval, pos = _read_netpbm_header(data, magic)
    need = width * height * channels
    raster = data[pos : pos + need]
    if len(raster) < need:
        raise ImageFormatError("truncated raster")
    arr = np.frombuffer(raster, dtype=np.uint8).astype(np.float64) / maxval
    if channels == 1:
        return arr.reshape(height, width)
    return arr.reshape(height, width, 3)


def _encode_pnm(image: np.ndarray, magic: bytes) -> bytes:
    data = quantize_u8(image)
    header = b"%s\n%d %d\n255\n" % (magic, image.shape[1], image.shape[0])
    return header + data.tobytes()


# ---------------------------------------------------------------------------
# PNG (8-bit, color types 0 and 2, no interlace)


def _paeth(a: int, b: int, c: int) -> int:
    p = a + b - c
    pa, pb, pc = abs(p - a), abs(p - b), abs(p - c)
    if pa <= pb and pa <= pc:
        return a
    if pb <= pc:
        return b
    return c


def _decode_png(data: bytes) -> np.ndarray:
    if data[:8] != _PNG_SIGNATURE:
        raise ImageFormatError("not a PNG file")
    pos = 8
    header = None
    idat = bytearray()
    while pos < len(data):
        if pos + 8 > len(data):
            raise ImageFormatError("truncated chunk header")
        length, ctype = struct.unpack(">L4s", data[pos : pos + 8])
        chunk = data[pos + 8 : pos + 8 + length]
        if len(chunk) < length or pos + 12 + length > len(data):
            raise ImageFormatError("truncated chunk")
        (crc,) = struct.unpack(">L", data[pos + 8 + length : pos + 12 + length])
        if crc != (zlib.crc32(ctype + chunk) & 0xFFFFFFFF):
            raise ImageFormatError(f"bad CRC in {ctype!r} chunk")
        pos += 12 + length
        if ctype == b"IHDR":
            header = struct.unpack(">LLBBBBB", chunk)
        elif ctype == b"IDAT":
            idat.extend(chunk)
        elif ctype == b"IEND":
            break
        elif ctype == b"PLTE":
            raise ImageFormatError("palette PNG is unsupported")
    if header is None:
        raise ImageFormatError("missing IHDR")
    width, height, depth, color, comp, filt, interlace = header
    if interlace != 0:
        raise ImageFormatError("interlaced PNG is unsupported")
    if depth != 8:
        raise ImageFormatError(f"bit depth {depth} is unsupported, only 8")
    if color not in (0, 2):
        raise ImageFormatError(f"color type {color} is unsupported (gray or RGB only)")
    if comp != 0 or filt != 0:
        raise ImageFormatError("unsupported compression/filter method")
    if width < 1 or height < 1:
        raise ImageFormatError(f"bad dimensions {width}x{height}")
    if width * height > MAX_PIXELS:
        raise ImageFormatError(f"dimension overflow: {width}x{height}")
    channels = 1 if color == 0 else 3
    try:
        raw = zlib.decompress(bytes(idat))
    except zlib.error as exc:
        raise ImageFormatError(f"bad IDAT stream: {exc}") from exc
    stride = width * channels
    if len(raw) < height * (stride + 1):
        raise ImageFormatError("truncated image data")

    out = np.zeros((height, stride), dtype=np.uint8)
    prev = np.zeros(stride, dtype=np.uint8)
    bpp = channels
    for y in range(height):
        offset = y * (stride + 1)
        ftype = raw[offset]
        line = np.frombuffer(raw, dtype=np.uint8, count=stride, offset=offset + 1).copy()
        if ftype == 0:
            recon = line
        elif ftype == 2:  # Up
            recon = line + prev
        elif ftype in (1, 3, 4):
            recon = line
            for x in range(stride):
                left = int(recon[x - bpp]) if x >= bpp else 0
                if ftype == 1:  # Sub
                    recon[x] = (int(line[x]) + left) & 0xFF
                elif ftype == 3:  # Average
                    recon[x] = (int(line[x]) + (left + int(prev[x])) // 2) & 0xFF
                else:  # Paeth
                    upleft = int(prev[x - bpp]) if x >= bpp else 0
                    recon[x] = (int(line[x]) + _paeth(left, int(prev[x]), upleft)) & 0xFF
        else:
            raise ImageFormatError(f"unknown filter type {ftype}")
        out[y] = recon
        prev = recon
    linear = _srgb_decode(out.astype(np.float64) / 255.0)
    if channels == 1:
        return linear
    return linear.reshape(height, width, 3)


def _png_chunk(ctype: bytes, payload: bytes) -> bytes:
    return (
        struct.pack(">L", len(payload))
        + ctype
        + payload
        + struct.pack(">L", zlib.crc32(ctype + payload) & 0xFFFFFFFF)
    )


def _encode_png(image: np.ndarray) -> bytes:
    data = quantize_u8(_srgb_encode(image))
    height, width = data.shape[:2]
    color = 0 if data.ndim == 2 else 2
    rows = data.reshape(height, -1)
    raster = bytearray()
    for y in range(height):
        raster.append(0)  # filter type None
        raster.extend(rows[y].tobytes())
    return (
        _PNG_SIGNATURE
        + _png_chunk(b"IHDR", struct.pack(">LLBBBBB", width, height, 8, color, 0, 0, 0))
        + _png_chunk(b"IDAT", zlib.compress(bytes(raster), 6))
        + _png_chunk(b"IEND", b"")
    )


# ---------------------------------------------------------------------------
# Public codec surface


def decode_image(data: bytes) -> np.ndarray:
    if data[:8] == _PNG_SIGNATURE:
        return _decode_png(data)
    if data[:2] in (b"P5", b"P6"):
        return _decode_pnm(data)
    raise ImageFormatError("unsupported format (PGM, PPM, or 8-bit PNG expected)")


def encode_image(image, encoding: str) -> bytes:
    img = check_image(image)
    encoding = encoding.lower().lstrip(".")
    if encoding == "pgm":
        if img.ndim != 2:
            raise ImageFormatError("PGM holds a single channel; got a color image")
        return _encode_pnm(img, b"P5")
    if encoding == "ppm":
        if img.ndim != 3:
            raise ImageFormatError("PPM holds 3 channels; got a gray image")
        return _encode_pnm(img, b"P6")
    if encoding == "png":
        return _encode_png(img)
    raise ImageFormatError(f"unsupported encoding {encoding!r}")


def load_image(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return decode_image(fh.read())


def save_image(image, path, encoding: str | None = None) -> None:
    if encoding is None:
        encoding = str(path).rsplit(".", 1)[-1]
    with open(path, "wb") as fh:
        fh.write(encode_image(image, encoding))


# ---------------------------------------------------------------------------
# Synthetic faces


def synth_face(seed: int, rows: int = 960, cols: int = 1280, face_scale: float = 1.0) -> np.ndarray:
    """Deterministic face-like gray test target.

    A bright oval on a dim background with a darker feature band (eyes and
    mouth) across the middle fifth of the frame, plus seed-dependent jitter
    and texture. Built from polynomial expressions and generator draws only,
    so identical (seed, rows, cols) always produce identical bytes.
    """
    if rows < 64 or cols < 64:
        raise ValueError(f"minimum size is 64x64, got {rows}x{cols}")
    if not 0.1 <= face_scale <= 2.0:
        raise ValueError(f"face_scale must lie in [0.1, 2.0], got {face_scale}")
    rng = np.random.default_rng(seed)
    jitter = rng.uniform(-1.0, 1.0, size=6)

    i = np.arange(rows, dtype=np.float64)[:, None]
    j = np.arange(cols, dtype=np.float64)[None, :]
    img = 0.25 + 0.05 * (i / rows) + 0.0 * j

    ci = rows * (0.5 + 0.02 * jitter[0])
    cj = cols * (0.5 + 0.02 * jitter[1])
    a = rows * 0.38 * face_scale * (1.0 + 0.05 * jitter[2])
    b = cols * 0.30 * face_scale * (1.0 + 0.05 * jitter[3])
    d2 = ((i - ci) / a) ** 2 + ((j - cj) / b) ** 2
    face = d2 <= 1.0
    img = np.where(face, 0.85 - 0.15 * d2, img)

    band_half = 0.263 * a
    band = (i >= ci - band_half) & (i < ci + band_half)
    img = np.where(face & band, img * 0.8, img)

    eye_i = ci - 0.15 * a + 0.01 * rows * jitter[4]
    eye_dj = 0.40 * b
    for sign in (-1.0, 1.0):
        eye = ((i - eye_i) / (0.08 * a)) ** 2 + ((j - (cj + sign * eye_dj)) / (0.14 * b)) ** 2
        img = np.where(eye <= 1.0, 0.15, img)

    mouth_i = ci + 0.22 * a + 0.01 * rows * jitter[5]
    mouth = ((i - mouth_i) / (0.05 * a)) ** 2 + ((j - cj) / (0.28 * b)) ** 2
    img = np.where(mouth <= 1.0, 0.30, img)

    img = img + 0.01 * rng.uniform(-1.0, 1.0, size=(rows, cols))
    return np.clip(img, 0.01, 1.0)


# ---------------------------------------------------------------------------
# Manifests and report tables


@dataclass
class ManifestEntry:
    """One captured or simulated sample in a dataset."""

    path: str
    subject: str
    condition: dict | str = "normal"
    distance: str = ""
    tilt: str = ""

    def __post_init__(self):
        if self.condition != "normal" and not isinstance(self.condition, dict):
            raise ValueError("condition must be 'normal' or a pulse-parameter object")

    def to_json(self) -> dict:
        return {
            "path": self.path,
            "subject": self.subject,
            "condition": self.condition,
            "distance": self.distance,
            "tilt": self.tilt,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ManifestEntry":
        return cls(
            path=obj["path"],
            subject=obj.get("subject", ""),
            condition=obj.get("condition", "normal"),
            distance=obj.get("distance", ""),
            tilt=obj.get("tilt", ""),
        )


@dataclass
class Manifest:
    entries: list[ManifestEntry] = field(default_factory=list)

    def __post_init__(self):
        paths = [e.path for e in self.entries]
        if len(set(paths)) != len(paths):
            raise ValueError("manifest paths must be unique")

    def to_json(self) -> dict:
        return {"entries": [e.to_json() for e in self.entries]}

    @classmethod
    def from_json(cls, obj: dict) -> "Manifest":
        return cls([ManifestEntry.from_json(e) for e in obj.get("entries", [])])

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "Manifest":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


SWEEP_CSV_HEADER = ("model", "condition", "n_b", "n_a", "rate")


def write_sweep_csv(fh, rows) -> None:
    """Write sweep or defense summary rows with the standard header.

    Each row is a (model, condition, n_b, n_a, rate) tuple.
    """
    writer = csv.writer(fh)
    writer.writerow(SWEEP_CSV_HEADER)
    for row in rows:
        writer.writerow(list(row))
