"""Readers and writers for PFM, 16-bit disparity PNG, masks and annotations.

Disparity PNGs follow the KITTI fixed-point convention: ``d = stored / 256``
with stored value 0 meaning "no measurement".
"""

from __future__ import annotations

import io
import logging
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import MalformedHeader, ParseError, ShapeMismatch, TruncatedPayload, WrongBitDepth

log = logging.getLogger(__name__)

INVALID = -1.0  # sentinel for "no disparity" in decoded maps

DEFAULT_COLOR_KEYS = {
    "specular": (255, 0, 0),
    "textureless": (0, 255, 0),
    "transparent": (0, 0, 255),
}
BACKGROUND_COLORS = ((0, 0, 0), (255, 255, 255))


# ---------------------------------------------------------------- PFM


@dataclass
class PfmImage:
    data: np.ndarray  # (H, W) or (H, W, 3) float32, top row first
    scale: float = 1.0
    little_endian: bool = True

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return 1 if self.data.ndim == 2 else self.data.shape[2]


_TOKEN = re.compile(rb"\s*(\S+)")


def _header_tokens(buf: bytes, count: int) -> tuple[list[bytes], int]:
    tokens, pos = [], 0
    for _ in range(count):
        m = _TOKEN.match(buf, pos)
        if m is None:
            raise MalformedHeader("PFM header ended early")
        tokens.append(m.group(1))
        pos = m.end()
    # exactly one whitespace byte separates the header from the payload
    if pos >= len(buf) or buf[pos:pos + 1] not in (b"\n", b" ", b"\r", b"\t"):
        raise MalformedHeader("missing whitespace after PFM scale")
    return tokens, pos + 1


def read_pfm(data: bytes) -> PfmImage:
    if not isinstance(data, (bytes, bytearray, memoryview)):
        raise ParseError("read_pfm expects bytes")
    data = bytes(data)
    tokens, offset = _header_tokens(data[:256], 4)
    tag, w_tok, h_tok, s_tok = tokens
    if tag not in (b"PF", b"Pf"):
        raise MalformedHeader(f"bad PFM magic {tag!r}")
    try:
        width, height, scale = int(w_tok), int(h_tok), float(s_tok)
    except ValueError as exc:
        raise MalformedHeader(f"unparseable PFM header: {exc}") from None
    if width <= 0 or height <= 0:
        raise MalformedHeader(f"PFM dimensions must be positive, got {width}x{height}")
    if scale == 0 or not np.isfinite(scale):
        raise MalformedHeader("PFM scale must be finite and nonzero")
    channels = 3 if tag == b"PF" else 1
    count = width * height * channels
    payload = data[offset:offset + 4 * count]
    if len(payload) < 4 * count:
        raise TruncatedPayload(f"expected {4 * count} payload bytes, got {len(payload)}")
    little = scale < 0
    arr = np.frombuffer(payload, dtype="<f4" if little else ">f4")
    shape = (height, width) if channels == 1 else (height, width, 3)
    arr = np.flipud(arr.reshape(shape)).astype(np.float32)
    return PfmImage(arr, abs(scale), little)


def write_pfm(image: PfmImage | np.ndarray) -> bytes:
    if isinstance(image, np.ndarray):
        image = PfmImage(image)
    data = np.asarray(image.data)
    if data.ndim == 3 and data.shape[2] == 1:
        data = data[..., 0]
    if data.ndim not in (2, 3) or (data.ndim == 3 and data.shape[2] != 3):
        raise ShapeMismatch("PFM data must be HxW or HxWx3")
    if data.shape[0] == 0 or data.shape[1] == 0:
        raise ShapeMismatch("PFM data must be non-empty")
    tag = b"Pf" if data.ndim == 2 else b"PF"
    scale = -abs(image.scale) if image.little_endian else abs(image.scale)
    order = "<f4" if image.little_endian else ">f4"
    body = np.ascontiguousarray(np.flipud(data.astype(np.float32, copy=False))).astype(order)
    header = b"%s\n%d %d\n%s\n" % (tag, data.shape[1], data.shape[0], repr(float(scale)).encode())
    return header + body.tobytes()


def load_pfm(path: str | Path) -> np.ndarray:
    return read_pfm(Path(path).read_bytes()).data


def save_pfm(path: str | Path, array: np.ndarray) -> None:
    Path(path).write_bytes(write_pfm(np.asarray(array, dtype=np.float32)))


# ---------------------------------------------------------------- PNG helpers


def _open_png(data: bytes) -> Image.Image:
    try:
        img = Image.open(io.BytesIO(bytes(data)))
        img.load()
    except Exception as exc:  # Pillow raises a zoo of exception types
        raise ParseError(f"cannot decode PNG: {exc}") from None
    return img


def _png_bytes(img: Image.Image) -> bytes:
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def encode_png16(array: np.ndarray) -> bytes:
    arr = np.asarray(array)
    if arr.ndim != 2:
        raise ShapeMismatch("16-bit PNG must be single channel")
    if arr.min(initial=0) < 0 or arr.max(initial=0) > 65535:
        raise ValueError("values out of uint16 range")
    return _png_bytes(Image.fromarray(arr.astype(np.uint16)))


def decode_png16(data: bytes) -> np.ndarray:
    img = _open_png(data)
    if img.mode not in ("I;16", "I;16B", "I;16L", "I"):
        raise WrongBitDepth(f"expected 16-bit grayscale PNG, got mode {img.mode}")
    arr = np.array(img)
    if arr.min(initial=0) < 0 or arr.max(initial=0) > 65535:
        raise WrongBitDepth("pixel values exceed 16 bits")
    return arr.astype(np.uint16)


def encode_png8(array: np.ndarray) -> bytes:
    arr = np.asarray(array)
    if arr.dtype != np.uint8:
        raise ValueError("8-bit PNG needs uint8 data")
    return _png_bytes(Image.fromarray(arr))


def decode_png8(data: bytes) -> np.ndarray:
    img = _open_png(data)
    if img.mode not in ("L", "RGB", "RGBA", "P", "LA", "1"):
        raise WrongBitDepth(f"expected 8-bit PNG, got mode {img.mode}")
    if img.mode in ("P", "1"):
        img = img.convert("RGBA" if "transparency" in img.info else "RGB")
    return np.array(img)


# ---------------------------------------------------------------- disparity PNG16


def quantize_disparity(disp: np.ndarray) -> np.ndarray:
    """Map disparities to the stored uint16 values; invalid/non-positive -> 0."""
    d = np.asarray(disp, dtype=np.float64)
    valid = np.isfinite(d) & (d > 0)
    stored = np.zeros(d.shape, dtype=np.uint16)
    stored[valid] = np.clip(np.round(d[valid] * 256.0), 1, 65535).astype(np.uint16)
    return stored


def write_disp_png16(disp: np.ndarray) -> bytes:
    return encode_png16(quantize_disparity(disp))


def read_disp_png16(data: bytes) -> np.ndarray:
    """Decode a KITTI-style disparity PNG; stored 0 becomes ``INVALID``."""
    stored = decode_png16(data).astype(np.float32)
    out = stored / np.float32(256.0)
    out[stored == 0] = INVALID
    return out


# ---------------------------------------------------------------- masks


def write_mask_png(mask: np.ndarray) -> bytes:
    return encode_png8(np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8))


def read_mask_png(data: bytes) -> np.ndarray:
    arr = decode_png8(data)
    if arr.ndim == 3:
        arr = arr[..., 0]
    return arr > 127


@dataclass
class AnnotationMasks:
    masks: dict[str, np.ndarray]
    unknown_count: int
    unknown: np.ndarray


def read_annotation_mask(data: bytes, color_keys: dict[str, tuple[int, int, int]] | None = None,
                         tolerance: int = 0,
                         background: tuple[tuple[int, int, int], ...] = BACKGROUND_COLORS
                         ) -> AnnotationMasks:
    """Split a color-coded annotation image into one binary mask per key.

    RGBA input is flattened onto black before matching. Pixels that match no
    key and no background color are counted and logged, not rejected.
    """
    keys = dict(DEFAULT_COLOR_KEYS if color_keys is None else color_keys)
    arr = decode_png8(data)
    if arr.ndim == 2:
        arr = np.repeat(arr[..., None], 3, axis=2)
    elif arr.shape[2] == 2:
        arr = np.concatenate([np.repeat(arr[..., :1], 3, axis=2), arr[..., 1:]], axis=2)
    if arr.shape[2] == 4:
        alpha = arr[..., 3:4].astype(np.uint32)
        rgb = (arr[..., :3].astype(np.uint32) * alpha + 127) // 255
    else:
        rgb = arr[..., :3].astype(np.uint32)
    rgb = rgb.astype(np.int32)

    def near(color) -> np.ndarray:
        return np.all(np.abs(rgb - np.asarray(color, dtype=np.int32)) <= tolerance, axis=-1)

    masks = {name: near(color) for name, color in keys.items()}
    claimed = np.zeros(rgb.shape[:2], dtype=bool)
    for name in keys:
        masks[name] &= ~claimed  # first key wins under a loose tolerance
        claimed |= masks[name]
    for color in background:
        claimed |= near(color)
    unknown = ~claimed
    n_unknown = int(unknown.sum())
    if n_unknown:
        log.warning("annotation has %d pixels matching no color key", n_unknown)
    return AnnotationMasks(masks, n_unknown, unknown)


# ---------------------------------------------------------------- images


def float_to_uint8(rgb: np.ndarray) -> np.ndarray:
    return np.round(np.clip(np.asarray(rgb, dtype=np.float64), 0.0, 1.0) * 255.0).astype(np.uint8)


def uint8_to_float(arr: np.ndarray) -> np.ndarray:
    return (np.asarray(arr, dtype=np.float32) / np.float32(255.0)).astype(np.float32)


def load_image(path: str | Path) -> np.ndarray:
    """Load an 8-bit image as floats in [0, 1]; grayscale stays 2D."""
    arr = decode_png8(Path(path).read_bytes()) if str(path).lower().endswith(".png") \
        else np.array(Image.open(path))
    if arr.ndim == 3 and arr.shape[2] == 4:
        arr = arr[..., :3]
    return uint8_to_float(arr)


def load_disparity(path: str | Path) -> np.ndarray:
    """Load a disparity map from PFM or 16-bit PNG; invalid -> ``INVALID``."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix not in (".pfm", ".png"):
        raise ParseError(f"unsupported disparity file type: {path.suffix}")
    raw = path.read_bytes()
    if suffix == ".pfm":
        d = read_pfm(raw).data
        if d.ndim == 3:
            d = d[..., 0]
        d = d.copy()
        d[~np.isfinite(d)] = INVALID
        return d
    return read_disp_png16(raw)


def downsample_disparity(disp: np.ndarray, factor: int, method: str = "nearest") -> np.ndarray:
    """Shrink a GT disparity map by an integer factor, dividing values by it.

    ``nearest`` keeps the center sample of each block; ``area`` averages the
    valid samples of each block (a block with none stays invalid).
    """
    if factor < 1:
        raise ValueError("factor must be >= 1")
    d = np.asarray(disp, dtype=np.float64)
    if factor == 1:
        return d.astype(np.float32)
    h, w = d.shape[0] // factor, d.shape[1] // factor
    blocks = d[:h * factor, :w * factor].reshape(h, factor, w, factor).transpose(0, 2, 1, 3)
    valid = np.isfinite(blocks) & (blocks > 0)
    if method == "nearest":
        c = factor // 2
        out = blocks[:, :, c, c].copy()
        ok = valid[:, :, c, c]
    elif method == "area":
        total = np.where(valid, blocks, 0.0).sum(axis=(2, 3))
        n = valid.sum(axis=(2, 3))
        ok = n > 0
        out = np.where(ok, total / np.maximum(n, 1), 0.0)
    else:
        raise ValueError(f"unknown downsampling method {method!r}")
    out = np.where(ok, out / factor, INVALID)
    return out.astype(np.float32)


def downsample_mask(mask: np.ndarray, factor: int) -> np.ndarray:
    if factor == 1:
        return np.asarray(mask, dtype=bool)
    m = np.asarray(mask, dtype=bool)
    h, w = m.shape[0] // factor, m.shape[1] // factor
    c = factor // 2
    return m[:h * factor, :w * factor].reshape(h, factor, w, factor)[:, c, :, c]
