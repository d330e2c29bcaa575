"""Desk-scale cross-domain datasets.

Synthetic 8x8 glyph digits (built-in bitmap font, +1 stroke / -1 background),
domain transforms (negation, edge maps), 2-D Gaussian toy domains, and IDX
container ingestion for real digit datasets.  All values live in [-1, 1] to
match the tanh generator output.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np


class FormatError(ValueError):
    pass


@dataclass
class Domain:
    """Samples of one domain; labels only on a designated source domain."""

    samples: np.ndarray
    labels: np.ndarray | None = None


@dataclass
class DomainDataset:
    """Unpaired per-domain collections with identical sample shapes."""

    domains: list
    provenance: str = ""

    def __post_init__(self):
        shapes = {d.samples.shape[1:] for d in self.domains}
        if len(shapes) > 1:
            raise FormatError(f"sample shapes differ across domains: {shapes}")

    @property
    def domain_count(self) -> int:
        return len(self.domains)


# 8x8 bitmap font for digits 0-9; '#' = stroke (+1), '.' = background (-1)
_FONT_ROWS = {
    0: ("........",
        ".####...",
        "##..##..",
        "##..##..",
        "##..##..",
        "##..##..",
        ".####...",
        "........"),
    1: ("........",
        "..##....",
        ".###....",
        "..##....",
        "..##....",
        "..##....",
        "######..",
        "........"),
    2: ("........",
        ".####...",
        "##..##..",
        "...##...",
        "..##....",
        ".##.....",
        "######..",
        "........"),
    3: ("........",
        "#####...",
        "....##..",
        "..###...",
        "....##..",
        "....##..",
        "#####...",
        "........"),
    4: ("........",
        "...##...",
        "..###...",
        ".#.##...",
        "#..##...",
        "######..",
        "...##...",
        "........"),
    5: ("........",
        "######..",
        "##......",
        "#####...",
        "....##..",
        "....##..",
        "#####...",
        "........"),
    6: ("........",
        ".####...",
        "##......",
        "#####...",
        "##..##..",
        "##..##..",
        ".####...",
        "........"),
    7: ("........",
        "######..",
        "....##..",
        "...##...",
        "..##....",
        ".##.....",
        ".##.....",
        "........"),
    8: ("........",
        ".####...",
        "##..##..",
        ".####...",
        "##..##..",
        "##..##..",
        ".####...",
        "........"),
    9: ("........",
        ".####...",
        "##..##..",
        "##..##..",
        ".#####..",
        "....##..",
        ".####...",
        "........"),
}


# stroke/background amplitude; kept inside (-1, 1) so a tanh-output
# generator can match the data without saturating
GLYPH_AMPLITUDE = 0.8


def font_bitmap(digit: int) -> np.ndarray:
    """The clean 8x8 bitmap for one digit, values in {-a, +a}."""
    rows = _FONT_ROWS[digit]
    a = GLYPH_AMPLITUDE
    return np.array([[a if c == "#" else -a for c in row] for row in rows])


def font_ascii(digit: int) -> str:
    return "\n".join(_FONT_ROWS[digit])


def glyph_dataset(n: int, class_count: int = 10, jitter: float = 0.1,
                  seed: int = 0, max_shift: int = 1):
    """n labeled 8x8 single-channel glyph images.

    Each image is its class bitmap shifted by up to max_shift pixels in each
    axis (background-filled) plus uniform noise of amplitude jitter, clipped
    to [-1, 1].  Returns (images (n,1,8,8), labels (n,)).
    """
    if n < 1:
        raise ValueError("need n >= 1")
    if not 1 <= class_count <= 10:
        raise ValueError("class_count must be in 1..10")
    rng = np.random.default_rng(seed)
    bitmaps = np.stack([font_bitmap(d) for d in range(class_count)])
    labels = rng.integers(0, class_count, size=n)
    images = bitmaps[labels]
    if max_shift > 0:
        shifts = rng.integers(-max_shift, max_shift + 1, size=(n, 2))
        shifted = np.full_like(images, -GLYPH_AMPLITUDE)
        for i, (dy, dx) in enumerate(shifts):
            y0, y1 = max(dy, 0), 8 + min(dy, 0)
            x0, x1 = max(dx, 0), 8 + min(dx, 0)
            shifted[i, y0:y1, x0:x1] = images[i, max(-dy, 0):8 + min(-dy, 0),
                                              max(-dx, 0):8 + min(-dx, 0)]
        images = shifted
    if jitter > 0:
        images = images + rng.uniform(-jitter, jitter, size=images.shape)
    images = np.clip(images, -1.0, 1.0)
    return images[:, None, :, :], labels


def make_negative(images: np.ndarray) -> np.ndarray:
    """Elementwise x -> -x (an involution on [-1, 1] images)."""
    return -np.asarray(images, dtype=np.float64)


def make_edge(images: np.ndarray, threshold: float = 0.5) -> np.ndarray:
    """Binary edge map: +1 where the forward-difference gradient magnitude
    exceeds threshold, -1 elsewhere."""
    x = np.asarray(images, dtype=np.float64)
    gy = np.zeros_like(x)
    gx = np.zeros_like(x)
    gy[..., :-1, :] = x[..., 1:, :] - x[..., :-1, :]
    gx[..., :, :-1] = x[..., :, 1:] - x[..., :, :-1]
    mag = np.sqrt(gy * gy + gx * gx)
    return np.where(mag > threshold, 1.0, -1.0)


def glyph_pair_domains(n: int, transform: str = "negative", class_count: int = 10,
                       jitter: float = 0.1, seed: int = 0,
                       labeled_source: bool = False) -> DomainDataset:
    """Two unpaired glyph domains: plain glyphs vs their transform.

    The transform domain is built from an independent glyph draw, so no
    pairing structure exists across domains.
    """
    xa, la = glyph_dataset(n, class_count, jitter, seed=seed * 2 + 1)
    xb, _ = glyph_dataset(n, class_count, jitter, seed=seed * 2 + 2)
    if transform == "negative":
        xb = make_negative(xb)
    elif transform == "edge":
        xb = make_edge(xb)
    else:
        raise ValueError(f"unknown transform {transform!r}")
    return DomainDataset(
        domains=[Domain(xa, la if labeled_source else None), Domain(xb)],
        provenance=f"synthetic glyphs, transform={transform}, seed={seed}",
    )


def gaussian_pair_domains(n: int, transform: str = "negation",
                          seed: int = 0) -> DomainDataset:
    """Two unpaired 2-D point domains related at the population level only.

    Domain A ~ Normal([0.5, 0.5], 0.1 I) clipped to [-1, 1]; domain B is an
    independent draw from the same law, negated.
    """
    if n < 1:
        raise ValueError("need n >= 1")
    if transform != "negation":
        raise ValueError(f"unknown transform {transform!r}")
    rng = np.random.default_rng(seed)
    a = np.clip(rng.normal(0.5, 0.1, size=(n, 2)), -1.0, 1.0)
    b = -np.clip(rng.normal(0.5, 0.1, size=(n, 2)), -1.0, 1.0)
    return DomainDataset(
        domains=[Domain(a), Domain(b)],
        provenance=f"2-D Gaussian negation pair, seed={seed}",
    )


# ---------------------------------------------------------------------------
# IDX container (big-endian; classic digit-dataset format)

_IDX_U8 = 0x08
_IDX_F32 = 0x0D


def parse_idx(raw: bytes) -> np.ndarray:
    """Parse an IDX container into a float64 tensor.

    Unsigned-byte payloads are rescaled to [-1, 1] via x/127.5 - 1;
    float32 payloads are taken as-is.
    """
    if len(raw) < 4:
        raise FormatError("IDX header shorter than 4 bytes")
    if raw[0] != 0 or raw[1] != 0:
        raise FormatError(f"bad IDX magic bytes {raw[0]:#04x} {raw[1]:#04x}")
    type_byte, ndim = raw[2], raw[3]
    if type_byte not in (_IDX_U8, _IDX_F32):
        raise FormatError(f"unsupported IDX type byte {type_byte:#04x}")
    need = 4 + 4 * ndim
    if len(raw) < need:
        raise FormatError("IDX header truncated before extents")
    shape = struct.unpack(f">{ndim}I", raw[4:need])
    count = int(np.prod(shape)) if shape else 1
    itemsize = 1 if type_byte == _IDX_U8 else 4
    if len(raw) != need + count * itemsize:
        raise FormatError(
            f"IDX payload length {len(raw) - need} does not match shape {shape}"
        )
    if type_byte == _IDX_U8:
        data = np.frombuffer(raw, dtype=np.uint8, offset=need).astype(np.float64)
        return (data / 127.5 - 1.0).reshape(shape)
    data = np.frombuffer(raw, dtype=">f4", offset=need).astype(np.float64)
    return data.reshape(shape)


def write_idx(tensor: np.ndarray, kind: str = "u8") -> bytes:
    """Inverse of parse_idx.

    kind='u8' expects values in [-1, 1] and stores round((x+1)*127.5);
    kind='f32' stores big-endian float32.
    """
    arr = np.asarray(tensor, dtype=np.float64)
    if kind == "u8":
        type_byte = _IDX_U8
        payload = np.round((arr + 1.0) * 127.5).clip(0, 255).astype(np.uint8)
        raw = payload.tobytes()
    elif kind == "f32":
        type_byte = _IDX_F32
        raw = arr.astype(">f4").tobytes()
    else:
        raise ValueError(f"unknown kind {kind!r}")
    header = bytes([0, 0, type_byte, arr.ndim])
    header += struct.pack(f">{arr.ndim}I", *arr.shape)
    return header + raw
