"""Grayscale image I/O, resampling, Gaussian blur and a synthetic labelled corpus.

Images live in memory as :class:`GrayImage`, a float64 raster with values in
``[0, 1]``.  Files on disk are netpbm (P2/P5 grayscale, P6 colour); writing
always produces binary P5 with maxval 255.

Random streams use numpy's PCG64 bit generator seeded through
:class:`numpy.random.SeedSequence`.  Per-sample streams are derived with a
spawn key of the sample index, so the content of sample ``i`` never depends on
how many samples were generated before it.
"""
from __future__ import annotations

import csv
import enum
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    BadHeader,
    BadRange,
    IoFailure,
    NonpositiveSigma,
    Truncated,
    UnknownMagic,
)

__all__ = [
    "GrayImage",
    "Label",
    "LabeledSample",
    "LabeledDataset",
    "load_image",
    "save_pgm",
    "encode_pgm",
    "to_grayscale",
    "resize_bilinear",
    "gaussian_kernel",
    "gaussian_blur",
    "synth_texture",
    "synth_dataset",
    "read_labels_csv",
    "write_labels_csv",
    "LABELS_CSV",
]

LABELS_CSV = "labels.csv"

# BT.601 luma in thousandths; integer weights keep white exactly at 1.0
LUMA_WEIGHTS = (299, 587, 114)

# texture generator constants, frozen for reproducibility
N_GRATINGS = 8
GRATING_AMPLITUDE = 1.0 / N_GRATINGS  # summed gratings stay within [-1, 1]
NOISE_AMPLITUDE = 0.2
MIN_CYCLES = 2.0


@dataclass(frozen=True, eq=False)
class GrayImage:
    """Single-channel raster; ``pixels`` has shape ``(height, width)``."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.ascontiguousarray(self.pixels, dtype=np.float64)
        if px.ndim != 2 or px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError(f"expected a nonempty 2-D array, got shape {px.shape}")
        if not np.all((px >= 0.0) & (px <= 1.0)):
            raise ValueError("pixel values must lie in [0, 1]")
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @classmethod
    def from_flat(cls, width: int, height: int, values: Sequence[float]) -> GrayImage:
        arr = np.asarray(values, dtype=np.float64)
        if arr.size != width * height:
            raise ValueError(f"{arr.size} values cannot fill a {width}x{height} image")
        return cls(arr.reshape(height, width))

    def flat(self) -> np.ndarray:
        return self.pixels.ravel()

    def __repr__(self):
        return f"GrayImage({self.width}x{self.height})"


class Label(str, enum.Enum):
    BLURRY = "blurry"
    SHARP = "sharp"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class LabeledSample:
    path: Path
    label: Label


@dataclass(frozen=True)
class LabeledDataset:
    samples: tuple[LabeledSample, ...] = ()

    def __post_init__(self):
        samples = tuple(self.samples)
        seen = set()
        for s in samples:
            if s.path in seen:
                raise ValueError(f"duplicate path in dataset: {s.path}")
            seen.add(s.path)
        object.__setattr__(self, "samples", samples)

    def __len__(self):
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    def __getitem__(self, i):
        return self.samples[i]

    def count(self, label: Label) -> int:
        return sum(1 for s in self.samples if s.label is label)


# ---------------------------------------------------------------------------
# netpbm

_MAGICS = {b"P2": (1, False), b"P5": (1, True), b"P6": (3, True)}


def _read_header(data: bytes, path) -> tuple[bytes, int, int, int, int]:
    """Parse magic, width, height, maxval; return them and the payload offset."""
    magic = data[:2]
    if magic not in _MAGICS:
        raise UnknownMagic(f"{path}: unsupported netpbm magic {magic!r}")
    pos = 2
    fields = []
    n = len(data)
    while len(fields) < 3:
        # skip whitespace and comments
        while pos < n:
            c = data[pos:pos + 1]
            if c.isspace():
                pos += 1
            elif c == b"#":
                while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                    pos += 1
            else:
                break
        start = pos
        while pos < n and data[pos:pos + 1].isdigit():
            pos += 1
        if start == pos:
            if pos >= n:
                raise Truncated(f"{path}: header ends early")
            raise BadHeader(f"{path}: malformed header near byte {pos}")
        fields.append(int(data[start:pos]))
    if pos >= n or not data[pos:pos + 1].isspace():
        raise Truncated(f"{path}: header ends early")
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise BadHeader(f"{path}: nonpositive dimensions {width}x{height}")
    if not 1 <= maxval <= 255:
        raise BadHeader(f"{path}: maxval {maxval} outside [1, 255]")
    return magic, width, height, maxval, pos + 1


def decode_netpbm(data: bytes, path="<bytes>") -> GrayImage:
    magic, width, height, maxval, offset = _read_header(data, path)
    channels, binary = _MAGICS[magic]
    need = width * height * channels
    if binary:
        payload = data[offset:offset + need]
        if len(payload) < need:
            raise Truncated(f"{path}: expected {need} samples, found {len(payload)}")
        samples = np.frombuffer(payload, dtype=np.uint8).astype(np.float64)
    else:
        tokens = []
        for line in data[offset:].splitlines():
            tokens.extend(line.split(b"#", 1)[0].split())
            if len(tokens) >= need:
                break
        if len(tokens) < need:
            raise Truncated(f"{path}: expected {need} samples, found {len(tokens)}")
        samples = np.array([int(t) for t in tokens[:need]], dtype=np.float64)
    if samples.max(initial=0) > maxval:
        raise BadHeader(f"{path}: sample value exceeds maxval {maxval}")
    samples /= maxval
    if channels == 3:
        rgb = samples.reshape(height, width, 3)
        px = to_grayscale(rgb[..., 0], rgb[..., 1], rgb[..., 2])
        return GrayImage(np.clip(px, 0.0, 1.0))
    return GrayImage(samples.reshape(height, width))


def load_image(path) -> GrayImage:
    """Read a P2, P5 or P6 file as a grayscale image scaled to [0, 1]."""
    with open(path, "rb") as fh:
        data = fh.read()
    return decode_netpbm(data, path)


def quantize(image: GrayImage) -> np.ndarray:
    """8-bit samples, ``round(p * 255)`` with halves rounded up."""
    return np.floor(image.pixels * 255.0 + 0.5).astype(np.uint8)


def encode_pgm(image: GrayImage) -> bytes:
    header = f"P5\n{image.width} {image.height}\n255\n".encode("ascii")
    return header + quantize(image).tobytes()


def save_pgm(image: GrayImage, path) -> None:
    try:
        with open(path, "wb") as fh:
            fh.write(encode_pgm(image))
    except OSError as exc:
        raise IoFailure(exc.errno, f"cannot write {path}: {exc.strerror}") from exc


# ---------------------------------------------------------------------------
# pixel operations

def to_grayscale(r, g, b):
    """BT.601 luma.  Works on scalars or arrays of matching shape."""
    wr, wg, wb = LUMA_WEIGHTS
    return (wr * r + wg * g + wb * b) / 1000


def _bilinear_coords(n_in: int, n_out: int):
    src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    i0 = np.floor(src).astype(np.intp)
    i1 = np.minimum(i0 + 1, n_in - 1)
    return i0, i1, src - i0


def resize_bilinear(image: GrayImage, new_width: int, new_height: int) -> GrayImage:
    """Bilinear resampling with half-pixel centred sample positions."""
    if new_width < 1 or new_height < 1:
        raise ValueError(f"target size must be positive, got {new_width}x{new_height}")
    if (new_width, new_height) == (image.width, image.height):
        return image
    px = image.pixels
    y0, y1, fy = _bilinear_coords(image.height, new_height)
    x0, x1, fx = _bilinear_coords(image.width, new_width)
    fy = fy[:, None]
    top = px[y0][:, x0] * (1 - fx) + px[y0][:, x1] * fx
    bottom = px[y1][:, x0] * (1 - fx) + px[y1][:, x1] * fx
    out = top * (1 - fy) + bottom * fy
    return GrayImage(np.clip(out, 0.0, 1.0))


def gaussian_kernel(sigma: float) -> np.ndarray:
    if not sigma > 0:
        raise NonpositiveSigma(f"sigma must be positive, got {sigma!r}")
    radius = math.ceil(3 * sigma)
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-offsets**2 / (2 * sigma * sigma))
    return k / k.sum()


def _correlate_axis(arr: np.ndarray, kernel: np.ndarray, axis: int) -> np.ndarray:
    r = len(kernel) // 2
    pad = [(0, 0), (0, 0)]
    pad[axis] = (r, r)
    padded = np.pad(arr, pad, mode="edge")
    n = arr.shape[axis]
    out = np.zeros_like(arr)
    for t, w in enumerate(kernel):
        sl = [slice(None), slice(None)]
        sl[axis] = slice(t, t + n)
        out += w * padded[tuple(sl)]
    return out


def gaussian_blur(image: GrayImage, sigma: float) -> GrayImage:
    """Separable Gaussian blur (rows first, then columns) with replicated borders."""
    k = gaussian_kernel(sigma)
    out = _correlate_axis(image.pixels, k, axis=1)
    out = _correlate_axis(out, k, axis=0)
    return GrayImage(np.clip(out, 0.0, 1.0))


# ---------------------------------------------------------------------------
# synthetic corpus

def synth_texture(seed: int, width: int = 64, height: int = 64) -> GrayImage:
    """Edge-rich test pattern: 8 random sinusoidal gratings plus uniform noise.

    Each grating has amplitude 1/8 and the noise is uniform on [-0.2, 0.2].
    Frequencies are drawn in cycles per image from ``[2, width / 4]``; the
    sum is rescaled so that its minimum maps to 0 and its maximum to 1.
    """
    if width < 8 or height < 8:
        raise ValueError(f"texture needs at least 8x8 pixels, got {width}x{height}")
    rng = np.random.default_rng(seed)
    theta = rng.uniform(0.0, np.pi, N_GRATINGS)
    freq = rng.uniform(MIN_CYCLES, width / 4, N_GRATINGS)
    phase = rng.uniform(0.0, 2 * np.pi, N_GRATINGS)
    noise = rng.uniform(-NOISE_AMPLITUDE, NOISE_AMPLITUDE, (height, width))

    v, u = np.mgrid[0:height, 0:width].astype(np.float64)
    u /= width
    v /= height
    img = noise
    for t, f, p in zip(theta, freq, phase):
        img = img + GRATING_AMPLITUDE * np.sin(2 * np.pi * f * (u * np.cos(t) + v * np.sin(t)) + p)
    lo, hi = img.min(), img.max()
    return GrayImage((img - lo) / (hi - lo))


def _substream_seed(seed: int, *key: int) -> int:
    ss = np.random.SeedSequence(seed, spawn_key=key)
    return int(ss.generate_state(1, np.uint64)[0])


def synth_dataset(
    seed: int,
    count: int,
    sigma_min: float,
    sigma_max: float,
    out_dir,
    size: int = 64,
) -> LabeledDataset:
    """Write ``count // 2`` sharp textures and their blurred copies plus ``labels.csv``.

    Sample ``i`` yields ``sharp_iiii.pgm`` and ``blurry_iiii.pgm``.  The blurred
    copy is computed from the 8-bit sharp image exactly as stored, so reloading
    a sharp file and blurring it with the drawn sigma reproduces the blurry file.
    """
    if count < 2 or count % 2:
        raise BadRange(f"count must be an even integer >= 2, got {count}")
    if not 0 < sigma_min <= sigma_max:
        raise BadRange(f"need 0 < sigma_min <= sigma_max, got {sigma_min}, {sigma_max}")
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoFailure(exc.errno, f"cannot create {out_dir}: {exc.strerror}") from exc

    samples = []
    for i in range(count // 2):
        texture = synth_texture(_substream_seed(seed, i, 0), size, size)
        sharp = GrayImage(quantize(texture) / 255.0)
        sigma = np.random.default_rng(_substream_seed(seed, i, 1)).uniform(sigma_min, sigma_max)
        blurry = gaussian_blur(sharp, float(sigma))
        for label, img in ((Label.SHARP, sharp), (Label.BLURRY, blurry)):
            path = out_dir / f"{label.value}_{i:04d}.pgm"
            save_pgm(img, path)
            samples.append(LabeledSample(path, label))
    dataset = LabeledDataset(tuple(samples))
    write_labels_csv(dataset, out_dir / LABELS_CSV)
    return dataset


def write_labels_csv(dataset: Iterable[LabeledSample], csv_path) -> None:
    """Write ``path,label`` rows with paths relative to the CSV's directory."""
    csv_path = Path(csv_path)
    base = csv_path.parent
    try:
        with open(csv_path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["path", "label"])
            for s in dataset:
                rel = Path(os.path.relpath(s.path, base)).as_posix()
                writer.writerow([rel, s.label.value])
    except OSError as exc:
        raise IoFailure(exc.errno, f"cannot write {csv_path}: {exc.strerror}") from exc


def read_labels_csv(csv_path) -> LabeledDataset:
    csv_path = Path(csv_path)
    base = csv_path.parent
    samples = []
    with open(csv_path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["path", "label"]:
            raise ValueError(f"{csv_path}: expected header 'path,label', got {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise ValueError(f"{csv_path}:{lineno}: expected 2 fields, got {len(row)}")
            try:
                label = Label(row[1])
            except ValueError:
                raise ValueError(f"{csv_path}:{lineno}: unknown label {row[1]!r}") from None
            samples.append(LabeledSample(base / row[0], label))
    return LabeledDataset(tuple(samples))
