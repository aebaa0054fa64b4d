"""Variance-of-Laplacian blur score and its two-centre threshold classifier.

The score of an image is the population variance of its response to a 3x3
Laplacian mask, computed on the native-resolution image with values in
``[0, 1]`` and zero padding outside the border.  Blurry images have few edges
and therefore low scores.
"""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import _jsonio
from .errors import EmptyClass, EmptyInput, EvenKernel, InvertedCentres
from .imageio import GrayImage, Label, LabeledDataset, LabeledSample, load_image

__all__ = [
    "Kernel",
    "LAPLACIAN_4",
    "LAPLACIAN_8",
    "ThresholdModel",
    "convolve",
    "variance",
    "laplacian_variance",
    "calibrate",
    "classify_laplacian",
    "score_batch",
    "save_threshold_model",
    "load_threshold_model",
]


@dataclass(frozen=True, eq=False)
class Kernel:
    taps: np.ndarray

    def __post_init__(self):
        taps = np.array(self.taps, dtype=np.float64)
        if taps.ndim != 2 or taps.shape[0] != taps.shape[1] or taps.shape[0] < 1:
            raise ValueError(f"kernel taps must be a nonempty square array, got {taps.shape}")
        if taps.shape[0] % 2 == 0:
            raise EvenKernel(f"kernel size must be odd, got {taps.shape[0]}")
        taps.setflags(write=False)
        object.__setattr__(self, "taps", taps)

    @property
    def size(self) -> int:
        return self.taps.shape[0]


LAPLACIAN_4 = Kernel([[0, 1, 0], [1, -4, 1], [0, 1, 0]])
LAPLACIAN_8 = Kernel([[1, 1, 1], [1, -8, 1], [1, 1, 1]])


def convolve(image: GrayImage | np.ndarray, kernel: Kernel) -> np.ndarray:
    """Same-size correlation of ``image`` with ``kernel``, zero outside the image.

    Returns the response map as a float64 array of the image's shape.
    """
    px = image.pixels if isinstance(image, GrayImage) else np.asarray(image, dtype=np.float64)
    if px.size == 0:
        raise EmptyInput("cannot convolve an empty image")
    c = kernel.size // 2
    h, w = px.shape
    padded = np.pad(px, c)
    out = np.zeros((h, w))
    for i in range(kernel.size):
        for j in range(kernel.size):
            t = kernel.taps[i, j]
            if t:
                out += t * padded[i:i + h, j:j + w]
    return out


def variance(values) -> float:
    """Population variance (divides by n)."""
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise EmptyInput("variance of an empty sequence")
    d = v - v.mean()
    return float(np.mean(d * d))


def laplacian_variance(image: GrayImage, kernel: Kernel = LAPLACIAN_4) -> float:
    return variance(convolve(image, kernel))


@dataclass(frozen=True)
class ThresholdModel:
    threshold: float
    centre_blurry: float
    centre_sharp: float
    n_blurry: int
    n_sharp: int

    def __post_init__(self):
        if self.n_blurry < 1 or self.n_sharp < 1:
            raise EmptyClass("threshold model needs at least one sample per class")
        if not self.centre_blurry < self.centre_sharp:
            raise InvertedCentres(self.centre_blurry, self.centre_sharp)
        if not self.centre_blurry < self.threshold < self.centre_sharp:
            raise ValueError(
                f"threshold {self.threshold!r} is not strictly between the class centres"
            )

    def to_json(self) -> str:
        d = asdict(self)
        for key in ("threshold", "centre_blurry", "centre_sharp"):
            d[key] = float(d[key])
        return _jsonio.dumps(d)

    @classmethod
    def from_json(cls, text: str) -> ThresholdModel:
        d = json.loads(text)
        return cls(
            threshold=float(d["threshold"]),
            centre_blurry=float(d["centre_blurry"]),
            centre_sharp=float(d["centre_sharp"]),
            n_blurry=int(d["n_blurry"]),
            n_sharp=int(d["n_sharp"]),
        )


def calibrate(
    blurry_scores: Sequence[float],
    sharp_scores: Sequence[float],
    weighting: str = "count",
) -> ThresholdModel:
    """Place the decision threshold between the two class weight centres.

    Each centre is the mean score of its class.  With ``weighting="count"``
    the threshold is the mean of the two centres weighted by class size;
    ``weighting="midpoint"`` weights them equally.
    """
    b = np.asarray(blurry_scores, dtype=np.float64)
    s = np.asarray(sharp_scores, dtype=np.float64)
    if b.size == 0 or s.size == 0:
        raise EmptyClass(
            f"calibration needs both classes (blurry={b.size}, sharp={s.size})"
        )
    cb, cs = float(b.mean()), float(s.mean())
    if not cb < cs:
        raise InvertedCentres(cb, cs)
    nb, ns = b.size, s.size
    if weighting == "count":
        threshold = (nb * cb + ns * cs) / (nb + ns)
    elif weighting == "midpoint":
        threshold = (cb + cs) / 2
    else:
        raise ValueError(f"unknown weighting {weighting!r}")
    # guard against rounding pushing the threshold onto a centre
    threshold = min(max(threshold, np.nextafter(cb, np.inf)), np.nextafter(cs, -np.inf))
    return ThresholdModel(float(threshold), cb, cs, int(nb), int(ns))


def classify_score(score: float, model: ThresholdModel) -> Label:
    # a score equal to the threshold does not fall below it
    return Label.BLURRY if score < model.threshold else Label.SHARP


def classify_laplacian(
    image: GrayImage, model: ThresholdModel, kernel: Kernel = LAPLACIAN_4
) -> Label:
    return classify_score(laplacian_variance(image, kernel), model)


def score_batch(
    dataset: LabeledDataset | Sequence[LabeledSample],
    kernel: Kernel = LAPLACIAN_4,
    workers: int = 1,
) -> list[tuple[LabeledSample, float]]:
    """Load and score every sample; results follow dataset order.

    Load failures propagate unchanged; their messages name the file.
    """
    samples = list(dataset)

    def score(sample):
        return laplacian_variance(load_image(sample.path), kernel)

    if workers > 1 and len(samples) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            scores = list(pool.map(score, samples))
    else:
        scores = [score(s) for s in samples]
    return list(zip(samples, scores))


def calibrate_dataset(dataset, kernel: Kernel = LAPLACIAN_4, weighting: str = "count",
                      workers: int = 1) -> ThresholdModel:
    scored = score_batch(dataset, kernel, workers)
    blurry = [v for s, v in scored if s.label is Label.BLURRY]
    sharp = [v for s, v in scored if s.label is Label.SHARP]
    return calibrate(blurry, sharp, weighting)


def save_threshold_model(model: ThresholdModel, path) -> None:
    Path(path).write_text(model.to_json(), encoding="utf-8")


def load_threshold_model(path) -> ThresholdModel:
    return ThresholdModel.from_json(Path(path).read_text(encoding="utf-8"))
