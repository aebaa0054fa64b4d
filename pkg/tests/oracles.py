"""Slow reference implementations, kept independent of the package code."""
import math

import numpy as np


def naive_correlate2d(img, taps):
    """Zero-padded same-size correlation by explicit loops."""
    h, w = len(img), len(img[0])
    k = len(taps)
    c = k // 2
    out = [[0.0] * w for _ in range(h)]
    for y in range(h):
        for x in range(w):
            acc = 0.0
            for i in range(k):
                for j in range(k):
                    yy, xx = y + i - c, x + j - c
                    if 0 <= yy < h and 0 <= xx < w:
                        acc += taps[i][j] * img[yy][xx]
            out[y][x] = acc
    return np.array(out)


def naive_conv3x3(x, w, b):
    c, h, wd = x.shape
    f = w.shape[0]
    out = np.zeros((f, h, wd))
    for o in range(f):
        for y in range(h):
            for xx in range(wd):
                acc = b[o]
                for ch in range(c):
                    for i in range(3):
                        for j in range(3):
                            yy, xj = y + i - 1, xx + j - 1
                            if 0 <= yy < h and 0 <= xj < wd:
                                acc += w[o, ch, i, j] * x[ch, yy, xj]
                out[o, y, xx] = acc
    return out


def naive_maxpool(x):
    c, h, w = x.shape
    out = np.zeros((c, h // 2, w // 2))
    for ch in range(c):
        for y in range(h // 2):
            for xx in range(w // 2):
                out[ch, y, xx] = max(
                    x[ch, 2 * y, 2 * xx], x[ch, 2 * y, 2 * xx + 1],
                    x[ch, 2 * y + 1, 2 * xx], x[ch, 2 * y + 1, 2 * xx + 1],
                )
    return out


def naive_dense(x, w, b):
    out = []
    for m in range(w.shape[0]):
        acc = b[m]
        for n in range(w.shape[1]):
            acc += w[m, n] * x[n]
        out.append(acc)
    return np.array(out)


def naive_bilinear(img, new_w, new_h):
    h, w = img.shape
    out = np.zeros((new_h, new_w))
    for oy in range(new_h):
        for ox in range(new_w):
            sy = min(max((oy + 0.5) * h / new_h - 0.5, 0.0), h - 1)
            sx = min(max((ox + 0.5) * w / new_w - 0.5, 0.0), w - 1)
            y0, x0 = int(math.floor(sy)), int(math.floor(sx))
            y1, x1 = min(y0 + 1, h - 1), min(x0 + 1, w - 1)
            ty, tx = sy - y0, sx - x0
            out[oy, ox] = (
                img[y0, x0] * (1 - ty) * (1 - tx) + img[y0, x1] * (1 - ty) * tx
                + img[y1, x0] * ty * (1 - tx) + img[y1, x1] * ty * tx
            )
    return out


def naive_gaussian_blur2d(img, sigma):
    """Full 2-D Gaussian with replicated borders, no separability."""
    r = math.ceil(3 * sigma)
    h, w = img.shape
    weights = {}
    total = 0.0
    for i in range(-r, r + 1):
        for j in range(-r, r + 1):
            v = math.exp(-(i * i + j * j) / (2 * sigma * sigma))
            weights[i, j] = v
            total += v
    out = np.zeros_like(img)
    for y in range(h):
        for x in range(w):
            acc = 0.0
            for (i, j), v in weights.items():
                yy = min(max(y + i, 0), h - 1)
                xx = min(max(x + j, 0), w - 1)
                acc += v * img[yy, xx]
            out[y, x] = acc / total
    return out
