"""Slow literal evaluators used as independent oracles by ``selftest`` and the tests.

Nothing here shares code with the fast paths it checks.
"""

import math

import numpy as np


def dct2_literal(x):
    """Orthonormal 2D DCT-II of an (H, W) array as a direct quadruple loop."""
    H, W = len(x), len(x[0])
    out = np.zeros((H, W))
    for u in range(H):
        au = math.sqrt(1.0 / H) if u == 0 else math.sqrt(2.0 / H)
        for v in range(W):
            av = math.sqrt(1.0 / W) if v == 0 else math.sqrt(2.0 / W)
            s = 0.0
            for h in range(H):
                ch = math.cos(math.pi * (2 * h + 1) * u / (2 * H))
                for w in range(W):
                    s += x[h][w] * ch * math.cos(math.pi * (2 * w + 1) * v / (2 * W))
            out[u, v] = au * av * s
    return out


def idct2_literal(X):
    """Inverse of ``dct2_literal`` (DCT-III with the same normalization)."""
    H, W = len(X), len(X[0])
    out = np.zeros((H, W))
    for h in range(H):
        for w in range(W):
            s = 0.0
            for u in range(H):
                au = math.sqrt(1.0 / H) if u == 0 else math.sqrt(2.0 / H)
                cu = math.cos(math.pi * (2 * h + 1) * u / (2 * H))
                for v in range(W):
                    av = math.sqrt(1.0 / W) if v == 0 else math.sqrt(2.0 / W)
                    s += au * av * X[u][v] * cu * math.cos(math.pi * (2 * w + 1) * v / (2 * W))
            out[h, w] = s
    return out


def bandpass_scalar(rho, r_low, r_high):
    return math.exp(-rho * rho / (2 * r_high * r_high)) - math.exp(-rho * rho / (2 * r_low * r_low))


def matmul_naive(a, b):
    n, k = len(a), len(a[0])
    m = len(b[0])
    out = np.zeros((n, m))
    for i in range(n):
        for j in range(m):
            s = 0.0
            for t in range(k):
                s += a[i][t] * b[t][j]
            out[i, j] = s
    return out


def iou_by_counting(pred, gt, num_classes):
    """Per-class IoU (None when the union is empty) by visiting every pixel."""
    pred = np.asarray(pred).ravel().tolist()
    gt = np.asarray(gt).ravel().tolist()
    out = []
    for k in range(num_classes):
        inter = union = 0
        for p, g in zip(pred, gt):
            if p == k and g == k:
                inter += 1
            if p == k or g == k:
                union += 1
        out.append(None if union == 0 else inter / union)
    return out
