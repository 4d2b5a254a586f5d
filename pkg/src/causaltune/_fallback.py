"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``."""

import numpy as np


def sep2d(x, mh, mw):
    """out[b, u, v, k] = sum_h sum_w mh[u, h] * mw[v, w] * x[b, h, w, k]."""
    x = np.asarray(x, dtype=np.float64)
    mh = np.asarray(mh, dtype=np.float64)
    mw = np.asarray(mw, dtype=np.float64)
    n, H, W, C = x.shape
    if mh.shape[1] != H or mw.shape[1] != W:
        raise ValueError("transform matrix does not match input grid")
    tmp = np.matmul(mh, x.reshape(n, H, W * C)).reshape(n, mh.shape[0], W, C)
    out = np.matmul(mw, tmp)
    return np.ascontiguousarray(out)


def confusion(pred, gt, num_classes):
    """K x K count matrix, rows = ground truth, columns = prediction."""
    p = np.asarray(pred, dtype=np.int64).ravel()
    g = np.asarray(gt, dtype=np.int64).ravel()
    if p.shape != g.shape:
        raise ValueError("prediction and ground truth differ in size")
    if p.size and (min(p.min(), g.min()) < 0 or max(p.max(), g.max()) >= num_classes):
        raise ValueError("label out of range")
    flat = np.bincount(g * num_classes + p, minlength=num_classes * num_classes)
    return flat.reshape(num_classes, num_classes).astype(np.int64)
