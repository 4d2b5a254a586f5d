"""Central finite-difference oracle for the tape gradients."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tape import Tensor, backward, param


@dataclass
class GradCheckReport:
    max_rel_error: float
    worst_param: str
    worst_index: tuple
    n_coords: int
    per_param: dict = field(default_factory=dict)

    def passed(self, tol: float) -> bool:
        return self.max_rel_error <= tol


def relative_error(analytic: float, numeric: float, floor: float = 1e-8) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def finite_diff_check(loss_fn, params: dict, eps: float = 1e-5, n_coords: int = 200,
                      seed: int = 0, floor: float = 1e-8) -> GradCheckReport:
    """Compare tape gradients against central differences on sampled coordinates.

    ``loss_fn`` maps a dict of Tensors (same keys as ``params``) to a scalar
    Tensor.  Coordinates are spread evenly over parameters, so every parameter
    contributes at least one; small parameters are checked exhaustively.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    base = {k: np.array(v, dtype=np.float64) for k, v in params.items()}
    loss = loss_fn({k: param(v, k) for k, v in base.items()})
    grads = backward(loss, wrt=list(base))

    def value(name, idx, delta):
        arrays = dict(base)
        a = base[name].copy()
        a[idx] += delta
        arrays[name] = a
        return float(loss_fn({k: Tensor(v) for k, v in arrays.items()}).data)

    rng = np.random.default_rng(seed)
    quota = max(1, -(-n_coords // max(1, len(base))))
    worst = (0.0, "", ())
    per_param, total = {}, 0
    for name in sorted(base):
        size = base[name].size
        flat = rng.choice(size, size=min(size, quota), replace=False)
        pmax = 0.0
        for f in np.sort(flat):
            idx = np.unravel_index(int(f), base[name].shape)
            numeric = (value(name, idx, eps) - value(name, idx, -eps)) / (2 * eps)
            err = relative_error(float(grads[name][idx]), numeric, floor)
            pmax = max(pmax, err)
            if err > worst[0] or not worst[1]:
                worst = (err, name, tuple(int(i) for i in idx))
            total += 1
        per_param[name] = pmax
    return GradCheckReport(worst[0], worst[1], worst[2], total, per_param)
