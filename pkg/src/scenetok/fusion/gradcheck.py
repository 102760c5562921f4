"""Finite-difference verification of the fusion network's gradients."""

from __future__ import annotations

import numpy as np

from .network import fusion_forward, fusion_loss_and_grads
from .params import FusionParams


def _loss(params: FusionParams, P_xyz, P_ind, B, F_img, elem_valid) -> float:
    F_elem, _, _ = fusion_forward(params, P_xyz, P_ind, B, F_img, elem_valid)
    return float((F_elem ** 2).sum())


def finite_difference_grads(params: FusionParams, P_xyz, P_ind, B, F_img,
                            elem_valid, h: float = 1e-5) -> dict[str, np.ndarray]:
    """Central differences of the loss for every parameter element."""
    work = params.copy()
    grads = {}
    for name, tensor in work.tensors().items():
        g = np.zeros_like(tensor, dtype=np.float64)
        flat = tensor.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            hi = _loss(work, P_xyz, P_ind, B, F_img, elem_valid)
            flat[i] = orig - h
            lo = _loss(work, P_xyz, P_ind, B, F_img, elem_valid)
            flat[i] = orig
            g.reshape(-1)[i] = (hi - lo) / (2.0 * h)
        grads[name] = g
    return grads


def compare_grads(analytic: dict[str, np.ndarray],
                  numeric: dict[str, np.ndarray]) -> float:
    """Max over tensors of max|a - n| / max(max|a|, max|n|, 1e-8)."""
    worst = 0.0
    for name, a in analytic.items():
        n = numeric[name]
        denom = max(np.abs(a).max(), np.abs(n).max(), 1e-8)
        worst = max(worst, float(np.abs(a - n).max() / denom))
    return worst


def grad_check(params: FusionParams, P_xyz, P_ind, B, F_img, elem_valid,
               h: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    Meant for float64 params at toy dimensions; the cost is two forward
    passes per parameter element.
    """
    if params.dtype != np.float64:
        raise ValueError("grad_check requires float64 params")
    _, analytic = fusion_loss_and_grads(params, P_xyz, P_ind, B, F_img,
                                        elem_valid)
    numeric = finite_difference_grads(params, P_xyz, P_ind, B, F_img,
                                      elem_valid, h=h)
    return compare_grads(analytic, numeric)
