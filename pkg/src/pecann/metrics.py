"""Error metrics used in benchmark reports.

Two root-mean-square variants coexist on purpose: ``rms_standard`` is the
textbook sqrt(mean(diff^2)); ``rms_printed`` divides the l2 norm by n
instead (the form printed in several published mesh-convergence tables),
so ``rms_printed = rms_standard / sqrt(n)``.
"""

from __future__ import annotations

import numpy as np

from .exceptions import EvaluationError

__all__ = ["rel_l2", "l_inf", "mae", "rms_standard", "rms_printed"]


def _diff(pred, exact):
    pred = np.asarray(pred, dtype=np.float64).ravel()
    exact = np.asarray(exact, dtype=np.float64).ravel()
    if pred.shape != exact.shape:
        raise EvaluationError(
            f"shape mismatch: pred {pred.shape} vs exact {exact.shape}"
        )
    if pred.size == 0:
        raise EvaluationError("metrics need at least one sample")
    if not (np.all(np.isfinite(pred)) and np.all(np.isfinite(exact))):
        raise EvaluationError("non-finite values in metric input")
    return pred - exact, exact


def rel_l2(pred, exact):
    """Relative l2 error, ``||pred - exact||_2 / ||exact||_2``.

    >>> rel_l2([3.0, 0.0], [3.0, 4.0])
    0.8
    """
    diff, exact = _diff(pred, exact)
    denom = np.linalg.norm(exact)
    if denom == 0.0:
        raise EvaluationError("rel_l2 undefined for a zero-norm exact field")
    return float(np.linalg.norm(diff) / denom)


def l_inf(pred, exact):
    """Largest absolute pointwise error.

    >>> l_inf([1.0, 5.0], [2.0, 2.0])
    3.0
    """
    diff, _ = _diff(pred, exact)
    return float(np.max(np.abs(diff)))


def mae(pred, exact):
    """Mean absolute error.

    >>> mae([1.0, 5.0], [2.0, 2.0])
    2.0
    """
    diff, _ = _diff(pred, exact)
    return float(np.mean(np.abs(diff)))


def rms_standard(pred, exact):
    """Root-mean-square error, ``sqrt(sum(diff^2) / n)``.

    >>> rms_standard([2.0, 2.0], [1.0, 1.0])
    1.0
    """
    diff, _ = _diff(pred, exact)
    return float(np.sqrt(np.mean(diff * diff)))


def rms_printed(pred, exact):
    """Norm-over-n variant, ``sqrt(sum(diff^2)) / n``.

    >>> rms_printed([2.0, 2.0], [1.0, 1.0])
    0.7071067811865476
    """
    diff, _ = _diff(pred, exact)
    return float(np.linalg.norm(diff) / diff.size)
