"""Post-processing of survival curves: tail fits, effective rates, onset exponent."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import FitError


@dataclass(frozen=True)
class DecayFit:
    rate: float          # 1/s
    amplitude: float
    t_min_fit: float     # s
    residual_rms: float  # rms of ln(survival) residuals
    n_points: int
    n_excluded: int = 0


def _arrays(curve):
    return np.asarray(curve.t_tunnel, dtype=float), np.asarray(curve.survival, dtype=float)


def fit_exponential_tail(curve, t_min_fit: float) -> DecayFit:
    """Least-squares line through ``ln(survival)`` for ``t >= t_min_fit``.

    Non-positive survival values are dropped with a warning.  A fitted
    growth (negative rate, e.g. from noise on a flat curve) is clipped to 0.
    """
    t, s = _arrays(curve)
    window = t >= t_min_fit
    bad = window & ~(s > 0)
    if bad.any():
        warnings.warn(f"{int(bad.sum())} non-positive survival values excluded from fit",
                      RuntimeWarning, stacklevel=2)
    use = window & (s > 0)
    if use.sum() < 3:
        raise FitError(f"need >= 3 positive points beyond t = {t_min_fit!r}, "
                       f"have {int(use.sum())}")
    tt, ls = t[use], np.log(s[use])
    slope, intercept = np.polyfit(tt, ls, 1)
    resid = ls - (slope * tt + intercept)
    return DecayFit(rate=max(-float(slope), 0.0), amplitude=float(np.exp(intercept)),
                    t_min_fit=float(t_min_fit),
                    residual_rms=float(np.sqrt(np.mean(resid**2))),
                    n_points=int(use.sum()), n_excluded=int(bad.sum()))


def effective_rate(curve) -> float:
    """Average decay rate between the first and last sample.

    A curve that ends at zero survival returns ``math.inf``.
    """
    t, s = _arrays(curve)
    if t.size < 2:
        raise FitError("effective rate needs at least two samples")
    if not s[-1] > 0:
        return math.inf
    return float(-math.log(s[-1] / s[0]) / (t[-1] - t[0]))


def short_time_exponent(curve, t_max: float | None = None,
                        lo: float = 1e-6, hi: float = 0.2) -> float:
    """Log-log slope of ``1 - survival`` against ``t`` in the onset window.

    Uses samples with ``0 < t <= t_max`` whose loss lies in ``(lo, hi)``.
    A quadratic onset gives 2, an exponential gives 1.
    """
    t, s = _arrays(curve)
    loss = 1.0 - s
    use = (t > 0) & (loss > lo) & (loss < hi)
    if t_max is not None:
        use &= t <= t_max
    if use.sum() < 4:
        raise FitError(f"short-time window holds {int(use.sum())} usable points, need >= 4")
    slope, _ = np.polyfit(np.log(t[use]), np.log(loss[use]), 1)
    return float(slope)
