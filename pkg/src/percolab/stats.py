"""Small statistics helpers: intervals, weighted line fits, tail fits."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientData

Z95 = 1.959963984540054          # two-sided 95%
Z95_ONE_SIDED = 1.6448536269514722


def wilson_interval(k: int, n: int, z: float = Z95):
    """Wilson score interval for a binomial proportion."""
    if n <= 0:
        raise ValueError("n must be positive")
    phat = k / n
    denom = 1.0 + z * z / n
    center = (phat + z * z / (2 * n)) / denom
    half = z * np.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / denom
    return float(max(0.0, center - half)), float(min(1.0, center + half))


def mean_ci(values: np.ndarray, z: float = Z95):
    """Sample mean with normal-approximation CI; returns (mean, lo, hi, se)."""
    v = np.asarray(values, dtype=np.float64)
    m = float(v.mean())
    se = float(v.std(ddof=1) / np.sqrt(v.size)) if v.size > 1 else 0.0
    return m, m - z * se, m + z * se, se


def weighted_line_fit(x, y, w=None):
    """Weighted least-squares line y ~ a + b*x.

    Returns (slope, intercept, slope_se, r2); r2 is the weighted coefficient
    of determination, slope_se from weighted residual variance.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    w = np.ones_like(x) if w is None else np.asarray(w, dtype=np.float64)
    if x.size < 2:
        raise InsufficientData("need at least two points to fit a line")
    sw = w.sum()
    xm = (w * x).sum() / sw
    ym = (w * y).sum() / sw
    sxx = (w * (x - xm) ** 2).sum()
    if sxx == 0:
        raise InsufficientData("degenerate abscissa in line fit")
    slope = (w * (x - xm) * (y - ym)).sum() / sxx
    intercept = ym - slope * xm
    resid = y - (intercept + slope * x)
    ss_res = (w * resid ** 2).sum()
    ss_tot = (w * (y - ym) ** 2).sum()
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    dof = max(x.size - 2, 1)
    slope_se = float(np.sqrt(ss_res / dof / sxx))
    return float(slope), float(intercept), slope_se, float(r2)


@dataclass
class TailFit:
    """Exponential-rate fit of a survival function: S(n) ~ exp(-t*n)."""

    t_hat: float
    t_se: float
    r2: float
    n_lo: int
    n_hi: int
    n_points: int


def survival_counts(values: np.ndarray, n_max: int | None = None):
    """counts[n] = #values == n and surv[n] = #values >= n for n = 0..n_max."""
    v = np.asarray(values, dtype=np.int64)
    if v.size == 0:
        raise InsufficientData("no observations")
    top = int(v.max()) if n_max is None else int(n_max)
    counts = np.bincount(np.clip(v, 0, top), minlength=top + 1)
    surv = counts[::-1].cumsum()[::-1]
    return counts, surv


def exponential_tail_fit(values: np.ndarray, min_count: int = 20,
                         n_min: int | None = None, n_max: int | None = None) -> TailFit:
    """Weighted LS fit of log survival vs n over the populated mid-range.

    Only n with at least min_count observations >= n enter the fit; weights
    are the survival counts.  n_min/n_max further clip the fitted range.
    """
    counts, surv = survival_counts(values)
    total = surv[0]
    ns = np.arange(surv.size)
    keep = surv >= min_count
    keep &= surv < total          # drop the flat all-samples head
    if n_min is not None:
        keep &= ns >= n_min
    if n_max is not None:
        keep &= ns <= n_max
    ns_f = ns[keep]
    if ns_f.size < 3:
        raise InsufficientData(f"only {ns_f.size} usable survival points")
    logs = np.log(surv[keep] / total)
    slope, _, slope_se, r2 = weighted_line_fit(ns_f, logs, w=surv[keep])
    return TailFit(
        t_hat=-slope, t_se=slope_se, r2=r2,
        n_lo=int(ns_f.min()), n_hi=int(ns_f.max()), n_points=int(ns_f.size),
    )
