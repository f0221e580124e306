"""Two-sample Kolmogorov-Smirnov test and histogram binning.

The KS statistic is the supremum gap between the two right-continuous
empirical CDFs, evaluated over the union of sample points so ties are
handled exactly. The p-value uses the asymptotic Kolmogorov distribution
at effective size ``n1*n2/(n1+n2)``; that approximation is what the
validation workflow needs at its sample sizes (thousands of draws), not a
small-sample exact test.

Histogram bins are right-closed, with the first bin also closed on the
left, so a sample landing exactly on an interior edge counts toward the
lower bin: edges ``{0, 0.5, 1}`` put ``{0, 0.5, 1}`` into counts
``(2, 1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

__all__ = ["KsResult", "ks_two_sample", "kolmogorov_sf", "histogram"]

_KOLMOGOROV_TERMS = 100


@dataclass(frozen=True)
class KsResult:
    """Outcome of a two-sample KS test."""

    d_statistic: float
    p_value: float
    n1: int
    n2: int


def kolmogorov_sf(t: float) -> float:
    """Survival function of the Kolmogorov distribution, P(K > t).

    Uses the theta-function form of the series for small ``t`` (where the
    alternating sum converges slowly) and the alternating sum otherwise,
    both truncated at 100 terms.
    """
    if t <= 0.0:
        return 1.0
    if t < 1.18:
        # cdf = sqrt(2 pi)/t * sum over odd j of exp(-j^2 pi^2 / (8 t^2))
        z = math.pi * math.pi / (8.0 * t * t)
        total = 0.0
        for i in range(_KOLMOGOROV_TERMS):
            j = 2 * i + 1
            term = math.exp(-j * j * z)
            total += term
            if term < 1e-300:
                break
        cdf = math.sqrt(2.0 * math.pi) / t * total
        return min(1.0, max(0.0, 1.0 - cdf))
    total = 0.0
    for j in range(1, _KOLMOGOROV_TERMS + 1):
        term = math.exp(-2.0 * j * j * t * t)
        total += term if j % 2 else -term
        if term < 1e-300:
            break
    return min(1.0, max(0.0, 2.0 * total))


def _as_sample(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64).ravel()
    if arr.size == 0:
        raise ParameterError(f"{name} must be a nonempty sample")
    if not np.all(np.isfinite(arr)):
        raise ParameterError(f"{name} contains non-finite values")
    return arr


def ks_two_sample(a, b) -> KsResult:
    """Two-sample KS test: the statistic is exact, the p-value asymptotic.

    Symmetric in its arguments, and invariant in D under any common
    strictly increasing transform of both samples.
    """
    a = _as_sample(a, "a")
    b = _as_sample(b, "b")
    sa, sb = np.sort(a), np.sort(b)
    pool = np.concatenate([sa, sb])
    fa = np.searchsorted(sa, pool, side="right") / sa.size
    fb = np.searchsorted(sb, pool, side="right") / sb.size
    d = float(np.max(np.abs(fa - fb)))
    ne = sa.size * sb.size / (sa.size + sb.size)
    p = kolmogorov_sf(d * math.sqrt(ne))
    return KsResult(d_statistic=d, p_value=p, n1=int(sa.size), n2=int(sb.size))


def histogram(samples, bins):
    """Bin counts over ``[min, max]`` (or explicit edges), right-closed.

    ``bins`` is either a positive bin count or an explicit increasing
    edge array. Returns ``(counts, edges)``; the counts always sum to the
    sample size, and a sample outside explicit edges is an error rather
    than silently dropped.
    """
    x = _as_sample(samples, "samples")
    if isinstance(bins, (int, np.integer)) and not isinstance(bins, bool):
        if bins < 1:
            raise ParameterError(f"bins must be >= 1, got {bins}")
        lo, hi = float(np.min(x)), float(np.max(x))
        if lo == hi:
            lo, hi = lo - 0.5, hi + 0.5
        edges = np.linspace(lo, hi, int(bins) + 1)
    else:
        edges = np.asarray(bins, dtype=np.float64).ravel()
        if edges.size < 2 or not np.all(np.diff(edges) > 0):
            raise ParameterError("explicit edges must be increasing with >= 2 entries")
        if np.min(x) < edges[0] or np.max(x) > edges[-1]:
            raise ParameterError("samples fall outside the given edges")
    # right-closed bins: a point on an interior edge joins the lower bin
    idx = np.searchsorted(edges, x, side="left") - 1
    idx = np.clip(idx, 0, edges.size - 2)
    counts = np.bincount(idx, minlength=edges.size - 1)
    return counts, edges
