"""Seedable scalar variate generation: normals and chi (not chi-squared).

All randomness in the package flows through :class:`RandomStream`, a thin
wrapper around a counter-based Philox generator keyed by ``(seed,
stream_id)``. Counter-based keying gives two guarantees the samplers rely
on:

* identical ``(seed, stream_id)`` reproduces the identical variate
  sequence, and
* distinct ``stream_id`` values yield statistically independent sequences,
  so batch sampling can hand one substream to each sample and stay
  reproducible regardless of execution order.

Chi variates with ``df`` degrees of freedom are drawn as the square root
of a chi-squared variate (gamma(df/2, scale 2), rejection-sampled), so the
cost per draw is O(1) in ``df``; degrees of freedom up to matrix
dimensions in the thousands are routine.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ParameterError

_MASK64 = 0xFFFFFFFFFFFFFFFF
_GOLDEN = 0x9E3779B97F4A7C15


def _mix64(z: int) -> int:
    # splitmix64 finalizer; bijective on 64-bit ints
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


class RandomStream:
    """A single-owner stream of random variates.

    Parameters
    ----------
    seed : int
        64-bit unsigned master seed.
    stream_id : int
        64-bit unsigned substream selector. Streams with the same seed but
        different ids are independent.

    Notes
    -----
    A stream is mutable (each draw advances it) and must not be shared
    between concurrent tasks; derive one substream per task instead via
    :meth:`substream`.
    """

    __slots__ = ("seed", "stream_id", "_gen")

    def __init__(self, seed: int, stream_id: int = 0):
        for name, value in (("seed", seed), ("stream_id", stream_id)):
            if not isinstance(value, (int, np.integer)):
                raise ParameterError(f"{name} must be an integer, got {value!r}")
            if not 0 <= int(value) <= _MASK64:
                raise ParameterError(f"{name} must fit in 64 unsigned bits, got {value}")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        key = np.array([self.seed, self.stream_id], dtype=np.uint64)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def __repr__(self):
        return f"RandomStream(seed={self.seed}, stream_id={self.stream_id})"

    def substream(self, index: int) -> "RandomStream":
        """Derive the ``index``-th independent substream.

        For a fixed parent, distinct indices map to distinct stream ids
        (the map is injective), and the derivation depends only on
        ``(seed, stream_id, index)``.
        """
        if index < 0:
            raise ParameterError(f"substream index must be >= 0, got {index}")
        child = _mix64(self.stream_id ^ (((index + 1) * _GOLDEN) & _MASK64))
        return RandomStream(self.seed, child)

    # -- draws ----------------------------------------------------------

    def normal(self, sigma: float = 1.0, size=None):
        """Zero-mean normal draw(s) with standard deviation ``sigma``.

        ``size=None`` returns a scalar. A sized call consumes the stream
        exactly as the same number of scalar calls would.
        """
        _check_sigma(sigma)
        return sigma * self._gen.standard_normal(size)

    def chi(self, df, sigma: float = 1.0, size=None):
        """Chi draw(s): ``sigma`` times the square root of a chi-squared
        variate with ``df`` degrees of freedom. Strictly positive a.s.

        ``df`` may be an array of positive integers, in which case one
        draw is made per entry (stream consumption matches the equivalent
        sequence of scalar calls).
        """
        _check_sigma(sigma)
        df = _check_df(df)
        if size is not None and np.ndim(df) != 0:
            raise ParameterError("pass either an array df or a size, not both")
        draws = self._gen.chisquare(df, size=size)
        return sigma * np.sqrt(draws)


def _check_sigma(sigma):
    if not (isinstance(sigma, (int, float, np.floating, np.integer)) and math.isfinite(sigma)):
        raise ParameterError(f"sigma must be a finite real, got {sigma!r}")
    if sigma <= 0:
        raise ParameterError(f"sigma must be > 0, got {sigma}")


def _check_df(df):
    arr = np.asarray(df)
    if arr.size == 0:
        raise ParameterError("df must be nonempty")
    if not np.issubdtype(arr.dtype, np.number):
        raise ParameterError(f"df must be integer-valued, got {df!r}")
    if np.any(arr != np.floor(arr)) or np.any(arr < 1):
        raise ParameterError(f"df must be a positive integer, got {df!r}")
    return arr.astype(np.float64) if arr.ndim else float(arr)


def sample_normal(stream: RandomStream, sigma: float) -> float:
    """One N(0, sigma^2) draw; advances the stream."""
    return float(stream.normal(sigma))


def sample_chi(stream: RandomStream, df: int, sigma: float = 1.0) -> float:
    """One sigma * chi_df draw; advances the stream."""
    if np.ndim(df) != 0:
        raise ParameterError("sample_chi takes a scalar df")
    return float(stream.chi(df, sigma))
