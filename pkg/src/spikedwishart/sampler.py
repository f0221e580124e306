"""Banded construction of spiked (pseudo-)Wishart samples, plus the
brute-force dense sampler used as a statistical oracle.

A draw is an ``m x n`` matrix ``H`` that is zero outside ``k + 1``
diagonals (the main diagonal and ``k`` below it). Writing ``i`` for the
row and ``j = i - t`` for the column at offset ``t``:

* offset 0 entries are ``sigma_i * chi(n - i + 1)``,
* offset ``k`` entries are ``sigma_i * chi(m - i + 1)``,
* offsets ``1 .. k-1`` entries are ``N(0, sigma_i^2)``,

with ``sigma_i = 1`` for rows beyond the ``k`` spiked ones. Offset ``t``
holds entries for columns ``j = 1 .. min(n, m - t)``; everything else is
exactly zero, which confines the nonzeros to a ``min(m, n+k) x min(m, n)``
block. The singular values of a draw are distributed identically to those
of the dense ``m x n`` Gaussian matrix with row standard deviations
``sigma_i`` (which :func:`sample_dense` draws directly).

Variates are consumed in a canonical order that is part of the API
contract: offsets ascending ``0 .. k``, within each offset ascending
column index, every variate drawn at unit scale and then multiplied by
its row's sigma. Recording those unit-scale variates (:class:`BandNoise`)
lets a sample be replayed under different spikes, which is what the
gradient module's reparametrized derivatives are built on.

An ensemble request with ``k = 0`` (no spikes) is normalized to ``k = 1``
with ``sigma_1 = 1``; the two ensembles are distributionally identical
and the normalization keeps the diagonal and sub-diagonal entry laws from
colliding at offset 0.
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .variates import RandomStream

__all__ = [
    "SpikeSpec",
    "BandNoise",
    "BandedSample",
    "DenseSample",
    "draw_unit_noise",
    "apply_spikes",
    "sample_banded",
    "sample_dense",
    "band_lengths",
    "diag_dfs",
    "sub_dfs",
    "to_dense",
    "iter_entries",
    "write_band_triplets",
    "read_band_triplets",
    "write_dense_csv",
]


@dataclass(frozen=True)
class SpikeSpec:
    """Ensemble parameters: ``m`` variables, ``n`` observations, and the
    spike standard deviations ``spikes = (sigma_1, .., sigma_k)``.

    Rows beyond the first ``k`` implicitly have sigma 1. An empty
    ``spikes`` is normalized to ``(1.0,)`` (see module docstring).
    """

    m: int
    n: int
    spikes: tuple = field(default=())

    def __post_init__(self):
        for name in ("m", "n"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
                raise ParameterError(f"{name} must be a positive integer, got {value!r}")
            if value < 1:
                raise ParameterError(f"{name} must be >= 1, got {value}")
            object.__setattr__(self, name, int(value))
        raw = self.spikes
        if isinstance(raw, (int, float, np.floating, np.integer)):
            raw = (raw,)
        spikes = tuple(float(s) for s in raw)
        if len(spikes) == 0:
            spikes = (1.0,)
        for s in spikes:
            if not math.isfinite(s) or s <= 0:
                raise ParameterError(f"every spike must be finite and > 0, got {s!r}")
        if len(spikes) > self.m:
            raise ParameterError(
                f"number of spikes k={len(spikes)} exceeds m={self.m}"
            )
        object.__setattr__(self, "spikes", spikes)

    @property
    def k(self) -> int:
        return len(self.spikes)

    @property
    def spike_array(self) -> np.ndarray:
        return np.asarray(self.spikes, dtype=np.float64)

    @property
    def compact_shape(self) -> tuple:
        """Shape of the block that can contain nonzeros."""
        return (min(self.m, self.n + self.k), min(self.m, self.n))


def band_lengths(m: int, n: int, k: int) -> list:
    """Number of stored entries at each offset ``t = 0 .. k``."""
    return [max(0, min(n, m - t)) for t in range(k + 1)]


def diag_dfs(m: int, n: int) -> np.ndarray:
    """Chi degrees of freedom along the main diagonal: ``n - i + 1``."""
    length = max(0, min(n, m))
    return n - np.arange(length, dtype=np.int64)


def sub_dfs(m: int, n: int, k: int) -> np.ndarray:
    """Chi degrees of freedom along offset ``k``: ``m - i + 1`` at row
    ``i = j + k``."""
    length = max(0, min(n, m - k))
    return m - k - np.arange(length, dtype=np.int64)


def _band_rows(t: int, length: int) -> np.ndarray:
    # 1-based row indices of the entries stored at offset t
    return np.arange(1, length + 1) + t


def _band_sigmas(spec: SpikeSpec, t: int, length: int) -> np.ndarray:
    sig = np.ones(length)
    nspiked = max(0, min(length, spec.k - t))
    if nspiked:
        sig[:nspiked] = spec.spike_array[t:t + nspiked]
    return sig


@dataclass(frozen=True, eq=False)
class BandNoise:
    """Unit-scale variates of one draw, in canonical order.

    ``bands[t]`` holds the offset-``t`` variates (chi for ``t`` in
    ``{0, k}``, standard normal otherwise) before any spike scaling.
    Depends on ``(m, n, k)`` only, never on the spike values.
    """

    m: int
    n: int
    k: int
    bands: tuple

    def matches(self, spec: SpikeSpec) -> bool:
        if (self.m, self.n, self.k) != (spec.m, spec.n, spec.k):
            return False
        lengths = band_lengths(spec.m, spec.n, spec.k)
        return all(b.shape == (L,) for b, L in zip(self.bands, lengths))


@dataclass(frozen=True, eq=False)
class BandedSample:
    """One realization of the banded matrix in lower-banded storage.

    ``bands[t][p]`` is the entry at row ``p + t + 1``, column ``p + 1``
    (1-based). ``noise`` carries the unit-scale variates when the sample
    was produced by this package's samplers; a sample read back from disk
    has ``noise = None``.
    """

    spec: SpikeSpec
    bands: tuple
    noise: BandNoise | None = None

    @property
    def shape(self) -> tuple:
        return (self.spec.m, self.spec.n)

    def entry_kind(self, t: int, p: int) -> str:
        """Provenance label of the stored entry at offset ``t``, position
        ``p`` (0-based): ``chi_diag(df)``, ``chi_sub(df)`` or ``normal``."""
        spec = self.spec
        if not 0 <= t <= spec.k:
            raise ParameterError(f"offset must be in 0..{spec.k}, got {t}")
        if not 0 <= p < self.bands[t].shape[0]:
            raise ParameterError(f"position {p} out of range for offset {t}")
        if t == 0:
            return f"chi_diag({int(diag_dfs(spec.m, spec.n)[p])})"
        if t == spec.k:
            return f"chi_sub({int(sub_dfs(spec.m, spec.n, spec.k)[p])})"
        return "normal"


@dataclass(frozen=True, eq=False)
class DenseSample:
    """A dense draw of the underlying Gaussian matrix (the oracle path)."""

    spec: SpikeSpec
    values: np.ndarray


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def draw_unit_noise(spec: SpikeSpec, stream: RandomStream) -> BandNoise:
    """Draw the unit-scale variates of one sample in canonical order."""
    m, n, k = spec.m, spec.n, spec.k
    lengths = band_lengths(m, n, k)
    bands = []
    for t in range(k + 1):
        L = lengths[t]
        if L == 0:
            bands.append(_freeze(np.empty(0)))
        elif t == 0:
            bands.append(_freeze(np.atleast_1d(stream.chi(diag_dfs(m, n)))))
        elif t == k:
            bands.append(_freeze(np.atleast_1d(stream.chi(sub_dfs(m, n, k)))))
        else:
            bands.append(_freeze(np.atleast_1d(stream.normal(1.0, size=L))))
    return BandNoise(m, n, k, tuple(bands))


def apply_spikes(spec: SpikeSpec, noise: BandNoise) -> BandedSample:
    """Scale recorded unit noise by the row sigmas of ``spec``.

    This is the deterministic replay map: the sample is linear in each
    spike, entry by entry, and rows beyond the spiked ones are returned
    unchanged.
    """
    if not noise.matches(spec):
        raise ParameterError(
            f"noise was recorded for (m={noise.m}, n={noise.n}, k={noise.k}), "
            f"spec has (m={spec.m}, n={spec.n}, k={spec.k})"
        )
    bands = []
    for t, unit in enumerate(noise.bands):
        bands.append(_freeze(unit * _band_sigmas(spec, t, unit.shape[0])))
    return BandedSample(spec, tuple(bands), noise)


def sample_banded(spec: SpikeSpec, stream: RandomStream) -> BandedSample:
    """Draw one banded realization; its singular values are distributed
    as those of the dense spiked Gaussian matrix."""
    return apply_spikes(spec, draw_unit_noise(spec, stream))


def sample_dense(spec: SpikeSpec, stream: RandomStream) -> DenseSample:
    """Draw the dense ``m x n`` matrix directly: entry ``(i, j)`` is
    ``N(0, sigma_i^2)``. Rows are drawn in order, row-major."""
    values = stream.normal(1.0, size=(spec.m, spec.n))
    values[:spec.k] *= spec.spike_array[:, None]
    return DenseSample(spec, _freeze(values))


# -- dense expansion and batch assembly ----------------------------------

def _fill_compact(out: np.ndarray, bands, lengths) -> None:
    for t, band in enumerate(bands):
        L = lengths[t]
        if L:
            out[np.arange(L) + t, np.arange(L)] = band


def to_dense(sample: BandedSample, compact: bool = False) -> np.ndarray:
    """Expand to a dense array: the full ``m x n`` matrix, or just the
    ``min(m, n+k) x min(m, n)`` block that can hold nonzeros."""
    spec = sample.spec
    shape = spec.compact_shape if compact else (spec.m, spec.n)
    out = np.zeros(shape)
    _fill_compact(out, sample.bands, band_lengths(spec.m, spec.n, spec.k))
    return out


def stack_compact(spec: SpikeSpec, noises) -> np.ndarray:
    """Compact blocks of many replayed samples as one ``(B, R, C)`` array."""
    lengths = band_lengths(spec.m, spec.n, spec.k)
    sigmas = [_band_sigmas(spec, t, L) for t, L in enumerate(lengths)]
    R, C = spec.compact_shape
    out = np.zeros((len(noises), R, C))
    for b, noise in enumerate(noises):
        if not noise.matches(spec):
            raise ParameterError(f"noise {b} does not match the spec shape")
        for t, unit in enumerate(noise.bands):
            L = lengths[t]
            if L:
                out[b, np.arange(L) + t, np.arange(L)] = unit * sigmas[t]
    return out


# -- serialization --------------------------------------------------------

def iter_entries(sample: BandedSample):
    """Yield stored entries as ``(i, j, value, kind)`` in canonical order,
    with 1-based indices."""
    for t, band in enumerate(sample.bands):
        rows = _band_rows(t, band.shape[0])
        for p, value in enumerate(band):
            yield int(rows[p]), p + 1, float(value), sample.entry_kind(t, p)


def write_band_triplets(sample: BandedSample, path) -> None:
    """Write the compact triplet text format: a spec comment line, a
    header row, then one ``i,j,value,kind`` row per stored entry."""
    spec = sample.spec
    with open(path, "w", newline="") as fh:
        spikes = ",".join(repr(s) for s in spec.spikes)
        fh.write(f"# spikedwishart banded-sample m={spec.m} n={spec.n} spikes={spikes}\r\n")
        writer = csv.writer(fh)
        writer.writerow(["i", "j", "value", "kind"])
        for i, j, value, kind in iter_entries(sample):
            writer.writerow([i, j, repr(value), kind])


_HEADER_RE = re.compile(
    r"#\s*spikedwishart banded-sample m=(\d+) n=(\d+) spikes=([0-9eE+.,-]+)"
)


def read_band_triplets(path) -> BandedSample:
    """Read a file written by :func:`write_band_triplets`.

    The returned sample carries no noise record (values only round-trip
    bit-exactly; the unit-scale variates are not stored)."""
    with open(path, "r", newline="") as fh:
        header = fh.readline()
        match = _HEADER_RE.match(header.strip())
        if not match:
            raise ParameterError(f"not a banded-sample triplet file: {path}")
        m, n = int(match.group(1)), int(match.group(2))
        spikes = tuple(float(s) for s in match.group(3).split(","))
        spec = SpikeSpec(m, n, spikes)
        lengths = band_lengths(m, n, spec.k)
        bands = [np.zeros(L) for L in lengths]
        seen = [np.zeros(L, dtype=bool) for L in lengths]
        reader = csv.reader(fh)
        head = next(reader, None)
        if head != ["i", "j", "value", "kind"]:
            raise ParameterError(f"missing triplet header row in {path}")
        for row in reader:
            if not row:
                continue
            i, j, value = int(row[0]), int(row[1]), float(row[2])
            t, p = i - j, j - 1
            if not (0 <= t <= spec.k and 0 <= p < lengths[t]):
                raise ParameterError(f"entry ({i}, {j}) outside the band structure")
            bands[t][p] = value
            seen[t][p] = True
    if not all(s.all() for s in seen):
        raise ParameterError(f"triplet file {path} is missing band entries")
    return BandedSample(spec, tuple(_freeze(b) for b in bands), None)


def write_dense_csv(sample: BandedSample, path) -> None:
    """Write the dense expansion as CSV with a ``c1..cn`` header row."""
    dense = to_dense(sample)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"c{j}" for j in range(1, dense.shape[1] + 1)])
        for row in dense:
            writer.writerow([repr(float(v)) for v in row])
