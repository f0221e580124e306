"""Singular values and singular-vector data of banded samples.

Two routes:

* :func:`full_svd` expands the ``min(m, n+k) x min(m, n)`` nonzero block
  and runs a dense SVD on it, appending nothing for the rank-deficient
  remainder. This keeps the pseudo-Wishart case (``n < m``) at the cost
  of the small block rather than the full matrix.
* :func:`top_svd` computes only the leading values with Golub-Kahan-
  Lanczos bidiagonalization over the banded matvec kernels, with full
  reorthogonalization and deflation of converged triplets. Its work per
  iteration is ``O((k+1) * min(m, n))``.

Both return a :class:`SpectralResult` that carries, besides the values,
the rows of the left singular vectors at the spiked coordinates and the
projections of the spiked rows onto the right singular vectors. Those two
arrays are exactly what the spike derivatives need, so callers can drop
the (large) full vector data when batching.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, NumericError, ParameterError
from .sampler import (
    BandedSample,
    SpikeSpec,
    apply_spikes,
    band_lengths,
    draw_unit_noise,
    sample_dense,
    stack_compact,
    to_dense,
)
from .variates import RandomStream

__all__ = [
    "SpectralResult",
    "full_svd",
    "top_svd",
    "band_matvec",
    "band_rmatvec",
    "singular_value_draws",
]

# gap below which neighboring singular values are flagged as a cluster,
# relative to the largest computed value
CLUSTER_GAP = 1e-6

# triplet residual tolerance, relative to the Ritz value
_GKL_RTOL = 1e-10

_GKL_START_SEED = 0x51B3D


@dataclass(eq=False)
class SpectralResult:
    """Computed singular values (descending) plus the vector data needed
    for spike derivatives.

    ``left_rows[r, l]`` is entry ``r`` of the ``l``-th left singular
    vector for the spiked rows ``r < k``; ``right_projections[r, l]`` is
    the dot product of row ``r`` of the matrix with the ``l``-th right
    singular vector. ``clustered[l]`` marks values whose gap to a
    neighbor is below ``CLUSTER_GAP`` times the largest value (their
    vector data, and hence derivatives, are unreliable).
    """

    singular_values: np.ndarray
    left_rows: np.ndarray
    right_projections: np.ndarray
    ncomputed: int
    clustered: np.ndarray
    u_vectors: np.ndarray | None = field(default=None, repr=False)
    v_vectors: np.ndarray | None = field(default=None, repr=False)


def _cluster_flags(d: np.ndarray) -> np.ndarray:
    flags = np.zeros(d.shape[0], dtype=bool)
    if d.shape[0] == 0:
        return flags
    tol = CLUSTER_GAP * max(d[0], 0.0)
    if d.shape[0] > 1:
        gaps = d[:-1] - d[1:]
        small = gaps < tol
        flags[:-1] |= small
        flags[1:] |= small
    flags |= d <= 0.0
    return flags


def _spiked_rows_dense(sample: BandedSample) -> np.ndarray:
    """Rows 1..k of the matrix as a dense (k, min(m, n)) array."""
    spec = sample.spec
    lengths = band_lengths(spec.m, spec.n, spec.k)
    C = min(spec.m, spec.n)
    out = np.zeros((spec.k, C))
    for r0 in range(min(spec.k, spec.m)):
        for t in range(min(spec.k, r0) + 1):
            p = r0 - t
            if p < lengths[t]:
                out[r0, p] = sample.bands[t][p]
    return out


def _result_from_uv(sample: BandedSample, d, U, Vt) -> SpectralResult:
    spec = sample.spec
    left_rows = np.array(U[:spec.k, :])
    right_projections = _spiked_rows_dense(sample) @ Vt.T
    return SpectralResult(
        singular_values=d,
        left_rows=left_rows,
        right_projections=right_projections,
        ncomputed=d.shape[0],
        clustered=_cluster_flags(d),
        u_vectors=U,
        v_vectors=Vt.T,
    )


def full_svd(sample: BandedSample) -> SpectralResult:
    """All ``min(m, n)`` singular values via a dense SVD of the compact
    nonzero block."""
    block = to_dense(sample, compact=True)
    if not np.all(np.isfinite(block)):
        raise NumericError("sample contains non-finite entries")
    U, d, Vt = np.linalg.svd(block, full_matrices=False)
    return _result_from_uv(sample, d, U, Vt)


# -- banded matvec kernels -------------------------------------------------

def _bands_matvec(bands, lengths, nrows: int, x: np.ndarray) -> np.ndarray:
    y = np.zeros(nrows)
    for t, band in enumerate(bands):
        L = lengths[t]
        if L:
            y[t:t + L] += band * x[:L]
    return y


def _bands_rmatvec(bands, lengths, ncols: int, y: np.ndarray) -> np.ndarray:
    x = np.zeros(ncols)
    for t, band in enumerate(bands):
        L = lengths[t]
        if L:
            x[:L] += band * y[t:t + L]
    return x


def band_matvec(sample: BandedSample, x: np.ndarray) -> np.ndarray:
    """``H @ x`` for the full logical shape, in O((k+1) min(m, n)) time."""
    spec = sample.spec
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (spec.n,):
        raise ParameterError(f"x must have shape ({spec.n},), got {x.shape}")
    lengths = band_lengths(spec.m, spec.n, spec.k)
    return _bands_matvec(sample.bands, lengths, spec.m, x)


def band_rmatvec(sample: BandedSample, y: np.ndarray) -> np.ndarray:
    """``H.T @ y`` for the full logical shape."""
    spec = sample.spec
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (spec.m,):
        raise ParameterError(f"y must have shape ({spec.m},), got {y.shape}")
    lengths = band_lengths(spec.m, spec.n, spec.k)
    return _bands_rmatvec(sample.bands, lengths, spec.n, y)


# -- Golub-Kahan-Lanczos with deflation ------------------------------------

class _Basis:
    """Preallocated column store with two-pass Gram-Schmidt removal."""

    def __init__(self, dim: int, capacity: int):
        self.cols = np.empty((capacity, dim))
        self.count = 0

    def append(self, x: np.ndarray) -> None:
        self.cols[self.count] = x
        self.count += 1

    def view(self) -> np.ndarray:
        return self.cols[:self.count]

    def orthogonalize(self, x: np.ndarray) -> np.ndarray:
        if self.count:
            B = self.view()
            x = x - B.T @ (B @ x)
        return x


def _remove(x: np.ndarray, *bases) -> np.ndarray:
    # two passes of classical Gram-Schmidt keep orthogonality near eps
    for _ in range(2):
        for basis in bases:
            x = basis.orthogonalize(x)
    return x


def _gkl_run(matvec, rmatvec, locked_u: _Basis, locked_v: _Basis, v_start,
             need: int, room: int, iter_state, scale_hint: float):
    """One bidiagonalization sweep on the deflated operator.

    Returns ``(d, us, vs, exhausted)`` with at most ``need`` exactly-, or
    residual-, converged leading triplets. ``exhausted`` signals that the
    run ended on breakdown or a full basis and a restart may find more.
    """
    dim_u = locked_u.cols.shape[1]
    dim_v = locked_v.cols.shape[1]
    maxdim = room if room <= 300 else max(200, 10 * need)
    Us, Vs = _Basis(dim_u, maxdim + 1), _Basis(dim_v, maxdim + 1)
    alphas, betas = [], []
    anorm = scale_hint
    v = v_start
    Vs.append(v)
    u_prev, beta_prev = None, 0.0

    def triplets(B, count, beta_tail, v_tail):
        P, s, Qt = np.linalg.svd(B)
        res = abs(beta_tail) * np.abs(P[-1, :s.shape[0]])
        us = Us.view().T @ P
        vs = Vs.view()[:Qt.shape[1]].T @ Qt.T
        return s[:count], us[:, :count], vs[:, :count], res[:count]

    while True:
        iter_state["used"] += 1
        u = matvec(v)
        if u_prev is not None:
            u -= beta_prev * u_prev
        u = _remove(u, locked_u, Us)
        alpha = float(np.linalg.norm(u))
        anorm = max(anorm, alpha)
        btol = 64.0 * np.finfo(float).eps * max(anorm, 1.0)
        q = len(alphas)
        if alpha <= btol:
            # A maps the remaining Krylov space into the found one. The
            # rectangular factorization is exact, but only the leading
            # triplet is certainly a leading one of the deflated operator
            # (a repeated value can hide from a single Krylov space), so
            # lock just it and let the caller restart.
            if q == 0:
                return (np.zeros(0), np.zeros((dim_u, 0)), np.zeros((dim_v, 0)), True)
            B = np.zeros((q, q + 1))
            B[np.arange(q), np.arange(q)] = alphas
            B[np.arange(q - 1), np.arange(1, q)] = betas[:q - 1]
            B[q - 1, q] = beta_prev
            d, us, vs, _ = triplets(B, 1, 0.0, None)
            return d, us, vs, True
        u /= alpha
        Us.append(u)
        alphas.append(alpha)
        q = len(alphas)

        w = rmatvec(u) - alpha * v
        w = _remove(w, locked_v, Vs)
        beta = float(np.linalg.norm(w))
        anorm = max(anorm, beta)
        btol = 64.0 * np.finfo(float).eps * max(anorm, 1.0)

        B = np.zeros((q, q))
        B[np.arange(q), np.arange(q)] = alphas
        if q > 1:
            B[np.arange(q - 1), np.arange(1, q)] = betas[:q - 1]
        count = min(need, q)
        d, us, vs, res = triplets(B, count, beta, w)

        if q >= room:
            # basis spans the whole deflated space: exact spectrum
            return d, us, vs, True
        if beta <= btol:
            # invariant Krylov subspace short of the whole space: the top
            # triplet is exact and certainly leading, the rest may skip a
            # hidden repeated value, so hand back only the top
            return d[:1], us[:, :1], vs[:, :1], True
        if count == need and np.all(res <= _GKL_RTOL * np.maximum(d, btol)):
            return d, us, vs, False
        if q >= maxdim:
            # keep whatever leading prefix has converged, then restart
            good = 0
            while good < count and res[good] <= _GKL_RTOL * max(d[good], btol):
                good += 1
            if good == 0:
                # a full sweep without one converged pair will not improve
                # on restart; refuse rather than hand back junk
                raise ConvergenceError(
                    f"top_svd made no progress within a {maxdim}-step sweep",
                    residuals=res,
                )
            return d[:good], us[:, :good], vs[:, :good], True
        if iter_state["used"] >= iter_state["cap"]:
            raise ConvergenceError(
                f"top_svd failed to converge within {iter_state['cap']} iterations",
                residuals=res,
            )
        v = w / beta
        Vs.append(v)
        betas.append(beta)
        u_prev, beta_prev = u, beta


def _gkl_topk(matvec, rmatvec, nrows: int, ncols: int, ell: int,
              scale_hint: float = 0.0):
    """Leading ``ell`` singular triplets of an abstract linear operator."""
    cap = 10 * ell * max(1, math.ceil(math.log2(max(2, ncols))))
    iter_state = {"used": 0, "cap": cap}
    rng = np.random.default_rng(_GKL_START_SEED)
    locked_u, locked_v = _Basis(nrows, ell), _Basis(ncols, ell)
    locked_d = []
    while len(locked_d) < ell:
        v0 = _remove(rng.standard_normal(ncols), locked_v)
        nv = float(np.linalg.norm(v0))
        if nv <= 0.0:
            break
        d, us, vs, exhausted = _gkl_run(
            matvec, rmatvec, locked_u, locked_v, v0 / nv,
            need=ell - len(locked_d), room=ncols - len(locked_d),
            iter_state=iter_state, scale_hint=scale_hint,
        )
        for j in range(d.shape[0]):
            locked_d.append(float(d[j]))
            locked_u.append(us[:, j])
            locked_v.append(vs[:, j])
        if not exhausted and len(locked_d) < ell:
            # a clean run returned fewer than requested: treat as stall
            raise ConvergenceError(
                "top_svd run ended without the requested number of triplets",
                residuals=None,
            )
        if exhausted and d.shape[0] == 0 and len(locked_d) < ell:
            # operator is (numerically) zero on the remaining space
            while len(locked_d) < ell:
                locked_d.append(0.0)
                locked_u.append(np.zeros(nrows))
                locked_v.append(np.zeros(ncols))
            break
    order = np.argsort(locked_d)[::-1][:ell]
    d = np.asarray(locked_d)[order]
    U = locked_u.view().T[:, order]
    V = locked_v.view().T[:, order]
    return d, U, V


def top_svd(sample: BandedSample, ell: int) -> SpectralResult:
    """The ``ell`` largest singular values and associated vector data.

    Agrees with :func:`full_svd` to about ``1e-8`` relative; raises
    :class:`ConvergenceError` (with residual norms attached) if the
    iteration cap is hit first.
    """
    spec = sample.spec
    R, C = spec.compact_shape
    if not isinstance(ell, (int, np.integer)) or not 1 <= ell <= C:
        raise ParameterError(f"ell must be in 1..{C}, got {ell!r}")
    for band in sample.bands:
        if not np.all(np.isfinite(band)):
            raise NumericError("sample contains non-finite entries")
    lengths = band_lengths(spec.m, spec.n, spec.k)
    bands = sample.bands
    scale_hint = max((float(np.max(np.abs(b))) for b in bands if b.size), default=0.0)

    def matvec(x):
        return _bands_matvec(bands, lengths, R, x)

    def rmatvec(y):
        return _bands_rmatvec(bands, lengths, C, y)

    d, U, V = _gkl_topk(matvec, rmatvec, R, C, int(ell), scale_hint)
    return _result_from_uv(sample, d, U, V.T)


# -- Monte Carlo draws ------------------------------------------------------

# compact blocks up to this many columns go through the stacked dense SVD
DENSE_TOP_CUTOFF = 256


def singular_value_draws(spec: SpikeSpec, draws: int, stream: RandomStream,
                         method: str = "banded", top: int | None = None) -> np.ndarray:
    """Singular values of ``draws`` independent samples, one substream per
    draw, as a ``(draws, L)`` array sorted descending along rows.

    ``method="banded"`` uses the sparse construction; ``method="dense"``
    draws the Gaussian matrix directly (the brute-force oracle). ``top``
    limits the output to the leading values; with the banded method and a
    large matrix this switches to the iterative solver.
    """
    if method not in ("banded", "dense"):
        raise ParameterError(f"method must be 'banded' or 'dense', got {method!r}")
    if not isinstance(draws, (int, np.integer)) or draws < 1:
        raise ParameterError(f"draws must be >= 1, got {draws!r}")
    C = min(spec.m, spec.n)
    L = C if top is None else int(top)
    if not 1 <= L <= C:
        raise ParameterError(f"top must be in 1..{C}, got {top!r}")

    if method == "banded":
        noises = [draw_unit_noise(spec, stream.substream(b)) for b in range(draws)]
        if top is not None and C > DENSE_TOP_CUTOFF:
            out = np.empty((draws, L))
            for b, noise in enumerate(noises):
                out[b] = top_svd(apply_spikes(spec, noise), L).singular_values
            return out
        out = np.empty((draws, C))
        chunk = max(1, min(1024, int(4e7 // (spec.compact_shape[0] * C + 1))))
        for lo in range(0, draws, chunk):
            hi = min(draws, lo + chunk)
            blocks = stack_compact(spec, noises[lo:hi])
            out[lo:hi] = np.linalg.svd(blocks, compute_uv=False)
        return out[:, :L]

    out = np.empty((draws, C))
    chunk = max(1, min(256, int(4e7 // (spec.m * spec.n + 1))))
    for lo in range(0, draws, chunk):
        hi = min(draws, lo + chunk)
        G = np.empty((hi - lo, spec.m, spec.n))
        for b in range(lo, hi):
            G[b - lo] = sample_dense(spec, stream.substream(b)).values
        out[lo:hi] = np.linalg.svd(G, compute_uv=False)
    return out[:, :L]
