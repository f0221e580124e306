"""Spike derivatives of sampled singular values, and least-squares spike
fitting.

A draw is linear in each spike: row ``r <= k`` of the matrix is its
unit-scale noise times ``sigma_r``, rows beyond ``k`` do not depend on the
spikes at all. Holding the noise fixed (:func:`reparam_resample`) makes
the singular values a deterministic, piecewise-smooth function of the
spikes, and for a simple singular value ``d_l`` with unit vectors
``u_l, v_l`` first-order perturbation of ``d_l = u_l' H v_l`` gives

    dd_l / dsigma_r = u_l[r] * (H v_l)[r] / sigma_r,     r <= k.

:func:`sample_jacobian` evaluates that from the ``left_rows`` and
``right_projections`` a spectral result already carries.
:func:`mean_singular_values` averages values and Jacobians over a batch
(one substream per sample), and :func:`fit_spikes` runs Levenberg-
Marquardt on the batch means against a target, reusing one fixed noise
batch across iterations so the objective it minimizes is deterministic.

The derivative formula breaks down at repeated singular values. The
values themselves stay continuous through a tie, so clustered samples
only drop out of the batch-mean Jacobian (keeping the fitted objective
continuous in the spikes); they are counted, and a fit aborts if more
than 1% of its batch drops.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateBatchError,
    DegenerateSingularValueError,
    NumericError,
    ParameterError,
)
from .sampler import (
    BandedSample,
    BandNoise,
    SpikeSpec,
    apply_spikes,
    draw_unit_noise,
    stack_compact,
)
from .spectra import DENSE_TOP_CUTOFF, SpectralResult, _cluster_flags, top_svd
from .variates import RandomStream

__all__ = [
    "JacobianBatch",
    "FitReport",
    "sample_jacobian",
    "reparam_resample",
    "mean_singular_values",
    "fit_spikes",
]

# LM schedule constants
_LM_LAMBDA0_SCALE = 1e-3
_LM_ACCEPT_FACTOR = 0.5
_LM_REJECT_FACTOR = 2.0
_LM_STEP_TOL = 1e-8
_LM_RESIDUAL_TOL = 1e-12
_LM_MAX_REJECTS = 60

# fraction of a batch that may be dropped for clustered values before a
# fit gives up
_DROP_LIMIT = 0.01


@dataclass(eq=False)
class JacobianBatch:
    """Per-sample and batch-mean derivative matrices.

    ``per_sample[b][l, r]`` is ``dd_l / dsigma_r`` for one retained
    realization; ``mean`` is their arithmetic mean. ``dropped`` counts
    realizations whose derivatives were discarded for clustered singular
    values (their values still enter the value means).
    """

    per_sample: list
    mean: np.ndarray
    batch_size: int
    L: int
    dropped: int = 0


@dataclass(eq=False)
class FitReport:
    """Trajectory of one Levenberg-Marquardt fit.

    ``iterates[0]`` is the initial spike vector; one entry is appended
    per accepted step, with the matching residual norm and damping value.
    ``status`` is ``converged``, ``max_iters`` or ``stalled``.
    """

    iterates: list
    residual_norms: list
    damping_trace: list
    status: str
    final_spikes: tuple
    final_means: np.ndarray = field(default=None, repr=False)
    dropped: int = 0

    def as_dict(self) -> dict:
        """JSON-ready representation."""
        return {
            "iterates": [list(map(float, s)) for s in self.iterates],
            "residual_norms": [float(r) for r in self.residual_norms],
            "damping_trace": [float(d) for d in self.damping_trace],
            "status": self.status,
            "final_spikes": [float(s) for s in self.final_spikes],
            "final_means": [float(v) for v in np.asarray(self.final_means)],
            "dropped": int(self.dropped),
        }


def sample_jacobian(H: BandedSample, S: SpectralResult) -> np.ndarray:
    """The matrix ``J[l, r] = dd_l / dsigma_r`` for one realization.

    Uses the vector data recorded in ``S`` (which must have been computed
    from ``H``). Raises :class:`DegenerateSingularValueError` if any
    covered singular value is flagged as clustered, since the formula
    presumes simple values.
    """
    spec = H.spec
    if S.left_rows.shape != (spec.k, S.ncomputed):
        raise ParameterError(
            "spectral result does not match the sample's spike count"
        )
    if np.any(S.clustered):
        raise DegenerateSingularValueError(
            "clustered singular values among the covered range; "
            "derivatives are undefined there"
        )
    J = (S.left_rows * S.right_projections / spec.spike_array[:, None]).T
    if not np.all(np.isfinite(J)):
        raise NumericError("non-finite derivative entries")
    return J


def reparam_resample(spec: SpikeSpec, noise: BandNoise) -> BandedSample:
    """Replay recorded unit-scale noise under new spikes.

    Entry by entry this is the recorded value times the row's sigma, so
    rows ``r <= k`` are exactly linear in ``sigma_r`` and later rows never
    change. Deterministic in ``(noise, spec)``.
    """
    return apply_spikes(spec, noise)


def _eval_noise_batch(spec: SpikeSpec, noises, L: int):
    """Batch means of the top-L values and derivatives over fixed noise.

    Returns ``(means, mean_jac, per_sample_values, per_sample_jacs,
    dropped)``. Every realization enters the value means (the values are
    continuous even through a tie, which keeps the fitted objective
    continuous in the spikes); realizations with clustered values in the
    covered range contribute no derivative and are counted in ``dropped``.
    """
    sig = spec.spike_array
    k = spec.k
    R, C = spec.compact_shape
    values, jacs = [], []
    dropped = 0
    if C > DENSE_TOP_CUTOFF and L < C:
        for noise in noises:
            sample = apply_spikes(spec, noise)
            S = top_svd(sample, L)
            values.append(S.singular_values[:L].copy())
            if S.clustered[:L].any():
                dropped += 1
                continue
            jacs.append(sample_jacobian(sample, S))
    else:
        chunk = max(1, min(256, int(2e7 // (R * C + 1))))
        for lo in range(0, len(noises), chunk):
            blocks = stack_compact(spec, noises[lo:lo + chunk])
            U, s, Vt = np.linalg.svd(blocks, full_matrices=False)
            # p[b, r, l] = row r of block b dotted with right vector l
            proj = blocks[:, :k, :] @ Vt.transpose(0, 2, 1)
            J = U[:, :k, :] * proj / sig[None, :, None]
            for b in range(blocks.shape[0]):
                values.append(s[b, :L].copy())
                if _cluster_flags(s[b])[:L].any():
                    dropped += 1
                    continue
                jacs.append(np.array(J[b].T[:L]))
    if not jacs:
        raise DegenerateBatchError(
            "every realization in the batch had clustered singular values",
            dropped=dropped, batch=len(noises),
        )
    means = np.mean(np.stack(values), axis=0)
    mean_jac = np.mean(np.stack(jacs), axis=0)
    if not (np.all(np.isfinite(means)) and np.all(np.isfinite(mean_jac))):
        raise NumericError("non-finite batch means")
    return means, mean_jac, values, jacs, dropped


def _check_batch_args(spec: SpikeSpec, L, batch, stream):
    C = min(spec.m, spec.n)
    if L is None:
        L = C
    if not isinstance(L, (int, np.integer)) or not 1 <= L <= C:
        raise ParameterError(f"L must be in 1..{C}, got {L!r}")
    if not isinstance(batch, (int, np.integer)) or batch < 1:
        raise ParameterError(f"batch must be >= 1, got {batch!r}")
    if not isinstance(stream, RandomStream):
        raise ParameterError(f"stream must be a RandomStream, got {stream!r}")
    return int(L), int(batch)


def mean_singular_values(spec: SpikeSpec, L: int, batch: int,
                         stream: RandomStream):
    """Batch means of the top-``L`` singular values and the batch-mean
    Jacobian, one deterministic substream per sample.

    Returns ``(means, JacobianBatch)``. ``L = None`` covers the full
    spectrum. Realizations with clustered values keep their values but
    contribute no derivative; the returned batch counts them as dropped.
    """
    L, batch = _check_batch_args(spec, L, batch, stream)
    noises = [draw_unit_noise(spec, stream.substream(b)) for b in range(batch)]
    means, mean_jac, _, jacs, dropped = _eval_noise_batch(spec, noises, L)
    jb = JacobianBatch(per_sample=jacs, mean=mean_jac,
                       batch_size=len(jacs), L=L, dropped=dropped)
    return means, jb


def fit_spikes(target, spec_template: SpikeSpec, init_spikes, batch: int,
               max_iters: int, stream: RandomStream,
               fresh_noise: bool = False) -> FitReport:
    """Levenberg-Marquardt fit of spikes to target mean singular values.

    Minimizes ``sum_l (mean_d_l(sigma) - target_l)^2`` using the
    batch-mean Jacobian, optimizing in log-spike coordinates so the
    spikes stay positive. One fixed noise batch is reused across all
    iterations (common random numbers) so the objective is deterministic
    within a fit; ``fresh_noise=True`` redraws the batch each iteration
    instead.

    Spikes are only identified up to permutation (permuting them permutes
    rows of the model, which does not change the singular-value
    distribution), so iterates and the reported spikes use the descending
    representative.

    ``max_iters`` bounds the number of trial steps. Raises
    :class:`DegenerateBatchError` if more than 1% of a batch drops for
    clustered singular values.
    """
    target = np.asarray(target, dtype=np.float64).ravel()
    L = target.shape[0]
    sigma = np.sort(np.asarray(init_spikes, dtype=np.float64).ravel())[::-1]
    spec0 = SpikeSpec(spec_template.m, spec_template.n, tuple(sigma))
    k = spec0.k
    L_checked, batch = _check_batch_args(spec0, L, batch, stream)
    if not isinstance(max_iters, (int, np.integer)) or max_iters < 1:
        raise ParameterError(f"max_iters must be >= 1, got {max_iters!r}")
    if not np.all(np.isfinite(target)) or np.any(target <= 0):
        raise ParameterError("target singular values must be finite and > 0")
    if np.any(np.diff(target) > 0):
        raise ParameterError("target singular values must be descending")
    if L < k:
        warnings.warn(
            f"fitting {k} spikes against only {L} singular values is "
            "underdetermined", stacklevel=2,
        )

    noise_offset = 0

    def draw_batch():
        nonlocal noise_offset
        lo = noise_offset
        if fresh_noise:
            noise_offset += batch
        return [draw_unit_noise(spec0, stream.substream(lo + b))
                for b in range(batch)]

    noises = draw_batch()

    def evaluate(sig_vec):
        spec = SpikeSpec(spec0.m, spec0.n, tuple(sig_vec))
        means, mean_jac, _, _, dropped = _eval_noise_batch(spec, noises, L_checked)
        return means, mean_jac, dropped

    means, jac_sigma, dropped = evaluate(sigma)
    if dropped > _DROP_LIMIT * batch:
        # the working iterate itself cannot be evaluated reliably
        raise DegenerateBatchError(
            f"{dropped} of {batch} realizations dropped for clustered "
            "singular values; fit aborted",
            dropped=dropped, batch=batch,
        )
    g = means - target
    res = float(np.linalg.norm(g))
    theta = np.log(sigma)
    jac = jac_sigma * sigma[None, :]
    lam = _LM_LAMBDA0_SCALE * float(np.max(np.sum(jac * jac, axis=0)))
    if not lam > 0.0:
        lam = _LM_LAMBDA0_SCALE

    iterates = [tuple(sigma)]
    residual_norms = [res]
    damping_trace = [lam]
    status = "max_iters"
    accepted_res = [res]
    rejects = 0

    if res == 0.0:
        return FitReport(
            iterates=iterates, residual_norms=residual_norms,
            damping_trace=damping_trace, status="converged",
            final_spikes=tuple(float(s) for s in sigma),
            final_means=means, dropped=dropped,
        )

    for _ in range(int(max_iters)):
        JtJ = jac.T @ jac
        rhs = -jac.T @ g
        try:
            delta = np.linalg.solve(JtJ + lam * np.eye(k), rhs)
        except np.linalg.LinAlgError:
            delta = np.linalg.lstsq(JtJ + lam * np.eye(k), rhs, rcond=None)[0]
        # trust region in log space: at most about x12 per spike per step,
        # so one bad linearization cannot shoot the iterate somewhere wild
        big = np.max(np.abs(delta))
        if big > 2.5:
            delta *= 2.5 / big
        # permuting spikes permutes rows of the model, which leaves the
        # singular-value distribution unchanged, so iterate in the
        # descending representative of each proposal
        sigma_try = np.sort(np.exp(theta + delta))[::-1]
        if fresh_noise:
            noises = draw_batch()
        means_try, jac_try, dropped_try = evaluate(sigma_try)
        res_try = float(np.linalg.norm(means_try - target))
        if dropped_try > _DROP_LIMIT * batch:
            # the objective at this trial point is not trustworthy;
            # back off as if the step were rejected
            lam *= _LM_REJECT_FACTOR
            rejects += 1
            if rejects >= _LM_MAX_REJECTS or not math.isfinite(lam):
                status = "stalled"
                break
            continue
        if res_try < res:
            step = float(np.linalg.norm(sigma_try - sigma))
            sigma, theta = sigma_try, np.log(sigma_try)
            means, g, res = means_try, means_try - target, res_try
            dropped = dropped_try
            jac = jac_try * sigma[None, :]
            lam *= _LM_ACCEPT_FACTOR
            rejects = 0
            iterates.append(tuple(sigma))
            residual_norms.append(res)
            damping_trace.append(lam)
            accepted_res.append(res)
            if step < _LM_STEP_TOL * float(np.linalg.norm(sigma)):
                status = "converged"
                break
            if (len(accepted_res) >= 4
                    and accepted_res[-4] - accepted_res[-1] < _LM_RESIDUAL_TOL):
                status = "converged"
                break
        else:
            lam *= _LM_REJECT_FACTOR
            rejects += 1
            if rejects >= _LM_MAX_REJECTS or not math.isfinite(lam):
                status = "stalled"
                break

    return FitReport(
        iterates=iterates,
        residual_norms=residual_norms,
        damping_trace=damping_trace,
        status=status,
        final_spikes=tuple(float(s) for s in sigma),
        final_means=means,
        dropped=dropped,
    )
