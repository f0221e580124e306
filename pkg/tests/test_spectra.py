import numpy as np
import pytest

from spikedwishart import (
    ConvergenceError,
    NumericError,
    ParameterError,
    RandomStream,
    SpikeSpec,
    band_matvec,
    band_rmatvec,
    full_svd,
    sample_banded,
    singular_value_draws,
    to_dense,
    top_svd,
)
from spikedwishart.sampler import BandedSample, apply_spikes, draw_unit_noise

from oracles import jacobi_eigvals


def diagonal_fixture(diag, k=1):
    n = len(diag)
    spec = SpikeSpec(n, n, tuple(1.0 for _ in range(k)))
    bands = [np.asarray(diag, dtype=np.float64)]
    for t in range(1, k + 1):
        bands.append(np.zeros(n - t))
    return BandedSample(spec, tuple(bands), None)


def test_diagonal_fixture_sorted():
    result = full_svd(diagonal_fixture([3.0, 1.0, 2.0]))
    assert np.array_equal(result.singular_values, [3.0, 2.0, 1.0])
    assert result.ncomputed == 3


def test_1x1():
    spec = SpikeSpec(1, 1, (1.0,))
    sample = BandedSample(spec, (np.array([2.5]), np.empty(0)), None)
    result = full_svd(sample)
    assert result.singular_values[0] == 2.5
    assert np.allclose(result.u_vectors, [[1.0]])
    assert np.allclose(result.v_vectors, [[1.0]])
    assert np.allclose(result.left_rows, [[1.0]])
    assert np.allclose(result.right_projections, [[2.5]])


def test_full_svd_against_jacobi_oracle():
    spec = SpikeSpec(12, 9, (6.0, 2.0))
    sample = sample_banded(spec, RandomStream(13))
    d = full_svd(sample).singular_values
    W = to_dense(sample) @ to_dense(sample).T
    lam = jacobi_eigvals(W)
    ref = np.sqrt(np.clip(lam[:9], 0.0, None))
    assert d.shape == (9,)
    assert np.max(np.abs(d - ref) / ref) < 1e-10
    # the trailing eigenvalues of the 12x12 product are exact zeros
    assert np.all(np.abs(lam[9:]) < 1e-10 * lam[0])


def test_pseudo_wishart_value_count():
    for m, n, spikes in ((20, 10, (10.0,)), (40, 6, (5.0, 2.0))):
        sample = sample_banded(SpikeSpec(m, n, spikes), RandomStream(m + n))
        result = full_svd(sample)
        assert result.ncomputed == min(m, n)
        assert np.all(result.singular_values > 0)
        assert np.all(np.diff(result.singular_values) <= 0)


def test_triplet_residuals_and_projection_identity():
    spec = SpikeSpec(15, 11, (7.0, 3.0, 1.5))
    sample = sample_banded(spec, RandomStream(29))
    result = full_svd(sample)
    dense = to_dense(sample, compact=True)
    d1 = result.singular_values[0]
    for l in range(result.ncomputed):
        res = dense @ result.v_vectors[:, l] - result.singular_values[l] * result.u_vectors[:, l]
        assert np.linalg.norm(res) <= 1e-8 * d1
    # H v_l = d_l u_l row by row, so p_{r,l} = d_l * U[r,l]
    assert np.allclose(result.right_projections,
                       result.left_rows * result.singular_values[None, :],
                       atol=1e-10 * d1)


def test_full_svd_rejects_nonfinite():
    spec = SpikeSpec(3, 3, (1.0,))
    bands = (np.array([1.0, np.nan, 1.0]), np.zeros(2))
    with pytest.raises(NumericError):
        full_svd(BandedSample(spec, bands, None))
    with pytest.raises(NumericError):
        top_svd(BandedSample(spec, bands, None), 1)


def test_top_svd_exhaustive_matches_full():
    spec = SpikeSpec(9, 7, (4.0, 2.0))
    sample = sample_banded(spec, RandomStream(31))
    full = full_svd(sample).singular_values
    top = top_svd(sample, 7).singular_values
    assert np.max(np.abs(top - full) / full) < 1e-8


def test_top_svd_tall_thin():
    # the scaling regime: huge m, tiny n
    spec = SpikeSpec(5000, 10, (100.0, 30.0, 10.0))
    sample = sample_banded(spec, RandomStream(7))
    top = top_svd(sample, 3)
    full = full_svd(sample)
    rel = np.abs(top.singular_values - full.singular_values[:3]) / full.singular_values[:3]
    assert np.max(rel) < 1e-8
    assert np.allclose(np.abs(top.left_rows), np.abs(full.left_rows[:, :3]), atol=1e-7)


def test_top_svd_repeated_pair():
    sample = diagonal_fixture([5.0, 5.0, 1.0, 1.0])
    result = top_svd(sample, 2)
    assert np.max(np.abs(result.singular_values - 5.0)) < 1e-8 * 5.0
    assert result.clustered.all()
    exhaustive = top_svd(sample, 4)
    assert np.allclose(exhaustive.singular_values, [5.0, 5.0, 1.0, 1.0], rtol=1e-8)


def test_cluster_flags_only_near_ties():
    result = full_svd(diagonal_fixture([9.0, 4.0, 1.0]))
    assert not result.clustered.any()
    tied = full_svd(diagonal_fixture([9.0, 9.0 - 1e-9, 1.0]))
    assert tied.clustered[0] and tied.clustered[1] and not tied.clustered[2]


def test_top_svd_convergence_error(monkeypatch):
    # an unattainable residual tolerance must surface as an error, not as
    # silently zero-padded output
    import spikedwishart.spectra as spectra
    monkeypatch.setattr(spectra, "_GKL_RTOL", -1.0)
    sample = sample_banded(SpikeSpec(400, 400, 1.0), RandomStream(2))
    with pytest.raises(ConvergenceError) as info:
        top_svd(sample, 1)
    assert info.value.residuals is not None


def test_top_svd_parameter_domain():
    sample = sample_banded(SpikeSpec(6, 5, (2.0,)), RandomStream(3))
    with pytest.raises(ParameterError):
        top_svd(sample, 0)
    with pytest.raises(ParameterError):
        top_svd(sample, 6)


def test_matvec_against_dense():
    spec = SpikeSpec(11, 8, (5.0, 2.0, 1.5))
    sample = sample_banded(spec, RandomStream(17))
    dense = to_dense(sample)
    rng = np.random.default_rng(4)
    assert np.array_equal(band_matvec(sample, np.zeros(8)), np.zeros(11))
    for j in range(8):
        e = np.zeros(8)
        e[j] = 1.0
        assert np.max(np.abs(band_matvec(sample, e) - dense[:, j])) < 1e-12
    for _ in range(5):
        x = rng.standard_normal(8)
        y = rng.standard_normal(11)
        assert np.max(np.abs(band_matvec(sample, x) - dense @ x)) < 1e-12
        assert np.max(np.abs(band_rmatvec(sample, y) - dense.T @ y)) < 1e-12
    with pytest.raises(ParameterError):
        band_matvec(sample, np.zeros(11))
    with pytest.raises(ParameterError):
        band_rmatvec(sample, np.zeros(8))


def test_singular_value_draws_deterministic_and_sorted():
    spec = SpikeSpec(12, 10, (6.0, 2.0))
    a = singular_value_draws(spec, 20, RandomStream(5), "banded")
    b = singular_value_draws(spec, 20, RandomStream(5), "banded")
    assert np.array_equal(a, b)
    assert a.shape == (20, 10)
    assert np.all(np.diff(a, axis=1) <= 0)
    top = singular_value_draws(spec, 20, RandomStream(5), "banded", top=3)
    assert np.array_equal(top, a[:, :3])
    dense = singular_value_draws(spec, 20, RandomStream(5), "dense")
    assert dense.shape == (20, 10)
    assert not np.array_equal(dense, a)


def test_singular_value_draws_iterative_path_matches_replay():
    # min(m, n) above the stacked-dense cutoff exercises the sparse solver
    spec = SpikeSpec(300, 300, (40.0, 9.0))
    stream = RandomStream(23)
    top = singular_value_draws(spec, 3, stream, "banded", top=2)
    for b in range(3):
        noise = draw_unit_noise(spec, RandomStream(23).substream(b))
        ref = full_svd(apply_spikes(spec, noise)).singular_values[:2]
        assert np.max(np.abs(top[b] - ref) / ref) < 1e-8


def test_singular_value_draws_parameter_domain():
    spec = SpikeSpec(6, 5, (2.0,))
    with pytest.raises(ParameterError):
        singular_value_draws(spec, 0, RandomStream(1))
    with pytest.raises(ParameterError):
        singular_value_draws(spec, 2, RandomStream(1), method="magic")
    with pytest.raises(ParameterError):
        singular_value_draws(spec, 2, RandomStream(1), top=9)
