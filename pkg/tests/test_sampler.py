import numpy as np
import pytest

from spikedwishart import (
    ParameterError,
    RandomStream,
    SpikeSpec,
    draw_unit_noise,
    read_band_triplets,
    sample_banded,
    sample_dense,
    to_dense,
    write_band_triplets,
    write_dense_csv,
)
from spikedwishart.sampler import apply_spikes, band_lengths, iter_entries

from oracles import build_dense, entry_sigma, expected_dfs


def test_spec_normalizes_empty_spikes():
    spec = SpikeSpec(6, 4)
    assert spec.spikes == (1.0,)
    assert spec.k == 1
    assert SpikeSpec(6, 4, ()).spikes == (1.0,)
    # scalar convenience
    assert SpikeSpec(6, 4, 3).spikes == (3.0,)


def test_spec_validation():
    with pytest.raises(ParameterError):
        SpikeSpec(0, 4)
    with pytest.raises(ParameterError):
        SpikeSpec(4, -1)
    with pytest.raises(ParameterError):
        SpikeSpec(4, 4, (1.0, 0.0))
    with pytest.raises(ParameterError):
        SpikeSpec(4, 4, (float("inf"),))
    with pytest.raises(ParameterError):
        SpikeSpec(2, 5, (1.0, 1.0, 1.0))  # k > m


def test_2x2_structure():
    # sub-band df at (2,1) is m-i+1 = 1, same rule the 5x3 case follows
    sample = sample_banded(SpikeSpec(2, 2, (3.0,)), RandomStream(1))
    kinds = {(i, j): kind for i, j, _, kind in iter_entries(sample)}
    assert kinds == {(1, 1): "chi_diag(2)", (2, 1): "chi_sub(1)", (2, 2): "chi_diag(1)"}
    dense = to_dense(sample)
    assert dense[0, 1] == 0.0
    assert np.all(dense[np.tril_indices(2)] != 0.0)


def test_5x3_pseudo_wishart_structure():
    # n < m: entries stop once the bands run off the bottom
    sample = sample_banded(SpikeSpec(5, 3, (2.0,)), RandomStream(2))
    positions = {(i, j) for i, j, _, _ in iter_entries(sample)}
    assert positions == {(1, 1), (2, 1), (2, 2), (3, 2), (3, 3), (4, 3)}
    dense = to_dense(sample)
    assert dense.shape == (5, 3)
    assert np.all(dense[4, :] == 0.0)
    diag, sub = expected_dfs(sample.spec)
    assert diag == [3, 2, 1] and sub == [4, 3, 2]
    kinds = {(i, j): kind for i, j, _, kind in iter_entries(sample)}
    assert kinds[(1, 1)] == "chi_diag(3)"
    assert kinds[(3, 3)] == "chi_diag(1)"
    assert kinds[(2, 1)] == "chi_sub(4)"
    assert kinds[(4, 3)] == "chi_sub(2)"


def test_1000_band_occupancy():
    spec = SpikeSpec(1000, 1000, (100.0, 30.0, 10.0))
    sample = sample_banded(spec, RandomStream(3))
    lengths = [b.shape[0] for b in sample.bands]
    assert lengths == [1000, 999, 998, 997]
    assert sum(lengths) == 1000 + 999 + 998 + 997
    assert sample.entry_kind(0, 0) == "chi_diag(1000)"
    assert sample.entry_kind(3, 0) == "chi_sub(997)"
    assert sample.entry_kind(1, 17) == "normal"
    assert sample.entry_kind(2, 17) == "normal"


def test_sparsity_and_positivity_random_specs():
    cases = [(7, 4, (2.0,)), (4, 7, (3.0, 1.5)), (9, 9, (5.0, 2.0, 1.0)),
             (3, 8, (2.0, 2.0, 2.0)), (12, 5, (4.0, 3.0))]
    for idx, (m, n, spikes) in enumerate(cases):
        spec = SpikeSpec(m, n, spikes)
        sample = sample_banded(spec, RandomStream(100 + idx))
        dense = to_dense(sample)
        k = spec.k
        for i in range(1, m + 1):
            for j in range(1, n + 1):
                inside = (j <= i <= j + k) and i <= min(m, n + k) and j <= min(m, n)
                if not inside:
                    assert dense[i - 1, j - 1] == 0.0, (m, n, k, i, j)
        for i, j, value, kind in iter_entries(sample):
            if kind.startswith("chi"):
                assert value > 0.0


def test_bidiagonal_reduction_k1_sigma1():
    # one unit spike gives the classic lower-bidiagonal chi model
    spec = SpikeSpec(8, 6, (1.0,))
    sample = sample_banded(spec, RandomStream(9))
    assert len(sample.bands) == 2
    kinds = {kind for _, _, _, kind in iter_entries(sample)}
    assert all(k.startswith("chi") for k in kinds)
    diag, sub = expected_dfs(spec)
    assert diag == [6, 5, 4, 3, 2, 1] and sub == [7, 6, 5, 4, 3, 2]


def test_canonical_order_replay_identity():
    spec = SpikeSpec(9, 7, (4.0, 2.0))
    noise = draw_unit_noise(spec, RandomStream(21))
    direct = sample_banded(spec, RandomStream(21))
    replayed = apply_spikes(spec, noise)
    for a, b in zip(direct.bands, replayed.bands):
        assert np.array_equal(a, b)


def test_replay_row_scaling_exact():
    spec = SpikeSpec(9, 7, (4.0, 2.0))
    noise = draw_unit_noise(spec, RandomStream(22))
    base = to_dense(apply_spikes(spec, noise))
    doubled = to_dense(apply_spikes(SpikeSpec(9, 7, (8.0, 4.0)), noise))
    assert np.array_equal(doubled[:2], 2.0 * base[:2])
    assert np.array_equal(doubled[2:], base[2:])


def test_replay_shape_mismatch():
    noise = draw_unit_noise(SpikeSpec(9, 7, (4.0, 2.0)), RandomStream(1))
    with pytest.raises(ParameterError):
        apply_spikes(SpikeSpec(9, 7, (4.0, 2.0, 1.0)), noise)
    with pytest.raises(ParameterError):
        apply_spikes(SpikeSpec(10, 7, (4.0, 2.0)), noise)


def test_unit_noise_independent_of_spikes():
    a = draw_unit_noise(SpikeSpec(9, 7, (4.0, 2.0)), RandomStream(5))
    b = draw_unit_noise(SpikeSpec(9, 7, (1.0, 9.5)), RandomStream(5))
    for x, y in zip(a.bands, b.bands):
        assert np.array_equal(x, y)


def test_to_dense_matches_independent_layout():
    spec = SpikeSpec(11, 6, (3.0, 2.0, 1.5))
    sample = sample_banded(spec, RandomStream(33))
    assert np.array_equal(to_dense(sample), build_dense(sample))
    R, C = spec.compact_shape
    assert np.array_equal(to_dense(sample, compact=True),
                          to_dense(sample)[:R, :C])


def test_dense_sampler_row_scales():
    spec = SpikeSpec(3, 2, (5.0, 2.0))
    parent = RandomStream(77)
    reps = 10**4
    rows = np.empty((reps, 3, 2))
    for b in range(reps):
        rows[b] = sample_dense(spec, parent.substream(b)).values
    stds = rows.transpose(1, 0, 2).reshape(3, -1).std(axis=1)
    assert np.allclose(stds, [5.0, 2.0, 1.0], rtol=0.02)


def test_dense_single_entry():
    sample = sample_dense(SpikeSpec(1, 1, (1.0,)), RandomStream(8))
    assert sample.values.shape == (1, 1)
    assert np.isfinite(sample.values[0, 0])


def test_triplet_round_trip(tmp_path):
    spec = SpikeSpec(10, 7, (6.0, 1.25))
    sample = sample_banded(spec, RandomStream(44))
    path = tmp_path / "sample.csv"
    write_band_triplets(sample, path)
    back = read_band_triplets(path)
    assert back.spec == spec
    for a, b in zip(sample.bands, back.bands):
        assert np.array_equal(a, b)


def test_triplet_reader_rejects_junk(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("not a header\n1,1,2.0,chi_diag(3)\n")
    with pytest.raises(ParameterError):
        read_band_triplets(path)


def test_dense_csv_matches_expansion(tmp_path):
    spec = SpikeSpec(6, 5, (2.0,))
    sample = sample_banded(spec, RandomStream(55))
    path = tmp_path / "dense.csv"
    write_dense_csv(sample, path)
    rows = [line.split(",") for line in path.read_text().strip().splitlines()]
    assert rows[0] == [f"c{j}" for j in range(1, 6)]
    values = np.array([[float(v) for v in row] for row in rows[1:]])
    assert np.array_equal(values, to_dense(sample))


def test_entry_sigma_layout():
    # every stored entry is its unit noise times the row sigma
    spec = SpikeSpec(8, 6, (7.0, 3.0))
    noise = draw_unit_noise(spec, RandomStream(66))
    sample = apply_spikes(spec, noise)
    lengths = band_lengths(spec.m, spec.n, spec.k)
    for t, L in enumerate(lengths):
        for p in range(L):
            i = p + t + 1
            expected = noise.bands[t][p] * entry_sigma(spec, i)
            assert sample.bands[t][p] == expected
