"""Efficient sampling and fitting of spiked (pseudo-)Wishart singular values.

The sampler draws a sparse banded matrix whose singular values are
distributed identically to those of the dense spiked Gaussian data matrix,
at a cost that depends on the number of observations rather than the
number of variables. On top of it sit exact per-sample derivatives of the
singular values with respect to the spike standard deviations (via noise
replay) and a Levenberg-Marquardt fitter that matches expected singular
values to targets.
"""

from .errors import (
    ConvergenceError,
    DegenerateBatchError,
    DegenerateSingularValueError,
    NumericError,
    ParameterError,
    SpikedWishartError,
)
from .variates import RandomStream, sample_chi, sample_normal
from .sampler import (
    BandNoise,
    BandedSample,
    DenseSample,
    SpikeSpec,
    draw_unit_noise,
    read_band_triplets,
    sample_banded,
    sample_dense,
    to_dense,
    write_band_triplets,
    write_dense_csv,
)
from .spectra import (
    SpectralResult,
    band_matvec,
    band_rmatvec,
    full_svd,
    singular_value_draws,
    top_svd,
)
from .gradfit import (
    FitReport,
    JacobianBatch,
    fit_spikes,
    mean_singular_values,
    reparam_resample,
    sample_jacobian,
)
from .stats import KsResult, histogram, ks_two_sample

__version__ = "0.1.0"

__all__ = [
    "BandNoise",
    "BandedSample",
    "ConvergenceError",
    "DegenerateBatchError",
    "DegenerateSingularValueError",
    "DenseSample",
    "FitReport",
    "JacobianBatch",
    "KsResult",
    "NumericError",
    "ParameterError",
    "RandomStream",
    "SpectralResult",
    "SpikeSpec",
    "SpikedWishartError",
    "band_matvec",
    "band_rmatvec",
    "draw_unit_noise",
    "fit_spikes",
    "full_svd",
    "histogram",
    "ks_two_sample",
    "mean_singular_values",
    "read_band_triplets",
    "reparam_resample",
    "sample_banded",
    "sample_chi",
    "sample_dense",
    "sample_jacobian",
    "sample_normal",
    "singular_value_draws",
    "to_dense",
    "top_svd",
    "write_band_triplets",
    "write_dense_csv",
]
