# Apache License, Version 2.0, refer to LICENSE.txt
"""Statistical tests for violations of the Independence of Irrelevant
Alternatives (IIA) property in similarity-choice data.

The heavy lifting lives in the compiled extension; this package re-exports
its operations: dataset synthesis, maximum-likelihood score fitting, the
classical goodness-of-fit test, Bayesian posterior predictive checks, the
perturbation-model fits, and the population homogeneity test.
"""

from ._iiacheck import (
    SamplerError,
    ValidationError,
    __version__,
    chi2_cdf,
    chi2_sf,
    fit_mle,
    fit_perturbation,
    gft_test,
    homogeneity,
    run_test,
    synth,
)

__all__ = [
    "SamplerError",
    "ValidationError",
    "__version__",
    "chi2_cdf",
    "chi2_sf",
    "fit_mle",
    "fit_perturbation",
    "gft_test",
    "homogeneity",
    "run_test",
    "synth",
]
