"""Gaussian-process regression with additive kernels over all interaction orders."""

__version__ = "0.1.0"

from .data import (
    Dataset,
    StandardizationStats,
    destandardize_targets,
    load_csv,
    split,
    standardize,
    synth_axis_sines,
)
from .errors import (
    AddGPError,
    DataParseError,
    InvalidArgumentError,
    InvalidDataError,
    ModelLoadError,
    NumericalFailureError,
)
from .gp import (
    NoiseModel,
    OrderReport,
    PredictiveDistribution,
    TrainedModel,
    component_posterior,
    fit_posterior,
    gram,
    gram_with_grads,
    neg_log_marginal_likelihood,
    order_report,
    predict,
    sample_prior,
)
from .kernels import (
    AdditiveKernelSpec,
    HullKernelSpec,
    additive_kernel,
    base_kernel,
    base_row,
    esp_dp,
    esp_excluding,
    esp_newton_girard,
    hull_kernel,
    kernel_grad_length_scales,
    kernel_grad_order_variances,
    power_sums,
)
from .optimize import FitConfig, fit, lbfgs_minimize, pack, unpack
from .persist import load_model, save_model

__all__ = [
    "AddGPError",
    "additive_kernel",
    "AdditiveKernelSpec",
    "base_kernel",
    "base_row",
    "component_posterior",
    "DataParseError",
    "Dataset",
    "destandardize_targets",
    "esp_dp",
    "esp_excluding",
    "esp_newton_girard",
    "fit",
    "fit_posterior",
    "FitConfig",
    "gram",
    "gram_with_grads",
    "hull_kernel",
    "HullKernelSpec",
    "InvalidArgumentError",
    "InvalidDataError",
    "kernel_grad_length_scales",
    "kernel_grad_order_variances",
    "lbfgs_minimize",
    "load_csv",
    "load_model",
    "ModelLoadError",
    "neg_log_marginal_likelihood",
    "NoiseModel",
    "NumericalFailureError",
    "order_report",
    "OrderReport",
    "pack",
    "power_sums",
    "predict",
    "PredictiveDistribution",
    "sample_prior",
    "save_model",
    "split",
    "StandardizationStats",
    "standardize",
    "synth_axis_sines",
    "TrainedModel",
    "unpack",
]
