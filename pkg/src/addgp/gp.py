"""Exact GP regression on top of the kernels in :mod:`addgp.kernels`.

Hyperparameters are handled in log space throughout.  A packed parameter
vector is ``kernel.log_params()`` followed by ``log noise_variance``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .data import Dataset, StandardizationStats
from .errors import InvalidArgumentError, NumericalFailureError
from .kernels import _as_matrix

LOG_2PI = float(np.log(2.0 * np.pi))

JITTER_START = 1e-10
JITTER_MAX = 1e-4


@dataclass(frozen=True)
class NoiseModel:
    noise_variance: float
    constant_mean: float = 0.0

    def __post_init__(self):
        nv = float(self.noise_variance)
        if not (np.isfinite(nv) and nv > 0):
            raise InvalidArgumentError(f"noise_variance must be positive, got {nv}")
        if not np.isfinite(self.constant_mean):
            raise InvalidArgumentError("constant_mean must be finite")
        object.__setattr__(self, "noise_variance", nv)
        object.__setattr__(self, "constant_mean", float(self.constant_mean))


@dataclass(frozen=True)
class FitDiagnostics:
    final_nll: float
    iterations: int = 0
    restart_index: int = 0
    converged: bool = False
    restart_nlls: tuple = ()
    message: str = ""

    def to_dict(self) -> dict:
        return {
            "final_nll": self.final_nll,
            "iterations": self.iterations,
            "restart_index": self.restart_index,
            "converged": self.converged,
            "restart_nlls": list(self.restart_nlls),
            "message": self.message,
        }


@dataclass(frozen=True, eq=False)
class TrainedModel:
    """Posterior state of a fitted GP.

    ``train_inputs`` and ``train_targets`` are stored in standardized units;
    ``standardization`` maps raw data into those units.
    """

    spec: object
    noise: NoiseModel
    train_inputs: np.ndarray
    train_targets: np.ndarray
    chol_factor: np.ndarray
    dual_weights: np.ndarray
    jitter: float
    standardization: StandardizationStats
    fit_diagnostics: FitDiagnostics

    def __post_init__(self):
        for name in ("train_inputs", "train_targets", "chol_factor", "dual_weights"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_train(self) -> int:
        return self.train_inputs.shape[0]

    @property
    def mean_offset(self) -> float:
        """The constant mean in original target units."""
        st = self.standardization
        return st.target_mean + st.target_std * self.noise.constant_mean


@dataclass(frozen=True)
class PredictiveDistribution:
    means: np.ndarray
    variances: np.ndarray
    includes_noise: bool


@dataclass(frozen=True)
class OrderReport:
    shares: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.shares, dtype=float)
        if np.any(s < 0) or not np.isclose(s.sum(), 100.0, rtol=0, atol=1e-9):
            raise InvalidArgumentError("order shares must be nonnegative and sum to 100")
        object.__setattr__(self, "shares", s)

    @property
    def dominant_order(self) -> int:
        return int(np.argmax(self.shares)) + 1


# ---------------------------------------------------------------------------
# Gram matrices and factorization
# ---------------------------------------------------------------------------


def gram(A, B, spec) -> np.ndarray:
    """Kernel matrix between rows of ``A`` and rows of ``B``."""
    return spec.gram(A, B)


def gram_with_grads(A, spec, noise: NoiseModel):
    """Gram matrix ``K`` (noise excluded) and ``dK_y/dtheta`` for every packed parameter.

    The last gradient is the noise term ``noise_variance * I``.
    """
    K, kgrads = spec.gram_with_grads(A)
    n = K.shape[0]
    grads = np.concatenate([kgrads, (noise.noise_variance * np.eye(n))[None]], axis=0)
    return K, grads


def jittered_cholesky(Ky, max_jitter: float = JITTER_MAX):
    """Lower Cholesky factor of ``Ky``, adding diagonal jitter on failure.

    Tries no jitter, then ``1e-10 * mean(diag)`` growing tenfold up to
    ``max_jitter * mean(diag)``.  Returns ``(L, jitter)``.
    """
    if not np.all(np.isfinite(Ky)):
        raise NumericalFailureError("covariance contains non-finite entries")
    scale = float(np.mean(np.diag(Ky)))
    levels = [0.0]
    rel = JITTER_START
    while rel <= max_jitter * (1 + 1e-9):
        levels.append(rel * scale)
        rel *= 10.0
    eye = np.eye(Ky.shape[0])
    for jitter in levels:
        try:
            L = np.linalg.cholesky(Ky + jitter * eye if jitter else Ky)
        except np.linalg.LinAlgError:
            continue
        if np.all(np.diag(L) > 0):
            return L, jitter
    raise NumericalFailureError(
        f"Cholesky failed for all jitter levels {levels}", jitter_levels=levels
    )


def _posterior_core(spec, noise, X, y, max_jitter=JITTER_MAX):
    K = spec.gram(X)
    Ky = K + noise.noise_variance * np.eye(X.shape[0])
    L, jitter = jittered_cholesky(Ky, max_jitter)
    resid = y - noise.constant_mean
    alpha = cho_solve((L, True), resid, check_finite=False)
    nll = 0.5 * resid @ alpha + np.log(np.diag(L)).sum() + 0.5 * len(y) * LOG_2PI
    return L, alpha, jitter, float(nll)


def _data_arrays(data):
    if isinstance(data, Dataset):
        return data.inputs, data.targets
    X, y = data
    return np.asarray(X, dtype=float), np.asarray(y, dtype=float)


def nll_and_grad(spec, noise: NoiseModel, X, y, max_jitter=JITTER_MAX):
    """Negative log marginal likelihood and its gradient in packed log-space order."""
    K, grads = gram_with_grads(X, spec, noise)
    n = K.shape[0]
    Ky = K + noise.noise_variance * np.eye(n)
    L, _ = jittered_cholesky(Ky, max_jitter)
    resid = y - noise.constant_mean
    alpha = cho_solve((L, True), resid, check_finite=False)
    value = 0.5 * resid @ alpha + np.log(np.diag(L)).sum() + 0.5 * n * LOG_2PI
    Kinv = cho_solve((L, True), np.eye(n), check_finite=False)
    W = Kinv - np.outer(alpha, alpha)
    # d NLL = 0.5 tr(W dK), W symmetric
    grad = 0.5 * np.einsum("ij,pij->p", W, grads)
    if not (np.isfinite(value) and np.all(np.isfinite(grad))):
        raise NumericalFailureError("non-finite likelihood or gradient")
    return float(value), grad


def neg_log_marginal_likelihood(params, data, template, constant_mean=None):
    """NLL of ``data`` at packed log hyperparameters ``params``.

    Parameters
    ----------
    params : array
        ``template.log_params()`` layout followed by ``log noise_variance``.
    data : Dataset or (X, y)
        Training data in modelling units.
    template : kernel spec
        Supplies the kernel family and which orders are switched on.
    constant_mean : float, optional
        Defaults to the mean of the targets (closed form).

    Returns
    -------
    (value, gradient)
    """
    params = np.asarray(params, dtype=float)
    if params.shape != (template.n_params + 1,):
        raise InvalidArgumentError(
            f"expected {template.n_params + 1} parameters, got {params.shape}"
        )
    if not np.all(np.isfinite(params)):
        raise InvalidArgumentError("parameters must be finite")
    X, y = _data_arrays(data)
    if len(y) == 0:
        raise InvalidArgumentError("empty dataset")
    spec = template.with_log_params(params[:-1])
    mu = float(np.mean(y)) if constant_mean is None else float(constant_mean)
    try:
        noise = NoiseModel(float(np.exp(params[-1])), mu)
    except InvalidArgumentError as exc:
        raise NumericalFailureError(str(exc)) from exc
    return nll_and_grad(spec, noise, X, y)


def fit_posterior(data, spec, noise: NoiseModel, stats: StandardizationStats | None = None,
                  diagnostics: FitDiagnostics | None = None) -> TrainedModel:
    """Factorize ``K + noise I`` and solve for the dual weights."""
    X, y = _data_arrays(data)
    X = _as_matrix("inputs", X, spec.dims)
    if len(y) != X.shape[0] or len(y) == 0:
        raise InvalidArgumentError("inputs and targets must be non-empty and aligned")
    L, alpha, jitter, nll = _posterior_core(spec, noise, X, y)
    if stats is None:
        stats = StandardizationStats.identity(spec.dims)
    if diagnostics is None:
        diagnostics = FitDiagnostics(final_nll=nll)
    return TrainedModel(spec, noise, X, y, L, alpha, jitter, stats, diagnostics)


def model_nll(model: TrainedModel) -> float:
    """NLL recomputed from the stored factor and dual weights."""
    resid = model.train_targets - model.noise.constant_mean
    L = model.chol_factor
    return float(
        0.5 * resid @ model.dual_weights
        + np.log(np.diag(L)).sum()
        + 0.5 * len(resid) * LOG_2PI
    )


# ---------------------------------------------------------------------------
# prediction and interpretation
# ---------------------------------------------------------------------------


def predict(model: TrainedModel, X_star, include_noise: bool = False) -> PredictiveDistribution:
    """Predictive mean and variance at raw (unstandardized) inputs."""
    spec = model.spec
    Xs = model.standardization.transform_inputs(_as_matrix("X_star", X_star, spec.dims))
    Ks = spec.gram(Xs, model.train_inputs)
    mean = model.noise.constant_mean + Ks @ model.dual_weights
    v = solve_triangular(model.chol_factor, Ks.T, lower=True, check_finite=False)
    prior = spec.diag(Xs)
    var = prior - np.einsum("ij,ij->j", v, v)
    var = np.maximum(var, 1e-12 * prior)
    if include_noise:
        var = var + model.noise.noise_variance
    st = model.standardization
    return PredictiveDistribution(
        mean * st.target_std + st.target_mean, var * st.target_std**2, bool(include_noise)
    )


def component_posterior(model: TrainedModel, dims, X_star) -> np.ndarray:
    """Posterior mean of one interaction term, in original target units.

    The cross-covariance keeps only the single term over ``dims``; the
    constant mean is excluded, so summing every term reproduces
    ``predict(...).means - model.mean_offset``.
    """
    spec = model.spec
    Xs = model.standardization.transform_inputs(_as_matrix("X_star", X_star, spec.dims))
    Kt = spec.term_gram(Xs, model.train_inputs, dims)
    return model.standardization.target_std * (Kt @ model.dual_weights)


def first_order_residuals(model: TrainedModel, X, y, dim: int) -> np.ndarray:
    """Centred targets minus every other dimension's first-order component.

    Residuals share the (mean-free, original-unit) scale of
    :func:`component_posterior` so they can be drawn on the same axes.
    """
    spec = model.spec
    if not 0 <= dim < spec.dims:
        raise InvalidArgumentError(f"dimension {dim} outside [0, {spec.dims})")
    out = np.asarray(y, dtype=float) - model.mean_offset
    for d in range(spec.dims):
        if d != dim:
            out = out - component_posterior(model, (d,), X)
    return out


def order_report(model_or_spec) -> OrderReport:
    """Percentage of prior variance per interaction order.

    Order ``n`` contributes ``var_n * C(D, n)`` since every base kernel is 1
    at zero lag.
    """
    spec = getattr(model_or_spec, "spec", model_or_spec)
    w = spec.order_weights()
    return OrderReport(100.0 * w / w.sum())


def sample_prior(spec, X, seed: int, count: int) -> np.ndarray:
    """Draw ``count`` zero-mean prior functions at the rows of ``X``.

    Returns an array of shape ``(count, N)``.  The covariance square root
    comes from a symmetric eigendecomposition with round-off eigenvalues
    clipped to zero, so draws lie exactly in the range of the Gram matrix.
    """
    if count < 1:
        raise InvalidArgumentError("count must be positive")
    K = spec.gram(X)
    try:
        lam, U = np.linalg.eigh(K)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailureError(f"eigendecomposition failed: {exc}") from exc
    top = lam[-1]
    if lam[0] < -1e-8 * max(top, np.max(np.diag(K))):
        raise NumericalFailureError(f"Gram matrix is not PSD (min eigenvalue {lam[0]:.3g})")
    tol = K.shape[0] * np.finfo(float).eps * top
    keep = lam > tol
    root = U[:, keep] * np.sqrt(lam[keep])
    eps = np.random.default_rng(seed).standard_normal((count, int(keep.sum())))
    return eps @ root.T
