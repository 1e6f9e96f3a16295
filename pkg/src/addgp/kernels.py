"""Additive kernels built from one-dimensional squared-exponential base kernels.

The order-``n`` additive kernel is the ``n``-th elementary symmetric
polynomial of the per-dimension base kernel values ``z_d = k_d(x_d, x'_d)``,
scaled by an order variance.  All ``e_n`` up to the maximum order are
computed together in ``O(D R)`` per input pair, either with the
subtraction-free dynamic programme (default) or the Newton-Girard identities.

Batch helpers take ``z`` with the dimension axis first and any trailing
shape, so the same code serves single pairs (``z.shape == (D,)``) and whole
Gram matrices (``z.shape == (D, N, M)``).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np
from scipy.special import comb

from .errors import InvalidArgumentError

ESP_METHODS = ("dp", "newton-girard")
DEFAULT_MAX_ORDER = 10

# divide-out exclusion falls back to a fresh DP once its running
# round-off bound exceeds this fraction of the value
_EXCLUSION_RTOL = 1e-8
_EPS = np.finfo(float).eps


def _check_finite(name, value):
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError(f"{name} must be finite")
    return arr


def _check_order(r, dims):
    if int(r) != r or not 1 <= r <= dims:
        raise InvalidArgumentError(f"order {r} outside [1, {dims}]")
    return int(r)


def resolve_max_order(dims: int, requested: int | None = None) -> int:
    """Pick the maximum interaction order for ``dims`` inputs.

    ``None`` means ``min(dims, 10)``.  Requests above ``dims`` are clamped
    with a warning.
    """
    if dims < 1:
        raise InvalidArgumentError("need at least one input dimension")
    if requested is None:
        return min(dims, DEFAULT_MAX_ORDER)
    if requested < 1:
        raise InvalidArgumentError(f"max_order must be >= 1, got {requested}")
    if requested > dims:
        warnings.warn(
            f"max_order {requested} exceeds input dimension {dims}; using {dims}",
            stacklevel=2,
        )
        return dims
    return int(requested)


# ---------------------------------------------------------------------------
# scalar and vector primitives
# ---------------------------------------------------------------------------


def base_kernel(x: float, x_prime: float, l: float) -> float:
    """Unit-amplitude squared-exponential kernel in one dimension."""
    x, x_prime, l = (float(v) for v in _check_finite("inputs", [x, x_prime, l]))
    if l <= 0:
        raise InvalidArgumentError(f"length-scale must be positive, got {l}")
    return math.exp(-((x - x_prime) ** 2) / (2.0 * l * l))


def base_row(x, x_prime, ls) -> np.ndarray:
    """Vector of per-dimension base kernel values ``z``."""
    x = _check_finite("x", np.atleast_1d(x))
    x_prime = _check_finite("x_prime", np.atleast_1d(x_prime))
    ls = _check_finite("length-scales", np.atleast_1d(ls))
    if not (x.shape == x_prime.shape == ls.shape) or x.ndim != 1:
        raise InvalidArgumentError(
            f"dimension mismatch: {x.shape}, {x_prime.shape}, {ls.shape}"
        )
    if np.any(ls <= 0):
        raise InvalidArgumentError("length-scales must be positive")
    return np.exp(-((x - x_prime) ** 2) / (2.0 * ls**2))


def power_sums(z, r: int) -> np.ndarray:
    """Power sums ``s_1..s_r`` of ``z`` (returned as ``[s_1, ..., s_r]``)."""
    z = np.asarray(z, dtype=float)
    r = _check_order(r, z.shape[0])
    return _power_sums(z, r)


def _power_sums(z, r):
    out = np.empty((r,) + z.shape[1:])
    p = np.ones_like(z)
    for k in range(r):
        p = p * z
        out[k] = p.sum(axis=0)
    return out


def esp_newton_girard(z, r: int) -> np.ndarray:
    """Elementary symmetric polynomials ``e_0..e_r`` via Newton-Girard.

    ``e_n = (1/n) * sum_{k=1}^{n} (-1)^(k-1) e_{n-k} s_k`` with ``e_0 = 1``.
    The alternating sum can cancel badly when many ``z_i`` are close to one;
    prefer :func:`esp_dp` unless cross-checking.
    """
    z = np.asarray(z, dtype=float)
    r = _check_order(r, z.shape[0])
    return _esp_newton_girard(z, r)


def _esp_newton_girard(z, r):
    s = _power_sums(z, r)
    e = np.empty((r + 1,) + z.shape[1:])
    e[0] = 1.0
    for n in range(1, r + 1):
        acc = np.zeros(z.shape[1:])
        for k in range(1, n + 1):
            term = e[n - k] * s[k - 1]
            if k % 2:
                acc = acc + term
            else:
                acc = acc - term
        e[n] = acc / n
    return e


def esp_dp(z, r: int) -> np.ndarray:
    """Elementary symmetric polynomials ``e_0..e_r`` by adding one variable at a time.

    Uses ``e_n(z_1..z_m) = e_n(z_1..z_{m-1}) + z_m e_{n-1}(z_1..z_{m-1})``.
    No subtractions, so every partial result is nonnegative for ``z >= 0``.
    """
    z = np.asarray(z, dtype=float)
    r = _check_order(r, z.shape[0])
    return _esp_dp(z, r)


def _esp_dp(z, r):
    e = np.zeros((r + 1,) + z.shape[1:])
    e[0] = 1.0
    for m in range(z.shape[0]):
        zm = z[m]
        # descending n so e[n-1] still holds the value without z_m
        for n in range(min(m + 1, r), 0, -1):
            e[n] += zm * e[n - 1]
    return e


def _esp(z, r, method):
    if method == "dp":
        return _esp_dp(z, r)
    if method == "newton-girard":
        return _esp_newton_girard(z, r)
    raise InvalidArgumentError(f"unknown ESP method {method!r}; use one of {ESP_METHODS}")


def esp_excluding(z, esp, j: int, r: int) -> np.ndarray:
    """ESPs ``e_0..e_r`` of ``z`` with variable ``j`` removed.

    These are the partial derivatives ``d e_{n+1} / d z_j``.  Computed by
    dividing ``z_j`` back out of ``esp`` (``e'_k = e_k - z_j e'_{k-1}``).
    A round-off bound is carried along; entries whose bound exceeds 1e-8 of
    the value are recomputed from scratch over the remaining variables.

    Parameters
    ----------
    z : array, shape (D, ...)
        Base kernel values.
    esp : array, shape (>= r + 1, ...)
        ``e_0..e_r`` of the full ``z``.
    j : int
        Zero-based index of the variable to remove.
    r : int
        Highest order wanted.
    """
    z = np.asarray(z, dtype=float)
    esp = np.asarray(esp, dtype=float)
    dims = z.shape[0]
    r = _check_order(r, dims)
    if int(j) != j or not 0 <= j < dims:
        raise InvalidArgumentError(f"dimension index {j} outside [0, {dims})")
    if esp.shape[0] < r + 1:
        raise InvalidArgumentError("esp has fewer than r + 1 entries")
    return _esp_excluding(z, esp, int(j), r)


def _esp_excluding(z, e, j, r):
    dims = z.shape[0]
    out = np.zeros((r + 1,) + z.shape[1:])
    out[0] = 1.0
    top = min(r, dims - 1)
    if top == 0:
        return out
    zj = z[j]
    unit = (dims + 2) * _EPS
    bound = np.zeros(z.shape[1:])
    bad = np.zeros(z.shape[1:], dtype=bool)
    for k in range(1, top + 1):
        out[k] = e[k] - zj * out[k - 1]
        bound = unit * np.abs(e[k]) + np.abs(zj) * bound
        bad |= bound > _EXCLUSION_RTOL * np.abs(out[k])
    if np.any(bad):
        rest = np.delete(z, j, axis=0)
        if out.ndim == 1:
            out[: top + 1] = _esp_dp(rest, top)
        else:
            out[: top + 1, bad] = _esp_dp(rest[:, bad], top)
    return out


def _scaled_sq_dists(A, B, ls):
    """Per-dimension ``(a_d - b_d)^2 / l_d^2`` with shape (D, N, M)."""
    diff = A.T[:, :, None] - B.T[:, None, :]
    return diff * diff / (ls * ls)[:, None, None]


def _as_matrix(name, X, dims):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != dims:
        raise InvalidArgumentError(f"{name} must have {dims} columns, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise InvalidArgumentError(f"{name} contains non-finite values")
    return X


# ---------------------------------------------------------------------------
# kernel specifications
# ---------------------------------------------------------------------------


def _positive_tuple(name, values, allow_zero=False):
    vals = tuple(float(v) for v in np.atleast_1d(np.asarray(values, dtype=float)))
    if len(vals) == 0:
        raise InvalidArgumentError(f"{name} must be non-empty")
    arr = np.asarray(vals)
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError(f"{name} must be finite")
    if allow_zero:
        if np.any(arr < 0) or not np.any(arr > 0):
            raise InvalidArgumentError(f"{name} must be nonnegative with at least one positive entry")
    elif np.any(arr <= 0):
        raise InvalidArgumentError(f"{name} must be strictly positive")
    return vals


@dataclass(frozen=True)
class AdditiveKernelSpec:
    """Hyperparameters of the sum-over-all-orders additive kernel.

    ``k(x, x') = sum_{n=1}^{R} order_variances[n-1] * e_n(z(x, x'))``

    An order whose variance is exactly zero is switched off: it contributes
    nothing and is excluded from the optimizer's parameter vector.  This is
    how the first-order-only (GAM) and single-top-order (squared-exponential)
    kernels are expressed.
    """

    length_scales: tuple
    order_variances: tuple
    esp_method: str = "dp"

    kind = "additive"

    def __post_init__(self):
        ls = _positive_tuple("length_scales", self.length_scales)
        ov = _positive_tuple("order_variances", self.order_variances, allow_zero=True)
        if len(ov) > len(ls):
            raise InvalidArgumentError(
                f"max_order {len(ov)} exceeds dims {len(ls)}"
            )
        if self.esp_method not in ESP_METHODS:
            raise InvalidArgumentError(f"unknown ESP method {self.esp_method!r}")
        object.__setattr__(self, "length_scales", ls)
        object.__setattr__(self, "order_variances", ov)

    @property
    def dims(self) -> int:
        return len(self.length_scales)

    @property
    def max_order(self) -> int:
        return len(self.order_variances)

    @property
    def active_orders(self) -> tuple:
        """1-based orders with nonzero variance."""
        return tuple(n + 1 for n, v in enumerate(self.order_variances) if v > 0)

    @property
    def n_params(self) -> int:
        return self.dims + len(self.active_orders)

    def log_params(self) -> np.ndarray:
        ov = np.asarray(self.order_variances)
        return np.concatenate([np.log(self.length_scales), np.log(ov[ov > 0])])

    def with_log_params(self, theta) -> "AdditiveKernelSpec":
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.n_params,):
            raise InvalidArgumentError(
                f"expected {self.n_params} kernel parameters, got {theta.shape}"
            )
        ov = np.zeros(self.max_order)
        ov[np.asarray(self.active_orders) - 1] = np.exp(theta[self.dims :])
        return AdditiveKernelSpec(
            tuple(np.exp(theta[: self.dims])), tuple(ov), self.esp_method
        )

    def param_names(self) -> list:
        return [f"log_lengthscale_{d + 1}" for d in range(self.dims)] + [
            f"log_order_variance_{n}" for n in self.active_orders
        ]

    def _esp_grid(self, A, B):
        ls = np.asarray(self.length_scales)
        sq = _scaled_sq_dists(A, B, ls)
        z = np.exp(-0.5 * sq)
        return sq, z, _esp(z, self.max_order, self.esp_method)

    def _combine(self, e):
        # fixed summation order keeps K(A, B) == K(B, A).T bit-for-bit
        out = np.zeros(e.shape[1:])
        for n, var in enumerate(self.order_variances, start=1):
            if var > 0:
                out = out + var * e[n]
        return out

    def gram(self, A, B=None) -> np.ndarray:
        A = _as_matrix("A", A, self.dims)
        B = A if B is None else _as_matrix("B", B, self.dims)
        _, _, e = self._esp_grid(A, B)
        return self._combine(e)

    def diag(self, A) -> np.ndarray:
        """``k(x, x)`` for every row; equals ``sum_n var_n * C(D, n)``."""
        A = _as_matrix("A", A, self.dims)
        return np.full(A.shape[0], self.prior_variance())

    def prior_variance(self) -> float:
        return float(
            sum(
                var * comb(self.dims, n, exact=True)
                for n, var in enumerate(self.order_variances, start=1)
            )
        )

    def gram_with_grads(self, A):
        """Gram matrix on ``A`` and its derivatives w.r.t. :meth:`log_params`.

        Returns ``(K, grads)`` with ``grads.shape == (n_params, N, N)``.
        """
        A = _as_matrix("A", A, self.dims)
        sq, z, e = self._esp_grid(A, A)
        K = self._combine(e)
        D, R = self.dims, self.max_order
        ov = self.order_variances
        grads = np.empty((self.n_params,) + K.shape)
        for d in range(D):
            # dk/dz_d = sum_n var_n e_{n-1}(z without d); only e_0..e_{R-1} needed
            ex = _esp_excluding(z, e, d, R - 1) if R > 1 else np.ones((1,) + K.shape)
            dk_dz = np.zeros(K.shape)
            for n in range(1, R + 1):
                if ov[n - 1] > 0:
                    dk_dz = dk_dz + ov[n - 1] * ex[n - 1]
            grads[d] = dk_dz * z[d] * sq[d]
        for i, n in enumerate(self.active_orders):
            grads[D + i] = ov[n - 1] * e[n]
        return K, grads

    def term_gram(self, A, B, subset) -> np.ndarray:
        """Cross-covariance of a single interaction term ``var_n * prod_{d in J} k_d``."""
        subset = _check_subset(subset, self.dims)
        n = len(subset)
        if not 1 <= n <= self.max_order:
            raise InvalidArgumentError(
                f"term order {n} outside [1, {self.max_order}]"
            )
        A = _as_matrix("A", A, self.dims)
        B = _as_matrix("B", B, self.dims)
        ls = np.asarray(self.length_scales)
        idx = list(subset)
        sq = _scaled_sq_dists(A[:, idx], B[:, idx], ls[idx])
        return self.order_variances[n - 1] * np.exp(-0.5 * sq.sum(axis=0))

    def terms(self):
        """Every interaction subset carrying nonzero weight."""
        for n in self.active_orders:
            yield from combinations(range(self.dims), n)

    def order_weights(self) -> np.ndarray:
        """Prior variance carried by each order 1..R at zero lag."""
        return np.array(
            [var * comb(self.dims, n, exact=True) for n, var in enumerate(self.order_variances, start=1)],
            dtype=float,
        )

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "length_scales": list(self.length_scales),
            "order_variances": list(self.order_variances),
            "esp_method": self.esp_method,
        }


@dataclass(frozen=True)
class HullKernelSpec:
    """Product-form all-subsets kernel ``v^2 prod_d (1 + alpha k_d)``.

    Every order-``n`` term is forced to weight ``v^2 alpha^n``; the constant
    ``v^2`` term is the empty subset.
    """

    amplitude: float
    alpha: float
    length_scales: tuple

    kind = "hull"

    def __post_init__(self):
        amp = float(self.amplitude)
        alpha = float(self.alpha)
        if not (np.isfinite(amp) and amp > 0):
            raise InvalidArgumentError("amplitude must be positive and finite")
        if not (np.isfinite(alpha) and alpha >= 0):
            raise InvalidArgumentError("alpha must be nonnegative and finite")
        object.__setattr__(self, "amplitude", amp)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(
            self, "length_scales", _positive_tuple("length_scales", self.length_scales)
        )

    @property
    def dims(self) -> int:
        return len(self.length_scales)

    @property
    def max_order(self) -> int:
        return self.dims

    @property
    def n_params(self) -> int:
        return self.dims + 2

    def log_params(self) -> np.ndarray:
        if self.alpha <= 0:
            raise InvalidArgumentError("alpha must be positive to optimize in log space")
        return np.concatenate(
            [np.log(self.length_scales), [np.log(self.amplitude), np.log(self.alpha)]]
        )

    def with_log_params(self, theta) -> "HullKernelSpec":
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.n_params,):
            raise InvalidArgumentError(
                f"expected {self.n_params} kernel parameters, got {theta.shape}"
            )
        D = self.dims
        return HullKernelSpec(
            float(np.exp(theta[D])), float(np.exp(theta[D + 1])), tuple(np.exp(theta[:D]))
        )

    def param_names(self) -> list:
        return [f"log_lengthscale_{d + 1}" for d in range(self.dims)] + [
            "log_amplitude",
            "log_alpha",
        ]

    def _factors(self, A, B):
        ls = np.asarray(self.length_scales)
        sq = _scaled_sq_dists(A, B, ls)
        z = np.exp(-0.5 * sq)
        return sq, z, 1.0 + self.alpha * z

    def gram(self, A, B=None) -> np.ndarray:
        A = _as_matrix("A", A, self.dims)
        B = A if B is None else _as_matrix("B", B, self.dims)
        _, _, f = self._factors(A, B)
        return self.amplitude * np.prod(f, axis=0)

    def diag(self, A) -> np.ndarray:
        A = _as_matrix("A", A, self.dims)
        return np.full(A.shape[0], self.prior_variance())

    def prior_variance(self) -> float:
        return self.amplitude * (1.0 + self.alpha) ** self.dims

    def gram_with_grads(self, A):
        A = _as_matrix("A", A, self.dims)
        sq, z, f = self._factors(A, A)
        K = self.amplitude * np.prod(f, axis=0)
        D = self.dims
        grads = np.empty((D + 2,) + K.shape)
        az = self.alpha * z
        for d in range(D):
            grads[d] = K / f[d] * az[d] * sq[d]
        grads[D] = K
        grads[D + 1] = K * (az / f).sum(axis=0)
        return K, grads

    def term_gram(self, A, B, subset) -> np.ndarray:
        subset = _check_subset(subset, self.dims, allow_empty=True)
        A = _as_matrix("A", A, self.dims)
        B = _as_matrix("B", B, self.dims)
        weight = self.amplitude * self.alpha ** len(subset)
        if not subset:
            return np.full((A.shape[0], B.shape[0]), weight)
        ls = np.asarray(self.length_scales)
        idx = list(subset)
        sq = _scaled_sq_dists(A[:, idx], B[:, idx], ls[idx])
        return weight * np.exp(-0.5 * sq.sum(axis=0))

    def terms(self):
        for n in range(self.dims + 1):
            yield from combinations(range(self.dims), n)

    def order_weights(self) -> np.ndarray:
        return np.array(
            [
                self.amplitude * self.alpha**n * comb(self.dims, n, exact=True)
                for n in range(1, self.dims + 1)
            ],
            dtype=float,
        )

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "amplitude": self.amplitude,
            "alpha": self.alpha,
            "length_scales": list(self.length_scales),
        }


def spec_from_dict(payload: dict):
    kind = payload.get("kind")
    if kind == "additive":
        return AdditiveKernelSpec(
            tuple(payload["length_scales"]),
            tuple(payload["order_variances"]),
            payload.get("esp_method", "dp"),
        )
    if kind == "hull":
        return HullKernelSpec(
            payload["amplitude"], payload["alpha"], tuple(payload["length_scales"])
        )
    raise InvalidArgumentError(f"unknown kernel kind {kind!r}")


def _check_subset(subset, dims, allow_empty=False):
    subset = tuple(int(d) for d in subset)
    if not subset and not allow_empty:
        raise InvalidArgumentError("term subset must be non-empty")
    if len(set(subset)) != len(subset) or any(not 0 <= d < dims for d in subset):
        raise InvalidArgumentError(f"invalid dimension subset {subset} for D={dims}")
    return tuple(sorted(subset))


# ---------------------------------------------------------------------------
# single-pair evaluations
# ---------------------------------------------------------------------------


def _pair_z(x, x_prime, spec):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (spec.dims,):
        raise InvalidArgumentError(f"x must have {spec.dims} entries, got {x.shape}")
    return x, base_row(x, x_prime, spec.length_scales)


def additive_kernel(x, x_prime, spec: AdditiveKernelSpec) -> float:
    """Full additive kernel between two input vectors."""
    _, z = _pair_z(x, x_prime, spec)
    e = _esp(z, spec.max_order, spec.esp_method)
    return float(spec._combine(e))


def kernel_grad_order_variances(x, x_prime, spec: AdditiveKernelSpec) -> np.ndarray:
    """``dk / d var_n = e_n(z)`` for n = 1..R."""
    _, z = _pair_z(x, x_prime, spec)
    return _esp(z, spec.max_order, spec.esp_method)[1:]


def kernel_grad_length_scales(x, x_prime, spec: AdditiveKernelSpec) -> np.ndarray:
    """Gradient of the additive kernel with respect to each ``log l_d``."""
    x, z = _pair_z(x, x_prime, spec)
    ls = np.asarray(spec.length_scales)
    sq = (x - np.asarray(x_prime, dtype=float)) ** 2 / ls**2
    R = spec.max_order
    e = _esp(z, R, spec.esp_method)
    out = np.empty(spec.dims)
    for d in range(spec.dims):
        ex = _esp_excluding(z, e, d, R - 1) if R > 1 else np.ones(1)
        dk_dz = sum(spec.order_variances[n - 1] * ex[n - 1] for n in range(1, R + 1))
        out[d] = dk_dz * z[d] * sq[d]
    return out


def hull_kernel(x, x_prime, hspec: HullKernelSpec) -> float:
    """``v^2 prod_d (1 + alpha k_d(x_d, x'_d))``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (hspec.dims,):
        raise InvalidArgumentError(f"x must have {hspec.dims} entries, got {x.shape}")
    z = base_row(x, x_prime, hspec.length_scales)
    return float(hspec.amplitude * np.prod(1.0 + hspec.alpha * z))


def default_additive_spec(
    dims: int, max_order: int | None = None, esp_method: str = "dp"
) -> AdditiveKernelSpec:
    """Unit length-scales and signal variance split evenly across orders."""
    R = resolve_max_order(dims, max_order)
    return AdditiveKernelSpec((1.0,) * dims, (1.0 / R,) * R, esp_method)


def gam_spec(dims: int, variance: float = 1.0, length_scales: Sequence | None = None):
    ls = (1.0,) * dims if length_scales is None else tuple(length_scales)
    return AdditiveKernelSpec(ls, (variance,))


def squared_exp_spec(dims: int, variance: float = 1.0, length_scales: Sequence | None = None):
    """Additive spec with only the order-``dims`` product term switched on."""
    ls = (1.0,) * dims if length_scales is None else tuple(length_scales)
    return AdditiveKernelSpec(ls, (0.0,) * (dims - 1) + (variance,))
