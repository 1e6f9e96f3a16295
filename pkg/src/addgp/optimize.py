"""Log-space hyperparameter packing, L-BFGS, and multi-restart fitting."""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .data import Dataset, standardize
from .errors import InvalidArgumentError, NumericalFailureError
from .gp import FitDiagnostics, NoiseModel, TrainedModel, fit_posterior, neg_log_marginal_likelihood
from .kernels import (
    ESP_METHODS,
    AdditiveKernelSpec,
    HullKernelSpec,
    default_additive_spec,
    resolve_max_order,
)

log = logging.getLogger(__name__)

KERNELS = ("additive", "gam", "squared-exp", "hull")
DEFAULT_NOISE = 0.1

# strong Wolfe constants
WOLFE_C1 = 1e-4
WOLFE_C2 = 0.9


@dataclass(frozen=True)
class FitConfig:
    max_iterations: int = 500
    restarts: int = 5
    seed: int = 0
    gradient_tolerance: float = 1e-6
    memory_pairs: int = 10
    max_order: int | None = None
    kernel: str = "additive"
    esp_method: str = "dp"

    def __post_init__(self):
        if self.max_iterations < 0 or self.restarts < 0 or self.seed < 0:
            raise InvalidArgumentError("max_iterations, restarts and seed must be nonnegative")
        if not self.gradient_tolerance > 0 or self.memory_pairs < 1:
            raise InvalidArgumentError("gradient_tolerance and memory_pairs must be positive")
        if self.max_order is not None and self.max_order < 1:
            raise InvalidArgumentError("max_order must be positive")
        if self.kernel not in KERNELS:
            raise InvalidArgumentError(f"unknown kernel {self.kernel!r}; choose from {KERNELS}")
        if self.esp_method not in ESP_METHODS:
            raise InvalidArgumentError(f"unknown ESP method {self.esp_method!r}")


def pack(spec, noise: NoiseModel) -> np.ndarray:
    """``[log l_1..log l_D, log var_n (active orders), log noise_variance]``."""
    return np.concatenate([spec.log_params(), [np.log(noise.noise_variance)]])


def unpack(params, dims_or_template, max_order: int | None = None, constant_mean: float = 0.0):
    """Inverse of :func:`pack`.

    The second argument is either a template spec (fixes the kernel family
    and active orders) or the input dimension ``D``, in which case an
    additive kernel with all ``max_order`` orders active is assumed.
    """
    params = np.asarray(params, dtype=float)
    if isinstance(dims_or_template, (int, np.integer)):
        D = int(dims_or_template)
        R = D if max_order is None else int(max_order)
        template = AdditiveKernelSpec((1.0,) * D, (1.0,) * R)
    else:
        template = dims_or_template
    if params.shape != (template.n_params + 1,):
        raise InvalidArgumentError(
            f"packed vector has length {params.shape}, expected {template.n_params + 1}"
        )
    if not np.all(np.isfinite(params)):
        raise InvalidArgumentError("packed parameters must be finite")
    spec = template.with_log_params(params[:-1])
    return spec, NoiseModel(float(np.exp(params[-1])), constant_mean)


def default_template(kernel: str, dims: int, max_order: int | None = None, esp_method: str = "dp"):
    """Initial kernel for standardized data: unit length-scales, unit total variance."""
    if kernel == "additive":
        return default_additive_spec(dims, max_order, esp_method)
    if kernel == "gam":
        return AdditiveKernelSpec((1.0,) * dims, (1.0,), esp_method)
    if kernel == "squared-exp":
        return AdditiveKernelSpec((1.0,) * dims, (0.0,) * (dims - 1) + (1.0,), esp_method)
    if kernel == "hull":
        return HullKernelSpec(1.0, 1.0, (1.0,) * dims)
    raise InvalidArgumentError(f"unknown kernel {kernel!r}")


# ---------------------------------------------------------------------------
# L-BFGS
# ---------------------------------------------------------------------------


@dataclass
class MinimizeResult:
    x: np.ndarray
    fun: float
    iterations: int
    converged: bool
    message: str = ""
    history: list = field(default_factory=list)


def _safe_eval(objective, x):
    # trial points may overflow; non-finite results are scored as +inf below
    try:
        with np.errstate(over="ignore", invalid="ignore"):
            f, g = objective(x)
    except (NumericalFailureError, FloatingPointError, np.linalg.LinAlgError, OverflowError):
        return np.inf, None
    f = float(f)
    g = np.asarray(g, dtype=float)
    if not (np.isfinite(f) and np.all(np.isfinite(g))):
        return np.inf, None
    return f, g


def _cubic_min(a0, f0, d0, a1, f1, d1):
    """Minimizer of the cubic through two points with slopes, or None."""
    if a0 == a1:
        return None
    t1 = d0 + d1 - 3.0 * (f0 - f1) / (a0 - a1)
    disc = t1 * t1 - d0 * d1
    if not np.isfinite(disc) or disc < 0:
        return None
    t2 = np.copysign(np.sqrt(disc), a1 - a0)
    denom = d1 - d0 + 2.0 * t2
    if denom == 0:
        return None
    a = a1 - (a1 - a0) * (d1 + t2 - t1) / denom
    return a if np.isfinite(a) else None


def strong_wolfe_search(objective, x, f0, g0, direction, step=1.0,
                        c1=WOLFE_C1, c2=WOLFE_C2, max_evals=40):
    """Find a step satisfying the strong Wolfe conditions along ``direction``.

    Trial points where the objective fails count as ``+inf``.  Returns
    ``(step, f, g, ok)``; on failure ``step`` is the best sufficient-decrease
    point found (possibly 0) and ``ok`` is False.
    """
    dphi0 = float(g0 @ direction)
    evals = 0
    best = (0.0, f0, g0)

    def phi(a):
        nonlocal evals, best
        evals += 1
        f, g = _safe_eval(objective, x + a * direction)
        dphi = float(g @ direction) if g is not None else np.nan
        if f < best[1] and f <= f0 + c1 * a * dphi0:
            best = (a, f, g)
        return f, g, dphi

    def zoom(lo, hi):
        # lo, hi are (a, f, dphi)
        while evals < max_evals:
            a_lo, f_lo, d_lo = lo
            a_hi, f_hi, d_hi = hi
            width = a_hi - a_lo
            if abs(width) <= 1e-14 * max(1.0, abs(a_lo)):
                break
            a = None
            if np.isfinite(f_hi) and np.isfinite(d_hi):
                a = _cubic_min(a_lo, f_lo, d_lo, a_hi, f_hi, d_hi)
            lo_b, hi_b = sorted((a_lo, a_hi))
            margin = 0.1 * (hi_b - lo_b)
            if a is None or not (lo_b + margin <= a <= hi_b - margin):
                a = 0.5 * (a_lo + a_hi)
            f, g, d = phi(a)
            if f > f0 + c1 * a * dphi0 or f >= f_lo:
                hi = (a, f, d)
            else:
                if abs(d) <= -c2 * dphi0:
                    return a, f, g, True
                if d * (a_hi - a_lo) >= 0:
                    hi = lo
                lo = (a, f, d)
        return None

    prev = (0.0, f0, dphi0)
    a = step
    first = True
    while evals < max_evals:
        f, g, d = phi(a)
        if f > f0 + c1 * a * dphi0 or (not first and f >= prev[1]):
            found = zoom(prev, (a, f, d))
            break
        if abs(d) <= -c2 * dphi0:
            return a, f, g, True
        if d >= 0:
            found = zoom((a, f, d), prev)
            break
        prev = (a, f, d)
        a = 2.0 * a
        first = False
    else:
        found = None
    if found is not None:
        return found
    a, f, g = best
    return a, f, g, False


def lbfgs_minimize(objective: Callable, x0, cfg: FitConfig | None = None) -> MinimizeResult:
    """Minimize ``objective(x) -> (value, gradient)`` with limited-memory BFGS.

    Stops when the max-abs gradient drops to ``cfg.gradient_tolerance``,
    after ``cfg.max_iterations`` accepted steps, or when the line search
    cannot make progress (reported in ``message``, not raised).
    """
    cfg = cfg or FitConfig()
    x = np.array(x0, dtype=float)
    f, g = _safe_eval(objective, x)
    if g is None:
        raise InvalidArgumentError("objective is not finite at the starting point")
    S = deque(maxlen=cfg.memory_pairs)
    Y = deque(maxlen=cfg.memory_pairs)
    history = [f]
    it = 0
    message = "iteration limit reached"
    converged = False
    while True:
        if np.max(np.abs(g)) <= cfg.gradient_tolerance:
            converged, message = True, "gradient tolerance reached"
            break
        if it >= cfg.max_iterations:
            break
        d = _two_loop(g, S, Y)
        if not g @ d < 0:
            S.clear()
            Y.clear()
            d = -g
        step = min(1.0, 1.0 / np.linalg.norm(g)) if not S else 1.0
        a, f_new, g_new, ok = strong_wolfe_search(objective, x, f, g, d, step)
        if a == 0.0 or g_new is None:
            message = "line search failed"
            break
        s = a * d
        y = g_new - g
        x = x + s
        f, g = f_new, g_new
        it += 1
        history.append(f)
        if not ok:
            message = "line search failed"
            break
        sy = s @ y
        if sy > 1e-10 * np.linalg.norm(s) * np.linalg.norm(y):
            S.append(s)
            Y.append(y)
    return MinimizeResult(x, f, it, converged, message, history)


def _two_loop(g, S, Y):
    q = g.copy()
    alphas = []
    for s, y in zip(reversed(S), reversed(Y)):
        rho = 1.0 / (y @ s)
        a = rho * (s @ q)
        alphas.append((rho, a))
        q = q - a * y
    if S:
        s, y = S[-1], Y[-1]
        q = q * ((s @ y) / (y @ y))
    for (s, y), (rho, a) in zip(zip(S, Y), reversed(alphas)):
        b = rho * (y @ q)
        q = q + (a - b) * s
    return -q


# ---------------------------------------------------------------------------
# multi-restart fitting
# ---------------------------------------------------------------------------


def fit(data: Dataset, cfg: FitConfig | None = None, warm_starts=()) -> TrainedModel:
    """Maximize the marginal likelihood from several starting points.

    Runs the default initialization, then ``cfg.restarts`` seeded random
    perturbations of it (standard normal per packed coordinate), then any
    ``warm_starts`` given as ``(spec, noise)`` pairs in standardized units.
    The lowest final NLL wins; ties go to the earliest start.
    """
    cfg = cfg or FitConfig()
    train, stats = standardize(data)
    X, y = train.inputs, train.targets
    D = train.dims
    max_order = resolve_max_order(D, cfg.max_order) if cfg.kernel == "additive" else None
    template = default_template(cfg.kernel, D, max_order, cfg.esp_method)
    mu = float(np.mean(y))
    x_default = pack(template, NoiseModel(DEFAULT_NOISE))

    rng = np.random.default_rng(cfg.seed)
    starts = [x_default]
    starts += [x_default + rng.standard_normal(x_default.size) for _ in range(cfg.restarts)]
    for spec, noise in warm_starts:
        if not _same_layout(spec, template):
            raise InvalidArgumentError("warm start does not match the kernel template")
        starts.append(pack(spec, noise))

    def objective(p):
        return neg_log_marginal_likelihood(p, (X, y), template, mu)

    results = []
    failures = []
    for i, x0 in enumerate(starts):
        try:
            res = lbfgs_minimize(objective, x0, cfg)
        except (InvalidArgumentError, NumericalFailureError) as exc:
            log.info("start %d failed: %s", i, exc)
            failures.append((i, str(exc)))
            continue
        log.debug("start %d: nll=%.6f after %d iterations (%s)", i, res.fun, res.iterations, res.message)
        results.append((res.fun, i, res))
    if not results:
        raise NumericalFailureError(
            "every optimization start failed: " + "; ".join(f"#{i}: {m}" for i, m in failures)
        )
    best_nll, best_i, best = min(results, key=lambda t: (t[0], t[1]))
    spec, noise = unpack(best.x, template, constant_mean=mu)
    nlls = [np.nan] * len(starts)
    for fun, i, _ in results:
        nlls[i] = fun
    diag = FitDiagnostics(
        final_nll=best_nll,
        iterations=best.iterations,
        restart_index=best_i,
        converged=best.converged,
        restart_nlls=tuple(nlls),
        message=best.message,
    )
    return fit_posterior((X, y), spec, noise, stats, diag)


def _same_layout(spec, template):
    if spec.kind != template.kind or spec.dims != template.dims:
        return False
    if spec.kind == "additive":
        return spec.active_orders == template.active_orders
    return True
