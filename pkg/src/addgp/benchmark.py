"""Repeated train/test comparison of regression models."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .data import Dataset, fit_standardization, split
from .errors import AddGPError
from .gp import predict
from .optimize import FitConfig, fit

log = logging.getLogger(__name__)

MODELS = ("linear", "gam", "squared-exp", "additive")
RIDGE = 1e-8


@dataclass(frozen=True)
class SplitScore:
    split: int
    model: str
    mse: float
    nlpd: float
    status: str = "ok"


def linear_regression(train: Dataset, test_inputs):
    """Ridge regression with intercept; returns predictive means and a shared noise variance."""
    X = np.column_stack([train.inputs, np.ones(train.n)])
    A = X.T @ X + RIDGE * np.eye(X.shape[1])
    w = np.linalg.solve(A, X.T @ train.targets)
    resid = train.targets - X @ w
    noise = max(float(np.mean(resid**2)), 1e-12)
    Xt = np.column_stack([np.asarray(test_inputs, dtype=float), np.ones(len(test_inputs))])
    return Xt @ w, np.full(len(Xt), noise)


def _scores(mean, var, y):
    """MSE and mean negative log predictive density."""
    err = y - mean
    mse = float(np.mean(err**2))
    nlpd = float(np.mean(0.5 * np.log(2 * np.pi * var) + 0.5 * err**2 / var))
    return mse, nlpd


def evaluate(train: Dataset, test: Dataset, model: str, cfg: FitConfig):
    """Fit ``model`` on ``train``; score on ``test`` in train-standardized target units."""
    stats = fit_standardization(train)
    y = stats.transform_targets(test.targets)
    if model == "linear":
        st = stats.apply(train)
        mean, var = linear_regression(st, stats.transform_inputs(test.inputs))
    else:
        fitted = fit(train, replace(cfg, kernel=model))
        pred = predict(fitted, test.inputs, include_noise=True)
        mean = stats.transform_targets(pred.means)
        var = pred.variances / stats.target_std**2
    return _scores(mean, var, y)


def run_benchmark(data: Dataset, cfg: FitConfig, n_splits: int = 10, train_fraction: float = 0.9,
                  models=MODELS, test_data: Dataset | None = None):
    """Score every model on ``n_splits`` seeded splits.

    With ``test_data`` the whole of ``data`` is used for training and a
    single evaluation is made.  A model that fails on a split is recorded
    with ``status='failed'`` and left out of the summaries.
    """
    scores = []
    pairs = [(data, test_data)] if test_data is not None else [
        split(data, train_fraction, cfg.seed + k) for k in range(n_splits)
    ]
    for k, (train, test) in enumerate(pairs):
        for model in models:
            try:
                mse, nlpd = evaluate(train, test, model, replace(cfg, seed=cfg.seed + k))
                scores.append(SplitScore(k, model, mse, nlpd))
            except (AddGPError, np.linalg.LinAlgError) as exc:
                log.warning("split %d, model %s failed: %s", k, model, exc)
                scores.append(SplitScore(k, model, float("nan"), float("nan"), f"failed: {exc}"))
    return scores


def summarize(scores, models=MODELS, reference="additive"):
    """Per-model means and paired differences against ``reference``.

    Returns ``(means, paired)`` where ``means[model] = (mse, nlpd, n_ok)``
    and ``paired[model] = (mse_diff, mse_se, nlpd_diff, nlpd_se, n)`` with
    differences taken as ``model - reference`` over splits where both ran.
    """
    ok = {(s.split, s.model): s for s in scores if s.status == "ok"}
    means = {}
    for m in models:
        rows = [s for (k, mm), s in sorted(ok.items()) if mm == m]
        if rows:
            means[m] = (
                float(np.mean([s.mse for s in rows])),
                float(np.mean([s.nlpd for s in rows])),
                len(rows),
            )
        else:
            means[m] = (float("nan"), float("nan"), 0)
    paired = {}
    if reference in models:
        splits = sorted({k for k, _ in ok})
        for m in models:
            if m == reference:
                continue
            both = [k for k in splits if (k, m) in ok and (k, reference) in ok]
            dm = np.array([ok[k, m].mse - ok[k, reference].mse for k in both])
            dn = np.array([ok[k, m].nlpd - ok[k, reference].nlpd for k in both])
            paired[m] = (*_mean_se(dm), *_mean_se(dn), len(both))
    return means, paired


def _mean_se(d):
    if len(d) == 0:
        return float("nan"), float("nan")
    if len(d) == 1:
        return float(d[0]), float("nan")
    return float(d.mean()), float(d.std(ddof=1) / np.sqrt(len(d)))
