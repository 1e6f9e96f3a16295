"""Versioned JSON model files.

The Cholesky factor is not stored; it is recomputed on load and the
resulting marginal likelihood is compared with the stored value.
"""

from __future__ import annotations

import json
import math
import os

import numpy as np

from .data import StandardizationStats
from .errors import AddGPError, ModelLoadError
from .gp import FitDiagnostics, NoiseModel, TrainedModel, fit_posterior, model_nll
from .kernels import spec_from_dict

FORMAT = "addgp-model"
VERSION = 1
NLL_TOLERANCE = 1e-6


def _clean(v):
    return None if isinstance(v, float) and not math.isfinite(v) else v


def model_to_dict(model: TrainedModel) -> dict:
    diag = model.fit_diagnostics.to_dict()
    diag["restart_nlls"] = [_clean(float(v)) for v in diag["restart_nlls"]]
    return {
        "format": FORMAT,
        "version": VERSION,
        "kernel": model.spec.to_dict(),
        "noise": {
            "noise_variance": model.noise.noise_variance,
            "constant_mean": model.noise.constant_mean,
        },
        "standardization": model.standardization.to_dict(),
        "train_inputs": model.train_inputs.tolist(),
        "train_targets": model.train_targets.tolist(),
        "dual_weights": model.dual_weights.tolist(),
        "jitter": model.jitter,
        "nll": model.fit_diagnostics.final_nll,
        "fit_diagnostics": diag,
    }


def save_model(model: TrainedModel, path) -> None:
    text = json.dumps(model_to_dict(model), indent=1, allow_nan=False)
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "w") as fh:
        fh.write(text + "\n")
    os.replace(tmp, path)


def model_from_dict(payload: dict) -> TrainedModel:
    if payload.get("format") != FORMAT:
        raise ModelLoadError("not an addgp model file")
    if payload.get("version") != VERSION:
        raise ModelLoadError(f"unsupported model version {payload.get('version')!r}")
    try:
        spec = spec_from_dict(payload["kernel"])
        noise = NoiseModel(**payload["noise"])
        stats = StandardizationStats.from_dict(payload["standardization"])
        X = np.asarray(payload["train_inputs"], dtype=float)
        y = np.asarray(payload["train_targets"], dtype=float)
        stored_alpha = np.asarray(payload["dual_weights"], dtype=float)
        stored_nll = float(payload["nll"])
        d = payload["fit_diagnostics"]
        diag = FitDiagnostics(
            final_nll=float(d["final_nll"]),
            iterations=int(d["iterations"]),
            restart_index=int(d["restart_index"]),
            converged=bool(d["converged"]),
            restart_nlls=tuple(float("nan") if v is None else float(v) for v in d["restart_nlls"]),
            message=str(d.get("message", "")),
        )
        model = fit_posterior((X, y), spec, noise, stats, diag)
    except ModelLoadError:
        raise
    except (KeyError, TypeError, ValueError, AddGPError) as exc:
        raise ModelLoadError(f"malformed model file: {exc}") from exc

    nll = model_nll(model)
    if not abs(nll - stored_nll) <= NLL_TOLERANCE * max(1.0, abs(stored_nll)):
        raise ModelLoadError(
            f"likelihood checksum mismatch: stored {stored_nll!r}, recomputed {nll!r}"
        )
    if stored_alpha.shape != model.dual_weights.shape:
        raise ModelLoadError("dual weights have the wrong length")
    return model


def load_model(path) -> TrainedModel:
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise ModelLoadError(f"no such model file: {path}")
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ModelLoadError(f"{path} is not valid JSON: {exc}") from exc
    return model_from_dict(payload)
