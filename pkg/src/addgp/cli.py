"""``addgp`` command-line interface.

Data goes to ``--out`` files (or stdout where noted); diagnostics go to
stderr.  The exit status is 0 only when no error was raised.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys

import numpy as np

from . import __version__
from .benchmark import MODELS, run_benchmark, summarize
from .data import (
    in_l_region,
    load_csv,
    save_csv,
    synth_axis_sines,
    write_table,
)
from .errors import AddGPError, InvalidArgumentError, MissingFileError, NonNumericCellError
from .gp import component_posterior, first_order_residuals, order_report, predict, sample_prior
from .optimize import KERNELS, FitConfig, default_template, fit
from .persist import load_model, save_model

log = logging.getLogger("addgp")


def _fit_config(args) -> FitConfig:
    return FitConfig(
        max_iterations=args.iters,
        restarts=args.restarts,
        seed=args.seed,
        max_order=args.max_order,
        kernel=getattr(args, "kernel", "additive"),
        esp_method=args.esp,
    )


def _fit_summary(model) -> dict:
    spec = model.spec
    stds = np.asarray(model.standardization.input_stds)
    diag = model.fit_diagnostics
    summary = {
        "kernel": spec.kind,
        "final_nll": diag.final_nll,
        "restart_index": diag.restart_index,
        "iterations": diag.iterations,
        "converged": diag.converged,
        "noise_variance": model.noise.noise_variance,
        "length_scales": list(spec.length_scales),
        "length_scales_original_units": list(np.asarray(spec.length_scales) * stds),
        "order_shares": order_report(model).shares.tolist(),
    }
    if spec.kind == "additive":
        summary["order_variances"] = list(spec.order_variances)
    else:
        summary["amplitude"] = spec.amplitude
        summary["alpha"] = spec.alpha
    return summary


def cmd_fit(args) -> int:
    data = load_csv(args.data, args.target)
    model = fit(data, _fit_config(args))
    save_model(model, args.out)
    text = json.dumps(_fit_summary(model), indent=1)
    if args.summary:
        with open(args.summary, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return 0


def _read_inputs(path, dims=None, target=None):
    """Input matrix from a CSV with ``dims`` input columns, plus optionally a target.

    ``dims=None`` treats every column as an input unless ``target`` is given.
    """
    if not os.path.isfile(path):
        raise MissingFileError(f"no such file: {path}")
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if any(c.strip() for c in r)]
    if not rows:
        raise InvalidArgumentError(f"{path} is empty")
    width = len(rows[0])
    if target is None and (dims is None or width == dims):
        header = None
        try:
            [float(c) for c in rows[0]]
        except ValueError:
            header = [c.strip() for c in rows[0]]
            rows = rows[1:]
        X = np.empty((len(rows), width))
        for i, r in enumerate(rows):
            try:
                X[i] = [float(c) for c in r]
            except ValueError as exc:
                raise NonNumericCellError(f"{path}: data row {i + 1}: {exc}", i + 1, None) from exc
        return X, header or [f"x{d + 1}" for d in range(width)]
    data = load_csv(path, -1 if target is None else target)
    if dims is not None and data.dims != dims:
        raise InvalidArgumentError(f"{path} has {data.dims} input columns, model expects {dims}")
    return data.inputs, list(data.input_names)


def cmd_predict(args) -> int:
    model = load_model(args.model)
    X, _ = _read_inputs(args.data, model.spec.dims, args.target)
    pred = predict(model, X, include_noise=args.include_noise)
    write_table(args.out, ["mean", "variance"], np.column_stack([pred.means, pred.variances]))
    return 0


def cmd_orders(args) -> int:
    model = load_model(args.model)
    shares = order_report(model).shares
    rows = [(n, s) for n, s in enumerate(shares, start=1)]
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["order", "share"])
            w.writerows([(n, repr(float(s))) for n, s in rows])
    else:
        print("order,share")
        for n, s in rows:
            print(f"{n},{s:.6g}")
    return 0


def _fmt(v):
    return "" if v is None or (isinstance(v, float) and np.isnan(v)) else repr(float(v))


def cmd_benchmark(args) -> int:
    data = load_csv(args.data, args.target)
    test = load_csv(args.test_data, args.target) if args.test_data else None
    models = tuple(args.models.split(","))
    for m in models:
        if m not in MODELS + ("hull",):
            raise InvalidArgumentError(f"unknown model {m!r}")
    cfg = _fit_config(args)
    scores = run_benchmark(data, cfg, args.splits, args.train_fraction, models, test)
    means, paired = summarize(scores, models)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["kind", "split", "model", "mse", "nlpd", "mse_se", "nlpd_se", "status"])
        for s in scores:
            w.writerow(["split", s.split, s.model, _fmt(s.mse), _fmt(s.nlpd), "", "", s.status])
        for m in models:
            mse, nlpd, n_ok = means[m]
            w.writerow(["mean", n_ok, m, _fmt(mse), _fmt(nlpd), "", "", "ok" if n_ok else "failed"])
        for m, (dm, sem, dn, sen, n) in paired.items():
            w.writerow(["paired", n, f"{m}-minus-additive", _fmt(dm), _fmt(dn), _fmt(sem), _fmt(sen), "ok"])
    return 0


def _parse_dims(text, D):
    try:
        dims = [int(t) - 1 for t in text.split(",")]
    except ValueError:
        raise InvalidArgumentError(f"--dims must be 1-based integers, got {text!r}") from None
    if len(dims) not in (1, 2) or len(set(dims)) != len(dims) or any(not 0 <= d < D for d in dims):
        raise InvalidArgumentError(f"--dims must name one or two distinct dimensions in 1..{D}")
    return dims


def cmd_grid(args) -> int:
    model = load_model(args.model)
    D = model.spec.dims
    dims = _parse_dims(args.dims, D)
    if args.resolution < 2:
        raise InvalidArgumentError("--resolution must be at least 2")
    if model.spec.kind == "additive" and len(dims) > model.spec.max_order:
        raise InvalidArgumentError(f"model has no order-{len(dims)} terms")
    X_raw = model.standardization.inverse_inputs(model.train_inputs)
    y_raw = model.train_targets * model.standardization.target_std + model.standardization.target_mean
    axes = [np.linspace(X_raw[:, d].min(), X_raw[:, d].max(), args.resolution) for d in dims]
    names = [f"x{d + 1}" for d in dims]
    # other coordinates do not affect a term over ``dims``; park them at the data mean
    base = X_raw.mean(axis=0)
    if len(dims) == 1:
        pts = np.tile(base, (args.resolution, 1))
        pts[:, dims[0]] = axes[0]
    else:
        G = np.meshgrid(*axes, indexing="ij")
        pts = np.tile(base, (G[0].size, 1))
        pts[:, dims[0]] = G[0].ravel()
        pts[:, dims[1]] = G[1].ravel()
    values = component_posterior(model, tuple(dims), pts)
    write_table(args.out, names + ["component_mean"], np.column_stack([pts[:, dims], values]))
    if len(dims) == 1:
        resid = first_order_residuals(model, X_raw, y_raw, dims[0])
        centred = y_raw - model.mean_offset
        path = args.residuals or _suffixed(args.out, "_residuals")
        write_table(
            path,
            [names[0], "target_centred", "residual"],
            np.column_stack([X_raw[:, dims[0]], centred, resid]),
        )
    return 0


def _suffixed(path, suffix):
    root, ext = os.path.splitext(path)
    return f"{root}{suffix}{ext or '.csv'}"


def cmd_synth(args) -> int:
    train, test, _ = synth_axis_sines(args.n_train, args.grid_size, args.noise_sd, args.seed)
    assert np.all(in_l_region(train.inputs))
    save_csv(f"{args.out}_train.csv", train)
    save_csv(f"{args.out}_test.csv", test)
    return 0


def cmd_sample_prior(args) -> int:
    if args.model:
        model = load_model(args.model)
        X, names = _read_inputs(args.data, model.spec.dims, args.target)
        spec = model.spec
        Xk = model.standardization.transform_inputs(X)
        scale = model.standardization.target_std
    else:
        X, names = _read_inputs(args.data, None, args.target)
        spec = default_template(args.kernel, X.shape[1], args.max_order, args.esp)
        Xk, scale = X, 1.0
    draws = scale * sample_prior(spec, Xk, args.seed, args.count)
    header = list(names) + [f"draw{i + 1}" for i in range(args.count)]
    write_table(args.out, header, np.column_stack([X, draws.T]))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="addgp", description="Additive Gaussian process regression.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    def fitting(sp, kernel=True):
        if kernel:
            sp.add_argument("--kernel", choices=KERNELS, default="additive")
        sp.add_argument("--max-order", type=int, default=None,
                        help="highest interaction order (default: min(D, 10))")
        sp.add_argument("--restarts", type=int, default=5)
        sp.add_argument("--iters", type=int, default=500)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--esp", choices=("dp", "newton-girard"), default="dp")

    sp = sub.add_parser("fit", help="fit hyperparameters and save a model")
    sp.add_argument("--data", required=True)
    sp.add_argument("--target", default="-1")
    fitting(sp)
    sp.add_argument("--out", required=True, help="model file to write")
    sp.add_argument("--summary", help="write the fit summary here instead of stdout")
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("predict", help="predictive means and variances")
    sp.add_argument("--model", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--target", default=None)
    sp.add_argument("--include-noise", action="store_true")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("orders", help="per-order variance shares of a fitted model")
    sp.add_argument("--model", required=True)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_orders)

    sp = sub.add_parser("benchmark", help="compare models over seeded train/test splits")
    sp.add_argument("--data", required=True)
    sp.add_argument("--target", default="-1")
    sp.add_argument("--test-data", help="fixed test set; disables random splitting")
    sp.add_argument("--models", default=",".join(MODELS))
    sp.add_argument("--splits", type=int, default=10)
    sp.add_argument("--train-fraction", type=float, default=0.9)
    fitting(sp, kernel=False)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_benchmark)

    sp = sub.add_parser("grid", help="component posterior means on a grid")
    sp.add_argument("--model", required=True)
    sp.add_argument("--dims", required=True, help="one or two 1-based dimensions, e.g. 1 or 1,2")
    sp.add_argument("--resolution", type=int, default=100)
    sp.add_argument("--out", required=True)
    sp.add_argument("--residuals", help="residual-point file for 1-D grids")
    sp.set_defaults(func=cmd_grid)

    sp = sub.add_parser("synth", help="write the L-shaped axis-sines dataset")
    sp.add_argument("--n-train", type=int, default=100)
    sp.add_argument("--grid-size", type=int, default=30)
    sp.add_argument("--noise-sd", type=float, default=0.1)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", default="synth", help="output prefix; writes <out>_train.csv and <out>_test.csv")
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("sample-prior", help="draw functions from the kernel prior")
    sp.add_argument("--data", required=True, help="CSV of input locations")
    sp.add_argument("--target", default=None, help="column to drop if the file also has targets")
    sp.add_argument("--model", help="use this model's kernel instead of the default one")
    sp.add_argument("--kernel", choices=KERNELS, default="additive")
    sp.add_argument("--max-order", type=int, default=None)
    sp.add_argument("--esp", choices=("dp", "newton-girard"), default="dp")
    sp.add_argument("--count", type=int, default=5)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_sample_prior)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    logging.captureWarnings(True)
    try:
        return args.func(args)
    except (AddGPError, OSError) as exc:
        print(f"addgp {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
