"""Command-line experiment runner and inspection tool.

Subcommands:

* ``gen``      write a synthetic long-tailed dataset as CSV plus manifest
* ``train``    train with any method, logging metrics.csv / summary.json
* ``nc-eval``  collapse metrics for feature/classifier CSV dumps
* ``weights``  closed-form class weights for a list of class losses
* ``mlf``      evaluate the Mittag-Leffler decay value E_a(-z)

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric
failure. All outputs are deterministic in their inputs; nothing written
contains timestamps.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import CsvSource, ExperimentConfig, load_experiment_config
from .data import gaussian_mixture, load_csv_dataset, save_csv_dataset
from .errors import ConfigError, DataError, NumericError
from .nc_metrics import FeatureBank, nc1, nc2, nc3, nc4_agreement
from .reweighting import WeightSolution, closed_form_weight, loss_imbalance_rho
from .scheduler import ml_series, ml_tail, mittag_leffler
from .trainer import EpochRecord, forward_batch, run_experiment

METRIC_COLUMNS = ("epoch", "train_loss", "bal_acc", "acc_head", "acc_med", "acc_tail",
                  "lr", "rho", "nc1", "nc2", "nc3", "nc4")


def _load_datasets(cfg: ExperimentConfig):
    if isinstance(cfg.dataset, CsvSource):
        train = load_csv_dataset(cfg.dataset.train_path, cfg.dataset.label_column, split="train")
        test = load_csv_dataset(cfg.dataset.test_path, cfg.dataset.label_column, split="test")
        if train.input_dim != test.input_dim or train.class_count != test.class_count:
            raise DataError("train/test shape mismatch: "
                            f"{train.input_dim}x{train.class_count} vs {test.input_dim}x{test.class_count}")
        return train, test
    return gaussian_mixture(cfg.dataset)


def _write_metrics_csv(path: Path, records: list[EpochRecord]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRIC_COLUMNS)
        for r in records:
            writer.writerow([r.epoch] + [repr(getattr(r, c)) for c in METRIC_COLUMNS[1:]])


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def _params_payload(params) -> dict:
    payload = {"weights": params.weights.tolist(), "bias": params.bias.tolist()}
    if params.hidden_weights is not None:
        payload["hidden_weights"] = params.hidden_weights.tolist()
        payload["hidden_bias"] = params.hidden_bias.tolist()
    return payload


def cmd_gen(args) -> int:
    cfg = load_experiment_config(args.config)
    if isinstance(cfg.dataset, CsvSource):
        raise ConfigError("gen requires a synthetic [dataset] section")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    train, test = gaussian_mixture(cfg.dataset)
    save_csv_dataset(train, out / "train.csv")
    save_csv_dataset(test, out / "test.csv")
    manifest = {
        "C": cfg.dataset.class_count,
        "counts": list(train.counts.per_class),
        "IF": cfg.dataset.imbalance_factor,
        "seed": cfg.dataset.seed,
        "sigma": cfg.dataset.noise_sigma,
    }
    _write_json(out / "manifest.json", manifest)
    print(f"wrote {out / 'train.csv'}, {out / 'test.csv'}, {out / 'manifest.json'}")
    return 0


def cmd_train(args) -> int:
    cfg = load_experiment_config(args.config)
    train_cfg = cfg.train
    if args.method is not None:
        train_cfg = replace(train_cfg, method=replace(train_cfg.method, name=args.method))
    seeds = args.seed if args.seed else [train_cfg.seed]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    train_set, test_set = _load_datasets(cfg)

    summaries = []
    single = len(seeds) == 1
    for seed in seeds:
        run_cfg = replace(train_cfg, seed=seed)
        records, summary, state = run_experiment(run_cfg, train_set, test_set)
        summaries.append(summary)
        metrics_name = "metrics.csv" if single else f"metrics_seed{seed}.csv"
        params_name = "params.json" if single else f"params_seed{seed}.json"
        _write_metrics_csv(out / metrics_name, records)
        _write_json(out / params_name, _params_payload(state.params))
        if single:
            h, _, _ = forward_batch(state.params, train_set.x)
            with open(out / "features.csv", "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow([f"f{i}" for i in range(h.shape[1])] + ["label"])
                for row, label in zip(h, train_set.y):
                    writer.writerow([repr(float(v)) for v in row] + [int(label)])
            np.savetxt(out / "classifier.csv", state.params.weights, delimiter=",")
            np.savetxt(out / "bias.csv", state.params.bias[None, :], delimiter=",")

    agg = {
        "method": train_cfg.method.name,
        "seeds": list(seeds),
        "bal_acc_mean": float(np.mean([s["bal_acc"] for s in summaries])),
        "bal_acc_per_seed": [s["bal_acc"] for s in summaries],
        "rho_final": float(np.mean([s["rho_final"] for s in summaries])),
        "nc1": float(np.mean([s["nc1"] for s in summaries])),
        "nc2": float(np.mean([s["nc2"] for s in summaries])),
        "nc3": float(np.mean([s["nc3"] for s in summaries])),
        "nc4": float(np.mean([s["nc4"] for s in summaries])),
        "acc_head": float(np.mean([s["acc_head"] for s in summaries])),
        "acc_med": float(np.mean([s["acc_med"] for s in summaries])),
        "acc_tail": float(np.mean([s["acc_tail"] for s in summaries])),
    }
    _write_json(out / "summary.json", agg)
    print(json.dumps(agg, indent=2))
    return 0


def _load_matrix_csv(path: str, what: str) -> np.ndarray:
    try:
        m = np.loadtxt(path, delimiter=",", ndmin=2)
    except OSError as exc:
        raise DataError(f"cannot open {what} file {path}: {exc}") from exc
    except ValueError as exc:
        raise DataError(f"malformed {what} file {path}: {exc}") from exc
    if not np.isfinite(m).all():
        raise DataError(f"{what} file {path} contains non-finite values")
    return m


def cmd_nc_eval(args) -> int:
    bank_data = load_csv_dataset(args.features, args.label_column, split="train")
    bank = FeatureBank.from_labels(bank_data.x, bank_data.y)
    w = _load_matrix_csv(args.classifier, "classifier")
    if w.shape != (bank.class_count, bank.feature_dim):
        raise DataError(
            f"classifier shape {w.shape[0]}x{w.shape[1]} does not match "
            f"{bank.class_count} classes x {bank.feature_dim} features")
    if args.bias is not None:
        b = _load_matrix_csv(args.bias, "bias").ravel()
        if b.shape != (bank.class_count,):
            raise DataError(f"bias length {b.size} does not match {bank.class_count} classes")
    else:
        b = np.zeros(bank.class_count)
    report = {
        "nc1": nc1(bank),
        "nc2": nc2(w),
        "nc3": nc3(w, bank),
        "nc4": nc4_agreement(w, b, bank),
    }
    if args.losses is not None:
        try:
            with open(args.losses) as fh:
                losses = json.load(fh)
        except OSError as exc:
            raise DataError(f"cannot open losses file {args.losses}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise DataError(f"malformed losses file {args.losses}: {exc}") from exc
        report["rho"] = loss_imbalance_rho(losses)
    print(json.dumps(report, indent=2))
    return 0


def _parse_float_list(raw: str, flag: str) -> list[float]:
    try:
        values = [float(v.strip()) for v in raw.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"{flag} must be a comma-separated list of numbers, got {raw!r}") from None
    if not values:
        raise ConfigError(f"{flag} must contain at least one value")
    return values


def cmd_weights(args) -> int:
    losses = _parse_float_list(args.losses, "--losses")
    if any(l < 0 for l in losses):
        raise ConfigError("losses must be nonnegative")
    if args.alpha < 0:
        raise ConfigError("--alpha must be >= 0")
    if args.w0 is not None:
        w0 = _parse_float_list(args.w0, "--w0")
        if len(w0) != len(losses):
            raise ConfigError(f"--w0 has {len(w0)} entries for {len(losses)} losses")
        if any(w <= 0 for w in w0):
            raise ConfigError("prior weights must be positive")
    else:
        w0 = [1.0] * len(losses)
    l_bar = float(np.mean(losses))
    present = tuple(range(len(losses)))
    w_star = {c: closed_form_weight(losses[c], l_bar, args.alpha, w0[c]) for c in present}
    solution = WeightSolution(
        present=present,
        w_star=w_star,
        beta={c: 1.0 for c in present},
        w_hat=dict(w_star),
    )
    print(json.dumps({"l_bar": l_bar, "weights": solution.to_json_dict()}, indent=2))
    return 0


def cmd_mlf(args) -> int:
    try:
        value = mittag_leffler(args.a, args.z)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    branch = "series" if args.z < 1.0 else "tail"
    payload = {"a": args.a, "z": args.z, "value": value, "branch": branch}
    if args.z > 0:
        series_value = ml_series(args.a, args.z)
        tail_value = ml_tail(args.a, args.z)
        # Make the piecewise handoff visible whenever the branches disagree.
        if np.isfinite(series_value) and abs(series_value - tail_value) > 1e-3:
            payload["series_value"] = series_value
            payload["tail_value"] = tail_value
    print(json.dumps(payload, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ltlab",
                                     description="Long-tailed classification laboratory")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen", help="generate a synthetic dataset")
    p_gen.add_argument("--config", required=True, help="experiment config file")
    p_gen.add_argument("--out", required=True, help="output directory")
    p_gen.set_defaults(func=cmd_gen)

    p_train = sub.add_parser("train", help="run a training experiment")
    p_train.add_argument("--config", required=True, help="experiment config file")
    p_train.add_argument("--out", required=True, help="output directory")
    p_train.add_argument("--method", default=None, help="override the configured method")
    p_train.add_argument("--seed", type=int, action="append", default=None,
                         help="training seed; repeat for a multi-seed run")
    p_train.set_defaults(func=cmd_train)

    p_nc = sub.add_parser("nc-eval", help="collapse metrics from CSV dumps")
    p_nc.add_argument("--features", required=True, help="feature CSV with a label column")
    p_nc.add_argument("--classifier", required=True, help="classifier matrix CSV (C rows, p cols)")
    p_nc.add_argument("--bias", default=None, help="optional bias CSV (one row of C values)")
    p_nc.add_argument("--losses", default=None, help="optional JSON file of per-class losses")
    p_nc.add_argument("--label-column", default="label")
    p_nc.set_defaults(func=cmd_nc_eval)

    p_w = sub.add_parser("weights", help="closed-form class weights for given losses")
    p_w.add_argument("--losses", required=True, help="comma-separated per-class losses")
    p_w.add_argument("--alpha", type=float, default=0.0, help="prior-anchoring strength")
    p_w.add_argument("--w0", default=None, help="comma-separated prior weights (default all 1)")
    p_w.set_defaults(func=cmd_weights)

    p_m = sub.add_parser("mlf", help="evaluate the decay value E_a(-z)")
    p_m.add_argument("--a", type=float, required=True)
    p_m.add_argument("--z", type=float, required=True)
    p_m.set_defaults(func=cmd_mlf)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 4
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
