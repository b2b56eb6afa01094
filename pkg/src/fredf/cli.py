"""Command-line interface.

Exit codes: 0 success, 2 configuration error, 3 data or runtime error.
Every command writes a ``manifest.json`` (see :func:`write_manifest`) that
``fredf replay`` can re-execute.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import freq_corr_matrix, time_corr_matrix
from .data import (
    DataError,
    Scaler,
    SplitSpec,
    load_csv,
    make_windows,
    split_chronological,
    synth_ar,
    synth_sines,
    truncate_front,
    write_csv,
)
from .loss import LossConfig
from .metrics import MetricReport, mae, mase, owa, seasonal_naive, smape
from .metrics import mse as mse_metric
from .model import TrainConfig, build_model, fit, load_checkpoint, predict, save_checkpoint

EXIT_CONFIG = 2
EXIT_DATA = 3


class ConfigError(ValueError):
    pass


def _floats(text: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from None


def fingerprint(path) -> dict:
    raw = Path(path).read_bytes()
    return {"path": str(path), "bytes": len(raw), "sha256": hashlib.sha256(raw).hexdigest()}


def write_manifest(out_dir: Path, command: str, argv: list, config: dict, seed, data_path=None) -> Path:
    """Record how an output was produced.

    Keys: ``command``, ``argv`` (the exact arguments, replayable), ``config``
    (resolved settings), ``seed``, ``dataset`` (path, size in bytes, sha256; or
    null) and ``version``.
    """
    manifest = {
        "command": command,
        "argv": list(argv),
        "config": config,
        "seed": seed,
        "dataset": fingerprint(data_path) if data_path else None,
        "version": __version__,
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _dump(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# shared data preparation


def _split(args) -> SplitSpec:
    try:
        return SplitSpec.parse(args.split)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def prepare(data: str, h: int, t: int, split: SplitSpec, train_fraction: float = 1.0, timestamp: bool = False):
    """Load, split, scale (train statistics) and window a CSV dataset."""
    series = load_csv(data, has_timestamp_column=timestamp)
    train, val, test = split_chronological(series, split)
    if train_fraction < 1.0:
        train = truncate_front(train, train_fraction)
    scaler = Scaler.fit(train.values)
    windows = {
        name: make_windows(scaler.transform(seg.values), h, t)
        for name, seg in (("train", train), ("val", val), ("test", test))
    }
    return series, scaler, windows


def _loss_config(args) -> LossConfig:
    try:
        return LossConfig(alpha=args.alpha, axis=args.axis, basis=args.basis, variant=args.variant, norm=args.norm)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _train_config(args, alpha=None) -> TrainConfig:
    loss = _loss_config(args)
    if alpha is not None:
        loss = LossConfig(**{**loss.to_dict(), "alpha": alpha})
    try:
        return TrainConfig(
            lr=args.lr, max_epochs=args.epochs, patience=args.patience,
            batch_size=args.batch_size, seed=args.seed, loss=loss,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _model_config(args, d: int) -> dict:
    if args.model == "linear":
        return {"kind": "linear", "h": args.h, "t": args.t, "d": d, "per_channel": args.per_channel}
    return {"kind": "mlp", "h": args.h, "t": args.t, "d": d, "hidden": args.hidden}


def _validate_common(args) -> None:
    if args.h < 1 or args.t < 1:
        raise ConfigError("--h and --t must be >= 1")
    if not 0.0 < args.train_fraction <= 1.0:
        raise ConfigError("--train-fraction must lie in (0, 1]")


def _train_one(args, windows, d, tcfg):
    model = build_model(_model_config(args, d), seed=tcfg.seed)
    return fit(model, windows["train"], windows["val"], tcfg)


# ---------------------------------------------------------------------------
# commands


def cmd_train(args) -> int:
    _validate_common(args)
    split = _split(args)
    tcfg = _train_config(args)
    series, scaler, windows = prepare(args.data, args.h, args.t, split, args.train_fraction, args.timestamp)
    report, model = _train_one(args, windows, series.d, tcfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    extra = {
        "scaler": scaler.to_dict(),
        "split": split.to_list(),
        "train_fraction": args.train_fraction,
        "timestamp": args.timestamp,
        "train": tcfg.to_dict(),
        "dataset": fingerprint(args.data),
    }
    save_checkpoint(out / "checkpoint.npz", model, extra)
    _dump(out / "train_report.json", report.to_dict())
    config = {"model": model.config(), "train": tcfg.to_dict(), "split": split.to_list(), "train_fraction": args.train_fraction}
    write_manifest(out, "train", args.argv, config, tcfg.seed, args.data)
    print(json.dumps(report.to_dict(), sort_keys=True))
    return 0


def evaluate(model, dataset, scaler: Scaler | None = None, seasonality: int | None = None) -> MetricReport:
    """Metrics over every window of ``dataset`` (standardized scale for MSE/MAE).

    With ``seasonality`` the short-term metrics are added, computed on the
    original scale with each window's input as the in-sample series and the
    seasonal-naive forecast as the OWA reference.
    """
    yhat = predict(model, dataset)
    y = dataset.labels
    report = MetricReport(mse=mse_metric(yhat, y), mae=mae(yhat, y), n_windows=len(dataset))
    if seasonality:
        inv = scaler.inverse_transform if scaler is not None else (lambda a: a)
        # time first, then (window, variable) as separate series
        f = np.moveaxis(inv(yhat), 1, 0)
        lab = np.moveaxis(inv(np.asarray(y)), 1, 0)
        ins = np.moveaxis(inv(np.asarray(dataset.inputs)), 1, 0)
        naive = seasonal_naive(ins, dataset.t, seasonality)
        report.smape = smape(f, lab)
        report.mase = mase(f, lab, ins, seasonality)
        ref_s, ref_m = smape(naive, lab), mase(naive, lab, ins, seasonality)
        report.owa = owa(report.smape, report.mase, ref_s, ref_m)
    return report


def cmd_eval(args) -> int:
    model, extra = load_checkpoint(args.checkpoint)
    split = SplitSpec(*extra["split"]) if args.split is None else _split(args)
    series = load_csv(args.data, has_timestamp_column=extra.get("timestamp", False))
    if series.d != model.d:
        raise DataError(f"checkpoint expects {model.d} variables, dataset has {series.d}")
    train, val, test = split_chronological(series, split)
    if extra.get("train_fraction", 1.0) < 1.0:
        train = truncate_front(train, extra["train_fraction"])
    segment = {"train": train, "val": val, "test": test}[args.segment]
    scaler = Scaler.from_dict(extra["scaler"])
    dataset = make_windows(scaler.transform(segment.values), model.h, model.t)
    report = evaluate(model, dataset, scaler, args.seasonality)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _dump(out / "metrics.json", report.to_dict())
        write_manifest(out, "eval", args.argv, {"segment": args.segment, "split": split.to_list(), "seasonality": args.seasonality}, None, args.data)
    print(json.dumps(report.to_dict(), sort_keys=True))
    return 0


def select_alpha(rows: list) -> float:
    """Alpha with the lowest validation MSE; ties go to the smaller alpha."""
    return min(rows, key=lambda r: (r["val_mse"], r["alpha"]))["alpha"]


def cmd_sweep_alpha(args) -> int:
    _validate_common(args)
    split = _split(args)
    alphas = _floats(args.alphas)
    if not alphas or any(not 0.0 <= a <= 1.0 for a in alphas):
        raise ConfigError("every alpha must lie in [0, 1]")
    configs = [_train_config(args, alpha=a) for a in alphas]
    series, _, windows = prepare(args.data, args.h, args.t, split, args.train_fraction, args.timestamp)
    rows = []
    for a, tcfg in zip(alphas, configs):
        report, model = _train_one(args, windows, series.d, tcfg)
        test = evaluate(model, windows["test"])
        rows.append({
            "alpha": a,
            "val_mse": min(report.val_mse),
            "test_mse": test.mse,
            "test_mae": test.mae,
            "epochs_run": report.epochs_run,
        })
    result = {"rows": rows, "best_alpha": select_alpha(rows)}
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _dump(out / "sweep.json", result)
    config = {"alphas": alphas, "train": configs[0].to_dict(), "split": split.to_list(), "model": args.model}
    write_manifest(out, "sweep-alpha", args.argv, config, args.seed, args.data)
    print(json.dumps(result, sort_keys=True))
    return 0


def cmd_analyze_corr(args) -> int:
    if args.h < 1 or args.t < 1:
        raise ConfigError("--h and --t must be >= 1")
    series = load_csv(args.data, has_timestamp_column=args.timestamp)
    dataset = make_windows(series.values, args.h, args.t)
    tm = time_corr_matrix(dataset, args.variable, args.full_controls)
    fr, fi = freq_corr_matrix(dataset, args.variable, args.full_controls)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary = {"n_windows": len(dataset), "T": args.t, "variable": args.variable}
    for name, mat, thr in (("time", tm, args.time_threshold), ("freq_real", fr, args.freq_threshold), ("freq_imag", fi, args.freq_threshold)):
        mat.to_csv(out / f"{name}.csv")
        mat.to_json(out / f"{name}.json")
        summary[name] = {
            "size": mat.size,
            "threshold": thr,
            "exceedance": mat.exceedance(thr),
            "degenerate": mat.degenerate,
        }
    summary["time"]["first_subdiagonal_mean"] = float(np.mean(np.diag(tm.values, k=-1))) if tm.size > 1 else None
    _dump(out / "summary.json", summary)
    write_manifest(out, "analyze-corr", args.argv, {"h": args.h, "t": args.t, "variable": args.variable, "full_controls": args.full_controls}, None, args.data)
    print(json.dumps(summary, sort_keys=True))
    return 0


def cmd_synth(args) -> int:
    if args.n < 1 or args.d < 1:
        raise ConfigError("--n and --d must be >= 1")
    try:
        if args.kind == "ar":
            series = synth_ar(args.phi, args.n, args.d, args.seed, args.noise_sd)
        else:
            series = synth_sines(_floats(args.freqs), _floats(args.amps), args.noise_sd, args.n, args.d, args.seed, args.noise_phi)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_csv(series, out)
    config = {k: getattr(args, k) for k in ("kind", "n", "d", "phi", "freqs", "amps", "noise_sd", "noise_phi")}
    manifest_dir = out.parent / (out.stem + "_manifest")
    manifest_dir.mkdir(exist_ok=True)
    write_manifest(manifest_dir, "synth", args.argv, config, args.seed)
    print(json.dumps({"path": str(out), "n": series.n, "d": series.d}))
    return 0


def cmd_replay(args) -> int:
    manifest = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
    argv = list(manifest["argv"])
    if args.out:
        flag = "--out"
        if flag in argv:
            argv[argv.index(flag) + 1] = args.out
        else:
            argv += [flag, args.out]
    return main(argv)


# ---------------------------------------------------------------------------
# parser


def _add_data(p, split: bool = True) -> None:
    p.add_argument("--data", required=True, help="CSV file with a header row")
    p.add_argument("--timestamp", action="store_true", help="first column holds timestamps")
    if split:
        p.add_argument("--split", default="0.7,0.1,0.2", help="train,val,test as fractions or row counts")


def _add_training(p) -> None:
    p.add_argument("--h", type=int, default=96, help="input length")
    p.add_argument("--t", type=int, default=96, help="forecast length")
    p.add_argument("--model", choices=("linear", "mlp"), default="linear")
    p.add_argument("--hidden", type=int, default=128)
    p.add_argument("--per-channel", action="store_true", help="separate linear map per variable")
    p.add_argument("--alpha", type=float, default=0.8)
    p.add_argument("--axis", choices=("time", "variable", "both"), default="time")
    p.add_argument("--basis", choices=("fourier", "legendre", "chebyshev", "laguerre"), default="fourier")
    p.add_argument("--variant", choices=("full", "amplitude", "phase"), default="full")
    p.add_argument("--norm", choices=("modulus", "componentwise", "squared"), default="modulus")
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--patience", type=int, default=3)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--seed", type=int, default=2024)
    p.add_argument("--train-fraction", type=float, default=1.0, help="keep the most recent fraction of training rows")
    p.add_argument("--out", required=True, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fredf", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one model")
    _add_data(p)
    _add_training(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on every window of a segment")
    _add_data(p, split=False)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", default=None, help="override the checkpoint's split")
    p.add_argument("--segment", choices=("train", "val", "test"), default="test")
    p.add_argument("--seasonality", type=int, default=None, help="add SMAPE/MASE/OWA with this season length")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep-alpha", help="train one model per alpha")
    _add_data(p)
    _add_training(p)
    p.add_argument("--alphas", default="0,0.2,0.5,0.8,1.0")
    p.set_defaults(func=cmd_sweep_alpha)

    p = sub.add_parser("analyze-corr", help="partial-correlation matrices of the labels")
    _add_data(p, split=False)
    p.add_argument("--h", type=int, default=96)
    p.add_argument("--t", type=int, default=96)
    p.add_argument("--variable", type=int, default=-1)
    p.add_argument("--full-controls", action="store_true", help="control on the whole input window")
    p.add_argument("--time-threshold", type=float, default=0.3)
    p.add_argument("--freq-threshold", type=float, default=0.1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_analyze_corr)

    p = sub.add_parser("synth", help="write a synthetic dataset")
    p.add_argument("--kind", choices=("ar", "sines"), required=True)
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--phi", type=float, default=0.8, help="AR coefficient (kind=ar)")
    p.add_argument("--freqs", default="0.0416666667", help="cycles per step (kind=sines)")
    p.add_argument("--amps", default="1.0")
    p.add_argument("--noise-sd", type=float, default=1.0)
    p.add_argument("--noise-phi", type=float, default=0.0, help="AR coefficient of the sine noise")
    p.add_argument("--seed", type=int, default=2024)
    p.add_argument("--out", required=True, help="CSV path")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    p.add_argument("manifest")
    p.add_argument("--out", default=None, help="redirect outputs")
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    args.argv = argv
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"fredf: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, ValueError, OSError) as exc:
        print(f"fredf: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
