"""Command-line entry point.

Subcommands: ``build`` (raw price CSVs -> dataset container), ``train``
(dataset -> checkpoint + loss curves + run manifest), ``grid``
(two-stage hyperparameter search), ``eval`` (model vs indicator
baselines on the test split), ``attack`` (clean vs attacked metrics and
relative performance drop), ``report`` (mean +- std across repeated
runs).  Exit codes: 0 success, 2 input or config error, 3 divergence,
4 artifact mismatch.  Same config and seed always reproduce the same
bytes on disk.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from . import artifacts, baselines
from .config import RunConfig, config_as_dict, dump_config, load_config
from .errors import (
    AdvAlstmError,
    ArtifactMismatchError,
    ConfigError,
    ContractError,
    DataError,
    DivergenceError,
    NumericError,
    ParseError,
    ShapeError,
    WindowError,
)
from .evaluation import (
    PredictionRecord,
    accuracy,
    confidence_histogram,
    mcc,
    multi_run_report,
    rpd,
)
from .gridsearch import grid_search
from .market_data import (
    FEATURE_DIM,
    align_trading_days,
    ingest_eod,
    label_and_window,
)
from .model import classify, predict
from .training import attacked_confidences, train

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_DIVERGENCE = 3
EXIT_MISMATCH = 4

DATASET_FILE = "dataset.bin"
CHECKPOINT_FILE = "model.ckpt"


def _load_run_config(args) -> RunConfig:
    config = load_config(args.config) if args.config else RunConfig()
    if args.out:
        config.out_dir = args.out
    if args.seed is not None:
        config.seed = args.seed
    config.validate()
    return config


def _out_dir(config: RunConfig) -> Path:
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _require(path: Path, what: str) -> Path:
    if not path.is_file():
        raise FileNotFoundError(f"{what} not found: {path}")
    return path


def _aligned_adj_close(aligned) -> tuple[list[str], np.ndarray]:
    stocks = sorted(aligned.series)
    matrix = np.array(
        [[rec.adj_close for rec in aligned.series[s]] for s in stocks], dtype=np.float64
    )
    return stocks, matrix


def cmd_build(args) -> int:
    config = _load_run_config(args)
    if not config.data_path:
        raise ConfigError("data.path is required for build")
    spec = config.split_spec()
    out = _out_dir(config)

    series = ingest_eod(config.data_path)
    aligned = align_trading_days(series, min_coverage=config.min_coverage)
    splits = label_and_window(aligned, spec)
    stocks, adj_close = _aligned_adj_close(aligned)

    dataset_path = out / DATASET_FILE
    artifacts.save_dataset(
        dataset_path,
        splits,
        spec,
        stocks=stocks,
        calendar=aligned.calendar,
        adj_close=adj_close,
        dropped=aligned.dropped,
    )
    sha = artifacts.file_sha256(dataset_path)
    counts = splits.counts()
    balance = splits.positive_fraction()
    artifacts.write_json(
        out / "build_manifest.json",
        {
            "config": config_as_dict(config),
            "dataset_sha256": sha,
            "split_sizes": counts,
            "positive_fraction": balance,
            "stocks": stocks,
            "dropped": aligned.dropped,
        },
    )
    print(f"dataset: {dataset_path}")
    for split in ("train", "val", "test"):
        frac = balance[split]
        frac_text = "n/a" if frac is None else f"{frac:.3f}"
        print(f"{split}: {counts[split]} examples, positive fraction {frac_text}")
    print(f"sha256: {sha}")
    return EXIT_OK


def _train_once(config: RunConfig, dataset, out: Path, dataset_sha: str) -> None:
    x_train, y_train = dataset.arrays("train")
    x_val, y_val = dataset.arrays("val")
    dims = config.model_dims()
    train_config = config.train_config()
    result = train(x_train, y_train, x_val, y_val, dims, train_config)

    artifacts.save_checkpoint(
        out / CHECKPOINT_FILE,
        result.params,
        lag=dataset.lag,
        seed=train_config.seed,
        mode=train_config.mode,
        best_epoch=result.best_epoch,
        adv_scale=train_config.adv_scale,
        dataset_sha256=dataset_sha,
    )
    artifacts.write_loss_curves(out / "loss_curves.csv", result.history)
    artifacts.write_json(
        out / "run_manifest.json",
        {
            "config": config_as_dict(config),
            "seed": train_config.seed,
            "dataset_sha256": dataset_sha,
            "best_epoch": result.best_epoch,
            "epochs_run": len(result.history),
        },
    )
    if result.history:
        best = next(
            (r for r in result.history if r.epoch == result.best_epoch),
            result.history[-1],
        )
        print(
            f"trained {len(result.history)} epochs (mode={train_config.mode}), "
            f"best epoch {result.best_epoch}, val acc {best.val_acc:.2f}"
        )
    else:
        print("trained 0 epochs; checkpoint holds the seeded initialization")


def cmd_train(args) -> int:
    config = _load_run_config(args)
    out = _out_dir(config)
    dataset_path = _require(out / DATASET_FILE, "dataset")
    dataset = artifacts.load_dataset(dataset_path)
    sha = artifacts.file_sha256(dataset_path)
    _train_once(config, dataset, out, sha)
    return EXIT_OK


def cmd_grid(args) -> int:
    config = _load_run_config(args)
    out = _out_dir(config)
    dataset_path = _require(out / DATASET_FILE, "dataset")
    dataset = artifacts.load_dataset(dataset_path)
    grid = config.grid_spec()

    max_lag = max(grid.lags)
    if dataset.lag < max_lag:
        raise ArtifactMismatchError(
            f"dataset was built with lag {dataset.lag} but the grid needs up to "
            f"{max_lag}; rebuild with data.lag >= {max_lag}"
        )

    x_train, y_train = dataset.arrays("train")
    x_val, y_val = dataset.arrays("val")

    def data_for_lag(lag: int):
        # Shorter windows are suffixes of the stored ones, so every grid
        # cell sees the same anchors and labels.
        return x_train[:, -lag:, :], y_train, x_val[:, -lag:, :], y_val

    base = dataclasses.replace(config.train_config(), epochs=config.grid_epochs)
    result = grid_search(grid, data_for_lag, base, feat_dim=FEATURE_DIM)

    artifacts.write_grid_csv(out / "grid_results.csv", result.cells)
    best = result.best
    best_config = dataclasses.replace(config)
    best_config.hidden_size = best.hidden_size
    best_config.map_size = best.hidden_size
    best_config.att_size = best.hidden_size
    best_config.lag = best.lag
    best_config.l2_coef = best.l2_coef
    best_config.adv_weight = best.adv_weight
    best_config.adv_scale = best.adv_scale
    best_config.mode = "adversarial"
    (out / "best_config.cfg").write_text(dump_config(best_config))
    print(
        f"grid: {len(result.cells)} cells; best hidden={best.hidden_size} "
        f"lag={best.lag} l2={best.l2_coef} adv_weight={best.adv_weight} "
        f"adv_scale={best.adv_scale} val_acc={best.val_acc:.2f}"
    )
    return EXIT_OK


def _load_checkpoint_for(dataset, dataset_sha: str, path: Path):
    params, dims, meta = artifacts.load_checkpoint(path)
    if dims.feat_dim != FEATURE_DIM:
        raise ArtifactMismatchError(
            f"checkpoint expects {dims.feat_dim} features, dataset has {FEATURE_DIM}"
        )
    if int(meta.get("lag", -1)) != dataset.lag:
        raise ArtifactMismatchError(
            f"checkpoint was trained at lag {meta.get('lag')}, dataset has lag {dataset.lag}"
        )
    recorded = meta.get("dataset_sha256")
    if recorded is not None and recorded != dataset_sha:
        raise ArtifactMismatchError(
            "checkpoint was trained on a different dataset "
            f"(recorded {recorded[:12]}.., found {dataset_sha[:12]}..)"
        )
    return params, meta


def _test_records(dataset, params) -> tuple[list[PredictionRecord], np.ndarray, np.ndarray]:
    x_test, y_test = dataset.arrays("test")
    if y_test.size == 0:
        raise ContractError("test split is empty; nothing to evaluate")
    yhat = predict(x_test, params)
    pred = classify(yhat)
    records = [
        PredictionRecord(
            stock=ex.stock_id,
            date=ex.anchor_date.isoformat(),
            label=ex.label,
            confidence=float(yhat[i]),
            predicted=int(pred[i]),
        )
        for i, ex in enumerate(dataset.splits.test)
    ]
    return records, y_test, yhat


def _baseline_predictions(dataset, config: RunConfig) -> tuple[np.ndarray, np.ndarray]:
    indicators = config.indicator_config()
    s_idx = dataset.stock_idx["test"]
    a_idx = dataset.anchor_idx["test"]
    mom = np.empty(s_idx.size, dtype=np.int64)
    mr = np.empty(s_idx.size, dtype=np.int64)
    for i in range(s_idx.size):
        series = dataset.adj_close[s_idx[i]]
        mom[i] = baselines.mom_predict(series, int(a_idx[i]), indicators.mom_window)
        mr[i] = baselines.mr_predict(series, int(a_idx[i]), indicators.mr_window)
    return mom, mr


def _ri_percent(model_score: float, baseline_score: float) -> float | None:
    """Relative improvement of the model over a baseline, in percent."""
    if baseline_score <= 0:
        return None
    return 100.0 * (model_score - baseline_score) / baseline_score


def cmd_eval(args) -> int:
    config = _load_run_config(args)
    out = _out_dir(config)
    dataset_path = _require(out / DATASET_FILE, "dataset")
    checkpoint_path = _require(
        Path(args.checkpoint) if args.checkpoint else out / CHECKPOINT_FILE, "checkpoint"
    )
    dataset = artifacts.load_dataset(dataset_path)
    sha = artifacts.file_sha256(dataset_path)
    params, _ = _load_checkpoint_for(dataset, sha, checkpoint_path)

    records, y_test, yhat = _test_records(dataset, params)
    pred = np.array([r.predicted for r in records])
    mom_pred, mr_pred = _baseline_predictions(dataset, config)

    scores = {
        "mom": (accuracy(y_test, mom_pred), mcc(y_test, mom_pred)),
        "mr": (accuracy(y_test, mr_pred), mcc(y_test, mr_pred)),
        "model": (accuracy(y_test, pred), mcc(y_test, pred)),
    }
    best_acc = max(scores["mom"][0], scores["mr"][0])
    best_mcc = max(scores["mom"][1], scores["mr"][1])
    ri_acc = _ri_percent(scores["model"][0], best_acc)
    ri_mcc = _ri_percent(scores["model"][1], best_mcc)

    rows = [(name, acc_val, mcc_val) for name, (acc_val, mcc_val) in scores.items()]
    rows.append(("ri_pct", ri_acc, ri_mcc))
    artifacts.write_metrics_csv(out / "metrics.csv", rows)
    artifacts.write_predictions_csv(out / "predictions.csv", records)
    artifacts.write_histogram_csv(
        out / "confidence_histogram.csv", confidence_histogram(yhat, bins=20)
    )

    print(f"{'name':<8} {'acc':>8} {'mcc':>8}")
    for name, (acc_val, mcc_val) in scores.items():
        print(f"{name:<8} {acc_val:>8.2f} {mcc_val:>8.4f}")
    ri_acc_text = "n/a" if ri_acc is None else f"{ri_acc:.2f}%"
    ri_mcc_text = "n/a" if ri_mcc is None else f"{ri_mcc:.2f}%"
    print(f"{'ri':<8} {ri_acc_text:>8} {ri_mcc_text:>8}")
    return EXIT_OK


def cmd_attack(args) -> int:
    config = _load_run_config(args)
    out = _out_dir(config)
    dataset_path = _require(out / DATASET_FILE, "dataset")
    checkpoint_path = _require(
        Path(args.checkpoint) if args.checkpoint else out / CHECKPOINT_FILE, "checkpoint"
    )
    dataset = artifacts.load_dataset(dataset_path)
    sha = artifacts.file_sha256(dataset_path)
    params, meta = _load_checkpoint_for(dataset, sha, checkpoint_path)

    if args.scale is not None:
        eps = args.scale
    elif config.attack_scale is not None:
        eps = config.attack_scale
    else:
        eps = float(meta.get("adv_scale", 0.0))
    if eps < 0:
        raise ConfigError(f"attack scale must be >= 0, got {eps}")

    x_test, y_test = dataset.arrays("test")
    if y_test.size == 0:
        raise ContractError("test split is empty; nothing to attack")
    clean_yhat, attacked_yhat = attacked_confidences(x_test, y_test, params, eps)
    clean_pred = classify(clean_yhat)
    attacked_pred = classify(attacked_yhat)

    rows = []
    print(f"attack scale: {eps}")
    for name, fn in (("acc", accuracy), ("mcc", mcc)):
        clean_score = fn(y_test, clean_pred)
        attacked_score = fn(y_test, attacked_pred)
        drop = rpd(clean_score, attacked_score)
        rows.append((name, clean_score, attacked_score, drop))
        drop_text = "n/a" if drop is None else f"{drop:+.4f}"
        print(f"{name}: clean {clean_score:.4f} attacked {attacked_score:.4f} rpd {drop_text}")
    artifacts.write_attack_csv(out / "attack_report.csv", rows)
    return EXIT_OK


def cmd_report(args) -> int:
    config = _load_run_config(args)
    out = _out_dir(config)
    if not args.inputs:
        raise ConfigError("report needs at least one metrics.csv path")
    values: dict[tuple[str, str], list[float]] = {}
    order: list[tuple[str, str]] = []
    for path in args.inputs:
        for row in artifacts.read_metrics_csv(_require(Path(path), "metrics file")):
            for metric in ("acc", "mcc"):
                cell = row[metric]
                if cell == "":
                    continue
                key = (row["name"], metric)
                if key not in values:
                    values[key] = []
                    order.append(key)
                values[key].append(float(cell))
    summaries = multi_run_report({key: vals for key, vals in values.items()})
    rows = []
    for key in order:
        name, metric = key
        s = summaries[key]
        rows.append((name, metric, s.mean, s.std, s.n_runs))
        print(f"{name} {metric}: {s} over {s.n_runs} run(s)")
    artifacts.write_summary_csv(out / "summary.csv", rows)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="advalstm",
        description="Adversarially trained attentive LSTM for stock movement prediction.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, handler, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="path to a key=value run config")
        p.add_argument("--seed", type=int, default=None, help="override train.seed")
        p.add_argument("--out", help="override out.dir")
        p.set_defaults(handler=handler)
        return p

    add("build", cmd_build, "ingest price CSVs and write the dataset container")
    add("train", cmd_train, "train a model on the built dataset")
    add("grid", cmd_grid, "two-stage hyperparameter search")
    p_eval = add("eval", cmd_eval, "evaluate a checkpoint against the baselines")
    p_eval.add_argument("checkpoint", nargs="?", help="checkpoint path (default: <out>/model.ckpt)")
    p_attack = add("attack", cmd_attack, "clean vs attacked metrics for a checkpoint")
    p_attack.add_argument("checkpoint", nargs="?", help="checkpoint path (default: <out>/model.ckpt)")
    p_attack.add_argument("--scale", type=float, default=None, help="perturbation radius")
    p_report = add("report", cmd_report, "aggregate metrics files into mean +- std")
    p_report.add_argument("inputs", nargs="*", help="metrics.csv files from repeated runs")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except (ArtifactMismatchError, ShapeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except (
        ConfigError,
        ParseError,
        DataError,
        WindowError,
        ContractError,
        AdvAlstmError,
        FileNotFoundError,
        NotADirectoryError,
        PermissionError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
