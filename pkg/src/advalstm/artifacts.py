"""On-disk artifacts: a binary tensor container, CSV reports, and JSON
manifests.

The container is self-describing and deterministic: magic bytes, a
length-prefixed JSON header (sorted keys) listing metadata and a tensor
manifest, then each tensor's raw little-endian row-major bytes in
manifest order.  Writing the same payload twice yields byte-identical
files; no timestamps are ever stored.  CSV floats are written with
repr() so values round-trip exactly.
"""

from __future__ import annotations

import csv
import datetime as dt
import hashlib
import json
import struct
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ArtifactMismatchError
from .evaluation import HistogramReport, PredictionRecord
from .market_data import FEATURE_DIM, DatasetSplits, Example, SplitSpec, stack_examples
from .model import ModelDims, PARAM_FIELDS, ParamSet

MAGIC = b"ADVALSTM"
FORMAT_VERSION = 1

SPLIT_NAMES = ("train", "val", "test")


# ---------------------------------------------------------------- container


def write_container(path: str | Path, meta: dict, tensors: dict[str, np.ndarray]) -> None:
    """Write metadata plus named tensors; same payload -> same bytes."""
    manifest = []
    blobs = []
    for name in sorted(tensors):
        a = np.ascontiguousarray(tensors[name])
        dtype = a.dtype.newbyteorder("<")
        manifest.append(
            {"dtype": dtype.str, "name": name, "shape": list(a.shape)}
        )
        blobs.append(a.astype(dtype, copy=False).tobytes(order="C"))
    header = json.dumps(
        {"format_version": FORMAT_VERSION, "meta": meta, "tensors": manifest},
        sort_keys=True,
        separators=(",", ":"),
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        for blob in blobs:
            fh.write(blob)


def read_container(path: str | Path) -> tuple[dict, dict[str, np.ndarray]]:
    """Read a container back; raises ArtifactMismatchError on corruption."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < len(MAGIC) + 4 or raw[: len(MAGIC)] != MAGIC:
        raise ArtifactMismatchError(f"{path}: not a recognized artifact container")
    (header_len,) = struct.unpack_from("<I", raw, len(MAGIC))
    start = len(MAGIC) + 4
    if start + header_len > len(raw):
        raise ArtifactMismatchError(f"{path}: truncated header")
    try:
        header = json.loads(raw[start : start + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ArtifactMismatchError(f"{path}: unreadable header: {exc}") from exc
    if header.get("format_version") != FORMAT_VERSION:
        raise ArtifactMismatchError(
            f"{path}: unsupported format version {header.get('format_version')!r}"
        )
    tensors: dict[str, np.ndarray] = {}
    offset = start + header_len
    for entry in header.get("tensors", []):
        dtype = np.dtype(entry["dtype"])
        shape = tuple(entry["shape"])
        nbytes = dtype.itemsize * int(np.prod(shape, dtype=np.int64))
        if offset + nbytes > len(raw):
            raise ArtifactMismatchError(f"{path}: truncated tensor {entry['name']!r}")
        tensors[entry["name"]] = np.frombuffer(
            raw, dtype=dtype, count=nbytes // dtype.itemsize, offset=offset
        ).reshape(shape).copy()
        offset += nbytes
    if offset != len(raw):
        raise ArtifactMismatchError(f"{path}: {len(raw) - offset} trailing bytes")
    return header["meta"], tensors


def file_sha256(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


# --------------------------------------------------------------- checkpoint


def save_checkpoint(
    path: str | Path,
    params: ParamSet,
    *,
    lag: int,
    seed: int,
    mode: str,
    best_epoch: int,
    adv_scale: float = 0.0,
    dataset_sha256: str | None = None,
) -> None:
    dims = params.dims
    meta = {
        "kind": "checkpoint",
        "feat_dim": dims.feat_dim,
        "map_size": dims.map_size,
        "hidden_size": dims.hidden_size,
        "att_size": dims.att_size,
        "lag": lag,
        "seed": seed,
        "mode": mode,
        "best_epoch": best_epoch,
        "adv_scale": adv_scale,
        "dataset_sha256": dataset_sha256,
    }
    tensors = {name: np.asarray(a, dtype=np.float64) for name, a in params.items()}
    write_container(path, meta, tensors)


def load_checkpoint(path: str | Path) -> tuple[ParamSet, ModelDims, dict]:
    meta, tensors = read_container(path)
    if meta.get("kind") != "checkpoint":
        raise ArtifactMismatchError(f"{path}: not a checkpoint (kind={meta.get('kind')!r})")
    missing = [name for name in PARAM_FIELDS if name not in tensors]
    if missing:
        raise ArtifactMismatchError(f"{path}: checkpoint missing tensors {missing}")
    params = ParamSet(**{name: tensors[name] for name in PARAM_FIELDS})
    dims = ModelDims(
        feat_dim=int(meta["feat_dim"]),
        map_size=int(meta["map_size"]),
        hidden_size=int(meta["hidden_size"]),
        att_size=int(meta["att_size"]),
    )
    if params.dims != dims:
        raise ArtifactMismatchError(f"{path}: tensor shapes disagree with recorded sizes")
    return params, dims, meta


# ------------------------------------------------------------------ dataset


class DatasetArtifact:
    """In-memory view of a stored dataset: splits plus aligned prices."""

    def __init__(
        self,
        splits: DatasetSplits,
        stocks: list[str],
        calendar: list[dt.date],
        adj_close: np.ndarray,
        anchor_idx: dict[str, np.ndarray],
        stock_idx: dict[str, np.ndarray],
        meta: dict,
    ):
        self.splits = splits
        self.stocks = stocks
        self.calendar = calendar
        self.adj_close = adj_close          # (n_stocks, n_days)
        self.anchor_idx = anchor_idx        # split -> (n,) calendar indices
        self.stock_idx = stock_idx          # split -> (n,) stock indices
        self.meta = meta

    @property
    def lag(self) -> int:
        return int(self.meta["lag"])

    def arrays(self, split: str) -> tuple[np.ndarray, np.ndarray]:
        return stack_examples(getattr(self.splits, split))


def save_dataset(
    path: str | Path,
    splits: DatasetSplits,
    spec: SplitSpec,
    stocks: Sequence[str],
    calendar: Sequence[dt.date],
    adj_close: np.ndarray,
    dropped: Sequence[str] = (),
) -> None:
    stock_pos = {s: i for i, s in enumerate(stocks)}
    date_pos = {d: i for i, d in enumerate(calendar)}
    meta = {
        "kind": "dataset",
        "lag": spec.lag,
        "train_end": spec.train_end.isoformat(),
        "val_end": spec.val_end.isoformat(),
        "test_end": spec.test_end.isoformat(),
        "pos_threshold": spec.pos_threshold,
        "neg_threshold": spec.neg_threshold,
        "stocks": list(stocks),
        "dropped": list(dropped),
        "calendar": [d.isoformat() for d in calendar],
        "feat_dim": FEATURE_DIM,
    }
    tensors: dict[str, np.ndarray] = {
        "adj_close": np.asarray(adj_close, dtype=np.float64)
    }
    for split in SPLIT_NAMES:
        examples: list[Example] = getattr(splits, split)
        if examples:
            windows = np.stack([ex.window for ex in examples]).astype(np.float64)
        else:
            windows = np.zeros((0, spec.lag, FEATURE_DIM))
        tensors[f"{split}_windows"] = windows
        tensors[f"{split}_labels"] = np.array(
            [ex.label for ex in examples], dtype=np.int8
        )
        tensors[f"{split}_movement"] = np.array(
            [ex.movement_percent for ex in examples], dtype=np.float64
        )
        tensors[f"{split}_stock_idx"] = np.array(
            [stock_pos[ex.stock_id] for ex in examples], dtype=np.int32
        )
        tensors[f"{split}_anchor_idx"] = np.array(
            [date_pos[ex.anchor_date] for ex in examples], dtype=np.int32
        )
    write_container(path, meta, tensors)


def load_dataset(path: str | Path) -> DatasetArtifact:
    meta, tensors = read_container(path)
    if meta.get("kind") != "dataset":
        raise ArtifactMismatchError(f"{path}: not a dataset (kind={meta.get('kind')!r})")
    stocks = list(meta["stocks"])
    calendar = [dt.date.fromisoformat(s) for s in meta["calendar"]]
    split_lists: dict[str, list[Example]] = {}
    anchor_idx: dict[str, np.ndarray] = {}
    stock_idx: dict[str, np.ndarray] = {}
    for split in SPLIT_NAMES:
        windows = tensors[f"{split}_windows"]
        labels = tensors[f"{split}_labels"]
        movement = tensors[f"{split}_movement"]
        s_idx = tensors[f"{split}_stock_idx"]
        a_idx = tensors[f"{split}_anchor_idx"]
        n = labels.shape[0]
        if not (windows.shape[0] == movement.shape[0] == s_idx.shape[0] == a_idx.shape[0] == n):
            raise ArtifactMismatchError(f"{path}: inconsistent {split} split sizes")
        split_lists[split] = [
            Example(
                stock_id=stocks[s_idx[i]],
                anchor_date=calendar[a_idx[i]],
                window=windows[i],
                label=int(labels[i]),
                movement_percent=float(movement[i]),
            )
            for i in range(n)
        ]
        anchor_idx[split] = a_idx.astype(np.int64)
        stock_idx[split] = s_idx.astype(np.int64)
    splits = DatasetSplits(
        train=split_lists["train"], val=split_lists["val"], test=split_lists["test"]
    )
    return DatasetArtifact(
        splits=splits,
        stocks=stocks,
        calendar=calendar,
        adj_close=tensors["adj_close"],
        anchor_idx=anchor_idx,
        stock_idx=stock_idx,
        meta=meta,
    )


# -------------------------------------------------------------- CSV reports


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def write_loss_curves(path: str | Path, history) -> None:
    _write_csv(
        path,
        ("epoch", "train_loss", "val_loss", "val_acc"),
        ((r.epoch, r.train_loss, r.val_loss, r.val_acc) for r in history),
    )


def write_grid_csv(path: str | Path, cells) -> None:
    _write_csv(
        path,
        ("U", "T", "lambda", "beta", "epsilon", "val_acc", "val_mcc"),
        (
            (c.hidden_size, c.lag, c.l2_coef, c.adv_weight, c.adv_scale, c.val_acc, c.val_mcc)
            for c in cells
        ),
    )


def write_predictions_csv(path: str | Path, records: Iterable[PredictionRecord]) -> None:
    _write_csv(
        path,
        ("stock", "date", "label", "confidence", "predicted"),
        ((r.stock, r.date, r.label, r.confidence, r.predicted) for r in records),
    )


def write_histogram_csv(path: str | Path, hist: HistogramReport) -> None:
    _write_csv(path, ("bin_low", "bin_high", "count"), hist.rows())


def write_metrics_csv(path: str | Path, rows: Iterable[Sequence]) -> None:
    """Comparison table: one row per predictor plus a relative-improvement row."""
    _write_csv(path, ("name", "acc", "mcc"), rows)


def write_attack_csv(path: str | Path, rows: Iterable[Sequence]) -> None:
    _write_csv(path, ("metric", "clean", "attacked", "rpd"), rows)


def write_summary_csv(path: str | Path, rows: Iterable[Sequence]) -> None:
    _write_csv(path, ("name", "metric", "mean", "std", "runs"), rows)


def write_json(path: str | Path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2)
        fh.write("\n")


def read_metrics_csv(path: str | Path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["name", "acc", "mcc"]:
            raise ArtifactMismatchError(
                f"{path}: expected metrics header name,acc,mcc, got {reader.fieldnames}"
            )
        return list(reader)
