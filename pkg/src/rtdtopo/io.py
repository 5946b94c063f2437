"""CSV and JSON interchange for clouds, embeddings, barcodes, and runs.

All floats are written with ``repr``, which round-trips float64 exactly.
Infinite interval deaths are written as the string ``inf``.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .fewshot import BaseClassifier, EmbeddingDataset, EpochStats, TrainConfig
from .geometry import PointCloud
from .persistence import Barcode


def _read_rows(path: Path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    try:
        [float(h) for h in header]
    except ValueError:
        pass
    else:
        raise ValueError(f"{path}: header row required, found numeric first row")
    return header, rows[1:]


def _parse_float_block(path: Path, rows: list[list[str]], cols: Sequence[int]) -> np.ndarray:
    out = np.empty((len(rows), len(cols)), dtype=np.float64)
    for r, row in enumerate(rows):
        if len(row) <= max(cols):
            raise ValueError(f"{path}: row {r + 2} has too few columns")
        for c, idx in enumerate(cols):
            try:
                out[r, c] = float(row[idx])
            except ValueError as exc:
                raise ValueError(f"{path}: row {r + 2}, column {idx + 1}: {exc}") from None
    return out


def load_point_cloud(path: str | Path) -> PointCloud:
    """Read a point cloud; a column named ``label`` is ignored."""
    path = Path(path)
    header, rows = _read_rows(path)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    coord_cols = [i for i, name in enumerate(header) if name != "label"]
    if not coord_cols:
        raise ValueError(f"{path}: no coordinate columns")
    return PointCloud(_parse_float_block(path, rows, coord_cols))


def write_point_cloud(cloud: PointCloud, path: str | Path, labels: Optional[np.ndarray] = None) -> None:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        names = [f"x{i}" for i in range(cloud.dim)]
        if labels is not None:
            w.writerow(["label", *names])
            for lab, row in zip(labels, cloud.points):
                w.writerow([int(lab), *[repr(float(x)) for x in row]])
        else:
            w.writerow(names)
            for row in cloud.points:
                w.writerow([repr(float(x)) for x in row])


def load_embeddings(path: str | Path, split: str = "train", class_count: Optional[int] = None) -> EmbeddingDataset:
    """Read an embedding table with a mandatory leading ``label`` column."""
    path = Path(path)
    header, rows = _read_rows(path)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    if "label" not in header:
        raise ValueError(f"{path}: embedding files need a 'label' column")
    lab_col = header.index("label")
    coord_cols = [i for i in range(len(header)) if i != lab_col]
    if not coord_cols:
        raise ValueError(f"{path}: no embedding columns")
    emb = _parse_float_block(path, rows, coord_cols)
    try:
        labels = np.asarray([int(r[lab_col]) for r in rows], dtype=np.int64)
    except ValueError as exc:
        raise ValueError(f"{path}: labels must be integers: {exc}") from None
    if class_count is None:
        class_count = int(labels.max()) + 1
    return EmbeddingDataset(embeddings=emb, labels=labels, class_count=class_count, split=split)


def write_embeddings(ds: EmbeddingDataset, path: str | Path) -> None:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["label", *[f"e{i}" for i in range(ds.dim)]])
        for lab, row in zip(ds.labels, ds.embeddings):
            w.writerow([int(lab), *[repr(float(x)) for x in row]])


def load_base_classifier(path: str | Path) -> BaseClassifier:
    """Read classifier rows; the ``class`` column must run 0..K-1 in order."""
    path = Path(path)
    header, rows = _read_rows(path)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    if "class" not in header:
        raise ValueError(f"{path}: base classifier files need a 'class' column")
    cls_col = header.index("class")
    coord_cols = [i for i in range(len(header)) if i != cls_col]
    classes = [int(r[cls_col]) for r in rows]
    if classes != list(range(len(rows))):
        raise ValueError(f"{path}: class column must be 0..{len(rows) - 1} in order")
    return BaseClassifier(_parse_float_block(path, rows, coord_cols))


def write_base_classifier(base: BaseClassifier, path: str | Path) -> None:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["class", *[f"e{i}" for i in range(base.dim)]])
        for k, row in enumerate(base.weights):
            w.writerow([k, *[repr(float(x)) for x in row]])


def barcode_rows(bc: Barcode) -> list[tuple[int, str, str]]:
    """(dim, birth, death) rows in barcode order, deaths of inf as 'inf'."""
    out = []
    for p in bc.pairs:
        death = "inf" if math.isinf(p.death) else repr(p.death)
        out.append((p.dim, repr(p.birth), death))
    return out


def write_barcode_csv(bc: Barcode, path: str | Path) -> None:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["dim", "birth", "death"])
        for row in barcode_rows(bc):
            w.writerow(row)


def load_barcode_csv(path: str | Path) -> list[tuple[int, float, float]]:
    path = Path(path)
    header, rows = _read_rows(path)
    if header != ["dim", "birth", "death"]:
        raise ValueError(f"{path}: expected header dim,birth,death")
    return [(int(r[0]), float(r[1]), float(r[2])) for r in rows]


@dataclass(frozen=True)
class RunManifest:
    """Paths plus hyperparameters describing one training run.

    Relative paths are interpreted relative to the manifest's directory
    when loaded from disk.
    """

    train_csv: Path
    test_csv: Path
    base_csv: Path
    output_dir: Path
    config: TrainConfig


def _config_to_json(config: TrainConfig) -> dict:
    return {
        "shots": config.shots,
        "epochs": config.epochs,
        "lr": config.lr,
        "lambda": config.lam,
        "lambda_search": config.lambda_search_enabled,
        "alpha": config.alpha,
        "logit_scale": config.logit_scale,
        "seed": config.seed,
        "target_ratio_band": list(config.target_ratio_band),
    }


def _config_from_json(obj: dict) -> TrainConfig:
    kwargs = {}
    mapping = {
        "shots": "shots",
        "epochs": "epochs",
        "lr": "lr",
        "lambda": "lam",
        "lambda_search": "lambda_search_enabled",
        "alpha": "alpha",
        "logit_scale": "logit_scale",
        "seed": "seed",
    }
    for key, attr in mapping.items():
        if key in obj:
            kwargs[attr] = obj[key]
    if "target_ratio_band" in obj:
        band = obj["target_ratio_band"]
        kwargs["target_ratio_band"] = (float(band[0]), float(band[1]))
    return TrainConfig(**kwargs)


def save_manifest(manifest: RunManifest, path: str | Path) -> None:
    path = Path(path)
    obj = {
        "train_csv": str(manifest.train_csv),
        "test_csv": str(manifest.test_csv),
        "base_csv": str(manifest.base_csv),
        "output_dir": str(manifest.output_dir),
        "config": _config_to_json(manifest.config),
    }
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


def load_manifest(path: str | Path) -> RunManifest:
    path = Path(path)
    with open(path) as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: invalid JSON: {exc}") from None
    for key in ("train_csv", "test_csv", "base_csv", "output_dir", "config"):
        if key not in obj:
            raise ValueError(f"{path}: manifest is missing '{key}'")
    root = path.parent

    def resolve(p: str) -> Path:
        q = Path(p)
        return q if q.is_absolute() else root / q

    try:
        config = _config_from_json(obj["config"])
    except TypeError as exc:
        raise ValueError(f"{path}: bad config: {exc}") from None
    return RunManifest(
        train_csv=resolve(obj["train_csv"]),
        test_csv=resolve(obj["test_csv"]),
        base_csv=resolve(obj["base_csv"]),
        output_dir=resolve(obj["output_dir"]),
        config=config,
    )


def write_metrics_csv(history: Sequence[EpochStats], path: str | Path) -> None:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "l_ce", "l_div", "l_total", "train_acc"])
        for h in history:
            w.writerow(
                [h.epoch, repr(h.l_ce), repr(h.l_div), repr(h.l_total), repr(h.train_acc)]
            )


def write_residual_csv(residual: np.ndarray, path: str | Path) -> None:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["class", *[f"e{i}" for i in range(residual.shape[1])]])
        for k, row in enumerate(residual):
            w.writerow([k, *[repr(float(x)) for x in row]])


def load_residual_csv(path: str | Path) -> np.ndarray:
    path = Path(path)
    header, rows = _read_rows(path)
    if not header or header[0] != "class":
        raise ValueError(f"{path}: expected leading 'class' column")
    return _parse_float_block(path, rows, list(range(1, len(header))))


def write_report_json(report: dict, path: str | Path) -> None:
    path = Path(path)
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
