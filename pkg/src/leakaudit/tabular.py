"""Structured-covariate preprocessing and early-fusion concatenation.

Imputation means and z-score statistics are computed on the training split
only and then applied unchanged to validation/test rows. Scaling uses the
population standard deviation; zero-variance columns carry a sentinel std
of 1 so constant values map to 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError
from .io_utils import read_json, write_json
from .textprep import DocVector


@dataclass
class TabularPipeline:
    column_order: tuple[str, ...]
    impute_means: np.ndarray
    scale_means: np.ndarray
    scale_stds: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.column_order)

    def save(self, path: str | Path) -> None:
        write_json(path, {
            "column_order": list(self.column_order),
            "impute_means": [float(v) for v in self.impute_means],
            "scale_means": [float(v) for v in self.scale_means],
            "scale_stds": [float(v) for v in self.scale_stds],
        })

    @classmethod
    def load(cls, path: str | Path) -> "TabularPipeline":
        raw = read_json(path)
        return cls(
            column_order=tuple(raw["column_order"]),
            impute_means=np.asarray(raw["impute_means"], dtype=float),
            scale_means=np.asarray(raw["scale_means"], dtype=float),
            scale_stds=np.asarray(raw["scale_stds"], dtype=float),
        )


def fit_tabular(train_rows: list[dict[str, float | None]]) -> TabularPipeline:
    """Fit imputation and scaling statistics on training rows only."""
    if not train_rows:
        raise DataError("cannot fit tabular pipeline on zero rows")
    columns = sorted({name for row in train_rows for name in row})
    n = len(train_rows)
    impute_means = np.zeros(len(columns))
    imputed = np.zeros((n, len(columns)))
    for j, name in enumerate(columns):
        observed = [row[name] for row in train_rows if row.get(name) is not None]
        if not observed:
            raise DataError(f"column '{name}' has no observed training values")
        for value in observed:
            if not np.isfinite(value):
                raise DataError(f"column '{name}' contains a non-finite value")
        mean = float(np.mean(observed))
        impute_means[j] = mean
        for i, row in enumerate(train_rows):
            value = row.get(name)
            imputed[i, j] = mean if value is None else float(value)
    scale_means = imputed.mean(axis=0)
    scale_stds = imputed.std(axis=0)  # population estimator
    scale_stds[scale_stds == 0.0] = 1.0
    return TabularPipeline(
        column_order=tuple(columns),
        impute_means=impute_means,
        scale_means=scale_means,
        scale_stds=scale_stds,
    )


def transform_tabular(pipeline: TabularPipeline, row: dict[str, float | None]) -> np.ndarray:
    """Impute with training means, then z-score with training statistics."""
    unknown = set(row) - set(pipeline.column_order)
    if unknown:
        raise DataError(f"unknown structured columns (schema drift): {sorted(unknown)}")
    out = np.empty(pipeline.dim)
    for j, name in enumerate(pipeline.column_order):
        value = row.get(name)
        out[j] = pipeline.impute_means[j] if value is None else float(value)
    return (out - pipeline.scale_means) / pipeline.scale_stds


def transform_table(pipeline: TabularPipeline, rows: list[dict[str, float | None]]) -> np.ndarray:
    if not rows:
        return np.zeros((0, pipeline.dim))
    return np.vstack([transform_tabular(pipeline, row) for row in rows])


def fuse(
    structured_vec: np.ndarray,
    text_vec: DocVector | np.ndarray,
    expected_dim: int | None = None,
) -> np.ndarray:
    """Dense (structured ++ text) row; blocks are copied verbatim."""
    dense_text = text_vec.to_dense() if isinstance(text_vec, DocVector) else np.asarray(text_vec, dtype=float)
    structured_vec = np.asarray(structured_vec, dtype=float)
    row = np.concatenate([structured_vec, dense_text])
    if expected_dim is not None and row.shape[0] != expected_dim:
        raise DataError(
            f"fused dimension {row.shape[0]} does not match dataset schema {expected_dim}"
        )
    return row
