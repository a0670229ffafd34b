import math
import os
import re

import numpy as np
import pandas as pd
from loguru import logger

from ...errors import DatasetError


class Dataset:
    """samples: f32 [n, channels, length]; labels: int64 [n]."""

    def __init__(self, samples, labels, class_count):
        samples = np.asarray(samples, dtype=np.float32)
        labels = np.asarray(labels, dtype=np.int64)
        if samples.ndim == 2:
            samples = samples[:, None, :]
        if samples.ndim != 3:
            raise DatasetError(f"samples must be [n, channels, length], got shape {samples.shape}")
        if samples.shape[0] < 1:
            raise DatasetError("dataset is empty")
        if labels.shape != (samples.shape[0],):
            raise DatasetError(f"{labels.shape[0]} labels for {samples.shape[0]} samples")
        if labels.min() < 0 or labels.max() >= class_count:
            raise DatasetError(f"labels must lie in [0, {class_count})")
        self.samples = samples
        self.labels = labels
        self.class_count = int(class_count)

    def __len__(self):
        return self.samples.shape[0]

    @property
    def input_shape(self):
        return tuple(self.samples.shape[1:])

    def subset(self, indices):
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(self.samples[indices], self.labels[indices], self.class_count)

    def class_counts(self):
        return np.bincount(self.labels, minlength=self.class_count)


def load_csv(path, class_count=None) -> Dataset:
    """Rows are `label, f1, ..., fL`; blank lines are skipped. Errors name the 1-based row."""
    if not os.path.exists(path):
        raise DatasetError(f"dataset file not found: {path}")
    try:
        frame = pd.read_csv(path, header=None, dtype=str, skip_blank_lines=False, skipinitialspace=True)
    except pd.errors.EmptyDataError:
        raise DatasetError(f"no rows in {path}") from None
    except pd.errors.ParserError as e:
        # a row wider than the first one; pandas reports the 1-based file line
        found = re.search(r"line (\d+)", str(e))
        raise DatasetError(f"ragged row ({e})", row=int(found.group(1)) if found else None) from e

    frame.index = np.arange(1, len(frame) + 1)
    frame = frame.dropna(how="all")
    if frame.empty:
        raise DatasetError(f"no rows in {path}")
    width = frame.shape[1]
    if width < 2:
        raise DatasetError("need a label and at least one feature", row=int(frame.index[0]))
    ragged = frame.isna().any(axis=1)
    if ragged.any():
        row = int(frame.index[ragged.argmax()])
        raise DatasetError(f"expected {width} cells, found {int(frame.loc[row].notna().sum())}", row=row)

    values = frame.apply(pd.to_numeric, errors="coerce").astype(np.float64)
    values = values.where(np.isfinite(values))
    non_numeric = values.isna().any(axis=1)
    if non_numeric.any():
        row = int(values.index[non_numeric.argmax()])
        cell = frame.loc[row][values.loc[row].isna()].iloc[0]
        raise DatasetError(f"non-numeric cell '{cell}'", row=row)
    labels = values[0]
    fractional = labels != labels.round()
    if fractional.any():
        row = int(labels.index[fractional.argmax()])
        raise DatasetError(f"label {labels.loc[row]} is not a class index", row=row)
    outside = labels < 0
    if class_count is not None:
        outside |= labels >= class_count
    if outside.any():
        row = int(labels.index[outside.argmax()])
        raise DatasetError(f"label {int(labels.loc[row])} outside [0, {class_count})", row=row)

    labels = labels.to_numpy(dtype=np.int64)
    if class_count is None:
        class_count = int(labels.max()) + 1
    samples = values.iloc[:, 1:].to_numpy(dtype=np.float32)
    logger.info("Loaded {n} samples of length {length} from {path}", n=len(samples), length=width - 1, path=path)
    return Dataset(samples[:, None, :], labels, class_count)


# Neighbouring classes are a quarter cycle apart over the window, so templates overlap strongly
# and the default noise keeps the task short of trivially separable.
BASE_CYCLES = 2.0
CYCLE_STEP = 0.25


def class_templates(classes, length):
    """One sinusoid per class with class-dependent frequency and phase, [classes, length]."""
    t = np.arange(length, dtype=np.float64) / length
    rows = []
    for c in range(classes):
        freq = BASE_CYCLES + CYCLE_STEP * c
        phase = math.pi * c / (4 * classes)
        rows.append(np.sin(2 * math.pi * freq * t + phase))
    return np.stack(rows)


def synth_sequences(n, classes, length, noise_std, seed) -> Dataset:
    if n < classes:
        raise DatasetError(f"need at least one sample per class (n={n}, classes={classes})")
    if length < 8:
        raise DatasetError(f"sequence length must be >= 8, got {length}")
    rng = np.random.default_rng(seed)
    labels = rng.permutation(np.arange(n) % classes)
    templates = class_templates(classes, length)
    noise = rng.normal(0.0, noise_std, size=(n, length)) if noise_std > 0 else np.zeros((n, length))
    samples = templates[labels] + noise
    return Dataset(samples.astype(np.float32)[:, None, :], labels, classes)


def train_test_split(dataset: Dataset, test_fraction=0.5, seed=0):
    if not 0 < test_fraction < 1:
        raise DatasetError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    n = len(dataset)
    n_test = int(round(n * test_fraction))
    n_test = min(max(n_test, 1), n - 1)
    order = np.random.default_rng(seed).permutation(n)
    return dataset.subset(np.sort(order[n_test:])), dataset.subset(np.sort(order[:n_test]))
