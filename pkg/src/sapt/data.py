"""Dataset loading, normalization, stratified splitting and the registry.

CSV convention: comma separated, no header unless asked to skip one,
feature columns first and one integer class label last. Features are
kept raw by load_csv; split() computes min-max statistics on the train
rows and applies them to both splits.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .bnn import NetworkTopology
from .exceptions import ConfigError, ContractError, DataFormatError

DEFAULT_TRAIN_FRACTION = 0.6


@dataclass(frozen=True)
class Dataset:
    """Immutable feature matrix with integer labels and one-hot targets."""

    features: np.ndarray   # N x I float64
    labels: np.ndarray     # N ints in 0..K-1
    one_hot: np.ndarray    # N x K
    name: str = ""
    split: str = ""        # "", "train" or "test"

    def __post_init__(self):
        if self.features.ndim != 2 or self.features.shape[0] < 1:
            raise ContractError("dataset needs at least one sample row")
        if not np.all(np.isfinite(self.features)):
            raise ContractError("dataset features must be finite")
        n, k = self.one_hot.shape
        if n != self.features.shape[0] or self.labels.shape != (n,):
            raise ContractError("features, labels and one-hot row counts differ")
        if self.labels.min() < 0 or self.labels.max() >= k:
            raise ContractError("labels outside 0..K-1")

    @property
    def sample_count(self) -> int:
        return self.features.shape[0]

    @property
    def class_count(self) -> int:
        return self.one_hot.shape[1]

    @property
    def feature_count(self) -> int:
        return self.features.shape[1]


def one_hot(labels, class_count: int) -> np.ndarray:
    """Indicator matrix: row t has a single 1 in column labels[t]."""
    labels = np.asarray(labels)
    if labels.ndim != 1:
        raise ContractError(f"labels must be 1-d, got shape {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= class_count):
        raise DataFormatError(
            f"label outside 0..{class_count - 1}: "
            f"min {labels.min()}, max {labels.max()}"
        )
    z = np.zeros((labels.size, class_count), dtype=np.float64)
    z[np.arange(labels.size), labels] = 1.0
    return z


def make_dataset(features, labels, class_count: int, name: str = "",
                 split: str = "") -> Dataset:
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    return Dataset(features, labels, one_hot(labels, class_count), name, split)


def load_csv(path, feature_count: int, class_count: int,
             skip_header: bool = False, name: str = "") -> Dataset:
    """Parse a label-last CSV file into an unnormalized Dataset."""
    path = Path(path)
    if not path.exists():
        raise DataFormatError(f"dataset file not found: {path}")
    rows = []
    labels = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if skip_header and lineno == 1:
                continue
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != feature_count + 1:
                raise DataFormatError(
                    f"{path}:{lineno}: expected {feature_count + 1} columns, "
                    f"got {len(parts)}"
                )
            try:
                feats = [float(p) for p in parts[:-1]]
                raw_label = float(parts[-1])
            except ValueError:
                raise DataFormatError(
                    f"{path}:{lineno}: non-numeric field in {line!r}"
                ) from None
            if raw_label != int(raw_label):
                raise DataFormatError(
                    f"{path}:{lineno}: label {parts[-1]!r} is not an integer"
                )
            label = int(raw_label)
            if not 0 <= label < class_count:
                raise DataFormatError(
                    f"{path}:{lineno}: label {label} outside 0..{class_count - 1}"
                )
            rows.append(feats)
            labels.append(label)
    if not rows:
        raise DataFormatError(f"{path}: no data rows")
    features = np.asarray(rows, dtype=np.float64)
    if not np.all(np.isfinite(features)):
        raise DataFormatError(f"{path}: non-finite feature value")
    return make_dataset(features, labels, class_count, name=name or path.stem)


def save_csv(dataset: Dataset, path) -> None:
    """Write a Dataset back out in the label-last CSV convention.

    Floats use repr precision so a parse/serialize/parse round trip is
    bit-exact.
    """
    with open(path, "w") as fh:
        for feats, label in zip(dataset.features, dataset.labels):
            cols = [f"{x:.17g}" for x in feats] + [str(int(label))]
            fh.write(",".join(cols) + "\n")


@dataclass(frozen=True)
class FeatureStats:
    """Per-column min and range used for min-max scaling."""

    lo: np.ndarray
    span: np.ndarray


def feature_stats(features: np.ndarray) -> FeatureStats:
    lo = features.min(axis=0)
    return FeatureStats(lo=lo, span=features.max(axis=0) - lo)


def normalize(dataset: Dataset, stats: FeatureStats) -> Dataset:
    """Min-max scale each column with the given statistics.

    Columns with zero range map to 0 everywhere (divide-by-zero guard).
    """
    safe_span = np.where(stats.span > 0, stats.span, 1.0)
    scaled = np.where(stats.span > 0,
                      (dataset.features - stats.lo) / safe_span,
                      0.0)
    return replace(dataset, features=scaled)


def split(dataset: Dataset, train_fraction: float = DEFAULT_TRAIN_FRACTION,
          seed: int = 0, normalize_features: bool = True):
    """Stratified train/test split, deterministic for a given seed.

    Every class contributes round(train_fraction * count) rows to the
    train side. Normalization statistics come from the train rows only
    and are applied to both splits.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ContractError(f"train_fraction must be in (0,1), got {train_fraction}")
    rng = np.random.default_rng(seed)
    train_idx = []
    test_idx = []
    for cls in range(dataset.class_count):
        idx = np.flatnonzero(dataset.labels == cls)
        perm = rng.permutation(idx)
        n_train = int(round(train_fraction * idx.size))
        if n_train == 0:
            raise DataFormatError(
                f"class {cls} would be absent from the train split "
                f"({idx.size} rows at fraction {train_fraction})"
            )
        train_idx.append(perm[:n_train])
        test_idx.append(perm[n_train:])
    train_idx = np.sort(np.concatenate(train_idx))
    test_idx = np.sort(np.concatenate(test_idx))
    if test_idx.size == 0:
        raise DataFormatError("test split is empty; lower the train fraction")

    def subset(indices, tag):
        return Dataset(dataset.features[indices], dataset.labels[indices],
                       dataset.one_hot[indices], dataset.name, tag)

    train = subset(train_idx, "train")
    test = subset(test_idx, "test")
    if normalize_features:
        stats = feature_stats(train.features)
        train = normalize(train, stats)
        test = normalize(test, stats)
    return train, test


@dataclass(frozen=True)
class RegistryEntry:
    """Per-dataset shape and model sizing, read from the registry file."""

    name: str
    attribute_count: int
    class_count: int
    hidden_units: int
    surrogate_hidden: tuple
    data_file: str
    bundled: bool

    def topology(self) -> NetworkTopology:
        return NetworkTopology(self.attribute_count, self.hidden_units,
                               self.class_count)


def _registry_text() -> str:
    return (resources.files("sapt.datasets") / "registry.cfg").read_text()


def load_registry() -> dict:
    """Parse the packaged registry file into name -> RegistryEntry."""
    parser = configparser.ConfigParser()
    parser.read_string(_registry_text())
    entries = {}
    for section in parser.sections():
        sec = parser[section]
        try:
            entries[section] = RegistryEntry(
                name=section,
                attribute_count=sec.getint("attributes"),
                class_count=sec.getint("classes"),
                hidden_units=sec.getint("hidden_units"),
                surrogate_hidden=(sec.getint("surrogate_h1"),
                                  sec.getint("surrogate_h2")),
                data_file=sec.get("data_file"),
                bundled=sec.getboolean("bundled", fallback=False),
            )
        except (TypeError, ValueError) as exc:
            raise DataFormatError(f"registry section [{section}]: {exc}") from None
    return entries


def registry_entry(name: str) -> RegistryEntry:
    entries = load_registry()
    if name not in entries:
        known = ", ".join(sorted(entries))
        raise ConfigError(f"unknown dataset {name!r}; registry has: {known}")
    return entries[name]


def resolve_data_file(entry: RegistryEntry) -> Path:
    """Locate a registry dataset file.

    Search order: packaged data directory, $SAPT_DATA_DIR, ./datasets.
    Non-bundled datasets must be fetched first (scripts/fetch_datasets.py).
    """
    packaged = resources.files("sapt.datasets") / entry.data_file
    if packaged.is_file():
        return Path(str(packaged))
    candidates = []
    env_dir = os.environ.get("SAPT_DATA_DIR")
    if env_dir:
        candidates.append(Path(env_dir) / entry.data_file)
    candidates.append(Path("datasets") / entry.data_file)
    for cand in candidates:
        if cand.is_file():
            return cand
    hint = "" if entry.bundled else \
        " (not bundled; run scripts/fetch_datasets.py first)"
    raise DataFormatError(f"no data file {entry.data_file!r} for dataset "
                          f"{entry.name!r}{hint}")


def load_registered(name: str, train_fraction: float = DEFAULT_TRAIN_FRACTION,
                    seed: int = 0):
    """Load a registry dataset and return (entry, train, test)."""
    entry = registry_entry(name)
    path = resolve_data_file(entry)
    full = load_csv(path, entry.attribute_count, entry.class_count, name=name)
    train, test = split(full, train_fraction=train_fraction, seed=seed)
    return entry, train, test
