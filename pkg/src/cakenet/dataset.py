"""Filtration experiment records, CSV I/O, synthetic factorial data and z-scoring.

A :class:`Dataset` stores its rows column-wise as a ``(n, 7)`` feature matrix
plus a length ``n`` target vector, always in the canonical column order
:data:`COLUMNS`.  Datasets are immutable; every operation returns a new one.

Synthetic ground truth
----------------------
:func:`ground_truth` is the fixed smooth response used by the synthetic
generator.  With the reference coordinates

    zT = (temperature - 50) / 15          zS = (solid_concentration - 0.29) / 0.09
    zH = (ph - 3.5) / 1.5                 zA = (air_blow_time - 8.5) / 6.5
    zC = (cake_thickness - 24) / 10       zP = (pressure - 6) / 2
    zF = (filtration_time - 30) / 15

the moisture mass fraction is

    g = 0.24 - 0.050 tanh(1.2 zF) - 0.022 tanh(zA) - 0.012 zP
             + 0.020 zC + 0.015 zS - 0.006 zT + 0.004 zH**2

clamped to ``[0.05, 0.45]``.  It decreases with filtration time, air-blow time
and pressure, increases with cake thickness and solid concentration, and has
small temperature and pH terms.  Filtration time carries the largest effect.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import dataclass, fields
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    DegenerateSplit,
    DegenerateTarget,
    EmptyFile,
    InvalidDesign,
    InvalidRecord,
    MissingColumn,
    NonNumericCell,
    SchemaMismatch,
    TooFewRows,
)

FEATURES = (
    "temperature",
    "solid_concentration",
    "ph",
    "air_blow_time",
    "cake_thickness",
    "pressure",
    "filtration_time",
)
TARGET = "cake_moisture"
COLUMNS = FEATURES + (TARGET,)
N_FEATURES = len(FEATURES)
FABRIC_TAGS = ("S1", "S2", "synthetic")

# Factor levels of the laboratory filtration experiments.
LAB_LEVELS = {
    "solid_concentration": (0.2, 0.38),
    "temperature": (35.0, 65.0),
    "ph": (2.0, 3.5, 5.0),
    "air_blow_time": (2.0, 10.0, 15.0),
    "cake_thickness": (14.0, 20.0, 26.0, 34.0),
}

MOISTURE_FLOOR = 0.05
MOISTURE_CEIL = 0.45


@dataclass(frozen=True)
class FilterRun:
    """One pressure-filtration test: seven operating conditions and the measured moisture."""

    temperature: float  # degC
    solid_concentration: float  # g/L
    ph: float
    air_blow_time: float  # min
    cake_thickness: float  # mm
    pressure: float  # bar
    filtration_time: float  # min
    cake_moisture: float  # mass fraction

    def feature_vector(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in FEATURES], dtype=float)

    def check(self):
        values = [getattr(self, f.name) for f in fields(self)]
        if not all(math.isfinite(v) for v in values):
            raise InvalidRecord(f"non-finite value in {self}")
        if not 0.0 <= self.cake_moisture <= 1.0:
            raise InvalidRecord(f"cake_moisture {self.cake_moisture} outside [0, 1]")
        if not 0.0 < self.ph < 14.0:
            raise InvalidRecord(f"ph {self.ph} outside (0, 14)")


class Dataset:
    """Ordered collection of filtration runs with a fixed schema.

    ``normalized`` marks datasets that live in standardized feature space; the
    physical-range invariants of :class:`FilterRun` are only enforced when it
    is false.
    """

    schema = COLUMNS

    def __init__(self, features, target, fabric_tag="synthetic", normalized=False):
        features = np.array(features, dtype=float)
        target = np.array(target, dtype=float)
        if features.ndim != 2 or features.shape[1] != N_FEATURES:
            raise SchemaMismatch(f"expected an (n, {N_FEATURES}) feature matrix, got shape {features.shape}")
        if target.shape != (features.shape[0],):
            raise SchemaMismatch(f"target shape {target.shape} does not match {features.shape[0]} rows")
        if fabric_tag not in FABRIC_TAGS:
            raise InvalidRecord(f"fabric_tag must be one of {FABRIC_TAGS}, got {fabric_tag!r}")
        if not (np.all(np.isfinite(features)) and np.all(np.isfinite(target))):
            raise InvalidRecord("dataset contains non-finite values")
        if not normalized:
            bad = np.flatnonzero((target < 0.0) | (target > 1.0))
            if bad.size:
                raise InvalidRecord(f"row {bad[0] + 1}: cake_moisture {target[bad[0]]} outside [0, 1]")
            ph = features[:, FEATURES.index("ph")]
            bad = np.flatnonzero((ph <= 0.0) | (ph >= 14.0))
            if bad.size:
                raise InvalidRecord(f"row {bad[0] + 1}: ph {ph[bad[0]]} outside (0, 14)")
        features.setflags(write=False)
        target.setflags(write=False)
        self.features = features
        self.target = target
        self.fabric_tag = fabric_tag
        self.normalized = bool(normalized)

    @classmethod
    def from_runs(cls, runs: Sequence[FilterRun], fabric_tag="synthetic"):
        for run in runs:
            run.check()
        features = np.array([r.feature_vector() for r in runs], dtype=float).reshape(-1, N_FEATURES)
        target = np.array([r.cake_moisture for r in runs], dtype=float)
        return cls(features, target, fabric_tag)

    @property
    def rows(self) -> list[FilterRun]:
        return [FilterRun(*map(float, x), float(y)) for x, y in zip(self.features, self.target)]

    def __len__(self):
        return self.features.shape[0]

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.fabric_tag == other.fabric_tag
            and self.normalized == other.normalized
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.target, other.target)
        )

    def __repr__(self):
        space = "normalized" if self.normalized else "physical"
        return f"Dataset(n={len(self)}, fabric_tag={self.fabric_tag!r}, {space})"

    def take(self, indices) -> Dataset:
        indices = np.asarray(indices, dtype=int)
        return Dataset(self.features[indices], self.target[indices], self.fabric_tag, self.normalized)

    def concat(self, other: Dataset) -> Dataset:
        if self.normalized != other.normalized:
            raise SchemaMismatch("cannot concatenate physical and normalized datasets")
        return Dataset(
            np.vstack([self.features, other.features]),
            np.concatenate([self.target, other.target]),
            self.fabric_tag,
            self.normalized,
        )


# ---------------------------------------------------------------------------
# CSV


def _parse_number(text, row, col):
    try:
        value = float(text)
    except ValueError:
        raise NonNumericCell(row, col, text) from None
    if not math.isfinite(value):
        raise NonNumericCell(row, col, text)
    return value


def parse_csv(text: str, fabric_tag="S1") -> Dataset:
    """Parse a CSV document whose header names all eight canonical columns.

    Columns may appear in any order and unknown extra columns are ignored.
    Rows keep their file order.  ``NonNumericCell.row`` counts data rows from 1.
    """
    reader = csv.reader(io.StringIO(text.lstrip("\ufeff")))
    lines = [line for line in reader if any(cell.strip() for cell in line)]
    if not lines:
        raise EmptyFile("file has no header")
    header = [cell.strip() for cell in lines[0]]
    position = {}
    for idx, name in enumerate(header):
        if name in position:
            raise SchemaMismatch(f"column {name!r} appears twice in the header")
        position[name] = idx
    for name in COLUMNS:
        if name not in position:
            raise MissingColumn(name)
    if len(lines) == 1:
        raise EmptyFile("file has a header but no data rows")

    table = np.empty((len(lines) - 1, len(COLUMNS)))
    for r, line in enumerate(lines[1:], start=1):
        if len(line) < len(header):
            raise SchemaMismatch(f"row {r} has {len(line)} cells, header has {len(header)}")
        for c, name in enumerate(COLUMNS):
            table[r - 1, c] = _parse_number(line[position[name]].strip(), r, name)
    return Dataset(table[:, :N_FEATURES], table[:, N_FEATURES], fabric_tag)


def write_csv(ds: Dataset) -> str:
    """Serialize in canonical column order; ``repr`` gives round-trip-exact floats."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for x, y in zip(ds.features, ds.target):
        writer.writerow([repr(float(v)) for v in x] + [repr(float(y))])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Synthetic factorial generator


def ground_truth(features) -> np.ndarray:
    """Noise-free cake moisture for physical feature rows (see module docstring)."""
    x = np.atleast_2d(np.asarray(features, dtype=float))
    zT = (x[:, 0] - 50.0) / 15.0
    zS = (x[:, 1] - 0.29) / 0.09
    zH = (x[:, 2] - 3.5) / 1.5
    zA = (x[:, 3] - 8.5) / 6.5
    zC = (x[:, 4] - 24.0) / 10.0
    zP = (x[:, 5] - 6.0) / 2.0
    zF = (x[:, 6] - 30.0) / 15.0
    g = (
        0.24
        - 0.050 * np.tanh(1.2 * zF)
        - 0.022 * np.tanh(zA)
        - 0.012 * zP
        + 0.020 * zC
        + 0.015 * zS
        - 0.006 * zT
        + 0.004 * zH**2
    )
    return np.clip(g, MOISTURE_FLOOR, MOISTURE_CEIL)


@dataclass(frozen=True)
class FactorialDesign:
    levels: Mapping[str, tuple]
    replicates: int = 1
    noise_std: float = 0.0
    seed: int = 0

    def __post_init__(self):
        missing = [name for name in FEATURES if name not in self.levels]
        if missing:
            raise InvalidDesign(f"no levels given for {', '.join(missing)}")
        extra = sorted(set(self.levels) - set(FEATURES))
        if extra:
            raise InvalidDesign(f"unknown factors {', '.join(extra)}")
        frozen = {}
        for name in FEATURES:
            try:
                values = tuple(float(v) for v in self.levels[name])
            except (TypeError, ValueError):
                raise InvalidDesign(f"levels for {name} must be a list of numbers") from None
            if not values:
                raise InvalidDesign(f"{name} needs at least one level")
            if not all(math.isfinite(v) for v in values):
                raise InvalidDesign(f"{name} has a non-finite level")
            frozen[name] = values
        object.__setattr__(self, "levels", frozen)
        if isinstance(self.replicates, bool) or not isinstance(self.replicates, int) or self.replicates < 1:
            raise InvalidDesign(f"replicates must be a positive integer, got {self.replicates!r}")
        if not (isinstance(self.noise_std, (int, float)) and math.isfinite(self.noise_std) and self.noise_std >= 0):
            raise InvalidDesign(f"noise_std must be a finite value >= 0, got {self.noise_std!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise InvalidDesign(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")

    @property
    def size(self):
        return math.prod(len(v) for v in self.levels.values()) * self.replicates

    def to_json(self) -> str:
        payload = {name: list(self.levels[name]) for name in FEATURES}
        payload.update(replicates=self.replicates, noise_std=self.noise_std, seed=self.seed)
        return json.dumps(payload, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> FactorialDesign:
        try:
            payload = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidDesign(f"design file is not valid JSON: {exc}") from None
        if not isinstance(payload, dict):
            raise InvalidDesign("design file must hold a JSON object")
        payload = dict(payload)
        kwargs = {key: payload.pop(key) for key in ("replicates", "noise_std", "seed") if key in payload}
        return cls(levels=payload, **kwargs)


def lab_design(pressure, filtration_time, replicates=1, noise_std=0.0, seed=0):
    """Full factorial over the laboratory levels; pressure and filtration-time levels have no default."""
    levels = dict(LAB_LEVELS, pressure=tuple(pressure), filtration_time=tuple(filtration_time))
    return FactorialDesign(levels, replicates=replicates, noise_std=noise_std, seed=seed)


# Std of the ground truth over DEFAULT_LEVELS is 0.05094, so this noise level
# puts the best achievable held-out R^2 at about 0.90.
DEFAULT_NOISE_STD = 0.017

# 144 runs with filtration time varied: thickness is cut to its two extreme
# laboratory levels to make room for two filtration-time levels.
DEFAULT_LEVELS = dict(
    LAB_LEVELS,
    cake_thickness=(14.0, 34.0),
    pressure=(6.0,),
    filtration_time=(15.0, 45.0),
)


def default_design(seed=0, noise_std=DEFAULT_NOISE_STD) -> FactorialDesign:
    return FactorialDesign(DEFAULT_LEVELS, replicates=1, noise_std=noise_std, seed=seed)


def generate_synthetic(design: FactorialDesign) -> Dataset:
    """Emit every level combination times ``design.replicates``.

    Rows run in lexicographic order of level indices (canonical feature order,
    last feature fastest) with replicates adjacent.  Gaussian noise is drawn in
    row order from ``numpy.random.default_rng(design.seed)``; the noisy value is
    clipped to ``[0, 1]``.
    """
    grids = [design.levels[name] for name in FEATURES]
    combos = np.array(list(itertools.product(*grids)), dtype=float).reshape(-1, N_FEATURES)
    features = np.repeat(combos, design.replicates, axis=0)
    target = ground_truth(features)
    if design.noise_std > 0:
        rng = np.random.default_rng(design.seed)
        target = np.clip(target + rng.normal(0.0, design.noise_std, size=target.shape), 0.0, 1.0)
    return Dataset(features, target, "synthetic")


# ---------------------------------------------------------------------------
# Splitting


def split_sizes(n, train_fraction):
    n_train = math.floor(n * train_fraction)
    return n_train, n - n_train


def split(ds: Dataset, train_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Shuffle row indices with a seeded permutation, then cut at ``floor(n * f)``."""
    if not 0.0 < train_fraction < 1.0:
        raise DegenerateSplit(f"train_fraction must lie in (0, 1), got {train_fraction}")
    n = len(ds)
    if n < 2:
        raise DegenerateSplit(f"need at least 2 rows to split, got {n}")
    n_train, n_test = split_sizes(n, train_fraction)
    if n_train == 0 or n_test == 0:
        raise DegenerateSplit(f"split of {n} rows at {train_fraction} leaves an empty side")
    order = np.random.default_rng(seed).permutation(n)
    return ds.take(order[:n_train]), ds.take(order[n_train:])


# ---------------------------------------------------------------------------
# Standardization


@dataclass(frozen=True, eq=False)
class NormalizationStats:
    """Per-feature mean and population std, plus the same for the target."""

    mean: np.ndarray
    std: np.ndarray
    target_mean: float
    target_std: float

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float)
        std = np.array(self.std, dtype=float)
        if mean.shape != (N_FEATURES,) or std.shape != (N_FEATURES,):
            raise SchemaMismatch(f"normalization stats need {N_FEATURES} features")
        if np.any(std < 0) or self.target_std < 0:
            raise SchemaMismatch("standard deviations must be non-negative")
        mean.setflags(write=False)
        std.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)
        object.__setattr__(self, "target_mean", float(self.target_mean))
        object.__setattr__(self, "target_std", float(self.target_std))

    @property
    def degenerate(self) -> np.ndarray:
        return self.std == 0.0

    @property
    def target_degenerate(self) -> bool:
        return self.target_std == 0.0

    def __eq__(self, other):
        if not isinstance(other, NormalizationStats):
            return NotImplemented
        return (
            np.array_equal(self.mean, other.mean)
            and np.array_equal(self.std, other.std)
            and self.target_mean == other.target_mean
            and self.target_std == other.target_std
        )

    def to_dict(self):
        return {
            "features": list(FEATURES),
            "mean": [float(v) for v in self.mean],
            "std": [float(v) for v in self.std],
            "target": TARGET,
            "target_mean": self.target_mean,
            "target_std": self.target_std,
        }

    @classmethod
    def from_dict(cls, payload):
        if list(payload.get("features", FEATURES)) != list(FEATURES):
            raise SchemaMismatch("normalization stats use a different feature order")
        return cls(payload["mean"], payload["std"], payload["target_mean"], payload["target_std"])


def _scale(x, mean, std):
    std = np.asarray(std)
    safe = np.where(std == 0.0, 1.0, std)
    return np.where(std == 0.0, 0.0, (x - mean) / safe)


def fit_normalizer(ds: Dataset) -> NormalizationStats:
    if len(ds) < 2:
        raise TooFewRows(f"need at least 2 rows to fit normalization stats, got {len(ds)}")
    if ds.normalized:
        raise SchemaMismatch("fit_normalizer expects a dataset in physical units")
    mean, std = _mean_std(ds.features)
    t_mean, t_std = _mean_std(ds.target[:, None])
    return NormalizationStats(mean, std, t_mean[0], t_std[0])


def _mean_std(table):
    mean = table.mean(axis=0)
    std = np.sqrt(((table - mean) ** 2).mean(axis=0))
    # summation rounding leaves constant columns with a ~1e-17 std otherwise
    const = np.all(table == table[0], axis=0)
    mean[const] = table[0, const]
    std[const] = 0.0
    return mean, std


def normalize_features(x, stats: NormalizationStats) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != N_FEATURES:
        raise SchemaMismatch(f"expected {N_FEATURES} features, got {x.shape[-1]}")
    return _scale(x, stats.mean, stats.std)


def normalize_target(y, stats: NormalizationStats):
    return _scale(np.asarray(y, dtype=float), stats.target_mean, stats.target_std)


def normalize(ds: Dataset, stats: NormalizationStats, standardize_target=True) -> Dataset:
    """Map features (and by default the target) to z-scores; zero-variance columns become 0."""
    if ds.normalized:
        raise SchemaMismatch("dataset is already normalized")
    target = normalize_target(ds.target, stats) if standardize_target else ds.target
    return Dataset(normalize_features(ds.features, stats), target, ds.fabric_tag, normalized=True)


def denormalize_features(z, stats: NormalizationStats) -> np.ndarray:
    return np.asarray(z, dtype=float) * stats.std + stats.mean


def denormalize_target(y_norm, stats: NormalizationStats):
    if stats.target_degenerate:
        raise DegenerateTarget("target has zero variance; normalized predictions cannot be mapped back")
    out = np.asarray(y_norm, dtype=float) * stats.target_std + stats.target_mean
    return float(out) if out.ndim == 0 else out


def denormalize(ds: Dataset, stats: NormalizationStats, standardize_target=True) -> Dataset:
    """Inverse of :func:`normalize` for non-degenerate columns (degenerate ones return the mean)."""
    if not ds.normalized:
        raise SchemaMismatch("dataset is not normalized")
    target = denormalize_target(ds.target, stats) if standardize_target else ds.target
    return Dataset(denormalize_features(ds.features, stats), target, ds.fabric_tag)
