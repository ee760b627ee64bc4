"""Finite grid domains, labeled datasets, rectangle hypotheses, error measures.

Everything in this module is an immutable value: datasets wrap read-only
arrays and all operations are pure functions, so values can be shared freely
across threads. Row order inside a dataset is meaningful, because order
statistics break coordinate ties by insertion index.
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence, Union

import numpy as np

from .errors import DimensionMismatch, EmptyDataset, InvalidParams

PROB_SUM_TOL = 1e-12


@dataclass(frozen=True)
class GridDomain:
    """The point set {0, ..., x_max}^d."""

    x_max: int
    d: int

    def __post_init__(self):
        if self.x_max < 0:
            raise InvalidParams(f"x_max must be >= 0, got {self.x_max}")
        if self.d < 1:
            raise InvalidParams(f"dimension must be >= 1, got {self.d}")

    @property
    def side(self) -> int:
        """Number of grid values per axis."""
        return self.x_max + 1

    def contains(self, coords: Sequence[int]) -> bool:
        if len(coords) != self.d:
            raise DimensionMismatch(
                f"expected {self.d} coordinates, got {len(coords)}")
        return all(0 <= int(c) <= self.x_max for c in coords)


@dataclass(frozen=True)
class LabeledExample:
    coords: tuple[int, ...]
    label: int

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(int(c) for c in self.coords))
        if self.label not in (0, 1):
            raise InvalidParams(f"label must be 0 or 1, got {self.label}")


@dataclass(frozen=True)
class OriginRectangle:
    """Hypothesis labeling x positive iff x_i <= corner_i on every axis.

    The comparison is non-strict, so boundary points are classified positive.
    """

    corner: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "corner", tuple(int(c) for c in self.corner))

    def contains(self, coords: Sequence[int]) -> bool:
        if len(coords) != len(self.corner):
            raise DimensionMismatch(
                f"expected {len(self.corner)} coordinates, got {len(coords)}")
        return all(int(x) <= p for x, p in zip(coords, self.corner))

    def contains_batch(self, coords: np.ndarray) -> np.ndarray:
        coords = np.asarray(coords)
        if coords.ndim != 2 or coords.shape[1] != len(self.corner):
            raise DimensionMismatch(
                f"expected shape (n, {len(self.corner)}), got {coords.shape}")
        return (coords <= np.asarray(self.corner, dtype=np.int64)).all(axis=1)


@dataclass(frozen=True)
class EmptyRectangle:
    """The all-zero hypothesis: every point is classified negative.

    Returned by learners that fall back when too few positives are present.
    It is not a member of the origin-rectangle class (h_p always labels the
    origin positive), hence the separate type.
    """

    def contains(self, coords: Sequence[int]) -> bool:
        return False

    def contains_batch(self, coords: np.ndarray) -> np.ndarray:
        coords = np.asarray(coords)
        return np.zeros(coords.shape[0], dtype=bool)


Hypothesis = Union[OriginRectangle, EmptyRectangle]


def predict(hypothesis: Hypothesis, coords: Sequence[int]) -> int:
    """Binary prediction of a rectangle hypothesis at a single point."""
    return int(hypothesis.contains(coords))


class Dataset:
    """Ordered immutable multiset of labeled grid points.

    ``coords`` has shape (n, d), ``labels`` shape (n,); both arrays are
    read-only. The row index is the insertion index used for deterministic
    tie-breaking, so datasets with the same rows in a different order are
    different values.
    """

    __slots__ = ("coords", "labels", "domain", "_sha")

    def __init__(self, coords, labels, domain: GridDomain):
        coords = np.ascontiguousarray(coords, dtype=np.int64)
        labels = np.ascontiguousarray(labels, dtype=np.int8)
        if coords.size == 0:
            coords = coords.reshape(0, domain.d)
        if coords.ndim != 2 or coords.shape[1] != domain.d:
            raise DimensionMismatch(
                f"coords must have shape (n, {domain.d}), got {coords.shape}")
        if labels.shape != (coords.shape[0],):
            raise DimensionMismatch("need exactly one label per row")
        if coords.size and (coords.min() < 0 or coords.max() > domain.x_max):
            raise InvalidParams("coordinates fall outside the grid domain")
        if labels.size and not np.isin(labels, (0, 1)).all():
            raise InvalidParams("labels must be 0 or 1")
        coords.setflags(write=False)
        labels.setflags(write=False)
        self.coords = coords
        self.labels = labels
        self.domain = domain
        self._sha = None

    @classmethod
    def from_examples(cls, examples: Sequence[LabeledExample],
                      domain: GridDomain) -> "Dataset":
        coords = np.array([e.coords for e in examples], dtype=np.int64)
        labels = np.array([e.label for e in examples], dtype=np.int8)
        return cls(coords, labels, domain)

    def __len__(self) -> int:
        return self.coords.shape[0]

    def __iter__(self) -> Iterator[LabeledExample]:
        for i in range(len(self)):
            yield self.example(i)

    def example(self, i: int) -> LabeledExample:
        return LabeledExample(tuple(self.coords[i]), int(self.labels[i]))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (self.domain == other.domain
                and np.array_equal(self.coords, other.coords)
                and np.array_equal(self.labels, other.labels))

    __hash__ = None

    def subset(self, ids: Sequence[int]) -> "Dataset":
        """New dataset view of the given rows, preserving their order."""
        ids = np.asarray(ids, dtype=np.int64)
        return Dataset(self.coords[ids], self.labels[ids], self.domain)

    def positives(self) -> "Dataset":
        return self.subset(np.nonzero(self.labels == 1)[0])

    def append(self, example: LabeledExample) -> "Dataset":
        """New dataset with one extra row at the end (insertion index len)."""
        if len(example.coords) != self.domain.d:
            raise DimensionMismatch("example dimension does not match domain")
        coords = np.concatenate(
            [self.coords, np.asarray([example.coords], dtype=np.int64)])
        labels = np.concatenate(
            [self.labels, np.asarray([example.label], dtype=np.int8)])
        return Dataset(coords, labels, self.domain)


def dataset_sha(dataset: Dataset) -> str:
    """Content hash of a dataset, stable across runs and platforms.

    Cached on the dataset, which is safe because the arrays are read-only.
    """
    if dataset._sha is None:
        h = hashlib.sha256()
        h.update(f"{dataset.domain.x_max},{dataset.domain.d},"
                 f"{len(dataset)};".encode())
        h.update(np.ascontiguousarray(dataset.coords).tobytes())
        h.update(np.ascontiguousarray(dataset.labels).tobytes())
        dataset._sha = h.hexdigest()
    return dataset._sha


def _axis_order(dataset: Dataset, axis: int) -> np.ndarray:
    """Row indices sorted ascending by (coordinate on axis, insertion index).

    This is the strict total order behind every order statistic in the
    package: ties are resolved by insertion index, so top-k and bottom-(n-k)
    always partition the dataset.
    """
    if not 0 <= axis < dataset.domain.d:
        raise DimensionMismatch(
            f"axis {axis} out of range for dimension {dataset.domain.d}")
    vals = dataset.coords[:, axis]
    idx = np.arange(len(dataset))
    return np.lexsort((idx, vals))


def _check_k(dataset: Dataset, k: int) -> None:
    if not 0 <= k <= len(dataset):
        raise InvalidParams(f"k must be in [0, {len(dataset)}], got {k}")


def top_k_along_axis(dataset: Dataset, axis: int, k: int) -> Dataset:
    """The k examples maximal along ``axis`` (0-based), in insertion order."""
    _check_k(dataset, k)
    order = _axis_order(dataset, axis)
    ids = np.sort(order[len(dataset) - k:])
    return dataset.subset(ids)


def bottom_k_along_axis(dataset: Dataset, axis: int, k: int) -> Dataset:
    """The k examples minimal along ``axis`` (0-based), in insertion order."""
    _check_k(dataset, k)
    order = _axis_order(dataset, axis)
    ids = np.sort(order[:k])
    return dataset.subset(ids)


def empirical_error(hypothesis: Hypothesis, dataset: Dataset) -> Fraction:
    """Fraction of examples misclassified, as an exact rational."""
    if len(dataset) == 0:
        raise EmptyDataset("empirical error of an empty dataset is undefined")
    preds = hypothesis.contains_batch(dataset.coords).astype(np.int8)
    mismatches = int(np.count_nonzero(preds != dataset.labels))
    return Fraction(mismatches, len(dataset))


class ExplicitDistribution:
    """Distribution over labeled points given by an explicit finite support."""

    __slots__ = ("coords", "labels", "probs", "domain")

    def __init__(self, coords, labels, probs, domain: GridDomain):
        base = Dataset(coords, labels, domain)  # reuse bounds/label checks
        probs = np.ascontiguousarray(probs, dtype=np.float64)
        if probs.shape != (len(base),):
            raise DimensionMismatch("need exactly one probability per point")
        if probs.size and probs.min() < 0:
            raise InvalidParams("probabilities must be non-negative")
        if abs(float(probs.sum()) - 1.0) > PROB_SUM_TOL:
            raise InvalidParams(
                f"probabilities sum to {probs.sum()!r}, expected 1 within "
                f"{PROB_SUM_TOL}")
        probs.setflags(write=False)
        self.coords = base.coords
        self.labels = base.labels
        self.probs = probs
        self.domain = domain

    @classmethod
    def from_pairs(cls, pairs: Sequence[tuple[LabeledExample, float]],
                   domain: GridDomain) -> "ExplicitDistribution":
        coords = np.array([e.coords for e, _ in pairs], dtype=np.int64)
        labels = np.array([e.label for e, _ in pairs], dtype=np.int8)
        probs = np.array([p for _, p in pairs], dtype=np.float64)
        return cls(coords, labels, probs, domain)

    def __len__(self) -> int:
        return self.coords.shape[0]

    def sample(self, n: int, rng: np.random.Generator) -> Dataset:
        ids = rng.choice(len(self), size=n, p=self.probs / self.probs.sum())
        return Dataset(self.coords[ids], self.labels[ids], self.domain)


def generalization_error(hypothesis: Hypothesis,
                         dist: ExplicitDistribution) -> float:
    """Exact probability mass of misclassified support points."""
    preds = hypothesis.contains_batch(dist.coords).astype(np.int8)
    return float(dist.probs[preds != dist.labels].sum())


# ---------------------------------------------------------------------------
# CSV formats. Datasets: header x1,...,xd,label, one row per example.
# Explicit distributions: the same plus a trailing prob column that accepts
# decimals ("0.25") or rationals ("1/4").


def _dataset_header(d: int) -> list[str]:
    return [f"x{i + 1}" for i in range(d)] + ["label"]


def save_dataset_csv(dataset: Dataset, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_dataset_header(dataset.domain.d))
        for row, label in zip(dataset.coords, dataset.labels):
            writer.writerow([*map(int, row), int(label)])


def _read_rows(path, extra_cols: int):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise EmptyDataset(f"{path} has no header row")
        d = len(header) - 1 - extra_cols
        if d < 1 or header[:d] != _dataset_header(d)[:d] or header[d] != "label":
            raise InvalidParams(f"unexpected CSV header {header!r} in {path}")
        rows = [row for row in reader if row]
    return d, rows


def load_dataset_csv(path, x_max: int) -> Dataset:
    d, rows = _read_rows(path, extra_cols=0)
    domain = GridDomain(x_max=x_max, d=d)
    coords = np.array([[int(v) for v in row[:d]] for row in rows],
                      dtype=np.int64)
    labels = np.array([int(row[d]) for row in rows], dtype=np.int8)
    return Dataset(coords, labels, domain)


def save_distribution_csv(dist: ExplicitDistribution, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_dataset_header(dist.domain.d) + ["prob"])
        for row, label, p in zip(dist.coords, dist.labels, dist.probs):
            writer.writerow([*map(int, row), int(label), repr(float(p))])


def load_distribution_csv(path, x_max: int) -> ExplicitDistribution:
    d, rows = _read_rows(path, extra_cols=1)
    domain = GridDomain(x_max=x_max, d=d)
    coords = np.array([[int(v) for v in row[:d]] for row in rows],
                      dtype=np.int64)
    labels = np.array([int(row[d]) for row in rows], dtype=np.int8)
    probs = np.array([float(Fraction(row[d + 1])) for row in rows],
                     dtype=np.float64)
    return ExplicitDistribution(coords, labels, probs, domain)
