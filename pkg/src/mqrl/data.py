"""Clustered right-censored failure-time data: containers, CSV I/O, risk sets."""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence

import numpy as np

from .errors import DataValidationError, RiskSetError

__all__ = [
    "Observation",
    "ClusteredDataset",
    "QrlSpec",
    "RiskSetReport",
    "DEFAULT_SCHEMA",
    "load_dataset",
    "save_dataset",
    "validate_for_fit",
]

DEFAULT_SCHEMA = {"cluster": "cluster", "time": "time", "status": "status"}


@dataclass(frozen=True)
class Observation:
    """One failure-time record. ``covariates[0]`` is the intercept."""

    cluster_id: str
    time: float
    status: int
    covariates: tuple[float, ...]

    def __post_init__(self):
        if not self.time > 0:
            raise DataValidationError(f"time must be > 0, got {self.time!r}")
        if self.status not in (0, 1):
            raise DataValidationError(f"status must be 0 or 1, got {self.status!r}")
        if not self.covariates or self.covariates[0] != 1:
            raise DataValidationError("covariates[0] must be the intercept 1")


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ClusteredDataset:
    """Observations grouped by cluster, stored as flat read-only arrays.

    Rows are ordered cluster by cluster; ``cluster[k]`` is the cluster index
    (0..n-1) of row ``k`` and ``cluster_ids[c]`` its original label.

    Parameters
    ----------
    cluster_ids : sequence of str
        Label of each cluster, in cluster-index order.
    cluster : array of int, shape (N,)
        Cluster index of every observation, nondecreasing.
    time, status : arrays, shape (N,)
        Observed time ``min(T, C)`` and event indicator.
    X : array, shape (N, p)
        Design matrix; the first column is all ones.
    covariate_names : sequence of str
        Names of columns ``X[:, 1:]``.
    """

    cluster_ids: tuple[str, ...]
    cluster: np.ndarray
    time: np.ndarray
    status: np.ndarray
    X: np.ndarray
    covariate_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "cluster_ids", tuple(str(c) for c in self.cluster_ids))
        object.__setattr__(self, "cluster", _frozen(self.cluster, np.intp))
        object.__setattr__(self, "time", _frozen(self.time, float))
        object.__setattr__(self, "status", _frozen(self.status, np.int8))
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        object.__setattr__(self, "X", _frozen(X, float))
        names = tuple(self.covariate_names) or tuple(f"x{j}" for j in range(1, X.shape[1]))
        object.__setattr__(self, "covariate_names", names)

        N = self.time.shape[0]
        if N == 0:
            raise DataValidationError("dataset is empty")
        if self.cluster.shape != (N,) or self.status.shape != (N,) or self.X.shape[0] != N:
            raise DataValidationError("cluster, time, status and X must have N rows")
        if len(names) != self.X.shape[1] - 1:
            raise DataValidationError("covariate_names must name every non-intercept column")
        if np.any(np.diff(self.cluster) < 0):
            raise DataValidationError("rows must be grouped by cluster")
        counts = np.bincount(self.cluster, minlength=len(self.cluster_ids))
        if counts.shape[0] != len(self.cluster_ids) or np.any(counts == 0):
            raise DataValidationError("every cluster must be nonempty")
        if not np.all(np.isfinite(self.time)) or np.any(self.time <= 0):
            raise DataValidationError("time must be finite and strictly positive")
        if np.any((self.status != 0) & (self.status != 1)):
            raise DataValidationError("status must be 0 or 1")
        if not np.all(np.isfinite(self.X)):
            raise DataValidationError("covariates must be finite")
        if np.any(self.X[:, 0] != 1.0):
            raise DataValidationError("first design column must be the intercept 1")

    @classmethod
    def from_arrays(cls, cluster, time, status, covariates=None, covariate_names=()):
        """Build a dataset from per-row arrays, grouping rows by cluster label.

        Clusters are ordered by first appearance; rows keep their relative
        order within a cluster. An intercept column is prepended to
        ``covariates``.
        """
        labels = [str(c) for c in cluster]
        time = np.asarray(time, dtype=float)
        status = np.asarray(status)
        N = len(labels)
        if covariates is None:
            covariates = np.empty((N, 0))
        Z = np.asarray(covariates, dtype=float).reshape(N, -1)

        index, ids = {}, []
        for lab in labels:
            if lab not in index:
                index[lab] = len(ids)
                ids.append(lab)
        cl = np.array([index[lab] for lab in labels], dtype=np.intp)
        order = np.argsort(cl, kind="stable")
        X = np.column_stack([np.ones(N), Z])[order]
        return cls(tuple(ids), cl[order], time[order], status[order], X, tuple(covariate_names))

    @property
    def n(self) -> int:
        return len(self.cluster_ids)

    @property
    def N(self) -> int:
        return int(self.time.shape[0])

    @property
    def p(self) -> int:
        return int(self.X.shape[1])

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.cluster, minlength=self.n)

    def clusters(self) -> Iterator[list[Observation]]:
        """Iterate over clusters as lists of :class:`Observation`."""
        bounds = np.concatenate([[0], np.cumsum(self.sizes)])
        for c in range(self.n):
            yield [
                Observation(
                    self.cluster_ids[c],
                    float(self.time[k]),
                    int(self.status[k]),
                    tuple(float(v) for v in self.X[k]),
                )
                for k in range(bounds[c], bounds[c + 1])
            ]

    def same_as(self, other: "ClusteredDataset") -> bool:
        return (
            self.cluster_ids == other.cluster_ids
            and self.covariate_names == other.covariate_names
            and np.array_equal(self.cluster, other.cluster)
            and np.array_equal(self.time, other.time)
            and np.array_equal(self.status, other.status)
            and np.array_equal(self.X, other.X)
        )


@dataclass(frozen=True)
class QrlSpec:
    """Quantile level ``tau`` and landmark time ``t0`` of one QRL model."""

    tau: float
    t0: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.tau < 1.0:
            raise ValueError(f"tau must lie in (0, 1), got {self.tau}")
        if not (self.t0 >= 0.0 and math.isfinite(self.t0)):
            raise ValueError(f"t0 must be a finite nonnegative number, got {self.t0}")


@dataclass(frozen=True)
class RiskSetReport:
    size: int
    events: int


def _resolve_schema(header, schema):
    schema = {**DEFAULT_SCHEMA, **(schema or {})}
    cols = {}
    for role in ("cluster", "time", "status"):
        name = schema[role]
        if name not in header:
            raise DataValidationError(f"missing column {name!r} (role {role})")
        cols[role] = header.index(name)
    if schema.get("covariates") is not None:
        covs = list(schema["covariates"])
        for name in covs:
            if name not in header:
                raise DataValidationError(f"missing covariate column {name!r}")
    else:
        used = {schema["cluster"], schema["time"], schema["status"]}
        covs = [h for h in header if h not in used]
    return cols, covs


def load_dataset(path: str | os.PathLike, schema: Mapping[str, object] | None = None) -> ClusteredDataset:
    """Read a clustered survival CSV.

    The file needs a header row. ``schema`` maps the roles ``cluster``,
    ``time`` and ``status`` to column names and may list ``covariates``
    explicitly; otherwise every remaining column is a covariate. Row numbers
    in error messages count the header as row 1.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or not any(cell.strip() for cell in rows[0]):
        raise DataValidationError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    body = [r for r in rows[1:] if any(cell.strip() for cell in r)]
    if not body:
        raise DataValidationError(f"{path}: no data rows")
    cols, covs = _resolve_schema(header, schema)
    cov_idx = [header.index(c) for c in covs]

    labels, times, status, Z = [], [], [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not any(cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise DataValidationError(f"row {lineno}: expected {len(header)} fields, got {len(row)}")

        def num(j):
            cell = row[j].strip()
            try:
                v = float(cell)
            except ValueError:
                raise DataValidationError(
                    f"row {lineno}, column {header[j]!r}: non-numeric value {cell!r}"
                ) from None
            if not math.isfinite(v):
                raise DataValidationError(f"row {lineno}, column {header[j]!r}: value must be finite")
            return v

        label = row[cols["cluster"]].strip()
        if label == "":
            raise DataValidationError(f"row {lineno}, column {header[cols['cluster']]!r}: missing value")
        t = num(cols["time"])
        if t <= 0:
            raise DataValidationError(f"row {lineno}, column {header[cols['time']]!r}: time must be > 0, got {t}")
        d = num(cols["status"])
        if d not in (0.0, 1.0):
            raise DataValidationError(
                f"row {lineno}, column {header[cols['status']]!r}: status must be 0 or 1, got {row[cols['status']].strip()}"
            )
        labels.append(label)
        times.append(t)
        status.append(int(d))
        Z.append([num(j) for j in cov_idx])

    Z = np.array(Z, dtype=float).reshape(len(labels), len(cov_idx))
    return ClusteredDataset.from_arrays(labels, times, status, Z, tuple(covs))


def save_dataset(dataset: ClusteredDataset, path: str | os.PathLike) -> None:
    """Write ``dataset`` in the canonical CSV layout read by :func:`load_dataset`."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["cluster", "time", "status", *dataset.covariate_names])
        for k in range(dataset.N):
            w.writerow(
                [
                    dataset.cluster_ids[dataset.cluster[k]],
                    repr(float(dataset.time[k])),
                    int(dataset.status[k]),
                    *(repr(float(v)) for v in dataset.X[k, 1:]),
                ]
            )


def validate_for_fit(dataset: ClusteredDataset, spec: QrlSpec) -> RiskSetReport:
    """Check that the risk set ``{Y >= t0}`` can identify ``p`` coefficients."""
    at_risk = dataset.time >= spec.t0
    size = int(at_risk.sum())
    if size == 0:
        raise RiskSetError(f"empty risk set at t0={spec.t0}")
    events = int(dataset.status[at_risk].sum())
    if events < dataset.p:
        raise RiskSetError(
            f"only {events} observed events in the risk set at t0={spec.t0}; need at least p={dataset.p}"
        )
    return RiskSetReport(size, events)
