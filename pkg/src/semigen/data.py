"""Containers for two-domain samples and their CSV representation."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

CLASSIFICATION = "classification"
REGRESSION = "regression"


def fmt_float(x: float) -> str:
    """17 significant digits, which round-trips every double exactly."""
    return format(float(x), ".17g")


@dataclass(frozen=True)
class Sample:
    """Rows over ``(x_C, y, x_E)``; ``y`` is ``None`` for unlabelled rows.

    ``xc`` and ``xe`` are 2-D arrays of shape ``(n, dim)``.
    """

    xc: np.ndarray
    xe: np.ndarray
    y: np.ndarray | None = None

    def __post_init__(self):
        xc = np.asarray(self.xc, dtype=float)
        xe = np.asarray(self.xe, dtype=float)
        if xc.ndim == 1:
            xc = xc[:, None]
        if xe.ndim == 1:
            xe = xe[:, None]
        if xc.shape[0] != xe.shape[0]:
            raise ValueError(f"x_C has {xc.shape[0]} rows but x_E has {xe.shape[0]}")
        object.__setattr__(self, "xc", xc)
        object.__setattr__(self, "xe", xe)
        if self.y is not None:
            y = np.asarray(self.y, dtype=float).reshape(-1)
            if y.shape[0] != xc.shape[0]:
                raise ValueError(f"y has {y.shape[0]} rows but x_C has {xc.shape[0]}")
            object.__setattr__(self, "y", y)

    def __len__(self):
        return self.xc.shape[0]

    @property
    def labelled(self) -> bool:
        return self.y is not None

    def take(self, idx) -> Sample:
        idx = np.asarray(idx, dtype=int)
        return Sample(self.xc[idx], self.xe[idx], None if self.y is None else self.y[idx])

    def unlabelled(self) -> Sample:
        return Sample(self.xc, self.xe)

    @classmethod
    def empty(cls, dim_c: int, dim_e: int, labelled: bool = False) -> Sample:
        return cls(np.zeros((0, dim_c)), np.zeros((0, dim_e)), np.zeros(0) if labelled else None)


@dataclass(frozen=True)
class DomainDataset:
    """Labelled source sample plus unlabelled target sample."""

    source: Sample
    target: Sample
    task: str = CLASSIFICATION

    def __post_init__(self):
        if len(self.source) < 1:
            raise ValueError("source sample must contain at least one row")
        if not self.source.labelled:
            raise ValueError("source rows must carry labels")
        if self.task not in (CLASSIFICATION, REGRESSION):
            raise ValueError(f"unknown task {self.task!r}")
        if len(self.target):
            if self.target.xc.shape[1] != self.source.xc.shape[1]:
                raise ValueError("x_C dimension differs between source and target")
            if self.target.xe.shape[1] != self.source.xe.shape[1]:
                raise ValueError("x_E dimension differs between source and target")
        if self.target.labelled:
            object.__setattr__(self, "target", self.target.unlabelled())

    @property
    def n_source(self) -> int:
        return len(self.source)

    @property
    def n_target(self) -> int:
        return len(self.target)

    @property
    def dim_c(self) -> int:
        return self.source.xc.shape[1]

    @property
    def dim_e(self) -> int:
        return self.source.xe.shape[1]


def _header(dim_c, dim_e):
    return ["domain"] + [f"xc_{k}" for k in range(dim_c)] + ["y"] + [f"xe_{k}" for k in range(dim_e)]


def _rows(sample: Sample, domain: int, integer_y: bool):
    for i in range(len(sample)):
        if sample.y is None:
            y = ""
        elif integer_y:
            y = str(int(sample.y[i]))
        else:
            y = fmt_float(sample.y[i])
        yield (
            [str(domain)]
            + [fmt_float(v) for v in sample.xc[i]]
            + [y]
            + [fmt_float(v) for v in sample.xe[i]]
        )


def write_dataset_csv(fh, dataset: DomainDataset, test: Sample | None = None) -> None:
    """Write source (domain 0), target (domain 1, empty ``y``) and optional
    labelled target test rows (domain 1) to ``fh``."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(_header(dataset.dim_c, dataset.dim_e))
    integer_y = dataset.task == CLASSIFICATION
    writer.writerows(_rows(dataset.source, 0, integer_y))
    writer.writerows(_rows(dataset.target, 1, integer_y))
    if test is not None:
        writer.writerows(_rows(test, 1, integer_y))


def dataset_to_csv(dataset: DomainDataset, test: Sample | None = None) -> str:
    buf = io.StringIO()
    write_dataset_csv(buf, dataset, test)
    return buf.getvalue()


def read_dataset_csv(fh, task: str = CLASSIFICATION) -> tuple[DomainDataset, Sample | None]:
    """Parse the dataset CSV format.

    Domain-0 rows must be labelled. Domain-1 rows with an empty ``y`` form the
    unlabelled target sample; labelled domain-1 rows are returned separately
    as a test sample and never enter the training data.
    """
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise ValueError("empty dataset file") from None
    header = [h.strip() for h in header]
    if "domain" not in header or "y" not in header:
        raise ValueError("dataset header must contain 'domain' and 'y' columns")
    xc_cols = [i for i, h in enumerate(header) if h.startswith("xc_")]
    xe_cols = [i for i, h in enumerate(header) if h.startswith("xe_")]
    if not xc_cols or not xe_cols:
        raise ValueError("dataset header must contain xc_* and xe_* columns")
    i_dom, i_y = header.index("domain"), header.index("y")
    parts = {"s": ([], [], []), "t": ([], [], []), "test": ([], [], [])}
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        try:
            dom = int(row[i_dom])
            xc = [float(row[i]) for i in xc_cols]
            xe = [float(row[i]) for i in xe_cols]
        except (ValueError, IndexError) as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
        ycell = row[i_y].strip()
        if dom == 0:
            if ycell == "":
                raise ValueError(f"line {lineno}: source row without label")
            key = "s"
        elif dom == 1:
            key = "t" if ycell == "" else "test"
        else:
            raise ValueError(f"line {lineno}: domain must be 0 or 1, got {dom}")
        bucket = parts[key]
        bucket[0].append(xc)
        bucket[1].append(xe)
        if ycell != "":
            bucket[2].append(float(ycell))
    dc, de = len(xc_cols), len(xe_cols)

    def build(key, labelled):
        xc, xe, y = parts[key]
        if not xc:
            return Sample.empty(dc, de, labelled)
        return Sample(np.array(xc), np.array(xe), np.array(y) if labelled else None)

    dataset = DomainDataset(build("s", True), build("t", False), task)
    test = build("test", True) if parts["test"][0] else None
    return dataset, test


def read_features_csv(fh) -> Sample:
    """All rows of a CSV with ``xc_*`` and ``xe_*`` columns, labels ignored."""
    reader = csv.DictReader(fh)
    fields = [f.strip() for f in reader.fieldnames or []]
    xc_cols = [f for f in fields if f.startswith("xc_")]
    xe_cols = [f for f in fields if f.startswith("xe_")]
    if not xc_cols or not xe_cols:
        raise ValueError("feature file must contain xc_* and xe_* columns")
    xc, xe = [], []
    for lineno, row in enumerate(reader, start=2):
        try:
            xc.append([float(row[c]) for c in xc_cols])
            xe.append([float(row[c]) for c in xe_cols])
        except (TypeError, ValueError) as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    if not xc:
        return Sample.empty(len(xc_cols), len(xe_cols))
    return Sample(np.array(xc), np.array(xe))
