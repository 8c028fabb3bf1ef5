"""Observables computed from trial records or exact joint distributions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Literal

import numpy as np
from scipy import stats

from .qcore import MeasurementBasis, StateVector, joint_distribution
from .runner import TrialBatch, TrialRecord

SIGNIFICANCE = 1e-3
MIN_EXPECTED = 5.0


class EmptyCondition(ValueError):
    pass


class EmptyHistogram(ValueError):
    pass


class InconsistentRecords(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class _LabelledTable:
    row_labels: tuple[str, ...]
    col_labels: tuple[str, ...]

    def _validate(self, values: np.ndarray) -> None:
        if values.shape != (len(self.row_labels), len(self.col_labels)):
            raise ValueError(f"table shape {values.shape} does not match labels")
        if len(set(self.row_labels)) != len(self.row_labels) or \
                len(set(self.col_labels)) != len(self.col_labels):
            raise ValueError("table labels must be unique")
        if np.any(values < 0):
            raise ValueError("table entries must be non-negative")

    @property
    def weights(self) -> np.ndarray:
        raise NotImplementedError

    def cell(self, row: str, col: str):
        return self.weights[self.row_labels.index(row), self.col_labels.index(col)]


@dataclass(frozen=True, eq=False)
class CoincidenceTable(_LabelledTable):
    """Joint counts; rows are quanton outcomes, columns which-way outcomes."""

    counts: np.ndarray = None

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        self._validate(counts)
        object.__setattr__(self, "counts", counts)

    @property
    def weights(self) -> np.ndarray:
        return self.counts

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True, eq=False)
class JointDistribution(_LabelledTable):
    """Exact joint probabilities laid out like a :class:`CoincidenceTable`."""

    probs: np.ndarray = None

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        self._validate(probs)
        object.__setattr__(self, "probs", probs)

    @property
    def weights(self) -> np.ndarray:
        return self.probs

    @classmethod
    def exact(cls, state: StateVector, quanton_basis: MeasurementBasis,
              wwd_basis: MeasurementBasis, order: str = "delayed") -> "JointDistribution":
        if order == "delayed":
            probs = joint_distribution(state, quanton_basis, wwd_basis)
        elif order == "eager":
            probs = joint_distribution(state, wwd_basis, quanton_basis).T
        else:
            raise ValueError(f"unknown order {order!r}")
        return cls(quanton_basis.labels, wwd_basis.labels, probs)


def _split(order: str, n_outcomes: int) -> tuple[int, int | None]:
    """Positions of the quanton and which-way outcomes in execution order."""
    if n_outcomes == 1:
        return 0, None
    return (1, 0) if order == "eager" else (0, 1)


def coincidence_table(records: TrialBatch | Iterable[TrialRecord]) -> CoincidenceTable:
    if isinstance(records, TrialBatch):
        q, w = _split(records.order, len(records.bases))
        qb = records.bases[q]
        rows = qb.labels
        if w is None:
            counts = np.bincount(records.indices[:, q], minlength=qb.dim)[:, None]
            return CoincidenceTable(rows, ("any",), counts)
        wb = records.bases[w]
        flat = records.indices[:, q] * wb.dim + records.indices[:, w]
        counts = np.bincount(flat, minlength=qb.dim * wb.dim).reshape(qb.dim, wb.dim)
        return CoincidenceTable(rows, wb.labels, counts)

    records = list(records)
    if not records:
        raise InconsistentRecords("no records")
    shape = {(r.order, tuple(o.basis for o in r.outcomes)) for r in records}
    if len(shape) != 1:
        raise InconsistentRecords(f"records mix schedule shapes: {sorted(shape)}")
    order, names = shape.pop()
    q, w = _split(order, len(names))
    rows = _observed_labels(r.outcomes[q] for r in records)
    cols = ("any",) if w is None else _observed_labels(r.outcomes[w] for r in records)
    counts = np.zeros((len(rows), len(cols)), dtype=np.int64)
    for r in records:
        j = 0 if w is None else cols.index(r.outcomes[w].label)
        counts[rows.index(r.outcomes[q].label), j] += 1
    return CoincidenceTable(rows, cols, counts)


def _observed_labels(outcomes) -> tuple[str, ...]:
    seen = {o.index: o.label for o in outcomes}
    return tuple(seen[i] for i in sorted(seen))


def conditional_probability(table: _LabelledTable, given: str, target: str) -> float:
    """P(target | given) where the two labels sit on opposite axes."""
    w = table.weights
    if given in table.row_labels and target in table.col_labels:
        joint = w[table.row_labels.index(given), table.col_labels.index(target)]
        norm = w[table.row_labels.index(given)].sum()
    elif given in table.col_labels and target in table.row_labels:
        joint = w[table.row_labels.index(target), table.col_labels.index(given)]
        norm = w[:, table.col_labels.index(given)].sum()
    else:
        raise KeyError(f"labels {given!r} and {target!r} are not on opposite axes")
    if norm == 0:
        raise EmptyCondition(f"no weight for condition {given!r}")
    return float(joint / norm)


def mutual_information(table: _LabelledTable | np.ndarray) -> float:
    """Shannon mutual information in bits (plug-in estimate for counts)."""
    w = np.asarray(getattr(table, "weights", table), dtype=float)
    total = w.sum()
    if total <= 0:
        raise ValueError("mutual information of an empty table")
    p = w / total
    outer = p.sum(axis=1, keepdims=True) * p.sum(axis=0, keepdims=True)
    nz = p > 0
    return float(max(np.sum(p[nz] * np.log2(p[nz] / outer[nz])), 0.0))


# Homogeneity / goodness of fit --------------------------------------------------

@dataclass(frozen=True)
class ChiSquareReport:
    statistic: float
    p_value: float
    dof: int
    passed: bool


def _pool_small(expected: np.ndarray) -> list[np.ndarray]:
    """Group cell indices so that each group has enough expected counts.

    ``expected`` has one row per arm; cells whose smallest expectation is
    below :data:`MIN_EXPECTED` are merged into one pooled cell.  Cells with
    zero expectation everywhere are dropped.
    """
    live = expected.sum(axis=0) > 0
    small = live & (expected.min(axis=0) < MIN_EXPECTED)
    groups = [np.array([i]) for i in np.flatnonzero(live & ~small)]
    if small.any():
        groups.append(np.flatnonzero(small))
    return groups


def order_independence_test(table_a: CoincidenceTable, table_b: CoincidenceTable,
                            alpha: float = SIGNIFICANCE) -> ChiSquareReport:
    """Chi-square two-sample homogeneity test over all joint cells."""
    if table_a.row_labels != table_b.row_labels or table_a.col_labels != table_b.col_labels:
        raise ValueError("tables have mismatched labels")
    obs = np.vstack([table_a.counts.ravel(), table_b.counts.ravel()]).astype(float)
    n = obs.sum(axis=1, keepdims=True)
    if np.any(n == 0):
        raise ValueError("homogeneity test needs two non-empty tables")
    expected = n * obs.sum(axis=0) / n.sum()
    groups = _pool_small(expected)
    pooled = np.column_stack([obs[:, g].sum(axis=1) for g in groups])
    if pooled.shape[1] < 2:
        return ChiSquareReport(0.0, 1.0, 0, True)
    res = stats.chi2_contingency(pooled, correction=False)
    return ChiSquareReport(float(res.statistic), float(res.pvalue), int(res.dof), bool(res.pvalue > alpha))


def goodness_of_fit(table: CoincidenceTable, exact: JointDistribution,
                    alpha: float = SIGNIFICANCE) -> ChiSquareReport:
    """Chi-square test of observed counts against exact probabilities.

    Counts landing in a cell of exactly zero probability fail outright.
    """
    if table.row_labels != exact.row_labels or table.col_labels != exact.col_labels:
        raise ValueError("tables have mismatched labels")
    obs = table.counts.ravel().astype(float)
    expected = exact.probs.ravel() / exact.probs.sum() * obs.sum()
    if np.any((expected == 0) & (obs > 0)):
        return ChiSquareReport(np.inf, 0.0, 0, False)
    groups = _pool_small(expected[None, :])
    o = np.array([obs[g].sum() for g in groups])
    e = np.array([expected[g].sum() for g in groups])
    if o.size < 2:
        return ChiSquareReport(0.0, 1.0, 0, True)
    res = stats.chisquare(o, e * o.sum() / e.sum())
    return ChiSquareReport(float(res.statistic), float(res.pvalue), o.size - 1, bool(res.pvalue > alpha))


# Fringes --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FringeHistogram:
    """Screen counts per bin, optionally split by which-way outcome.

    ``envelope`` (expected relative bin weight without interference),
    ``wavenumber`` and ``window`` enable envelope correction, fringe
    smoothing and restriction to ``|x| <= window``; each may be None.
    """

    centers: np.ndarray
    counts: dict
    envelope: np.ndarray | None = None
    wavenumber: float | None = None
    window: float | None = None

    def __post_init__(self):
        centers = np.asarray(self.centers, dtype=float)
        counts = {k: np.asarray(v) for k, v in self.counts.items()}
        for key, c in counts.items():
            if c.shape != centers.shape:
                raise ValueError(f"counts[{key!r}] does not match the bin grid")
            if np.any(c < 0):
                raise ValueError("counts must be non-negative")
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "counts", counts)

    @classmethod
    def from_records(cls, model, records) -> "FringeHistogram":
        """Histogram two-slit trials; ``model`` is the TwoSlitModel they ran on.

        Off-grid landings are not part of any bin.
        """
        if not isinstance(records, TrialBatch):
            raise TypeError("fringe histograms are built from a TrialBatch")
        screen = records.column("screen")
        n = model.n_bins
        counts = {"all": np.bincount(screen, minlength=model.n_outcomes)[:n]}
        for b in records.bases:
            if b.name in ("x", "z"):
                wwd = records.column(b.name)
                for i, label in enumerate(b.labels):
                    counts[label] = np.bincount(screen[wwd == i], minlength=model.n_outcomes)[:n]
        return cls(model.centers, counts, model.envelope_mass, model.wavenumber, model.width)


@dataclass(frozen=True)
class VisibilityReport:
    visibility: float
    max_bin: int
    min_bin: int


def fringe_fit(x: np.ndarray, y: np.ndarray, k: float) -> np.ndarray:
    """Least-squares a + b cos(kx) + c sin(kx), evaluated at ``x``."""
    design = np.column_stack([np.ones_like(x), np.cos(k * x), np.sin(k * x)])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    return design @ coef


def visibility(hist: FringeHistogram, subset: str = "all") -> VisibilityReport:
    """Fringe visibility (max - min) / (max + min) of smoothed bin means.

    Bin means are counts divided by the envelope; when the fringe
    wavenumber is known they are smoothed by projecting onto a single
    sinusoid of that wavenumber, which suppresses shot noise without
    blurring the fringes.
    """
    try:
        counts = np.asarray(hist.counts[subset], dtype=float)
    except KeyError:
        raise KeyError(f"histogram has no {subset!r} counts") from None
    if counts.sum() <= 0:
        raise EmptyHistogram(f"no counts in subset {subset!r}")
    idx = np.arange(counts.size)
    if hist.window is not None:
        idx = idx[np.abs(hist.centers) <= hist.window]
    means = counts[idx]
    if hist.envelope is not None:
        means = means / hist.envelope[idx]
    if hist.wavenumber is not None:
        means = fringe_fit(hist.centers[idx], means, hist.wavenumber)
    means = np.clip(means, 0.0, None)
    hi, lo = int(np.argmax(means)), int(np.argmin(means))
    if means[hi] + means[lo] <= 0:
        raise EmptyHistogram("fringe region holds no counts")
    v = (means[hi] - means[lo]) / (means[hi] + means[lo])
    return VisibilityReport(float(v), int(idx[hi]), int(idx[lo]))
