"""Classifier evaluation: accuracy, calibration, uncertainty correlation.

Confidence is the max class probability; the predicted label is the argmax
(ties go to the lowest class index). Expected calibration error uses M
equal-width confidence bins over (0, 1]: bin i covers (i/M, (i+1)/M], with
bin 0 closed at 0 so confidence 0 still lands somewhere. Empty bins
contribute nothing:

    ECE = sum_i  n_i / N * |acc_i - conf_i|
"""

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from ._fileio import atomic_text, fmt
from .errors import (EmptyInput, MissingSigma, ParseError, TooFewValues,
                     ZeroVariance)

DEFAULT_BINS = 15
DEFAULT_QUARTILES = 4


@dataclass
class PredictionRecord:
    """One classifier output row: sample id, true label, class probabilities."""

    sample_id: str
    true_label: int
    probs: np.ndarray

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=np.float64)
        if self.probs.ndim != 1 or self.probs.size < 2:
            raise ValueError("probs must be a vector with at least 2 classes")
        if np.any(self.probs < 0.0):
            raise ValueError(f"{self.sample_id}: negative probability")
        total = float(self.probs.sum())
        if abs(total - 1.0) > 1e-6:
            raise ValueError(f"{self.sample_id}: probabilities sum to {total}, not 1")
        if not 0 <= self.true_label < self.probs.size:
            raise ValueError(f"{self.sample_id}: true_label {self.true_label} "
                             f"out of range for {self.probs.size} classes")

    @property
    def confidence(self):
        return float(self.probs.max())

    @property
    def predicted_label(self):
        # argmax takes the first maximum, i.e. the lowest class index on ties
        return int(np.argmax(self.probs))


def predicted_uncertainty(record):
    """Model's own uncertainty for one prediction: 1 - max probability."""
    return 1.0 - record.confidence


def accuracy(records):
    """Fraction of records whose argmax matches the true label."""
    if not records:
        raise EmptyInput("no prediction records")
    hits = sum(1 for r in records if r.predicted_label == r.true_label)
    return hits / len(records)


@dataclass(frozen=True)
class CalibrationBin:
    """One reliability-curve bin over the confidence interval (lo, hi]."""

    lo: float
    hi: float
    count: int
    mean_conf: float  # 0.0 when the bin is empty
    mean_acc: float   # 0.0 when the bin is empty


def _conf_correct(records):
    conf = np.array([r.confidence for r in records], dtype=np.float64)
    correct = np.array([r.predicted_label == r.true_label for r in records],
                       dtype=np.float64)
    return conf, correct


def reliability_curve(records, bins=DEFAULT_BINS):
    """Per-bin counts, mean confidence and mean accuracy.

    Bin membership is decided by direct comparison against the bin edges
    i/bins, never by rescaling, so boundary confidences land exactly where
    the interval definition says.
    """
    if bins < 1:
        raise ValueError(f"bins must be >= 1, got {bins}")
    if not records:
        raise EmptyInput("no prediction records")
    conf, correct = _conf_correct(records)
    edges = np.arange(1, bins) / bins
    idx = np.digitize(conf, edges, right=True)

    out = []
    for i in range(bins):
        sel = idx == i
        n = int(sel.sum())
        mean_conf = float(conf[sel].mean()) if n else 0.0
        mean_acc = float(correct[sel].mean()) if n else 0.0
        out.append(CalibrationBin(lo=i / bins, hi=(i + 1) / bins, count=n,
                                  mean_conf=mean_conf, mean_acc=mean_acc))
    return out


def ece(records, bins=DEFAULT_BINS):
    """Expected calibration error, computed from the reliability curve."""
    curve = reliability_curve(records, bins)
    return ece_from_curve(curve, sum(b.count for b in curve))


def ece_from_curve(curve, total):
    """Reduce reliability-curve bins to the scalar ECE."""
    if total <= 0:
        raise EmptyInput("no prediction records")
    return float(sum(b.count / total * abs(b.mean_acc - b.mean_conf)
                     for b in curve))


def pearson(xs, ys):
    """Pearson correlation of two equal-length real vectors.

    Two-pass, mean-centered computation; the result is clipped to [-1, 1]
    to absorb last-ulp rounding. Raises ZeroVariance when either input is
    constant: correlation is undefined there, and callers must surface that
    rather than coerce it to a number.
    """
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.ndim != 1 or x.shape != y.shape:
        raise ValueError("xs and ys must be equal-length 1-D vectors")
    if x.size < 2:
        raise ValueError("need at least 2 values")
    xc = x - x.mean()
    yc = y - y.mean()
    sxx = float(xc @ xc)
    syy = float(yc @ yc)
    if sxx == 0.0 or syy == 0.0:
        raise ZeroVariance("one of the inputs is constant")
    r = float(xc @ yc) / float(np.sqrt(sxx * syy))
    return min(1.0, max(-1.0, r))


def uncertainty_correlation(records, sigma_by_id):
    """Correlate predicted uncertainty (1 - confidence) with per-sample sigma.

    sigma_by_id maps sample_id to the sample's mean ground-truth noise
    scale. Every record must have an entry; fewer than two records leaves
    the correlation undefined.
    """
    missing = sorted(r.sample_id for r in records if r.sample_id not in sigma_by_id)
    if missing:
        raise MissingSigma(missing)
    if len(records) < 2:
        raise ZeroVariance("need at least 2 records to correlate")
    xs = [sigma_by_id[r.sample_id] for r in records]
    ys = [predicted_uncertainty(r) for r in records]
    return pearson(xs, ys)


def quartile_bins(values, groups=DEFAULT_QUARTILES):
    """Split values into `groups` contiguous rank groups of near-equal size.

    Values are stable-sorted ascending and cut into groups whose sizes
    differ by at most one, larger groups first (10 values into 4 groups
    gives sizes 3, 3, 2, 2). Returns (boundaries, assignment) where
    boundaries[g] is the (lo, hi) value range of group g and assignment
    maps each input position to its group index. Ties at a boundary stay
    in input order thanks to the stable sort.
    """
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError("values must be 1-D")
    if groups < 1:
        raise ValueError(f"groups must be >= 1, got {groups}")
    if v.size < groups:
        raise TooFewValues(f"need at least {groups} values, got {v.size}")

    order = np.argsort(v, kind="stable")
    base, extra = divmod(v.size, groups)
    sizes = [base + 1] * extra + [base] * (groups - extra)

    assignment = np.empty(v.size, dtype=np.intp)
    boundaries = []
    pos = 0
    for g, size in enumerate(sizes):
        members = order[pos:pos + size]
        assignment[members] = g
        boundaries.append((float(v[members[0]]), float(v[members[-1]])))
        pos += size
    return boundaries, assignment


@dataclass(frozen=True)
class QuartileEce:
    """Calibration error within one pooled-sigma rank group."""

    quartile: int
    sigma_lo: float
    sigma_hi: float
    count: int
    ece: float


def stratified_ece(tier_sets, quartiles=DEFAULT_QUARTILES, bins=DEFAULT_BINS):
    """ECE stratified by ground-truth noise scale, pooled across tiers.

    tier_sets is a sequence of (records, sigma_by_id) pairs, one per noise
    tier. All (record, sigma) pairs are pooled, ranked by sigma (ties
    resolved by sample id, then input order), and split into near-equal
    rank groups; quartile 0 holds the least-noisy samples. Each group's
    records are scored with ece(..., bins).
    """
    pooled = []
    for records, sigma_by_id in tier_sets:
        missing = sorted(r.sample_id for r in records if r.sample_id not in sigma_by_id)
        if missing:
            raise MissingSigma(missing)
        pooled.extend((sigma_by_id[r.sample_id], r) for r in records)
    if not pooled:
        raise EmptyInput("no prediction records in any tier")

    # pre-sort by sample id so the stable sigma sort breaks ties on it
    pooled.sort(key=lambda pair: pair[1].sample_id)
    sigmas = [s for s, _ in pooled]
    boundaries, assignment = quartile_bins(sigmas, groups=quartiles)

    out = []
    for g, (lo, hi) in enumerate(boundaries):
        members = [pooled[i][1] for i in np.flatnonzero(assignment == g)]
        out.append(QuartileEce(quartile=g, sigma_lo=lo, sigma_hi=hi,
                               count=len(members), ece=ece(members, bins)))
    return out


@dataclass
class EvalReport:
    """Everything the evaluate command reports for one prediction file."""

    accuracy: float
    ece: float
    curve: list
    pearson_r: Optional[float]  # None when correlation is undefined
    n: int
    bin_count: int
    stratified: Optional[list] = None


def evaluate(records, sigma_by_id, bins=DEFAULT_BINS, tier_sets=None,
             quartiles=DEFAULT_QUARTILES):
    """Score one prediction set against its sigma summary.

    A constant input on either side of the uncertainty correlation (for
    example the zero-noise tier, where sigma is identically 0) yields
    pearson_r=None; accuracy and calibration are still reported. Passing
    tier_sets additionally computes the pooled sigma-stratified ECE.
    """
    curve = reliability_curve(records, bins)
    report = EvalReport(
        accuracy=accuracy(records),
        ece=ece_from_curve(curve, len(records)),
        curve=curve,
        pearson_r=None,
        n=len(records),
        bin_count=bins,
    )
    try:
        report.pearson_r = uncertainty_correlation(records, sigma_by_id)
    except ZeroVariance:
        report.pearson_r = None
    if tier_sets is not None:
        report.stratified = stratified_ece(tier_sets, quartiles=quartiles,
                                           bins=bins)
    return report


def read_predictions(path):
    """Parse a predictions CSV: sample_id,true_label,p_0,...,p_{C-1}."""
    records = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ParseError("missing predictions header", path=path, line=1)
        if (len(header) < 4 or header[:2] != ["sample_id", "true_label"]
                or header[2:] != [f"p_{i}" for i in range(len(header) - 2)]):
            raise ParseError(f"bad predictions header {header!r}", path=path, line=1)
        classes = len(header) - 2
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != classes + 2:
                raise ParseError(f"expected {classes + 2} columns, got {len(row)}",
                                 path=path, line=lineno)
            try:
                record = PredictionRecord(sample_id=row[0], true_label=int(row[1]),
                                          probs=[float(p) for p in row[2:]])
            except ValueError as exc:
                raise ParseError(str(exc), path=path, line=lineno) from None
            records.append(record)
    if not records:
        raise EmptyInput(f"{path}: no prediction rows")
    return records


def read_sigma_summary(path):
    """Parse a sigma summary CSV into {sample_id: mean_sigma}."""
    expected = ["sample_id", "label", "mean_sigma", "mean_mu", "outlier_count"]
    table = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ParseError("missing summary header", path=path, line=1)
        if header != expected:
            raise ParseError(f"bad summary header {header!r}", path=path, line=1)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 5:
                raise ParseError(f"expected 5 columns, got {len(row)}",
                                 path=path, line=lineno)
            sid = row[0]
            if sid in table:
                raise ParseError(f"duplicate sample_id {sid!r}", path=path, line=lineno)
            try:
                table[sid] = float(row[2])
            except ValueError:
                raise ParseError(f"bad mean_sigma {row[2]!r}", path=path,
                                 line=lineno) from None
    if not table:
        raise EmptyInput(f"{path}: no summary rows")
    return table


def write_report(out_dir, report):
    """Write report.txt and curve.csv (plus stratified.csv when present)."""
    out_dir = Path(out_dir)
    with atomic_text(out_dir / "report.txt") as fh:
        fh.write(f"accuracy={fmt(report.accuracy)}\n")
        fh.write(f"ece={fmt(report.ece)}\n")
        if report.pearson_r is None:
            fh.write("pearson_r=undefined(zero_variance)\n")
        else:
            fh.write(f"pearson_r={fmt(report.pearson_r)}\n")
        fh.write(f"n={report.n}\n")
        fh.write(f"bins={report.bin_count}\n")
    write_curve(out_dir / "curve.csv", report.curve)
    if report.stratified is not None:
        write_stratified(out_dir / "stratified.csv", report.stratified)


def write_curve(path, curve):
    with atomic_text(path) as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_lo", "bin_hi", "count", "mean_conf", "mean_acc"])
        for b in curve:
            writer.writerow([fmt(b.lo), fmt(b.hi), b.count, fmt(b.mean_conf),
                             fmt(b.mean_acc)])


def write_stratified(path, rows):
    with atomic_text(path) as fh:
        writer = csv.writer(fh)
        writer.writerow(["quartile", "sigma_lo", "sigma_hi", "count", "ece"])
        for q in rows:
            writer.writerow([q.quartile, fmt(q.sigma_lo), fmt(q.sigma_hi),
                             q.count, fmt(q.ece)])
