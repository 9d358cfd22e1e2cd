"""Stratified cross-validation and Table-style reports."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from joblib import Parallel, delayed
from sklearn.model_selection import StratifiedKFold

from .eegio import Recording
from .pipeline import make_cnn_rnn, make_csp_lda

METHODS = ("cnn_rnn_lstm", "cnn_rnn_gru", "csp_lda")
METHOD_LABELS = {"cnn_rnn_lstm": "CNN-RNN(LSTM)", "cnn_rnn_gru": "CNN-RNN(GRU)", "csp_lda": "CSP+LDA"}


def canonical_method(name: str) -> str:
    key = str(name).lower().replace("-", "_")
    if key not in METHODS:
        raise ValueError("unknown method %r (expected one of %s)"
                         % (name, ", ".join(m.replace("_", "-") for m in METHODS)))
    return key


@dataclass
class FoldPlan:
    """Disjoint stratified test folds covering every trial once."""

    folds: list
    seed: int

    @property
    def k(self) -> int:
        return len(self.folds)

    def train_test(self, i: int):
        test = self.folds[i]
        train = np.sort(np.concatenate([f for j, f in enumerate(self.folds) if j != i]))
        return train, test


def make_fold_plan(labels, k: int = 10, seed: int = 0) -> FoldPlan:
    y = np.asarray(labels)
    classes, counts = np.unique(y, return_counts=True)
    if k < 2:
        raise ValueError("k must be >= 2")
    if counts.min() < k:
        raise ValueError("class %d has %d trials, fewer than k=%d folds"
                         % (classes[counts.argmin()], counts.min(), k))
    skf = StratifiedKFold(n_splits=k, shuffle=True, random_state=seed)
    folds = [np.sort(test) for _, test in skf.split(np.zeros((len(y), 1)), y)]
    return FoldPlan(folds, seed)


@dataclass
class EvalReport:
    """Per-fold accuracies in percent with their mean and population std."""

    method: str
    accuracies: list
    columns: list = None
    curves: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.accuracies = [float(a) for a in self.accuracies]
        if not self.accuracies:
            raise ValueError("a report needs at least one accuracy")
        if any(not 0 <= a <= 100 for a in self.accuracies):
            raise ValueError("accuracies must be percentages in [0, 100]")
        if self.columns is None:
            self.columns = ["F%d" % (i + 1) for i in range(len(self.accuracies))]

    @property
    def mean(self) -> float:
        return float(np.mean(self.accuracies))

    @property
    def std(self) -> float:
        return float(np.std(self.accuracies))


def _method_factory(method, rec: Recording, seed: int, net_params: dict) -> Callable:
    if callable(method):
        return method
    key = canonical_method(method)
    if key == "csp_lda":
        return lambda: make_csp_lda(rec.sample_rate, seed=seed)
    cell = key.rsplit("_", 1)[1]
    return lambda: make_cnn_rnn(rec.layout, rec.sample_rate, cell=cell, seed=seed, **net_params)


def fit_fold(factory, X, y, train, test):
    """Fit a fresh estimator on ``train`` only; return (accuracy %, estimator)."""
    est = factory()
    est.fit(X[train], y[train])
    pred = np.asarray(est.predict(X[test]))
    return 100.0 * float(np.mean(pred == y[test])), est


def cross_validate(rec: Recording, method, k: int = 10, seed: int = 0, n_jobs: int = 1,
                   net_params: dict | None = None, return_estimators: bool = False):
    """k-fold stratified cross-validation of a method on a recording.

    ``method`` is one of :data:`METHODS` (dashes accepted) or a zero-argument
    factory returning an estimator with ``fit``/``predict``. Everything the
    estimator learns comes from the training folds only.
    """
    plan = make_fold_plan(rec.labels, k, seed)
    factory = _method_factory(method, rec, seed, net_params or {})
    X, y = rec.X, rec.labels
    results = Parallel(n_jobs=n_jobs)(
        delayed(fit_fold)(factory, X, y, *plan.train_test(i)) for i in range(plan.k))
    if isinstance(method, str):
        label = METHOD_LABELS[canonical_method(method)]
    else:
        label = getattr(method, "__name__", "custom")
    curves = [_training_log(est) for _, est in results]
    report = EvalReport(label, [acc for acc, _ in results], curves=[c for c in curves if c])
    if return_estimators:
        return report, [est for _, est in results]
    return report


def _training_log(est):
    final = est[-1] if hasattr(est, "steps") else est
    return getattr(final, "training_log_", None)


# ---------------------------------------------------------------------------
# Tables and CSV

def _fmt(x: float, decimals: int) -> str:
    return "%.*f" % (decimals, x)


def format_table(reports, decimals: int = 1, stat_decimals: int = 2) -> str:
    """Rows are methods, columns the folds/subjects followed by Avg and Std."""
    reports = list(reports)
    if not reports:
        raise ValueError("no reports to format")
    cols = reports[0].columns
    if any(len(r.accuracies) != len(cols) for r in reports):
        raise ValueError("inconsistent column counts across reports")
    header = [""] + list(cols) + ["Avg", "Std"]
    rows = [[r.method] + [_fmt(a, decimals) for a in r.accuracies]
            + [_fmt(r.mean, stat_decimals), _fmt(r.std, stat_decimals)] for r in reports]
    widths = [max(len(row[i]) for row in [header] + rows) for i in range(len(header))]
    lines = []
    for row in [header] + rows:
        lines.append("  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(row, widths))))
    rule = "-" * len(lines[0])
    return "\n".join([rule, lines[0], rule] + lines[1:] + [rule]) + "\n"


def parse_table(text: str) -> dict:
    """Inverse of :func:`format_table`: ``method -> (values, avg, std)``."""
    lines = [ln for ln in text.splitlines() if ln.strip() and not set(ln.strip()) <= {"-"}]
    n_cols = len(lines[0].split())
    out = {}
    for ln in lines[1:]:
        parts = ln.split()
        method = " ".join(parts[:len(parts) - n_cols])
        nums = [float(p) for p in parts[len(parts) - n_cols:]]
        out[method] = (nums[:-2], nums[-2], nums[-1])
    return out


def reports_to_csv(reports, path=None, decimals: int = 1) -> str:
    """CSV with one row per method: ``method, <columns...>, avg, std``."""
    reports = list(reports)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["method"] + list(reports[0].columns) + ["avg", "std"])
    for r in reports:
        w.writerow([r.method] + [_fmt(a, decimals) for a in r.accuracies] + [_fmt(r.mean, 2), _fmt(r.std, 2)])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def read_reports_csv(text: str) -> dict:
    rows = list(csv.reader(io.StringIO(text)))
    return {r[0]: ([float(v) for v in r[1:-2]], float(r[-2]), float(r[-1])) for r in rows[1:]}


def epoch_curve(log) -> list:
    """``(epoch, accuracy)`` pairs from a training log, epochs numbered consecutively across steps."""
    log = list(log)
    if not log:
        raise ValueError("empty training log")
    return [(i + 1, float(row["accuracy"])) for i, row in enumerate(log)]


def epoch_curve_csv(log, path=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["epoch", "step", "accuracy", "loss"])
    for (epoch, acc), row in zip(epoch_curve(log), log):
        w.writerow([epoch, row.get("step", ""), repr(acc), repr(float(row.get("loss", math.nan)))])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def read_epoch_csv(text: str) -> list:
    rows = list(csv.DictReader(io.StringIO(text)))
    return [(int(r["epoch"]), float(r["accuracy"])) for r in rows]
