"""Counterfactual error-rate estimators.

Two estimation routes for group error rates of a binary predictor measured
against the untreated outcome:

* comparison: inverse-probability-of-no-treatment weighted ratios computed
  inside each group's confusion cell;
* proposed: the overall weighted rate multiplied by a group-membership
  ratio built from outcome regressions among untreated rows and a
  group-membership model, which stays computable for groups too small for
  the cell-restricted route.

Estimates carry a ``defined`` flag instead of raising when a denominator
is empty, so replication sweeps can count inestimable cells.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .dataset import AuditDataset, GroupKey

METRICS = ("cFPR", "cFNR")
METHODS = ("comparison", "proposed-internal", "proposed-borrowing")

# weighted sums below this are treated as exactly zero
SUM_FLOOR = 1e-300


class UndefinedOperand(Exception):
    pass


@dataclass
class NuisanceEstimates:
    """Per-row nuisance predictions aligned with a dataset.

    group_prob columns follow ``groups`` (the schema's full group list);
    rows sum to one.
    """

    propensity: np.ndarray  # P(D=1 | A, X, S) per row
    mu0_s1: np.ndarray  # P(Y=1 | D=0, S=1, X) per row
    mu0_s0: np.ndarray  # P(Y=1 | D=0, S=0, X) per row
    mu0_all: np.ndarray  # P(Y=1 | D=0, X) per row
    group_prob: np.ndarray  # (n, K) P(A=a | X)
    groups: tuple[GroupKey, ...]

    def __post_init__(self):
        n = len(self.propensity)
        for name in ("mu0_s1", "mu0_s0", "mu0_all"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} length differs from propensity")
        if self.group_prob.shape != (n, len(self.groups)):
            raise ValueError("group_prob shape does not match groups")
        for name in ("propensity", "mu0_s1", "mu0_s0", "mu0_all"):
            col = getattr(self, name)
            if np.any(col < 0.0) or np.any(col > 1.0):
                raise ValueError(f"{name} outside [0, 1]")
        row_sums = self.group_prob.sum(axis=1)
        if np.any(np.abs(row_sums - 1.0) > 1e-9):
            raise ValueError("group_prob rows must sum to 1")

    def group_column(self, group: GroupKey) -> np.ndarray:
        return self.group_prob[:, self.groups.index(group)]

    def with_group_prob(self, group_prob: np.ndarray) -> "NuisanceEstimates":
        return replace(self, group_prob=group_prob)


@dataclass
class ErrorRateEstimate:
    metric: str  # "cFPR" | "cFNR"
    method: str
    group: GroupKey | None  # None = overall
    value: float | None  # clipped to [0, 1]; None when undefined
    raw_value: float | None = None  # unclipped, for diagnostics
    defined: bool = True
    clipped: bool = False

    def group_label(self) -> str:
        return "overall" if self.group is None else self.group.label()


@dataclass
class DeltaEstimate:
    metric: str  # "delta_cFPR" | "delta_cFNR"
    method: str
    group_a: GroupKey
    group_b: GroupKey
    value: float


def _undefined(metric, method, group) -> ErrorRateEstimate:
    return ErrorRateEstimate(metric=metric, method=method, group=group,
                             value=None, raw_value=None, defined=False)


def _weighted_ratio(numer_ind, denom_ind, weights) -> tuple[float, bool]:
    num = float(np.sum(numer_ind * weights))
    den = float(np.sum(denom_ind * weights))
    if den < SUM_FLOOR:
        return np.nan, False
    return num / den, True


def _cell_indicators(ds: AuditDataset, metric: str):
    untreated = (ds.d == 0).astype(np.float64)
    if metric == "cFPR":
        numer = untreated * ds.s * (1 - ds.y)
        denom = untreated * (1 - ds.y)
    elif metric == "cFNR":
        numer = untreated * (1 - ds.s) * ds.y
        denom = untreated * ds.y
    else:
        raise ValueError(f"unknown metric: {metric!r}")
    return numer, denom


def comparison_rate(ds: AuditDataset, propensity, group: GroupKey,
                    metric: str) -> ErrorRateEstimate:
    """Cell-restricted weighted estimator for one group.

    Untreated rows in the relevant confusion cells, weighted by
    1 / (1 - propensity), restricted to the group. Undefined (not an error)
    when the group contributes no denominator weight.
    """
    numer, denom = _cell_indicators(ds, metric)
    in_group = (ds.group_codes == ds.schema.group_code(group)).astype(np.float64)
    weights = 1.0 / (1.0 - np.asarray(propensity, dtype=np.float64))
    value, ok = _weighted_ratio(numer * in_group, denom * in_group, weights)
    if not ok:
        return _undefined(metric, "comparison", group)
    return ErrorRateEstimate(metric=metric, method="comparison", group=group,
                             value=value, raw_value=value)


def overall_rate(ds: AuditDataset, propensity, metric: str,
                 method: str = "comparison") -> ErrorRateEstimate:
    """Overall weighted rate: the group estimator with the indicator removed."""
    numer, denom = _cell_indicators(ds, metric)
    weights = 1.0 / (1.0 - np.asarray(propensity, dtype=np.float64))
    value, ok = _weighted_ratio(numer, denom, weights)
    if not ok:
        return _undefined(metric, method, None)
    return ErrorRateEstimate(metric=metric, method=method, group=None,
                             value=value, raw_value=value)


def membership_ratio(ds: AuditDataset, nuis: NuisanceEstimates, group: GroupKey,
                     metric: str) -> float:
    """Plug-in estimate of the group-membership probability ratio.

    The numerator conditions on the prediction stratum via the stratified
    untreated outcome regression and the group indicator; the denominator
    uses the unstratified regression and the group-membership model. For the
    false-positive metric the outcome regressions enter as complements.
    Returns NaN when a required sum is zero.
    """
    in_group = (ds.group_codes == ds.schema.group_code(group)).astype(np.float64)
    h_col = nuis.group_column(group)
    if metric == "cFNR":
        mu_strat = nuis.mu0_s0
        mu_all = nuis.mu0_all
        in_stratum = (1 - ds.s).astype(np.float64)
    elif metric == "cFPR":
        mu_strat = 1.0 - nuis.mu0_s1
        mu_all = 1.0 - nuis.mu0_all
        in_stratum = ds.s.astype(np.float64)
    else:
        raise ValueError(f"unknown metric: {metric!r}")

    num_top = float(np.sum(mu_strat * in_group * in_stratum))
    num_bot = float(np.sum(mu_strat * in_stratum))
    den_top = float(np.sum(mu_all * h_col))
    den_bot = float(np.sum(mu_all))
    if num_bot < SUM_FLOOR or den_bot < SUM_FLOOR:
        return np.nan
    den = den_top / den_bot
    if den < SUM_FLOOR:
        return np.nan
    return (num_top / num_bot) / den


def proposed_rate(ds: AuditDataset, nuis: NuisanceEstimates,
                  overall: ErrorRateEstimate, group: GroupKey,
                  method: str = "proposed-internal") -> ErrorRateEstimate:
    """Proposed group estimator: overall rate times the membership ratio.

    The raw product can leave [0, 1]; the reported value is clipped with the
    clipped flag recorded and the raw product kept for diagnostics.
    """
    metric = overall.metric
    if not overall.defined:
        return _undefined(metric, method, group)
    if overall.value == 0.0:
        # multiplicative form: a zero overall rate pins every group at zero
        return ErrorRateEstimate(metric=metric, method=method, group=group,
                                 value=0.0, raw_value=0.0)
    ratio = membership_ratio(ds, nuis, group, metric)
    if np.isnan(ratio):
        return _undefined(metric, method, group)
    raw = overall.value * ratio
    value = min(max(raw, 0.0), 1.0)
    return ErrorRateEstimate(metric=metric, method=method, group=group,
                             value=value, raw_value=raw, clipped=value != raw)


def delta(rate_a: ErrorRateEstimate, rate_b: ErrorRateEstimate) -> DeltaEstimate:
    """Between-group difference of two defined estimates of the same kind."""
    if not (rate_a.defined and rate_b.defined):
        raise UndefinedOperand("both estimates must be defined")
    if rate_a.metric != rate_b.metric or rate_a.method != rate_b.method:
        raise ValueError("estimates must share metric and method")
    if rate_a.group is None or rate_b.group is None:
        raise ValueError("delta compares two groups, not overall rates")
    return DeltaEstimate(
        metric=f"delta_{rate_a.metric}",
        method=rate_a.method,
        group_a=rate_a.group,
        group_b=rate_b.group,
        value=rate_a.value - rate_b.value,
    )


@dataclass
class ErrorRateReport:
    entries: list[ErrorRateEstimate] = field(default_factory=list)

    def lookup(self, group: GroupKey | None, metric: str, method: str) -> ErrorRateEstimate:
        for e in self.entries:
            if e.group == group and e.metric == metric and e.method == method:
                return e
        raise KeyError((group, metric, method))

    def to_json_rows(self) -> list[dict]:
        return [
            {
                "group": e.group_label(),
                "metric": e.metric,
                "method": e.method,
                "value": e.value,
                "raw_value": e.raw_value,
                "defined": e.defined,
                "clipped": e.clipped,
            }
            for e in self.entries
        ]

    def to_csv_rows(self) -> list[list]:
        rows = [["group", "metric", "method", "value", "raw_value", "defined", "clipped"]]
        for e in self.entries:
            rows.append([
                e.group_label(),
                e.metric,
                e.method,
                "NA" if e.value is None else repr(e.value),
                "NA" if e.raw_value is None else repr(e.raw_value),
                str(e.defined),
                str(e.clipped),
            ])
        return rows


def estimate_all(ds: AuditDataset, nuis: NuisanceEstimates,
                 methods=METHODS, borrowed_group_prob: np.ndarray | None = None,
                 ) -> ErrorRateReport:
    """Full report: one estimate per (overall + each schema group) x metric x
    method, in deterministic order. Component failures become undefined
    entries; the report itself always completes.

    borrowed_group_prob supplies the blended group-membership matrix used by
    the "proposed-borrowing" method.
    """
    report = ErrorRateReport()
    groups = ds.schema.all_groups()
    for method in methods:
        if method == "proposed-borrowing":
            if borrowed_group_prob is None:
                continue
            nuis_m = nuis.with_group_prob(borrowed_group_prob)
        else:
            nuis_m = nuis
        for metric in METRICS:
            overall = overall_rate(ds, nuis_m.propensity, metric, method=method)
            report.entries.append(overall)
            for group in groups:
                if method == "comparison":
                    report.entries.append(
                        comparison_rate(ds, nuis_m.propensity, group, metric))
                else:
                    report.entries.append(
                        proposed_rate(ds, nuis_m, overall, group, method=method))
    return report
