"""Bootstrap confidence intervals for the error-rate estimates.

Nonparametric bootstrap stratified by protected group: every replicate keeps
each group's row count, re-fits all nuisance models and the borrowing weight,
and re-computes every estimate. Intervals are t-intervals around the
full-sample point estimate, truncated to [0, 1]. Replicates where a cell is
inestimable are recorded as NA and excluded from the standard error.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.stats import t as t_dist

from .dataset import AuditDataset, ExternalDataset, GroupKey
from .pipeline import PipelineConfig, run_pipeline


@dataclass
class BootstrapResult:
    point: float | None
    replicates: np.ndarray  # (B,) with NaN marking NA replicates
    se: float | None
    lower: float | None
    upper: float | None
    B: int
    na_count: int
    level: float
    seed: int
    truncated_low: bool = False
    truncated_high: bool = False

    @property
    def all_na(self) -> bool:
        return self.na_count == self.B


def stratified_resample(ds: AuditDataset, rng) -> AuditDataset:
    """Resample rows with replacement within each group; per-group counts are
    preserved exactly. Groups are visited in schema order for determinism."""
    chosen = []
    for group in ds.schema.all_groups():
        idx = ds.group_index[group]
        if len(idx) == 0:
            continue
        chosen.append(idx[rng.integers(0, len(idx), size=len(idx))])
    return ds.take(np.concatenate(chosen))


def _replicate_values(args):
    internal, external, config, child_seq, keys = args
    rng = np.random.default_rng(child_seq)
    resampled = stratified_resample(internal, rng)
    pipeline_seed = int(rng.integers(0, 2**31 - 1))
    values = np.full(len(keys), np.nan)
    try:
        result = run_pipeline(resampled, external, config, pipeline_seed)
    except Exception:
        return values  # whole replicate inestimable
    lookup = {}
    for e in result.report.entries:
        lookup[(e.group, e.metric, e.method)] = e.value if e.defined else np.nan
    for j, key in enumerate(keys):
        values[j] = lookup.get(key, np.nan)
    return values


def bootstrap_estimates(internal: AuditDataset, external: ExternalDataset | None,
                        config: PipelineConfig, B: int, seed: int,
                        level: float = 0.95, n_jobs: int = 1,
                        ) -> dict[tuple[GroupKey | None, str, str], BootstrapResult]:
    """Bootstrap every cell of the estimate report.

    Returns a map (group-or-None, metric, method) -> BootstrapResult. The
    interval is point +/- t_{B-1, 1-(1-level)/2} * se, truncated to [0, 1];
    it is absent (None bounds) when the point estimate is undefined or every
    replicate came back NA.
    """
    if B < 2:
        raise ValueError("B must be at least 2")
    point_run = run_pipeline(internal, external, config, seed)
    keys = [(e.group, e.metric, e.method) for e in point_run.report.entries]
    points = {key: (e.value if e.defined else None)
              for key, e in zip(keys, point_run.report.entries)}

    root = np.random.SeedSequence(seed)
    children = root.spawn(B)  # SeedSequence pickles, so tasks work across processes
    tasks = [(internal, external, config, child, keys) for child in children]

    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            replicate_rows = list(pool.map(_replicate_values, tasks))
    else:
        replicate_rows = [_replicate_values(task) for task in tasks]
    matrix = np.vstack(replicate_rows)  # (B, cells)

    t_mult = float(t_dist.ppf(1.0 - (1.0 - level) / 2.0, df=B - 1))
    out = {}
    for j, key in enumerate(keys):
        reps = matrix[:, j]
        na_count = int(np.sum(np.isnan(reps)))
        point = points[key]
        if point is None or na_count == B:
            out[key] = BootstrapResult(point=point, replicates=reps, se=None,
                                       lower=None, upper=None, B=B,
                                       na_count=na_count, level=level, seed=seed)
            continue
        good = reps[~np.isnan(reps)]
        se = float(np.std(good, ddof=1)) if len(good) > 1 else 0.0
        raw_lo = point - t_mult * se
        raw_hi = point + t_mult * se
        lower = max(raw_lo, 0.0)
        upper = min(raw_hi, 1.0)
        out[key] = BootstrapResult(
            point=point, replicates=reps, se=se, lower=lower, upper=upper,
            B=B, na_count=na_count, level=level, seed=seed,
            truncated_low=raw_lo < 0.0, truncated_high=raw_hi > 1.0,
        )
    return out
