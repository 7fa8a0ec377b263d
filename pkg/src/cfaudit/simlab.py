"""Simulation laboratory with a potential-outcome ground truth.

The generative process draws standard-normal covariates (informative columns
plus pure-noise columns with zero coefficients everywhere), samples the
protected-group vector from a softmax-linear model in the informative
covariates, both potential outcomes from logistic models, scores each unit
with a shared bagged-tree risk model, and finally assigns treatment from a
logistic model that sees the risk flag. External populations carry only
covariates and group labels; their group-model coefficients are first
multiplied by the agreement factor b in [-1, 1].

True error rates come from exact counting of (prediction, untreated outcome,
group) over a large validation draw, never from any estimator.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dataset import AuditDataset, ExternalDataset, GroupKey, SchemaSpec
from .models import BinarySpec, MulticlassConfig, sigmoid
from .pipeline import PipelineConfig, run_pipeline

SIM_LEVELS = ("0", "1")
SIM_GROUPS = tuple(GroupKey(levels) for levels in itertools.product(SIM_LEVELS, SIM_LEVELS))
# columns of the group coefficient matrix follow SIM_GROUPS:
# (0,0) majority, (0,1) M2, (1,0) M1, (1,1) minority
INTERACTION_PAIRS = tuple(itertools.combinations(range(4), 2))
INTERACTION_TRIPLES = tuple(itertools.combinations(range(4), 3))


class SimulationError(Exception):
    pass


class DegenerateOutcome(SimulationError):
    pass


@dataclass
class DgpCoefficients:
    """Linear-predictor coefficients of the generative models.

    Layouts (intercept first, interaction terms last when enabled):
      group:     (4, 1 + p_informative [+ 10])      class scores for SIM_GROUPS
      y0, y1:    (1 + p_informative + 2 [+ 10],)    covariates then a1, a2
      treatment: (1 + p_informative + 3 [+ 10],)    covariates, a1, a2, then s
    """

    group: np.ndarray
    y0: np.ndarray
    y1: np.ndarray
    treatment: np.ndarray

    def to_dict(self) -> dict:
        return {
            "group": self.group.tolist(),
            "y0": self.y0.tolist(),
            "y1": self.y1.tolist(),
            "treatment": self.treatment.tolist(),
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "DgpCoefficients":
        return cls(
            group=np.asarray(raw["group"], dtype=np.float64),
            y0=np.asarray(raw["y0"], dtype=np.float64),
            y1=np.asarray(raw["y1"], dtype=np.float64),
            treatment=np.asarray(raw["treatment"], dtype=np.float64),
        )


def default_coefficients(p_informative: int = 10, interactions: bool = False) -> DgpCoefficients:
    """Artifact default parameterization: group shares near (55, 20, 20, 5)%
    with the last group rarest, moderate outcome prevalence, and treatment
    that responds to the risk flag. Defined for 10 informative covariates."""
    if p_informative != 10:
        raise ValueError("default coefficients are defined for 10 informative covariates")
    p = p_informative

    def vec(intercept, slopes):
        v = np.zeros(1 + p)
        v[0] = intercept
        for idx, val in slopes.items():
            v[1 + idx] = val
        return v

    group = np.vstack([
        vec(0.0, {}),                       # majority (0,0): reference scores
        vec(-1.15, {1: 0.8, 2: -0.4}),      # (0,1)
        vec(-1.15, {0: 0.8, 2: 0.4}),       # (1,0)
        vec(-2.45, {0: 0.5, 1: 0.5}),       # (1,1) minority
    ])
    y0 = np.concatenate([vec(-1.90, {0: 2.0, 1: 1.6, 2: -1.2, 3: 0.8}), [0.0, 0.0]])
    y1 = np.concatenate([vec(-2.70, {0: 2.0, 1: 1.6, 2: -1.2, 3: 0.8}), [0.0, 0.0]])
    treatment = np.concatenate([vec(-1.10, {0: 0.3}), [0.0, 0.0, 1.40]])

    if interactions:
        inter_group = np.tile(np.array([0.0, *([0.25] * 3), *([-0.25] * 3), 0.15, -0.15, 0.15]),
                              (4, 1)) * np.array([[0.0], [1.0], [-1.0], [0.5]])
        group = np.hstack([group, inter_group])
        inter_y = np.array([0.3, -0.3, 0.2, 0.0, 0.2, -0.2, 0.15, 0.0, -0.15, 0.1])
        y0 = np.concatenate([y0, inter_y])
        y1 = np.concatenate([y1, inter_y])
        treatment = np.concatenate([treatment, 0.5 * inter_y])
    return DgpCoefficients(group=group, y0=y0, y1=y1, treatment=treatment)


def default_sim_pipeline() -> PipelineConfig:
    """Pipeline defaults for simulation runs: lightly ridged logistic
    nuisances (small samples produce constant-outcome strata) and
    single-hidden-layer membership models as in the reference setup."""
    return PipelineConfig(
        pi=BinarySpec(l2=0.01),
        mu=BinarySpec(l2=0.01),
        h_internal=MulticlassConfig(kind="mlp-1hidden", hidden=100, decay=1.0),
        h_external=MulticlassConfig(kind="mlp-1hidden", hidden=100, decay=1.0),
        crossfit_k=1,
    )


@dataclass
class ScenarioConfig:
    n_internal: int = 1000
    n_external: int = 10000
    n_train: int = 1000
    n_validation: int = 50000
    b: float = 1.0  # external-agreement multiplier in [-1, 1]
    p_informative: int = 10
    p_noise: int = 0
    interactions: bool = False
    replications: int = 500
    seed: int = 0
    coeffs: DgpCoefficients | None = None  # None -> defaults
    positive_rate: float = 0.2
    n_trees: int = 100
    max_depth: int = 4
    pipeline: PipelineConfig = field(default_factory=default_sim_pipeline)

    def __post_init__(self):
        if not -1.0 <= self.b <= 1.0:
            raise ValueError("b must lie in [-1, 1]")
        for name in ("n_internal", "n_external", "n_train", "n_validation",
                     "p_informative", "replications"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.coeffs is None:
            self.coeffs = default_coefficients(self.p_informative, self.interactions)
        self._check_shapes()

    def _check_shapes(self):
        n_inter = (len(INTERACTION_PAIRS) + len(INTERACTION_TRIPLES)) if self.interactions else 0
        f_group = 1 + self.p_informative + n_inter
        if self.coeffs.group.shape != (len(SIM_GROUPS), f_group):
            raise ValueError(f"group coefficients must have shape (4, {f_group})")
        f_y = 1 + self.p_informative + 2 + n_inter
        for name in ("y0", "y1"):
            if getattr(self.coeffs, name).shape != (f_y,):
                raise ValueError(f"{name} coefficients must have length {f_y}")
        if self.coeffs.treatment.shape != (f_y + 1,):
            raise ValueError(f"treatment coefficients must have length {f_y + 1}")


def scenario_to_dict(cfg: ScenarioConfig) -> dict:
    from .pipeline import pipeline_to_dict
    return {
        "n_internal": cfg.n_internal,
        "n_external": cfg.n_external,
        "n_train": cfg.n_train,
        "n_validation": cfg.n_validation,
        "b": cfg.b,
        "p_informative": cfg.p_informative,
        "p_noise": cfg.p_noise,
        "interactions": cfg.interactions,
        "replications": cfg.replications,
        "seed": cfg.seed,
        "coefficients": cfg.coeffs.to_dict(),
        "positive_rate": cfg.positive_rate,
        "n_trees": cfg.n_trees,
        "max_depth": cfg.max_depth,
        "pipeline": pipeline_to_dict(cfg.pipeline),
    }


def scenario_from_dict(raw: dict) -> ScenarioConfig:
    from .pipeline import pipeline_from_dict
    kwargs = {}
    for name in ("n_internal", "n_external", "n_train", "n_validation",
                 "p_informative", "p_noise", "replications", "seed",
                 "n_trees", "max_depth"):
        if name in raw:
            kwargs[name] = int(raw[name])
    for name in ("b", "positive_rate"):
        if name in raw:
            kwargs[name] = float(raw[name])
    if "interactions" in raw:
        kwargs["interactions"] = bool(raw["interactions"])
    if "coefficients" in raw:
        kwargs["coeffs"] = DgpCoefficients.from_dict(raw["coefficients"])
    if "pipeline" in raw:
        kwargs["pipeline"] = pipeline_from_dict(raw["pipeline"])
    return ScenarioConfig(**kwargs)


def sim_schema(cfg: ScenarioConfig) -> SchemaSpec:
    p_total = cfg.p_informative + cfg.p_noise
    covs = tuple(f"x{j + 1}" for j in range(p_total))
    return SchemaSpec(
        characteristics=("a1", "a2"),
        level_sets=(SIM_LEVELS, SIM_LEVELS),
        treatment="d",
        outcome="y",
        prediction="s",
        covariates=covs,
        external_covariates=covs,
    )


@dataclass(frozen=True)
class PotentialRecord:
    group: GroupKey
    x: np.ndarray
    y0: int | None
    y1: int | None
    d: int | None
    y: int | None
    s: int | None


@dataclass
class Population:
    role: str  # "train" | "validation" | "internal" | "external"
    x: np.ndarray
    group_codes: np.ndarray
    y0: np.ndarray | None = None
    y1: np.ndarray | None = None
    d: np.ndarray | None = None
    y: np.ndarray | None = None
    s: np.ndarray | None = None

    @property
    def n(self) -> int:
        return len(self.group_codes)

    def records(self):
        def pick(col, i):
            return None if col is None else int(col[i])
        for i in range(self.n):
            yield PotentialRecord(
                group=SIM_GROUPS[self.group_codes[i]],
                x=self.x[i].copy(),
                y0=pick(self.y0, i), y1=pick(self.y1, i),
                d=pick(self.d, i), y=pick(self.y, i), s=pick(self.s, i),
            )


def _interaction_block(x_inf) -> np.ndarray:
    cols = [x_inf[:, i] * x_inf[:, j] for i, j in INTERACTION_PAIRS]
    cols += [x_inf[:, i] * x_inf[:, j] * x_inf[:, k] for i, j, k in INTERACTION_TRIPLES]
    return np.column_stack(cols)


def _design(cfg, x, extra_cols=()):
    """[1, informative x, extra columns..., interactions] matching the
    coefficient layouts."""
    n = x.shape[0]
    parts = [np.ones((n, 1)), x[:, : cfg.p_informative]]
    parts.extend(np.asarray(c, dtype=np.float64).reshape(n, 1) for c in extra_cols)
    if cfg.interactions:
        parts.append(_interaction_block(x[:, : cfg.p_informative]))
    return np.hstack(parts)


def _softmax_rows(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _sample_categorical(probs, rng):
    u = rng.random(probs.shape[0])
    cum = np.cumsum(probs, axis=1)
    return np.sum(u[:, None] > cum, axis=1)


def generate_population(cfg: ScenarioConfig, role: str, seed,
                        risk_model: "RiskModel | None" = None) -> Population:
    """Draw one population for the given role; bit-reproducible given seed.

    Internal populations require the shared risk model, because treatment is
    assigned after scoring. External populations stop at (x, group)."""
    sizes = {"train": cfg.n_train, "validation": cfg.n_validation,
             "internal": cfg.n_internal, "external": cfg.n_external}
    if role not in sizes:
        raise ValueError(f"unknown role: {role!r}")
    n = sizes[role]
    rng = np.random.default_rng(seed)

    x = rng.standard_normal((n, cfg.p_informative + cfg.p_noise))
    group_coef = cfg.coeffs.group * cfg.b if role == "external" else cfg.coeffs.group
    group_design = _design(cfg, x)
    codes = _sample_categorical(_softmax_rows(group_design @ group_coef.T), rng)
    if role == "external":
        return Population(role=role, x=x, group_codes=codes)

    a1 = np.array([int(g.levels[0]) for g in SIM_GROUPS])[codes]
    a2 = np.array([int(g.levels[1]) for g in SIM_GROUPS])[codes]
    y_design = _design(cfg, x, extra_cols=(a1, a2))
    y0 = (rng.random(n) < sigmoid(y_design @ cfg.coeffs.y0)).astype(np.int8)
    y1 = (rng.random(n) < sigmoid(y_design @ cfg.coeffs.y1)).astype(np.int8)

    if role == "internal":
        if risk_model is None:
            raise ValueError("internal populations need the risk model to assign treatment")
        s = risk_model.predict(x)
        d_design = _design(cfg, x, extra_cols=(a1, a2, s))
        d = (rng.random(n) < sigmoid(d_design @ cfg.coeffs.treatment)).astype(np.int8)
        y = (d * y1 + (1 - d) * y0).astype(np.int8)
        return Population(role=role, x=x, group_codes=codes,
                          y0=y0, y1=y1, d=d, y=y, s=s)

    # train / validation: untreated world
    d = np.zeros(n, dtype=np.int8)
    s = risk_model.predict(x) if risk_model is not None else None
    return Population(role=role, x=x, group_codes=codes,
                      y0=y0, y1=y1, d=d, y=y0.copy(), s=s)


# ---------------------------------------------------------------------------
# risk model: bagged depth-limited CART trees, Gini splits


@dataclass
class _Tree:
    feature: np.ndarray  # -1 marks a leaf
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray


def _best_split(x, y):
    n = len(y)
    best_score, best_feature, best_threshold = np.inf, None, None
    for j in range(x.shape[1]):
        order = np.argsort(x[:, j], kind="stable")
        xs = x[order, j]
        ys = y[order]
        cut = np.flatnonzero(xs[:-1] < xs[1:])
        if cut.size == 0:
            continue
        n_left = (cut + 1).astype(np.float64)
        n_right = n - n_left
        pos_left = np.cumsum(ys)[cut].astype(np.float64)
        pos_right = float(ys.sum()) - pos_left
        gini_left = 1.0 - (pos_left / n_left) ** 2 - (1.0 - pos_left / n_left) ** 2
        gini_right = 1.0 - (pos_right / n_right) ** 2 - (1.0 - pos_right / n_right) ** 2
        score = (n_left * gini_left + n_right * gini_right) / n
        m = int(np.argmin(score))
        if score[m] < best_score:
            best_score = float(score[m])
            best_feature = j
            best_threshold = 0.5 * (xs[cut[m]] + xs[cut[m] + 1])
    return best_feature, best_threshold


def _grow_tree(x, y, max_depth) -> _Tree:
    feature, threshold, left, right, value = [], [], [], [], []

    def rec(idx, depth):
        node = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(node)
        right.append(node)
        value.append(float(y[idx].mean()))
        if depth < max_depth and len(idx) >= 2 and y[idx].min() != y[idx].max():
            f, t = _best_split(x[idx], y[idx])
            if f is not None:
                mask = x[idx, f] <= t
                feature[node] = f
                threshold[node] = float(t)
                left[node] = rec(idx[mask], depth + 1)
                right[node] = rec(idx[~mask], depth + 1)
        return node

    rec(np.arange(len(y)), 0)
    return _Tree(
        feature=np.asarray(feature, dtype=np.int64),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        value=np.asarray(value, dtype=np.float64),
    )


def _tree_scores(tree: _Tree, x, max_depth) -> np.ndarray:
    node = np.zeros(x.shape[0], dtype=np.int64)
    rows = np.arange(x.shape[0])
    for _ in range(max_depth):
        f = tree.feature[node]
        internal = f >= 0
        if not internal.any():
            break
        go_left = np.zeros(len(node), dtype=bool)
        go_left[internal] = x[rows[internal], f[internal]] <= tree.threshold[node[internal]]
        node = np.where(internal, np.where(go_left, tree.left[node], tree.right[node]), node)
    return tree.value[node]


@dataclass
class RiskModel:
    trees: list
    threshold: float
    max_depth: int
    seed: int

    def predict_score(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        total = np.zeros(x.shape[0])
        for tree in self.trees:
            total += _tree_scores(tree, x, self.max_depth)
        return total / len(self.trees)

    def predict(self, x) -> np.ndarray:
        return (self.predict_score(x) >= self.threshold).astype(np.int8)


def train_risk_model(x, y, n_trees=100, max_depth=4, positive_rate=0.2,
                     seed=0) -> RiskModel:
    """Bagged classification trees scoring P(y=1|x), thresholded at the
    training-score quantile that flags the requested share of rows."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y)
    if y.min() == y.max():
        raise DegenerateOutcome("training outcome is constant")
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    trees = []
    for child in root.spawn(n_trees):
        rng = np.random.default_rng(child)
        boot = rng.integers(0, len(y), size=len(y))
        trees.append(_grow_tree(x[boot], y[boot], max_depth))
    model = RiskModel(trees=trees, threshold=0.0, max_depth=max_depth,
                      seed=seed if isinstance(seed, int) else -1)
    scores = model.predict_score(x)
    k = min(int(np.floor(len(y) * (1.0 - positive_rate))), len(y) - 1)
    model.threshold = float(np.sort(scores)[k])
    return model


# ---------------------------------------------------------------------------
# oracle truth by exact counting


@dataclass
class OracleTruth:
    """True counterfactual error rates counted from (s, y0, group); NaN marks
    groups with an empty conditioning event."""

    rates: dict  # (GroupKey | None, metric) -> float

    def get(self, group, metric) -> float:
        return self.rates[(group, metric)]

    def to_rows(self) -> list[dict]:
        return [
            {"group": "overall" if g is None else g.label(), "metric": m,
             "value": None if np.isnan(v) else v}
            for (g, m), v in self.rates.items()
        ]


def _count_rate(mask_event, mask_condition) -> float:
    denom = int(np.sum(mask_condition))
    if denom == 0:
        return np.nan
    return float(np.sum(mask_event & mask_condition)) / denom


def oracle_error_rates(validation: Population, model: RiskModel) -> OracleTruth:
    """Exact-count cFPR/cFNR per group and overall on a validation draw."""
    if validation.y0 is None:
        raise ValueError("validation population must carry the untreated outcome")
    s = model.predict(validation.x).astype(bool)
    y0 = validation.y0.astype(bool)
    rates = {}
    rates[(None, "cFPR")] = _count_rate(s, ~y0)
    rates[(None, "cFNR")] = _count_rate(~s, y0)
    for code, group in enumerate(SIM_GROUPS):
        in_group = validation.group_codes == code
        rates[(group, "cFPR")] = _count_rate(s, ~y0 & in_group)
        rates[(group, "cFNR")] = _count_rate(~s, y0 & in_group)
    return OracleTruth(rates=rates)


# ---------------------------------------------------------------------------
# scenario running


def to_audit_dataset(pop: Population, schema: SchemaSpec) -> AuditDataset:
    if pop.d is None or pop.y is None or pop.s is None:
        raise ValueError("population lacks observed columns; generate with role='internal'")
    return AuditDataset(schema=schema, group_codes=pop.group_codes.astype(np.int64),
                        d=pop.d, y=pop.y, s=pop.s, x=pop.x)


def to_external_dataset(pop: Population, schema: SchemaSpec) -> ExternalDataset:
    shared = [schema.covariates.index(c) for c in schema.external_covariates]
    return ExternalDataset(schema=schema, group_codes=pop.group_codes.astype(np.int64),
                           x=pop.x[:, shared])


@dataclass
class ReplicationRow:
    replication: int
    group: GroupKey | None
    metric: str
    method: str
    value: float  # NaN when inestimable
    defined: bool


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    oracle: OracleTruth
    rows: list  # ReplicationRow
    alphas: list  # per replication; NaN when borrowing did not run

    def cells(self):
        seen = []
        for row in self.rows:
            key = (row.group, row.metric, row.method)
            if key not in seen:
                seen.append(key)
        return seen

    def aggregate(self) -> list[dict]:
        """Per cell: mean and 95%-tile interval of the defined replicates,
        plus the NA share; oracle truth attached for plotting."""
        by_cell = {}
        for row in self.rows:
            by_cell.setdefault((row.group, row.metric, row.method), []).append(row.value)
        out = []
        for (group, metric, method), values in by_cell.items():
            arr = np.asarray(values, dtype=np.float64)
            good = arr[~np.isnan(arr)]
            na = int(np.sum(np.isnan(arr)))
            entry = {
                "group": "overall" if group is None else group.label(),
                "metric": metric,
                "method": method,
                "replications": len(arr),
                "na_count": na,
                "na_frac": na / len(arr),
                "mean": float(np.mean(good)) if good.size else None,
                "p2.5": float(np.percentile(good, 2.5)) if good.size else None,
                "p97.5": float(np.percentile(good, 97.5)) if good.size else None,
                "oracle": None,
            }
            truth = self.oracle.rates.get((group, metric))
            if truth is not None and not np.isnan(truth):
                entry["oracle"] = truth
            out.append(entry)
        return out

    def mean_alpha(self) -> float:
        arr = np.asarray(self.alphas, dtype=np.float64)
        good = arr[~np.isnan(arr)]
        return float(np.mean(good)) if good.size else np.nan


def _expected_cells(cfg: ScenarioConfig, borrowing_active: bool):
    methods = [m for m in cfg.pipeline.methods
               if borrowing_active or m != "proposed-borrowing"]
    cells = []
    for method in methods:
        for metric in ("cFPR", "cFNR"):
            cells.append((None, metric, method))
            for group in SIM_GROUPS:
                cells.append((group, metric, method))
    return cells


def _borrowing_active(cfg: ScenarioConfig) -> bool:
    return cfg.pipeline.borrow and "proposed-borrowing" in cfg.pipeline.methods


def _run_replication(args):
    cfg, model, schema, rep, child = args
    sub = child.spawn(3)
    internal_seed, external_seed = sub[0], sub[1]
    pipeline_seed = int(sub[2].generate_state(1)[0] % (2**31 - 1))
    cells = _expected_cells(cfg, _borrowing_active(cfg))
    try:
        internal = to_audit_dataset(
            generate_population(cfg, "internal", internal_seed, risk_model=model), schema)
        external = None
        if _borrowing_active(cfg):
            external = to_external_dataset(
                generate_population(cfg, "external", external_seed), schema)
        result = run_pipeline(internal, external, cfg.pipeline, pipeline_seed)
    except Exception:
        rows = [ReplicationRow(rep, g, metric, method, np.nan, False)
                for g, metric, method in cells]
        return rows, np.nan

    lookup = {(e.group, e.metric, e.method): e for e in result.report.entries}
    rows = []
    for g, metric, method in cells:
        e = lookup.get((g, metric, method))
        if e is None or not e.defined:
            rows.append(ReplicationRow(rep, g, metric, method, np.nan, False))
        else:
            rows.append(ReplicationRow(rep, g, metric, method, float(e.value), True))
    alpha = result.alpha if result.alpha is not None else np.nan
    return rows, alpha


def run_scenario(cfg: ScenarioConfig, n_jobs: int = 1) -> ScenarioResult:
    """Full scenario: one shared risk model, oracle truth from the validation
    draw, then independent estimation replications (fresh internal and, when
    borrowing, external data each time). Replication failures become NA rows;
    the sweep never aborts. Deterministic for a fixed seed and any n_jobs."""
    root = np.random.SeedSequence(cfg.seed)
    children = root.spawn(3 + cfg.replications)
    schema = sim_schema(cfg)

    train = generate_population(cfg, "train", children[0])
    model = train_risk_model(train.x, train.y, n_trees=cfg.n_trees,
                             max_depth=cfg.max_depth,
                             positive_rate=cfg.positive_rate, seed=children[2])
    validation = generate_population(cfg, "validation", children[1])
    oracle = oracle_error_rates(validation, model)

    tasks = [(cfg, model, schema, rep, children[3 + rep])
             for rep in range(cfg.replications)]
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(_run_replication, tasks))
    else:
        results = [_run_replication(task) for task in tasks]

    rows, alphas = [], []
    for rep_rows, alpha in results:
        rows.extend(rep_rows)
        alphas.append(alpha)
    return ScenarioResult(config=cfg, oracle=oracle, rows=rows, alphas=alphas)
