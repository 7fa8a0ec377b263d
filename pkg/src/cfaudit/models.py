"""Nuisance-model fitting from scratch on numpy.

Binary outcome regressions are penalized logistic fits, solved by IRLS
(Newton with step halving, so the penalized log-likelihood never decreases)
or by full-batch gradient descent. Group-membership models are multiclass:
a softmax-linear model or a single-hidden-layer network with logistic
activations and weight decay, both trained by full-batch gradient descent
with deterministic seeded initialization.

The l2 penalty applies to every coefficient, intercept included, so
penalized fits have a finite optimum even for constant outcomes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import AuditDataset, GroupKey
from .estimators import NuisanceEstimates

PROB_EPS = 1e-12
SEPARATION_BOUND = 30.0


class ModelError(Exception):
    pass


class Separation(ModelError):
    """Unpenalized fit diverging (a coefficient passed the separation bound)."""


class SingularDesign(ModelError):
    pass


class DimensionMismatch(ModelError):
    pass


class DegenerateLabels(ModelError):
    """Fewer than two classes in the training labels."""


class InfeasibleFolds(ModelError):
    pass


def sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def _add_intercept(x):
    x = np.asarray(x, dtype=np.float64)
    return np.hstack([np.ones((x.shape[0], 1)), x])


@dataclass
class BinaryModel:
    kind: str  # "logistic-IRLS" or "logistic-gd"
    coef: np.ndarray  # (p+1,) with intercept first
    converged: bool
    iterations: int
    ll_trace: list = field(default_factory=list)  # penalized log-likelihood per iteration


def _penalized_ll(beta, xb, y, l2):
    eta = xb @ beta
    # sum_i [y*eta - log(1 + e^eta)], stably
    ll = float(np.sum(y * eta) - np.sum(np.logaddexp(0.0, eta)))
    return ll - 0.5 * l2 * float(beta @ beta)


def fit_logistic(x, y, l2=0.0, kind="logistic-IRLS", max_iter=100, tol=1e-8,
                 lr=0.5, epochs=5000) -> BinaryModel:
    """Fit P(y=1|x) = sigmoid(intercept + x @ coef) maximizing the l2-penalized
    Bernoulli log-likelihood.

    IRLS takes damped Newton steps (step halving whenever a full step would
    reduce the objective). With l2 == 0 a coefficient exceeding the
    separation bound raises Separation; set l2 > 0 to fit separable or
    constant-outcome data.
    """
    xb = _add_intercept(x)
    y = np.asarray(y, dtype=np.float64)
    n, p1 = xb.shape
    beta = np.zeros(p1)

    if kind == "logistic-gd":
        ll = _penalized_ll(beta, xb, y, l2)
        trace = [ll]
        it = 0
        converged = False
        for it in range(1, epochs + 1):
            prob = sigmoid(xb @ beta)
            grad = xb.T @ (y - prob) - l2 * beta
            step = (lr / n) * grad
            beta = beta + step
            trace.append(_penalized_ll(beta, xb, y, l2))
            if l2 == 0.0 and np.max(np.abs(beta)) > SEPARATION_BOUND:
                raise Separation("coefficients diverging; refit with l2 > 0")
            if np.max(np.abs(step)) < tol:
                converged = True
                break
        return BinaryModel(kind=kind, coef=beta, converged=converged,
                           iterations=it, ll_trace=trace)

    if kind != "logistic-IRLS":
        raise ValueError(f"unknown binary model kind: {kind!r}")

    ll = _penalized_ll(beta, xb, y, l2)
    trace = [ll]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        prob = sigmoid(xb @ beta)
        w = prob * (1.0 - prob)
        grad = xb.T @ (y - prob) - l2 * beta
        hess = (xb * w[:, None]).T @ xb + l2 * np.eye(p1)
        try:
            direction = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            raise SingularDesign("singular weighted design; add l2 or drop columns") from None

        # Step halving: accept the largest step that does not decrease the objective.
        scale = 1.0
        for _ in range(50):
            candidate = beta + scale * direction
            cand_ll = _penalized_ll(candidate, xb, y, l2)
            if cand_ll >= ll:
                break
            scale *= 0.5
        else:
            candidate = beta
            cand_ll = ll
        step = candidate - beta
        beta = candidate
        ll = cand_ll
        trace.append(ll)

        if l2 == 0.0 and np.max(np.abs(beta)) > SEPARATION_BOUND:
            raise Separation("coefficients diverging; refit with l2 > 0")
        if np.max(np.abs(step)) < tol:
            converged = True
            break

    return BinaryModel(kind="logistic-IRLS", coef=beta, converged=converged,
                       iterations=it, ll_trace=trace)


def predict_binary(model: BinaryModel, x) -> np.ndarray:
    """Predicted probabilities, clamped to (PROB_EPS, 1 - PROB_EPS)."""
    xb = _add_intercept(x)
    if xb.shape[1] != len(model.coef):
        raise DimensionMismatch(
            f"model expects {len(model.coef) - 1} columns, got {xb.shape[1] - 1}"
        )
    return np.clip(sigmoid(xb @ model.coef), PROB_EPS, 1.0 - PROB_EPS)


# ---------------------------------------------------------------------------
# multiclass group-membership models


@dataclass
class MulticlassConfig:
    kind: str = "softmax-linear"  # "softmax-linear" | "mlp-1hidden"
    hidden: int = 100
    decay: float = 0.0  # weight-decay coefficient on the sum of squared weights
    epochs: int = 500
    lr: float = 0.5
    seed: int = 0


@dataclass
class MulticlassModel:
    kind: str  # "softmax-linear" | "mlp-1hidden" | "constant"
    classes: tuple[GroupKey, ...]
    params: tuple  # (w,) linear; (w1, w2) mlp; (probs,) constant
    config: MulticlassConfig | None = None


def _softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_objective(w, xb, y_onehot, decay):
    """Total cross-entropy plus decay * sum of squared weights, with gradient.

    w: (p+1, k) weights including the intercept row; xb includes the
    intercept column.
    """
    probs = _softmax(xb @ w)
    ll = np.sum(y_onehot * np.log(np.clip(probs, PROB_EPS, None)))
    loss = -ll + decay * float(np.sum(w * w))
    grad = xb.T @ (probs - y_onehot) + 2.0 * decay * w
    return loss, grad


def mlp_objective(params, xb, y_onehot, decay):
    """Objective and gradients for the single-hidden-layer network.

    Hidden activation is the logistic sigmoid; decay penalizes every weight
    in both layers.
    """
    w1, w2 = params
    hidden = sigmoid(xb @ w1)
    hb = np.hstack([np.ones((hidden.shape[0], 1)), hidden])
    probs = _softmax(hb @ w2)
    ll = np.sum(y_onehot * np.log(np.clip(probs, PROB_EPS, None)))
    loss = -ll + decay * (float(np.sum(w1 * w1)) + float(np.sum(w2 * w2)))

    delta_out = probs - y_onehot  # (n, k)
    g2 = hb.T @ delta_out + 2.0 * decay * w2
    back = delta_out @ w2[1:].T  # (n, H), intercept row carries no signal
    delta_hidden = back * hidden * (1.0 - hidden)
    g1 = xb.T @ delta_hidden + 2.0 * decay * w1
    return loss, (g1, g2)


def _xavier_uniform(rng, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def fit_multiclass(x, labels, config: MulticlassConfig) -> MulticlassModel:
    """Fit class probabilities P(label | x) by full-batch gradient descent.

    Classes are the sorted unique labels. Training is deterministic given
    config.seed. Raises DegenerateLabels when only one class is present;
    callers fall back to constant_multiclass.
    """
    xb = _add_intercept(x)
    n = xb.shape[0]
    classes = tuple(sorted(set(labels), key=lambda g: g.levels))
    if len(classes) < 2:
        raise DegenerateLabels("need at least two distinct labels")
    if n < len(classes):
        raise DegenerateLabels("fewer rows than classes")
    index = {g: j for j, g in enumerate(classes)}
    y_onehot = np.zeros((n, len(classes)))
    y_onehot[np.arange(n), [index[g] for g in labels]] = 1.0

    rng = np.random.default_rng(config.seed)
    if config.kind == "softmax-linear":
        w = np.zeros((xb.shape[1], len(classes)))
        for _ in range(config.epochs):
            _, grad = softmax_objective(w, xb, y_onehot, config.decay)
            w = w - (config.lr / n) * grad
        return MulticlassModel(kind=config.kind, classes=classes, params=(w,), config=config)

    if config.kind == "mlp-1hidden":
        h = config.hidden
        w1 = _xavier_uniform(rng, xb.shape[1], h)
        w2 = _xavier_uniform(rng, h + 1, len(classes))
        for _ in range(config.epochs):
            _, (g1, g2) = mlp_objective((w1, w2), xb, y_onehot, config.decay)
            w1 = w1 - (config.lr / n) * g1
            w2 = w2 - (config.lr / n) * g2
        return MulticlassModel(kind=config.kind, classes=classes, params=(w1, w2), config=config)

    raise ValueError(f"unknown multiclass kind: {config.kind!r}")


def constant_multiclass(classes, probs=None) -> MulticlassModel:
    """Constant-probability model (the DegenerateLabels fallback)."""
    classes = tuple(classes)
    if probs is None:
        probs = np.full(len(classes), 1.0 / len(classes))
    probs = np.asarray(probs, dtype=np.float64)
    probs = probs / probs.sum()
    return MulticlassModel(kind="constant", classes=classes, params=(probs,))


def predict_multiclass(model: MulticlassModel, x) -> np.ndarray:
    """Row-stochastic probability matrix over model.classes."""
    if model.kind == "constant":
        (probs,) = model.params
        return np.tile(probs, (np.asarray(x).shape[0], 1))
    xb = _add_intercept(x)
    if model.kind == "softmax-linear":
        (w,) = model.params
        if xb.shape[1] != w.shape[0]:
            raise DimensionMismatch("covariate count differs from training")
        return _softmax(xb @ w)
    if model.kind == "mlp-1hidden":
        w1, w2 = model.params
        if xb.shape[1] != w1.shape[0]:
            raise DimensionMismatch("covariate count differs from training")
        hidden = sigmoid(xb @ w1)
        hb = np.hstack([np.ones((hidden.shape[0], 1)), hidden])
        return _softmax(hb @ w2)
    raise ValueError(f"unknown multiclass kind: {model.kind!r}")


def predict_group_probs(model: MulticlassModel, x, groups) -> np.ndarray:
    """Predictions expanded onto a full group list.

    Groups the model never saw get (clamped) zero probability; rows are then
    renormalized so they stay strictly positive and sum to one.
    """
    raw = predict_multiclass(model, x)
    out = np.full((raw.shape[0], len(groups)), 0.0)
    col = {g: j for j, g in enumerate(groups)}
    for j, cls in enumerate(model.classes):
        out[:, col[cls]] = raw[:, j]
    out = np.clip(out, PROB_EPS, None)
    return out / out.sum(axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# cross-fitting


@dataclass
class CrossFitPlan:
    k: int
    fold: np.ndarray  # (n,) fold id per row
    seed: int

    def __post_init__(self):
        sizes = np.bincount(self.fold, minlength=self.k)
        if sizes.max() - sizes.min() > 1:
            raise ValueError("fold sizes must differ by at most 1")


@dataclass
class BinarySpec:
    kind: str = "logistic-IRLS"
    l2: float = 0.0
    max_iter: int = 100
    lr: float = 0.5
    epochs: int = 5000


@dataclass
class NuisanceSpec:
    pi: BinarySpec = field(default_factory=BinarySpec)
    mu: BinarySpec = field(default_factory=BinarySpec)
    h: MulticlassConfig = field(default_factory=MulticlassConfig)


def _fit_binary_spec(x, y, spec: BinarySpec) -> BinaryModel:
    return fit_logistic(x, y, l2=spec.l2, kind=spec.kind, max_iter=spec.max_iter,
                        lr=spec.lr, epochs=spec.epochs)


def _propensity_design(ds: AuditDataset) -> np.ndarray:
    # group one-hot with the first group as reference, then covariates, then s
    n_groups = len(ds.schema.all_groups())
    onehot = np.zeros((ds.n, n_groups - 1))
    for code in range(1, n_groups):
        onehot[:, code - 1] = ds.group_codes == code
    return np.hstack([onehot, ds.x, ds.s[:, None].astype(np.float64)])


def _draw_plan(n, k, rng) -> np.ndarray:
    fold = np.repeat(np.arange(k), np.diff(np.linspace(0, n, k + 1).astype(int)))
    return fold[rng.permutation(n)]


def _complement_feasible(ds, train_mask) -> bool:
    d = ds.d[train_mask]
    if d.min() == d.max():
        return False
    y_untreated = ds.y[train_mask & (ds.d == 0)]
    if y_untreated.size == 0 or y_untreated.min() == y_untreated.max():
        return False
    return True


def make_crossfit_plan(ds: AuditDataset, k, seed, max_redraws=10) -> CrossFitPlan:
    """Random fold assignment with sizes differing by at most one.

    Each fold's training complement must contain both treatment arms and
    both outcome classes among untreated rows; infeasible draws are retried
    up to max_redraws times before InfeasibleFolds.
    """
    rng = np.random.default_rng(seed)
    for _ in range(max_redraws):
        fold = _draw_plan(ds.n, k, rng)
        ok = all(
            _complement_feasible(ds, fold != f) for f in range(k)
        )
        if ok:
            return CrossFitPlan(k=k, fold=fold, seed=seed)
    raise InfeasibleFolds(f"no feasible {k}-fold split after {max_redraws} draws")


def _fit_outcome_models(ds, train_idx, spec: BinarySpec):
    """mu models on untreated training rows: one per prediction stratum plus
    the unstratified version. Empty strata fall back to the unstratified fit."""
    untreated = train_idx[ds.d[train_idx] == 0]
    mu_star = _fit_binary_spec(ds.x[untreated], ds.y[untreated], spec)
    mu_by_s = {}
    for s_val in (0, 1):
        stratum = untreated[ds.s[untreated] == s_val]
        if stratum.size == 0:
            mu_by_s[s_val] = mu_star
        else:
            mu_by_s[s_val] = _fit_binary_spec(ds.x[stratum], ds.y[stratum], spec)
    return mu_by_s, mu_star


def cross_fit(ds: AuditDataset, spec: NuisanceSpec, k=1, seed=0,
              plan: CrossFitPlan | None = None) -> NuisanceEstimates:
    """Out-of-fold nuisance predictions for every row.

    With k == 1 each model is fit once on the full sample and predicts in
    sample (the GLM path). With k >= 2 each row is predicted by models
    trained on its fold's complement. The group-membership model is always
    fit once on the full sample.
    """
    pi_design = _propensity_design(ds)
    n = ds.n
    propensity = np.empty(n)
    mu0_s1 = np.empty(n)
    mu0_s0 = np.empty(n)
    mu0_all = np.empty(n)

    if k == 1:
        all_idx = np.arange(n)
        pi_model = _fit_binary_spec(pi_design, ds.d, spec.pi)
        propensity[:] = predict_binary(pi_model, pi_design)
        mu_by_s, mu_star = _fit_outcome_models(ds, all_idx, spec.mu)
        mu0_s0[:] = predict_binary(mu_by_s[0], ds.x)
        mu0_s1[:] = predict_binary(mu_by_s[1], ds.x)
        mu0_all[:] = predict_binary(mu_star, ds.x)
    else:
        if plan is None:
            plan = make_crossfit_plan(ds, k, seed)
        for f in range(plan.k):
            hold = np.flatnonzero(plan.fold == f)
            train = np.flatnonzero(plan.fold != f)
            pi_model = _fit_binary_spec(pi_design[train], ds.d[train], spec.pi)
            propensity[hold] = predict_binary(pi_model, pi_design[hold])
            mu_by_s, mu_star = _fit_outcome_models(ds, train, spec.mu)
            mu0_s0[hold] = predict_binary(mu_by_s[0], ds.x[hold])
            mu0_s1[hold] = predict_binary(mu_by_s[1], ds.x[hold])
            mu0_all[hold] = predict_binary(mu_star, ds.x[hold])

    group_prob, _ = fit_group_membership(ds, spec.h)
    groups = tuple(ds.schema.all_groups())
    return NuisanceEstimates(
        propensity=propensity,
        mu0_s1=mu0_s1,
        mu0_s0=mu0_s0,
        mu0_all=mu0_all,
        group_prob=group_prob,
        groups=groups,
    )


def fit_group_membership(ds: AuditDataset, config: MulticlassConfig):
    """Fit P(group | x) on the full sample; returns (probabilities over the
    schema's full group list, fitted model)."""
    groups = ds.schema.all_groups()
    labels = [groups[c] for c in ds.group_codes]
    try:
        model = fit_multiclass(ds.x, labels, config)
    except DegenerateLabels:
        present = sorted(set(labels), key=lambda g: g.levels)
        freq = np.array([labels.count(g) for g in present], dtype=np.float64)
        model = constant_multiclass(present, freq)
    return predict_group_probs(model, ds.x, groups), model
