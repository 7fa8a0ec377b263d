"""End-to-end estimation pipeline shared by the CLI, the bootstrap, and the
simulation lab: nuisance fitting (optionally cross-fit), external borrowing,
and the full estimator report."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .borrowing import BlendedMembership, select_alpha
from .dataset import AuditDataset, ExternalDataset
from .estimators import (METHODS, ErrorRateReport, NuisanceEstimates,
                         estimate_all)
from .models import (BinarySpec, MulticlassConfig, NuisanceSpec,
                     constant_multiclass, cross_fit, fit_multiclass,
                     predict_group_probs, DegenerateLabels)


@dataclass
class PipelineConfig:
    pi: BinarySpec = field(default_factory=BinarySpec)
    mu: BinarySpec = field(default_factory=BinarySpec)
    h_internal: MulticlassConfig = field(default_factory=MulticlassConfig)
    h_external: MulticlassConfig = field(default_factory=MulticlassConfig)
    crossfit_k: int = 1
    borrow: bool = True
    borrow_metric: str = "brier"
    alpha_grid_step: float = 0.001
    methods: tuple[str, ...] = METHODS


@dataclass
class PipelineResult:
    report: ErrorRateReport
    nuisances: NuisanceEstimates
    alpha: float | None  # None when borrowing was not run
    blend: BlendedMembership | None


def _binary_spec_to_dict(spec: BinarySpec) -> dict:
    return {"kind": spec.kind, "l2": spec.l2, "max_iter": spec.max_iter,
            "lr": spec.lr, "epochs": spec.epochs}


def _binary_spec_from_dict(raw: dict) -> BinarySpec:
    return BinarySpec(kind=raw.get("kind", "logistic-IRLS"),
                      l2=float(raw.get("l2", 0.0)),
                      max_iter=int(raw.get("max_iter", 100)),
                      lr=float(raw.get("lr", 0.5)),
                      epochs=int(raw.get("epochs", 5000)))


def _multiclass_to_dict(cfg: MulticlassConfig) -> dict:
    return {"kind": cfg.kind, "hidden": cfg.hidden, "decay": cfg.decay,
            "epochs": cfg.epochs, "lr": cfg.lr}


def _multiclass_from_dict(raw: dict) -> MulticlassConfig:
    return MulticlassConfig(kind=raw.get("kind", "softmax-linear"),
                            hidden=int(raw.get("hidden", 100)),
                            decay=float(raw.get("decay", 0.0)),
                            epochs=int(raw.get("epochs", 500)),
                            lr=float(raw.get("lr", 0.5)))


def pipeline_to_dict(cfg: PipelineConfig) -> dict:
    return {
        "pi": _binary_spec_to_dict(cfg.pi),
        "mu": _binary_spec_to_dict(cfg.mu),
        "h_internal": _multiclass_to_dict(cfg.h_internal),
        "h_external": _multiclass_to_dict(cfg.h_external),
        "crossfit_k": cfg.crossfit_k,
        "borrow": cfg.borrow,
        "borrow_metric": cfg.borrow_metric,
        "alpha_grid_step": cfg.alpha_grid_step,
        "methods": list(cfg.methods),
    }


def pipeline_from_dict(raw: dict) -> PipelineConfig:
    cfg = PipelineConfig()
    if "pi" in raw:
        cfg.pi = _binary_spec_from_dict(raw["pi"])
    if "mu" in raw:
        cfg.mu = _binary_spec_from_dict(raw["mu"])
    if "h_internal" in raw:
        cfg.h_internal = _multiclass_from_dict(raw["h_internal"])
    if "h_external" in raw:
        cfg.h_external = _multiclass_from_dict(raw["h_external"])
    cfg.crossfit_k = int(raw.get("crossfit_k", 1))
    cfg.borrow = bool(raw.get("borrow", True))
    cfg.borrow_metric = raw.get("borrow_metric", "brier")
    cfg.alpha_grid_step = float(raw.get("alpha_grid_step", 0.001))
    cfg.methods = tuple(raw.get("methods", list(METHODS)))
    return cfg


def _fit_external_membership(external: ExternalDataset, internal: AuditDataset,
                             config: MulticlassConfig):
    """Train the membership model on external rows, predict on internal rows
    restricted to the shared covariate columns."""
    schema = internal.schema
    shared = [schema.covariates.index(c) for c in schema.external_covariates]
    groups = schema.all_groups()
    labels = [groups[c] for c in external.group_codes]
    try:
        model = fit_multiclass(external.x, labels, config)
    except DegenerateLabels:
        present = sorted(set(labels), key=lambda g: g.levels)
        freq = np.array([labels.count(g) for g in present], dtype=np.float64)
        model = constant_multiclass(present, freq)
    return predict_group_probs(model, internal.x[:, shared], groups)


def run_pipeline(internal: AuditDataset, external: ExternalDataset | None,
                 config: PipelineConfig, seed: int) -> PipelineResult:
    """Fit nuisances, optionally select the borrowing weight, and build the
    report. Deterministic given the seed; per-stage seeds are derived from it."""
    children = np.random.SeedSequence(seed).spawn(3)
    crossfit_seed = int(children[0].generate_state(1)[0])
    h_int_seed = int(children[1].generate_state(1)[0])
    h_ext_seed = int(children[2].generate_state(1)[0])

    spec = NuisanceSpec(
        pi=config.pi,
        mu=config.mu,
        h=replace(config.h_internal, seed=h_int_seed),
    )
    nuis = cross_fit(internal, spec, k=config.crossfit_k, seed=crossfit_seed)

    methods = tuple(config.methods)
    blend = None
    alpha = None
    borrowed = None
    if external is not None and config.borrow and "proposed-borrowing" in methods:
        if external.n == 0:
            # nothing to borrow from: the blend degenerates to the internal model
            alpha = 0.0
            borrowed = nuis.group_prob
        else:
            h_ext = _fit_external_membership(
                external, internal, replace(config.h_external, seed=h_ext_seed))
            groups = internal.schema.all_groups()
            labels = [groups[c] for c in internal.group_codes]
            blend = select_alpha(h_ext, nuis.group_prob, labels, groups,
                                 metric=config.borrow_metric,
                                 grid_step=config.alpha_grid_step)
            alpha = blend.alpha
            borrowed = blend.h_star
    else:
        methods = tuple(m for m in methods if m != "proposed-borrowing")

    report = estimate_all(internal, nuis, methods=methods,
                          borrowed_group_prob=borrowed)
    return PipelineResult(report=report, nuisances=nuis, alpha=alpha, blend=blend)
