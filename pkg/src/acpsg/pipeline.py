"""End-to-end pipeline and the scikit-learn style zero-shot classifier."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .embedding import EmbeddingTrainConfig, concat_prototypes, l2_normalize_rows, train_embedding
from .evaluation import Mode, PredictionDirection, evaluate, predict_labels
from .graph import build_graph, build_prototype_matrix
from .latent import DiffusionParams, LatentTrainConfig, train_latent_autoencoder
from .validation import as_matrix, check_features, check_labels


@dataclass(frozen=True)
class RunConfig:
    alpha: float = 0.8
    p: int = 2
    latent_dim: int = 40
    lam: float = 1.0
    lr_latent: float = 1e-3
    lr_embed: float = 1e-3
    epochs_latent: int = 3000
    epochs_embed: int = 1000
    seed: int = 0
    mode: str = "czsl"
    direction: str = "v2s"
    normalize_prototypes: bool = True
    normalize_features: bool = False
    rescale_covariance: bool = True
    averaging: str = "per_class"

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.p < 0:
            raise ValueError(f"p must be >= 0, got {self.p}")
        if self.latent_dim < 0:
            raise ValueError(f"latent dimension must be >= 0, got {self.latent_dim}")
        if self.lam < 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")
        for k in ("lr_latent", "lr_embed"):
            if not getattr(self, k) > 0:
                raise ValueError(f"{k} must be > 0")
        for k in ("epochs_latent", "epochs_embed"):
            if getattr(self, k) < 0:
                raise ValueError(f"{k} must be >= 0")
        Mode(self.mode)
        PredictionDirection(self.direction)
        if self.averaging not in ("per_class", "per_sample"):
            raise ValueError(f"unknown averaging {self.averaging!r}")

    def echo(self) -> dict:
        return {"alpha": self.alpha, "p": self.p, "d": self.latent_dim, "lambda": self.lam, "seed": self.seed}


@dataclass
class PipelineResult:
    prototype_matrix: object
    graph: object
    latent: object
    model: object
    report: object


class StageError(RuntimeError):
    """Wraps a failure with the name of the pipeline stage that raised it."""

    def __init__(self, stage: str, error: Exception):
        super().__init__(f"{stage}: {type(error).__name__}: {error}")
        self.stage = stage
        self.error = error


def run_pipeline(dataset, cfg: RunConfig) -> PipelineResult:
    """Graph -> latent space (skipped for d=0) -> embedding -> evaluation."""
    stage = "graph"
    try:
        protos = build_prototype_matrix(dataset)
        graph = build_graph(protos.C, rescale=cfg.rescale_covariance)
        latent = None
        if cfg.latent_dim > 0:
            stage = "latent"
            latent = train_latent_autoencoder(
                graph.normalized,
                graph.node_features,
                cfg.latent_dim,
                DiffusionParams(cfg.alpha, cfg.p),
                LatentTrainConfig(cfg.lr_latent, cfg.epochs_latent, cfg.seed),
                n_classes=protos.d_C,
                class_order=protos.class_order,
            )
        stage = "embed"
        table = concat_prototypes(dataset.prototypes, None if latent is None else latent.psi,
                                  normalize=cfg.normalize_prototypes)
        X = np.asarray(dataset.features_train, float)
        if cfg.normalize_features:
            X = l2_normalize_rows(X)
        model = train_embedding(
            X.T, dataset.labels_train, table,
            EmbeddingTrainConfig(lam=cfg.lam, lr=cfg.lr_embed, epochs=cfg.epochs_embed, seed=cfg.seed),
        )
        stage = "evaluate"
        report = evaluate(
            model, latent, dataset, cfg.mode, cfg.direction,
            prototypes=table, normalize_features=cfg.normalize_features,
            averaging=cfg.averaging, config=cfg.echo(),
        )
    except Exception as exc:  # noqa: BLE001 - re-raised with the stage attached
        raise StageError(stage, exc) from exc
    return PipelineResult(protos, graph, latent, model, report)


class ZeroShotClassifier(ClassifierMixin, BaseEstimator):
    """Zero-shot classifier over attribute + graph-derived latent prototypes.

    ``fit(X, y, class_attributes)`` trains on seen-class samples; every class
    (row of ``class_attributes``) that never appears in ``y`` is treated as
    unseen. ``predict`` searches the unseen classes by default, or any
    ``candidate_classes`` given (all classes for the generalized setting).

    Parameters
    ----------
    latent_dim : int, default=40
        Width of the latent block. 0 uses attribute prototypes only.
    alpha, p : diffusion weight and propagation order.
    lam : float, default=1.0
        Weight of the reconstruction term.
    direction : {"v2s", "s2v"}, default="v2s"
    """

    def __init__(self, latent_dim=40, alpha=0.8, p=2, lam=1.0, lr_latent=1e-3, lr_embed=1e-3,
                 epochs_latent=3000, epochs_embed=1000, direction="v2s", normalize_prototypes=True,
                 normalize_features=False, random_state=0):
        self.latent_dim = latent_dim
        self.alpha = alpha
        self.p = p
        self.lam = lam
        self.lr_latent = lr_latent
        self.lr_embed = lr_embed
        self.epochs_latent = epochs_latent
        self.epochs_embed = epochs_embed
        self.direction = direction
        self.normalize_prototypes = normalize_prototypes
        self.normalize_features = normalize_features
        self.random_state = random_state

    def _prep(self, X):
        X = check_features(X)
        return l2_normalize_rows(X) if self.normalize_features else X

    def fit(self, X, y, class_attributes):
        X = self._prep(X)
        y = check_labels(y, X.shape[0])
        C = as_matrix(class_attributes, "class_attributes")
        if y.max() >= C.shape[0]:
            raise ValueError(f"labels must index the {C.shape[0]} rows of class_attributes")
        seen = np.unique(y)
        unseen = np.setdiff1d(np.arange(C.shape[0]), seen)
        order = np.concatenate([seen, unseen])

        self.graph_ = build_graph(C[order])
        self.latent_ = None
        psi = None
        if self.latent_dim > 0:
            self.latent_ = train_latent_autoencoder(
                self.graph_.normalized, self.graph_.node_features, int(self.latent_dim),
                DiffusionParams(self.alpha, self.p),
                LatentTrainConfig(self.lr_latent, int(self.epochs_latent), self.random_state),
                n_classes=C.shape[0], class_order=order,
            )
            psi = self.latent_.psi
        self.prototypes_ = concat_prototypes(C, psi, normalize=self.normalize_prototypes)
        self.model_ = train_embedding(
            X.T, y, self.prototypes_,
            EmbeddingTrainConfig(lam=self.lam, lr=self.lr_embed, epochs=int(self.epochs_embed),
                                 seed=self.random_state),
        )
        self.classes_ = np.arange(C.shape[0])
        self.seen_classes_, self.unseen_classes_ = seen, unseen
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X, candidate_classes=None):
        check_is_fitted(self, "model_")
        X = self._prep(X)
        cands = self.unseen_classes_ if candidate_classes is None else candidate_classes
        return predict_labels(self.model_, X.T, self.prototypes_, cands, self.direction)

    def transform(self, X):
        """Encode samples into the multi-space."""
        check_is_fitted(self, "model_")
        return (self.model_.W_en @ self._prep(X).T).T


__all__ = ["RunConfig", "PipelineResult", "StageError", "run_pipeline", "ZeroShotClassifier"]
