"""Linear autoencoder between visual features and the multi-space prototypes.

The functional API keeps the column convention of the model: ``X`` is
``D x N`` and targets ``T`` are ``(d_T + d) x N``. :class:`VisualEmbedding`
wraps it with the usual samples-as-rows estimator interface.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import zmat
from .exceptions import DivergenceError, InsufficientData, LabelError, ShapeError
from .optim import Adam, glorot_uniform
from .validation import as_matrix, check_features, check_labels


def l2_normalize_rows(M) -> np.ndarray:
    M = np.asarray(M, dtype=np.float64)
    norms = np.linalg.norm(M, axis=1, keepdims=True)
    return np.divide(M, norms, out=np.zeros_like(M), where=norms > 0)


@dataclass(frozen=True)
class MultiSpacePrototypes:
    table: np.ndarray
    n_attributes: int

    @property
    def phi_block(self) -> np.ndarray:
        return self.table[:, : self.n_attributes]

    @property
    def psi_block(self) -> np.ndarray:
        return self.table[:, self.n_attributes:]

    @property
    def latent_dim(self) -> int:
        return self.table.shape[1] - self.n_attributes


def concat_prototypes(phi, psi=None, normalize: bool = True) -> MultiSpacePrototypes:
    """Row-normalize each block separately and stack them side by side.

    ``psi=None`` (or zero columns) gives the attribute-only table.
    """
    phi = as_matrix(phi, "phi")
    if psi is None:
        psi = np.zeros((phi.shape[0], 0))
    psi = np.asarray(psi, dtype=np.float64)
    if psi.ndim != 2 or psi.shape[0] != phi.shape[0]:
        raise ShapeError(f"phi has {phi.shape[0]} rows but psi has shape {psi.shape}")
    if normalize:
        phi, psi = l2_normalize_rows(phi), l2_normalize_rows(psi)
    return MultiSpacePrototypes(table=np.hstack([phi, psi]), n_attributes=phi.shape[1])


@dataclass
class EmbeddingModel:
    W_en: np.ndarray
    W_de: np.ndarray
    lam: float = 1.0
    training_history: list = field(default_factory=list, repr=False)
    meta: dict = field(default_factory=dict)

    def encode(self, X) -> np.ndarray:
        """Columns of ``X`` (D x N) into the multi-space."""
        return self.W_en @ X

    def decode(self, T) -> np.ndarray:
        return self.W_de @ T

    def save(self, directory) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        zmat.write_matrix(self.W_en, directory / "W_en.zmat")
        zmat.write_matrix(self.W_de, directory / "W_de.zmat")
        final = self.training_history[-1] if self.training_history else (None, None, None)
        sidecar = {
            "lambda": self.lam,
            "feature_dim": int(self.W_en.shape[1]),
            "multi_space_dim": int(self.W_en.shape[0]),
            **self.meta,
            "final_losses": {"L_en": final[0], "L_de": final[1], "L": final[2]},
        }
        (directory / "model.json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, directory) -> "EmbeddingModel":
        directory = Path(directory)
        sidecar = json.loads((directory / "model.json").read_text())
        W_en = zmat.read_matrix(directory / "W_en.zmat")
        W_de = zmat.read_matrix(directory / "W_de.zmat")
        if W_de.shape != W_en.shape[::-1]:
            raise ShapeError(f"W_en {W_en.shape} and W_de {W_de.shape} are not transposed shapes")
        meta = {k: v for k, v in sidecar.items()
                if k not in ("lambda", "feature_dim", "multi_space_dim", "final_losses")}
        return cls(W_en=W_en, W_de=W_de, lam=float(sidecar["lambda"]), meta=meta)


def _check_shapes(model, X, T):
    D, N = X.shape
    k = model.W_en.shape[0]
    if model.W_en.shape != (k, D) or model.W_de.shape != (D, k) or T.shape != (k, N):
        raise ShapeError(
            f"incompatible shapes W_en{model.W_en.shape}, W_de{model.W_de.shape}, X{X.shape}, T{T.shape}"
        )


def compute_losses(model: EmbeddingModel, X, T) -> tuple[float, float, float]:
    """Mean squared encoding and reconstruction errors and their weighted sum."""
    X, T = np.asarray(X, float), np.asarray(T, float)
    _check_shapes(model, X, T)
    n = X.shape[1]
    M = model.W_en @ X
    R_en = M - T
    R_de = model.W_de @ M - X
    L_en = float(np.sum(R_en * R_en) / n)
    L_de = float(np.sum(R_de * R_de) / n)
    return L_en, L_de, L_en + model.lam * L_de


def loss_gradients(model: EmbeddingModel, X, T) -> tuple[np.ndarray, np.ndarray]:
    X, T = np.asarray(X, float), np.asarray(T, float)
    _check_shapes(model, X, T)
    n = X.shape[1]
    M = model.W_en @ X
    R_en = M - T
    R_de = model.W_de @ M - X
    g_en = (2.0 / n) * ((R_en + model.lam * (model.W_de.T @ R_de)) @ X.T)
    g_de = (2.0 * model.lam / n) * (R_de @ M.T)
    return g_en, g_de


@dataclass(frozen=True)
class EmbeddingTrainConfig:
    lam: float = 1.0
    lr: float = 1e-3
    epochs: int = 1000
    seed: int = 0
    lr_decay: float = 1.0  # per-epoch multiplicative decay; 1.0 keeps lr constant


def targets_for(labels, prototypes) -> np.ndarray:
    """Stack the prototype row of each sample's label as columns."""
    table = prototypes.table if isinstance(prototypes, MultiSpacePrototypes) else np.asarray(prototypes, float)
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= table.shape[0]):
        raise LabelError(f"labels must index the {table.shape[0]} prototype rows")
    return table[labels].T


class GramObjective:
    """The encoder/decoder loss evaluated through ``X X^T`` and ``T X^T``.

    Equal to :func:`compute_losses` / :func:`loss_gradients` up to rounding,
    but each evaluation costs O(D^2 k) instead of O(D k N).
    """

    def __init__(self, X, T, lam):
        X, T = np.asarray(X, float), np.asarray(T, float)
        self.n = X.shape[1]
        self.lam = lam
        self.G = X @ X.T
        self.B = T @ X.T
        self.tT = float(np.sum(T * T))
        self.eye = np.eye(X.shape[0])

    def losses(self, W_en, W_de):
        WG = W_en @ self.G
        L_en = (np.sum(WG * W_en) - 2.0 * np.sum(W_en * self.B) + self.tT) / self.n
        E = W_de @ W_en - self.eye
        L_de = np.sum((E @ self.G) * E) / self.n
        # both are sums of squares; clamp cancellation noise
        L_en, L_de = max(float(L_en), 0.0), max(float(L_de), 0.0)
        return L_en, L_de, L_en + self.lam * L_de

    def gradients(self, W_en, W_de):
        E = W_de @ W_en - self.eye
        EG = E @ self.G
        g_en = (2.0 / self.n) * (W_en @ self.G - self.B + self.lam * (W_de.T @ EG))
        g_de = (2.0 * self.lam / self.n) * (EG @ W_en.T)
        return g_en, g_de


def train_embedding(X_s, labels, prototypes, cfg: EmbeddingTrainConfig = EmbeddingTrainConfig()) -> EmbeddingModel:
    """Full-batch Adam on the encoder/decoder loss.

    ``X_s`` is ``D x N``, ``labels`` has length ``N``.
    """
    X = np.asarray(X_s, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] == 0:
        raise InsufficientData("training set is empty")
    T = targets_for(labels, prototypes)
    if T.shape[1] != X.shape[1]:
        raise ShapeError(f"{X.shape[1]} samples but {T.shape[1]} labels")
    if cfg.lam < 0:
        raise ValueError("lambda must be >= 0")
    D, k = X.shape[0], T.shape[0]
    rng = np.random.default_rng(cfg.seed)
    model = EmbeddingModel(
        W_en=glorot_uniform(rng, D, k, shape=(k, D)),
        W_de=glorot_uniform(rng, k, D, shape=(D, k)),
        lam=cfg.lam,
        meta={"seed": cfg.seed, "epochs": cfg.epochs, "lr": cfg.lr},
    )
    opt = Adam(lr=cfg.lr)
    with np.errstate(over="ignore", invalid="ignore"):
        objective = GramObjective(X, T, cfg.lam)
        for epoch in range(cfg.epochs):
            losses = objective.losses(model.W_en, model.W_de)
            if not np.isfinite(losses[2]):
                raise DivergenceError(f"embedding training diverged at epoch {epoch} (lr={cfg.lr:g})")
            model.training_history.append(losses)
            opt.step([model.W_en, model.W_de], list(objective.gradients(model.W_en, model.W_de)))
            opt.lr *= cfg.lr_decay
        final = compute_losses(model, X, T)
    if not np.isfinite(final[2]):
        raise DivergenceError(f"embedding training diverged at epoch {cfg.epochs} (lr={cfg.lr:g})")
    model.training_history.append(final)
    return model


class VisualEmbedding(TransformerMixin, BaseEstimator):
    """Encoder from visual features into a prototype space, with a decoder back.

    ``fit(X, y, prototypes)`` takes samples as rows and a prototype table with
    one row per class. ``transform`` encodes samples (rows of the result live
    in prototype space); ``inverse_transform`` decodes prototype-space rows
    back to visual features.
    """

    def __init__(self, lam=1.0, learning_rate=1e-3, n_epochs=1000, normalize_features=False,
                 random_state=0):
        self.lam = lam
        self.learning_rate = learning_rate
        self.n_epochs = n_epochs
        self.normalize_features = normalize_features
        self.random_state = random_state

    def _prep(self, X):
        X = check_features(X)
        return l2_normalize_rows(X) if self.normalize_features else X

    def fit(self, X, y, prototypes):
        X = self._prep(X)
        y = check_labels(y, X.shape[0])
        table = prototypes.table if isinstance(prototypes, MultiSpacePrototypes) else as_matrix(prototypes, "prototypes")
        cfg = EmbeddingTrainConfig(lam=self.lam, lr=self.learning_rate, epochs=int(self.n_epochs),
                                   seed=self.random_state)
        self.model_ = train_embedding(X.T, y, table, cfg)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "model_")
        X = self._prep(X)
        return (self.model_.W_en @ X.T).T

    def inverse_transform(self, T):
        check_is_fitted(self, "model_")
        T = check_features(T, "T")
        return (self.model_.W_de @ T.T).T
