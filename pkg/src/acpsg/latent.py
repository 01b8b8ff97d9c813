"""Latent discrimination space from diffusion over the class/attribute graph.

The closed form ``(1-alpha) (I - alpha S)^-1 F`` is the exact minimizer of the
diffusion objective with ``mu = (1 - alpha) / alpha``; the truncated series
``sum_{k<=p} (alpha S)^k F`` approximates it and is the propagation operator
used inside the graph autoencoder.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import DivergenceError, ShapeError, SingularDiffusion
from .graph import DEGREE_FLOOR, build_graph
from .optim import Adam, glorot_uniform
from .validation import as_matrix

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DiffusionParams:
    alpha: float = 0.8
    p: int = 2

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha!r}")
        if int(self.p) != self.p or self.p < 0:
            raise ValueError(f"p must be a non-negative integer, got {self.p!r}")

    @property
    def mu(self) -> float:
        return (1.0 - self.alpha) / self.alpha


@dataclass(frozen=True)
class LatentTrainConfig:
    # keep <= 1e-3: larger steps kill every ReLU unit on nonnegative graph features
    lr: float = 1e-3
    epochs: int = 3000
    seed: int = 0


def diffusion_objective(H, A, F, mu: float) -> float:
    """Smoothness over the graph plus ``mu`` times squared distance to ``F``."""
    H, F = as_matrix(H, "H"), as_matrix(F, "F")
    A = as_matrix(A, "A")
    if H.shape != F.shape or A.shape != (H.shape[0], H.shape[0]):
        raise ShapeError(f"incompatible shapes H{H.shape}, F{F.shape}, A{A.shape}")
    d = np.maximum(A.sum(axis=1), DEGREE_FLOOR)
    Hn = H / np.sqrt(d)[:, None]
    sq = np.sum(Hn * Hn, axis=1)
    pair = sq[:, None] + sq[None, :] - 2.0 * (Hn @ Hn.T)
    smooth = 0.5 * np.sum(A * pair)
    fit = np.sum((H - F) ** 2)
    return float(smooth + mu * fit)


def diffusion_gradient(H, S, F, mu: float) -> np.ndarray:
    """Gradient of :func:`diffusion_objective` for a graph with positive degrees."""
    H, F, S = np.asarray(H, float), np.asarray(F, float), np.asarray(S, float)
    return 2.0 * (H - S @ H) + 2.0 * mu * (H - F)


def closed_form_diffusion(S, F, alpha: float) -> np.ndarray:
    S, F = as_matrix(S, "S"), as_matrix(F, "F", allow_empty=True)
    n = S.shape[0]
    if S.shape != (n, n) or F.shape[0] != n:
        raise ShapeError(f"incompatible shapes S{S.shape}, F{F.shape}")
    system = np.eye(n) - alpha * S
    eig = np.linalg.eigvalsh(0.5 * (system + system.T))
    if np.min(np.abs(eig)) < 1e-12:
        raise SingularDiffusion(f"I - alpha*S is singular for alpha={alpha}")
    try:
        return (1.0 - alpha) * np.linalg.solve(system, F)
    except np.linalg.LinAlgError as exc:
        raise SingularDiffusion(str(exc)) from exc


def truncated_propagation(S, F, alpha: float, p: int) -> np.ndarray:
    """``sum_{k=0}^{p} (alpha S)^k F`` by Horner accumulation."""
    S, F = np.asarray(S, float), np.asarray(F, float)
    if p < 0:
        raise ValueError("p must be >= 0")
    acc = F.copy()
    aS = alpha * S
    for _ in range(p):
        acc = F + aS @ acc
    return acc


def propagation_operator(S, alpha: float, p: int) -> np.ndarray:
    """Dense ``sum_{k<=p} (alpha S)^k``."""
    S = np.asarray(S, float)
    P = truncated_propagation(S, np.eye(S.shape[0]), alpha, p)
    return 0.5 * (P + P.T)


def relu(x):
    return np.maximum(x, 0.0)


@dataclass
class GraphAutoencoder:
    """Two truncated graph-convolution layers: ReLU encoder, linear decoder."""

    W0: np.ndarray
    W1: np.ndarray
    P: np.ndarray

    @classmethod
    def initialize(cls, S, d: int, params: DiffusionParams, rng: np.random.Generator):
        n = S.shape[0]
        W0 = glorot_uniform(rng, n, d)
        W1 = glorot_uniform(rng, d, n)
        return cls(W0=W0, W1=W1, P=propagation_operator(S, params.alpha, params.p))

    @property
    def latent_dim(self) -> int:
        return self.W0.shape[1]

    def layer(self, H, layer_index: int) -> np.ndarray:
        W = (self.W0, self.W1)[layer_index]
        H = np.asarray(H, float)
        if H.shape[0] != self.P.shape[0] or H.shape[1] != W.shape[0]:
            raise ShapeError(
                f"layer {layer_index} expects {self.P.shape[0]}x{W.shape[0]} input, got {H.shape}"
            )
        out = self.P @ H @ W
        return relu(out) if layer_index == 0 else out

    def encode(self, F) -> np.ndarray:
        return self.layer(F, 0)

    def reconstruct(self, F) -> np.ndarray:
        return self.layer(self.layer(F, 0), 1)

    def loss(self, F) -> float:
        F = np.asarray(F, float)
        R = self.reconstruct(F) - F
        return float(np.sum(R * R) / F.shape[0] ** 2)

    def loss_and_gradients(self, F, PF=None):
        F = np.asarray(F, float)
        n = F.shape[0]
        if PF is None:
            PF = self.P @ F
        Z = PF @ self.W0
        H1 = relu(Z)
        Q = self.P @ H1
        R = Q @ self.W1 - F
        loss = float(np.sum(R * R) / n**2)
        dY = (2.0 / n**2) * R
        g_W1 = Q.T @ dY
        dZ = (self.P @ (dY @ self.W1.T)) * (Z > 0)
        g_W0 = PF.T @ dZ
        return loss, g_W0, g_W1


@dataclass
class LatentSpace:
    """Per-class latent attributes; row ``c`` of ``psi`` belongs to class index ``c``."""

    psi: np.ndarray
    final_reconstruction_loss: float
    initial_reconstruction_loss: float = float("nan")
    autoencoder: GraphAutoencoder | None = None
    loss_history: list = field(default_factory=list, repr=False)

    @property
    def d(self) -> int:
        return self.psi.shape[1]


def train_latent_autoencoder(
    S, F, d: int, params: DiffusionParams = DiffusionParams(), train_cfg: LatentTrainConfig = LatentTrainConfig(),
    n_classes: int | None = None, class_order=None,
) -> LatentSpace:
    """Fit the graph autoencoder to reconstruct ``F`` and read the class-node latents.

    ``n_classes`` defaults to the number of rows of ``F`` (every node is a
    class). ``class_order`` maps class-node rows back to class indices.
    """
    S, F = as_matrix(S, "S"), as_matrix(F, "F")
    if d < 1:
        raise ValueError(f"latent dimension must be >= 1, got {d}")
    n = F.shape[0]
    n_classes = n if n_classes is None else n_classes
    rng = np.random.default_rng(train_cfg.seed)
    ae = GraphAutoencoder.initialize(S, d, params, rng)
    opt = Adam(lr=train_cfg.lr)
    PF = ae.P @ F

    history = []
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(train_cfg.epochs):
            loss, g0, g1 = ae.loss_and_gradients(F, PF)
            if not np.isfinite(loss):
                raise DivergenceError(f"graph autoencoder diverged at epoch {epoch} (lr={train_cfg.lr:g})")
            history.append(loss)
            opt.step([ae.W0, ae.W1], [g0, g1])
        final = ae.loss(F)
    if not np.isfinite(final):
        raise DivergenceError(f"graph autoencoder diverged at epoch {train_cfg.epochs} (lr={train_cfg.lr:g})")
    logger.debug("graph autoencoder: loss %.4g -> %.4g", history[0] if history else final, final)

    psi = ae.encode(F)[:n_classes]
    if class_order is not None:
        reordered = np.empty_like(psi)
        reordered[np.asarray(class_order)] = psi
        psi = reordered
    return LatentSpace(
        psi=psi,
        final_reconstruction_loss=final,
        initial_reconstruction_loss=history[0] if history else final,
        autoencoder=ae,
        loss_history=history,
    )


class LatentSpaceGenerator(TransformerMixin, BaseEstimator):
    """Learn per-class latent attributes from a class-attribute matrix.

    ``fit`` takes the prototype matrix (classes x attributes) with rows in
    class-index order. ``transform`` rebuilds the graph for any prototype
    matrix of the same shape and applies the fitted encoder, returning one
    latent row per class; on the training matrix it reproduces ``psi_``.

    Parameters
    ----------
    latent_dim : int, default=40
    alpha : float, default=0.8
        Diffusion restart weight, in (0, 1).
    p : int, default=2
        Truncation order of the propagation polynomial.
    learning_rate : float, default=1e-3
    n_epochs : int, default=3000
    rescale : bool, default=True
        Map the covariance into the prototype value range before use.
    random_state : int, default=0
    """

    def __init__(self, latent_dim=40, alpha=0.8, p=2, learning_rate=1e-3, n_epochs=3000,
                 rescale=True, random_state=0):
        self.latent_dim = latent_dim
        self.alpha = alpha
        self.p = p
        self.learning_rate = learning_rate
        self.n_epochs = n_epochs
        self.rescale = rescale
        self.random_state = random_state

    def fit(self, C, y=None, class_order=None):
        C = as_matrix(C, "C")
        order = np.arange(C.shape[0]) if class_order is None else np.asarray(class_order, dtype=np.int64)
        if sorted(order.tolist()) != list(range(C.shape[0])):
            raise ValueError("class_order must be a permutation of the class indices")
        self.class_order_ = order
        self.graph_ = build_graph(C[order], rescale=self.rescale)
        self.latent_ = train_latent_autoencoder(
            self.graph_.normalized,
            self.graph_.node_features,
            int(self.latent_dim),
            DiffusionParams(alpha=self.alpha, p=self.p),
            LatentTrainConfig(lr=self.learning_rate, epochs=int(self.n_epochs), seed=self.random_state),
            n_classes=C.shape[0],
            class_order=order,
        )
        self.psi_ = self.latent_.psi
        self.n_features_in_ = C.shape[1]
        return self

    def transform(self, C):
        check_is_fitted(self, "latent_")
        C = as_matrix(C, "C")
        if C.shape != (len(self.class_order_), self.n_features_in_):
            raise ShapeError(
                f"expected a {len(self.class_order_)}x{self.n_features_in_} prototype matrix, got {C.shape}"
            )
        graph = build_graph(C[self.class_order_], rescale=self.rescale)
        ae = self.latent_.autoencoder
        P = propagation_operator(graph.normalized, self.alpha, self.p)
        hidden = relu(P @ graph.node_features @ ae.W0)[: C.shape[0]]
        out = np.empty_like(hidden)
        out[self.class_order_] = hidden
        return out
