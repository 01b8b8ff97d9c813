"""Nearest-prototype prediction and conventional / generalized ZSL scoring."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field

import numpy as np

from .embedding import EmbeddingModel, MultiSpacePrototypes, concat_prototypes, l2_normalize_rows
from .exceptions import EmptySearchSpace, LabelError, MissingSeenTestSplit, RangeError, ShapeError

NORM_FLOOR = 1e-12


class PredictionDirection(str, enum.Enum):
    V_TO_S = "v2s"  # encode features, compare in prototype space
    S_TO_V = "s2v"  # decode prototypes, compare in feature space


class Mode(str, enum.Enum):
    CONVENTIONAL = "czsl"
    GENERALIZED = "gzsl"


def cosine_distance(u, v) -> float:
    u, v = np.asarray(u, float).ravel(), np.asarray(v, float).ravel()
    if u.shape != v.shape:
        raise ShapeError(f"vectors have different lengths {u.size} and {v.size}")
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu < NORM_FLOOR or nv < NORM_FLOOR:
        return 1.0
    return float(1.0 - (u @ v) / (nu * nv))


def cosine_distance_matrix(queries, refs) -> np.ndarray:
    """Pairwise distances between rows of ``queries`` and rows of ``refs``.

    Rows with norm below ``NORM_FLOOR`` are at distance 1 from everything.
    """
    Q, R = np.asarray(queries, float), np.asarray(refs, float)
    if Q.shape[1] != R.shape[1]:
        raise ShapeError(f"dimension mismatch {Q.shape[1]} vs {R.shape[1]}")
    nq, nr = np.linalg.norm(Q, axis=1), np.linalg.norm(R, axis=1)
    okq, okr = nq >= NORM_FLOOR, nr >= NORM_FLOOR
    Qn = np.divide(Q, nq[:, None], out=np.zeros_like(Q), where=okq[:, None])
    Rn = np.divide(R, nr[:, None], out=np.zeros_like(R), where=okr[:, None])
    dist = 1.0 - Qn @ Rn.T
    dist[~okq, :] = 1.0
    dist[:, ~okr] = 1.0
    return dist


def predict_labels(model: EmbeddingModel, X, prototypes, candidate_classes,
                   direction=PredictionDirection.V_TO_S) -> np.ndarray:
    """Nearest candidate prototype under cosine distance.

    ``X`` holds samples as columns (D x N). Exact ties go to the smallest
    class index.
    """
    direction = PredictionDirection(direction)
    cands = np.unique(np.asarray(list(candidate_classes), dtype=np.int64))
    if cands.size == 0:
        raise EmptySearchSpace("candidate class set is empty")
    table = prototypes.table if isinstance(prototypes, MultiSpacePrototypes) else np.asarray(prototypes, float)
    if cands.min() < 0 or cands.max() >= table.shape[0]:
        raise LabelError(f"candidate classes must index the {table.shape[0]} prototype rows")
    X = np.asarray(X, float)
    rows = table[cands]
    if direction is PredictionDirection.V_TO_S:
        dist = cosine_distance_matrix((model.W_en @ X).T, rows)
    else:
        dist = cosine_distance_matrix(X.T, (model.W_de @ rows.T).T)
    # np.argmin returns the first minimum, and cands is sorted ascending
    return cands[np.argmin(dist, axis=1)]


def per_class_accuracy(predicted, truth, class_set, averaging: str = "per_class"):
    """Per-class accuracies and their mean.

    Classes without test samples are left out of both the map and the mean.
    ``averaging="per_sample"`` returns plain top-1 accuracy as the mean.
    """
    predicted, truth = np.asarray(predicted), np.asarray(truth)
    if predicted.shape != truth.shape:
        raise ShapeError(f"{predicted.size} predictions for {truth.size} labels")
    classes = sorted(set(int(c) for c in class_set))
    stray = set(truth.tolist()) - set(classes)
    if stray:
        raise LabelError(f"true labels {sorted(stray)[:5]} are outside the evaluated class set")
    acc = {}
    for c in classes:
        mask = truth == c
        n = int(mask.sum())
        if n:
            acc[c] = float(np.sum(predicted[mask] == c)) / n
    if averaging == "per_sample":
        mean = float(np.mean(predicted == truth)) if truth.size else 0.0
    elif averaging == "per_class":
        mean = float(np.mean(list(acc.values()))) if acc else 0.0
    else:
        raise ValueError(f"unknown averaging {averaging!r}")
    return acc, mean


def harmonic_mean(acc_s: float, acc_u: float) -> float:
    if acc_s < 0 or acc_u < 0:
        raise RangeError(f"accuracies must be non-negative, got {acc_s}, {acc_u}")
    if acc_s + acc_u == 0:
        return 0.0
    return 2.0 * acc_s * acc_u / (acc_s + acc_u)


@dataclass
class EvalReport:
    """Accuracies are stored as fractions; :meth:`to_dict` reports percentages."""

    mode: Mode
    direction: PredictionDirection
    per_class_accuracy: dict
    acc_unseen: float
    acc_seen: float | None = None
    harmonic_mean: float | None = None
    config: dict = field(default_factory=dict)
    class_names: tuple = ()

    def to_dict(self) -> dict:
        def name(c):
            return self.class_names[c] if c < len(self.class_names) else str(c)

        out = {
            "mode": Mode(self.mode).value,
            "direction": PredictionDirection(self.direction).value,
            "acc_unseen": 100.0 * self.acc_unseen,
        }
        if self.mode == Mode.GENERALIZED:
            out["acc_seen"] = 100.0 * self.acc_seen
            out["harmonic_mean"] = 100.0 * self.harmonic_mean
        out["per_class"] = {name(c): 100.0 * a for c, a in sorted(self.per_class_accuracy.items())}
        out["config"] = dict(self.config)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def build_multispace(dataset, latent=None, normalize: bool = True) -> MultiSpacePrototypes:
    psi = None if latent is None else latent.psi
    return concat_prototypes(dataset.prototypes, psi, normalize=normalize)


def evaluate(model: EmbeddingModel, latent, dataset, mode=Mode.CONVENTIONAL,
             direction=PredictionDirection.V_TO_S, *, prototypes=None, normalize_prototypes=True,
             normalize_features=False, averaging="per_class", config=None) -> EvalReport:
    """Score a trained model on the dataset's test splits.

    Conventional mode searches unseen classes only; generalized mode searches
    all classes and scores both test splits. ``latent=None`` evaluates the
    attribute-only prototypes.
    """
    mode, direction = Mode(mode), PredictionDirection(direction)
    if prototypes is None:
        prototypes = build_multispace(dataset, latent, normalize=normalize_prototypes)

    def prep(X):
        X = np.asarray(X, float)
        return (l2_normalize_rows(X) if normalize_features else X).T

    if mode is Mode.GENERALIZED and not dataset.has_seen_test:
        raise MissingSeenTestSplit("generalized evaluation needs a seen-class test split")
    cands = dataset.unseen_classes if mode is Mode.CONVENTIONAL else range(dataset.n_classes)
    pred_u = predict_labels(model, prep(dataset.features_test_unseen), prototypes, cands, direction)
    per_u, acc_u = per_class_accuracy(pred_u, dataset.labels_test_unseen, dataset.unseen_classes, averaging)
    per_class = dict(per_u)
    acc_s = h = None
    if mode is Mode.GENERALIZED:
        pred_s = predict_labels(model, prep(dataset.features_test_seen), prototypes, cands, direction)
        per_s, acc_s = per_class_accuracy(pred_s, dataset.labels_test_seen, dataset.seen_classes, averaging)
        per_class.update(per_s)
        h = harmonic_mean(acc_s, acc_u)
    return EvalReport(
        mode=mode,
        direction=direction,
        per_class_accuracy=per_class,
        acc_unseen=acc_u,
        acc_seen=acc_s,
        harmonic_mean=h,
        config=dict(config or {}),
        class_names=tuple(dataset.class_names),
    )
