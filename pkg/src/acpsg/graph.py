"""Class/attribute graph built from the class-attribute prototype matrix.

Node ordering is fixed throughout: class nodes ``0..d_C-1`` followed by
attribute nodes ``d_C..d_C+d_T-1``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import NegativeDegreeError, ShapeError
from .validation import as_matrix

DEGREE_FLOOR = 1e-12


@dataclass(frozen=True)
class PrototypeMatrix:
    """Prototype rows stacked seen-first; ``class_order[r]`` is the class of row ``r``."""

    C: np.ndarray
    class_order: np.ndarray

    @property
    def d_C(self) -> int:
        return self.C.shape[0]

    @property
    def d_T(self) -> int:
        return self.C.shape[1]

    def to_class_order(self, rows: np.ndarray) -> np.ndarray:
        """Reorder per-row results (one per row of C) into class-index order."""
        out = np.empty_like(rows)
        out[self.class_order] = rows
        return out


@dataclass(frozen=True)
class AttributeGraph:
    covariance_raw: np.ndarray
    covariance: np.ndarray
    adjacency: np.ndarray
    node_features: np.ndarray
    degrees: np.ndarray
    normalized: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.adjacency.shape[0]


def build_prototype_matrix(dataset) -> PrototypeMatrix:
    order = np.array(sorted(dataset.seen_classes) + sorted(dataset.unseen_classes), dtype=np.int64)
    C = np.asarray(dataset.prototypes, dtype=np.float64)[order]
    return PrototypeMatrix(C=C, class_order=order)


def attribute_covariance(C) -> np.ndarray:
    """Population covariance between attribute columns of ``C``."""
    C = as_matrix(C, "C")
    centred = C - C.mean(axis=0)
    W = centred.T @ centred / C.shape[0]
    # exact symmetry; the product is symmetric only up to rounding
    return 0.5 * (W + W.T)


def rescale_covariance(W_raw, C) -> np.ndarray:
    """Affine min-max map of all entries of ``W_raw`` onto ``[min(C), max(C)]``.

    A constant ``W_raw`` carries no correlation information and maps to zeros.
    """
    W_raw = as_matrix(W_raw, "W_raw")
    C = as_matrix(C, "C")
    w_lo, w_hi = W_raw.min(), W_raw.max()
    if w_hi == w_lo:
        return np.zeros_like(W_raw)
    lo, hi = C.min(), C.max()
    return lo + (W_raw - w_lo) * ((hi - lo) / (w_hi - w_lo))


def assemble_adjacency(C, W_rescaled) -> np.ndarray:
    C = as_matrix(C, "C")
    W = as_matrix(W_rescaled, "W_rescaled", allow_empty=True)
    d_c, d_t = C.shape
    if W.shape != (d_t, d_t):
        raise ShapeError(f"covariance must be {d_t}x{d_t}, got {W.shape}")
    A = np.zeros((d_c + d_t, d_c + d_t))
    A[:d_c, d_c:] = C
    A[d_c:, :d_c] = C.T
    block = W.copy()
    np.fill_diagonal(block, 0.0)
    A[d_c:, d_c:] = block
    return A


def assemble_node_features(C) -> np.ndarray:
    C = as_matrix(C, "C")
    return assemble_adjacency(C, np.zeros((C.shape[1], C.shape[1])))


def normalize_adjacency(A) -> tuple[np.ndarray, np.ndarray]:
    """Degrees ``d`` and symmetric normalization ``D^-1/2 A D^-1/2``.

    Degrees are floored at ``DEGREE_FLOOR`` so isolated nodes give zero rows
    instead of NaN.
    """
    A = as_matrix(A, "A")
    if A.shape[0] != A.shape[1]:
        raise ShapeError(f"adjacency must be square, got {A.shape}")
    degrees = A.sum(axis=1)
    neg = np.flatnonzero(degrees < -DEGREE_FLOOR)
    if neg.size:
        raise NegativeDegreeError(
            f"node {neg[0]} has negative degree {degrees[neg[0]]:.3g}; "
            "rescale the covariance into the prototype range before building the graph"
        )
    inv_sqrt = 1.0 / np.sqrt(np.maximum(degrees, DEGREE_FLOOR))
    S = A * inv_sqrt[:, None] * inv_sqrt[None, :]
    return degrees, 0.5 * (S + S.T)


def build_graph(C, rescale: bool = True) -> AttributeGraph:
    """Run the whole construction: covariance, rescale, adjacency, features, S."""
    C = as_matrix(C, "C")
    W_raw = attribute_covariance(C)
    W = rescale_covariance(W_raw, C) if rescale else W_raw
    A = assemble_adjacency(C, W)
    degrees, S = normalize_adjacency(A)
    return AttributeGraph(
        covariance_raw=W_raw,
        covariance=W,
        adjacency=A,
        node_features=assemble_node_features(C),
        degrees=degrees,
        normalized=S,
    )
