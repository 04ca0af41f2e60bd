"""Renormalized graph operator and the graph-convolution propagation rule.

The operator D^{-1/2} (A + I) D^{-1/2} is computed once per adjacency
(adjacencies are input data, not trainable) and reused by both
graph-convolution layers.  Degrees use absolute values of the self-looped
adjacency: correlation-based graphs carry negative weights, and a signed
degree could be zero or negative, leaving the inverse square root
undefined.  The literal signed variant stays available for sensitivity
checks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .connectivity import AdjacencyMatrix
from .errors import DegenerateGraphError, ShapeError, ValidationError
from .neural.tensor import Tensor, matmul, relu


@dataclass(frozen=True)
class NormalizedOperator:
    """Immutable N x N propagation operator; safe to share across passes."""

    matrix: np.ndarray

    @property
    def n_channels(self) -> int:
        return self.matrix.shape[0]


def renormalize(adj: AdjacencyMatrix | np.ndarray, signed_degree: bool = False) -> NormalizedOperator:
    """Build D^{-1/2} (A + I) D^{-1/2} from a symmetric adjacency."""
    weights = adj.weights if isinstance(adj, AdjacencyMatrix) else np.asarray(adj, dtype=np.float64)
    if weights.ndim != 2 or weights.shape[0] != weights.shape[1]:
        raise ShapeError(f"adjacency must be square, got {weights.shape}")
    if not np.all(np.isfinite(weights)):
        raise ValidationError("adjacency contains non-finite entries")
    if not np.array_equal(weights, weights.T):
        raise ValidationError("adjacency must be symmetric")
    looped = weights + np.eye(weights.shape[0], dtype=weights.dtype)
    degrees = looped.sum(axis=1) if signed_degree else np.abs(looped).sum(axis=1)
    if np.any(degrees <= 0):
        bad = int(np.argmax(degrees <= 0))
        raise DegenerateGraphError(f"node {bad} has non-positive degree {degrees[bad]}")
    inv_sqrt = 1.0 / np.sqrt(degrees)
    # outer(inv, inv) is exactly symmetric, so the product stays bit-symmetric
    matrix = looped * np.outer(inv_sqrt, inv_sqrt)
    matrix.setflags(write=False)
    return NormalizedOperator(matrix=matrix)


def gcn_layer_forward(op: NormalizedOperator | np.ndarray, h: Tensor, w: Tensor) -> Tensor:
    """One propagation step: ReLU(op @ h @ w), differentiable in h and w.

    ``h`` may be (nodes, f_in) or (batch, nodes, f_in); the operator may
    correspondingly be a single matrix or a (batch, nodes, nodes) stack.
    """
    op_matrix = op.matrix if isinstance(op, NormalizedOperator) else np.asarray(op)
    if op_matrix.shape[-1] != h.shape[-2]:
        raise ShapeError(f"operator {op_matrix.shape} does not match features {h.shape}")
    if h.shape[-1] != w.shape[0]:
        raise ShapeError(f"weights {w.shape} do not match features {h.shape}")
    propagated = matmul(Tensor(op_matrix), h)
    return relu(matmul(propagated, w))
