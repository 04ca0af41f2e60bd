"""Renormalized operator construction and the graph-convolution step."""

import numpy as np
import pytest

from eegbbnet.connectivity import AdjacencyMatrix, identity_adjacency, random_adjacency
from eegbbnet.errors import DegenerateGraphError, ShapeError, ValidationError
from eegbbnet.graph import gcn_layer_forward, renormalize
from eegbbnet.neural.tensor import Tensor, tensor_sum

from oracles import matmul_oracle
from test_tensor import check_gradient


class TestRenormalize:
    def test_zero_adjacency_gives_identity(self):
        op = renormalize(AdjacencyMatrix(np.zeros((2, 2)), "IDN"))
        np.testing.assert_allclose(op.matrix, np.eye(2), atol=1e-15)

    def test_all_ones_two_by_two(self):
        op = renormalize(AdjacencyMatrix(np.ones((2, 2)), "COR"))
        # self-looped matrix [[2,1],[1,2]] with degree 3 per node
        np.testing.assert_allclose(op.matrix, [[2 / 3, 1 / 3], [1 / 3, 2 / 3]], atol=1e-15)

    def test_exactly_symmetric(self):
        rng = np.random.default_rng(0)
        w = rng.normal(size=(9, 9))
        w = w + w.T
        op = renormalize(AdjacencyMatrix(w, "COR"))
        np.testing.assert_array_equal(op.matrix, op.matrix.T)

    def test_spectrum_bounded_for_nonnegative(self):
        rng = np.random.default_rng(1)
        for _ in range(25):
            w = rng.uniform(0.0, 1.0, size=(12, 12))
            w = (w + w.T) / 2
            np.fill_diagonal(w, 0.0)
            op = renormalize(AdjacencyMatrix(w, "DIST"))
            eigs = np.linalg.eigvalsh(op.matrix)
            assert np.abs(eigs).max() <= 1.0 + 1e-8

    def test_signed_degree_variant(self):
        w = np.array([[0.0, 0.5], [0.5, 0.0]])
        op_abs = renormalize(AdjacencyMatrix(w, "COR"), signed_degree=False)
        op_signed = renormalize(AdjacencyMatrix(w, "COR"), signed_degree=True)
        np.testing.assert_allclose(op_abs.matrix, op_signed.matrix)
        w_neg = np.array([[0.0, -2.0], [-2.0, 0.0]])
        renormalize(AdjacencyMatrix(w_neg, "COR"))  # abs degree fine
        with pytest.raises(DegenerateGraphError):
            renormalize(AdjacencyMatrix(w_neg, "COR"), signed_degree=True)

    def test_asymmetric_rejected(self):
        w = np.array([[0.0, 1.0], [0.5, 0.0]])
        with pytest.raises(ValidationError):
            renormalize(w)

    def test_operator_is_immutable(self):
        op = renormalize(identity_adjacency(4))
        with pytest.raises(ValueError):
            op.matrix[0, 0] = 5.0


class TestGcnLayer:
    def test_identity_operator_nonnegative_passthrough(self):
        h = Tensor(np.abs(np.random.default_rng(2).normal(size=(4, 3))))
        w = Tensor(np.eye(3))
        out = gcn_layer_forward(np.eye(4), h, w)
        np.testing.assert_allclose(out.data, h.data, atol=1e-12)

    def test_relu_clips_negatives(self):
        h = Tensor(np.array([[1.0, -2.0], [-3.0, 4.0]]))
        out = gcn_layer_forward(np.eye(2), h, Tensor(np.eye(2)))
        np.testing.assert_array_equal(out.data, [[1.0, 0.0], [0.0, 4.0]])

    def test_matches_triple_loop_oracle(self):
        rng = np.random.default_rng(3)
        adj = rng.uniform(0, 1, size=(4, 4))
        adj = (adj + adj.T) / 2
        np.fill_diagonal(adj, 0.0)
        op = renormalize(AdjacencyMatrix(adj, "DIST"))
        h = rng.normal(size=(4, 3))
        w = rng.normal(size=(3, 2))
        got = gcn_layer_forward(op, Tensor(h), Tensor(w)).data
        want = np.maximum(matmul_oracle(matmul_oracle(op.matrix, h), w), 0.0)
        np.testing.assert_allclose(got, want, atol=1e-10)

    def test_identity_adjacency_reduces_to_dense(self):
        rng = np.random.default_rng(4)
        op = renormalize(identity_adjacency(5))
        h = rng.normal(size=(5, 4))
        w = rng.normal(size=(4, 3))
        got = gcn_layer_forward(op, Tensor(h), Tensor(w)).data
        dense = np.maximum(h @ w, 0.0)
        np.testing.assert_allclose(got, dense, atol=1e-12)

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ShapeError):
            gcn_layer_forward(np.eye(3), Tensor(np.ones((4, 2))), Tensor(np.ones((2, 2))))
        with pytest.raises(ShapeError):
            gcn_layer_forward(np.eye(4), Tensor(np.ones((4, 2))), Tensor(np.ones((3, 2))))

    def test_gradients_wrt_features_and_weights(self):
        rng = np.random.default_rng(5)
        op = renormalize(random_adjacency(4, seed=9)).matrix

        def loss(h, w):
            return tensor_sum(gcn_layer_forward(op, h, w) ** 2)

        # keep activations away from the ReLU kink for clean differences
        h0 = rng.normal(size=(4, 3)) + 0.5
        w0 = rng.normal(size=(3, 2))
        check_gradient(loss, [h0, w0])
