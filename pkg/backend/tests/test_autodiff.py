"""Tests for the compute graph, forward / backward passes and gradient checks."""

from typing import Callable

import numpy as np
import pytest

from backend.app.models.network import NetworkConfig
from backend.app.networks.autodiff import (
    ComputeGraph,
    LeafSpec,
    Tensor,
    backward,
    forward,
    grad_check,
)
from backend.app.networks.q_network import OBSERVATION, build_q_network
from backend.app.utils.errors import GraphError, NonFiniteError

GRAD_TOLERANCE = 1e-4
INSTANCES = 100


def _summed(graph: ComputeGraph, ref: str) -> ComputeGraph:
    graph.set_output(graph.sum(ref))
    return graph


class TestForward:
    """Test forward evaluation."""

    def test_single_relu(self):
        graph = ComputeGraph()
        x = graph.leaf("x", (2,))
        graph.relu(x)
        result = forward(graph, {"x": [-1.0, 2.0]})
        np.testing.assert_array_equal(result.output.data, [0.0, 2.0])

    def test_identity_graph(self):
        graph = ComputeGraph()
        graph.set_output(graph.leaf("x", (None,)))
        x = np.array([1.5, -2.0, 3.0])
        np.testing.assert_array_equal(forward(graph, [x]).output.data, x)

    def test_zero_weight_mlp_outputs_zero(self, rng):
        graph = ComputeGraph()
        x = graph.leaf("x", (None, 3), requires_grad=False)
        h = graph.relu(graph.add(graph.matmul(x, graph.transpose(graph.leaf("W1", (4, 3)))), graph.leaf("b1", (4,))))
        graph.add(graph.matmul(h, graph.transpose(graph.leaf("W2", (2, 4)))), graph.leaf("b2", (2,)))
        leaves = {
            "x": rng.normal(size=(5, 3)),
            "W1": np.zeros((4, 3)),
            "b1": np.zeros(4),
            "W2": np.zeros((2, 4)),
            "b2": np.zeros(2),
        }
        np.testing.assert_array_equal(forward(graph, leaves).output.data, np.zeros((5, 2)))

    def test_activations_hold_intermediates(self):
        graph = ComputeGraph()
        x = graph.leaf("x", (2,))
        doubled = graph.scale(x, 2.0, name="doubled")
        graph.relu(doubled)
        result = forward(graph, {"x": [1.0, -1.0]})
        np.testing.assert_array_equal(result["doubled"].data, [2.0, -2.0])
        assert isinstance(result.output, Tensor)

    def test_shape_mismatch_names_primitive(self):
        graph = ComputeGraph()
        a = graph.leaf("a", (2, 3))
        b = graph.leaf("b", (2, 3))
        graph.matmul(a, b)
        with pytest.raises(GraphError) as excinfo:
            forward(graph, {"a": np.ones((2, 3)), "b": np.ones((2, 3))})
        assert excinfo.value.primitive == "matmul"
        assert excinfo.value.node == 0
        assert "matmul" in str(excinfo.value)

    def test_leaf_shape_checked(self):
        graph = ComputeGraph()
        graph.relu(graph.leaf("x", (None, 3)))
        with pytest.raises(GraphError, match="leaf 'x'"):
            forward(graph, {"x": np.ones((2, 4))})

    def test_missing_leaf(self):
        graph = ComputeGraph()
        graph.add(graph.leaf("a", (1,)), graph.leaf("b", (1,)))
        with pytest.raises(GraphError, match="missing value"):
            forward(graph, {"a": [1.0]})

    def test_unknown_primitive_and_forward_reference(self):
        graph = ComputeGraph()
        x = graph.leaf("x", (1,))
        with pytest.raises(GraphError, match="unknown primitive"):
            graph.apply("tanh", x)
        with pytest.raises(GraphError, match="not produced earlier"):
            graph.relu("later")

    def test_non_finite_forward(self):
        graph = ComputeGraph()
        graph.mul(graph.leaf("a", (1,)), graph.leaf("b", (1,)))
        with pytest.raises(NonFiniteError, match="mul"):
            forward(graph, {"a": [np.inf], "b": [1.0]})

    def test_leaf_spec_wildcard(self):
        spec = LeafSpec("x", (None, 3))
        assert spec.accepts((7, 3))
        assert not spec.accepts((7, 4))
        assert not spec.accepts((3,))

    def test_repeated_calls_are_bitwise_identical(self, rng):
        cfg = NetworkConfig(
            input_shape=(3,),
            num_actions=2,
            hidden_layers=2,
            units=6,
            noisy=True,
            dueling=True,
            head="c51",
            num_atoms=5,
        )
        net = build_q_network(cfg, seed=11)
        graph = ComputeGraph()
        obs = graph.leaf(OBSERVATION, (None, 3), requires_grad=False)
        graph.set_output(net.build(graph, obs))
        leaves = net.leaf_values(net.sample_noise(rng))
        leaves[OBSERVATION] = rng.normal(size=(4, 3))
        snapshot = {name: np.array(value, copy=True) for name, value in leaves.items()}

        first = forward(graph, leaves)
        second = forward(graph, leaves)

        np.testing.assert_array_equal(first.output.data, second.output.data)
        for name, value in snapshot.items():
            np.testing.assert_array_equal(leaves[name], value)


class TestBackward:
    """Test reverse-mode gradients."""

    def test_product_rule(self):
        graph = ComputeGraph()
        graph.mul(graph.leaf("w", (1,)), graph.leaf("x", (1,), requires_grad=False))
        activations = forward(graph, {"w": [2.0], "x": [3.0]})
        grads = backward(graph, activations, seed_grad=[1.0])
        np.testing.assert_array_equal(grads["w"], [3.0])
        assert "x" not in grads

    def test_relu_subgradient(self):
        graph = ComputeGraph()
        graph.relu(graph.leaf("x", (1,)))
        grads = backward(graph, forward(graph, {"x": [-1.0]}), seed_grad=[1.0])
        np.testing.assert_array_equal(grads["x"], [0.0])

    def test_backward_before_forward(self):
        graph = ComputeGraph()
        graph.relu(graph.leaf("x", (1,)))
        with pytest.raises(GraphError, match="before forward"):
            backward(graph, None)

    def test_seed_shape_checked(self):
        graph = ComputeGraph()
        graph.relu(graph.leaf("x", (2,)))
        with pytest.raises(GraphError, match="seed gradient"):
            backward(graph, forward(graph, {"x": [1.0, 2.0]}), seed_grad=[1.0])

    def test_gradients_accumulate_over_fanout(self):
        graph = ComputeGraph()
        x = graph.leaf("x", (1,))
        graph.add(x, x)
        grads = backward(graph, forward(graph, {"x": [5.0]}))
        np.testing.assert_array_equal(grads["x"], [2.0])

    def test_gradient_stored_on_activation(self):
        graph = ComputeGraph()
        graph.scale(graph.leaf("x", (2,)), 3.0)
        activations = forward(graph, {"x": [1.0, 2.0]})
        backward(graph, activations)
        np.testing.assert_array_equal(activations["x"].grad, [3.0, 3.0])


def _linear_graph() -> ComputeGraph:
    graph = ComputeGraph()
    x = graph.leaf("x", (None, 3), requires_grad=False)
    W = graph.leaf("W", (4, 3))
    b = graph.leaf("b", (4,))
    return _summed(graph, graph.add(graph.matmul(x, graph.transpose(W)), b))


# Each builder returns a scalar-output graph and a sampler for its leaves.
Case = tuple[ComputeGraph, Callable[[np.random.Generator], dict[str, np.ndarray]]]


def _case_softmax() -> Case:
    graph = ComputeGraph()
    x = graph.leaf("x", (3, 4))
    w = graph.leaf("w", (3, 4), requires_grad=False)
    _summed(graph, graph.mul(graph.softmax(x, axis=1), w))
    return graph, lambda r: {"x": r.normal(size=(3, 4)), "w": r.normal(size=(3, 4))}


def _case_log_softmax() -> Case:
    graph = ComputeGraph()
    x = graph.leaf("x", (3, 5))
    w = graph.leaf("w", (3, 5), requires_grad=False)
    _summed(graph, graph.mul(graph.log_softmax(x, axis=-1), w))
    return graph, lambda r: {"x": r.normal(size=(3, 5)), "w": r.normal(size=(3, 5))}


def _case_elementwise() -> Case:
    graph = ComputeGraph()
    a = graph.leaf("a", (3, 4))
    b = graph.leaf("b", (4,))
    out = graph.sub(graph.mul(graph.cos(a), b), graph.scale(graph.relu(a), 0.5))
    _summed(graph, graph.mean(out, axis=0))
    return graph, lambda r: {"a": r.normal(size=(3, 4)), "b": r.normal(size=4)}


def _case_reshape_repeat_transpose() -> Case:
    graph = ComputeGraph()
    x = graph.leaf("x", (2, 6))
    y = graph.transpose(graph.reshape(graph.repeat(x, 3), (6, 3, 2)), axes=(2, 0, 1))
    w = graph.leaf("w", (2, 6, 3), requires_grad=False)
    _summed(graph, graph.mul(y, w))
    return graph, lambda r: {"x": r.normal(size=(2, 6)), "w": r.normal(size=(2, 6, 3))}


def _case_gather() -> Case:
    graph = ComputeGraph()
    x = graph.leaf("x", (4, 3, 2))
    index = graph.leaf("index", (None,), requires_grad=False)
    w = graph.leaf("w", (4, 2), requires_grad=False)
    _summed(graph, graph.mul(graph.gather(x, index, axis=1), w))
    return graph, lambda r: {
        "x": r.normal(size=(4, 3, 2)),
        "index": r.integers(0, 3, size=4).astype(np.float64),
        "w": r.normal(size=(4, 2)),
    }


def _case_conv() -> Case:
    graph = ComputeGraph()
    x = graph.leaf("x", (2, 4, 4, 3))
    filters = graph.leaf("filters", (2, 2, 3, 2))
    w = graph.leaf("w", (2, 3, 3, 2), requires_grad=False)
    _summed(graph, graph.mul(graph.conv2d(x, filters), w))
    return graph, lambda r: {
        "x": r.normal(size=(2, 4, 4, 3)),
        "filters": r.normal(size=(2, 2, 3, 2)),
        "w": r.normal(size=(2, 3, 3, 2)),
    }


def _case_huber() -> Case:
    graph = ComputeGraph()
    pred = graph.leaf("pred", (6,))
    target = graph.leaf("target", (6,), requires_grad=False)
    _summed(graph, graph.huber(graph.sub(target, pred), 1.0))
    return graph, lambda r: {"pred": r.normal(scale=2.0, size=6), "target": r.normal(size=6)}


def _case_half_square() -> Case:
    graph = ComputeGraph()
    pred = graph.leaf("pred", (6,))
    target = graph.leaf("target", (6,), requires_grad=False)
    _summed(graph, graph.half_square(graph.sub(target, pred)))
    return graph, lambda r: {"pred": r.normal(size=6), "target": r.normal(size=6)}


def _case_cross_entropy() -> Case:
    graph = ComputeGraph()
    logits = graph.leaf("logits", (3, 7))
    target = graph.leaf("target", (3, 7), requires_grad=False)
    _summed(graph, graph.scale(graph.mul(target, graph.log_softmax(logits)), -1.0))

    def sample(r: np.random.Generator) -> dict[str, np.ndarray]:
        probs = r.random((3, 7))
        return {"logits": r.normal(size=(3, 7)), "target": probs / probs.sum(axis=1, keepdims=True)}

    return graph, sample


def _case_quantile_huber() -> Case:
    graph = ComputeGraph()
    pred = graph.leaf("pred", (2, 4, 1))
    target = graph.leaf("target", (2, 1, 5), requires_grad=False)
    tau = graph.leaf("tau", (2, 4, 1), requires_grad=False)
    pairwise = graph.quantile_huber(graph.sub(target, pred), tau, kappa=1.0)
    _summed(graph, graph.mean(pairwise, axis=2))
    return graph, lambda r: {
        "pred": r.normal(scale=2.0, size=(2, 4, 1)),
        "target": r.normal(scale=2.0, size=(2, 1, 5)),
        "tau": r.random((2, 4, 1)),
    }


CASES = {
    "softmax": _case_softmax,
    "log_softmax": _case_log_softmax,
    "elementwise": _case_elementwise,
    "reshape_repeat_transpose": _case_reshape_repeat_transpose,
    "gather": _case_gather,
    "conv2d": _case_conv,
    "huber_loss": _case_huber,
    "mse_loss": _case_half_square,
    "categorical_cross_entropy": _case_cross_entropy,
    "quantile_huber_loss": _case_quantile_huber,
}


class TestGradCheck:
    """Analytic gradients against central finite differences."""

    def test_linear_graph(self, rng):
        graph = _linear_graph()
        leaves = {"x": rng.normal(size=(5, 3)), "W": rng.normal(size=(4, 3)), "b": rng.normal(size=4)}
        assert grad_check(graph, leaves) < 1e-7

    def test_zero_weight_network_is_exact(self, rng):
        graph = ComputeGraph()
        x = graph.leaf("x", (None, 3), requires_grad=False)
        h = graph.relu(graph.add(graph.matmul(x, graph.transpose(graph.leaf("W1", (4, 3)))), graph.leaf("b1", (4,))))
        _summed(graph, graph.matmul(h, graph.transpose(graph.leaf("W2", (2, 4)))))
        leaves = {
            "x": rng.normal(size=(5, 3)),
            "W1": np.zeros((4, 3)),
            "b1": np.zeros(4),
            "W2": np.zeros((2, 4)),
        }
        assert grad_check(graph, leaves) == 0.0

    def test_non_scalar_output(self):
        graph = ComputeGraph()
        graph.relu(graph.leaf("x", (2,)))
        with pytest.raises(GraphError, match="scalar"):
            grad_check(graph, {"x": [1.0, 2.0]})

    @pytest.mark.parametrize("name", list(CASES))
    def test_primitives_and_losses(self, name):
        graph, sample = CASES[name]()
        r = np.random.default_rng(7)
        worst = max(grad_check(graph, sample(r)) for _ in range(INSTANCES))
        assert worst < GRAD_TOLERANCE

    @pytest.mark.parametrize("head", ["scalar", "c51", "qr"])
    def test_dueling_noisy_network_with_fixed_noise(self, head, rng):
        cfg = NetworkConfig(
            input_shape=(3,),
            num_actions=2,
            hidden_layers=2,
            units=6,
            noisy=True,
            dueling=True,
            head=head,
            num_atoms=3,
        )
        net = build_q_network(cfg, seed=3)
        graph = ComputeGraph()
        obs = graph.leaf(OBSERVATION, (None, 3), requires_grad=False)
        _summed(graph, net.build(graph, obs))
        leaves = net.leaf_values(net.sample_noise(rng))
        leaves[OBSERVATION] = rng.normal(size=(4, 3))
        assert grad_check(graph, leaves) < GRAD_TOLERANCE

    def test_implicit_quantile_network(self, rng):
        cfg = NetworkConfig(
            input_shape=(3,), num_actions=2, hidden_layers=1, units=5, head="iqn", quantile_embedding_dim=4
        )
        net = build_q_network(cfg, seed=5)
        graph = ComputeGraph()
        obs = graph.leaf(OBSERVATION, (None, 3), requires_grad=False)
        _summed(graph, net.build(graph, obs, num_taus=3))
        leaves = net.leaf_values(taus=rng.random((2, 3)))
        leaves[OBSERVATION] = rng.normal(size=(2, 3))
        assert grad_check(graph, leaves) < GRAD_TOLERANCE
