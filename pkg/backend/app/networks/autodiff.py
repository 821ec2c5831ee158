"""Dense float64 tensors with reverse-mode differentiation over a fixed primitive set.

A :class:`ComputeGraph` is a declarative, topologically ordered list of
primitive applications over named leaves. :func:`forward` evaluates it for a
concrete set of leaf values and :func:`backward` pushes a seed gradient back
to every leaf that requires one.
"""

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from typing import Any, Callable, ClassVar, Optional, Union

import numpy as np

from backend.app.utils.errors import GraphError, NonFiniteError

ArrayLike = Union[np.ndarray, float, Sequence[Any]]
Shape = tuple[Optional[int], ...]


@dataclass
class Tensor:
    """Dense float64 array with an optional gradient slot."""

    data: np.ndarray
    grad: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.grad is not None and self.grad.shape != self.data.shape:
            raise GraphError(
                f"gradient shape {self.grad.shape} does not match data {self.data.shape}"
            )

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return int(self.data.size)

    def is_finite(self) -> bool:
        finite = bool(np.isfinite(self.data).all())
        if self.grad is not None:
            finite = finite and bool(np.isfinite(self.grad).all())
        return finite


@dataclass(frozen=True)
class LeafSpec:
    """Declared input of a graph. ``None`` in the shape matches any size."""

    name: str
    shape: Shape
    requires_grad: bool = True

    def accepts(self, shape: tuple[int, ...]) -> bool:
        if len(shape) != len(self.shape):
            return False
        return all(want is None or want == got for want, got in zip(self.shape, shape))


@dataclass(frozen=True)
class Node:
    """One primitive application."""

    op: str
    inputs: tuple[str, ...]
    output: str
    attrs: dict[str, Any] = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Primitive registry
# ---------------------------------------------------------------------------

Grads = list[Optional[np.ndarray]]


class Primitive:
    """Base class for differentiable primitives."""

    name: ClassVar[str] = ""
    arity: ClassVar[int] = 1

    @staticmethod
    def forward(inputs: list[np.ndarray], attrs: dict[str, Any]) -> np.ndarray:
        raise NotImplementedError

    @staticmethod
    def backward(
        grad: np.ndarray,
        inputs: list[np.ndarray],
        output: np.ndarray,
        attrs: dict[str, Any],
        needs: tuple[bool, ...],
    ) -> Grads:
        raise NotImplementedError


PRIMITIVES: dict[str, type[Primitive]] = {}


def primitive(name: str, arity: int) -> Callable[[type[Primitive]], type[Primitive]]:
    """Register a primitive class under ``name``."""

    def register(cls: type[Primitive]) -> type[Primitive]:
        cls.name = name
        cls.arity = arity
        PRIMITIVES[name] = cls
        return cls

    return register


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_shape(a: np.ndarray, b: np.ndarray) -> tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ValueError(f"cannot broadcast {a.shape} with {b.shape}") from None


@primitive("matmul", 2)
class MatMul(Primitive):
    @staticmethod
    def forward(inputs: list[np.ndarray], attrs: dict[str, Any]) -> np.ndarray:
        a, b = inputs
        if a.ndim < 1 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
            raise ValueError(f"inner dimensions disagree: {a.shape} @ {b.shape}")
        return np.matmul(a, b)

    @staticmethod
    def backward(grad, inputs, output, attrs, needs):
        a, b = inputs
        grad_a = np.matmul(grad, np.swapaxes(b, -1, -2)) if needs[0] else None
        grad_b = None
        if needs[1]:
            grad_b = _unbroadcast(np.matmul(np.swapaxes(a, -1, -2), grad), b.shape)
        return [grad_a, grad_b]


@primitive("transpose", 1)
class Transpose(Primitive):
    @staticmethod
    def forward(inputs, attrs):
        return np.transpose(inputs[0], attrs.get("axes"))

    @staticmethod
    def backward(grad, inputs, output, attrs, needs):
        axes = attrs.get("axes")
        if axes is None:
            return [np.transpose(grad)]
        return [np.transpose(grad, np.argsort(axes))]


@primitive("add", 2)
class Add(Primitive):
    @staticmethod
    def forward(inputs, attrs):
        a, b = inputs
        _broadcast_shape(a, b)
        return a + b

    @staticmethod
    def backward(grad, inputs, output, attrs, needs):
        a, b = inputs
        return [
            _unbroadcast(grad, a.shape) if needs[0] else None,
            _unbroadcast(grad, b.shape) if needs[1] else None,
        ]


@primitive("sub", 2)
class Sub(Primitive):
    @staticmethod
    def forward(inputs, attrs):
        a, b = inputs
        _broadcast_shape(a, b)
        return a - b

    @staticmethod
    def backward(grad, inputs, output, attrs, needs):
        a, b = inputs
        return [
            _unbroadcast(grad, a.shape) if needs[0] else None,
            _unbroadcast(-grad, b.shape) if needs[1] else None,
        ]


@primitive("mul", 2)
class Mul(Primitive):
    @staticmethod
    def forward(inputs, attrs):
        a, b = inputs
        _broadcast_shape(a, b)
        return a * b

    @staticmethod
    def backward(grad, inputs, output, attrs, needs):
        a, b = inputs
        return [
            _unbroadcast(grad * b, a.shape) if needs[0] else None,
            _unbroadcast(grad * a, b.shape) if needs[1] else None,
        ]


@primitive("scale", 1)
class Scale(Primitive):
    @staticmethod
    def forward(inputs, attrs):
        return inputs[0] * float(attrs["factor"])

    @staticmethod
    def backward(grad, inputs, output, attrs, needs):
        return [grad * float(attrs["factor"])]


@primitive("relu", 1)
class Relu(Primitive):
    @staticmethod
    def forward(inputs, attrs):
        return np.maximum(inputs[0], 0.0)

    @staticmethod
    def backward(grad, inputs, output, attrs, needs):
        # subgradient at 0 is 0
        return [grad * (inputs[0] > 0.0)]


@primitive("cos", 1)
class Cos(Primitive):
    @staticmethod
    def forward(inputs, attrs):
        return np.cos(inputs[0])

    @staticmethod
    def backward(grad, inputs, output, attrs, needs):
        return [-grad * np.sin(inputs[0])]


@primitive("softmax", 1)
class Softmax(Primitive):
    @staticmethod
    def forward(inputs, attrs):
        axis = attrs.get("axis", -1)
        shifted = inputs[0] - inputs[0].max(axis=axis, keepdims=True)
        exp = np.exp(shifted)
        return exp / exp.sum(axis=axis, keepdims=True)

    @staticmethod
    def backward(grad, inputs, output, attrs, needs):
        axis = attrs.get("axis", -1)
        inner = (grad * output).sum(axis=axis, keepdims=True)
        return [output * (grad - inner)]


@primitive("log_softmax", 1)
class LogSoftmax(Primitive):
    @staticmethod
    def forward(inputs, attrs):
        axis = attrs.get("axis", -1)
        shifted = inputs[0] - inputs[0].max(axis=axis, keepdims=True)
        return shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))

    @staticmethod
    def backward(grad, inputs, output, attrs, needs):
        axis = attrs.get("axis", -1)
        return [grad - np.exp(output) * grad.sum(axis=axis, keepdims=True)]


@primitive("sum", 1)
class Sum(Primitive):
    @staticmethod
    def forward(inputs, attrs):
        return np.asarray(
            inputs[0].sum(axis=attrs.get("axis"), keepdims=attrs.get("keepdims", False))
        )

    @staticmethod
    def backward(grad, inputs, output, attrs, needs):
        axis = attrs.get("axis")
        if axis is not None and not attrs.get("keepdims", False):
            grad = np.expand_dims(grad, axis)
        return [np.broadcast_to(grad, inputs[0].shape).copy()]


@primitive("mean", 1)
class Mean(Primitive):
    @staticmethod
    def forward(inputs, attrs):
        return np.asarray(
            inputs[0].mean(axis=attrs.get("axis"), keepdims=attrs.get("keepdims", False))
        )

    @staticmethod
    def backward(grad, inputs, output, attrs, needs):
        axis = attrs.get("axis")
        x = inputs[0]
        count = x.size if axis is None else x.shape[axis]
        if axis is not None and not attrs.get("keepdims", False):
            grad = np.expand_dims(grad, axis)
        return [np.broadcast_to(grad / count, x.shape).copy()]


@primitive("reshape", 1)
class Reshape(Primitive):
    @staticmethod
    def forward(inputs, attrs):
        return inputs[0].reshape(attrs["shape"])

    @staticmethod
    def backward(grad, inputs, output, attrs, needs):
        return [grad.reshape(inputs[0].shape)]


@primitive("repeat", 1)
class Repeat(Primitive):
    """Repeat every row along axis 0 ``repeats`` times (np.repeat semantics)."""

    @staticmethod
    def forward(inputs, attrs):
        return np.repeat(inputs[0], int(attrs["repeats"]), axis=0)

    @staticmethod
    def backward(grad, inputs, output, attrs, needs):
        x = inputs[0]
        repeats = int(attrs["repeats"])
        return [grad.reshape((x.shape[0], repeats) + x.shape[1:]).sum(axis=1)]


def _gather_index(x: np.ndarray, index: np.ndarray, axis: int) -> np.ndarray:
    if index.ndim != 1 or index.shape[0] != x.shape[0]:
        raise ValueError(f"index shape {index.shape} does not match batch of {x.shape}")
    idx = index.astype(np.int64)
    if axis == 0 or axis >= x.ndim:
        raise ValueError(f"gather axis {axis} invalid for rank {x.ndim}")
    if idx.min(initial=0) < 0 or idx.max(initial=0) >= x.shape[axis]:
        raise ValueError(f"index out of range for axis of size {x.shape[axis]}")
    expand = [1] * x.ndim
    expand[0] = x.shape[0]
    target = list(x.shape)
    target[axis] = 1
    return np.broadcast_to(idx.reshape(expand), target)


@primitive("gather", 2)
class Gather(Primitive):
    """Pick one entry per batch row along ``axis``; the index input has no gradient."""

    @staticmethod
    def forward(inputs, attrs):
        x, index = inputs
        axis = int(attrs["axis"])
        idx = _gather_index(x, index, axis)
        return np.take_along_axis(x, idx, axis=axis).squeeze(axis)

    @staticmethod
    def backward(grad, inputs, output, attrs, needs):
        x, index = inputs
        axis = int(attrs["axis"])
        idx = _gather_index(x, index, axis)
        out = np.zeros_like(x)
        np.put_along_axis(out, idx, np.expand_dims(grad, axis), axis=axis)
        return [out, None]


@primitive("conv2d", 2)
class Conv2d(Primitive):
    """Valid convolution, stride 1, of (B, H, W, C) by (kh, kw, C, F) filters."""

    @staticmethod
    def forward(inputs, attrs):
        x, filters = inputs
        if x.ndim != 4 or filters.ndim != 4 or x.shape[3] != filters.shape[2]:
            raise ValueError(f"conv2d shapes incompatible: {x.shape} * {filters.shape}")
        kh, kw = filters.shape[:2]
        out_h, out_w = x.shape[1] - kh + 1, x.shape[2] - kw + 1
        if out_h < 1 or out_w < 1:
            raise ValueError(f"kernel {kh}x{kw} larger than input {x.shape[1:3]}")
        out = np.zeros((x.shape[0], out_h, out_w, filters.shape[3]))
        for i in range(kh):
            for j in range(kw):
                out += np.matmul(x[:, i : i + out_h, j : j + out_w, :], filters[i, j])
        return out

    @staticmethod
    def backward(grad, inputs, output, attrs, needs):
        x, filters = inputs
        kh, kw = filters.shape[:2]
        out_h, out_w = grad.shape[1], grad.shape[2]
        grad_x = np.zeros_like(x) if needs[0] else None
        grad_f = np.zeros_like(filters) if needs[1] else None
        for i in range(kh):
            for j in range(kw):
                window = x[:, i : i + out_h, j : j + out_w, :]
                if grad_f is not None:
                    grad_f[i, j] = np.einsum("bhwc,bhwf->cf", window, grad)
                if grad_x is not None:
                    grad_x[:, i : i + out_h, j : j + out_w, :] += np.matmul(
                        grad, filters[i, j].T
                    )
        return [grad_x, grad_f]


@primitive("huber", 1)
class Huber(Primitive):
    @staticmethod
    def forward(inputs, attrs):
        u = inputs[0]
        delta = float(attrs["delta"])
        abs_u = np.abs(u)
        return np.where(abs_u <= delta, 0.5 * u * u, delta * abs_u - 0.5 * delta * delta)

    @staticmethod
    def backward(grad, inputs, output, attrs, needs):
        delta = float(attrs["delta"])
        return [grad * np.clip(inputs[0], -delta, delta)]


@primitive("half_square", 1)
class HalfSquare(Primitive):
    @staticmethod
    def forward(inputs, attrs):
        return 0.5 * inputs[0] * inputs[0]

    @staticmethod
    def backward(grad, inputs, output, attrs, needs):
        return [grad * inputs[0]]


@primitive("quantile_huber", 2)
class QuantileHuber(Primitive):
    """|tau - 1{u<0}| * huber_kappa(u) / kappa; tau carries no gradient."""

    @staticmethod
    def forward(inputs, attrs):
        u, tau = inputs
        _broadcast_shape(u, tau)
        kappa = float(attrs["kappa"])
        abs_u = np.abs(u)
        huber = np.where(abs_u <= kappa, 0.5 * u * u, kappa * abs_u - 0.5 * kappa * kappa)
        return np.abs(tau - (u < 0.0)) * huber / kappa

    @staticmethod
    def backward(grad, inputs, output, attrs, needs):
        u, tau = inputs
        kappa = float(attrs["kappa"])
        weight = np.abs(tau - (u < 0.0))
        local = weight * np.clip(u, -kappa, kappa) / kappa
        return [_unbroadcast(grad * local, u.shape), None]


# ---------------------------------------------------------------------------
# Graph
# ---------------------------------------------------------------------------


class ComputeGraph:
    """Ordered list of primitive applications over named leaves."""

    def __init__(self) -> None:
        """Initialize an empty graph."""
        self.leaves: dict[str, LeafSpec] = {}
        self.nodes: list[Node] = []
        self._producers: dict[str, int] = {}
        self._output: Optional[str] = None

    def leaf(self, name: str, shape: Shape, requires_grad: bool = True) -> str:
        """Declare an input and return its reference."""
        if name in self.leaves or name in self._producers:
            raise GraphError(f"duplicate tensor name '{name}'")
        self.leaves[name] = LeafSpec(name, tuple(shape), requires_grad)
        return name

    def apply(self, op: str, *inputs: str, name: Optional[str] = None, **attrs: Any) -> str:
        """Append a primitive application and return its output reference."""
        if op not in PRIMITIVES:
            raise GraphError(f"unknown primitive '{op}'")
        prim = PRIMITIVES[op]
        if len(inputs) != prim.arity:
            raise GraphError(
                f"expects {prim.arity} inputs, got {len(inputs)}",
                primitive=op,
                node=len(self.nodes),
            )
        for ref in inputs:
            if ref not in self.leaves and ref not in self._producers:
                raise GraphError(
                    f"input '{ref}' is not produced earlier or declared as a leaf",
                    primitive=op,
                    node=len(self.nodes),
                )
        output = name or f"{op}_{len(self.nodes)}"
        if output in self.leaves or output in self._producers:
            raise GraphError(f"duplicate tensor name '{output}'")
        self._producers[output] = len(self.nodes)
        self.nodes.append(Node(op, tuple(inputs), output, dict(attrs)))
        self._output = output
        return output

    def set_output(self, ref: str) -> None:
        if ref not in self.leaves and ref not in self._producers:
            raise GraphError(f"unknown output '{ref}'")
        self._output = ref

    @property
    def output(self) -> str:
        if self._output is None:
            raise GraphError("graph has no output")
        return self._output

    @property
    def trainable_leaves(self) -> list[str]:
        return [name for name, spec in self.leaves.items() if spec.requires_grad]

    # Convenience builders, one per primitive.
    def matmul(self, a: str, b: str, **kw: Any) -> str:
        return self.apply("matmul", a, b, **kw)

    def transpose(self, a: str, axes: Optional[tuple[int, ...]] = None, **kw: Any) -> str:
        return self.apply("transpose", a, axes=axes, **kw)

    def add(self, a: str, b: str, **kw: Any) -> str:
        return self.apply("add", a, b, **kw)

    def sub(self, a: str, b: str, **kw: Any) -> str:
        return self.apply("sub", a, b, **kw)

    def mul(self, a: str, b: str, **kw: Any) -> str:
        return self.apply("mul", a, b, **kw)

    def scale(self, a: str, factor: float, **kw: Any) -> str:
        return self.apply("scale", a, factor=factor, **kw)

    def relu(self, a: str, **kw: Any) -> str:
        return self.apply("relu", a, **kw)

    def cos(self, a: str, **kw: Any) -> str:
        return self.apply("cos", a, **kw)

    def softmax(self, a: str, axis: int = -1, **kw: Any) -> str:
        return self.apply("softmax", a, axis=axis, **kw)

    def log_softmax(self, a: str, axis: int = -1, **kw: Any) -> str:
        return self.apply("log_softmax", a, axis=axis, **kw)

    def sum(self, a: str, axis: Optional[int] = None, keepdims: bool = False, **kw: Any) -> str:
        return self.apply("sum", a, axis=axis, keepdims=keepdims, **kw)

    def mean(self, a: str, axis: Optional[int] = None, keepdims: bool = False, **kw: Any) -> str:
        return self.apply("mean", a, axis=axis, keepdims=keepdims, **kw)

    def reshape(self, a: str, shape: tuple[int, ...], **kw: Any) -> str:
        return self.apply("reshape", a, shape=tuple(shape), **kw)

    def repeat(self, a: str, repeats: int, **kw: Any) -> str:
        return self.apply("repeat", a, repeats=repeats, **kw)

    def gather(self, a: str, index: str, axis: int, **kw: Any) -> str:
        return self.apply("gather", a, index, axis=axis, **kw)

    def conv2d(self, x: str, filters: str, **kw: Any) -> str:
        return self.apply("conv2d", x, filters, **kw)

    def huber(self, a: str, delta: float, **kw: Any) -> str:
        return self.apply("huber", a, delta=delta, **kw)

    def half_square(self, a: str, **kw: Any) -> str:
        return self.apply("half_square", a, **kw)

    def quantile_huber(self, u: str, tau: str, kappa: float, **kw: Any) -> str:
        return self.apply("quantile_huber", u, tau, kappa=kappa, **kw)


class Activations(dict):
    """Every leaf and intermediate tensor of one forward pass, keyed by name."""

    def __init__(self, graph: ComputeGraph, values: dict[str, Tensor]) -> None:
        super().__init__(values)
        self.graph = graph

    @property
    def output(self) -> Tensor:
        return self[self.graph.output]


LeafValues = Union[Mapping[str, Union[Tensor, ArrayLike]], Sequence[Union[Tensor, ArrayLike]]]


def _bind_leaves(graph: ComputeGraph, leaves: LeafValues) -> dict[str, Tensor]:
    if isinstance(leaves, Mapping):
        named = dict(leaves)
    else:
        if len(leaves) != len(graph.leaves):
            raise GraphError(f"expected {len(graph.leaves)} leaves, got {len(leaves)}")
        named = dict(zip(graph.leaves, leaves))

    bound: dict[str, Tensor] = {}
    for name, spec in graph.leaves.items():
        if name not in named:
            raise GraphError(f"missing value for leaf '{name}'")
        value = named[name]
        tensor = value if isinstance(value, Tensor) else Tensor(np.asarray(value))
        if not spec.accepts(tensor.shape):
            raise GraphError(
                f"leaf '{name}' has shape {tensor.shape}, graph declares {spec.shape}"
            )
        bound[name] = Tensor(tensor.data)
    return bound


def forward(graph: ComputeGraph, leaves: LeafValues, check_finite: bool = True) -> Activations:
    """Evaluate every node of ``graph``.

    Args:
        graph: Graph to evaluate
        leaves: Leaf values by name, or in declaration order
        check_finite: Raise on any non-finite intermediate

    Returns:
        Activations holding all leaf, intermediate and output tensors

    Raises:
        GraphError: On missing leaves or a shape mismatch inside a primitive
        NonFiniteError: When a primitive produces NaN or Inf
    """
    values = _bind_leaves(graph, leaves)
    for position, node in enumerate(graph.nodes):
        prim = PRIMITIVES[node.op]
        args = [values[ref].data for ref in node.inputs]
        try:
            result = prim.forward(args, node.attrs)
        except (ValueError, IndexError) as e:
            raise GraphError(str(e), primitive=node.op, node=position) from e
        if check_finite and not np.isfinite(result).all():
            raise NonFiniteError(
                "non-finite value in forward pass", where=f"{node.op} @ node {position}"
            )
        values[node.output] = Tensor(result)
    return Activations(graph, values)


def _needs_grad(graph: ComputeGraph) -> set[str]:
    needs = {name for name, spec in graph.leaves.items() if spec.requires_grad}
    for node in graph.nodes:
        if any(ref in needs for ref in node.inputs):
            needs.add(node.output)
    return needs


def backward(
    graph: ComputeGraph,
    activations: Optional[Activations],
    seed_grad: Optional[Union[Tensor, ArrayLike]] = None,
    check_finite: bool = True,
) -> dict[str, np.ndarray]:
    """Propagate ``seed_grad`` from the graph output back to its leaves.

    Args:
        graph: Graph that produced ``activations``
        activations: Result of :func:`forward` on the same graph
        seed_grad: Gradient of the final output; defaults to ones
        check_finite: Raise on any non-finite gradient

    Returns:
        Gradient for every leaf that requires one (also stored in its grad slot)

    Raises:
        GraphError: If called before forward or with a mis-shaped seed
        NonFiniteError: When a gradient becomes NaN or Inf
    """
    if activations is None or getattr(activations, "graph", None) is not graph:
        raise GraphError("backward called before forward on this graph")
    output = activations.output
    if seed_grad is None:
        seed = np.ones_like(output.data)
    else:
        seed = seed_grad.data if isinstance(seed_grad, Tensor) else np.asarray(seed_grad, dtype=np.float64)
        if seed.shape != output.shape:
            raise GraphError(
                f"seed gradient shape {seed.shape} does not match output {output.shape}"
            )

    needs = _needs_grad(graph)
    grads: dict[str, np.ndarray] = {graph.output: seed}
    for position in range(len(graph.nodes) - 1, -1, -1):
        node = graph.nodes[position]
        grad = grads.pop(node.output, None)
        if grad is None or node.output not in needs:
            continue
        prim = PRIMITIVES[node.op]
        flags = tuple(ref in needs for ref in node.inputs)
        inputs = [activations[ref].data for ref in node.inputs]
        input_grads = prim.backward(grad, inputs, activations[node.output].data, node.attrs, flags)
        for ref, flag, g in zip(node.inputs, flags, input_grads):
            if not flag or g is None:
                continue
            if check_finite and not np.isfinite(g).all():
                raise NonFiniteError(
                    "non-finite value in backward pass", where=f"{node.op} @ node {position}"
                )
            grads[ref] = grads[ref] + g if ref in grads else g

    result: dict[str, np.ndarray] = {}
    for name in graph.trainable_leaves:
        grad = grads.get(name)
        if grad is None:
            grad = np.zeros_like(activations[name].data)
        activations[name].grad = grad
        result[name] = grad
    return result


def grad_check(
    graph: ComputeGraph,
    leaves: LeafValues,
    h: float = 1e-5,
    wrt: Optional[Sequence[str]] = None,
    max_elements: Optional[int] = None,
    seed: int = 0,
) -> float:
    """Compare analytic gradients with central finite differences.

    Args:
        graph: Scalar-output graph
        leaves: Leaf values
        h: Finite-difference step
        wrt: Leaves to check (defaults to every trainable leaf)
        max_elements: Check at most this many randomly chosen elements per leaf
        seed: Seed for choosing elements

    Returns:
        max |analytic - numeric| / max(1, |analytic|) over the checked elements

    Raises:
        GraphError: If the output is not a scalar
    """
    activations = forward(graph, leaves)
    if activations.output.size != 1:
        raise GraphError(
            f"grad_check needs a scalar output, got shape {activations.output.shape}"
        )
    analytic = backward(graph, activations)
    base = {name: activations[name].data.copy() for name in graph.leaves}
    rng = np.random.default_rng(seed)

    worst = 0.0
    for name in wrt if wrt is not None else graph.trainable_leaves:
        flat = base[name].reshape(-1)
        indices = np.arange(flat.size)
        if max_elements is not None and flat.size > max_elements:
            indices = rng.choice(flat.size, size=max_elements, replace=False)
        grad_flat = analytic[name].reshape(-1)
        for index in indices:
            original = flat[index]
            flat[index] = original + h
            plus = float(forward(graph, base).output.data.reshape(-1)[0])
            flat[index] = original - h
            minus = float(forward(graph, base).output.data.reshape(-1)[0])
            flat[index] = original
            numeric = (plus - minus) / (2.0 * h)
            a = float(grad_flat[index])
            worst = max(worst, abs(a - numeric) / max(1.0, abs(a)))
    return worst
