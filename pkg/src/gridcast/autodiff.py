"""Reverse-mode gradient tape over dense float64 arrays.

A Tape is a static graph: leaves are inputs (bound per forward call),
constants and parameters (persistent values updated by the optimizer).
Nodes are stored in creation order, which is a topological order, so
forward is a single sweep and backward a reverse sweep.

Broadcasting is restricted to scalar-with-array and row-broadcast
([1, m] against [n, m]). Dropout is an explicit multiply by a bound,
pre-scaled mask so checks can freeze it and training stays reproducible.

Elementwise activation math dispatches through :mod:`gridcast.kernels`.
"""
from __future__ import annotations

import numpy as np

from . import kernels
from .errors import ShapeError, StateError

_SCALAR = ()


def _as_value(x) -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    if a.ndim > 2:
        raise ShapeError(f"arrays above 2-D are not supported (got shape {a.shape})")
    return a


def _broadcast_ok(sa: tuple, sb: tuple) -> bool:
    if sa == sb or sa == _SCALAR or sb == _SCALAR:
        return True
    if len(sa) == 2 and len(sb) == 2 and sa[1] == sb[1]:
        return sa[0] == 1 or sb[0] == 1
    return False


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a broadcast gradient back to the operand's shape."""
    if grad.shape == shape:
        return grad
    if shape == _SCALAR:
        return np.asarray(grad.sum())
    # row-broadcast case: [1, m] operand seen as [n, m]
    return grad.sum(axis=0, keepdims=True)


class Node:
    __slots__ = ("id", "op", "inputs", "value", "grad", "name", "alpha", "axis", "span")

    def __init__(self, nid: int, op: str, inputs: tuple["Node", ...], name: str = ""):
        self.id = nid
        self.op = op
        self.inputs = inputs
        self.value: np.ndarray | None = None
        self.grad: np.ndarray | None = None
        self.name = name
        self.alpha = 0.0      # leaky_relu leak
        self.axis = 0         # slice / concat axis
        self.span = (0, 0)    # slice bounds

    def __repr__(self):
        shape = None if self.value is None else self.value.shape
        return f"Node(id={self.id}, op={self.op!r}, name={self.name!r}, shape={shape})"


class Tape:
    """Ordered node list with parameter and loss bookkeeping."""

    def __init__(self):
        self.nodes: list[Node] = []
        self.params: list[Node] = []
        self.loss: Node | None = None
        self._ran_forward = False

    # --- leaf constructors ---

    def input(self, name: str) -> Node:
        node = self._new("input", (), name=name)
        return node

    def const(self, value) -> Node:
        node = self._new("const", ())
        node.value = _as_value(value)
        return node

    def param(self, value, name: str = "") -> Node:
        node = self._new("param", (), name=name)
        node.value = _as_value(value).copy()
        self.params.append(node)
        return node

    # --- elementwise arithmetic ---

    def add(self, a: Node, b: Node) -> Node:
        return self._new("add", (a, b))

    def sub(self, a: Node, b: Node) -> Node:
        return self._new("sub", (a, b))

    def mul(self, a: Node, b: Node) -> Node:
        return self._new("mul", (a, b))

    def div(self, a: Node, b: Node) -> Node:
        return self._new("div", (a, b))

    def matmul(self, a: Node, b: Node) -> Node:
        return self._new("matmul", (a, b))

    # --- activations ---

    def sigmoid(self, x: Node) -> Node:
        return self._new("sigmoid", (x,))

    def tanh(self, x: Node) -> Node:
        return self._new("tanh", (x,))

    def softplus(self, x: Node) -> Node:
        return self._new("softplus", (x,))

    def leaky_relu(self, x: Node, alpha: float) -> Node:
        node = self._new("leaky_relu", (x,))
        node.alpha = float(alpha)
        return node

    def log(self, x: Node) -> Node:
        return self._new("log", (x,))

    def square(self, x: Node) -> Node:
        return self._new("square", (x,))

    # --- structure ---

    def slice(self, x: Node, start: int, stop: int, axis: int = 1) -> Node:
        node = self._new("slice", (x,))
        node.axis = int(axis)
        node.span = (int(start), int(stop))
        return node

    def concat(self, xs: list[Node], axis: int = 1) -> Node:
        if not xs:
            raise ShapeError("concat of zero nodes")
        node = self._new("concat", tuple(xs))
        node.axis = int(axis)
        return node

    def dropout(self, x: Node, mask: Node) -> Node:
        """Multiply by a mask already scaled by 1/(1-p) (inverted dropout)."""
        return self._new("dropout", (x, mask))

    # --- reductions ---

    def sum(self, x: Node) -> Node:
        return self._new("sum", (x,))

    def mean(self, x: Node) -> Node:
        return self._new("mean", (x,))

    def set_loss(self, node: Node):
        self.loss = node

    # --- execution ---

    def forward(self, bindings: dict[str, np.ndarray]) -> float:
        """Evaluate every node in topological order; returns the loss value."""
        for node in self.nodes:
            op = node.op
            if op == "input":
                if node.name not in bindings:
                    raise StateError(f"input {node.name!r} not bound")
                node.value = _as_value(bindings[node.name])
            elif op in ("const", "param"):
                pass
            else:
                node.value = self._compute(node)
        self._ran_forward = True
        if self.loss is None:
            raise StateError("tape has no loss node")
        if self.loss.value.shape != _SCALAR:
            raise ShapeError(f"loss node must be scalar, got shape {self.loss.value.shape}")
        return float(self.loss.value)

    def _compute(self, node: Node) -> np.ndarray:
        op = node.op
        ins = node.inputs
        if op in ("add", "sub", "mul", "div"):
            a, b = ins[0].value, ins[1].value
            if not _broadcast_ok(a.shape, b.shape):
                raise ShapeError(f"{op}: incompatible shapes {a.shape} and {b.shape}")
            if op == "add":
                return a + b
            if op == "sub":
                return a - b
            if op == "mul":
                return a * b
            return a / b
        if op == "matmul":
            a, b = ins[0].value, ins[1].value
            if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
                raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
            return a @ b
        if op == "sigmoid":
            return kernels.sigmoid(ins[0].value)
        if op == "tanh":
            return kernels.tanh(ins[0].value)
        if op == "softplus":
            return kernels.softplus(ins[0].value)
        if op == "leaky_relu":
            return kernels.leaky_relu(ins[0].value, node.alpha)
        if op == "log":
            return np.log(ins[0].value)
        if op == "square":
            return np.square(ins[0].value)
        if op == "slice":
            x = ins[0].value
            start, stop = node.span
            if node.axis == 0:
                return x[start:stop]
            return x[:, start:stop]
        if op == "concat":
            return np.concatenate([n.value for n in ins], axis=node.axis)
        if op == "dropout":
            x, mask = ins[0].value, ins[1].value
            if x.shape != mask.shape:
                raise ShapeError(f"dropout: mask shape {mask.shape} != value shape {x.shape}")
            return x * mask
        if op == "sum":
            return np.asarray(ins[0].value.sum())
        if op == "mean":
            return np.asarray(ins[0].value.mean())
        raise StateError(f"unknown op {op!r}")

    def backward(self) -> None:
        """Populate node.grad for every node via reverse-order chain rule."""
        if not self._ran_forward:
            raise StateError("backward before forward")
        for node in self.nodes:
            node.grad = np.zeros_like(node.value)
        self.loss.grad = np.ones_like(self.loss.value)
        for node in reversed(self.nodes):
            if node.op in ("input", "const", "param"):
                continue
            self._accumulate(node)

    def _accumulate(self, node: Node) -> None:
        op = node.op
        g = node.grad
        ins = node.inputs
        if op == "add":
            a, b = ins
            a.grad += _unbroadcast(g, a.value.shape)
            b.grad += _unbroadcast(g, b.value.shape)
        elif op == "sub":
            a, b = ins
            a.grad += _unbroadcast(g, a.value.shape)
            b.grad -= _unbroadcast(g, b.value.shape)
        elif op == "mul":
            a, b = ins
            a.grad += _unbroadcast(g * b.value, a.value.shape)
            b.grad += _unbroadcast(g * a.value, b.value.shape)
        elif op == "div":
            a, b = ins
            a.grad += _unbroadcast(g / b.value, a.value.shape)
            b.grad -= _unbroadcast(g * node.value / b.value, b.value.shape)
        elif op == "matmul":
            a, b = ins
            a.grad += g @ b.value.T
            b.grad += a.value.T @ g
        elif op == "sigmoid":
            ins[0].grad += kernels.sigmoid_grad(node.value, g)
        elif op == "tanh":
            ins[0].grad += kernels.tanh_grad(node.value, g)
        elif op == "softplus":
            ins[0].grad += kernels.softplus_grad(ins[0].value, g)
        elif op == "leaky_relu":
            ins[0].grad += kernels.leaky_relu_grad(ins[0].value, g, node.alpha)
        elif op == "log":
            ins[0].grad += g / ins[0].value
        elif op == "square":
            ins[0].grad += 2.0 * ins[0].value * g
        elif op == "slice":
            start, stop = node.span
            if node.axis == 0:
                ins[0].grad[start:stop] += g
            else:
                ins[0].grad[:, start:stop] += g
        elif op == "concat":
            offset = 0
            for child in ins:
                width = child.value.shape[node.axis]
                if node.axis == 0:
                    child.grad += g[offset:offset + width]
                else:
                    child.grad += g[:, offset:offset + width]
                offset += width
        elif op == "dropout":
            x, mask = ins
            x.grad += g * mask.value
            mask.grad += g * x.value
        elif op == "sum":
            ins[0].grad += g  # scalar broadcast
        elif op == "mean":
            ins[0].grad += g / ins[0].value.size
        else:
            raise StateError(f"unknown op {op!r}")

    def param_grads(self) -> list[np.ndarray]:
        return [p.grad for p in self.params]

    def _new(self, op: str, inputs: tuple, name: str = "") -> Node:
        node = Node(len(self.nodes), op, inputs, name=name)
        self.nodes.append(node)
        return node


def finite_diff_check(
    tape: Tape,
    bindings: dict[str, np.ndarray],
    h: float = 1e-5,
    sample: int | None = None,
    rng: np.random.Generator | None = None,
) -> float:
    """Max error between backward grads and central finite differences.

    Checks every parameter component, or a random ``sample`` of components
    when the tape is large. Relative error is reported except where both
    magnitudes fall below 1e-6, where it switches to absolute error.
    Dropout masks live in ``bindings`` and therefore stay frozen.
    """
    if not (1e-7 <= h <= 1e-3):
        raise ShapeError(f"h={h} outside [1e-7, 1e-3]")
    tape.forward(bindings)
    tape.backward()
    analytic = [p.grad.copy() for p in tape.params]

    coords = []
    for pi, p in enumerate(tape.params):
        for flat in range(p.value.size):
            coords.append((pi, flat))
    if sample is not None and sample < len(coords):
        rng = rng or np.random.default_rng(0)
        picked = rng.choice(len(coords), size=sample, replace=False)
        coords = [coords[i] for i in picked]

    worst = 0.0
    for pi, flat in coords:
        p = tape.params[pi]
        orig = p.value.flat[flat]
        p.value.flat[flat] = orig + h
        up = tape.forward(bindings)
        p.value.flat[flat] = orig - h
        down = tape.forward(bindings)
        p.value.flat[flat] = orig
        fd = (up - down) / (2.0 * h)
        an = analytic[pi].flat[flat]
        scale = max(abs(fd), abs(an))
        if scale < 1e-6:
            err = abs(fd - an)
        else:
            err = abs(fd - an) / scale
        worst = max(worst, err)
    tape.forward(bindings)  # restore values to the unperturbed state
    return worst
