"""
Reverse-mode automatic differentiation over scalars, vectors and matrices.

Values are numpy float64 arrays (shape () for scalars, (n,) for vectors,
(m, n) for weight matrices). Trainable parameters are `ParamTensor`s whose
values are stored as float32 and promoted to float64 for computation.

Typical usage:
    store = ParamStore()
    w = store.create("w", rng.normal(size=(2, 3)))
    with no_grad(): ...             # evaluation only, no graph recorded
    loss = bce(sigmoid(index(matvec(w.node(), constant(x)), 0)), 1.0)
    backward(loss)                  # w.grad now holds dloss/dw

Subgradients of min/max go entirely to the first argument attaining the
extremum; a node that saw such a tie is marked with `tie=True`.
"""

import contextlib
import logging
import threading
from dataclasses import dataclass, field

import numpy as np

from .exceptions import NonScalarRoot, ShapeMismatch

logger = logging.getLogger(__name__)

BCE_EPS = 1e-7

_state = threading.local()


def grad_enabled():
    return getattr(_state, "enabled", True)


@contextlib.contextmanager
def no_grad():
    """Evaluate without recording a graph (thread-local)."""
    previous = grad_enabled()
    _state.enabled = False
    try:
        yield
    finally:
        _state.enabled = previous


# ------------------------------------------------------------------------------
# NODES AND PARAMETERS
# ------------------------------------------------------------------------------

class DiffNode:
    """
    One value in the computation graph.

    Attributes:
        value (np.ndarray): float64 forward value.
        grad (np.ndarray | None): Accumulated d(root)/d(node) after backward.
        parents (list[tuple[DiffNode, callable]]): Inputs and the closures
            mapping this node's gradient to each input's contribution.
        requires_grad (bool): Whether gradients flow into this node.
        tie (bool): A min/max in this node had several extremal arguments.
        param (ParamTensor | None): Set on parameter leaves.
    """

    __slots__ = ("value", "grad", "parents", "requires_grad", "tie", "param")

    def __init__(self, value, parents=(), requires_grad=False, tie=False, param=None):
        self.value = value
        self.grad = None
        self.parents = list(parents)
        self.requires_grad = requires_grad
        self.tie = tie
        self.param = param

    def __repr__(self):
        return f"DiffNode({self.value!r}{', grad' if self.requires_grad else ''})"

    @property
    def shape(self):
        return self.value.shape

    @property
    def is_scalar(self):
        return self.value.ndim == 0

    def item(self):
        return float(self.value.reshape(-1)[0])

    def numpy(self):
        return np.array(self.value, dtype=np.float64)

    def __add__(self, other):
        return add(self, as_node(other))

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, as_node(other))

    def __rsub__(self, other):
        return sub(as_node(other), self)

    def __mul__(self, other):
        return mul(self, as_node(other))

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)


class ParamTensor:
    """Named trainable tensor: float32 values plus a float64 gradient accumulator."""

    def __init__(self, name, values):
        self.name = name
        self.values = np.array(values, dtype=np.float32)
        self.shape = self.values.shape
        self.grad = np.zeros(self.shape, dtype=np.float64)

    def __repr__(self):
        return f"ParamTensor({self.name!r}, shape={self.shape})"

    def node(self):
        """A fresh leaf reading the current values."""
        return DiffNode(
            np.array(self.values, dtype=np.float64),
            requires_grad=grad_enabled(),
            param=self,
        )

    def zero_grad(self):
        self.grad[...] = 0.0

    def assign(self, values):
        values = np.asarray(values)
        if values.shape != self.shape:
            raise ShapeMismatch(f"{self.name}: expected shape {self.shape}, got {values.shape}")
        self.values = values.astype(self.values.dtype)


class ParamStore:
    """Ordered collection of uniquely named ParamTensors."""

    def __init__(self):
        self.tensors = {}

    def __iter__(self):
        return iter(self.tensors.values())

    def __len__(self):
        return len(self.tensors)

    def __contains__(self, name):
        return name in self.tensors

    def __getitem__(self, name):
        return self.tensors[name]

    def names(self):
        return list(self.tensors)

    def create(self, name, values):
        if name in self.tensors:
            raise ValueError(f"parameter {name!r} already exists")
        tensor = ParamTensor(name, values)
        self.tensors[name] = tensor
        return tensor

    def get_or_create(self, name, factory):
        if name not in self.tensors:
            self.tensors[name] = ParamTensor(name, factory())
        return self.tensors[name]

    def zero_grad(self):
        for t in self.tensors.values():
            t.zero_grad()

    def grad_norm(self):
        return float(np.sqrt(sum(float(np.sum(t.grad * t.grad)) for t in self.tensors.values())))


# ------------------------------------------------------------------------------
# OPERATIONS
# ------------------------------------------------------------------------------

def constant(value):
    return DiffNode(np.array(value, dtype=np.float64))


def as_node(x):
    return x if isinstance(x, DiffNode) else constant(x)


def _make(value, parents, tie=False):
    value = np.asarray(value, dtype=np.float64)
    if grad_enabled():
        live = [(n, fn) for n, fn in parents if n.requires_grad]
        if live:
            return DiffNode(value, live, requires_grad=True, tie=tie)
    return DiffNode(value, tie=tie)


def _same_shape(kind, nodes):
    shape = nodes[0].shape
    for n in nodes[1:]:
        if n.shape != shape:
            raise ShapeMismatch(f"{kind}: shapes {shape} and {n.shape} differ")
    return shape


def add(*xs):
    if not xs:
        raise ShapeMismatch("add: no inputs")
    if len(xs) == 1:
        return xs[0]
    _same_shape("add", xs)
    value = xs[0].value.copy()
    for x in xs[1:]:
        value = value + x.value
    return _make(value, [(x, lambda g: g) for x in xs])


def sub(a, b):
    _same_shape("sub", (a, b))
    return _make(a.value - b.value, [(a, lambda g: g), (b, lambda g: -g)])


def scale(a, c):
    c = float(c)
    return _make(a.value * c, [(a, lambda g: g * c)])


def mul(a, b):
    """Elementwise product; either side may be a scalar."""
    if a.shape == b.shape:
        return _make(a.value * b.value, [(a, lambda g: g * b.value), (b, lambda g: g * a.value)])
    if a.is_scalar:
        return _make(a.value * b.value, [(a, lambda g: np.sum(g * b.value)), (b, lambda g: g * a.value)])
    if b.is_scalar:
        return _make(a.value * b.value, [(a, lambda g: g * b.value), (b, lambda g: np.sum(g * a.value))])
    raise ShapeMismatch(f"mul: shapes {a.shape} and {b.shape} differ")


def matvec(w, x):
    if w.value.ndim != 2 or x.value.ndim != 1 or w.shape[1] != x.shape[0]:
        raise ShapeMismatch(f"matvec: cannot multiply {w.shape} by {x.shape}")
    return _make(w.value @ x.value, [(w, lambda g: np.outer(g, x.value)), (x, lambda g: w.value.T @ g)])


def concat(*xs):
    """Concatenate scalars and vectors into one vector."""
    if not xs:
        return constant(np.zeros(0))
    for x in xs:
        if x.value.ndim > 1:
            raise ShapeMismatch(f"concat: cannot concatenate shape {x.shape}")
    sizes = [int(x.value.size) for x in xs]
    value = np.concatenate([np.atleast_1d(x.value) for x in xs])
    parents = []
    offset = 0
    for x, n in zip(xs, sizes):
        lo, hi, shape = offset, offset + n, x.shape
        parents.append((x, lambda g, lo=lo, hi=hi, shape=shape: g[lo:hi].reshape(shape)))
        offset = hi
    return _make(value, parents)


def index(x, i):
    """Element `i` of a vector, as a scalar."""
    if x.value.ndim != 1 or not 0 <= i < x.shape[0]:
        raise ShapeMismatch(f"index: cannot take element {i} of shape {x.shape}")
    n = x.shape[0]

    def back(g):
        out = np.zeros(n)
        out[i] = g
        return out

    return _make(np.array(x.value[i]), [(x, back)])


def relu(x):
    mask = x.value > 0
    return _make(np.where(mask, x.value, 0.0), [(x, lambda g: g * mask)])


def tanh(x):
    y = np.tanh(x.value)
    return _make(y, [(x, lambda g: g * (1.0 - y * y))])


def sigmoid(x):
    y = 1.0 / (1.0 + np.exp(-np.clip(x.value, -500.0, 500.0)))
    return _make(y, [(x, lambda g: g * y * (1.0 - y))])


def _extremum(kind, xs, pick):
    if not xs:
        raise ShapeMismatch(f"{kind}: no inputs")
    if len(xs) == 1:
        return xs[0]
    shape = _same_shape(kind, xs)
    stacked = np.stack([x.value for x in xs])
    winner = pick(stacked, axis=0)  # first index attaining the extremum
    best = np.take_along_axis(stacked, np.expand_dims(winner, 0), 0)[0]
    tie = bool(np.any(np.sum(stacked == best, axis=0) > 1))
    parents = []
    for i, x in enumerate(xs):
        mask = (winner == i).reshape(shape)
        parents.append((x, lambda g, mask=mask: g * mask))
    return _make(np.asarray(best, dtype=np.float64).reshape(shape), parents, tie=tie)


def minimum(*xs):
    """Elementwise min (Goedel conjunction)."""
    return _extremum("min", xs, np.argmin)


def maximum(*xs):
    """Elementwise max (Goedel disjunction)."""
    return _extremum("max", xs, np.argmax)


def one_minus(x):
    return _make(1.0 - x.value, [(x, lambda g: -g)])


def total(x):
    """Sum of all elements, as a scalar."""
    shape = x.shape
    return _make(np.array(np.sum(x.value)), [(x, lambda g: np.full(shape, g))])


def mean(x):
    shape = x.shape
    n = max(int(x.value.size), 1)
    return _make(np.array(np.sum(x.value) / n), [(x, lambda g: np.full(shape, g / n))])


def bce(prediction, target):
    """
    Binary cross-entropy, averaged over elements.

    Predictions are clamped to [1e-7, 1 - 1e-7] before the log.
    """
    t = target.value if isinstance(target, DiffNode) else np.asarray(target, dtype=np.float64)
    if np.shape(t) != prediction.shape:
        raise ShapeMismatch(f"bce: prediction {prediction.shape}, target {np.shape(t)}")
    p = np.clip(prediction.value, BCE_EPS, 1.0 - BCE_EPS)
    n = max(int(p.size), 1)
    loss = -np.sum(t * np.log(p) + (1.0 - t) * np.log(1.0 - p)) / n
    return _make(np.array(loss), [(prediction, lambda g: g * (p - t) / (p * (1.0 - p)) / n)])


def l1(prediction, target):
    """Sum of absolute differences; the gradient at an exact match is 0."""
    if not isinstance(target, DiffNode):
        target = constant(target)
    _same_shape("l1", (prediction, target))
    d = prediction.value - target.value
    s = np.sign(d)
    return _make(np.array(np.sum(np.abs(d))), [(prediction, lambda g: g * s), (target, lambda g: -g * s)])


# ------------------------------------------------------------------------------
# BACKWARD
# ------------------------------------------------------------------------------

def _topological(root):
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent, _ in node.parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


def graph_has_tie(root):
    return any(n.tie for n in _topological(root))


def backward(root):
    """
    Accumulate d(root)/d(node) into every reachable node requiring grad.

    Parameter leaves also add their gradient to `ParamTensor.grad`. The graph
    is released afterwards.

    Raises:
        NonScalarRoot: `root` holds more than one number.
    """
    if root.value.size != 1:
        raise NonScalarRoot(f"backward needs a scalar root, got shape {root.shape}")
    if not root.requires_grad:
        return
    order = _topological(root)
    pending = {id(root): np.ones_like(root.value)}
    for node in reversed(order):
        g = pending.pop(id(node), None)
        if g is None:
            continue
        node.grad = g if node.grad is None else node.grad + g
        if node.param is not None:
            node.param.grad += g
        for parent, fn in node.parents:
            contribution = np.asarray(fn(g), dtype=np.float64).reshape(parent.shape)
            key = id(parent)
            pending[key] = contribution if key not in pending else pending[key] + contribution
    for node in order:
        node.parents = []


# ------------------------------------------------------------------------------
# GRADIENT CHECK
# ------------------------------------------------------------------------------

@dataclass
class GradCheckReport:
    """
    Result of `grad_check`.

    Attributes:
        errors (dict[str, float]): Max relative error per parameter.
        at_nondifferentiable_point (bool): The graph contained a min/max tie;
            such checks never count as failures.
        tol (float): Threshold used.
    """

    errors: dict = field(default_factory=dict)
    at_nondifferentiable_point: bool = False
    tol: float = 1e-4

    @property
    def max_error(self):
        return max(self.errors.values(), default=0.0)

    @property
    def failures(self):
        if self.at_nondifferentiable_point:
            return []
        return sorted(n for n, e in self.errors.items() if e > self.tol)

    @property
    def passed(self):
        return not self.failures


def grad_check(f, params, eps=1e-4, tol=1e-4):
    """
    Compare analytic gradients with central finite differences.

    Args:
        f (callable): Builds and returns a scalar DiffNode from `params`.
        params (ParamStore | iterable[ParamTensor]): Parameters to check.
        eps (float): Finite-difference step.
        tol (float): Max allowed relative error.

    Returns:
        GradCheckReport
    """
    tensors = list(params)
    saved = [t.values for t in tensors]
    try:
        for t in tensors:
            t.values = np.array(t.values, dtype=np.float64)
            t.zero_grad()
        root = f()
        tie = graph_has_tie(root)
        backward(root)
        report = GradCheckReport(at_nondifferentiable_point=tie, tol=tol)
        for t in tensors:
            analytic = t.grad.copy()
            numeric = np.zeros_like(analytic)
            flat = t.values.reshape(-1)
            for i in range(flat.size):
                original = flat[i]
                with no_grad():
                    flat[i] = original + eps
                    plus = f().item()
                    flat[i] = original - eps
                    minus = f().item()
                flat[i] = original
                numeric.reshape(-1)[i] = (plus - minus) / (2.0 * eps)
            denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-3)
            report.errors[t.name] = float(np.max(np.abs(analytic - numeric) / denom)) if analytic.size else 0.0
        if tie:
            logger.debug("grad_check hit a min/max tie; results flagged")
        return report
    finally:
        for t, v in zip(tensors, saved):
            t.values = v
            t.zero_grad()
