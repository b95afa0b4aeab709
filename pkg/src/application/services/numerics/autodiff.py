"""Tape-based reverse-mode automatic differentiation over dense float64 arrays.

A ``Tape`` is activated with ``with Tape() as tape:``. While it is active, every
primitive whose inputs include a grad-enabled tensor is appended to the tape
together with its local backward rule. Tensors built from constants only are
never recorded, which is how "no backprop" quantities (the accumulator ``c``,
frozen base features) are expressed: wrap the values in a plain ``Tensor``.

Outside an active tape the same primitives simply evaluate, so one forward
function serves both training (recorded) and inference (pure numpy).

    with Tape() as tape:
        x = Tensor.parameter([3.0], "x")
        loss = dot(x, x)
    backward(tape, loss)["x"]   # -> [6.0]
"""

from contextvars import ContextVar
from dataclasses import dataclass
from typing import Callable

import numpy as np

from src.application.common.errors import GradientError, NumericalError, ShapeError
from src.application.services.app_config_service import app_config

LOG_FLOOR = 1e-12

_active_tape: ContextVar["Tape | None"] = ContextVar("active_tape", default=None)

BackwardRule = Callable[[np.ndarray], tuple[np.ndarray | None, ...]]


class Tensor:
    """Immutable dense array. Leaves that take gradients carry a unique name."""

    __slots__ = ("values", "grad_enabled", "name", "node", "_tape")

    def __init__(self, values, grad_enabled: bool = False, name: str | None = None):
        arr = np.array(values, dtype=np.float64)
        arr.flags.writeable = False
        self.values = arr
        self.grad_enabled = grad_enabled
        self.name = name
        self.node: int | None = None
        self._tape: Tape | None = None

    @classmethod
    def parameter(cls, values, name: str) -> "Tensor":
        if not name:
            raise GradientError("grad-enabled leaves need a name")
        return cls(values, grad_enabled=True, name=name)

    @classmethod
    def _from_op(cls, values: np.ndarray, grad_enabled: bool) -> "Tensor":
        out = cls.__new__(cls)
        values = np.asarray(values, dtype=np.float64)
        if values.base is not None or not values.flags.owndata:
            values = values.copy()
        values.flags.writeable = False
        out.values = values
        out.grad_enabled = grad_enabled
        out.name = None
        out.node = None
        out._tape = None
        return out

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def size(self) -> int:
        return self.values.size

    def item(self) -> float:
        return float(self.values.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.values

    def detach(self) -> "Tensor":
        return Tensor(self.values)

    def __repr__(self) -> str:
        label = f" name={self.name}" if self.name else ""
        return f"Tensor(shape={self.shape}{label}, grad={self.grad_enabled})"

    def __add__(self, other): return add(self, _as_tensor(other))
    def __radd__(self, other): return add(_as_tensor(other), self)
    def __sub__(self, other): return sub(self, _as_tensor(other))
    def __rsub__(self, other): return sub(_as_tensor(other), self)
    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, float(other))
        return mul(self, _as_tensor(other))
    def __rmul__(self, other): return self.__mul__(other)
    def __truediv__(self, other): return divide(self, _as_tensor(other))
    def __matmul__(self, other): return matmul(self, other)
    def __neg__(self): return negate(self)


def _as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


@dataclass
class TapeNode:
    primitive: str
    inputs: tuple[Tensor, ...]
    output: Tensor
    backward: BackwardRule


class Tape:
    """Ordered record of primitive applications. Single-writer."""

    def __init__(self, check_finite: bool | None = None):
        self.nodes: list[TapeNode] = []
        self.check_finite = app_config.is_debug() if check_finite is None else check_finite
        self._token = None

    def __enter__(self) -> "Tape":
        self._token = _active_tape.set(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        _active_tape.reset(self._token)
        self._token = None

    def __len__(self) -> int:
        return len(self.nodes)

    def record(self, primitive: str, *inputs: Tensor, **attrs) -> Tensor:
        return _apply(self, primitive, inputs, attrs)


def active_tape() -> Tape | None:
    return _active_tape.get()


def record(primitive: str, *inputs: Tensor, **attrs) -> Tensor:
    """Apply ``primitive`` and append it to the active tape (if any)."""
    return _apply(_active_tape.get(), primitive, inputs, attrs)


def _apply(tape: Tape | None, primitive: str, inputs: tuple[Tensor, ...], attrs: dict) -> Tensor:
    rule = PRIMITIVES.get(primitive)
    if rule is None:
        raise GradientError(f"Unknown primitive '{primitive}'")
    arrays = [t.values for t in inputs]
    values, back = rule(*arrays, **attrs)

    tracked = tape is not None and any(t.grad_enabled for t in inputs)
    out = Tensor._from_op(values, grad_enabled=tracked)
    if not tracked:
        return out

    if tape.check_finite and not np.all(np.isfinite(out.values)):
        raise NumericalError(f"{primitive} produced non-finite values")
    for t in inputs:
        if t.node is not None and t._tape is not tape:
            raise GradientError(f"{primitive}: input was recorded on a different tape")
    out.node = len(tape.nodes)
    out._tape = tape
    tape.nodes.append(TapeNode(primitive, tuple(inputs), out, back))
    return out


def backward(tape: Tape, loss: Tensor) -> dict[str, Tensor]:
    """Gradient of a scalar ``loss`` w.r.t. every grad-enabled leaf on ``tape``.

    Leaves that were recorded but received no gradient map to zeros.
    """
    if loss.size != 1:
        raise GradientError(f"loss must be scalar, got shape {loss.shape}")
    if loss.node is None or loss._tape is not tape:
        raise GradientError("loss was not produced on this tape")

    leaf_grads: dict[str, np.ndarray] = {}
    for node in tape.nodes:
        for t in node.inputs:
            if t.node is None and t.grad_enabled and t.name not in leaf_grads:
                leaf_grads[t.name] = np.zeros(t.shape)

    adjoints: dict[int, np.ndarray] = {loss.node: np.ones(loss.shape)}
    for index in range(loss.node, -1, -1):
        g = adjoints.pop(index, None)
        if g is None:
            continue
        node = tape.nodes[index]
        for t, gi in zip(node.inputs, node.backward(g)):
            if gi is None or not t.grad_enabled:
                continue
            if t.node is not None:
                prev = adjoints.get(t.node)
                adjoints[t.node] = gi if prev is None else prev + gi
            else:
                leaf_grads[t.name] = leaf_grads[t.name] + gi

    return {name: Tensor(g, name=name) for name, g in leaf_grads.items()}


# --- primitive rules -------------------------------------------------------
# Each rule takes input arrays (+ attributes) and returns the forward value and
# a closure mapping the output adjoint to one adjoint per input.

def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


def _broadcast_check(primitive: str, a: np.ndarray, b: np.ndarray):
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(primitive, a.shape, b.shape, detail="not broadcastable") from None


def _matmul(a, b):
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError("matmul", a.shape, b.shape, detail="expects (m,k) @ (k,n)")
    return a @ b, lambda g: (g @ b.T, a.T @ g)


def _add(a, b):
    _broadcast_check("add", a, b)
    return a + b, lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape))


def _sub(a, b):
    _broadcast_check("sub", a, b)
    return a - b, lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape))


def _mul(a, b):
    _broadcast_check("mul", a, b)
    return a * b, lambda g: (_unbroadcast(g * b, a.shape), _unbroadcast(g * a, b.shape))


def _divide(a, b):
    _broadcast_check("divide", a, b)
    out = a / b
    return out, lambda g: (_unbroadcast(g / b, a.shape), _unbroadcast(-g * out / b, b.shape))


def _scale(a, factor: float):
    return a * factor, lambda g: (g * factor,)


def _negate(a):
    return -a, lambda g: (-g,)


def _relu(a):
    active = a > 0
    return np.where(active, a, 0.0), lambda g: (g * active,)


def _prelu(a, slope):
    if slope.size != 1:
        raise ShapeError("prelu", a.shape, slope.shape, detail="slope must hold one value")
    s = slope.reshape(-1)[0]
    active = a > 0
    out = np.where(active, a, s * a)

    def back(g):
        return g * np.where(active, 1.0, s), np.sum(g * np.where(active, 0.0, a)).reshape(slope.shape)
    return out, back


def _l2norm(a, axis: int = -1):
    out = np.sqrt(np.sum(a * a, axis=axis, keepdims=True))

    def back(g):
        safe = np.where(out > 0, out, 1.0)
        return (np.where(out > 0, g * a / safe, 0.0),)
    return out, back


def _dot(a, b):
    if a.shape != b.shape:
        raise ShapeError("dot", a.shape, b.shape, detail="operands must have equal shapes")
    out = np.sum(a * b, axis=-1, keepdims=a.ndim > 1)
    return out, lambda g: (g * b, g * a)


def _log(a, floor: float = LOG_FLOOR):
    clamped = np.maximum(a, floor)
    return np.log(clamped), lambda g: (np.where(a > floor, g / clamped, 0.0),)


def _sum(a, axis: int | None = None, keepdims: bool = False):
    out = np.sum(a, axis=axis, keepdims=keepdims)

    def back(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)
    return out, back


def _exp(a):
    out = np.exp(a)
    return out, lambda g: (g * out,)


def _sqrt(a):
    if np.any(a < 0):
        raise NumericalError("sqrt of a negative argument")
    out = np.sqrt(a)

    def back(g):
        safe = np.where(out > 0, out, 1.0)
        return (np.where(out > 0, g / (2.0 * safe), 0.0),)
    return out, back


def _cos(a):
    return np.cos(a), lambda g: (-g * np.sin(a),)


def _sin(a):
    return np.sin(a), lambda g: (g * np.cos(a),)


def _transpose(a):
    if a.ndim != 2:
        raise ShapeError("transpose", a.shape, detail="expects a matrix")
    return a.T, lambda g: (g.T,)


def _concat(*arrays, axis: int = 0):
    if not arrays:
        raise ShapeError("concat", detail="no inputs")
    ref = arrays[0]
    for arr in arrays[1:]:
        if arr.ndim != ref.ndim or any(
            s != r for i, (s, r) in enumerate(zip(arr.shape, ref.shape)) if i != axis % ref.ndim
        ):
            raise ShapeError("concat", *(x.shape for x in arrays), detail=f"mismatch off axis {axis}")
    sizes = [arr.shape[axis] for arr in arrays]
    splits = np.cumsum(sizes)[:-1]
    return np.concatenate(arrays, axis=axis), lambda g: tuple(np.split(g, splits, axis=axis))


def _gather(a, indices):
    idx = np.asarray(indices, dtype=np.intp)
    if idx.size and (idx.min() < -a.shape[0] or idx.max() >= a.shape[0]):
        raise ShapeError("gather", a.shape, idx.shape, detail="index out of range")

    def back(g):
        out = np.zeros_like(a)
        np.add.at(out, idx, g)
        return (out,)
    return a[idx], back


PRIMITIVES: dict[str, Callable] = {
    "matmul": _matmul,
    "add": _add,
    "sub": _sub,
    "scale": _scale,
    "mul": _mul,
    "relu": _relu,
    "prelu": _prelu,
    "l2norm": _l2norm,
    "dot": _dot,
    "log": _log,
    "divide": _divide,
    "sum": _sum,
    "exp": _exp,
    "negate": _negate,
    "concat": _concat,
    "sqrt": _sqrt,
    "cos": _cos,
    "sin": _sin,
    "transpose": _transpose,
    "gather": _gather,
}


def matmul(a: Tensor, b: Tensor) -> Tensor: return record("matmul", a, b)
def add(a: Tensor, b: Tensor) -> Tensor: return record("add", a, b)
def sub(a: Tensor, b: Tensor) -> Tensor: return record("sub", a, b)
def mul(a: Tensor, b: Tensor) -> Tensor: return record("mul", a, b)
def divide(a: Tensor, b: Tensor) -> Tensor: return record("divide", a, b)
def scale(a: Tensor, factor: float) -> Tensor: return record("scale", a, factor=factor)
def negate(a: Tensor) -> Tensor: return record("negate", a)
def relu(a: Tensor) -> Tensor: return record("relu", a)
def prelu(a: Tensor, slope: Tensor) -> Tensor: return record("prelu", a, slope)
def l2norm(a: Tensor, axis: int = -1) -> Tensor: return record("l2norm", a, axis=axis)
def dot(a: Tensor, b: Tensor) -> Tensor: return record("dot", a, b)
def log(a: Tensor, floor: float = LOG_FLOOR) -> Tensor: return record("log", a, floor=floor)
def exp(a: Tensor) -> Tensor: return record("exp", a)
def sqrt(a: Tensor) -> Tensor: return record("sqrt", a)
def cos(a: Tensor) -> Tensor: return record("cos", a)
def sin(a: Tensor) -> Tensor: return record("sin", a)
def transpose(a: Tensor) -> Tensor: return record("transpose", a)
def concat(tensors: list[Tensor], axis: int = 0) -> Tensor: return record("concat", *tensors, axis=axis)
def gather(a: Tensor, indices) -> Tensor: return record("gather", a, indices=indices)


def tensor_sum(a: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:
    return record("sum", a, axis=axis, keepdims=keepdims)
