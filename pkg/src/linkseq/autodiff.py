"""Reverse-mode automatic differentiation over dense float64 arrays.

The primitive set is deliberately small: exactly what the joint
sequence + clustering objective needs (LSTM cell arithmetic, embedding
lookups, squared distances, softmax cross-entropy) plus an Adam
optimizer over a named parameter store.  Graphs are dynamic: every
training step builds a fresh tape and throws it away after backward().
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Tensor",
    "ShapeError",
    "constant",
    "matmul",
    "add",
    "mul_elementwise",
    "sigmoid",
    "tanh",
    "concat",
    "embedding_lookup",
    "squared_distance",
    "softmax_cross_entropy",
    "scalar_scale",
    "reduce_sum",
    "backward",
    "ParameterStore",
]


class ShapeError(ValueError):
    """Raised when an operation is applied to incompatible shapes."""


class Tensor:
    """A dense float64 array plus an optional backward-graph record.

    ``grad`` is lazily allocated by backward() and accumulates across
    backward passes until explicitly cleared (see ParameterStore.zero_grads).
    """

    __slots__ = ("values", "grad", "_parents", "_vjp")

    def __init__(self, values, _parents=(), _vjp=None):
        self.values = np.asarray(values, dtype=np.float64)
        self.grad = None
        self._parents = _parents
        self._vjp = _vjp

    @property
    def shape(self):
        return self.values.shape

    def item(self):
        return float(self.values)

    def __repr__(self):
        return f"Tensor(shape={self.values.shape})"


def constant(values):
    """Wrap an array as a leaf tensor with no parents."""
    return Tensor(values)


def _require(cond, op, *shapes):
    if not cond:
        raise ShapeError(f"{op}: incompatible shapes {' and '.join(repr(s) for s in shapes)}")


def matmul(a, b):
    """Matrix product for (n,k)@(k,m), (k,)@(k,m) and (n,k)@(k,) operands."""
    av, bv = a.values, b.values
    ok = (
        av.ndim in (1, 2)
        and bv.ndim in (1, 2)
        and not (av.ndim == 1 and bv.ndim == 1)
        and av.shape[-1] == bv.shape[0]
    )
    _require(ok, "matmul", av.shape, bv.shape)
    out = Tensor(av @ bv, (a, b))

    def vjp(g):
        if av.ndim == 1:  # (k,) @ (k,m) -> (m,)
            return bv @ g, np.outer(av, g)
        if bv.ndim == 1:  # (n,k) @ (k,) -> (n,)
            return np.outer(g, bv), av.T @ g
        return g @ bv.T, av.T @ g

    out._vjp = vjp
    return out


def add(a, b):
    _require(a.values.shape == b.values.shape, "add", a.shape, b.shape)
    out = Tensor(a.values + b.values, (a, b))
    out._vjp = lambda g: (g, g)
    return out


def mul_elementwise(a, b):
    _require(a.values.shape == b.values.shape, "mul_elementwise", a.shape, b.shape)
    out = Tensor(a.values * b.values, (a, b))
    out._vjp = lambda g: (g * b.values, g * a.values)
    return out


def sigmoid(a):
    x = a.values
    s = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
    out = Tensor(s, (a,))
    out._vjp = lambda g: (g * s * (1.0 - s),)
    return out


def tanh(a):
    t = np.tanh(a.values)
    out = Tensor(t, (a,))
    out._vjp = lambda g: (g * (1.0 - t * t),)
    return out


def concat(a, b, axis=0):
    av, bv = a.values, b.values
    _require(av.ndim == bv.ndim and 0 <= axis < av.ndim, "concat", av.shape, bv.shape)
    _require(
        all(av.shape[i] == bv.shape[i] for i in range(av.ndim) if i != axis),
        "concat",
        av.shape,
        bv.shape,
    )
    out = Tensor(np.concatenate([av, bv], axis=axis), (a, b))
    split = av.shape[axis]

    def vjp(g):
        ga = np.take(g, range(split), axis=axis)
        gb = np.take(g, range(split, g.shape[axis]), axis=axis)
        return ga, gb

    out._vjp = vjp
    return out


def embedding_lookup(table, index):
    """Select row(s) of a 2-D tensor by integer index or 1-D index array."""
    tv = table.values
    _require(tv.ndim == 2, "embedding_lookup", tv.shape)
    idx = np.asarray(index)
    if idx.ndim == 0:
        i = int(idx)
        if not 0 <= i < tv.shape[0]:
            raise IndexError(f"embedding_lookup: index {i} out of range for table with {tv.shape[0]} rows")
        out = Tensor(tv[i].copy(), (table,))

        def vjp(g):
            gt = np.zeros_like(tv)
            gt[i] = g
            return (gt,)

    else:
        if idx.size and (idx.min() < 0 or idx.max() >= tv.shape[0]):
            raise IndexError(f"embedding_lookup: index out of range for table with {tv.shape[0]} rows")
        out = Tensor(tv[idx], (table,))

        def vjp(g):
            gt = np.zeros_like(tv)
            np.add.at(gt, idx, g)
            return (gt,)

    out._vjp = vjp
    return out


def squared_distance(a, b):
    """Sum of squared elementwise differences, as a scalar tensor."""
    _require(a.values.shape == b.values.shape, "squared_distance", a.shape, b.shape)
    diff = a.values - b.values
    out = Tensor(np.sum(diff * diff), (a, b))
    out._vjp = lambda g: (2.0 * g * diff, -2.0 * g * diff)
    return out


def softmax_cross_entropy(logits, target):
    """Cross-entropy of a softmax over 1-D logits against a single target index."""
    lv = logits.values
    _require(lv.ndim == 1, "softmax_cross_entropy", lv.shape)
    t = int(target)
    if not 0 <= t < lv.shape[0]:
        raise IndexError(f"softmax_cross_entropy: target {t} out of range for {lv.shape[0]} logits")
    m = lv.max()
    z = np.exp(lv - m)
    denom = z.sum()
    out = Tensor(m + np.log(denom) - lv[t], (logits,))

    def vjp(g):
        p = z / denom
        p[t] -= 1.0
        return (g * p,)

    out._vjp = vjp
    return out


def scalar_scale(a, c):
    c = float(c)
    out = Tensor(a.values * c, (a,))
    out._vjp = lambda g: (g * c,)
    return out


def reduce_sum(a):
    """Sum of all entries, as a scalar tensor."""
    out = Tensor(np.sum(a.values), (a,))
    out._vjp = lambda g: (np.full_like(a.values, float(g)),)
    return out


def _topo_order(root):
    # Iterative postorder: parents always precede their consumers.
    order, visited, stack = [], set(), [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in visited:
                stack.append((p, False))
    return order


def backward(loss):
    """Accumulate d(loss)/d(t) into t.grad for every tensor reachable from loss.

    Per-pass flows are kept local, so invoking backward twice on the same
    graph without zeroing grads doubles them exactly.
    """
    if loss.values.shape != ():
        raise ValueError(f"backward expects a scalar loss, got shape {loss.values.shape}")
    order = _topo_order(loss)
    flows = {id(loss): np.ones(())}
    for node in reversed(order):
        g = flows.pop(id(node), None)
        if g is None:
            continue
        if node.grad is None:
            node.grad = np.zeros_like(node.values)
        node.grad += g
        if node._vjp is None:
            continue
        for parent, pg in zip(node._parents, node._vjp(g)):
            if pg is None:
                continue
            acc = flows.get(id(parent))
            flows[id(parent)] = pg if acc is None else acc + pg


class ParameterStore:
    """Named trainable tensors plus per-tensor Adam moments.

    All parameters share one optimizer step counter; adam_step applies the
    standard bias-corrected update in registration order.
    """

    def __init__(self):
        self._params: dict[str, Tensor] = {}
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}
        self.step_count = 0

    def add(self, name, values):
        if name in self._params:
            raise ValueError(f"parameter {name!r} already registered")
        t = Tensor(np.array(values, dtype=np.float64))
        self._params[name] = t
        self._m[name] = np.zeros_like(t.values)
        self._v[name] = np.zeros_like(t.values)
        return t

    def __getitem__(self, name):
        return self._params[name]

    def __contains__(self, name):
        return name in self._params

    def names(self):
        return list(self._params)

    def items(self):
        return self._params.items()

    def zero_grads(self):
        for t in self._params.values():
            t.grad = None

    def adam_step(self, lr=2e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.step_count += 1
        t = self.step_count
        for name, p in self._params.items():
            g = p.grad if p.grad is not None else np.zeros_like(p.values)
            m = self._m[name]
            v = self._v[name]
            m += (1.0 - beta1) * (g - m)
            v += (1.0 - beta2) * (g * g - v)
            m_hat = m / (1.0 - beta1**t)
            v_hat = v / (1.0 - beta2**t)
            p.values -= lr * m_hat / (np.sqrt(v_hat) + eps)

    def snapshot(self):
        """Copy of all parameter values, keyed by name."""
        return {name: t.values.copy() for name, t in self._params.items()}

    def load_values(self, values):
        for name, arr in values.items():
            p = self._params[name]
            if p.values.shape != np.asarray(arr).shape:
                raise ShapeError(f"load_values: {name} has shape {np.asarray(arr).shape}, expected {p.values.shape}")
            p.values[...] = arr
