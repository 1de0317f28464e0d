"""Minimal reverse-mode automatic differentiation on numpy arrays.

A :class:`Tensor` wraps an ndarray. Operations on tensors that require
gradients record their parents and a closure mapping the output gradient to
parent gradients. :meth:`Tensor.backward` walks the graph in reverse
topological order and accumulates into the ``grad`` of leaf tensors.

Volumetric ops use channels-last layout: ``(N, D, H, W, C)``.
"""

from __future__ import annotations

import contextlib

import numpy as np

from ..errors import GraphCycle, ShapeMismatch, UnsupportedOp

_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad():
    """Evaluate without recording the graph (inference)."""
    global _GRAD_ENABLED
    prev, _GRAD_ENABLED = _GRAD_ENABLED, False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def _unbroadcast(grad, shape):
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "op", "name")

    def __init__(self, data, requires_grad=False, name=None, dtype=None):
        if isinstance(data, Tensor):
            data = data.data
        arr = np.asarray(data, dtype=dtype)
        if dtype is None and not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(np.float64)
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward = None
        self.op = "leaf"
        self.name = name

    # ---- basic properties -------------------------------------------------
    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data)

    def __repr__(self):
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, op={self.op!r}{label})"

    def __len__(self):
        return len(self.data)

    def zero_grad(self):
        self.grad = None

    # ---- graph construction ------------------------------------------------
    @staticmethod
    def _make(data, parents, backward, op):
        out = Tensor(data)
        if _GRAD_ENABLED and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._backward = backward
            out.op = op
        return out

    def backward(self, grad=None):
        """Accumulate d(self)/d(leaf) into every reachable leaf's ``grad``."""
        if grad is None:
            if self.data.size != 1:
                raise ShapeMismatch(f"backward() without a seed gradient needs a scalar, got shape {self.shape}")
            grad = np.ones_like(self.data)
        grad = np.asarray(grad, dtype=self.data.dtype)
        if grad.shape != self.shape:
            raise ShapeMismatch(f"seed gradient shape {grad.shape} != tensor shape {self.shape}")

        order = _topological_order(self)
        grads = {id(self): grad}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if not node._parents:
                node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            if node._backward is None:
                raise UnsupportedOp(f"no backward rule for op {node.op!r}")
            parent_grads = node._backward(g)
            for p, pg in zip(node._parents, parent_grads):
                if pg is None or not p.requires_grad:
                    continue
                if pg.shape != p.shape:
                    raise ShapeMismatch(f"op {node.op!r} produced gradient {pg.shape} for parent {p.shape}")
                key = id(p)
                grads[key] = pg if key not in grads else grads[key] + pg

    # ---- arithmetic ----------------------------------------------------------
    def __add__(self, other):
        a, b = self, _coerce(other, self)
        return Tensor._make(
            a.data + b.data,
            (a, b),
            lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
            "add",
        )

    __radd__ = __add__

    def __neg__(self):
        return Tensor._make(-self.data, (self,), lambda g: (-g,), "neg")

    def __sub__(self, other):
        a, b = self, _coerce(other, self)
        return Tensor._make(
            a.data - b.data,
            (a, b),
            lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)),
            "sub",
        )

    def __rsub__(self, other):
        return _coerce(other, self) - self

    def __mul__(self, other):
        a, b = self, _coerce(other, self)
        return Tensor._make(
            a.data * b.data,
            (a, b),
            lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
            "mul",
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        a, b = self, _coerce(other, self)
        out = a.data / b.data
        return Tensor._make(
            out,
            (a, b),
            lambda g: (_unbroadcast(g / b.data, a.shape), _unbroadcast(-g * out / b.data, b.shape)),
            "div",
        )

    def __rtruediv__(self, other):
        return _coerce(other, self) / self

    def __pow__(self, exponent):
        if isinstance(exponent, Tensor):
            raise UnsupportedOp("tensor exponents are not supported")
        e = float(exponent)
        a = self
        return Tensor._make(a.data**e, (a,), lambda g: (g * e * a.data ** (e - 1),), "pow")

    def __matmul__(self, other):
        a, b = self, _coerce(other, self)
        if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
            raise ShapeMismatch(f"matmul of {a.shape} and {b.shape}")
        return Tensor._make(a.data @ b.data, (a, b), lambda g: (g @ b.data.T, a.data.T @ g), "matmul")

    def __rmatmul__(self, other):
        return _coerce(other, self) @ self

    # ---- reductions & reshaping ------------------------------------------------
    def sum(self, axis=None, keepdims=False):
        a = self

        def backward(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, a.shape).copy(),)

        return Tensor._make(a.data.sum(axis=axis, keepdims=keepdims), (a,), backward, "sum")

    def mean(self, axis=None, keepdims=False):
        n = self.data.size if axis is None else np.prod([self.shape[i] for i in np.atleast_1d(axis)])
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        a = self
        return Tensor._make(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),), "reshape")

    def transpose(self, *axes):
        axes = axes or tuple(reversed(range(self.ndim)))
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        inverse = np.argsort(axes)
        return Tensor._make(
            self.data.transpose(axes), (self,), lambda g: (g.transpose(inverse),), "transpose"
        )

    @property
    def T(self):
        return self.transpose()

    def __getitem__(self, idx):
        a = self

        def backward(g):
            out = np.zeros_like(a.data)
            np.add.at(out, idx, g)
            return (out,)

        return Tensor._make(a.data[idx], (a,), backward, "getitem")

    # ---- elementwise nonlinearities ----------------------------------------------
    def exp(self):
        out = np.exp(self.data)
        return Tensor._make(out, (self,), lambda g: (g * out,), "exp")

    def log(self):
        a = self
        return Tensor._make(np.log(a.data), (a,), lambda g: (g / a.data,), "log")

    def sqrt(self):
        out = np.sqrt(self.data)
        return Tensor._make(out, (self,), lambda g: (g / (2.0 * out),), "sqrt")

    def relu(self):
        a = self
        return Tensor._make(np.maximum(a.data, 0), (a,), lambda g: (g * (a.data > 0),), "relu")

    def softplus(self):
        a = self
        sig = lambda: 0.5 * (1.0 + np.tanh(0.5 * a.data))  # noqa: E731
        return Tensor._make(np.logaddexp(0, a.data), (a,), lambda g: (g * sig(),), "softplus")

    def logsumexp(self, axis=-1):
        a = self
        m = a.data.max(axis=axis, keepdims=True)
        e = np.exp(a.data - m)
        s = e.sum(axis=axis, keepdims=True)
        out = (m + np.log(s)).squeeze(axis)
        return Tensor._make(out, (a,), lambda g: (np.expand_dims(g, axis) * e / s,), "logsumexp")


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _coerce(x, like: Tensor) -> Tensor:
    """Wrap a constant operand in the dtype of the tensor it combines with."""
    return x if isinstance(x, Tensor) else Tensor(x, dtype=like.dtype)


def _topological_order(root):
    """Post-order DFS; raises GraphCycle if a node is reached while still open."""
    order, state = [], {}
    stack = [(root, False)]
    while stack:
        node, done = stack.pop()
        key = id(node)
        if done:
            state[key] = 2
            order.append(node)
            continue
        s = state.get(key)
        if s == 2:
            continue
        if s == 1:
            raise GraphCycle(f"cycle through op {node.op!r}")
        state[key] = 1
        stack.append((node, True))
        for p in node._parents:
            ps = state.get(id(p))
            if ps == 1:
                raise GraphCycle(f"cycle through op {p.op!r}")
            if ps is None and p.requires_grad:
                stack.append((p, False))
    return order


# ---- composite primitives -------------------------------------------------------------


def concat(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]
    return Tensor._make(
        np.concatenate([t.data for t in tensors], axis=axis),
        tuple(tensors),
        lambda g: tuple(np.split(g, splits, axis=axis)),
        "concat",
    )


def _im2col3(xp, spatial):
    n, c = xp.shape[0], xp.shape[-1]
    d, h, w = spatial
    cols = np.empty((n, d, h, w, 27, c), dtype=xp.dtype)
    k = 0
    for a in range(3):
        for b in range(3):
            for e in range(3):
                cols[:, :, :, :, k, :] = xp[:, a : a + d, b : b + h, e : e + w, :]
                k += 1
    return cols.reshape(n * d * h * w, 27 * c)


def conv3d(x, weight, bias=None):
    """3x3x3 convolution, stride 1, zero 'same' padding.

    x: (N, D, H, W, Cin); weight: (3, 3, 3, Cin, Cout); bias: (Cout,).
    """
    x, weight = as_tensor(x), as_tensor(weight)
    if x.ndim != 5 or weight.shape[:3] != (3, 3, 3) or weight.shape[3] != x.shape[4]:
        raise ShapeMismatch(f"conv3d input {x.shape} incompatible with kernel {weight.shape}")
    n, d, h, w, cin = x.shape
    cout = weight.shape[4]
    xp = np.pad(x.data, ((0, 0), (1, 1), (1, 1), (1, 1), (0, 0)))
    cols = _im2col3(xp, (d, h, w))
    w2 = weight.data.reshape(27 * cin, cout)
    out = cols @ w2
    parents = [x, weight]
    if bias is not None:
        bias = as_tensor(bias)
        out += bias.data
        parents.append(bias)
    out = out.reshape(n, d, h, w, cout)

    def backward(g):
        g2 = g.reshape(-1, cout)
        gw = (cols.T @ g2).reshape(weight.shape)
        gx = None
        if x.requires_grad:
            gcols = (g2 @ w2.T).reshape(n, d, h, w, 27, cin)
            gxp = np.zeros_like(xp)
            k = 0
            for a in range(3):
                for b in range(3):
                    for e in range(3):
                        gxp[:, a : a + d, b : b + h, e : e + w, :] += gcols[:, :, :, :, k, :]
                        k += 1
            gx = gxp[:, 1:-1, 1:-1, 1:-1, :]
        grads = [gx, gw]
        if bias is not None:
            grads.append(g2.sum(axis=0))
        return tuple(grads)

    return Tensor._make(out, tuple(parents), backward, "conv3d")


def avg_pool3d(x, factor=2):
    """Non-overlapping average pooling over the three spatial axes."""
    x = as_tensor(x)
    n, d, h, w, c = x.shape
    if d % factor or h % factor or w % factor:
        raise ShapeMismatch(f"spatial shape {(d, h, w)} not divisible by pooling factor {factor}")
    f = factor
    blocked = (n, d // f, f, h // f, f, w // f, f, c)
    out = x.data.reshape(blocked).mean(axis=(2, 4, 6))

    def backward(g):
        spread = np.broadcast_to(g[:, :, None, :, None, :, None, :] / f**3, blocked)
        return (spread.reshape(x.shape),)

    return Tensor._make(out, (x,), backward, "avg_pool3d")


def pdist(z, block_elems=1 << 22):
    """Euclidean distances between rows of a 2D tensor.

    The diagonal is set to exactly zero instead of being computed through the
    norm; pairs at zero distance receive zero gradient.
    """
    z = as_tensor(z)
    if z.ndim != 2:
        raise ShapeMismatch(f"pdist expects a 2D tensor, got {z.shape}")
    n, dim = z.shape
    zd = z.data
    out = np.empty((n, n), dtype=zd.dtype)
    step = max(1, block_elems // max(1, n * dim))
    for start in range(0, n, step):
        diff = zd[start : start + step, None, :] - zd[None, :, :]
        out[start : start + step] = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    np.fill_diagonal(out, 0.0)

    def backward(g):
        with np.errstate(divide="ignore", invalid="ignore"):
            wgt = np.where(out > 0, (g + g.T) / out, 0.0)
        np.fill_diagonal(wgt, 0.0)
        return (wgt.sum(axis=1)[:, None] * zd - wgt @ zd,)

    return Tensor._make(out, (z,), backward, "pdist")


def standardize(z, eps=1e-12):
    """Per-column (z - mean) / (population std + eps), across the batch axis 0."""
    z = as_tensor(z)
    n = z.shape[0]
    c = z.data - z.data.mean(axis=0, keepdims=True)
    sigma = np.sqrt((c * c).mean(axis=0, keepdims=True))
    s = sigma + eps
    out = c / s

    def backward(g):
        gm = g.mean(axis=0, keepdims=True)
        gc = (g * c).sum(axis=0, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            second = np.where(sigma > 0, c * gc / (n * sigma * s * s), 0.0)
        return ((g - gm) / s - second,)

    return Tensor._make(out, (z,), backward, "standardize")
