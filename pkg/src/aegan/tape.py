"""Minimal reverse-mode automatic differentiation over float64 numpy arrays.

This is deliberately a small, closed set of primitives: exactly the
operations the network families and loss terms need, each with a
hand-derived vector-Jacobian product that the test suite checks against
central finite differences.

Matrix products go through ``np.einsum`` rather than BLAS ``matmul``.
einsum's fixed summation order makes every output row bitwise identical
regardless of batch size, which the interpolation and batch-independence
contracts rely on; at the small shapes this package targets the speed
difference is irrelevant.
"""

import numpy as np

__all__ = [
    "Tensor",
    "as_tensor",
    "matmul",
    "tanh",
    "sigmoid",
    "leaky_relu",
    "log",
    "clip",
    "absolute",
    "mean",
    "sum_along",
    "row_norm",
    "reshape",
    "conv2d",
    "upsample2x",
]


def _unbroadcast(grad, shape):
    """Sum ``grad`` down to ``shape``, undoing numpy broadcasting."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


class Tensor:
    """A node in the computation graph.

    ``value`` is always a float64 ndarray (scalars are 0-d arrays).
    Leaf tensors created with ``requires_grad=True`` accumulate into
    ``grad`` when :meth:`backward` is called on a downstream scalar.
    """

    __slots__ = ("value", "grad", "requires_grad", "_parents")

    def __init__(self, value, requires_grad=False, parents=()):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad or any(p.requires_grad for p, _ in parents)
        # parents: sequence of (tensor, vjp) kept only while grads are needed
        self._parents = tuple(
            (p, vjp) for p, vjp in parents if p.requires_grad
        ) if self.requires_grad else ()

    @property
    def shape(self):
        return self.value.shape

    def item(self):
        return float(self.value)

    def backward(self):
        """Accumulate gradients of this scalar into all reachable leaves."""
        if self.value.ndim != 0:
            raise ValueError("backward() requires a scalar tensor")
        order = []
        seen = set()

        def visit(node):
            stack = [(node, False)]
            while stack:
                n, expanded = stack.pop()
                if expanded:
                    order.append(n)
                    continue
                if id(n) in seen:
                    continue
                seen.add(id(n))
                stack.append((n, True))
                for p, _ in n._parents:
                    stack.append((p, False))

        visit(self)
        grads = {id(self): np.ones((), dtype=np.float64)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if not node._parents:  # leaf
                node.grad = g if node.grad is None else node.grad + g
                continue
            for parent, vjp in node._parents:
                contrib = vjp(g)
                if id(parent) in grads:
                    grads[id(parent)] = grads[id(parent)] + contrib
                else:
                    grads[id(parent)] = contrib

    # arithmetic ----------------------------------------------------------

    def __add__(self, other):
        other = as_tensor(other)
        out_val = self.value + other.value
        return Tensor(out_val, parents=(
            (self, lambda g: _unbroadcast(g, self.value.shape)),
            (other, lambda g: _unbroadcast(g, other.value.shape)),
        ))

    __radd__ = __add__

    def __neg__(self):
        return Tensor(-self.value, parents=((self, lambda g: -g),))

    def __sub__(self, other):
        return self + (-as_tensor(other))

    def __rsub__(self, other):
        return as_tensor(other) + (-self)

    def __mul__(self, other):
        other = as_tensor(other)
        a, b = self, other
        return Tensor(a.value * b.value, parents=(
            (a, lambda g: _unbroadcast(g * b.value, a.value.shape)),
            (b, lambda g: _unbroadcast(g * a.value, b.value.shape)),
        ))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise TypeError("tensor/tensor division is not a supported primitive")
        return self * (1.0 / float(other))

    def __matmul__(self, other):
        return matmul(self, other)


def as_tensor(x):
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=np.float64))


def matmul(a, b):
    """Batch-stable 2-D matrix product ``a @ b`` via einsum."""
    a, b = as_tensor(a), as_tensor(b)
    out = np.einsum("ij,jk->ik", a.value, b.value)
    return Tensor(out, parents=(
        (a, lambda g: np.einsum("ik,jk->ij", g, b.value)),
        (b, lambda g: np.einsum("ij,ik->jk", a.value, g)),
    ))


def tanh(x):
    x = as_tensor(x)
    out = np.tanh(x.value)
    return Tensor(out, parents=((x, lambda g: g * (1.0 - out * out)),))


def sigmoid(x):
    x = as_tensor(x)
    # numerically stable two-sided form
    v = x.value
    out = np.where(v >= 0, 1.0 / (1.0 + np.exp(-np.abs(v))),
                   np.exp(-np.abs(v)) / (1.0 + np.exp(-np.abs(v))))
    return Tensor(out, parents=((x, lambda g: g * out * (1.0 - out)),))


def leaky_relu(x, slope=0.2):
    x = as_tensor(x)
    factor = np.where(x.value >= 0, 1.0, slope)
    return Tensor(x.value * factor, parents=((x, lambda g: g * factor),))


def log(x):
    x = as_tensor(x)
    return Tensor(np.log(x.value), parents=((x, lambda g: g / x.value),))


def clip(x, lo, hi):
    """Clamp values to [lo, hi]; gradient passes only through the interior."""
    x = as_tensor(x)
    out = np.clip(x.value, lo, hi)
    inside = ((x.value >= lo) & (x.value <= hi)).astype(np.float64)
    return Tensor(out, parents=((x, lambda g: g * inside),))


def absolute(x):
    x = as_tensor(x)
    sign = np.sign(x.value)
    return Tensor(np.abs(x.value), parents=((x, lambda g: g * sign),))


def mean(x):
    """Mean over all elements, returning a scalar tensor."""
    x = as_tensor(x)
    n = x.value.size
    return Tensor(x.value.mean(), parents=(
        (x, lambda g: np.full_like(x.value, g / n)),
    ))


def sum_along(x, axis):
    x = as_tensor(x)
    out = x.value.sum(axis=axis)
    return Tensor(out, parents=(
        (x, lambda g: np.broadcast_to(np.expand_dims(g, axis), x.value.shape).copy()),
    ))


def row_norm(x):
    """Euclidean norm of each row of a (batch, d) matrix -> (batch,).

    The gradient at an exactly-zero row is defined as zero (a valid
    subgradient), so reconstruction terms stay finite at the optimum.
    """
    x = as_tensor(x)
    out = np.sqrt(np.einsum("ij,ij->i", x.value, x.value))

    def vjp(g):
        safe = np.where(out > 0, out, 1.0)
        scale = np.where(out > 0, g / safe, 0.0)
        return x.value * scale[:, None]

    return Tensor(out, parents=((x, vjp),))


def reshape(x, shape):
    x = as_tensor(x)
    return Tensor(x.value.reshape(shape), parents=(
        (x, lambda g: g.reshape(x.value.shape)),
    ))


def _im2col(x, kh, kw, stride):
    """(n, h, w, c) -> (n, oh, ow, kh, kw, c) patch view (no copy)."""
    n, h, w, c = x.shape
    oh = (h - kh) // stride + 1
    ow = (w - kw) // stride + 1
    windows = np.lib.stride_tricks.sliding_window_view(x, (kh, kw), axis=(1, 2))
    # windows: (n, h-kh+1, w-kw+1, c, kh, kw)
    windows = windows[:, ::stride, ::stride]
    return np.ascontiguousarray(np.moveaxis(windows, 3, 5)), oh, ow


def conv2d(x, w, b, stride=1, padding=0):
    """2-D convolution on (batch, h, w, c_in) with kernel (kh, kw, c_in, c_out).

    Zero padding, square stride.  Uses an im2col + einsum formulation so the
    result inherits einsum's batch-stability.
    """
    x, w, b = as_tensor(x), as_tensor(w), as_tensor(b)
    kh, kw, cin, cout = w.value.shape
    xv = x.value
    if padding:
        xv = np.pad(xv, ((0, 0), (padding, padding), (padding, padding), (0, 0)))
    cols, oh, ow = _im2col(xv, kh, kw, stride)
    n = xv.shape[0]
    cols2 = cols.reshape(n * oh * ow, kh * kw * cin)
    wmat = w.value.reshape(kh * kw * cin, cout)
    out = np.einsum("ij,jk->ik", cols2, wmat).reshape(n, oh, ow, cout) + b.value

    def vjp_x(g):
        gmat = g.reshape(n * oh * ow, cout)
        dcols = np.einsum("ik,jk->ij", gmat, wmat)
        dcols = dcols.reshape(n, oh, ow, kh, kw, cin)
        dxp = np.zeros_like(xv)
        for i in range(kh):
            for j in range(kw):
                dxp[:, i:i + oh * stride:stride, j:j + ow * stride:stride] += \
                    dcols[:, :, :, i, j, :]
        if padding:
            return dxp[:, padding:-padding, padding:-padding, :]
        return dxp

    def vjp_w(g):
        gmat = g.reshape(n * oh * ow, cout)
        return np.einsum("ij,ik->jk", cols2, gmat).reshape(w.value.shape)

    return Tensor(out, parents=(
        (x, vjp_x),
        (w, vjp_w),
        (b, lambda g: g.sum(axis=(0, 1, 2))),
    ))


def upsample2x(x):
    """Nearest-neighbour 2x spatial upsampling of (batch, h, w, c)."""
    x = as_tensor(x)
    out = x.value.repeat(2, axis=1).repeat(2, axis=2)

    def vjp(g):
        n, h2, w2, c = g.shape
        return g.reshape(n, h2 // 2, 2, w2 // 2, 2, c).sum(axis=(2, 4))

    return Tensor(out, parents=((x, vjp),))
