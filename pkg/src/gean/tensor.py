"""Minimal dense-tensor engine with reverse-mode automatic differentiation.

Values are numpy arrays; every differentiable operation records itself on
the active Tape so that a single backward sweep (in reverse execution
order) accumulates gradients into every reachable tensor.
"""

import numpy as np
from numpy.lib.stride_tricks import as_strided

from .errors import ContractError, DimensionError


# ---------------------------------------------------------------------------
# Tape and Tensor
# ---------------------------------------------------------------------------

_TAPE_STACK = []


class Tape:
    """Ordered record of executed operations for one backward sweep."""

    def __init__(self):
        self._nodes = []

    def __enter__(self):
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, *exc):
        _TAPE_STACK.pop()
        return False

    def record(self, tensor):
        self._nodes.append(tensor)

    def backward(self, loss):
        """Seed d(loss)/d(loss)=1 and replay recorded ops in reverse order."""
        if loss.data.size != 1:
            raise ContractError("backward requires a scalar loss, got shape %s"
                                % (loss.shape,))
        loss.grad = np.ones_like(loss.data)
        for node in reversed(self._nodes):
            if node.grad is not None and node._backward is not None:
                node._backward(node.grad)


def _active_tape():
    return _TAPE_STACK[-1] if _TAPE_STACK else None


class no_grad:
    """Context that suppresses tape recording (pure forward math)."""

    def __enter__(self):
        _TAPE_STACK.append(None)
        return self

    def __exit__(self, *exc):
        _TAPE_STACK.pop()
        return False


def _recording():
    return bool(_TAPE_STACK) and _TAPE_STACK[-1] is not None


class Tensor:
    """Dense n-dimensional array, optionally tracked for gradients."""

    __slots__ = ("data", "grad", "requires_grad", "_backward")

    def __init__(self, data, requires_grad=False, dtype=None):
        self.data = np.asarray(data, dtype=dtype)
        if not np.issubdtype(self.data.dtype, np.floating):
            self.data = self.data.astype(np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def item(self):
        return float(self.data.reshape(()))

    def accumulate(self, g):
        if self.grad is None:
            self.grad = np.array(g, dtype=self.data.dtype, copy=True)
        else:
            self.grad += g

    def backward(self):
        tape = _active_tape()
        if tape is None:
            raise ContractError("backward called with no active Tape")
        tape.backward(self)

    def __repr__(self):
        return "Tensor(shape=%s, dtype=%s)" % (self.shape, self.data.dtype)

    # operator sugar; definitions below
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __rsub__(self, other):
        return add(mul(self, -1.0), other)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def reshape(self, *shape):
        return reshape(self, *shape)


class Parameter(Tensor):
    """Named trainable tensor; `grad` is zero-filled after an optimizer step."""

    __slots__ = ("name",)

    def __init__(self, name, value, dtype=None):
        super().__init__(value, requires_grad=True, dtype=dtype)
        self.name = name

    def zero_grad(self):
        self.grad = np.zeros_like(self.data)

    def __repr__(self):
        return "Parameter(%r, shape=%s)" % (self.name, self.shape)


def _as_tensor(x, like=None):
    if isinstance(x, Tensor):
        return x
    dtype = like.data.dtype if like is not None else None
    return Tensor(np.asarray(x, dtype=dtype))


def _make(data, parents, backward, requires_grad):
    out = Tensor(data)
    track = requires_grad and _recording()
    out.requires_grad = track
    if track:
        out._backward = backward
        _TAPE_STACK[-1].record(out)
    return out


def _unbroadcast(grad, shape):
    """Reduce a broadcast gradient back to `shape`."""
    extra = grad.ndim - len(shape)
    if extra:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


# ---------------------------------------------------------------------------
# Elementwise and linear algebra
# ---------------------------------------------------------------------------

def add(a, b):
    a = _as_tensor(a)
    b = _as_tensor(b, like=a)
    data = a.data + b.data

    def backward(g):
        if a.requires_grad:
            a.accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(g, b.shape))

    return _make(data, (a, b), backward, a.requires_grad or b.requires_grad)


def mul(a, b):
    a = _as_tensor(a)
    b = _as_tensor(b, like=a)
    data = a.data * b.data

    def backward(g):
        if a.requires_grad:
            a.accumulate(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(g * a.data, b.shape))

    return _make(data, (a, b), backward, a.requires_grad or b.requires_grad)


def matmul(a, b):
    a = _as_tensor(a)
    b = _as_tensor(b, like=a)
    if a.data.ndim == 0 or b.data.ndim == 0:
        raise DimensionError("matmul requires at least 1-D operands")
    try:
        data = a.data @ b.data
    except ValueError as e:
        raise DimensionError(str(e)) from None

    def backward(g):
        ad, bd = a.data, b.data
        if ad.ndim == 2 and bd.ndim == 1:
            if a.requires_grad:
                a.accumulate(np.outer(g, bd))
            if b.requires_grad:
                b.accumulate(ad.T @ g)
        elif ad.ndim == 1 and bd.ndim == 2:
            if a.requires_grad:
                a.accumulate(bd @ g)
            if b.requires_grad:
                b.accumulate(np.outer(ad, g))
        elif ad.ndim == 1 and bd.ndim == 1:
            if a.requires_grad:
                a.accumulate(g * bd)
            if b.requires_grad:
                b.accumulate(g * ad)
        else:
            if a.requires_grad:
                a.accumulate(g @ bd.swapaxes(-1, -2))
            if b.requires_grad:
                b.accumulate(ad.swapaxes(-1, -2) @ g)

    return _make(data, (a, b), backward, a.requires_grad or b.requires_grad)


def affine(x, W, b):
    """W @ x + b for a vector x."""
    return add(matmul(W, x), b)


def tensor_sum(a, axis=None, keepdims=False):
    a = _as_tensor(a)
    data = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if not a.requires_grad:
            return
        if axis is None:
            a.accumulate(np.broadcast_to(g, a.shape))
        else:
            ge = g if keepdims else np.expand_dims(g, axis)
            a.accumulate(np.broadcast_to(ge, a.shape))

    return _make(data, (a,), backward, a.requires_grad)


def mean(a, axis=None):
    a = _as_tensor(a)
    n = a.data.size if axis is None else a.shape[axis]
    return mul(tensor_sum(a, axis=axis), 1.0 / n)


def reshape(a, *shape):
    a = _as_tensor(a)
    if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
        shape = tuple(shape[0])
    old = a.shape
    data = a.data.reshape(shape)

    def backward(g):
        if a.requires_grad:
            a.accumulate(g.reshape(old))

    return _make(data, (a,), backward, a.requires_grad)


def transpose(a):
    a = _as_tensor(a)
    if a.ndim != 2:
        raise DimensionError("transpose expects a 2-D tensor")
    data = a.data.T

    def backward(g):
        if a.requires_grad:
            a.accumulate(g.T)

    return _make(data, (a,), backward, a.requires_grad)


def concat(tensors, axis=0):
    tensors = [_as_tensor(t) for t in tensors]
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]

    def backward(g):
        start = 0
        for t, s in zip(tensors, sizes):
            if t.requires_grad:
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(start, start + s)
                t.accumulate(g[tuple(idx)])
            start += s

    return _make(data, tuple(tensors), backward,
                 any(t.requires_grad for t in tensors))


def stack(tensors, axis=0):
    tensors = [_as_tensor(t) for t in tensors]
    data = np.stack([t.data for t in tensors], axis=axis)

    def backward(g):
        parts = np.moveaxis(g, axis, 0)
        for t, gt in zip(tensors, parts):
            if t.requires_grad:
                t.accumulate(gt)

    return _make(data, tuple(tensors), backward,
                 any(t.requires_grad for t in tensors))


def narrow(a, axis, start, length):
    """Contiguous slice [start, start+length) along one axis."""
    a = _as_tensor(a)
    idx = [slice(None)] * a.ndim
    idx[axis] = slice(start, start + length)
    idx = tuple(idx)
    data = a.data[idx]

    def backward(g):
        if a.requires_grad:
            full = np.zeros(a.shape, dtype=g.dtype)
            full[idx] = g
            a.accumulate(full)

    return _make(data, (a,), backward, a.requires_grad)


def index(a, i):
    """Scalar pick a[i] from a 1-D tensor."""
    a = _as_tensor(a)
    if a.ndim != 1:
        raise DimensionError("index expects a 1-D tensor")
    data = a.data[i]

    def backward(g):
        if a.requires_grad:
            full = np.zeros(a.shape, dtype=a.data.dtype)
            full[i] = g
            a.accumulate(full)

    return _make(data, (a,), backward, a.requires_grad)


def column(M, j):
    """Column M[:, j] of a matrix (embedding lookup)."""
    M = _as_tensor(M)
    if M.ndim != 2:
        raise DimensionError("column expects a 2-D tensor")
    data = M.data[:, j].copy()

    def backward(g):
        if M.requires_grad:
            if M.grad is None:
                M.grad = np.zeros_like(M.data)
            M.grad[:, j] += g

    return _make(data, (M,), backward, M.requires_grad)


# ---------------------------------------------------------------------------
# Activations and softmax
# ---------------------------------------------------------------------------

def sigmoid(a):
    a = _as_tensor(a)
    data = 1.0 / (1.0 + np.exp(-a.data))

    def backward(g):
        if a.requires_grad:
            a.accumulate(g * data * (1.0 - data))

    return _make(data, (a,), backward, a.requires_grad)


def tanh(a):
    a = _as_tensor(a)
    data = np.tanh(a.data)

    def backward(g):
        if a.requires_grad:
            a.accumulate(g * (1.0 - data * data))

    return _make(data, (a,), backward, a.requires_grad)


def stanh(a):
    """Scaled hyperbolic tangent: 1.7159 * tanh(2x/3)."""
    a = _as_tensor(a)
    inner = np.tanh(a.data * (2.0 / 3.0))
    data = 1.7159 * inner

    def backward(g):
        if a.requires_grad:
            a.accumulate(g * (1.7159 * 2.0 / 3.0) * (1.0 - inner * inner))

    return _make(data, (a,), backward, a.requires_grad)


def activation(a, kind):
    if kind == "sigmoid":
        return sigmoid(a)
    if kind == "tanh":
        return tanh(a)
    if kind == "stanh":
        return stanh(a)
    raise DimensionError("unknown activation kind %r" % (kind,))


def log(a):
    a = _as_tensor(a)
    data = np.log(a.data)

    def backward(g):
        if a.requires_grad:
            a.accumulate(g / a.data)

    return _make(data, (a,), backward, a.requires_grad)


def softmax(a, axis=-1):
    """Numerically stabilized softmax along one axis."""
    a = _as_tensor(a)
    if a.data.size == 0:
        raise DimensionError("softmax of empty tensor")
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    data = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        if a.requires_grad:
            dot = (g * data).sum(axis=axis, keepdims=True)
            a.accumulate((g - dot) * data)

    return _make(data, (a,), backward, a.requires_grad)


def log_softmax(a, axis=-1):
    a = _as_tensor(a)
    if a.data.size == 0:
        raise DimensionError("log_softmax of empty tensor")
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    data = shifted - lse

    def backward(g):
        if a.requires_grad:
            a.accumulate(g - np.exp(data) * g.sum(axis=axis, keepdims=True))

    return _make(data, (a,), backward, a.requires_grad)


def dropout(a, rate, rng, on):
    """Inverted dropout; identity when off (inference)."""
    if not on or rate <= 0.0:
        return _as_tensor(a)
    a = _as_tensor(a)
    keep = (rng.random(a.shape) >= rate).astype(a.data.dtype) / (1.0 - rate)
    return mul(a, Tensor(keep))


# ---------------------------------------------------------------------------
# Spatial ops (H x W x C layout, optional leading batch axis)
# ---------------------------------------------------------------------------

def _batched(x):
    """View as (N,H,W,C); report whether a batch axis was added."""
    if x.ndim == 3:
        return x[None], True
    if x.ndim == 4:
        return x, False
    raise DimensionError("expected 3-D (H,W,C) or 4-D (N,H,W,C), got %s"
                         % (x.shape,))


def _im2col(xp, kh, kw, stride, ho, wo):
    """Window view of padded (N,Hp,Wp,C) -> (N,ho,wo,kh,kw,C)."""
    n, hp, wp, c = xp.shape
    sn, sh, sw, sc = xp.strides
    shape = (n, ho, wo, kh, kw, c)
    strides = (sn, sh * stride, sw * stride, sh, sw, sc)
    return as_strided(xp, shape=shape, strides=strides)


def _col2im(cols, n, hp, wp, c, kh, kw, stride, ho, wo, dtype):
    """Scatter-add (N,ho,wo,kh,kw,C) windows back into a padded image."""
    out = np.zeros((n, hp, wp, c), dtype=dtype)
    for di in range(kh):
        for dj in range(kw):
            out[:, di:di + stride * ho:stride,
                dj:dj + stride * wo:stride, :] += cols[:, :, :, di, dj, :]
    return out


def conv2d(x, kernel, stride=1, pad=0):
    """2-D convolution (cross-correlation), zero padding.

    x: (H,W,Cin) or (N,H,W,Cin); kernel: (kh,kw,Cin,Cout).
    """
    x = _as_tensor(x)
    kernel = _as_tensor(kernel, like=x)
    if stride < 1:
        raise DimensionError("stride must be >= 1")
    xb, squeeze = _batched(x.data)
    kh, kw, cin, cout = kernel.shape
    n, h, w, cx = xb.shape
    if cx != cin:
        raise DimensionError("conv2d channel mismatch: input %d vs kernel %d"
                             % (cx, cin))
    if kh > h + 2 * pad or kw > w + 2 * pad:
        raise DimensionError("kernel larger than padded input")
    ho = (h + 2 * pad - kh) // stride + 1
    wo = (w + 2 * pad - kw) // stride + 1

    if kh == 1 and kw == 1 and stride == 1 and pad == 0:
        # 1x1 conv is a plain channel matmul
        flat = xb.reshape(-1, cin)
        out = (flat @ kernel.data.reshape(cin, cout)).reshape(n, ho, wo, cout)
        cols_flat = flat
    else:
        xp = np.pad(xb, ((0, 0), (pad, pad), (pad, pad), (0, 0)))
        cols = _im2col(xp, kh, kw, stride, ho, wo)
        cols_flat = np.ascontiguousarray(cols).reshape(n * ho * wo, kh * kw * cin)
        out = (cols_flat @ kernel.data.reshape(-1, cout)).reshape(n, ho, wo, cout)

    def backward(g):
        gb = g.reshape(n, ho, wo, cout)
        gflat = gb.reshape(-1, cout)
        if kernel.requires_grad:
            kernel.accumulate((cols_flat.T @ gflat).reshape(kernel.shape))
        if x.requires_grad:
            if kh == 1 and kw == 1 and stride == 1 and pad == 0:
                gx = (gflat @ kernel.data.reshape(cin, cout).T).reshape(xb.shape)
            else:
                gcols = (gflat @ kernel.data.reshape(-1, cout).T)
                gcols = gcols.reshape(n, ho, wo, kh, kw, cin)
                gp = _col2im(gcols, n, h + 2 * pad, w + 2 * pad, cin,
                             kh, kw, stride, ho, wo, g.dtype)
                gx = gp[:, pad:pad + h, pad:pad + w, :]
            x.accumulate(gx[0] if squeeze else gx)

    data = out[0] if squeeze else out
    return _make(data, (x, kernel), backward,
                 x.requires_grad or kernel.requires_grad)


def conv_transpose2d(x, kernel, stride=1, pad=0):
    """Transposed convolution, the adjoint of conv2d.

    x: (H,W,Cin) or (N,H,W,Cin); kernel: (kh,kw,Cout,Cin).
    Output extent: (H-1)*stride + kh - 2*pad.
    """
    x = _as_tensor(x)
    kernel = _as_tensor(kernel, like=x)
    if stride < 1:
        raise DimensionError("stride must be >= 1")
    xb, squeeze = _batched(x.data)
    kh, kw, cout, cin = kernel.shape
    n, h, w, cx = xb.shape
    if cx != cin:
        raise DimensionError("conv_transpose2d channel mismatch: input %d vs "
                             "kernel %d" % (cx, cin))
    ho = (h - 1) * stride + kh - 2 * pad
    wo = (w - 1) * stride + kw - 2 * pad
    if ho <= 0 or wo <= 0:
        raise DimensionError("non-positive output extent (%d, %d)" % (ho, wo))

    kflat = kernel.data.reshape(kh * kw * cout, cin)
    cols = (xb.reshape(-1, cin) @ kflat.T).reshape(n, h, w, kh, kw, cout)
    full = _col2im(cols, n, ho + 2 * pad, wo + 2 * pad, cout,
                   kh, kw, stride, h, w, xb.dtype)
    out = full[:, pad:pad + ho, pad:pad + wo, :]

    def backward(g):
        gb = g.reshape(n, ho, wo, cout)
        gp = np.pad(gb, ((0, 0), (pad, pad), (pad, pad), (0, 0)))
        gcols = _im2col(gp, kh, kw, stride, h, w)
        gcols_flat = np.ascontiguousarray(gcols).reshape(n * h * w, kh * kw * cout)
        if x.requires_grad:
            gx = (gcols_flat @ kflat).reshape(xb.shape)
            x.accumulate(gx[0] if squeeze else gx)
        if kernel.requires_grad:
            gk = gcols_flat.T @ xb.reshape(-1, cin)
            kernel.accumulate(gk.reshape(kernel.shape))

    data = out[0] if squeeze else out
    return _make(data, (x, kernel), backward,
                 x.requires_grad or kernel.requires_grad)


def avg_pool2d(x, kh, kw, stride):
    """Average pooling over (kh,kw) windows; x: (H,W[,C]) or (N,H,W,C)."""
    x = _as_tensor(x)
    plain2d = x.ndim == 2
    xin = x.data[:, :, None] if plain2d else x.data
    xb, squeeze = _batched(xin)
    n, h, w, c = xb.shape
    if kh > h or kw > w:
        raise DimensionError("pooling window (%d,%d) larger than input (%d,%d)"
                             % (kh, kw, h, w))
    ho = (h - kh) // stride + 1
    wo = (w - kw) // stride + 1
    cols = _im2col(xb, kh, kw, stride, ho, wo)
    out = cols.mean(axis=(3, 4))

    def backward(g):
        gb = g.reshape(n, ho, wo, c) / (kh * kw)
        gcols = np.broadcast_to(gb[:, :, :, None, None, :],
                                (n, ho, wo, kh, kw, c))
        gx = _col2im(gcols, n, h, w, c, kh, kw, stride, ho, wo, g.dtype)
        if squeeze:
            gx = gx[0]
        if plain2d:
            gx = gx[:, :, 0]
        x.accumulate(gx)

    data = out[0] if squeeze else out
    if plain2d:
        data = data[:, :, 0]
    return _make(data, (x,), backward, x.requires_grad)


# ---------------------------------------------------------------------------
# Gradient checking
# ---------------------------------------------------------------------------

def grad_check(f, params, h=1e-5):
    """Max relative error between autodiff and central finite differences.

    f is a no-argument callable returning a scalar Tensor built from
    `params` (a sequence of Parameters). Relative error per element is
    |g_ad - g_fd| / max(|g_ad|, |g_fd|, 1e-8).
    """
    params = list(params)
    for p in params:
        p.grad = None
    with Tape() as tape:
        loss = f()
        tape.backward(loss)
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy()
                for p in params]

    worst = 0.0
    with no_grad():
        for p, ga in zip(params, analytic):
            flat = p.data.reshape(-1)
            gfd = np.zeros_like(flat)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + h
                fp = f().item()
                flat[i] = orig - h
                fm = f().item()
                flat[i] = orig
                gfd[i] = (fp - fm) / (2.0 * h)
            gad = ga.reshape(-1)
            denom = np.maximum(np.maximum(np.abs(gad), np.abs(gfd)), 1e-8)
            worst = max(worst, float(np.max(np.abs(gad - gfd) / denom)))
    for p in params:
        p.grad = None
    return worst
