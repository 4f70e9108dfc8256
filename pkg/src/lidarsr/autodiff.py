"""Minimal reverse-mode automatic differentiation over dense numpy arrays.

Provides exactly the operators the up-sampling and feature-extraction
networks need (conv2d, conv_transpose2d, batch_norm, relu, elementwise
arithmetic, reductions, a fused cross-entropy) plus the Adam optimizer and
the LWT named-tensor file format.

Tensors keep the dtype they are built with: float64 everywhere by default
(gradient checks run fully in 64-bit) while the training loops build
float32 graphs for speed. The Adam optimizer accumulates its moments and
master weights in float64 regardless. Weight files store float32.

Graphs are built eagerly by the ops; ``backward(loss)`` walks the graph
once and adds the resulting gradients into the ``.grad`` buffers of the
tracked leaf tensors, so repeated calls accumulate additively.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import CorruptFile, NonScalarLoss, ShapeMismatch

LWT_MAGIC = b"LWT1"

_grad_enabled = True


class no_grad:
    """Context manager suppressing graph construction (inference mode)."""

    def __enter__(self):
        global _grad_enabled
        self._prev = _grad_enabled
        _grad_enabled = False
        return self

    def __exit__(self, *exc):
        global _grad_enabled
        _grad_enabled = self._prev
        return False


def _coerce(data):
    arr = np.asarray(data)
    if arr.dtype != np.float32 and arr.dtype != np.float64:
        arr = arr.astype(np.float64)
    return arr


class Tensor:
    """Dense real array with optional gradient tracking."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False):
        self.data = _coerce(data)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self):
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def detach(self):
        return Tensor(self.data)

    def astype(self, dtype):
        return Tensor(self.data.astype(dtype), requires_grad=self.requires_grad)

    def __repr__(self):
        return (f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, "
                f"requires_grad={self.requires_grad})")

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return add(neg(self), other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return neg(self)

    def sum(self):
        return tsum(self)

    def abs(self):
        return absolute(self)

    def exp(self):
        return exp(self)

    def log(self):
        return log(self)


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, parents, backward_fn):
    """Wrap an op result, attaching the graph only when a parent is tracked."""
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad or p._backward is not None
                             for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward_fn
    return out


def _check_same_shape(op, a, b):
    if a.shape != b.shape and a.shape != () and b.shape != ():
        raise ShapeMismatch(f"{op}: {a.shape} vs {b.shape}")


# --- elementwise / reduction ops -------------------------------------------

def add(a, b):
    if not isinstance(b, Tensor) and np.isscalar(b):
        a = _as_tensor(a)
        s = float(b)

        def bwd_s(g, acc):
            acc(a, g)

        return _make(a.data + s, (a,), bwd_s)
    a, b = _as_tensor(a), _as_tensor(b)
    _check_same_shape("add", a, b)
    data = a.data + b.data

    def bwd(g, acc):
        acc(a, g if a.shape == data.shape else g.sum())
        acc(b, g if b.shape == data.shape else g.sum())

    return _make(data, (a, b), bwd)


def sub(a, b):
    if not isinstance(b, Tensor) and np.isscalar(b):
        return add(a, -float(b))
    if not isinstance(a, Tensor) and np.isscalar(a):
        return add(neg(b), float(a))
    a, b = _as_tensor(a), _as_tensor(b)
    _check_same_shape("sub", a, b)
    data = a.data - b.data

    def bwd(g, acc):
        acc(a, g if a.shape == data.shape else g.sum())
        acc(b, -g if b.shape == data.shape else -g.sum())

    return _make(data, (a, b), bwd)


def mul(a, b):
    if not isinstance(b, Tensor) and np.isscalar(b):
        a = _as_tensor(a)
        s = float(b)

        def bwd_s(g, acc):
            acc(a, g * s)

        return _make(a.data * s, (a,), bwd_s)
    a, b = _as_tensor(a), _as_tensor(b)
    _check_same_shape("mul", a, b)
    data = a.data * b.data

    def bwd(g, acc):
        ga = g * b.data
        gb = g * a.data
        acc(a, ga if a.shape == data.shape else ga.sum())
        acc(b, gb if b.shape == data.shape else gb.sum())

    return _make(data, (a, b), bwd)


def neg(a):
    a = _as_tensor(a)

    def bwd(g, acc):
        acc(a, -g)

    return _make(-a.data, (a,), bwd)


def absolute(a):
    a = _as_tensor(a)
    data = np.abs(a.data)

    def bwd(g, acc):
        acc(a, g * np.sign(a.data))

    return _make(data, (a,), bwd)


def square(a):
    a = _as_tensor(a)

    def bwd(g, acc):
        acc(a, g * (2.0 * a.data))

    return _make(a.data * a.data, (a,), bwd)


def exp(a):
    a = _as_tensor(a)
    data = np.exp(a.data)

    def bwd(g, acc):
        acc(a, g * data)

    return _make(data, (a,), bwd)


def log(a):
    a = _as_tensor(a)

    def bwd(g, acc):
        acc(a, g / a.data)

    return _make(np.log(a.data), (a,), bwd)


def tsum(a):
    a = _as_tensor(a)

    def bwd(g, acc):
        acc(a, np.broadcast_to(g, a.shape))

    return _make(a.data.sum(), (a,), bwd)


def relu(a):
    a = _as_tensor(a)
    mask = a.data > 0

    def bwd(g, acc):
        acc(a, g * mask)

    return _make(np.where(mask, a.data, a.data.dtype.type(0)), (a,), bwd)


# --- convolution helpers ----------------------------------------------------

def _im2col3(xp, kh, kw, sh, sw):
    """Padded (N,C,Hp,Wp) -> ((N, C*kh*kw, Ho*Wo) matrix, Ho, Wo)."""
    n, c, hp, wp = xp.shape
    ho = (hp - kh) // sh + 1
    wo = (wp - kw) // sw + 1
    cols = np.empty((n, c, kh, kw, ho, wo), dtype=xp.dtype)
    for u in range(kh):
        for v in range(kw):
            cols[:, :, u, v] = xp[:, :, u:u + ho * sh:sh, v:v + wo * sw:sw]
    return cols.reshape(n, c * kh * kw, ho * wo), ho, wo


def _col2im3(cols3, n, c, h, w, kh, kw, sh, sw, ph, pw):
    """Adjoint of _im2col3: scatter-add columns back onto an (N,C,H,W) grid."""
    hp, wp = h + 2 * ph, w + 2 * pw
    ho = (hp - kh) // sh + 1
    wo = (wp - kw) // sw + 1
    cols6 = cols3.reshape(n, c, kh, kw, ho, wo)
    xp = np.zeros((n, c, hp, wp), dtype=cols3.dtype)
    for u in range(kh):
        for v in range(kw):
            xp[:, :, u:u + ho * sh:sh, v:v + wo * sw:sw] += cols6[:, :, u, v]
    if ph or pw:
        return xp[:, :, ph:ph + h, pw:pw + w]
    return xp


def _pad4(x, ph, pw):
    if ph or pw:
        return np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    return x


def _use_direct(kh, kw, stride):
    # Direct loops beat im2col once the column matrix is duplicated ~25x;
    # they require unit strides (all large-kernel layers here comply).
    return _kernels.HAVE_NUMBA and kh * kw >= 25 and stride == (1, 1)


def _conv2d_raw(x, kernel, stride, padding):
    """Ungraphed cross-correlation shared by forward and backward paths."""
    n = x.shape[0]
    co, _, kh, kw = kernel.shape
    xp = _pad4(x, *padding)
    ho = (xp.shape[2] - kh) // stride[0] + 1
    wo = (xp.shape[3] - kw) // stride[1] + 1
    if _use_direct(kh, kw, stride):
        return _kernels.direct_conv2d(xp, kernel, ho, wo, stride[0])
    cols3, ho, wo = _im2col3(xp, kh, kw, *stride)
    out3 = np.matmul(kernel.reshape(co, -1), cols3)
    return out3.reshape(n, co, ho, wo)


def conv2d(x, kernel, bias=None, stride=(1, 1), padding=(0, 0)):
    """Cross-correlation of NCHW input with an (O,I,Kh,Kw) kernel, zero padding."""
    x, kernel = _as_tensor(x), _as_tensor(kernel)
    bias = _as_tensor(bias) if bias is not None else None
    if x.data.ndim != 4 or kernel.data.ndim != 4:
        raise ShapeMismatch("conv2d expects 4-d input and kernel")
    n, ci, h, w = x.shape
    co, ci_k, kh, kw = kernel.shape
    if ci != ci_k:
        raise ShapeMismatch(f"conv2d: input has {ci} channels, kernel expects {ci_k}")
    if bias is not None and bias.shape != (co,):
        raise ShapeMismatch(f"conv2d: bias shape {bias.shape} != ({co},)")
    sh, sw = stride
    ph, pw = padding
    if h + 2 * ph < kh or w + 2 * pw < kw:
        raise ShapeMismatch("conv2d: kernel larger than padded input")

    direct = _use_direct(kh, kw, stride)
    xp = _pad4(x.data, ph, pw)
    ho = (xp.shape[2] - kh) // sh + 1
    wo = (xp.shape[3] - kw) // sw + 1
    cols3 = None
    if direct:
        data = _kernels.direct_conv2d(xp, kernel.data, ho, wo, sh)
    else:
        cols3, ho, wo = _im2col3(xp, kh, kw, sh, sw)
        data = np.matmul(kernel.data.reshape(co, -1), cols3).reshape(n, co, ho, wo)
    if bias is not None:
        data += bias.data[None, :, None, None]

    def bwd(g, acc):
        g3 = g.reshape(n, co, ho * wo)
        if kernel.requires_grad or kernel._backward is not None:
            if direct:
                acc(kernel, _kernels.direct_grad_kernel(xp, g, kernel.shape, sh))
            else:
                gk = np.matmul(g3, cols3.transpose(0, 2, 1)).sum(axis=0)
                acc(kernel, gk.reshape(kernel.shape))
        if bias is not None:
            acc(bias, g.sum(axis=(0, 2, 3)))
        if x.requires_grad or x._backward is not None:
            if (sh, sw) == (1, 1) and (direct or co < ci):
                # Full correlation with the flipped, channel-swapped kernel;
                # moves far less data than scattering C*kh*kw columns.
                kflip = np.ascontiguousarray(
                    kernel.data[:, :, ::-1, ::-1].transpose(1, 0, 2, 3))
                acc(x, _conv2d_raw(g, kflip, (1, 1),
                                   (kh - 1 - ph, kw - 1 - pw)))
            else:
                gcols3 = np.matmul(kernel.data.reshape(co, -1).T, g3)
                acc(x, _col2im3(gcols3, n, ci, h, w, kh, kw, sh, sw, ph, pw))

    parents = (x, kernel) if bias is None else (x, kernel, bias)
    return _make(data, parents, bwd)


def conv_transpose2d(x, kernel, bias=None, stride=(1, 1), padding=(0, 0)):
    """Transposed convolution: the adjoint of conv2d with the same geometry.

    The kernel is (Cin, Cout, Kh, Kw); an (N,Cin,H,W) input maps to
    (N, Cout, (H-1)*sh - 2*ph + Kh, (W-1)*sw - 2*pw + Kw).
    """
    x, kernel = _as_tensor(x), _as_tensor(kernel)
    bias = _as_tensor(bias) if bias is not None else None
    if x.data.ndim != 4 or kernel.data.ndim != 4:
        raise ShapeMismatch("conv_transpose2d expects 4-d input and kernel")
    n, ci, h, w = x.shape
    ci_k, co, kh, kw = kernel.shape
    if ci != ci_k:
        raise ShapeMismatch(
            f"conv_transpose2d: input has {ci} channels, kernel expects {ci_k}")
    if bias is not None and bias.shape != (co,):
        raise ShapeMismatch(f"conv_transpose2d: bias shape {bias.shape} != ({co},)")
    sh, sw = stride
    ph, pw = padding
    ho = (h - 1) * sh - 2 * ph + kh
    wo = (w - 1) * sw - 2 * pw + kw
    if ho < 1 or wo < 1:
        raise ShapeMismatch("conv_transpose2d: non-positive output size")

    wmat = kernel.data.reshape(ci, -1)  # (Cin, Cout*kh*kw)
    x3 = x.data.reshape(n, ci, h * w)
    cols3 = np.matmul(wmat.T, x3)
    data = _col2im3(cols3, n, co, ho, wo, kh, kw, sh, sw, ph, pw)
    if bias is not None:
        data += bias.data[None, :, None, None]

    def bwd(g, acc):
        gcols3, _, _ = _im2col3(_pad4(g, ph, pw), kh, kw, sh, sw)
        if x.requires_grad or x._backward is not None:
            acc(x, np.matmul(wmat, gcols3).reshape(n, ci, h, w))
        if kernel.requires_grad or kernel._backward is not None:
            gk = np.matmul(x3, gcols3.transpose(0, 2, 1)).sum(axis=0)
            acc(kernel, gk.reshape(kernel.shape))
        if bias is not None:
            acc(bias, g.sum(axis=(0, 2, 3)))

    parents = (x, kernel) if bias is None else (x, kernel, bias)
    return _make(data, parents, bwd)


def batch_norm(x, gamma, beta, running_mean, running_var, training,
               momentum=0.99, eps=1e-5):
    """Per-channel batch normalization over the N, H, W axes of an NCHW input.

    ``running_mean`` / ``running_var`` are plain float64 arrays updated
    in place in training mode (biased variance, running = momentum*running
    + (1-momentum)*batch) and read in eval mode.
    """
    x, gamma, beta = _as_tensor(x), _as_tensor(gamma), _as_tensor(beta)
    if x.data.ndim != 4:
        raise ShapeMismatch("batch_norm expects an NCHW input")
    c = x.shape[1]
    if gamma.shape != (c,) or beta.shape != (c,):
        raise ShapeMismatch(
            f"batch_norm: gamma/beta must have shape ({c},), got "
            f"{gamma.shape} and {beta.shape}")

    dt = x.data.dtype
    if training:
        mean = x.data.mean(axis=(0, 2, 3))
        var = x.data.var(axis=(0, 2, 3))
        running_mean *= momentum
        running_mean += (1.0 - momentum) * mean
        running_var *= momentum
        running_var += (1.0 - momentum) * var
    else:
        mean = running_mean
        var = running_var
    mean = np.asarray(mean, dtype=dt)
    inv_std = (1.0 / np.sqrt(var + eps)).astype(dt)
    xhat = (x.data - mean[None, :, None, None]) * inv_std[None, :, None, None]
    gam = gamma.data.astype(dt, copy=False)
    data = gam[None, :, None, None] * xhat \
        + beta.data.astype(dt, copy=False)[None, :, None, None]

    def bwd(g, acc):
        acc(beta, g.sum(axis=(0, 2, 3)))
        acc(gamma, (g * xhat).sum(axis=(0, 2, 3)))
        if x.requires_grad or x._backward is not None:
            gxh = g * gam[None, :, None, None]
            if training:
                m = gxh.mean(axis=(0, 2, 3))
                mx = (gxh * xhat).mean(axis=(0, 2, 3))
                gx = (gxh - m[None, :, None, None]
                      - xhat * mx[None, :, None, None]) * inv_std[None, :, None, None]
            else:
                gx = gxh * inv_std[None, :, None, None]
            acc(x, gx)

    return _make(data, (x, gamma, beta), bwd)


def cross_entropy(logits, target, ignore_id=255):
    """Mean softmax cross-entropy over non-ignored cells of a label raster.

    ``logits`` is (C,H,W) or (N,C,H,W); ``target`` is an integer class-id
    raster of matching spatial shape, or a one-hot float raster shaped like
    the logits (all-zero cells count as ignored). Stabilized by
    max-subtraction.
    """
    from .errors import BadClassId, EmptyValidSet

    logits = _as_tensor(logits)
    squeeze = logits.data.ndim == 3
    z = logits.data[None] if squeeze else logits.data
    if z.ndim != 4:
        raise ShapeMismatch("cross_entropy expects (C,H,W) or (N,C,H,W) logits")
    n, c, h, w = z.shape

    target = np.asarray(target)
    if target.shape == logits.data.shape and target.dtype.kind == "f":
        # one-hot raster: all-zero columns are ignored cells
        onehot = target[None] if squeeze else target
        ids = np.argmax(onehot, axis=1).astype(np.int64)
        ignore_mask = onehot.sum(axis=1) == 0
    else:
        if squeeze and target.ndim == 2:
            target = target[None]
        ids = np.asarray(target, dtype=np.int64)
        if ids.shape != (n, h, w):
            raise ShapeMismatch(
                f"cross_entropy: target shape {tuple(target.shape)} does not "
                f"match logits {tuple(logits.data.shape)}")
        ignore_mask = ids == ignore_id
        bad = (~ignore_mask) & ((ids < 0) | (ids >= c))
        if bad.any():
            raise BadClassId(f"class id {int(ids[bad][0])} outside [0, {c})")
        ids = np.where(ignore_mask, 0, ids)

    valid = ~ignore_mask
    n_valid = int(valid.sum())
    if n_valid == 0:
        raise EmptyValidSet("cross_entropy: every cell is ignored")

    shifted = z - z.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1))
    picked = np.take_along_axis(shifted, ids[:, None], axis=1)[:, 0]
    data = ((lse - picked) * valid).sum() / n_valid

    def bwd(g, acc):
        soft = np.exp(shifted - lse[:, None])
        np.put_along_axis(
            soft, ids[:, None],
            np.take_along_axis(soft, ids[:, None], axis=1) - 1.0, axis=1)
        soft *= ((valid / n_valid)[:, None]).astype(soft.dtype)
        gl = soft.dtype.type(g) * soft
        acc(logits, gl[0] if squeeze else gl)

    return _make(np.asarray(data, dtype=z.dtype), (logits,), bwd)


# --- backward pass ----------------------------------------------------------

def backward(loss):
    """Populate .grad on every tracked leaf reachable from a scalar loss.

    Intermediate gradients live in a scratch map for the duration of the
    call; only leaves (tensors with no parents) with requires_grad keep
    their accumulated .grad, so repeated calls add up.
    """
    if not isinstance(loss, Tensor):
        raise NonScalarLoss("backward expects a Tensor")
    if loss.data.shape != ():
        raise NonScalarLoss(f"loss must be scalar, got shape {loss.data.shape}")

    topo = []
    visited = set()
    stack = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in visited:
                stack.append((p, False))

    grads = {id(loss): np.ones((), dtype=loss.data.dtype)}

    def acc(t, g):
        if not (t.requires_grad or t._backward is not None):
            return
        key = id(t)
        if key in grads:
            grads[key] = grads[key] + g
        else:
            grads[key] = g

    for node in reversed(topo):
        if node._backward is None:
            continue
        g = grads.pop(id(node), None)
        if g is None:
            continue
        node._backward(np.asarray(g), acc)

    for node in topo:
        if node._backward is None and node.requires_grad:
            g = grads.get(id(node))
            if g is None:
                continue
            g = np.broadcast_to(np.asarray(g), node.shape)
            if node.grad is None:
                node.grad = np.array(g, copy=True)
            else:
                node.grad = node.grad + g


# --- Adam -------------------------------------------------------------------

@dataclass
class AdamState:
    """First/second moment buffers and hyperparameters of one Adam run."""

    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)


def adam_step(params, grads, state):
    """One Adam update; returns the new parameter arrays, mutating state.

    m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2;
    p <- p - lr * m_hat / (sqrt(v_hat) + eps)   with bias-corrected moments.
    All accumulation happens in float64.
    """
    params = list(params)
    grads = list(grads)
    if len(params) != len(grads):
        raise ShapeMismatch("adam_step: params and grads differ in length")
    if not state.m:
        state.m = [np.zeros(np.shape(p), dtype=np.float64) for p in params]
        state.v = [np.zeros(np.shape(p), dtype=np.float64) for p in params]
    state.t += 1
    c1 = 1.0 - state.beta1 ** state.t
    c2 = 1.0 - state.beta2 ** state.t
    out = []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        p = np.asarray(p, dtype=np.float64)
        g = np.zeros_like(p) if g is None else np.asarray(g, dtype=np.float64)
        if g.shape != p.shape or m.shape != p.shape:
            raise ShapeMismatch(
                f"adam_step: shapes differ (param {p.shape}, grad {g.shape})")
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        out.append(p - state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps))
    return out


class Adam:
    """Steps a list of parameter Tensors in place.

    Master copies of the parameters live in float64; float32 parameter
    tensors receive a cast of the master value after each step.
    """

    def __init__(self, params, lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.state = AdamState(lr=lr, beta1=beta1, beta2=beta2, eps=eps)
        self._master = [p.data.astype(np.float64) for p in self.params]

    def step(self):
        self._master = adam_step(self._master,
                                 [p.grad for p in self.params], self.state)
        for p, mval in zip(self.params, self._master):
            p.data = mval.astype(p.data.dtype, copy=False)

    def zero_grad(self):
        for p in self.params:
            p.grad = None


# --- LWT named-tensor files ---------------------------------------------------

def save_tensors(path, tensors):
    """Write an ordered {name: array} mapping as an LWT file (float32 data)."""
    with open(path, "wb") as f:
        f.write(LWT_MAGIC)
        f.write(struct.pack("<I", len(tensors)))
        for name, arr in tensors.items():
            arr = np.asarray(arr)
            enc = name.encode("utf-8")
            f.write(struct.pack("<H", len(enc)))
            f.write(enc)
            f.write(struct.pack("<B", arr.ndim))
            for d in arr.shape:
                f.write(struct.pack("<I", d))
            f.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load_tensors(path):
    """Read an LWT file back into an ordered {name: float64 array} mapping."""
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < 8 or blob[:4] != LWT_MAGIC:
        raise CorruptFile(f"{path}: not an LWT file")
    (count,) = struct.unpack_from("<I", blob, 4)
    off = 8
    out = {}
    try:
        for _ in range(count):
            (nlen,) = struct.unpack_from("<H", blob, off)
            off += 2
            name = blob[off:off + nlen].decode("utf-8")
            if len(blob[off:off + nlen]) != nlen:
                raise CorruptFile(f"{path}: truncated tensor name")
            off += nlen
            (rank,) = struct.unpack_from("<B", blob, off)
            off += 1
            dims = struct.unpack_from(f"<{rank}I", blob, off)
            off += 4 * rank
            n = int(np.prod(dims)) if rank else 1
            raw = blob[off:off + 4 * n]
            if len(raw) != 4 * n:
                raise CorruptFile(f"{path}: truncated data for tensor {name!r}")
            off += 4 * n
            out[name] = np.frombuffer(raw, dtype="<f4").reshape(dims).astype(np.float64)
    except struct.error as e:
        raise CorruptFile(f"{path}: truncated header ({e})") from None
    if off != len(blob):
        raise CorruptFile(f"{path}: {len(blob) - off} trailing bytes")
    return out
