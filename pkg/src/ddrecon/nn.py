"""Differentiable network building blocks on top of the autograd tape.

Convolution lowers to one GEMM against a transposed column matrix; the
columns are cached on the tape node so the weight gradient reuses them.
Loops run over kernel offsets only, everything else is vectorized.
"""

import numpy as np
from scipy.special import expit

from .autograd import Tensor, record
from .errors import ShapeMismatchError


def _im2colT(x, kh, kw, stride, padding):
    """Transposed column matrix (Cin*kh*kw, N*Ho*Wo) plus output dims.

    Built per kernel offset from strided slices whose innermost runs are
    contiguous, which copies far faster than a windowed gather.
    """
    n, cin, h, w = x.shape
    if padding:
        x = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    ho = (h + 2 * padding - kh) // stride + 1
    wo = (w + 2 * padding - kw) // stride + 1
    colt = np.empty((cin * kh * kw, n * ho * wo))
    view = colt.reshape(cin, kh, kw, n, ho, wo)
    for di in range(kh):
        for dj in range(kw):
            sl = x[:, :, di:di + stride * ho:stride, dj:dj + stride * wo:stride]
            view[:, di, dj] = sl.transpose(1, 0, 2, 3)
    return colt, ho, wo


def _conv_raw(x, weight, stride, padding):
    """Bare correlation returning (out, colT, ho, wo); out is (N, Cout, Ho, Wo)."""
    n = x.shape[0]
    cout, cin, kh, kw = weight.shape
    colt, ho, wo = _im2colT(x, kh, kw, stride, padding)
    out = weight.reshape(cout, -1) @ colt
    out = np.ascontiguousarray(out.reshape(cout, n, ho, wo).transpose(1, 0, 2, 3))
    return out, colt, ho, wo


def conv2d(x, weight, bias, stride=1, padding=0):
    """2D cross-correlation with odd kernels.

    x: (N, Cin, H, W); weight: (Cout, Cin, kh, kw); bias: (Cout,).
    """
    n, cin, h, w = x.data.shape
    cout, cin_w, kh, kw = weight.data.shape
    if cin != cin_w:
        raise ShapeMismatchError(
            f"conv2d: input has {cin} channels but weight expects {cin_w}"
        )
    if kh % 2 == 0 or kw % 2 == 0:
        raise ShapeMismatchError(f"conv2d: kernel dims must be odd, got {kh}x{kw}")
    if bias.data.shape != (cout,):
        raise ShapeMismatchError(
            f"conv2d: bias shape {bias.data.shape} does not match {cout} output channels"
        )
    if padding < 0 or stride < 1:
        raise ShapeMismatchError("conv2d: padding must be >= 0 and stride >= 1")
    if (h + 2 * padding - kh) % stride or (w + 2 * padding - kw) % stride:
        raise ShapeMismatchError(
            f"conv2d: spatial dims {h}x{w} with padding {padding}, kernel {kh}x{kw}, "
            f"stride {stride} leave a remainder"
        )

    out, colt, ho, wo = _conv_raw(x.data, weight.data, stride, padding)
    out += bias.data[None, :, None, None]

    def bwd(g):
        gmat = np.ascontiguousarray(g.transpose(1, 0, 2, 3)).reshape(cout, n * ho * wo)
        grad_w = (gmat @ colt.T).reshape(cout, cin, kh, kw)
        grad_b = gmat.sum(axis=1)
        if stride == 1 and padding <= kh - 1 and padding <= kw - 1:
            # Full correlation with the flipped, channel-swapped kernel.
            wflip = np.ascontiguousarray(
                weight.data.transpose(1, 0, 2, 3)[:, :, ::-1, ::-1]
            )
            grad_x = _conv_raw(g, wflip, 1, kh - 1 - padding)[0]
        else:
            # Scatter columns back through the kernel offsets.
            gcol = (gmat.T @ weight.data.reshape(cout, -1)).reshape(
                n, ho, wo, cin, kh, kw
            )
            hp, wp = h + 2 * padding, w + 2 * padding
            gxp = np.zeros((n, hp, wp, cin))
            for di in range(kh):
                for dj in range(kw):
                    gxp[:, di:di + stride * ho:stride, dj:dj + stride * wo:stride, :] += \
                        gcol[:, :, :, :, di, dj]
            gxp = gxp.transpose(0, 3, 1, 2)
            grad_x = gxp[:, :, padding:padding + h, padding:padding + w].copy()
        return grad_x, grad_w, grad_b

    return record(out, (x, weight, bias), bwd)


def fully_connected(x, weight, bias):
    """Affine map: x (N, Cin) -> (N, Cout) with weight (Cout, Cin)."""
    if x.data.ndim != 2 or weight.data.ndim != 2:
        raise ShapeMismatchError(
            f"fully_connected: expected 2-d operands, got {x.data.shape} and {weight.data.shape}"
        )
    if x.data.shape[1] != weight.data.shape[1]:
        raise ShapeMismatchError(
            f"fully_connected: input width {x.data.shape[1]} vs weight width {weight.data.shape[1]}"
        )
    if bias.data.shape != (weight.data.shape[0],):
        raise ShapeMismatchError(
            f"fully_connected: bias shape {bias.data.shape} vs {weight.data.shape[0]} outputs"
        )
    out = x.data @ weight.data.T + bias.data

    def bwd(g):
        return g @ weight.data, g.T @ x.data, g.sum(axis=0)

    return record(out, (x, weight, bias), bwd)


def relu(x):
    """Elementwise max(x, 0); subgradient at 0 is 0."""
    mask = x.data > 0

    def bwd(g):
        return (g * mask,)

    return record(x.data * mask, (x,), bwd)


def sigmoid(x):
    out = expit(x.data)

    def bwd(g):
        return (g * out * (1.0 - out),)

    return record(out, (x,), bwd)


def global_avg_pool(x):
    """Spatial mean per channel: (N, C, H, W) -> (N, C)."""
    n, c, h, w = x.data.shape
    inv = 1.0 / (h * w)

    def bwd(g):
        return (np.broadcast_to(g[:, :, None, None], (n, c, h, w)) * inv,)

    return record(x.data.mean(axis=(2, 3)), (x,), bwd)


def avg_pool2(x):
    """2x2 average pooling with stride 2."""
    n, c, h, w = x.data.shape
    if h % 2 or w % 2:
        raise ShapeMismatchError(f"avg_pool2: spatial dims {h}x{w} must be even")
    out = x.data.reshape(n, c, h // 2, 2, w // 2, 2).mean(axis=(3, 5))

    def bwd(g):
        return (np.repeat(np.repeat(g, 2, axis=2), 2, axis=3) * 0.25,)

    return record(out, (x,), bwd)


def upsample_nearest2(x):
    """Nearest-neighbour 2x upsampling."""
    out = np.repeat(np.repeat(x.data, 2, axis=2), 2, axis=3)
    n, c, h, w = x.data.shape

    def bwd(g):
        return (g.reshape(n, c, h, 2, w, 2).sum(axis=(3, 5)),)

    return record(out, (x,), bwd)


def concat_channels(a, b):
    """Concatenate along the channel axis."""
    if a.data.shape[0] != b.data.shape[0] or a.data.shape[2:] != b.data.shape[2:]:
        raise ShapeMismatchError(
            f"concat_channels: incompatible shapes {a.data.shape} and {b.data.shape}"
        )
    ca = a.data.shape[1]

    def bwd(g):
        return g[:, :ca].copy(), g[:, ca:].copy()

    return record(np.concatenate([a.data, b.data], axis=1), (a, b), bwd)


def channelwise_scale(x, weights):
    """Multiply every channel by its own scalar: weights is (N, C)."""
    n, c = x.data.shape[:2]
    if weights.data.shape != (n, c):
        raise ShapeMismatchError(
            f"channelwise_scale: weights shape {weights.data.shape} vs batch/channels ({n}, {c})"
        )
    wexp = weights.data[:, :, None, None]

    def bwd(g):
        return g * wexp, (g * x.data).sum(axis=(2, 3))

    return record(x.data * wexp, (x, weights), bwd)


def pointwise_scale(x, spatial_map):
    """Multiply every spatial location by its own scalar: map is (N, 1, H, W)."""
    n, _, h, w = x.data.shape
    if spatial_map.data.shape != (n, 1, h, w):
        raise ShapeMismatchError(
            f"pointwise_scale: map shape {spatial_map.data.shape} vs expected ({n}, 1, {h}, {w})"
        )

    def bwd(g):
        return g * spatial_map.data, (g * x.data).sum(axis=1, keepdims=True)

    return record(x.data * spatial_map.data, (x, spatial_map), bwd)


def uniform_init(rng, shape, fan_in):
    """Uniform weights in +/- sqrt(1/fan_in)."""
    limit = float(np.sqrt(1.0 / fan_in))
    return rng.uniform(-limit, limit, size=shape)


class Module:
    """Minimal container tracking parameters and child modules by name."""

    def __init__(self):
        object.__setattr__(self, "_params", {})
        object.__setattr__(self, "_modules", {})

    def __setattr__(self, name, value):
        if isinstance(value, Tensor):
            self._params[name] = value
        elif isinstance(value, Module):
            self._modules[name] = value
        object.__setattr__(self, name, value)

    def named_parameters(self, prefix=""):
        for name, p in self._params.items():
            yield prefix + name, p
        for name, m in self._modules.items():
            yield from m.named_parameters(prefix + name + ".")

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None

    def state_arrays(self):
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_arrays(self, arrays):
        for name, p in self.named_parameters():
            if name not in arrays:
                raise ShapeMismatchError(f"missing parameter '{name}' in state")
            arr = np.asarray(arrays[name], dtype=np.float64)
            if arr.shape != p.data.shape:
                raise ShapeMismatchError(
                    f"parameter '{name}': stored shape {arr.shape} vs model shape {p.data.shape}"
                )
            p.data = arr.copy()

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


class ModuleList(Module):
    def __init__(self, modules=()):
        super().__init__()
        self._items = []
        for m in modules:
            self.append(m)

    def append(self, module):
        setattr(self, str(len(self._items)), module)
        self._items.append(module)

    def __iter__(self):
        return iter(self._items)

    def __len__(self):
        return len(self._items)

    def __getitem__(self, i):
        return self._items[i]


class Conv2d(Module):
    def __init__(self, in_channels, out_channels, kernel_size, padding, rng):
        super().__init__()
        fan_in = in_channels * kernel_size * kernel_size
        self.weight = Tensor(
            uniform_init(rng, (out_channels, in_channels, kernel_size, kernel_size), fan_in),
            requires_grad=True,
        )
        self.bias = Tensor(uniform_init(rng, (out_channels,), fan_in), requires_grad=True)
        self.padding = padding

    def forward(self, x):
        return conv2d(x, self.weight, self.bias, stride=1, padding=self.padding)


class Linear(Module):
    def __init__(self, in_features, out_features, rng):
        super().__init__()
        self.weight = Tensor(
            uniform_init(rng, (out_features, in_features), in_features), requires_grad=True
        )
        self.bias = Tensor(uniform_init(rng, (out_features,), in_features), requires_grad=True)

    def forward(self, x):
        return fully_connected(x, self.weight, self.bias)
