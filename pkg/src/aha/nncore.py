"""Minimal numeric substrate: dense and convolutional layers with hand-derived
gradients, Adam, top-k masking, MSE, and a central-difference gradient checker.

Everything here is plain numpy.  Layers are 1-2 deep with local losses, so
gradients are written out by hand and verified against finite differences
instead of pulling in an autodiff framework.  Layer parameters are float32 by
default; gradient checks construct float64 instances.
"""

from __future__ import annotations

from typing import Callable, Mapping

import numpy as np

ACTIVATIONS = ("identity", "sigmoid", "leaky_relu")

LEAKY_SLOPE = 0.01


def _uniform_init(rng: np.random.Generator, shape, fan_in: int, dtype) -> np.ndarray:
    limit = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


def sigmoid(z: np.ndarray) -> np.ndarray:
    # Split by sign to avoid overflow in exp for large |z|.
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _apply_activation(name: str, z: np.ndarray) -> np.ndarray:
    if name == "identity":
        return z
    if name == "sigmoid":
        return sigmoid(z)
    if name == "leaky_relu":
        return np.where(z > 0, z, LEAKY_SLOPE * z)
    raise ValueError(f"unknown activation {name!r}")


def _activation_grad(name: str, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    """d activation / d z, using the cached output `a` where convenient."""
    if name == "identity":
        return np.ones_like(z)
    if name == "sigmoid":
        return a * (1.0 - a)
    if name == "leaky_relu":
        return np.where(z > 0, 1.0, LEAKY_SLOPE).astype(z.dtype)
    raise ValueError(f"unknown activation {name!r}")


class DenseLayer:
    """Fully connected layer: activation(W @ x + b).

    weights has shape [n_out, n_in]; forward accepts a single vector [n_in]
    or a batch [B, n_in].
    """

    def __init__(self, n_in: int, n_out: int, activation: str = "identity",
                 rng: np.random.Generator | None = None, dtype=np.float32):
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        rng = rng or np.random.default_rng()
        self.n_in = int(n_in)
        self.n_out = int(n_out)
        self.activation = activation
        self.weights = _uniform_init(rng, (n_out, n_in), n_in, dtype)
        self.bias = np.zeros(n_out, dtype=dtype)

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Forward pass without caching; convenience for inference."""
        a, _ = self.forward(x)
        return a

    def forward(self, x: np.ndarray):
        """Forward pass returning (activations, cache for backward)."""
        x = np.asarray(x)
        single = x.ndim == 1
        xb = x[None, :] if single else x
        if xb.shape[1] != self.n_in:
            raise ValueError(
                f"input width {xb.shape[1]} does not match layer n_in {self.n_in}")
        z = xb @ self.weights.T + self.bias
        a = _apply_activation(self.activation, z)
        cache = (xb, z, a)
        return (a[0] if single else a), cache

    def backward(self, cache, d_a: np.ndarray):
        """Gradients given d loss / d activations.

        Returns ({"weights": dW, "bias": db}, d_input).  d_a must match the
        batched activation shape from forward.
        """
        xb, z, a = cache
        d_a = np.asarray(d_a)
        if d_a.ndim == 1:
            d_a = d_a[None, :]
        dz = d_a * _activation_grad(self.activation, z, a)
        grads = {"weights": dz.T @ xb, "bias": dz.sum(axis=0)}
        dx = dz @ self.weights
        return grads, dx

    def params(self) -> dict[str, np.ndarray]:
        return {"weights": self.weights, "bias": self.bias}


def affine_apply(layer: DenseLayer, x: np.ndarray) -> np.ndarray:
    """Apply a dense layer to a vector or batch."""
    return layer.apply(x)


def im2col(x: np.ndarray, k: int, stride: int):
    """Extract k*k patches at the given stride from a batch of 2-D images.

    x: [B, H, W] -> (cols [B, P, k*k], (out_h, out_w)) with P = out_h * out_w
    positions in row-major order.  cols is a copy, safe to mutate.
    """
    b, h, w = x.shape
    win = np.lib.stride_tricks.sliding_window_view(x, (k, k), axis=(1, 2))
    win = win[:, ::stride, ::stride]
    oh, ow = win.shape[1], win.shape[2]
    return np.ascontiguousarray(win.reshape(b, oh * ow, k * k)), (oh, ow)


def col2im(cols: np.ndarray, out_shape, k: int, stride: int) -> np.ndarray:
    """Scatter-add patch columns back to image space (transpose of im2col).

    cols: [B, P, k*k]; out_shape: (B, H, W).  Overlapping patches accumulate.
    """
    b, h, w = out_shape
    oh = (h - k) // stride + 1
    ow = (w - k) // stride + 1
    m = cols.reshape(b, oh, ow, k, k)
    out = np.zeros(out_shape, dtype=cols.dtype)
    for i in range(k):
        for j in range(k):
            out[:, i:i + stride * oh:stride, j:j + stride * ow:stride] += m[:, :, :, i, j]
    return out


class ConvLayer:
    """Single-channel valid convolution: kernels [F, k, k], stride s.

    Output spatial dims are floor((in - k) / s) + 1 per axis.  The layer is
    linear (no activation); callers gate/sparsify the pre-activations.
    """

    def __init__(self, filters: int, kernel_size: int, stride: int,
                 rng: np.random.Generator | None = None, dtype=np.float32):
        if kernel_size < 1 or stride < 1:
            raise ValueError("kernel size and stride must be positive")
        rng = rng or np.random.default_rng()
        self.filters = int(filters)
        self.kernel_size = int(kernel_size)
        self.stride = int(stride)
        fan_in = kernel_size * kernel_size
        self.kernels = _uniform_init(rng, (filters, fan_in), fan_in, dtype)
        self.bias = np.zeros(filters, dtype=dtype)

    def out_spatial(self, h: int, w: int) -> tuple[int, int]:
        k, s = self.kernel_size, self.stride
        return (h - k) // s + 1, (w - k) // s + 1

    def forward(self, x: np.ndarray):
        """x: [B, H, W] -> pre-activations z [B, P, F] plus cache.

        P indexes conv positions row-major; reshape to [B, F, oh, ow] with
        `to_maps` when spatial layout is needed.
        """
        x = np.asarray(x)
        patches, (oh, ow) = im2col(x, self.kernel_size, self.stride)
        z = patches @ self.kernels.T + self.bias
        return z, (patches, x.shape, (oh, ow))

    def to_maps(self, z: np.ndarray, oh: int, ow: int) -> np.ndarray:
        b = z.shape[0]
        return z.reshape(b, oh, ow, self.filters).transpose(0, 3, 1, 2)

    def backward(self, cache, dz: np.ndarray):
        """Gradients of the conv pre-activations.

        dz: [B, P, F].  Returns ({"kernels": dK, "bias": db}, dx).
        """
        patches, x_shape, _ = cache
        grads = {
            "kernels": np.einsum("bpf,bpk->fk", dz, patches),
            "bias": dz.sum(axis=(0, 1)),
        }
        dcols = dz @ self.kernels
        dx = col2im(dcols, x_shape, self.kernel_size, self.stride)
        return grads, dx

    def params(self) -> dict[str, np.ndarray]:
        return {"kernels": self.kernels, "bias": self.bias}


class Adam:
    """Bias-corrected Adam over named parameter arrays.

    Moment accumulators are allocated lazily per parameter name on first
    step; reset() zeroes them and the step counter.
    """

    def __init__(self, lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self._scratch: dict[str, np.ndarray] = {}

    def reset(self) -> None:
        self.t = 0
        self.m.clear()
        self.v.clear()
        self._scratch.clear()

    def step(self, params: Mapping[str, np.ndarray],
             grads: Mapping[str, np.ndarray]) -> None:
        """Update params in place from grads (same keys, same shapes).

        The bias corrections fold into scalars: lr_t = lr * sqrt(bc2) / bc1
        and eps_t = eps * sqrt(bc2), so p -= lr_t * m / (sqrt(v) + eps_t) is
        the standard bias-corrected update with two fewer array passes.
        """
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        lr_t = self.lr * np.sqrt(bc2) / bc1
        eps_t = self.eps * np.sqrt(bc2)
        for name, p in params.items():
            g = grads[name]
            if not np.all(np.isfinite(g)):
                raise FloatingPointError(f"non-finite gradient for parameter {name!r}")
            if name not in self.m:
                self.m[name] = np.zeros_like(p)
                self.v[name] = np.zeros_like(p)
                self._scratch[name] = np.empty_like(p)
            m = self.m[name]
            v = self.v[name]
            s = self._scratch[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            np.multiply(g, g, out=s)
            s *= 1.0 - self.beta2
            v += s
            np.sqrt(v, out=s)
            s += eps_t
            np.divide(m, s, out=s)
            s *= lr_t
            p -= s


def adam_step(state: Adam, params: Mapping[str, np.ndarray],
              grads: Mapping[str, np.ndarray]) -> None:
    """Functional spelling of Adam.step (updates params/state in place)."""
    state.step(params, grads)


def top_k_mask(x: np.ndarray, k: int) -> np.ndarray:
    """Binary mask with exactly k ones at the k largest entries of x.

    Ties break toward the lowest index.  Works on the last axis for any
    leading batch shape.
    """
    x = np.asarray(x)
    n = x.shape[-1]
    if not 1 <= k <= n:
        raise ValueError(f"k={k} out of range for length {n}")
    # Stable sort on the negated values puts equal values in index order.
    order = np.argsort(-x, axis=-1, kind="stable")
    mask = np.zeros(x.shape, dtype=np.uint8)
    np.put_along_axis(mask, order[..., :k], 1, axis=-1)
    return mask


def mse(a: np.ndarray, b: np.ndarray) -> float:
    """Mean of squared elementwise differences."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    d = a.astype(np.float64) - b.astype(np.float64)
    return float(np.mean(d * d))


def finite_diff_check(loss_fn: Callable[[], float],
                      params: Mapping[str, np.ndarray],
                      analytic_grads: Mapping[str, np.ndarray],
                      h: float = 1e-5) -> float:
    """Central-difference check of analytic gradients.

    loss_fn is a closure over the (float64) arrays in params; each parameter
    entry is perturbed by +-h in place and the loss re-evaluated.  Returns
    the max over all entries of |g_num - g_ana| / max(1, |g_num|, |g_ana|).
    """
    worst = 0.0
    for name, p in params.items():
        ga = np.asarray(analytic_grads[name], dtype=np.float64)
        flat = p.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            lp = loss_fn()
            flat[i] = orig - h
            lm = loss_fn()
            flat[i] = orig
            gn = (lp - lm) / (2.0 * h)
            ga_i = ga.reshape(-1)[i]
            rel = abs(gn - ga_i) / max(1.0, abs(gn), abs(ga_i))
            if rel > worst:
                worst = rel
    return worst
