"""Slow-learning vision component: a single-layer convolutional k-sparse
autoencoder with an interest filter, smoothing, and max pooling.

Pretraining minimizes reconstruction MSE through a tied-weight transposed
convolution, with the k highest (relu'd) activations per conv position kept
per sample.  At encode time the sparse conv activations are gated by a
saliency mask computed from difference-of-Gaussians responses, box-smoothed
per channel, and max-pooled.  After pretraining the component is frozen;
encoding never mutates it.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .nncore import Adam, ConvLayer, col2im, im2col, top_k_mask

CHECKPOINT_MAGIC = "AHALTM1"


@dataclass(frozen=True)
class InterestConfig:
    """Difference-of-Gaussians saliency settings."""

    sigma1: float = 0.5
    sigma2: float = 1.0
    kernel_size: int = 7
    nms_size: int = 3
    top_m: int = 20  # features kept per polarity

    def __post_init__(self):
        if self.sigma1 >= self.sigma2:
            raise ValueError("need sigma1 < sigma2")
        if self.kernel_size % 2 == 0:
            raise ValueError("DoG kernel size must be odd")


@dataclass(frozen=True)
class LtmConfig:
    filters: int = 121
    kernel_size: int = 10
    stride: int = 5
    k_active: int = 4  # conv filters kept per position
    interest: InterestConfig = field(default_factory=InterestConfig)
    smooth_size: int = 3
    pool_size: int = 2
    epochs: int = 10
    lr: float = 1e-3
    batch_size: int = 64

    def __post_init__(self):
        for name in ("filters", "kernel_size", "stride", "k_active",
                     "smooth_size", "pool_size", "epochs", "batch_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.k_active > self.filters:
            raise ValueError("k_active cannot exceed filter count")


def dog_kernel(sigma1: float, sigma2: float, size: int) -> np.ndarray:
    """Difference of two unit-sum Gaussians; elements sum to ~0."""
    if size % 2 == 0:
        raise ValueError("kernel size must be odd")
    if sigma1 > sigma2:
        raise ValueError("need sigma1 <= sigma2")
    half = size // 2
    yy, xx = np.mgrid[-half:half + 1, -half:half + 1]
    r2 = (yy ** 2 + xx ** 2).astype(np.float64)

    def gauss(sigma):
        g = np.exp(-r2 / (2.0 * sigma * sigma))
        return g / g.sum()

    return gauss(sigma1) - gauss(sigma2)


def conv2d_same(image: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Zero-padded same-size 2-D correlation (float64)."""
    k = kernel.shape[0]
    half = k // 2
    padded = np.pad(np.asarray(image, dtype=np.float64), half)
    cols, (oh, ow) = im2col(padded[None], k, 1)
    out = cols[0] @ kernel.reshape(-1)
    return out.reshape(oh, ow)


def _local_maxima(response: np.ndarray, window: int) -> np.ndarray:
    """True where the value equals the max of its window neighborhood."""
    half = window // 2
    padded = np.pad(response, half, constant_values=-np.inf)
    view = np.lib.stride_tricks.sliding_window_view(padded, (window, window))
    return response >= view.max(axis=(2, 3))


def _top_m_positions(scores: np.ndarray, m: int) -> np.ndarray:
    """Mask of up to m best strictly-positive scores, ties to lowest index."""
    flat = scores.reshape(-1)
    eligible = flat > 0.0
    mask = np.zeros(flat.shape, dtype=np.uint8)
    n_take = min(m, int(eligible.sum()))
    if n_take:
        order = np.argsort(-np.where(eligible, flat, -np.inf), kind="stable")
        mask[order[:n_take]] = 1
    return mask.reshape(scores.shape)


def interest_mask(image: np.ndarray, cfg: LtmConfig) -> np.ndarray:
    """Binary saliency mask at the conv-grid resolution.

    Positive and negative DoG responses are non-maxima suppressed per
    polarity; the strongest (strictly positive) top_m survivors per polarity
    are merged by union, then reduced to the conv grid by taking the max over
    each conv position's receptive field.  A featureless image yields an
    all-zero mask.
    """
    icfg = cfg.interest
    dog = dog_kernel(icfg.sigma1, icfg.sigma2, icfg.kernel_size)
    response = conv2d_same(image, dog)
    merged = np.zeros(response.shape, dtype=np.uint8)
    for polarity in (response, -response):
        survivors = _local_maxima(polarity, icfg.nms_size)
        scores = np.where(survivors, polarity, 0.0)
        merged |= _top_m_positions(scores, icfg.top_m)
    h, w = image.shape
    oh = (h - cfg.kernel_size) // cfg.stride + 1
    ow = (w - cfg.kernel_size) // cfg.stride + 1
    cell = np.zeros((oh, ow), dtype=np.uint8)
    k, s = cfg.kernel_size, cfg.stride
    for p in range(oh):
        for q in range(ow):
            cell[p, q] = merged[p * s:p * s + k, q * s:q * s + k].max()
    return cell


def _box_smooth(maps: np.ndarray, size: int) -> np.ndarray:
    """Per-channel same-size box filter over [..., H, W]."""
    half = size // 2
    lead = maps.shape[:-2]
    h, w = maps.shape[-2:]
    flat = maps.reshape(-1, h, w)
    padded = np.pad(flat, ((0, 0), (half, half), (half, half)))
    view = np.lib.stride_tricks.sliding_window_view(padded, (size, size), axis=(1, 2))
    return view.mean(axis=(3, 4)).reshape(*lead, h, w).astype(maps.dtype)


def _max_pool(maps: np.ndarray, size: int) -> np.ndarray:
    """Non-overlapping max pool over [..., H, W], floor semantics."""
    h, w = maps.shape[-2:]
    oh, ow = h // size, w // size
    trimmed = maps[..., :oh * size, :ow * size]
    shaped = trimmed.reshape(*maps.shape[:-2], oh, size, ow, size)
    return shaped.max(axis=(-3, -1))


class VisionLtm:
    """Pretrained (then frozen) sparse conv autoencoder plus encode pipeline."""

    def __init__(self, config: LtmConfig, image_size: int,
                 rng: np.random.Generator | None = None):
        self.config = config
        self.image_size = int(image_size)
        self.conv = ConvLayer(config.filters, config.kernel_size, config.stride,
                              rng=rng or np.random.default_rng())
        self.decode_bias = np.array(0.0, dtype=np.float32)
        self.frozen = False
        oh, ow = self.conv.out_spatial(image_size, image_size)
        self.conv_grid = (oh, ow)

    # -- geometry ---------------------------------------------------------

    @property
    def encoding_shape(self) -> tuple[int, int, int]:
        oh, ow = self.conv_grid
        p = self.config.pool_size
        return (self.config.filters, oh // p, ow // p)

    @property
    def encoding_size(self) -> int:
        return int(np.prod(self.encoding_shape))

    def freeze(self) -> "VisionLtm":
        self.frozen = True
        return self

    # -- training-path forward/backward ------------------------------------

    def sparse_hidden(self, images: np.ndarray):
        """Conv + relu + per-position top-k; returns (hidden [B,P,F], cache)."""
        x = np.asarray(images, dtype=np.float32)
        z, cache = self.conv.forward(x)
        relu_gate = z > 0
        active = np.where(relu_gate, z, 0.0)
        mask = top_k_mask(active, self.config.k_active)
        hidden = active * mask
        return hidden, (cache, relu_gate, mask, x)

    def decode(self, hidden: np.ndarray, image_shape) -> np.ndarray:
        """Tied-weight transposed conv back to image space plus scalar bias."""
        cols = hidden @ self.conv.kernels
        return col2im(cols, image_shape, self.config.kernel_size,
                      self.config.stride) + self.decode_bias

    def reconstruction_loss_and_grads(self, images: np.ndarray,
                                      freeze_gates_from=None):
        """MSE reconstruction loss and hand-derived gradients.

        freeze_gates_from: optional (relu_gate, mask) pair reused instead of
        recomputing the discrete selections; gradient checks need the loss
        surface locally smooth in the parameters.
        """
        x = np.asarray(images, dtype=self.conv.kernels.dtype)
        z, cache = self.conv.forward(x)
        if freeze_gates_from is None:
            relu_gate = z > 0
            active = np.where(relu_gate, z, 0.0)
            mask = top_k_mask(active, self.config.k_active)
        else:
            relu_gate, mask = freeze_gates_from
        gate = relu_gate * mask
        hidden = np.where(gate, z, 0.0)
        recon = self.decode(hidden, x.shape)
        diff = recon - x
        loss = float(np.mean(diff * diff))
        d_recon = (2.0 / diff.size) * diff
        d_bias_out = d_recon.sum()
        d_cols, _ = im2col(d_recon, self.config.kernel_size, self.config.stride)
        d_hidden = d_cols @ self.conv.kernels.T
        dk_decode = np.einsum("bpf,bpk->fk", hidden, d_cols)
        dz = np.where(gate, d_hidden, 0.0)
        conv_grads, _ = self.conv.backward(cache, dz)
        grads = {
            "kernels": conv_grads["kernels"] + dk_decode,
            "bias": conv_grads["bias"],
            "decode_bias": np.asarray(d_bias_out, dtype=np.float64),
        }
        return loss, grads, (relu_gate, mask)

    # -- encode pipeline -----------------------------------------------------

    def encode(self, image: np.ndarray) -> np.ndarray:
        """One image -> non-negative sparse feature tensor [F, H', W']."""
        return self.encode_batch(np.asarray(image)[None])[0]

    def encode_batch(self, images: np.ndarray) -> np.ndarray:
        if not self.frozen:
            raise RuntimeError("encode requires a frozen (pretrained) component")
        x = np.asarray(images, dtype=np.float32)
        hidden, _ = self.sparse_hidden(x)
        oh, ow = self.conv_grid
        maps = self.conv.to_maps(hidden, oh, ow)  # [B, F, oh, ow]
        masks = np.array([interest_mask(img, self.config) for img in x])
        maps = maps * masks[:, None, :, :]
        maps = _box_smooth(maps, self.config.smooth_size)
        return _max_pool(maps, self.config.pool_size)

    # -- persistence ---------------------------------------------------------

    def save(self, path: str | Path) -> None:
        """Versioned checkpoint: text manifest line + raw little-endian arrays.

        Layout: magic line, one JSON manifest line (config, geometry, array
        table with dtypes/shapes/byte offsets), a blank line, then the raw
        array bytes concatenated in table order.
        """
        arrays = {
            "kernels": np.ascontiguousarray(self.conv.kernels, dtype="<f4"),
            "conv_bias": np.ascontiguousarray(self.conv.bias, dtype="<f4"),
            "decode_bias": np.ascontiguousarray(
                self.decode_bias.reshape(1), dtype="<f4"),
        }
        table = []
        offset = 0
        for name, arr in arrays.items():
            table.append({"name": name, "dtype": "<f4",
                          "shape": list(arr.shape), "offset": offset})
            offset += arr.nbytes
        manifest = {
            "config": _config_dict(self.config),
            "image_size": self.image_size,
            "frozen": self.frozen,
            "arrays": table,
        }
        with open(path, "wb") as fh:
            fh.write(CHECKPOINT_MAGIC.encode() + b"\n")
            fh.write(json.dumps(manifest, sort_keys=True).encode() + b"\n\n")
            for arr in arrays.values():
                fh.write(arr.tobytes())

    @classmethod
    def load(cls, path: str | Path) -> "VisionLtm":
        with open(path, "rb") as fh:
            magic = fh.readline().strip().decode()
            if magic != CHECKPOINT_MAGIC:
                raise ValueError(f"not a checkpoint file (magic {magic!r})")
            manifest = json.loads(fh.readline().decode())
            fh.readline()
            blob = fh.read()
        cfg_dict = manifest["config"]
        interest = InterestConfig(**cfg_dict.pop("interest"))
        config = LtmConfig(interest=interest, **cfg_dict)
        ltm = cls(config, manifest["image_size"])
        arrays = {}
        for entry in manifest["arrays"]:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape))
            start = entry["offset"]
            arr = np.frombuffer(blob, dtype=entry["dtype"], count=count,
                                offset=start).reshape(shape)
            arrays[entry["name"]] = arr.copy()
        ltm.conv.kernels = arrays["kernels"].astype(np.float32)
        ltm.conv.bias = arrays["conv_bias"].astype(np.float32)
        ltm.decode_bias = np.array(arrays["decode_bias"][0], dtype=np.float32)
        if manifest["frozen"]:
            ltm.freeze()
        return ltm


def _config_dict(cfg: LtmConfig) -> dict:
    d = asdict(cfg)
    return d


def pretrain(images: np.ndarray, config: LtmConfig, seed: int,
             image_size: int | None = None, log=None) -> VisionLtm:
    """Train the sparse autoencoder on background images; returns it frozen.

    Deterministic under (images, config, seed).  Aborts, reporting the epoch
    and step, when the loss stops being finite.
    """
    images = np.asarray(images)
    if image_size is None:
        image_size = images.shape[-1]
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x17A]))
    ltm = VisionLtm(config, image_size, rng=rng)
    opt = Adam(lr=config.lr)
    n = len(images)
    decode_bias = ltm.decode_bias.astype(np.float64).reshape(1)
    params = {"kernels": ltm.conv.kernels, "bias": ltm.conv.bias,
              "decode_bias": decode_bias}
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        n_batches = 0
        for start in range(0, n, config.batch_size):
            batch = images[order[start:start + config.batch_size]].astype(np.float32)
            ltm.decode_bias = np.array(decode_bias[0], dtype=np.float32)
            loss, grads, _ = ltm.reconstruction_loss_and_grads(batch)
            if not np.isfinite(loss):
                raise FloatingPointError(
                    f"pretraining diverged at epoch {epoch}, step {n_batches}")
            opt.step(params, {"kernels": grads["kernels"], "bias": grads["bias"],
                              "decode_bias": grads["decode_bias"].reshape(1)})
            epoch_loss += loss
            n_batches += 1
        if log:
            log(f"epoch {epoch + 1}/{config.epochs}: "
                f"mean batch loss {epoch_loss / max(1, n_batches):.5f}")
    ltm.decode_bias = np.array(decode_bias[0], dtype=np.float32)
    return ltm.freeze()
