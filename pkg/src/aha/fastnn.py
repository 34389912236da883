"""Baseline one-shot memory: a two-layer network trained per episode.

Given the 20-sample study set it fits encoding -> image with MSE; the hidden
layer serves as the matching representation and the sigmoid output as the
recalled image.  Reset discipline mirrors the subfield memory: construction
from a seed is a full re-initialization, optimizer state included.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nncore import Adam, DenseLayer


@dataclass(frozen=True)
class FastNnConfig:
    hidden: int = 400
    train_steps: int = 200
    lr: float = 1e-2


class FastNn:
    def __init__(self, n_input: int, image_shape: tuple[int, int],
                 config: FastNnConfig | None = None,
                 seed: int | np.random.SeedSequence = 0):
        self.config = config or FastNnConfig()
        self.n_input = int(n_input)
        self.image_shape = tuple(image_shape)
        ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
        rng = np.random.default_rng(ss)
        n_pixels = int(np.prod(image_shape))
        self.hidden = DenseLayer(n_input, self.config.hidden, "leaky_relu", rng=rng)
        self.out = DenseLayer(self.config.hidden, n_pixels, "sigmoid", rng=rng)
        self.adam = Adam(lr=self.config.lr)
        self.studied = False
        self.loss_history: list[float] = []

    def study(self, encodings: np.ndarray, images: np.ndarray) -> None:
        """One exposure to the study set; train_steps full-batch Adam steps."""
        if self.studied:
            raise RuntimeError("already studied; build a fresh instance to reset")
        x = np.asarray(encodings, dtype=np.float32).reshape(len(encodings), -1)
        t = np.asarray(images, dtype=np.float32).reshape(len(images), -1)
        for step in range(self.config.train_steps):
            h, c1 = self.hidden.forward(x)
            y, c2 = self.out.forward(h)
            diff = y - t
            loss = float(np.mean(diff * diff))
            if not np.isfinite(loss):
                raise FloatingPointError(f"study diverged at step {step}")
            self.loss_history.append(loss)
            d_a = (2.0 / diff.size) * diff
            g2, dh = self.out.backward(c2, d_a)
            g1, _ = self.hidden.backward(c1, dh)
            self.adam.step(
                {"out.weights": self.out.weights, "out.bias": self.out.bias,
                 "hidden.weights": self.hidden.weights, "hidden.bias": self.hidden.bias},
                {"out.weights": g2["weights"], "out.bias": g2["bias"],
                 "hidden.weights": g1["weights"], "hidden.bias": g1["bias"]})
        self.studied = True

    def infer(self, encoding: np.ndarray):
        """Return (hidden activations, recalled image(s) in [0, 1])."""
        if not self.studied:
            raise RuntimeError("inference before study")
        x = np.asarray(encoding, dtype=np.float32)
        if x.size == self.n_input:
            flat = x.reshape(-1)
        elif x.ndim >= 2 and int(np.prod(x.shape[1:])) == self.n_input:
            flat = x.reshape(len(x), -1)
        else:
            raise ValueError(f"encoding shape {x.shape} incompatible with input size {self.n_input}")
        h = self.hidden.apply(flat)
        img = np.clip(self.out.apply(h), 0.0, 1.0)
        if img.ndim == 1:
            return h, img.reshape(self.image_shape)
        return h, img.reshape((len(img),) + self.image_shape)
