"""One-shot short-term memory built from hippocampus-style subfields.

PS projects encodings through a fixed sparse random layer with winner-take-all
competition and refractory inhibition, producing near-orthogonal k-hot codes.
PC stores those codes in a Hopfield associative memory.  PR is a small trained
network that retrieves the stored code for a (possibly corrupted) encoding,
and PM maps completed codes back to images.  PR and PM train during a single
study exposure; PS never trains.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._kernels import hopfield_recall
from .nncore import Adam, DenseLayer, top_k_mask


@dataclass(frozen=True)
class PsConfig:
    """Pattern-separation layer geometry and dynamics."""

    n_out: int = 225
    k: int = 10
    drop_fraction: float = 0.5  # incoming weights fixed at zero, per unit
    inhibition_decay: float = 0.95

    def __post_init__(self):
        if not 1 <= self.k < self.n_out:
            raise ValueError("need 1 <= k < n_out")
        if not 0.0 <= self.drop_fraction < 1.0:
            raise ValueError("drop_fraction must be in [0, 1)")
        if not 0.0 < self.inhibition_decay < 1.0:
            raise ValueError("inhibition_decay must be in (0, 1)")


@dataclass(frozen=True)
class AhaConfig:
    """Hyperparameters for the full subfield pipeline."""

    ps: PsConfig = field(default_factory=PsConfig)
    pr_hidden: int = 800
    pm_hidden: int = 100
    train_steps: int = 200
    lr: float = 1e-2
    pc_max_sweeps: int = 50
    pc_capacity: int = 20
    bipolar_threshold: float = 0.5


def condition_bipolar(x: np.ndarray, threshold: float = 0.5) -> np.ndarray:
    """Map [0,1]-valued activity to {-1,+1}: strictly above threshold -> +1."""
    x = np.asarray(x)
    return np.where(x > threshold, 1.0, -1.0)


class PatternSeparator:
    """Fixed random sparse projection with top-k competition and inhibition.

    Weights are uniform random with an exact floor(drop_fraction * n_in)
    zeroed entries per output unit; they are never trained.  Each forward
    call decays the per-unit inhibition trace and saturates the winners'
    traces, so immediately repeated inputs activate disjoint winner sets.
    """

    def __init__(self, n_in: int, config: PsConfig, rng: np.random.Generator):
        self.config = config
        self.n_in = int(n_in)
        w = rng.random((config.n_out, n_in))
        n_drop = int(config.drop_fraction * n_in)
        for row in w:
            row[rng.choice(n_in, size=n_drop, replace=False)] = 0.0
        self.weights = w
        self.inhibition = np.zeros(config.n_out)

    def forward(self, encoding: np.ndarray) -> np.ndarray:
        """Return the k-hot winner vector (uint8) and update inhibition."""
        x = np.asarray(encoding, dtype=np.float64).reshape(-1)
        if x.shape[0] != self.n_in:
            raise ValueError(f"encoding size {x.shape[0]} != PS input size {self.n_in}")
        raw = self.weights @ x
        scores = raw - self.inhibition
        winners = top_k_mask(scores, self.config.k).astype(bool)
        self.inhibition *= self.config.inhibition_decay
        # Saturate winners above any reachable drive so immediate repeats
        # recruit fresh units; decay restores them geometrically.
        self.inhibition[winners] = float(raw.max()) + 1.0
        return winners.astype(np.uint8)

    def reset_inhibition(self) -> None:
        self.inhibition[:] = 0.0


def ps_forward(state: "AhaStm", encoding: np.ndarray) -> np.ndarray:
    """Run the separator and return the bipolar (+1 winners / -1 rest) code."""
    khot = state.ps.forward(encoding)
    return khot.astype(np.float64) * 2.0 - 1.0


class HopfieldMemory:
    """Binary Hopfield memory with one-shot Hebbian storage.

    Weights stay symmetric with a zero diagonal; recall runs asynchronous
    sign updates in a caller-supplied fixed order until a full sweep makes
    no change.

    With the defaults (activity_bias=0, threshold=0) this is the classic
    network: storage W += (p p^T - I)/n and updates sign(W s).  Sparse codes
    whose units are mostly -1 swamp the classic rule (their raw dot products
    approach n), so for those callers pass the code's mean activity as
    activity_bias; storage then centers the patterns and the update field
    becomes W(s - a) - theta, a standard sparse-pattern variant with the same
    symmetry, fixed-point, and energy-descent guarantees under the energy
    E(s) = -1/2 (s-a)^T W (s-a) + theta * sum(s).
    """

    def __init__(self, n: int, capacity: int = 20, activity_bias: float = 0.0,
                 threshold: float = 0.0):
        self.n = int(n)
        self.capacity = int(capacity)
        self.activity_bias = float(activity_bias)
        self.threshold = float(threshold)
        self.weights = np.zeros((n, n))
        self.patterns: list[np.ndarray] = []

    def store(self, pattern: np.ndarray) -> None:
        p = np.asarray(pattern, dtype=np.float64).reshape(-1)
        if p.shape[0] != self.n:
            raise ValueError(f"pattern length {p.shape[0]} != memory size {self.n}")
        if not np.all(np.abs(p) == 1.0):
            raise ValueError("pattern must be bipolar (+1/-1)")
        if len(self.patterns) >= self.capacity:
            raise RuntimeError(f"memory full: capacity {self.capacity} patterns per episode")
        centered = p - self.activity_bias
        self.weights += np.outer(centered, centered) / self.n
        np.fill_diagonal(self.weights, 0.0)
        self.patterns.append(p.copy())

    def energy(self, state: np.ndarray) -> float:
        s = np.asarray(state, dtype=np.float64) - self.activity_bias
        quad = -0.5 * float(s @ self.weights @ s)
        return quad + self.threshold * float(np.sum(state))

    def _field_offset(self) -> np.ndarray:
        # W @ (s - a) - theta == W @ s - (a * rowsum + theta)
        return self.activity_bias * self.weights.sum(axis=1) + self.threshold

    def recall(self, cue: np.ndarray, order: np.ndarray, max_sweeps: int = 50,
               track_energy: bool = False):
        """Relax from cue; returns (state, converged, sweeps[, energies]).

        order is the unit visit sequence used for every sweep.  Units with a
        zero local field keep their value, so convergence from a stored
        pattern takes a single sweep with no flips.
        """
        state = np.asarray(cue, dtype=np.float64).copy()
        if not np.all(np.abs(state) == 1.0):
            raise ValueError("cue must be bipolar (+1/-1)")
        order = np.ascontiguousarray(order, dtype=np.int64)
        offset = self._field_offset()
        trace = np.empty(self.n * max_sweeps) if track_energy else None
        e0 = self.energy(state) if track_energy else 0.0
        sweeps, flips, converged = hopfield_recall(
            np.ascontiguousarray(self.weights), state, order, max_sweeps,
            offset, e0, trace)
        if track_energy:
            return state, bool(converged), int(sweeps), trace[:flips].copy()
        return state, bool(converged), int(sweeps)

    def clear(self) -> None:
        self.weights[:] = 0.0
        self.patterns.clear()


def pc_store(memory: HopfieldMemory, pattern: np.ndarray) -> None:
    memory.store(pattern)


def pc_recall(memory: HopfieldMemory, cue: np.ndarray, order: np.ndarray,
              max_sweeps: int = 50, track_energy: bool = False):
    return memory.recall(cue, order, max_sweeps, track_energy)


class AhaStm:
    """Studyable short-term memory: PS -> PC storage, PR/PM trained heads.

    Construction is a full reset: given the same seed and geometry, two
    instances are bit-identical.  `study` consumes the 20-sample study set
    once; `pr_infer` and `recall` are pure given the studied state.
    """

    def __init__(self, n_input: int, image_shape: tuple[int, int],
                 config: AhaConfig | None = None, seed: int | np.random.SeedSequence = 0):
        self.config = config or AhaConfig()
        self.n_input = int(n_input)
        self.image_shape = tuple(image_shape)
        ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
        ps_ss, pr_ss, pm_ss, order_ss = ss.spawn(4)
        cfg = self.config
        n_ps = cfg.ps.n_out
        self.ps = PatternSeparator(n_input, cfg.ps, np.random.default_rng(ps_ss))
        # PS codes are k-hot bipolar, so PC runs in sparse mode: patterns are
        # centered by their mean activity and the firing threshold sits at
        # the midpoint of the winner / non-winner field levels.
        bias = (2.0 * cfg.ps.k - n_ps) / n_ps
        theta = -bias * (1.0 - bias * bias)
        self.pc = HopfieldMemory(n_ps, capacity=cfg.pc_capacity,
                                 activity_bias=bias, threshold=theta)
        pr_rng = np.random.default_rng(pr_ss)
        self.pr_hidden = DenseLayer(n_input, cfg.pr_hidden, "leaky_relu", rng=pr_rng)
        self.pr_out = DenseLayer(cfg.pr_hidden, n_ps, "sigmoid", rng=pr_rng)
        pm_rng = np.random.default_rng(pm_ss)
        n_pixels = int(np.prod(image_shape))
        self.pm_hidden = DenseLayer(n_ps, cfg.pm_hidden, "leaky_relu", rng=pm_rng)
        self.pm_out = DenseLayer(cfg.pm_hidden, n_pixels, "sigmoid", rng=pm_rng)
        self.pr_adam = Adam(lr=cfg.lr)
        self.pm_adam = Adam(lr=cfg.lr)
        # One fixed unit-visit order per episode keeps recall a pure function.
        self.pc_order = np.random.default_rng(order_ss).permutation(n_ps).astype(np.int64)
        self.targets_khot: np.ndarray | None = None  # [20, n_ps] in {0,1}
        self.targets_bipolar: np.ndarray | None = None  # [20, n_ps] in {-1,+1}
        self.studied = False

    # -- study -----------------------------------------------------------

    def study(self, encodings: np.ndarray, images: np.ndarray) -> None:
        """Single exposure to the study set; internal cycles train PR/PM.

        encodings: [N, n_input] (or [N, ...] flattened); images: [N, H, W].
        Samples pass through PS sequentially so refractory inhibition keeps
        successive codes decorrelated; each code is stored in PC; then PR
        fits encoding -> code and PM fits bipolar code -> image, full batch,
        for config.train_steps Adam steps each.
        """
        if self.studied:
            raise RuntimeError("already studied; reset before studying again")
        x = np.asarray(encodings, dtype=np.float32).reshape(len(encodings), -1)
        imgs = np.asarray(images, dtype=np.float32).reshape(len(images), -1)
        khots = []
        for row in x:
            khot = self.ps.forward(row)
            khots.append(khot)
            self.pc.store(khot.astype(np.float64) * 2.0 - 1.0)
        self.targets_khot = np.array(khots, dtype=np.float32)
        self.targets_bipolar = self.targets_khot * 2.0 - 1.0
        self._train_pr(x, self.targets_khot)
        self._train_pm(self.targets_bipolar.astype(np.float32), imgs)
        self.studied = True

    def _train_pr(self, x: np.ndarray, targets: np.ndarray) -> None:
        """Fit PR with per-unit binary cross-entropy on the k-hot targets."""
        scale = 1.0 / targets.size
        for step in range(self.config.train_steps):
            h, c1 = self.pr_hidden.forward(x)
            y, _ = self.pr_out.forward(h)
            if not np.all(np.isfinite(y)):
                raise FloatingPointError(f"PR training diverged at step {step}")
            # BCE through sigmoid: d loss / d preactivation = y - t, so the
            # output layer grads are assembled directly from dz2 (the layer's
            # backward() would expect d loss / d activation instead).
            dz2 = (y - targets) * scale
            g2 = {"weights": dz2.T @ h, "bias": dz2.sum(axis=0)}
            dh = dz2 @ self.pr_out.weights
            g1, _ = self.pr_hidden.backward(c1, dh)
            self.pr_adam.step(
                {"pr_out.weights": self.pr_out.weights, "pr_out.bias": self.pr_out.bias,
                 "pr_hidden.weights": self.pr_hidden.weights, "pr_hidden.bias": self.pr_hidden.bias},
                {"pr_out.weights": g2["weights"], "pr_out.bias": g2["bias"],
                 "pr_hidden.weights": g1["weights"], "pr_hidden.bias": g1["bias"]})

    def _train_pm(self, codes: np.ndarray, images_flat: np.ndarray) -> None:
        """Fit PM with MSE from bipolar codes to study images."""
        for step in range(self.config.train_steps):
            h, c1 = self.pm_hidden.forward(codes)
            y, c2 = self.pm_out.forward(h)
            if not np.all(np.isfinite(y)):
                raise FloatingPointError(f"PM training diverged at step {step}")
            d_a = 2.0 * (y - images_flat) / images_flat.size
            g2, dh = self.pm_out.backward(c2, d_a)
            g1, _ = self.pm_hidden.backward(c1, dh)
            self.pm_adam.step(
                {"pm_out.weights": self.pm_out.weights, "pm_out.bias": self.pm_out.bias,
                 "pm_hidden.weights": self.pm_hidden.weights, "pm_hidden.bias": self.pm_hidden.bias},
                {"pm_out.weights": g2["weights"], "pm_out.bias": g2["bias"],
                 "pm_hidden.weights": g1["weights"], "pm_hidden.bias": g1["bias"]})

    # -- inference ---------------------------------------------------------

    def pr_infer(self, encoding: np.ndarray) -> np.ndarray:
        """PR forward pass; stays in [0,1] (superposition kept for matching).

        Accepts one encoding (any shape totalling n_input) or a batch whose
        trailing dims flatten to n_input.
        """
        if not self.studied:
            raise RuntimeError("PR queried before study")
        x = np.asarray(encoding, dtype=np.float32)
        if x.size == self.n_input:
            flat = x.reshape(-1)
        elif x.ndim >= 2 and int(np.prod(x.shape[1:])) == self.n_input:
            flat = x.reshape(len(x), -1)
        else:
            raise ValueError(f"encoding shape {x.shape} incompatible with input size {self.n_input}")
        return self.pr_out.apply(self.pr_hidden.apply(flat))

    def pm_map(self, code: np.ndarray) -> np.ndarray:
        """Map a (bipolar) code to an image in [0,1]."""
        y = self.pm_out.apply(self.pm_hidden.apply(np.asarray(code, dtype=np.float32)))
        img = np.clip(y, 0.0, 1.0)
        if img.ndim == 1:
            return img.reshape(self.image_shape)
        return img.reshape((len(img),) + self.image_shape)

    def recall(self, encoding: np.ndarray):
        """Full retrieval: PR cue -> PC completion -> PM image.

        Returns (pc_pattern, image, converged).  Non-convergence within the
        sweep budget is reported, not raised.
        """
        z = self.pr_infer(np.asarray(encoding).reshape(-1))
        cue = condition_bipolar(z, self.config.bipolar_threshold)
        pattern, converged, _ = self.pc.recall(cue, self.pc_order, self.config.pc_max_sweeps)
        image = self.pm_map(pattern)
        return pattern, image, converged


def stm_reset(state: AhaStm, seed: int | np.random.SeedSequence) -> AhaStm:
    """Fresh episode state: same geometry, new seed, empty memories."""
    return AhaStm(state.n_input, state.image_shape, state.config, seed)
