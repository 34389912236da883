"""Invariant suites runnable without pretraining: gradients, Hopfield,
pattern separation, corruption operators, and sweep determinism.

Each suite returns CheckResult records; the CLI prints one line per check.
The whole set stays within a CI budget of about a minute.  The determinism
suite runs a reduced-size short-term-memory configuration (fewer training
steps, smaller hiddens) against a randomly initialized frozen vision model;
the property it checks does not depend on those sizes.
"""

from __future__ import annotations

import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import add_noise, corruption_schedule, occlude
from .fastnn import FastNnConfig
from .harness import SweepConfig, sweep
from .hippocampus import AhaConfig, HopfieldMemory, PatternSeparator, PsConfig
from .ltm import LtmConfig, VisionLtm
from .nncore import ConvLayer, DenseLayer, finite_diff_check, mse
from .synthglyphs import generate_corpus, run_test_spec

GRAD_TOLERANCE = 1e-4


@dataclass(frozen=True)
class CheckResult:
    suite: str
    name: str
    passed: bool
    detail: str


def _result(suite, name, passed, detail=""):
    return CheckResult(suite, name, bool(passed), detail)


# -- gradients (criterion: all layer backward passes vs central differences) --


def _dense_instance(rng, activation):
    layer = DenseLayer(5, 4, activation, rng=rng, dtype=np.float64)
    x = rng.normal(size=(3, 5))
    if activation == "leaky_relu":
        # Finite differences need the loss smooth within +-h of the point;
        # resample until no pre-activation sits on the kink.
        while True:
            z = x @ layer.weights.T + layer.bias
            if np.abs(z).min() > 1e-4:
                break
            x = rng.normal(size=(3, 5))
    target = rng.uniform(size=(3, 4))
    return layer, x, target


def check_gradients(trials: int = 100, seed: int = 0) -> list[CheckResult]:
    out = []
    for act_idx, activation in enumerate(("identity", "sigmoid", "leaky_relu")):
        rng = np.random.default_rng([seed, act_idx])
        worst = 0.0
        for _ in range(trials):
            layer, x, target = _dense_instance(rng, activation)

            def loss():
                return mse(layer.apply(x), target)

            a, cache = layer.forward(x)
            grads, _ = layer.backward(cache, 2.0 * (a - target) / a.size)
            worst = max(worst, finite_diff_check(loss, layer.params(), grads))
        out.append(_result("gradients", f"dense_{activation}", worst < GRAD_TOLERANCE,
                           f"max rel err {worst:.2e} over {trials} instances"))

    rng = np.random.default_rng([seed, 777])
    worst = 0.0
    for _ in range(trials):
        conv = ConvLayer(3, 3, 2, rng=rng, dtype=np.float64)
        x = rng.normal(size=(2, 8, 8))
        z0, _ = conv.forward(x)
        target = rng.normal(size=z0.shape)

        def loss():
            z, _ = conv.forward(x)
            return mse(z, target)

        z, cache = conv.forward(x)
        grads, _ = conv.backward(cache, 2.0 * (z - target) / z.size)
        worst = max(worst, finite_diff_check(loss, conv.params(), grads))
    out.append(_result("gradients", "conv_mse", worst < GRAD_TOLERANCE,
                       f"max rel err {worst:.2e} over {trials} instances"))

    rng = np.random.default_rng([seed, 778])
    worst = 0.0
    cfg = LtmConfig(filters=4, kernel_size=3, stride=2, k_active=2, epochs=1,
                    batch_size=2)
    for _ in range(trials):
        ltm = VisionLtm(cfg, 8, rng=rng)
        ltm.conv.kernels = ltm.conv.kernels.astype(np.float64)
        ltm.conv.bias = ltm.conv.bias.astype(np.float64)
        db = np.array([rng.normal() * 0.1])
        ltm.decode_bias = db.reshape(())
        x = rng.random((2, 8, 8))
        _, grads, gates = ltm.reconstruction_loss_and_grads(x)

        def loss():
            value, _, _ = ltm.reconstruction_loss_and_grads(x, freeze_gates_from=gates)
            return value

        worst = max(worst, finite_diff_check(
            loss,
            {"kernels": ltm.conv.kernels, "bias": ltm.conv.bias, "decode_bias": db},
            {"kernels": grads["kernels"], "bias": grads["bias"],
             "decode_bias": grads["decode_bias"].reshape(1)}))
    out.append(_result("gradients", "conv_autoencoder", worst < GRAD_TOLERANCE,
                       f"max rel err {worst:.2e} over {trials} instances"))
    return out


# -- Hopfield suite ------------------------------------------------------------


def check_hopfield(n: int = 225, seed: int = 3) -> list[CheckResult]:
    out = []
    rng = np.random.default_rng(seed)
    pats = rng.choice([-1.0, 1.0], size=(20, n))
    mem = HopfieldMemory(n)
    for p in pats:
        mem.store(p)
    symmetric = np.array_equal(mem.weights, mem.weights.T)
    zero_diag = not np.diag(mem.weights).any()
    out.append(_result("hopfield", "symmetry", symmetric))
    out.append(_result("hopfield", "zero_diagonal", zero_diag))

    order = rng.permutation(n).astype(np.int64)
    stable = 0
    for p in pats:
        state, converged, _ = mem.recall(p, order)
        stable += int(converged and np.array_equal(state, p))
    out.append(_result("hopfield", "twenty_pattern_fixed_points", stable == 20,
                       f"{stable}/20 stable"))

    monotone = True
    for trial in range(5):
        cue = pats[trial].copy()
        cue[rng.choice(n, size=40, replace=False)] *= -1.0
        _, _, _, energies = mem.recall(cue, order, track_energy=True)
        if len(energies):
            monotone &= bool(energies[0] <= mem.energy(cue) + 1e-9)
            monotone &= bool(np.all(np.diff(energies) <= 1e-9))
    out.append(_result("hopfield", "energy_descent", monotone))

    single = HopfieldMemory(n)
    p = pats[0]
    single.store(p)
    cue = p.copy()
    cue[rng.choice(n, size=n // 10, replace=False)] *= -1.0
    state, converged, _ = single.recall(cue, order)
    out.append(_result("hopfield", "ten_percent_recovery",
                       converged and np.array_equal(state, p)))
    return out


# -- pattern separation suite ---------------------------------------------------


def check_pattern_separation(seed: int = 0) -> list[CheckResult]:
    out = []
    cfg = PsConfig()
    rng = np.random.default_rng(seed)
    ps = PatternSeparator(256, cfg, rng)
    zeros_ok = all(np.count_nonzero(row == 0.0) == int(cfg.drop_fraction * 256)
                   for row in ps.weights)
    out.append(_result("pattern_separation", "exact_dropped_weights", zeros_ok))

    khot = ps.forward(rng.random(256))
    out.append(_result("pattern_separation", "exact_khot",
                       int(khot.sum()) == cfg.k))

    x = rng.random(256)
    first = frozenset(np.flatnonzero(ps.forward(x)))
    second = frozenset(np.flatnonzero(ps.forward(x)))
    out.append(_result("pattern_separation", "refractory_divergence",
                       first != second and not (first & second)))

    overlaps = []
    for s in range(10):
        stm_ps = PatternSeparator(256, cfg, np.random.default_rng([seed, s]))
        local = np.random.default_rng([seed, 100 + s])
        base = local.random(256)
        sets = []
        for _ in range(20):
            noisy = np.clip(base + 0.05 * local.standard_normal(256), 0, None)
            sets.append(frozenset(np.flatnonzero(stm_ps.forward(noisy))))
        for i in range(20):
            for j in range(i + 1, 20):
                overlaps.append(len(sets[i] & sets[j]))
    mean_overlap = float(np.mean(overlaps))
    out.append(_result("pattern_separation", "winner_overlap",
                       mean_overlap < 0.2 * cfg.k,
                       f"mean pairwise overlap {mean_overlap:.3f} of k={cfg.k}"))
    return out


# -- corruption suite ------------------------------------------------------------


def check_corruption(seed: int = 0) -> list[CheckResult]:
    out = []
    side = 52
    base = np.full((side, side), 2.0, dtype=np.float32)  # sentinel value
    counts_ok = True
    for p in (0.0, 0.25, 0.5, 0.98, 1.0):
        got = int((add_noise(base, p, np.random.default_rng(seed)) != 2.0).sum())
        counts_ok &= got == int(round(p * side * side))
    out.append(_result("corruption", "noise_replacement_counts", counts_ok))

    area_ok = True
    ones = np.ones((side, side), dtype=np.float32)
    for d in (0.5, 0.75, 1.0):
        for s in range(5):
            removed = int((occlude(ones, d, np.random.default_rng(s)) == 0).sum())
            expected = np.pi / 4 * d * d * side * side
            area_ok &= abs(removed - expected) / expected < 0.02
    out.append(_result("corruption", "occlusion_area_within_2pct", area_ok))

    img = np.random.default_rng(9).random((side, side)).astype(np.float32)
    det = True
    for level in (0.3, 0.7):
        a = occlude(img, level, np.random.default_rng(5))
        b = occlude(img, level, np.random.default_rng(5))
        det &= np.array_equal(a, b)
        a = add_noise(img, level, np.random.default_rng(6))
        b = add_noise(img, level, np.random.default_rng(6))
        det &= np.array_equal(a, b)
    out.append(_result("corruption", "deterministic_per_seed", det))

    rng = np.random.default_rng(11)
    ranged = True
    for level in [s.level for s in corruption_schedule("noise")]:
        noisy = add_noise(img, level, rng)
        occed = occlude(img, min(level, 1.0), rng)
        ranged &= noisy.min() >= 0.0 and noisy.max() <= 1.0
        ranged &= occed.min() >= 0.0 and occed.max() <= 1.0
        ranged &= noisy.shape == img.shape and occed.shape == img.shape
    out.append(_result("corruption", "range_and_shape_preserved", ranged))
    return out


# -- sweep determinism -------------------------------------------------------------


def check_sweep_determinism(work_dir: str | Path | None = None,
                            log=None) -> list[CheckResult]:
    """Byte-identical fast-profile results CSV for 1 vs 2 workers."""
    tmp_ctx = None
    if work_dir is None:
        tmp_ctx = tempfile.TemporaryDirectory(prefix="aha_selftest_")
        work_dir = tmp_ctx.name
    work = Path(work_dir)
    try:
        corpus = work / "corpus"
        generate_corpus(corpus, run_test_spec(seed=5))
        ltm = VisionLtm(LtmConfig(), 52, rng=np.random.default_rng(99)).freeze()
        ckpt = work / "ltm.ckpt"
        ltm.save(ckpt)
        cfg = SweepConfig(levels=5, seeds=3, runs=5, base_seed=0)
        aha_cfg = AhaConfig(pr_hidden=96, pm_hidden=32, train_steps=40)
        fast_cfg = FastNnConfig(hidden=64, train_steps=40)
        outputs = []
        for workers in (1, 2):
            path = sweep(ckpt, corpus, cfg, work / f"w{workers}",
                         aha_config=aha_cfg, fastnn_config=fast_cfg,
                         workers=workers, log=log)
            outputs.append(path.read_bytes())
        same = outputs[0] == outputs[1]
        n_rows = outputs[0].count(b"\n") - 1
        return [_result("determinism", "fast_sweep_bytes_equal_across_workers",
                        same, f"{n_rows} rows")]
    finally:
        if tmp_ctx is not None:
            tmp_ctx.cleanup()


ALL_SUITES = (
    ("gradients", check_gradients),
    ("hopfield", check_hopfield),
    ("pattern_separation", check_pattern_separation),
    ("corruption", check_corruption),
    ("determinism", check_sweep_determinism),
)


def run_selftest(emit=print, suites=None) -> bool:
    """Run every suite, print one line per check; True when all pass."""
    wanted = set(suites) if suites else None
    all_ok = True
    for name, fn in ALL_SUITES:
        if wanted and name not in wanted:
            continue
        for res in fn():
            tag = "PASS" if res.passed else "FAIL"
            detail = f" ({res.detail})" if res.detail else ""
            emit(f"[{tag}] {res.suite}/{res.name}{detail}")
            all_ok &= res.passed
    return all_ok
