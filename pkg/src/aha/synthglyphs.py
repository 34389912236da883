"""Procedural handwritten-style glyph corpus in the Omniglot directory layout.

Each character class is a small set of stroke curves; each writer renders the
class with jittered control points, a mild affine wobble, and varying stroke
thickness.  The tree written to disk mirrors the real dataset exactly
(images_background/<alphabet>/<character>/<writer>.png, dark ink on white,
square canvas), so the loader and the whole benchmark run unchanged on it.

This exists because the benchmark needs a dataset with Omniglot's structure
(30/10 disjoint alphabet splits, 20 writers per class) in environments where
the real corpus cannot be downloaded.  It is synthetic data: absolute
accuracies depend on the difficulty knobs below, which are fixed defaults.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from PIL import Image as PilImage


@dataclass(frozen=True)
class GlyphCorpusSpec:
    """Corpus shape and difficulty knobs (all deterministic under seed)."""

    background_alphabets: int = 30
    evaluation_alphabets: int = 10
    background_classes: int = 964
    evaluation_classes: int = 659
    writers_per_class: int = 20
    canvas: int = 105
    seed: int = 0
    # Writer-variation magnitudes, in canvas pixels / radians.
    point_jitter: float = 3.0
    rotation_sigma: float = 0.08
    scale_sigma: float = 0.06
    shift_sigma: float = 2.5
    thickness: float = 3.2
    thickness_sigma: float = 0.35


def _class_counts(total: int, alphabets: int) -> list[int]:
    base, rem = divmod(total, alphabets)
    return [base + (1 if i < rem else 0) for i in range(alphabets)]


def _sample_strokes(rng: np.random.Generator, canvas: int) -> list[np.ndarray]:
    """Control polygons for one character skeleton.

    Strokes are quadratic or cubic Bezier control polygons; consecutive
    strokes sometimes chain start-to-end the way connected handwriting does.
    """
    margin = canvas * 0.14
    lo, hi = margin, canvas - margin

    def point():
        return rng.uniform(lo, hi, size=2)

    n_strokes = rng.choice([2, 3, 4], p=[0.35, 0.40, 0.25])
    strokes = []
    prev_end = None
    for _ in range(n_strokes):
        n_ctrl = rng.choice([3, 4])  # quadratic or cubic
        pts = [point() for _ in range(n_ctrl)]
        if prev_end is not None and rng.random() < 0.5:
            pts[0] = prev_end.copy()
        strokes.append(np.array(pts))
        prev_end = strokes[-1][-1]
    return strokes


def _bezier_points(ctrl: np.ndarray, n: int) -> np.ndarray:
    """Sample n points along a Bezier curve by de Casteljau evaluation."""
    t = np.linspace(0.0, 1.0, n)[:, None]
    pts = [np.broadcast_to(p, (n, 2)).copy() for p in ctrl]
    while len(pts) > 1:
        pts = [(1.0 - t) * a + t * b for a, b in zip(pts[:-1], pts[1:])]
    return pts[0]


def _render_writer(strokes: list[np.ndarray], spec: GlyphCorpusSpec,
                   rng: np.random.Generator) -> np.ndarray:
    """Render one writer's version of a skeleton to a binary ink canvas."""
    canvas = spec.canvas
    center = (canvas - 1) / 2.0
    angle = rng.normal(0.0, spec.rotation_sigma)
    scale = np.exp(rng.normal(0.0, spec.scale_sigma, size=2))
    shift = rng.normal(0.0, spec.shift_sigma, size=2)
    rot = np.array([[np.cos(angle), -np.sin(angle)],
                    [np.sin(angle), np.cos(angle)]])
    thickness = float(np.clip(rng.normal(spec.thickness, spec.thickness_sigma),
                              1.8, spec.thickness * 1.6))
    radius = thickness / 2.0
    span = int(np.ceil(radius))
    dy, dx = np.mgrid[-span:span + 1, -span:span + 1]
    disc = np.argwhere(dy ** 2 + dx ** 2 <= radius ** 2) - span

    ink = np.zeros((canvas, canvas), dtype=bool)
    for ctrl in strokes:
        wobbled = ctrl + rng.normal(0.0, spec.point_jitter, size=ctrl.shape)
        wobbled = (wobbled - center) * scale @ rot.T + center + shift
        seg_len = float(np.linalg.norm(np.diff(wobbled, axis=0), axis=1).sum())
        n = max(40, int(2.0 * seg_len))
        pts = np.rint(_bezier_points(wobbled, n)).astype(int)
        for off_y, off_x in disc:
            ys = np.clip(pts[:, 1] + off_y, 0, canvas - 1)
            xs = np.clip(pts[:, 0] + off_x, 0, canvas - 1)
            ink[ys, xs] = True
    return ink


def _save_png(path: Path, ink: np.ndarray) -> None:
    # Dark ink on white, 1-bit, matching the published dataset convention.
    img = PilImage.fromarray(np.where(ink, 0, 255).astype(np.uint8), mode="L")
    img.convert("1").save(path)


def generate_corpus(root: str | Path, spec: GlyphCorpusSpec | None = None,
                    force: bool = False) -> Path:
    """Write the corpus tree under root; a matching existing tree is reused.

    Returns root.  The manifest records the generating spec so stale trees
    regenerate when knobs change.
    """
    spec = spec or GlyphCorpusSpec()
    root = Path(root)
    manifest = root / "corpus_manifest.json"
    wanted = json.dumps(asdict(spec), sort_keys=True)
    if not force and manifest.exists() and manifest.read_text() == wanted:
        return root
    splits = [
        ("images_background", spec.background_alphabets, spec.background_classes, 0),
        ("images_evaluation", spec.evaluation_alphabets, spec.evaluation_classes, 1),
    ]
    for split_name, n_alpha, n_classes, split_code in splits:
        counts = _class_counts(n_classes, n_alpha)
        for a_idx, count in enumerate(counts):
            a_dir = root / split_name / f"alphabet{split_code}{a_idx:02d}"
            for c_idx in range(count):
                c_dir = a_dir / f"character{c_idx:03d}"
                c_dir.mkdir(parents=True, exist_ok=True)
                class_ss = np.random.SeedSequence(
                    [spec.seed, split_code, a_idx, c_idx])
                strokes = _sample_strokes(np.random.default_rng(class_ss), spec.canvas)
                for w_idx in range(spec.writers_per_class):
                    writer_ss = np.random.SeedSequence(
                        [spec.seed, split_code, a_idx, c_idx, w_idx])
                    ink = _render_writer(strokes, spec, np.random.default_rng(writer_ss))
                    _save_png(c_dir / f"{w_idx + 1:02d}.png", ink)
    manifest.write_text(wanted)
    return root


def small_test_spec(seed: int = 0) -> GlyphCorpusSpec:
    """A miniature corpus for loader tests: full split structure, few images."""
    return GlyphCorpusSpec(
        background_alphabets=30, evaluation_alphabets=10,
        background_classes=60, evaluation_classes=30,
        writers_per_class=4, seed=seed)


def run_test_spec(seed: int = 0) -> GlyphCorpusSpec:
    """Small corpus that still supports both run types (20 writers/class)."""
    return GlyphCorpusSpec(
        background_alphabets=30, evaluation_alphabets=10,
        background_classes=30, evaluation_classes=20,
        writers_per_class=20, seed=seed)
