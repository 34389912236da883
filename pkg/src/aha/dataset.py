"""Omniglot ingestion, study/query run construction, and image corruption.

The loader consumes the standard directory layout

    <root>/images_background/<alphabet>/<character>/<writer>.png
    <root>/images_evaluation/<alphabet>/<character>/<writer>.png

with 105x105 binary glyph images (dark ink on light background).  Images are
binarized (ink = 1), downsampled by area averaging and re-thresholded.  Runs
are 20-item study/query episodes for the two tasks; corruption operators
degrade query images with occluding discs or uniform pixel noise.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image as PilImage

BACKGROUND_ALPHABETS = 30
EVALUATION_ALPHABETS = 10
RUN_SIZE = 20
MAX_CORRUPTION = 0.98
SCHEDULE_STEPS = 10


class DatasetError(Exception):
    """Raised for missing/malformed dataset trees or impossible requests."""


@dataclass(frozen=True)
class CorruptionSpec:
    kind: str  # "none" | "occlusion" | "noise"
    level: float
    seed: int

    def __post_init__(self):
        if self.kind not in ("none", "occlusion", "noise"):
            raise ValueError(f"unknown corruption kind {self.kind!r}")
        if not 0.0 <= self.level <= MAX_CORRUPTION:
            raise ValueError(f"level {self.level} outside [0, {MAX_CORRUPTION}]")


@dataclass(frozen=True)
class RunSpec:
    """One evaluation episode: 20 study items, 20 query items, truth map."""

    task: str  # "classification" | "instance"
    study_images: np.ndarray  # [20, H, W] float32 in [0, 1]
    query_images: np.ndarray  # [20, H, W] float32 in [0, 1]
    truth: np.ndarray  # [20] int, query index -> study index (a bijection)
    study_ids: tuple[str, ...]
    query_ids: tuple[str, ...]

    def __post_init__(self):
        n = len(self.study_images)
        if not (n == len(self.query_images) == len(self.truth) == RUN_SIZE):
            raise ValueError("runs hold exactly 20 study and 20 query items")
        if sorted(self.truth.tolist()) != list(range(RUN_SIZE)):
            raise ValueError("truth must be a bijection on 0..19")


class Split:
    """One side of the dataset: images plus (alphabet, class, writer) labels."""

    def __init__(self, images: np.ndarray, alphabets: list[str],
                 classes: list[str], writers: list[str]):
        self.images = images  # [N, H, W] uint8 in {0, 1}
        self.alphabets = alphabets
        self.classes = classes
        self.writers = writers
        self.by_class: dict[tuple[str, str], list[int]] = {}
        self.by_alphabet: dict[str, list[tuple[str, str]]] = {}
        for i, (a, c) in enumerate(zip(alphabets, classes)):
            key = (a, c)
            if key not in self.by_class:
                self.by_class[key] = []
                self.by_alphabet.setdefault(a, []).append(key)
            self.by_class[key].append(i)

    @property
    def n_alphabets(self) -> int:
        return len(self.by_alphabet)

    @property
    def n_classes(self) -> int:
        return len(self.by_class)

    def class_keys(self) -> list[tuple[str, str]]:
        return list(self.by_class.keys())


@dataclass
class OmniglotDataset:
    background: Split
    evaluation: Split
    image_size: int


def preprocess_glyph(raw: np.ndarray, size: int) -> np.ndarray:
    """Binarize (ink = 1) and downsample a raw grayscale glyph.

    raw: [H, W] uint8, dark ink on light background.  The image is cropped
    to a multiple of the integer downsampling factor, block-averaged, then
    re-thresholded at 0.5 (>= keeps thin strokes connected).
    """
    ink = (raw < 128).astype(np.float32)
    h, w = ink.shape
    factor = min(h, w) // size
    if factor < 1:
        raise DatasetError(f"image {h}x{w} smaller than target size {size}")
    ch, cw = size * factor, size * factor
    ink = ink[:ch, :cw]
    blocks = ink.reshape(size, factor, size, factor).mean(axis=(1, 3))
    return (blocks >= 0.5).astype(np.uint8)


def _load_split(split_dir: Path, expected_alphabets: int, size: int) -> Split:
    if not split_dir.is_dir():
        raise DatasetError(f"missing split directory: {split_dir}")
    alphabet_dirs = sorted(d for d in split_dir.iterdir() if d.is_dir())
    if len(alphabet_dirs) != expected_alphabets:
        raise DatasetError(
            f"{split_dir.name}: expected {expected_alphabets} alphabets, "
            f"found {len(alphabet_dirs)}")
    images, alphabets, classes, writers = [], [], [], []
    for adir in alphabet_dirs:
        char_dirs = sorted(d for d in adir.iterdir() if d.is_dir())
        if not char_dirs:
            raise DatasetError(f"alphabet {adir.name} has no character directories")
        for cdir in char_dirs:
            pngs = sorted(cdir.glob("*.png"))
            if not pngs:
                raise DatasetError(f"character {adir.name}/{cdir.name} has no images")
            for png in pngs:
                try:
                    with PilImage.open(png) as im:
                        raw = np.asarray(im.convert("L"))
                except OSError as exc:
                    raise DatasetError(f"unreadable image {png}: {exc}") from exc
                images.append(preprocess_glyph(raw, size))
                alphabets.append(adir.name)
                classes.append(cdir.name)
                writers.append(png.stem)
    return Split(np.array(images, dtype=np.uint8), alphabets, classes, writers)


def load_omniglot(root: str | os.PathLike, image_size: int = 52,
                  cache: bool = True) -> OmniglotDataset:
    """Load both splits from the standard layout, with an npz cache.

    Raises DatasetError for a missing root, wrong alphabet counts, or
    unreadable images.
    """
    root = Path(root)
    if not root.is_dir():
        raise DatasetError(f"dataset root not found: {root}")
    cache_path = root / f"cache_{image_size}.npz"
    if cache and cache_path.exists():
        return _read_cache(cache_path, image_size)
    background = _load_split(root / "images_background", BACKGROUND_ALPHABETS, image_size)
    evaluation = _load_split(root / "images_evaluation", EVALUATION_ALPHABETS, image_size)
    ds = OmniglotDataset(background, evaluation, image_size)
    if cache:
        _write_cache(cache_path, ds)
    return ds


def _write_cache(path: Path, ds: OmniglotDataset) -> None:
    np.savez_compressed(
        path,
        bg_images=ds.background.images,
        bg_labels=np.array([ds.background.alphabets, ds.background.classes,
                            ds.background.writers]),
        ev_images=ds.evaluation.images,
        ev_labels=np.array([ds.evaluation.alphabets, ds.evaluation.classes,
                            ds.evaluation.writers]),
    )


def _read_cache(path: Path, image_size: int) -> OmniglotDataset:
    with np.load(path, allow_pickle=False) as z:
        bg = Split(z["bg_images"], *(list(row) for row in z["bg_labels"]))
        ev = Split(z["ev_images"], *(list(row) for row in z["ev_labels"]))
    return OmniglotDataset(bg, ev, image_size)


# -- run construction --------------------------------------------------------


def build_classification_run(ds: OmniglotDataset, run_seed) -> RunSpec:
    """20 one-shot class-matching pairs: study and query by different writers.

    Classes come from a single evaluation alphabet when it holds >= 20
    classes, otherwise from the union of all evaluation classes.
    """
    rng = np.random.default_rng(run_seed)
    ev = ds.evaluation
    rich = [a for a in ev.by_alphabet if len(ev.by_alphabet[a]) >= RUN_SIZE]
    if rich:
        alphabet = rich[rng.integers(len(rich))]
        pool = list(ev.by_alphabet[alphabet])
    else:
        pool = ev.class_keys()
    if len(pool) < RUN_SIZE:
        raise DatasetError(f"need {RUN_SIZE} evaluation classes, have {len(pool)}")
    picks = rng.choice(len(pool), size=RUN_SIZE, replace=False)
    study_images, study_ids, query_pool = [], [], []
    for class_pos in picks:
        key = pool[class_pos]
        idxs = ev.by_class[key]
        if len(idxs) < 2:
            raise DatasetError(f"class {key} has fewer than two writers")
        w_study, w_query = rng.choice(len(idxs), size=2, replace=False)
        si, qi = idxs[w_study], idxs[w_query]
        study_images.append(ev.images[si])
        study_ids.append(f"{key[0]}/{key[1]}/{ev.writers[si]}")
        query_pool.append((qi, f"{key[0]}/{key[1]}/{ev.writers[qi]}"))
    order = rng.permutation(RUN_SIZE)
    query_images = [ev.images[query_pool[j][0]] for j in order]
    query_ids = [query_pool[j][1] for j in order]
    return RunSpec(
        task="classification",
        study_images=np.array(study_images, dtype=np.float32),
        query_images=np.array(query_images, dtype=np.float32),
        truth=np.asarray(order, dtype=np.int64),
        study_ids=tuple(study_ids),
        query_ids=tuple(query_ids),
    )


def build_instance_run(ds: OmniglotDataset, run_seed) -> RunSpec:
    """20 exemplars of one class; queries are the identical images, shuffled."""
    rng = np.random.default_rng(run_seed)
    ev = ds.evaluation
    keys = ev.class_keys()
    key = None
    for _ in range(len(keys) * 4):
        cand = keys[rng.integers(len(keys))]
        if len(ev.by_class[cand]) >= RUN_SIZE:
            key = cand
            break
    if key is None:
        raise DatasetError(f"no evaluation class has {RUN_SIZE} exemplars")
    idxs = list(ev.by_class[key])
    chosen = rng.choice(len(idxs), size=RUN_SIZE, replace=False)
    study_idx = [idxs[c] for c in chosen]
    study_images = np.array([ev.images[i] for i in study_idx], dtype=np.float32)
    study_ids = tuple(f"{key[0]}/{key[1]}/{ev.writers[i]}" for i in study_idx)
    order = rng.permutation(RUN_SIZE)
    return RunSpec(
        task="instance",
        study_images=study_images,
        query_images=study_images[order].copy(),
        truth=np.asarray(order, dtype=np.int64),
        study_ids=study_ids,
        query_ids=tuple(study_ids[j] for j in order),
    )


def build_run(ds: OmniglotDataset, task: str, run_seed) -> RunSpec:
    if task == "classification":
        return build_classification_run(ds, run_seed)
    if task == "instance":
        return build_instance_run(ds, run_seed)
    raise ValueError(f"unknown task {task!r}")


def load_published_runs(runs_dir: str | os.PathLike, image_size: int = 52) -> list[RunSpec]:
    """Read classification runs from published one-shot trial folders.

    Expects run directories (run01, run02, ...) each holding a
    class_labels.txt with lines "<test_image_path> <training_image_path>",
    paths relative to runs_dir.  Every run must pair 20 test items with 20
    distinct training items.
    """
    runs_dir = Path(runs_dir)
    run_dirs = sorted(d for d in runs_dir.iterdir() if d.is_dir() and d.name.startswith("run"))
    if not run_dirs:
        raise DatasetError(f"no run directories under {runs_dir}")
    runs = []
    for rdir in run_dirs:
        labels = rdir / "class_labels.txt"
        if not labels.exists():
            raise DatasetError(f"missing {labels}")
        pairs = []
        for line in labels.read_text().splitlines():
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise DatasetError(f"{labels}: malformed line {line!r}")
            pairs.append(parts)
        if len(pairs) != RUN_SIZE:
            raise DatasetError(f"{labels}: expected {RUN_SIZE} pairs, found {len(pairs)}")
        train_paths = sorted({train for _, train in pairs})
        if len(train_paths) != RUN_SIZE:
            raise DatasetError(f"{labels}: training items are not distinct")
        study_images, study_ids = [], []
        index = {}
        for train in train_paths:
            with PilImage.open(runs_dir / train) as im:
                study_images.append(preprocess_glyph(np.asarray(im.convert("L")), image_size))
            index[train] = len(study_ids)
            study_ids.append(train)
        query_images, query_ids, truth = [], [], []
        for test, train in pairs:
            with PilImage.open(runs_dir / test) as im:
                query_images.append(preprocess_glyph(np.asarray(im.convert("L")), image_size))
            query_ids.append(test)
            truth.append(index[train])
        runs.append(RunSpec(
            task="classification",
            study_images=np.array(study_images, dtype=np.float32),
            query_images=np.array(query_images, dtype=np.float32),
            truth=np.array(truth, dtype=np.int64),
            study_ids=tuple(study_ids),
            query_ids=tuple(query_ids),
        ))
    return runs


# -- corruption ---------------------------------------------------------------


def occlude(image: np.ndarray, diameter_fraction: float,
            rng: np.random.Generator) -> np.ndarray:
    """Zero out one disc of diameter d * side, placed fully inside the image.

    Pixel centers sit at integer + 0.5; a pixel is occluded when its center
    lies within the disc.
    """
    if not 0.0 <= diameter_fraction <= 1.0:
        raise ValueError("diameter fraction must be in [0, 1]")
    img = np.asarray(image, dtype=np.float32)
    if diameter_fraction == 0.0:
        return img.copy()
    h, w = img.shape
    side = float(w)
    radius = diameter_fraction * side / 2.0
    cy = rng.uniform(radius, h - radius)
    cx = rng.uniform(radius, w - radius)
    yy = np.arange(h)[:, None] + 0.5
    xx = np.arange(w)[None, :] + 0.5
    mask = (yy - cy) ** 2 + (xx - cx) ** 2 <= radius ** 2
    out = img.copy()
    out[mask] = 0.0
    return out


def add_noise(image: np.ndarray, fraction: float,
              rng: np.random.Generator) -> np.ndarray:
    """Replace round(p * H * W) distinct pixels with uniform [0,1] draws."""
    if not 0.0 <= fraction <= 1.0:
        raise ValueError("noise fraction must be in [0, 1]")
    img = np.asarray(image, dtype=np.float32)
    n = int(round(fraction * img.size))
    out = img.copy()
    if n == 0:
        return out
    positions = rng.choice(img.size, size=n, replace=False)
    flat = out.reshape(-1)
    flat[positions] = rng.random(n)
    return out


def corrupt(image: np.ndarray, spec: CorruptionSpec,
            rng: np.random.Generator) -> np.ndarray:
    if spec.kind == "none" or spec.level == 0.0:
        return np.asarray(image, dtype=np.float32).copy()
    if spec.kind == "occlusion":
        return occlude(image, spec.level, rng)
    return add_noise(image, spec.level, rng)


def corruption_schedule(kind: str) -> list[CorruptionSpec]:
    """Ten evenly spaced levels from none to the 0.98 cap, inclusive."""
    if kind not in ("occlusion", "noise"):
        raise ValueError(f"unknown corruption kind {kind!r}")
    levels = np.linspace(0.0, MAX_CORRUPTION, SCHEDULE_STEPS)
    return [CorruptionSpec(kind=kind, level=float(lv), seed=0) for lv in levels]
