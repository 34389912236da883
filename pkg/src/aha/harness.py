"""Evaluation orchestration: episodes, matching, sweeps, and aggregation.

Stage 2 of the protocol: for each run the clean study set is encoded once and
studied by each short-term memory; queries are corrupted, encoded, and all 20
are presented as one batch; matching picks the study item with minimum MSE in
each signal's representation space.

Determinism contract: every random stream derives from (base_seed, purpose,
task, [kind, level], seed, run) through SeedSequence, runs are fixed per run
index (seeds re-randomize memories and corruption, not the run contents), and
sweep rows are emitted in canonical sorted order.  Sweep work always executes
in spawned worker processes with BLAS threading pinned, so the results CSV is
byte-identical for any worker count.
"""

from __future__ import annotations

import json
import multiprocessing as mp
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import (
    CorruptionSpec,
    OmniglotDataset,
    RunSpec,
    build_run,
    corrupt,
    corruption_schedule,
    load_omniglot,
    load_published_runs,
)
from .fastnn import FastNn, FastNnConfig
from .hippocampus import AhaConfig, AhaStm
from .ltm import VisionLtm
from .nncore import mse

SIGNALS = ("ltm", "aha_pr", "aha_pc", "fastnn")
TASKS = ("classification", "instance")
KINDS = ("occlusion", "noise")

# Purpose codes for seed derivation.
_P_RUN, _P_AHA, _P_FASTNN, _P_CORRUPT = 1, 2, 3, 4


@dataclass(frozen=True)
class Row:
    """One (episode, signal) record; recall_loss is None for the ltm signal."""

    task: str
    kind: str
    level: float
    seed: int
    run: int
    signal: str
    accuracy: float
    recall_loss: float | None


@dataclass(frozen=True)
class RunResult:
    task: str
    kind: str
    level: float
    seed: int
    run: int
    accuracy: dict[str, float]
    recall_loss: dict[str, float | None]

    def rows(self) -> list[Row]:
        out = []
        for signal in SIGNALS:
            if signal not in self.accuracy:
                continue
            if signal == "ltm":
                loss = None
            elif signal.startswith("aha"):
                loss = self.recall_loss.get("aha")
            else:
                loss = self.recall_loss.get("fastnn")
            out.append(Row(self.task, self.kind, self.level, self.seed,
                           self.run, signal, self.accuracy[signal], loss))
        return out


@dataclass(frozen=True)
class SweepConfig:
    tasks: tuple[str, ...] = TASKS
    kinds: tuple[str, ...] = KINDS
    levels: int = 10
    seeds: int = 10
    runs: int = 20
    base_seed: int = 0

    def __post_init__(self):
        for t in self.tasks:
            if t not in TASKS:
                raise ValueError(f"unknown task {t!r}")
        for k in self.kinds:
            if k not in KINDS:
                raise ValueError(f"unknown corruption kind {k!r}")
        if not (1 <= self.levels <= 10 and self.seeds >= 1 and self.runs >= 1):
            raise ValueError("levels in 1..10, seeds and runs positive")


def match_by_mse(query_reps: np.ndarray, study_reps: np.ndarray) -> np.ndarray:
    """Independent argmin-MSE study index per query; ties to lowest index."""
    q = np.asarray(query_reps, dtype=np.float64)
    s = np.asarray(study_reps, dtype=np.float64)
    if q.shape[1:] != s.shape[1:]:
        raise ValueError(f"representation shapes differ: {q.shape[1:]} vs {s.shape[1:]}")
    q = q.reshape(len(q), -1)
    s = s.reshape(len(s), -1)
    d = ((q[:, None, :] - s[None, :, :]) ** 2).mean(axis=2)
    return d.argmin(axis=1)


def _task_code(task: str) -> int:
    return TASKS.index(task)


def _kind_code(kind: str) -> int:
    return KINDS.index(kind)


def run_seed_key(base_seed: int, task: str, run_idx: int) -> list[int]:
    # Runs are a fixed panel per task: evaluation seeds re-randomize the
    # memories and corruption draws, not the run contents.
    return [base_seed, _P_RUN, _task_code(task), run_idx]


class RunProvider:
    """Builds (or reads) the fixed run panel for each task."""

    def __init__(self, dataset: OmniglotDataset, base_seed: int,
                 published_runs_dir: str | None = None):
        self.dataset = dataset
        self.base_seed = base_seed
        self._published = None
        if published_runs_dir:
            self._published = load_published_runs(published_runs_dir,
                                                  dataset.image_size)

    def get(self, task: str, run_idx: int) -> RunSpec:
        if task == "classification" and self._published is not None:
            if run_idx >= len(self._published):
                raise ValueError(
                    f"run {run_idx} requested but only {len(self._published)} "
                    "published runs available")
            return self._published[run_idx]
        return build_run(self.dataset, task,
                         np.random.SeedSequence(run_seed_key(self.base_seed, task, run_idx)))


class Episode:
    """Studied state for one (task, seed, run): reusable across conditions."""

    def __init__(self, ltm: VisionLtm, run: RunSpec, task: str, seed: int,
                 run_idx: int, base_seed: int, aha_config: AhaConfig,
                 fastnn_config: FastNnConfig):
        self.run = run
        self.task = task
        self.seed = seed
        self.run_idx = run_idx
        self.base_seed = base_seed
        self.ltm = ltm
        study_enc = ltm.encode_batch(run.study_images)
        self.study_reps = study_enc.reshape(len(study_enc), -1)
        tcode = _task_code(task)
        self.aha = AhaStm(ltm.encoding_size, run.study_images.shape[1:], aha_config,
                          np.random.SeedSequence([base_seed, _P_AHA, tcode, seed, run_idx]))
        self.aha.study(self.study_reps, run.study_images)
        self.fastnn = FastNn(ltm.encoding_size, run.study_images.shape[1:], fastnn_config,
                             np.random.SeedSequence([base_seed, _P_FASTNN, tcode, seed, run_idx]))
        self.fastnn.study(self.study_reps, run.study_images)
        self.fast_study_hidden, _ = self.fastnn.infer(self.study_reps)

    def evaluate(self, corruption: CorruptionSpec) -> RunResult:
        """Corrupt + encode the query batch and score all signals."""
        run = self.run
        rng = np.random.default_rng(np.random.SeedSequence(
            [self.base_seed, _P_CORRUPT, _task_code(self.task),
             _kind_code(corruption.kind) if corruption.kind != "none" else 0,
             int(round(corruption.level * 1000)), self.seed, self.run_idx]))
        qimgs = np.stack([corrupt(img, corruption, rng) for img in run.query_images])
        qenc = self.ltm.encode_batch(qimgs).reshape(len(qimgs), -1)
        truth = run.truth

        accuracy: dict[str, float] = {}
        recall_loss: dict[str, float | None] = {}

        pred = match_by_mse(qenc, self.study_reps)
        accuracy["ltm"] = float(np.mean(pred == truth))
        recall_loss["ltm"] = None

        pr_out = self.aha.pr_infer(qenc)
        pred = match_by_mse(pr_out, self.aha.targets_khot)
        accuracy["aha_pr"] = float(np.mean(pred == truth))

        patterns = np.empty((len(qenc), self.aha.config.ps.n_out))
        aha_losses = []
        for i in range(len(qenc)):
            pattern, image, _ = self.aha.recall(qenc[i])
            patterns[i] = pattern
            aha_losses.append(mse(image, run.study_images[truth[i]]))
        pred = match_by_mse(patterns, self.aha.targets_bipolar)
        accuracy["aha_pc"] = float(np.mean(pred == truth))
        recall_loss["aha"] = float(np.mean(aha_losses))

        hidden, fast_images = self.fastnn.infer(qenc)
        pred = match_by_mse(hidden, self.fast_study_hidden)
        accuracy["fastnn"] = float(np.mean(pred == truth))
        recall_loss["fastnn"] = float(np.mean(
            [mse(fast_images[i], run.study_images[truth[i]]) for i in range(len(qimgs))]))

        return RunResult(self.task, corruption.kind, corruption.level,
                         self.seed, self.run_idx, accuracy, recall_loss)


def evaluate_run(ltm: VisionLtm, run: RunSpec, corruption: CorruptionSpec,
                 *, task: str, seed: int, run_idx: int, base_seed: int = 0,
                 aha_config: AhaConfig | None = None,
                 fastnn_config: FastNnConfig | None = None) -> RunResult:
    """Single evaluation: fresh memories, one corruption condition.

    Equivalent to Episode(...).evaluate(...) by construction; the sweep path
    reuses one Episode across conditions because study only sees the clean
    study set, which makes retraining per condition a pure-function replay.
    """
    episode = Episode(ltm, run, task, seed, run_idx, base_seed,
                      aha_config or AhaConfig(), fastnn_config or FastNnConfig())
    return episode.evaluate(corruption)


# -- sweep --------------------------------------------------------------------

_WORKER: dict = {}


def _worker_init(blob: dict) -> None:
    # BLAS threading is pinned by the parent before spawn; just build state.
    _WORKER["ltm"] = VisionLtm.load(blob["checkpoint"])
    dataset = load_omniglot(blob["dataset_root"], blob["image_size"])
    _WORKER["provider"] = RunProvider(dataset, blob["base_seed"],
                                      blob.get("runs_dir"))
    _WORKER["blob"] = blob


def _worker_bundle(args: tuple) -> tuple[tuple, list[tuple]]:
    task, seed, run_idx = args
    blob = _WORKER["blob"]
    run = _WORKER["provider"].get(task, run_idx)
    episode = Episode(_WORKER["ltm"], run, task, seed, run_idx,
                      blob["base_seed"], blob["aha_config"], blob["fastnn_config"])
    rows: list[tuple] = []
    schedule = {kind: corruption_schedule(kind)[: blob["levels"]]
                for kind in blob["kinds"]}
    for kind in blob["kinds"]:
        for spec in schedule[kind]:
            spec = CorruptionSpec(kind=kind, level=spec.level, seed=seed)
            result = episode.evaluate(spec)
            rows.extend(_row_tuple(r) for r in result.rows())
    return args, rows


def _row_tuple(row: Row) -> tuple:
    return (row.task, row.kind, row.level, row.seed, row.run, row.signal,
            row.accuracy, row.recall_loss)


def _row_from_tuple(t) -> Row:
    return Row(*t)


def row_sort_key(row: Row):
    return (row.task, row.kind, row.level, row.seed, row.run,
            SIGNALS.index(row.signal))


def sweep(checkpoint: str | Path, dataset_root: str | Path, config: SweepConfig,
          out_dir: str | Path, *, aha_config: AhaConfig | None = None,
          fastnn_config: FastNnConfig | None = None, workers: int = 1,
          runs_dir: str | None = None, image_size: int = 52,
          log=None) -> Path:
    """Run the full grid; returns the path of the canonical results CSV.

    Bundles of (task, seed, run) each evaluate every (kind, level) condition
    so the studied state is shared where the protocol allows it.  Progress
    journals to disk after every bundle and resumes from the journal.
    """
    checkpoint = Path(checkpoint)
    if not checkpoint.exists():
        raise FileNotFoundError(f"missing pretrained checkpoint: {checkpoint}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    journal_path = out_dir / "sweep_journal.jsonl"
    results_path = out_dir / "results.csv"

    bundles = [(task, seed, run_idx)
               for task in config.tasks
               for seed in range(config.seeds)
               for run_idx in range(config.runs)]
    done: dict[tuple, list[tuple]] = {}
    if journal_path.exists():
        for line in journal_path.read_text().splitlines():
            if not line.strip():
                continue
            entry = json.loads(line)
            done[tuple(entry["bundle"])] = [tuple(r) for r in entry["rows"]]
    todo = [b for b in bundles if b not in done]
    if log:
        log(f"sweep: {len(bundles)} bundles ({len(done)} from journal, {len(todo)} to run)")

    blob = {
        "checkpoint": str(checkpoint),
        "dataset_root": str(dataset_root),
        "image_size": image_size,
        "runs_dir": runs_dir,
        "base_seed": config.base_seed,
        "kinds": list(config.kinds),
        "levels": config.levels,
        "aha_config": aha_config or AhaConfig(),
        "fastnn_config": fastnn_config or FastNnConfig(),
    }
    if todo:
        # Pin BLAS threads for the children so numeric results cannot depend
        # on scheduling; set before spawn so the child's numpy loads with it.
        for var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, "1")
        ctx = mp.get_context("spawn")
        with ctx.Pool(processes=max(1, workers), initializer=_worker_init,
                      initargs=(blob,)) as pool:
            with open(journal_path, "a") as journal:
                for bundle, rows in pool.imap_unordered(_worker_bundle, todo, chunksize=1):
                    journal.write(json.dumps({"bundle": list(bundle), "rows": rows}) + "\n")
                    journal.flush()
                    done[bundle] = rows
                    if log:
                        log(f"  bundle {bundle} done ({len(done)}/{len(bundles)})")

    rows = [_row_from_tuple(t) for b in bundles for t in done[b]]
    rows.sort(key=row_sort_key)
    write_results_csv(rows, results_path)
    return results_path


# -- CSV ----------------------------------------------------------------------

CSV_HEADER = "task,kind,level,seed,run,signal,accuracy,recall_loss"


def format_row(row: Row) -> str:
    loss = "" if row.recall_loss is None else repr(float(row.recall_loss))
    return (f"{row.task},{row.kind},{row.level!r},{row.seed},{row.run},"
            f"{row.signal},{row.accuracy!r},{loss}")


def write_results_csv(rows: list[Row], path: str | Path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(CSV_HEADER + "\n")
        for row in rows:
            fh.write(format_row(row) + "\n")


def read_results_csv(path: str | Path) -> list[Row]:
    """Parse a results CSV; malformed rows raise with their line number."""
    rows = []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != CSV_HEADER:
            raise ValueError(f"line 1: unexpected header {header!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 8:
                raise ValueError(f"line {lineno}: expected 8 fields, got {len(parts)}")
            try:
                rows.append(Row(
                    task=parts[0], kind=parts[1], level=float(parts[2]),
                    seed=int(parts[3]), run=int(parts[4]), signal=parts[5],
                    accuracy=float(parts[6]),
                    recall_loss=None if parts[7] == "" else float(parts[7])))
            except ValueError as exc:
                raise ValueError(f"line {lineno}: {exc}") from exc
    return rows


# -- aggregation ----------------------------------------------------------------

@dataclass(frozen=True)
class Aggregate:
    task: str
    kind: str
    level: float
    signal: str
    mean: float
    std: float
    min: float
    max: float
    n: int
    std_defined: bool  # False when a single sample forced std to 0


def aggregate_stats(rows: list[Row], metric: str = "accuracy") -> list[Aggregate]:
    """Per-(task, kind, level, signal) mean / sample std / min / max.

    metric selects accuracy or recall_loss; rows without the metric (the ltm
    signal has no recall loss) are excluded from recall_loss groups.
    """
    groups: dict[tuple, list[float]] = {}
    for row in rows:
        value = getattr(row, metric)
        if value is None:
            continue
        groups.setdefault((row.task, row.kind, row.level, row.signal), []).append(value)
    if not groups:
        raise ValueError("no rows to aggregate")
    out = []
    for key in sorted(groups):
        vals = np.asarray(groups[key], dtype=np.float64)
        defined = vals.size > 1
        out.append(Aggregate(
            task=key[0], kind=key[1], level=key[2], signal=key[3],
            mean=float(vals.mean()),
            std=float(vals.std(ddof=1)) if defined else 0.0,
            min=float(vals.min()), max=float(vals.max()),
            n=int(vals.size), std_defined=defined))
    return out
