"""Task corpora: the synthetic disjoint-cluster benchmark, a documented
on-disk format, deterministic splits, and target standardisation.

On-disk layout: a JSON manifest {name, problem_kind, d, tasks: [{id,
file}]} next to one CSV per task with header f0,...,f{d-1},target and one
sample per row.  Floats are written with shortest round-trip repr, so a
save/load cycle is bit-exact.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .tasks import TaskData


@dataclass(frozen=True)
class GroundTruth:
    cluster_labels: np.ndarray   # T ints
    true_weights: np.ndarray     # d x T


@dataclass(frozen=True)
class TaskCorpus:
    tasks: tuple[TaskData, ...]
    problem_kind: str            # "regression" | "classification"
    name: str = "corpus"
    ground_truth: Optional[GroundTruth] = None

    def __post_init__(self):
        if not self.tasks:
            raise ValueError("corpus has no tasks")
        dims = {t.dim for t in self.tasks}
        if len(dims) != 1:
            raise ValueError(f"tasks disagree on feature dimension: {sorted(dims)}")
        if self.problem_kind not in ("regression", "classification"):
            raise ValueError(f"unknown problem kind {self.problem_kind!r}")

    @property
    def d(self) -> int:
        return self.tasks[0].dim

    def __len__(self) -> int:
        return len(self.tasks)


def generate_disjoint(seed: int, clusters: int = 3, tasks_per_cluster: int = 10,
                      d: int = 40, n_per_task: int = 50,
                      noise_std: float = 0.1) -> TaskCorpus:
    """Synthetic regression stream with disjoint cluster supports.

    The first half of the dimensions carries only task-specific weight
    (entries ~ N(0, 16)); the second half is partitioned into contiguous
    per-cluster blocks holding the cluster centres (entries ~ N(0, 900)).
    Each task weight is its centre plus a task component that is nonzero
    on the first half and on its cluster's block.  Features are standard
    normal and targets get additive N(0, noise_std^2) noise.
    """
    if clusters < 1 or tasks_per_cluster < 1 or n_per_task < 1:
        raise ValueError("clusters, tasks_per_cluster and n_per_task must be >= 1")
    if d < 2 * clusters:
        raise ValueError(f"need d >= 2 * clusters, got d={d}, clusters={clusters}")
    if noise_std < 0:
        raise ValueError("noise_std must be >= 0")
    rng = np.random.default_rng(seed)
    half = d // 2
    shared = d - half
    block = math.ceil(shared / clusters)

    centers = np.zeros((d, clusters))
    supports = []
    for c in range(clusters):
        lo = half + c * block
        hi = min(half + (c + 1) * block, d)
        supports.append((lo, hi))
        centers[lo:hi, c] = rng.normal(0.0, 30.0, size=hi - lo)

    tasks = []
    labels = []
    weights = np.zeros((d, clusters * tasks_per_cluster))
    idx = 0
    for c in range(clusters):
        lo, hi = supports[c]
        for i in range(tasks_per_cluster):
            component = np.zeros(d)
            component[:half] = rng.normal(0.0, 4.0, size=half)
            component[lo:hi] = rng.normal(0.0, 4.0, size=hi - lo)
            w_hat = centers[:, c] + component
            X = rng.normal(0.0, 1.0, size=(d, n_per_task))
            y = w_hat @ X + rng.normal(0.0, noise_std, size=n_per_task)
            tasks.append(TaskData(features=X, targets=y, loss_kind="squared",
                                  task_id=f"c{c}_t{i}"))
            labels.append(c)
            weights[:, idx] = w_hat
            idx += 1
    truth = GroundTruth(cluster_labels=np.array(labels), true_weights=weights)
    return TaskCorpus(tasks=tuple(tasks), problem_kind="regression",
                      name="disjoint", ground_truth=truth)


def split_corpus(corpus: TaskCorpus, train_fraction: float = 0.5,
                 seed: int = 0) -> tuple[TaskCorpus, TaskCorpus]:
    """Per-task shuffled split, deterministic in the seed."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie strictly between 0 and 1")
    rng = np.random.default_rng(seed)
    train_tasks, test_tasks = [], []
    for task in corpus.tasks:
        n = task.n_samples
        if n < 2:
            raise ValueError(f"task {task.task_id} has fewer than 2 samples")
        perm = rng.permutation(n)
        n_train = int(round(train_fraction * n))
        n_train = min(max(n_train, 1), n - 1)
        tr, te = perm[:n_train], perm[n_train:]
        for sel, bucket in ((tr, train_tasks), (te, test_tasks)):
            bucket.append(dataclasses.replace(
                task, features=task.features[:, sel], targets=task.targets[sel]))
    return (
        dataclasses.replace(corpus, tasks=tuple(train_tasks)),
        dataclasses.replace(corpus, tasks=tuple(test_tasks)),
    )


def standardize_targets(train: TaskCorpus, test: TaskCorpus
                        ) -> tuple[TaskCorpus, TaskCorpus]:
    """Per-task target standardisation using train-split statistics.

    Regression only: classification labels are categorical.  Both splits
    are transformed with the train mean and standard deviation.
    """
    if train.problem_kind != "regression":
        raise ValueError("target standardisation applies to regression corpora only")
    train_tasks, test_tasks = [], []
    for tr, te in zip(train.tasks, test.tasks):
        if tr.task_id != te.task_id:
            raise ValueError("train/test task order mismatch")
        m = float(tr.targets.mean())
        s = float(tr.targets.std())
        if s < 1e-12:
            s = 1.0
        train_tasks.append(dataclasses.replace(tr, targets=(tr.targets - m) / s))
        test_tasks.append(dataclasses.replace(te, targets=(te.targets - m) / s))
    return (
        dataclasses.replace(train, tasks=tuple(train_tasks)),
        dataclasses.replace(test, tasks=tuple(test_tasks)),
    )


def save_corpus(corpus: TaskCorpus, directory) -> Path:
    """Write the manifest plus one CSV per task; returns the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for task in corpus.tasks:
        fname = f"{task.task_id}.csv"
        _write_task_csv(directory / fname, task)
        entries.append({"id": task.task_id, "file": fname})
    manifest = {
        "name": corpus.name,
        "problem_kind": corpus.problem_kind,
        "d": corpus.d,
        "tasks": entries,
    }
    path = directory / "manifest.json"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return path


def load_corpus(path) -> TaskCorpus:
    """Load a corpus from its manifest (or the directory containing one)."""
    path = Path(path)
    if path.is_dir():
        path = path / "manifest.json"
    if not path.exists():
        raise FileNotFoundError(f"manifest not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    for key in ("name", "problem_kind", "d", "tasks"):
        if key not in manifest:
            raise ValueError(f"{path}: manifest is missing field {key!r}")
    kind = manifest["problem_kind"]
    loss_kind = "squared" if kind == "regression" else "logistic"
    d = int(manifest["d"])
    tasks = []
    for entry in manifest["tasks"]:
        fpath = path.parent / entry["file"]
        if not fpath.exists():
            raise FileNotFoundError(f"{path}: task file listed in manifest is missing: {entry['file']}")
        X, y = _read_task_csv(fpath, d)
        tasks.append(TaskData(features=X, targets=y, loss_kind=loss_kind,
                              task_id=str(entry["id"])))
    return TaskCorpus(tasks=tuple(tasks), problem_kind=kind, name=manifest["name"])


def _write_task_csv(path: Path, task: TaskData) -> None:
    d = task.dim
    header = ",".join([f"f{j}" for j in range(d)] + ["target"])
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for i in range(task.n_samples):
            row = [repr(float(v)) for v in task.features[:, i]]
            row.append(repr(float(task.targets[i])))
            fh.write(",".join(row) + "\n")


def _read_task_csv(path: Path, d: int):
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty task file")
    expected_header = ",".join([f"f{j}" for j in range(d)] + ["target"])
    if lines[0] != expected_header:
        raise ValueError(f"{path}, line 1: bad header (expected {d} features plus target)")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != d + 1:
            raise ValueError(f"{path}, line {lineno}: expected {d + 1} fields, got {len(parts)}")
        try:
            rows.append([float(v) for v in parts])
        except ValueError:
            raise ValueError(f"{path}, line {lineno}: non-numeric value") from None
    if not rows:
        raise ValueError(f"{path}: task file has no samples")
    arr = np.array(rows, dtype=float)
    return arr[:, :d].T.copy(), arr[:, d].copy()
