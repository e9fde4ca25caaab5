"""Dataset ingestion and synthetic corpus generation.

Datasets are described by a line-oriented manifest: a ``#schema:``
header declaring the channel count, a column header, then one
``path,label,split,kind`` row per series.  Series files are CSV
(channels as columns, steps as rows) or 16-bit PCM wav.

Two generators produce labeled corpora deterministically from a spec: a
multi-class sinusoid task (distinct fundamental frequencies) and a
driving-maneuver task (four channels at 10 Hz built from qualitative
motion templates).
"""

import csv
import math
import os
import tempfile
from dataclasses import dataclass

import numpy as np

from .errors import (
    BadSpecError,
    EmptyDatasetError,
    MissingFileError,
    ParseError,
    SchemaMismatchError,
)
from .features import LabeledSeries, read_wav
from .numerics import Rng, derive_seed

MANEUVER_NAMES = ("stop", "straight_ahead", "start_up", "slow_down",
                  "full_braking", "left_turn", "right_turn")
MANEUVER_RATE_HZ = 10.0
SINUSOID_RATE_HZ = 100.0
SINUSOID_BASE_HZ = 2.0


@dataclass(frozen=True)
class Dataset:
    """Labeled series split into train and test, plus the class names."""

    train: list[LabeledSeries]
    test: list[LabeledSeries]
    class_names: list[str]


@dataclass(frozen=True)
class SynthSpec:
    """Deterministic recipe for a synthetic corpus."""

    task: str
    classes: int
    train_per_class: int
    test_per_class: int
    noise_std: float = 0.3
    min_steps: int = 20
    max_steps: int = 100
    seed: int = 0
    channels: int = 1  # sinusoid only: 1, or a fixed random linear lift

    def __post_init__(self):
        if self.task not in ("sinusoid", "maneuver"):
            raise BadSpecError(f"unknown task {self.task!r}")
        if self.classes < 1:
            raise BadSpecError("classes must be >= 1")
        if self.task == "sinusoid" and self.classes > 8:
            raise BadSpecError("sinusoid task supports at most 8 classes")
        if self.task == "maneuver" and self.classes > len(MANEUVER_NAMES):
            raise BadSpecError("maneuver task supports at most 7 classes")
        if self.train_per_class < 1 or self.test_per_class < 0:
            raise BadSpecError("need train_per_class >= 1, test_per_class >= 0")
        if self.noise_std < 0.0:
            raise BadSpecError("noise_std must be >= 0")
        if not 2 <= self.min_steps <= self.max_steps:
            raise BadSpecError("need 2 <= min_steps <= max_steps")
        if self.channels < 1:
            raise BadSpecError("channels must be >= 1")


def _sample_length(spec: SynthSpec, rng: Rng) -> int:
    return spec.min_steps + rng.randrange(spec.max_steps - spec.min_steps + 1)


def _noise(rng: Rng, shape, std: float) -> np.ndarray:
    if std == 0.0:
        return np.zeros(shape)
    flat = rng.normals(int(np.prod(shape))) * std
    return flat.reshape(shape)


def synth_sinusoid(spec: SynthSpec) -> Dataset:
    """Sinusoid corpus: class j is a tone at (j + 1) times the base frequency.

    Each sample has a random phase and length; ``channels`` > 1 applies
    a fixed random linear lift to the mono tone before the per-channel
    noise, emulating a multichannel feature front end.
    """
    if spec.task != "sinusoid":
        raise BadSpecError(f"spec is for task {spec.task!r}")
    lift = None
    if spec.channels > 1:
        lift = Rng(derive_seed(spec.seed, 90)).normals(spec.channels)
    splits: dict[str, list[LabeledSeries]] = {"train": [], "test": []}
    for split_tag, split_name, count in ((0, "train", spec.train_per_class),
                                         (1, "test", spec.test_per_class)):
        for j in range(spec.classes):
            freq = (j + 1) * SINUSOID_BASE_HZ
            for i in range(count):
                rng = Rng(derive_seed(spec.seed, split_tag, j, i))
                length = _sample_length(spec, rng)
                phase = rng.random() * 2.0 * math.pi
                t = np.arange(length) / SINUSOID_RATE_HZ
                tone = np.sin(2.0 * math.pi * freq * t + phase)
                if lift is None:
                    values = tone[np.newaxis, :]
                else:
                    values = lift[:, np.newaxis] * tone[np.newaxis, :]
                values = values + _noise(rng, values.shape, spec.noise_std)
                splits[split_name].append(LabeledSeries(
                    values=values, label=j, sample_rate_hz=SINUSOID_RATE_HZ,
                    id=f"sin-{split_name}-c{j}-i{i:03d}"))
    return Dataset(train=splits["train"], test=splits["test"],
                   class_names=[f"tone{j}" for j in range(spec.classes)])


def _maneuver_values(name: str, length: int, rng: Rng) -> np.ndarray:
    """Qualitative channel templates: lat/long/grav accel (m/s^2), speed (m/s)."""
    t = np.arange(length) / MANEUVER_RATE_HZ
    duration = length / MANEUVER_RATE_HZ
    bump = np.sin(math.pi * t / duration)
    lat = np.zeros(length)
    lon = np.zeros(length)
    speed = np.zeros(length)
    if name == "stop":
        pass
    elif name == "straight_ahead":
        speed[:] = 8.0 + 12.0 * rng.random()
    elif name == "start_up":
        accel = 1.5 + 1.5 * rng.random()
        lon[:] = accel
        speed = accel * t
    elif name == "slow_down":
        v0 = 8.0 + 12.0 * rng.random()
        accel = 0.8 + 1.7 * rng.random()
        lon[:] = -accel
        speed = np.maximum(v0 - accel * t, 0.0)
    elif name == "full_braking":
        v0 = 10.0 + 15.0 * rng.random()
        accel = 7.0 + 2.0 * rng.random()
        lon = -accel * bump
        # integral of the bump profile, so speed falls as braking bites
        speed = np.maximum(
            v0 - accel * (duration / math.pi) * (1.0 - np.cos(math.pi * t / duration)),
            0.0)
    elif name == "left_turn" or name == "right_turn":
        sign = 1.0 if name == "left_turn" else -1.0
        lat = sign * (2.0 + 2.0 * rng.random()) * bump
        speed[:] = 8.0 + 12.0 * rng.random()
    else:
        raise BadSpecError(f"unknown maneuver {name!r}")
    grav = np.full(length, 9.81)
    return np.vstack([lat, lon, grav, speed])


def synth_maneuver(spec: SynthSpec) -> Dataset:
    """Driving-maneuver corpus: 4 channels at 10 Hz from motion templates."""
    if spec.task != "maneuver":
        raise BadSpecError(f"spec is for task {spec.task!r}")
    names = MANEUVER_NAMES[:spec.classes]
    splits: dict[str, list[LabeledSeries]] = {"train": [], "test": []}
    for split_tag, split_name, count in ((0, "train", spec.train_per_class),
                                         (1, "test", spec.test_per_class)):
        for j, name in enumerate(names):
            for i in range(count):
                rng = Rng(derive_seed(spec.seed, split_tag, j, i))
                length = _sample_length(spec, rng)
                values = _maneuver_values(name, length, rng)
                values = values + _noise(rng, values.shape, spec.noise_std)
                splits[split_name].append(LabeledSeries(
                    values=values, label=j, sample_rate_hz=MANEUVER_RATE_HZ,
                    id=f"man-{split_name}-{name}-i{i:03d}"))
    return Dataset(train=splits["train"], test=splits["test"],
                   class_names=list(names))


def synthesize(spec: SynthSpec) -> Dataset:
    return synth_sinusoid(spec) if spec.task == "sinusoid" \
        else synth_maneuver(spec)


def atomic_write_text(path: str, text: str) -> None:
    """Write via a temp file in the same directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="ascii") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv_series(series: LabeledSeries, path: str) -> None:
    """One column per channel, one row per step, 17 significant digits."""
    lines = [",".join(f"c{i}" for i in range(series.channels))]
    for step in range(series.steps):
        lines.append(",".join(f"{v:.17g}" for v in series.values[:, step]))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_csv_series(path: str) -> LabeledSeries:
    """Load a CSV series; errors cite the offending file line and column."""
    if not os.path.exists(path):
        raise MissingFileError(f"no such file: {path}")
    with open(path, "r", encoding="ascii", newline="") as fh:
        reader = csv.reader(fh)
        rows = list(reader)
    rows = [row for row in rows if row]
    if len(rows) < 3:
        raise ParseError("need a header row and at least 2 data rows",
                         path=path)
    width = len(rows[0])
    data = np.empty((len(rows) - 1, width))
    for r, row in enumerate(rows[1:], start=2):
        if len(row) != width:
            raise ParseError(f"expected {width} cells, found {len(row)}",
                             path=path, line=r)
        for c, cell in enumerate(row):
            try:
                data[r - 2, c] = float(cell)
            except ValueError:
                raise ParseError(f"non-numeric cell {cell!r}", path=path,
                                 line=r, column=c + 1) from None
    if not np.all(np.isfinite(data)):
        raise ParseError("series contains NaN or Inf", path=path)
    return LabeledSeries(values=data.T, id=os.path.basename(path))


def write_manifest(dataset: Dataset, root: str) -> str:
    """Write all series as CSV files plus a manifest.txt; returns its path."""
    os.makedirs(root, exist_ok=True)
    channels = dataset.train[0].channels if dataset.train \
        else dataset.test[0].channels
    lines = [f"#schema: channels={channels}", "path,label,split,kind"]
    for split_name, series_list in (("train", dataset.train),
                                    ("test", dataset.test)):
        for i, series in enumerate(series_list):
            label = dataset.class_names[series.label]
            filename = f"{split_name}_{label}_{i:04d}.csv"
            write_csv_series(series, os.path.join(root, filename))
            lines.append(f"{filename},{label},{split_name},csv")
    manifest_path = os.path.join(root, "manifest.txt")
    atomic_write_text(manifest_path, "\n".join(lines) + "\n")
    return manifest_path


def load_manifest(path: str) -> Dataset:
    """Load every series referenced by a manifest file."""
    if not os.path.exists(path):
        raise MissingFileError(f"no such file: {path}")
    root = os.path.dirname(os.path.abspath(path))
    with open(path, "r", encoding="ascii") as fh:
        raw_lines = fh.read().splitlines()
    channels = None
    entries = []
    for lineno, line in enumerate(raw_lines, start=1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#schema:"):
            body = line.partition(":")[2].strip()
            key, sep, value = body.partition("=")
            if key.strip() != "channels" or not sep:
                raise ParseError("schema must declare channels=<count>",
                                 path=path, line=lineno)
            channels = int(value)
            continue
        if line.startswith("#") or line == "path,label,split,kind":
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise ParseError("expected path,label,split,kind", path=path,
                             line=lineno)
        entries.append((lineno, *parts))
    if channels is None:
        raise ParseError("missing #schema: header", path=path)
    if not entries:
        raise EmptyDatasetError(f"manifest lists no series: {path}")
    class_names: list[str] = []
    train: list[LabeledSeries] = []
    test: list[LabeledSeries] = []
    for lineno, rel_path, label, split, kind in entries:
        if split not in ("train", "test"):
            raise ParseError(f"split must be train or test, got {split!r}",
                             path=path, line=lineno)
        if kind not in ("csv", "wav"):
            raise ParseError(f"kind must be csv or wav, got {kind!r}",
                             path=path, line=lineno)
        full = os.path.join(root, rel_path)
        if not os.path.exists(full):
            raise MissingFileError(f"manifest entry missing: {full}")
        if kind == "csv":
            series = read_csv_series(full)
        else:
            samples, rate = read_wav(full)
            series = LabeledSeries(values=samples[np.newaxis, :],
                                   sample_rate_hz=rate,
                                   id=os.path.basename(full))
        if series.channels != channels:
            raise SchemaMismatchError(
                f"{full}: has {series.channels} channels, schema says {channels}")
        if label not in class_names:
            class_names.append(label)
        series = LabeledSeries(values=series.values,
                               label=class_names.index(label),
                               sample_rate_hz=series.sample_rate_hz,
                               id=series.id)
        (train if split == "train" else test).append(series)
    return Dataset(train=train, test=test, class_names=class_names)
