"""Conceptor-based classification and experiment protocols.

Training computes one positive conceptor per class from the pooled
reservoir states of that class's samples, plus one negative conceptor
per class: the negation of the disjunction of all other classes.  A
sample is classified by the argmax of combined evidence, the sum of the
positive quadratic form (does this look like class j?) and the negative
one (does this look like nothing else?).

The sweep protocols rerun train/evaluate over grids of reservoir sizes,
training-set sizes, or ablation variants, with independently seeded
reservoirs per (cell, trial) so every cell is reproducible in
isolation.
"""

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .conceptor import (
    Conceptor,
    conceptor_from_text,
    conceptor_to_text,
    correlation,
    evidence,
    from_correlation,
    not_,
    or_,
)
from .errors import (
    ChannelMismatchError,
    EmptyClassError,
    EmptyTestSetError,
    InsufficientDataError,
    ParseError,
    SingleClassError,
    TooFewSamplesPerClassError,
)
from .features import (
    LabeledSeries,
    MfccConfig,
    NormalizationParams,
    apply_normalization,
    fit_normalization,
    resample,
)
from .numerics import Rng, derive_seed, matrix_from_text, matrix_to_text
from .reservoir import (
    Reservoir,
    ReservoirParams,
    drive,
    generate,
    reservoir_from_text,
    reservoir_to_text,
)

REJECT = -1

DEFAULT_APERTURE = 10.0
DEFAULT_CV_GRID = tuple(np.logspace(-2.0, 4.0, 20))

SWEEP_AXES = ("reservoir_size", "training_size", "ablation")
ABLATION_CELLS = ("original", "linear_activation", "no_interpolation", "both")


@dataclass(frozen=True)
class PreprocessingConfig:
    """How raw series are prepared before they drive the reservoir."""

    normalize: bool = True
    resample_mode: str = "polynomial"
    resample_points: int = 4
    resample_degree: int = 3
    mfcc: MfccConfig | None = None


@dataclass(frozen=True)
class ClassifierModel:
    reservoir: Reservoir
    classes: list[str]
    positive: list[Conceptor]
    negative: list[Conceptor]
    aperture: float
    normalization: NormalizationParams | None
    preprocessing: PreprocessingConfig
    version: str = "1"


@dataclass(frozen=True)
class EvidenceReport:
    """Per-class evidence for one sample; decided = argmax of combined."""

    pos: np.ndarray
    neg: np.ndarray
    combined: np.ndarray
    decided: int
    margin: float


@dataclass(frozen=True)
class Metrics:
    error_rate: float
    confusion: np.ndarray
    per_class_pos: np.ndarray
    per_class_neg: np.ndarray
    per_class_combined: np.ndarray
    overall_pos: float
    overall_neg: float
    overall_combined: float


def _prepare(series: LabeledSeries, normalization, prep: PreprocessingConfig):
    if normalization is not None:
        series = apply_normalization(normalization, series)
    if prep.resample_mode != "none":
        series = resample(series, prep.resample_points,
                          mode=prep.resample_mode, degree=prep.resample_degree)
    return series


def _class_count(train_set: list[LabeledSeries]) -> int:
    labels = [s.label for s in train_set]
    if any(lab is None for lab in labels):
        raise EmptyClassError("training samples must carry labels")
    m = max(labels) + 1
    if m < 2:
        raise SingleClassError("need at least 2 classes")
    for j in range(m):
        if labels.count(j) == 0:
            raise EmptyClassError(f"class {j} has no training samples")
    return m


def _negative_conceptors(positive: list[Conceptor]) -> list[Conceptor]:
    # NOT of the left-fold OR over every other class, in class order
    negatives = []
    for j in range(len(positive)):
        others = [c for k, c in enumerate(positive) if k != j]
        folded = others[0]
        for c in others[1:]:
            folded = or_(folded, c)
        negatives.append(not_(folded))
    return negatives


def train(train_set: list[LabeledSeries], params: ReservoirParams,
          aperture: float = DEFAULT_APERTURE,
          preprocessing: PreprocessingConfig = PreprocessingConfig(),
          class_names: list[str] | None = None) -> ClassifierModel:
    """Fit preprocessing and per-class conceptors on labeled series."""
    if not train_set:
        raise EmptyClassError("training set is empty")
    m = _class_count(train_set)
    channels = train_set[0].channels
    for s in train_set:
        if s.channels != channels:
            raise ChannelMismatchError(
                f"series {s.id!r} has {s.channels} channels, expected {channels}")
    if class_names is None:
        class_names = [f"class{j}" for j in range(m)]
    if len(class_names) != m:
        raise ValueError(f"got {len(class_names)} class names for {m} classes")
    normalization = fit_normalization(train_set) if preprocessing.normalize \
        else None
    reservoir = generate(params, input_dim=channels)
    positive = []
    for j in range(m):
        states = [drive(reservoir, _prepare(s, normalization, preprocessing)).states
                  for s in train_set if s.label == j]
        pooled = np.hstack(states)
        positive.append(from_correlation(correlation(pooled), aperture))
    return ClassifierModel(reservoir=reservoir, classes=list(class_names),
                           positive=positive,
                           negative=_negative_conceptors(positive),
                           aperture=aperture, normalization=normalization,
                           preprocessing=preprocessing)


def evidences(model: ClassifierModel, sample: LabeledSeries) -> EvidenceReport:
    """Positive, negative and combined evidence vectors for one sample."""
    if sample.channels != model.reservoir.input_dim:
        raise ChannelMismatchError(
            f"sample has {sample.channels} channels,"
            f" model expects {model.reservoir.input_dim}")
    prepared = _prepare(sample, model.normalization, model.preprocessing)
    states = drive(model.reservoir, prepared)
    pos = np.array([evidence(c, states) for c in model.positive])
    neg = np.array([evidence(c, states) for c in model.negative])
    combined = pos + neg
    decided = int(np.argmax(combined))
    ranked = np.sort(combined)[::-1]
    return EvidenceReport(pos=pos, neg=neg, combined=combined,
                          decided=decided, margin=float(ranked[0] - ranked[1]))


def predict(model: ClassifierModel, sample: LabeledSeries,
            open_set_threshold=None) -> int:
    """Class index of the sample, or REJECT in open-set mode.

    ``open_set_threshold`` is a scalar or a per-class vector; the sample
    is rejected when the winning combined evidence falls below it.
    """
    report = evidences(model, sample)
    if open_set_threshold is None:
        return report.decided
    threshold = np.asarray(open_set_threshold, dtype=np.float64)
    cutoff = float(threshold) if threshold.ndim == 0 \
        else float(threshold[report.decided])
    if report.combined[report.decided] < cutoff:
        return REJECT
    return report.decided


def calibrate_thresholds(model: ClassifierModel,
                         train_set: list[LabeledSeries],
                         percentile: float = 5.0) -> np.ndarray:
    """Per-class open-set thresholds from training combined evidence."""
    m = len(model.classes)
    per_class: list[list[float]] = [[] for _ in range(m)]
    for s in train_set:
        report = evidences(model, s)
        per_class[s.label].append(float(report.combined[s.label]))
    for j in range(m):
        if not per_class[j]:
            raise EmptyClassError(f"class {j} has no calibration samples")
    return np.array([np.percentile(per_class[j], percentile)
                     for j in range(m)])


def evaluate(model: ClassifierModel, test_set: list[LabeledSeries]) -> Metrics:
    """Error rate, per-family accuracies and confusion matrix on a test set."""
    if not test_set:
        raise EmptyTestSetError("test set is empty")
    m = len(model.classes)
    confusion = np.zeros((m, m), dtype=np.int64)
    correct = {"pos": np.zeros(m), "neg": np.zeros(m), "combined": np.zeros(m)}
    totals = np.zeros(m)
    for s in test_set:
        report = evidences(model, s)
        totals[s.label] += 1
        confusion[s.label, report.decided] += 1
        if int(np.argmax(report.pos)) == s.label:
            correct["pos"][s.label] += 1
        if int(np.argmax(report.neg)) == s.label:
            correct["neg"][s.label] += 1
        if report.decided == s.label:
            correct["combined"][s.label] += 1
    total = float(totals.sum())
    safe = np.where(totals > 0, totals, 1.0)
    per_class = {k: 100.0 * v / safe for k, v in correct.items()}
    overall = {k: 100.0 * v.sum() / total for k, v in correct.items()}
    return Metrics(error_rate=1.0 - float(np.trace(confusion)) / total,
                   confusion=confusion,
                   per_class_pos=per_class["pos"],
                   per_class_neg=per_class["neg"],
                   per_class_combined=per_class["combined"],
                   overall_pos=overall["pos"],
                   overall_neg=overall["neg"],
                   overall_combined=overall["combined"])


def label_shuffle_error(labels: list[int], rng: Rng,
                        draws: int = 1000) -> float:
    """Mean error of predicting a random permutation of the true labels."""
    labels = list(labels)
    total = 0.0
    for _ in range(draws):
        shuffled = list(labels)
        rng.shuffle(shuffled)
        wrong = sum(1 for a, b in zip(labels, shuffled) if a != b)
        total += wrong / len(labels)
    return total / draws


def cross_validate_aperture(train_set: list[LabeledSeries],
                            params: ReservoirParams,
                            grid=None, folds: int = 5,
                            preprocessing: PreprocessingConfig = PreprocessingConfig(),
                            ) -> tuple[float, list[tuple[float, float]]]:
    """Stratified k-fold search for the aperture.

    Returns the best value (ties go to the smallest) and the table of
    (aperture, mean validation accuracy percent) rows.
    """
    if grid is None:
        grid = DEFAULT_CV_GRID
    grid = sorted(set(float(a) for a in grid))
    if not grid:
        raise ValueError("aperture grid is empty")
    if folds < 2:
        raise ValueError("folds must be >= 2")
    m = _class_count(train_set)
    by_class: list[list[int]] = [[] for _ in range(m)]
    for idx, s in enumerate(train_set):
        by_class[s.label].append(idx)
    for j in range(m):
        if len(by_class[j]) < folds:
            raise TooFewSamplesPerClassError(
                f"class {j} has {len(by_class[j])} samples, need >= {folds}")
        Rng(derive_seed(params.seed, 7700, j)).shuffle(by_class[j])
    fold_of = {}
    for j in range(m):
        for rank, idx in enumerate(by_class[j]):
            fold_of[idx] = rank % folds
    reservoir = generate(params, input_dim=train_set[0].channels)
    correct = np.zeros(len(grid))
    total = 0
    for fold in range(folds):
        fit_part = [s for i, s in enumerate(train_set) if fold_of[i] != fold]
        val_part = [s for i, s in enumerate(train_set) if fold_of[i] == fold]
        normalization = fit_normalization(fit_part) if preprocessing.normalize \
            else None
        pooled = []
        for j in range(m):
            states = [drive(reservoir, _prepare(s, normalization, preprocessing)).states
                      for s in fit_part if s.label == j]
            pooled.append(correlation(np.hstack(states)))
        val_states = [(s.label,
                       drive(reservoir, _prepare(s, normalization, preprocessing)))
                      for s in val_part]
        total += len(val_part)
        for g, aperture in enumerate(grid):
            positive = [from_correlation(r, aperture) for r in pooled]
            negative = _negative_conceptors(positive)
            for label, states in val_states:
                pos = np.array([evidence(c, states) for c in positive])
                neg = np.array([evidence(c, states) for c in negative])
                if int(np.argmax(pos + neg)) == label:
                    correct[g] += 1
    accuracy = 100.0 * correct / total
    best = grid[int(np.argmax(accuracy))]
    return best, list(zip(grid, accuracy))


@dataclass(frozen=True)
class SweepCell:
    """One grid cell: accuracy stats over trials plus mean wall times."""

    value: object
    stats: dict
    mean_train_seconds: float
    mean_eval_seconds: float


@dataclass(frozen=True)
class SweepReport:
    axis: str
    grid: list
    cells: list[SweepCell]
    trials: int
    seed: int
    delta_quality: dict | None


def _trial_config(axis, cell_value, trial_seed, params, preprocessing):
    params = replace(params, seed=trial_seed)
    if axis == "reservoir_size":
        params = replace(params, n_neurons=int(cell_value))
    elif axis == "ablation":
        if cell_value not in ABLATION_CELLS:
            raise ValueError(f"unknown ablation cell {cell_value!r}")
        if cell_value in ("linear_activation", "both"):
            params = replace(params, activation="identity")
        if cell_value in ("no_interpolation", "both"):
            preprocessing = replace(preprocessing, resample_mode="none")
    return params, preprocessing


def _subset_for_training_size(dataset_train, n_per_class, trial_seed):
    labels = sorted({s.label for s in dataset_train})
    chosen: list[LabeledSeries] = []
    leftover: list[LabeledSeries] = []
    for j in labels:
        members = [s for s in dataset_train if s.label == j]
        order = list(range(len(members)))
        Rng(derive_seed(trial_seed, 31, j)).shuffle(order)
        chosen.extend(members[i] for i in order[:n_per_class])
        leftover.extend(members[i] for i in order[n_per_class:])
    return chosen, leftover


def _run_trial(axis, cell_index, cell_value, trial, dataset, base_seed,
               params, aperture, preprocessing):
    trial_seed = derive_seed(base_seed, cell_index, trial)
    params_t, prep_t = _trial_config(axis, cell_value, trial_seed, params,
                                     preprocessing)
    train_part = dataset.train
    test_part = dataset.test
    if axis == "training_size":
        train_part, leftover = _subset_for_training_size(
            dataset.train, int(cell_value), trial_seed)
        test_part = leftover + list(dataset.test)
    t0 = time.perf_counter()
    model = train(train_part, params_t, aperture, prep_t,
                  class_names=dataset.class_names)
    t1 = time.perf_counter()
    metrics = evaluate(model, test_part)
    t2 = time.perf_counter()
    return {"pos": metrics.overall_pos, "neg": metrics.overall_neg,
            "combined": metrics.overall_combined,
            "train_s": t1 - t0, "eval_s": t2 - t1}


def sweep(dataset, axis: str, grid, trials: int, seed: int,
          params: ReservoirParams,
          aperture: float = DEFAULT_APERTURE,
          preprocessing: PreprocessingConfig = PreprocessingConfig(),
          jobs: int | None = None) -> SweepReport:
    """Train/evaluate over a protocol grid with per-cell random reservoirs.

    Cell c, trial t uses the derived seed hash(seed, c, t), so any cell
    can be reproduced alone and results do not depend on scheduling.
    For the ablation axis the report carries combined-accuracy quality
    deltas against the ``original`` cell (positive means the
    modification scored lower).
    """
    if axis not in SWEEP_AXES:
        raise ValueError(f"axis must be one of {SWEEP_AXES}, got {axis!r}")
    grid = list(grid)
    if not grid or trials < 1:
        raise InsufficientDataError("need a nonempty grid and trials >= 1")
    if not dataset.test and axis != "training_size":
        raise InsufficientDataError("dataset has no test split")
    if axis == "training_size":
        counts = {}
        for s in dataset.train:
            counts[s.label] = counts.get(s.label, 0) + 1
        smallest = min(counts.values())
        if max(int(v) for v in grid) > smallest:
            raise InsufficientDataError(
                f"training_size grid exceeds the {smallest} samples"
                " available in the smallest class")
    if axis == "ablation" and "original" not in grid:
        raise ValueError("ablation grid must include the 'original' cell")
    tasks = [(c, value, t) for c, value in enumerate(grid)
             for t in range(trials)]
    workers = jobs if jobs and jobs > 0 else (os.cpu_count() or 1)
    if workers == 1:
        outcomes = [_run_trial(axis, c, value, t, dataset, seed, params,
                               aperture, preprocessing)
                    for c, value, t in tasks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_trial, axis, c, value, t, dataset,
                                   seed, params, aperture, preprocessing)
                       for c, value, t in tasks]
            outcomes = [f.result() for f in futures]
    cells = []
    for c, value in enumerate(grid):
        rows = [outcomes[c * trials + t] for t in range(trials)]
        stats = {}
        for family in ("pos", "neg", "combined"):
            scores = [row[family] for row in rows]
            stats[family] = {"mean": sum(scores) / trials,
                             "min": min(scores), "max": max(scores)}
        cells.append(SweepCell(
            value=value, stats=stats,
            mean_train_seconds=sum(r["train_s"] for r in rows) / trials,
            mean_eval_seconds=sum(r["eval_s"] for r in rows) / trials))
    delta = None
    if axis == "ablation":
        original = cells[grid.index("original")].stats["combined"]["mean"]
        delta = {str(cell.value): original - cell.stats["combined"]["mean"]
                 for cell in cells if cell.value != "original"}
    return SweepReport(axis=axis, grid=grid, cells=cells, trials=trials,
                       seed=seed, delta_quality=delta)


def sweep_to_csv(report: SweepReport) -> str:
    """Deterministic CSV: one row per cell and statistic family.

    Wall-time measurements are deliberately left out so reruns with the
    same seed are byte-identical; timings go to the console instead.
    """
    lines = ["axis,cell,family,mean,min,max"]
    for cell in report.cells:
        for family in ("pos", "neg", "combined"):
            s = cell.stats[family]
            lines.append(f"{report.axis},{cell.value},{family},"
                         f"{s['mean']:.17g},{s['min']:.17g},{s['max']:.17g}")
    if report.delta_quality is not None:
        for name in (c.value for c in report.cells if c.value != "original"):
            lines.append(f"{report.axis},{name},delta_combined,"
                         f"{report.delta_quality[str(name)]:.17g},,")
    return "\n".join(lines) + "\n"


def _mfcc_to_field(cfg: MfccConfig | None) -> str:
    if cfg is None:
        return "none"
    fmax = "none" if cfg.fmax_hz is None else f"{cfg.fmax_hz:.17g}"
    return (f"frame_length:{cfg.frame_length},hop_length:{cfg.hop_length},"
            f"n_mels:{cfg.n_mels},n_coeffs:{cfg.n_coeffs},"
            f"fmin_hz:{cfg.fmin_hz:.17g},fmax_hz:{fmax},"
            f"log_floor:{cfg.log_floor:.17g},keep_c0:{cfg.keep_c0}")


def _mfcc_from_field(raw: str) -> MfccConfig | None:
    if raw == "none":
        return None
    fields = dict(item.split(":", 1) for item in raw.split(","))
    return MfccConfig(
        frame_length=int(fields["frame_length"]),
        hop_length=int(fields["hop_length"]),
        n_mels=int(fields["n_mels"]),
        n_coeffs=int(fields["n_coeffs"]),
        fmin_hz=float(fields["fmin_hz"]),
        fmax_hz=None if fields["fmax_hz"] == "none" else float(fields["fmax_hz"]),
        log_floor=float(fields["log_floor"]),
        keep_c0=fields["keep_c0"] == "True")


def model_to_text(model: ClassifierModel) -> str:
    """Single versioned container with every trained component embedded."""
    prep = model.preprocessing
    lines = [
        "classifier v1",
        f"classes={','.join(model.classes)}",
        f"aperture={model.aperture:.17g}",
        f"normalize={prep.normalize}",
        f"resample_mode={prep.resample_mode}",
        f"resample_points={prep.resample_points}",
        f"resample_degree={prep.resample_degree}",
        f"mfcc={_mfcc_to_field(prep.mfcc)}",
    ]
    if model.normalization is not None:
        lines.append(matrix_to_text(
            model.normalization.shift.reshape(1, -1)).rstrip("\n"))
        lines.append(matrix_to_text(
            model.normalization.scale.reshape(1, -1)).rstrip("\n"))
    lines.append(reservoir_to_text(model.reservoir).rstrip("\n"))
    for conceptor in model.positive + model.negative:
        lines.append(conceptor_to_text(conceptor).rstrip("\n"))
    return "\n".join(lines) + "\n"


def model_from_text(text: str) -> ClassifierModel:
    lines = text.splitlines()
    if not lines or lines[0] != "classifier v1":
        raise ParseError("expected 'classifier v1' header")
    fields = {}
    for line in lines[1:8]:
        key, sep, value = line.partition("=")
        if not sep:
            raise ParseError(f"expected key=value line, got {line!r}")
        fields[key] = value
    classes = fields["classes"].split(",")
    prep = PreprocessingConfig(
        normalize=fields["normalize"] == "True",
        resample_mode=fields["resample_mode"],
        resample_points=int(fields["resample_points"]),
        resample_degree=int(fields["resample_degree"]),
        mfcc=_mfcc_from_field(fields["mfcc"]))
    pos = 8
    normalization = None
    if prep.normalize:
        # shift and scale are single-row matrix blocks: 2 lines each
        shift = matrix_from_text("\n".join(lines[pos:pos + 2]))
        scale = matrix_from_text("\n".join(lines[pos + 2:pos + 4]))
        normalization = NormalizationParams(shift=shift.ravel(),
                                            scale=scale.ravel())
        pos += 4
    conceptor_starts = [i for i in range(pos, len(lines))
                        if lines[i] == "conceptor v1"]
    m = len(classes)
    if len(conceptor_starts) != 2 * m:
        raise ParseError(
            f"expected {2 * m} conceptor blocks, found {len(conceptor_starts)}")
    reservoir = reservoir_from_text(
        "\n".join(lines[pos:conceptor_starts[0]]))
    bounds = conceptor_starts + [len(lines)]
    blocks = [conceptor_from_text("\n".join(lines[bounds[i]:bounds[i + 1]]))
              for i in range(2 * m)]
    return ClassifierModel(reservoir=reservoir, classes=classes,
                           positive=blocks[:m], negative=blocks[m:],
                           aperture=float(fields["aperture"]),
                           normalization=normalization, preprocessing=prep)
