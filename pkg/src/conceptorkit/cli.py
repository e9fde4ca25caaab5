"""Batch command line for the conceptor toolkit.

Subcommands: synth, features, train, predict, eval, sweep, selftest.
Every run prints its full effective configuration as one key=value line
and, when it writes an artifact, stores the same configuration beside it
as ``<artifact>.config``.  Re-running ``conceptorkit --config FILE``
reproduces the artifacts byte for byte; flags given next to --config
override the stored values.

Exit codes: 0 success, 1 usage error, 2 data error.  All artifact writes
are atomic (temp file in the target directory, then rename), and no
command mutates its input files.
"""

import argparse
import os
import shlex
import sys
import tempfile
import time

import numpy as np

from . import classify as cls
from .conceptor import and_, correlation, evidence, from_correlation, not_, or_
from .datasets import (
    SynthSpec,
    atomic_write_text,
    load_manifest,
    read_csv_series,
    synthesize,
    write_csv_series,
    write_manifest,
)
from .errors import ConceptorKitError, ParseError
from .features import LabeledSeries, MfccConfig, mfcc, read_wav, resample
from .numerics import Rng, matrix_from_text, matrix_to_text, solve_spd, spectral_radius, sym_eig
from .reservoir import ReservoirParams

ENV_SEED = "CONCEPTORKIT_SEED"


class UsageError(Exception):
    """Bad flags or values; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _boolean(raw: str) -> bool:
    if raw == "true":
        return True
    if raw == "false":
        return False
    raise ValueError(f"expected true or false, got {raw!r}")


def _float_or_none(raw: str):
    return None if raw == "none" else float(raw)


def _str_or_none(raw: str):
    return None if raw == "none" else raw


def _default_seed() -> int:
    raw = os.environ.get(ENV_SEED, "0")
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{ENV_SEED} must be an integer, got {raw!r}")


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return "none"
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def _config_text(settings: dict) -> str:
    return "".join(f"{key}={_fmt(value)}\n" for key, value in settings.items())


def _print_config(settings: dict) -> None:
    parts = [f"{k}={shlex.quote(_fmt(v))}" for k, v in settings.items()]
    print("config " + " ".join(parts))


def _load_config_file(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            lines = handle.read().splitlines()
    except OSError as exc:
        raise ParseError(f"cannot read config {path}: {exc}")
    settings = {}
    for number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ParseError(f"expected key=value in config {path},"
                             f" line {number}")
        settings[key] = value
    return settings


def _merge_config(argv: list[str]) -> tuple[str, list[str]]:
    """Resolve the subcommand and flag list, expanding --config files."""
    argv = list(argv)
    config_path = None
    if "--config" in argv:
        at = argv.index("--config")
        if at + 1 >= len(argv):
            raise UsageError("--config requires a file path")
        config_path = argv[at + 1]
        del argv[at:at + 2]
    stored: list[str] = []
    command = None
    if config_path is not None:
        settings = _load_config_file(config_path)
        command = settings.pop("command", None)
        for key, value in settings.items():
            stored.extend([f"--{key}", value])
    if argv and not argv[0].startswith("-"):
        command = argv[0]
        argv = argv[1:]
    if command is None:
        raise UsageError("missing subcommand "
                         "(synth, features, train, predict, eval, sweep, selftest)")
    return command, stored + argv


def _settings_from(args: argparse.Namespace, command: str,
                   order: list[str]) -> dict:
    settings = {"command": command}
    for key in order:
        settings[key] = getattr(args, key.replace("-", "_"))
    return settings


def _write_artifact(path: str, text: str, settings: dict) -> None:
    atomic_write_text(path, text)
    atomic_write_text(path + ".config", _config_text(settings))


def _add_reservoir_flags(parser: _Parser) -> None:
    parser.add_argument("--reservoir-size", type=int, default=10)
    parser.add_argument("--spectral-radius", type=float, default=0.9)
    parser.add_argument("--input-scaling", type=float, default=1.0)
    parser.add_argument("--bias-scaling", type=float, default=0.2)
    parser.add_argument("--activation", choices=("tanh", "linear"),
                        default="tanh")
    parser.add_argument("--washout", type=int, default=0)


def _add_preprocessing_flags(parser: _Parser) -> None:
    parser.add_argument("--normalize", type=_boolean, default=True)
    parser.add_argument("--resample", choices=("polynomial", "linear", "none"),
                        default="polynomial")
    parser.add_argument("--resample-points", type=int, default=4)
    parser.add_argument("--resample-degree", type=int, default=3)


_RESERVOIR_KEYS = ["reservoir-size", "spectral-radius", "input-scaling",
                   "bias-scaling", "activation", "washout"]
_PREP_KEYS = ["normalize", "resample", "resample-points", "resample-degree"]


def _reservoir_params(args: argparse.Namespace) -> ReservoirParams:
    activation = "identity" if args.activation == "linear" else args.activation
    return ReservoirParams(n_neurons=args.reservoir_size,
                           spectral_radius_target=args.spectral_radius,
                           input_scaling=args.input_scaling,
                           bias_scaling=args.bias_scaling,
                           activation=activation,
                           washout=args.washout,
                           seed=args.seed)


def _preprocessing(args: argparse.Namespace) -> cls.PreprocessingConfig:
    return cls.PreprocessingConfig(normalize=args.normalize,
                                   resample_mode=args.resample,
                                   resample_points=args.resample_points,
                                   resample_degree=args.resample_degree)


def _cmd_synth(flags: list[str]) -> int:
    parser = _Parser(prog="conceptorkit synth")
    parser.add_argument("--task", choices=("sinusoid", "maneuver"),
                        required=True)
    parser.add_argument("--classes", type=int, required=True)
    parser.add_argument("--train-per-class", type=int, required=True)
    parser.add_argument("--test-per-class", type=int, required=True)
    parser.add_argument("--noise-std", type=float, default=0.3)
    parser.add_argument("--min-steps", type=int, default=20)
    parser.add_argument("--max-steps", type=int, default=100)
    parser.add_argument("--channels", type=int, default=1)
    parser.add_argument("--seed", type=int, default=_default_seed())
    parser.add_argument("--out", required=True)
    args = parser.parse_args(flags)
    settings = _settings_from(args, "synth", [
        "task", "classes", "train-per-class", "test-per-class", "noise-std",
        "min-steps", "max-steps", "channels", "seed", "out"])
    _print_config(settings)
    spec = SynthSpec(task=args.task, classes=args.classes,
                     train_per_class=args.train_per_class,
                     test_per_class=args.test_per_class,
                     noise_std=args.noise_std, min_steps=args.min_steps,
                     max_steps=args.max_steps, seed=args.seed,
                     channels=args.channels)
    dataset = synthesize(spec)
    manifest = write_manifest(dataset, args.out)
    atomic_write_text(manifest + ".config", _config_text(settings))
    print(f"synth wrote {len(dataset.train)} train + {len(dataset.test)} test"
          f" series ({len(dataset.class_names)} classes) -> {manifest}")
    return 0


def _cmd_features(flags: list[str]) -> int:
    parser = _Parser(prog="conceptorkit features")
    parser.add_argument("--wav", required=True)
    parser.add_argument("--out", required=True)
    parser.add_argument("--frame-length", type=int, default=512)
    parser.add_argument("--hop-length", type=int, default=128)
    parser.add_argument("--n-mels", type=int, default=26)
    parser.add_argument("--n-coeffs", type=int, default=12)
    parser.add_argument("--fmin-hz", type=float, default=0.0)
    parser.add_argument("--fmax-hz", type=_float_or_none, default=None)
    parser.add_argument("--keep-c0", type=_boolean, default=False)
    args = parser.parse_args(flags)
    settings = _settings_from(args, "features", [
        "wav", "out", "frame-length", "hop-length", "n-mels", "n-coeffs",
        "fmin-hz", "fmax-hz", "keep-c0"])
    _print_config(settings)
    samples, rate = read_wav(args.wav)
    cfg = MfccConfig(frame_length=args.frame_length,
                     hop_length=args.hop_length, n_mels=args.n_mels,
                     n_coeffs=args.n_coeffs, fmin_hz=args.fmin_hz,
                     fmax_hz=args.fmax_hz, keep_c0=args.keep_c0)
    series = mfcc(samples, rate, cfg)
    write_csv_series(series, args.out)
    atomic_write_text(args.out + ".config", _config_text(settings))
    print(f"features wrote {series.channels} coefficients x {series.steps}"
          f" frames -> {args.out}")
    return 0


def _cmd_train(flags: list[str]) -> int:
    parser = _Parser(prog="conceptorkit train")
    parser.add_argument("--data", required=True)
    parser.add_argument("--out", required=True)
    parser.add_argument("--seed", type=int, default=_default_seed())
    parser.add_argument("--aperture", type=float, default=cls.DEFAULT_APERTURE)
    parser.add_argument("--cv", type=_boolean, default=False)
    parser.add_argument("--cv-grid", default="")
    parser.add_argument("--folds", type=int, default=5)
    _add_reservoir_flags(parser)
    _add_preprocessing_flags(parser)
    args = parser.parse_args(flags)
    settings = _settings_from(args, "train", [
        "data", "out", "seed", "aperture", "cv", "cv-grid", "folds",
        *_RESERVOIR_KEYS, *_PREP_KEYS])
    _print_config(settings)
    dataset = load_manifest(args.data)
    params = _reservoir_params(args)
    preprocessing = _preprocessing(args)
    aperture = args.aperture
    started = time.perf_counter()
    if args.cv:
        grid = [float(v) for v in args.cv_grid.split(",")] if args.cv_grid \
            else None
        aperture, table = cls.cross_validate_aperture(
            dataset.train, params, grid=grid, folds=args.folds,
            preprocessing=preprocessing)
        for value, accuracy in table:
            print(f"cv aperture={value:.6g} accuracy={accuracy:.2f}%")
    model = cls.train(dataset.train, params, aperture, preprocessing,
                      class_names=dataset.class_names)
    elapsed = time.perf_counter() - started
    _write_artifact(args.out, cls.model_to_text(model), settings)
    print(f"train fitted {len(dataset.train)} series,"
          f" {len(model.classes)} classes, N={params.n_neurons},"
          f" aperture={aperture:.6g} in {elapsed:.3f}s -> {args.out}")
    return 0


def _load_input_series(path: str, model: cls.ClassifierModel) -> LabeledSeries:
    if path.endswith(".wav"):
        samples, rate = read_wav(path)
        return mfcc(samples, rate, model.preprocessing.mfcc or MfccConfig())
    return read_csv_series(path)


def _cmd_predict(flags: list[str]) -> int:
    parser = _Parser(prog="conceptorkit predict")
    parser.add_argument("--model", required=True)
    parser.add_argument("--input", required=True)
    parser.add_argument("--threshold", type=_float_or_none, default=None)
    parser.add_argument("--out", type=_str_or_none, default=None)
    args = parser.parse_args(flags)
    settings = _settings_from(args, "predict",
                              ["model", "input", "threshold", "out"])
    _print_config(settings)
    with open(args.model, "r", encoding="utf-8") as handle:
        model = cls.model_from_text(handle.read())
    sample = _load_input_series(args.input, model)
    report = cls.evidences(model, sample)
    decided = cls.predict(model, sample, open_set_threshold=args.threshold)
    name = "REJECT" if decided == cls.REJECT else model.classes[decided]
    lines = ["class,pos,neg,combined"]
    for j, label in enumerate(model.classes):
        lines.append(f"{label},{report.pos[j]:.17g},{report.neg[j]:.17g},"
                     f"{report.combined[j]:.17g}")
    lines.append(f"decided,{name},,")
    text = "\n".join(lines) + "\n"
    if args.out is not None:
        _write_artifact(args.out, text, settings)
    else:
        print(text, end="")
    print(f"predicted={name} margin={report.margin:.6g}")
    return 0


def _metrics_text(metrics: cls.Metrics, classes: list[str]) -> str:
    lines = ["section,name,value"]
    for family, values in (("per_class_pos", metrics.per_class_pos),
                           ("per_class_neg", metrics.per_class_neg),
                           ("per_class_combined", metrics.per_class_combined)):
        for label, value in zip(classes, values):
            lines.append(f"{family},{label},{value:.17g}")
    lines.append(f"overall,pos,{metrics.overall_pos:.17g}")
    lines.append(f"overall,neg,{metrics.overall_neg:.17g}")
    lines.append(f"overall,combined,{metrics.overall_combined:.17g}")
    lines.append(f"overall,error_rate,{metrics.error_rate:.17g}")
    for i, truth in enumerate(classes):
        for j, guess in enumerate(classes):
            lines.append(f"confusion,{truth}:{guess},"
                         f"{metrics.confusion[i, j]}")
    return "\n".join(lines) + "\n"


def _cmd_eval(flags: list[str]) -> int:
    parser = _Parser(prog="conceptorkit eval")
    parser.add_argument("--model", required=True)
    parser.add_argument("--data", required=True)
    parser.add_argument("--split", choices=("train", "test"), default="test")
    parser.add_argument("--out", required=True)
    args = parser.parse_args(flags)
    settings = _settings_from(args, "eval", ["model", "data", "split", "out"])
    _print_config(settings)
    with open(args.model, "r", encoding="utf-8") as handle:
        model = cls.model_from_text(handle.read())
    dataset = load_manifest(args.data)
    chosen = dataset.train if args.split == "train" else dataset.test
    started = time.perf_counter()
    metrics = cls.evaluate(model, chosen)
    elapsed = time.perf_counter() - started
    _write_artifact(args.out, _metrics_text(metrics, model.classes), settings)
    print(f"eval error_rate={metrics.error_rate:.4f}"
          f" combined={metrics.overall_combined:.2f}%"
          f" on {len(chosen)} series in {elapsed:.3f}s -> {args.out}")
    return 0


def _parse_grid(axis: str, raw: str) -> list:
    cells = [cell.strip() for cell in raw.split(",") if cell.strip()]
    if not cells:
        raise UsageError("--grid must list at least one cell")
    if axis == "ablation":
        names = [cell.replace("-", "_") for cell in cells]
        for name in names:
            if name not in cls.ABLATION_CELLS:
                raise UsageError(f"--grid cell {name!r} is not one of"
                                 f" {', '.join(cls.ABLATION_CELLS)}")
        return names
    try:
        return [int(cell) for cell in cells]
    except ValueError:
        raise UsageError(f"--grid for axis {axis} takes integers, got {raw!r}")


def _cmd_sweep(flags: list[str]) -> int:
    parser = _Parser(prog="conceptorkit sweep")
    parser.add_argument("--data", type=_str_or_none, default=None)
    parser.add_argument("--task", type=_str_or_none, default=None)
    parser.add_argument("--classes", type=int, default=7)
    parser.add_argument("--train-per-class", type=int, default=8)
    parser.add_argument("--test-per-class", type=int, default=6)
    parser.add_argument("--noise-std", type=float, default=0.3)
    parser.add_argument("--min-steps", type=int, default=20)
    parser.add_argument("--max-steps", type=int, default=100)
    parser.add_argument("--channels", type=int, default=1)
    parser.add_argument("--data-seed", type=int, default=0)
    parser.add_argument("--axis", required=True,
                        choices=("reservoir-size", "training-size", "ablation"))
    parser.add_argument("--grid", required=True)
    parser.add_argument("--trials", type=int, default=10)
    parser.add_argument("--seed", type=int, default=_default_seed())
    parser.add_argument("--jobs", type=int, default=0)
    parser.add_argument("--aperture", type=float, default=cls.DEFAULT_APERTURE)
    parser.add_argument("--out", required=True)
    _add_reservoir_flags(parser)
    _add_preprocessing_flags(parser)
    args = parser.parse_args(flags)
    settings = _settings_from(args, "sweep", [
        "data", "task", "classes", "train-per-class", "test-per-class",
        "noise-std", "min-steps", "max-steps", "channels", "data-seed",
        "axis", "grid", "trials", "seed", "jobs", "aperture", "out",
        *_RESERVOIR_KEYS, *_PREP_KEYS])
    _print_config(settings)
    if (args.data is None) == (args.task is None):
        raise UsageError("give exactly one of --data or --task")
    if args.data is not None:
        dataset = load_manifest(args.data)
    else:
        if args.task not in ("sinusoid", "maneuver"):
            raise UsageError(f"--task must be sinusoid or maneuver,"
                             f" got {args.task!r}")
        dataset = synthesize(SynthSpec(
            task=args.task, classes=args.classes,
            train_per_class=args.train_per_class,
            test_per_class=args.test_per_class, noise_std=args.noise_std,
            min_steps=args.min_steps, max_steps=args.max_steps,
            seed=args.data_seed, channels=args.channels))
    axis = args.axis.replace("-", "_")
    grid = _parse_grid(axis, args.grid)
    started = time.perf_counter()
    report = cls.sweep(dataset, axis, grid, trials=args.trials,
                       seed=args.seed, params=_reservoir_params(args),
                       aperture=args.aperture,
                       preprocessing=_preprocessing(args),
                       jobs=args.jobs if args.jobs > 0 else None)
    elapsed = time.perf_counter() - started
    _write_artifact(args.out, cls.sweep_to_csv(report), settings)
    for cell in report.cells:
        stats = cell.stats["combined"]
        print(f"cell {cell.value}: combined mean={stats['mean']:.2f}%"
              f" min={stats['min']:.2f}% max={stats['max']:.2f}%"
              f" train={cell.mean_train_seconds:.3f}s"
              f" eval={cell.mean_eval_seconds:.3f}s")
    if report.delta_quality is not None:
        for name, delta in report.delta_quality.items():
            print(f"delta {name}: {delta:+.2f} points vs original")
    print(f"sweep {axis} over {len(grid)} cells x {args.trials} trials"
          f" in {elapsed:.2f}s -> {args.out}")
    return 0


def _selftest_checks() -> list[tuple[str, object]]:
    def rng_basics():
        rng = Rng(1)
        draws = [rng.random() for _ in range(1000)]
        assert all(0.0 <= d < 1.0 for d in draws)
        items = list(range(30))
        rng.shuffle(items)
        assert sorted(items) == list(range(30))

    def eigen_reconstruction():
        rng = Rng(2)
        a = np.array(rng.normals(36)).reshape(6, 6)
        a = (a + a.T) / 2.0
        eig = sym_eig(a)
        rebuilt = eig.eigenvectors @ np.diag(eig.eigenvalues) \
            @ eig.eigenvectors.T
        assert np.max(np.abs(rebuilt - a)) < 1e-9

    def spd_solver():
        rng = Rng(3)
        m = np.array(rng.normals(25)).reshape(5, 5)
        a = m @ m.T + 5.0 * np.eye(5)
        b = np.array(rng.normals(5)).reshape(5, 1)
        x = solve_spd(a, b)
        assert np.max(np.abs(a @ x - b)) < 1e-8

    def radius_measurement():
        value = spectral_radius(np.diag([0.7, -0.2]), Rng(4))
        assert abs(value - 0.7) < 1e-6

    def spectrum_law():
        rng = Rng(5)
        corr = correlation(np.array(rng.normals(16)).reshape(4, 4))
        c = from_correlation(corr, 2.0)
        sigma = np.sort(sym_eig(corr.r).eigenvalues)
        mapped = sigma / (sigma + 2.0 ** -2)
        got = np.sort(sym_eig(c.c).eigenvalues)
        assert np.max(np.abs(got - mapped)) < 1e-8

    def boolean_identities():
        rng = Rng(6)
        c = from_correlation(
            correlation(np.array(rng.normals(24)).reshape(4, 6)), 1.5)
        assert np.max(np.abs(not_(not_(c)).c - c.c)) <= 2.0 ** -52
        d = from_correlation(
            correlation(np.array(rng.normals(32)).reshape(4, 8)), 3.0)
        left = not_(or_(c, d)).c
        right = and_(not_(c), not_(d)).c
        assert np.max(np.abs(left - right)) <= 2.0 ** -52

    def evidence_of_identity():
        from .conceptor import Conceptor
        c = Conceptor(c=np.eye(3))
        states = np.array(Rng(7).normals(15)).reshape(3, 5)
        assert abs(evidence(c, states) - 1.0) < 1e-12

    def quadratic_resample():
        t = np.linspace(0.0, 1.0, 40)
        series = LabeledSeries(values=(3.0 * t * t - t + 0.5)[None, :])
        out = resample(series, 7, mode="polynomial", degree=3)
        u = np.linspace(0.0, 1.0, 7)
        assert np.max(np.abs(out.values[0] - (3.0 * u * u - u + 0.5))) < 1e-9

    def mfcc_silence():
        out = mfcc(np.zeros(4000), 8000.0)
        assert out.steps == (4000 - 512) // 128 + 1
        assert np.max(np.abs(out.values)) < 1e-9

    def csv_round_trip():
        series = LabeledSeries(
            values=np.array(Rng(8).normals(20)).reshape(2, 10))
        with tempfile.TemporaryDirectory() as root:
            path = os.path.join(root, "series.csv")
            write_csv_series(series, path)
            again = read_csv_series(path)
        assert np.array_equal(series.values, again.values)

    def matrix_round_trip():
        m = np.array(Rng(9).normals(12)).reshape(3, 4)
        assert np.array_equal(matrix_from_text(matrix_to_text(m)), m)

    def end_to_end():
        rng = Rng(10)
        train = []
        for label, level in ((0, 0.1), (1, 0.9)):
            for _ in range(4):
                values = level + 0.01 * np.array(rng.normals(30))
                train.append(LabeledSeries(values=values[None, :],
                                           label=label))
        model = cls.train(train, ReservoirParams(n_neurons=5, seed=11),
                          aperture=5.0,
                          preprocessing=cls.PreprocessingConfig(
                              resample_mode="none"))
        assert all(cls.predict(model, s) == s.label for s in train)
        assert cls.model_from_text(cls.model_to_text(model)).classes \
            == model.classes

    return [("rng_basics", rng_basics),
            ("eigen_reconstruction", eigen_reconstruction),
            ("spd_solver", spd_solver),
            ("radius_measurement", radius_measurement),
            ("spectrum_law", spectrum_law),
            ("boolean_identities", boolean_identities),
            ("evidence_of_identity", evidence_of_identity),
            ("quadratic_resample", quadratic_resample),
            ("mfcc_silence", mfcc_silence),
            ("csv_round_trip", csv_round_trip),
            ("matrix_round_trip", matrix_round_trip),
            ("end_to_end", end_to_end)]


def _cmd_selftest(flags: list[str]) -> int:
    parser = _Parser(prog="conceptorkit selftest")
    parser.parse_args(flags)
    checks = _selftest_checks()
    for name, check in checks:
        try:
            check()
        except Exception as exc:
            print(f"selftest FAILED at {name}: {exc}", file=sys.stderr)
            return 2
    print(f"selftest: {len(checks)} checks ok")
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "features": _cmd_features,
    "train": _cmd_train,
    "predict": _cmd_predict,
    "eval": _cmd_eval,
    "sweep": _cmd_sweep,
    "selftest": _cmd_selftest,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    try:
        command, flags = _merge_config(argv)
        handler = _COMMANDS.get(command)
        if handler is None:
            raise UsageError(f"unknown subcommand {command!r}; expected one of"
                             f" {', '.join(sorted(_COMMANDS))}")
        return handler(flags)
    except (UsageError, ValueError) as exc:
        print(f"conceptorkit: usage error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:
        return int(exc.code or 0)
    except (ConceptorKitError, OSError) as exc:
        print(f"conceptorkit: data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
