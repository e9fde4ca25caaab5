"""End-to-end tests for the batch command line."""

import os
import wave

import numpy as np

from conceptorkit.cli import main


def _run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def _synth(capsys, root, task="maneuver", classes="3", train="4", test="3",
           seed="11"):
    out = os.path.join(root, "data")
    code, _, _ = _run(capsys, "synth", "--task", task, "--classes", classes,
                      "--train-per-class", train, "--test-per-class", test,
                      "--seed", seed, "--out", out)
    assert code == 0
    return os.path.join(out, "manifest.txt")


def _train(capsys, manifest, model_path, *extra):
    code, out, _ = _run(capsys, "train", "--data", manifest,
                        "--out", model_path, "--reservoir-size", "8",
                        "--seed", "3", *extra)
    assert code == 0
    return out


class TestSynth:
    def test_writes_manifest_series_and_config(self, tmp_path, capsys):
        manifest = _synth(capsys, str(tmp_path))
        assert os.path.exists(manifest)
        assert os.path.exists(manifest + ".config")
        with open(manifest, "r", encoding="utf-8") as handle:
            body = handle.read()
        assert body.startswith("#schema: channels=4")
        root = os.path.dirname(manifest)
        csvs = [f for f in os.listdir(root) if f.endswith(".csv")]
        assert len(csvs) == 3 * (4 + 3)

    def test_config_line_printed(self, tmp_path, capsys):
        out = os.path.join(str(tmp_path), "data")
        code, stdout, _ = _run(capsys, "synth", "--task", "sinusoid",
                               "--classes", "2", "--train-per-class", "2",
                               "--test-per-class", "1", "--seed", "4",
                               "--out", out)
        assert code == 0
        first = stdout.splitlines()[0]
        assert first.startswith("config command=synth")
        assert "seed=4" in first

    def test_env_var_supplies_default_seed(self, tmp_path, capsys,
                                           monkeypatch):
        monkeypatch.setenv("CONCEPTORKIT_SEED", "77")
        out = os.path.join(str(tmp_path), "data")
        code, stdout, _ = _run(capsys, "synth", "--task", "sinusoid",
                               "--classes", "2", "--train-per-class", "2",
                               "--test-per-class", "1", "--out", out)
        assert code == 0
        assert "seed=77" in stdout.splitlines()[0]

    def test_explicit_seed_beats_env_var(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("CONCEPTORKIT_SEED", "77")
        out = os.path.join(str(tmp_path), "data")
        code, stdout, _ = _run(capsys, "synth", "--task", "sinusoid",
                               "--classes", "2", "--train-per-class", "2",
                               "--test-per-class", "1", "--seed", "5",
                               "--out", out)
        assert code == 0
        assert "seed=5" in stdout.splitlines()[0]

    def test_bad_env_var_is_usage_error(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("CONCEPTORKIT_SEED", "x")
        code, _, err = _run(capsys, "synth", "--task", "sinusoid",
                            "--classes", "2", "--train-per-class", "2",
                            "--test-per-class", "1",
                            "--out", os.path.join(str(tmp_path), "d"))
        assert code == 1
        assert "CONCEPTORKIT_SEED" in err


class TestTrainPredictEval:
    def test_round_trip_on_training_sample(self, tmp_path, capsys):
        manifest = _synth(capsys, str(tmp_path), classes="7", train="6",
                          test="4")
        model = os.path.join(str(tmp_path), "model.txt")
        summary = _train(capsys, manifest, model)
        assert "train fitted 42 series" in summary
        assert os.path.exists(model)
        assert os.path.exists(model + ".config")
        sample = os.path.join(os.path.dirname(manifest),
                              "train_stop_0000.csv")
        code, out, _ = _run(capsys, "predict", "--model", model,
                            "--input", sample)
        assert code == 0
        assert "predicted=stop" in out

    def test_predict_writes_report_artifact(self, tmp_path, capsys):
        manifest = _synth(capsys, str(tmp_path))
        model = os.path.join(str(tmp_path), "model.txt")
        _train(capsys, manifest, model)
        sample = os.path.join(os.path.dirname(manifest),
                              "test_stop_0000.csv")
        report = os.path.join(str(tmp_path), "report.csv")
        code, _, _ = _run(capsys, "predict", "--model", model,
                          "--input", sample, "--out", report)
        assert code == 0
        with open(report, "r", encoding="utf-8") as handle:
            body = handle.read()
        assert body.startswith("class,pos,neg,combined")
        assert "decided,stop" in body
        assert os.path.exists(report + ".config")

    def test_predict_threshold_rejects(self, tmp_path, capsys):
        manifest = _synth(capsys, str(tmp_path))
        model = os.path.join(str(tmp_path), "model.txt")
        _train(capsys, manifest, model)
        sample = os.path.join(os.path.dirname(manifest),
                              "test_stop_0000.csv")
        code, out, _ = _run(capsys, "predict", "--model", model,
                            "--input", sample, "--threshold", "2.5")
        assert code == 0
        assert "predicted=REJECT" in out

    def test_eval_metrics_file(self, tmp_path, capsys):
        manifest = _synth(capsys, str(tmp_path))
        model = os.path.join(str(tmp_path), "model.txt")
        _train(capsys, manifest, model)
        metrics = os.path.join(str(tmp_path), "metrics.csv")
        code, out, _ = _run(capsys, "eval", "--model", model,
                            "--data", manifest, "--out", metrics)
        assert code == 0
        assert "eval error_rate=" in out
        with open(metrics, "r", encoding="utf-8") as handle:
            lines = handle.read().splitlines()
        assert lines[0] == "section,name,value"
        assert any(line.startswith("overall,error_rate,") for line in lines)
        assert any(line.startswith("confusion,stop:stop,") for line in lines)

    def test_train_with_cross_validation(self, tmp_path, capsys):
        manifest = _synth(capsys, str(tmp_path), train="4")
        model = os.path.join(str(tmp_path), "model.txt")
        out = _train(capsys, manifest, model, "--cv", "true",
                     "--cv-grid", "1,10", "--folds", "2")
        assert "cv aperture=1 " in out
        assert "cv aperture=10 " in out

    def test_inputs_are_not_mutated(self, tmp_path, capsys):
        manifest = _synth(capsys, str(tmp_path))
        root = os.path.dirname(manifest)
        before = {}
        for name in sorted(os.listdir(root)):
            with open(os.path.join(root, name), "rb") as handle:
                before[name] = handle.read()
        model = os.path.join(str(tmp_path), "model.txt")
        _train(capsys, manifest, model)
        _run(capsys, "eval", "--model", model, "--data", manifest,
             "--out", os.path.join(str(tmp_path), "m.csv"))
        for name, body in before.items():
            with open(os.path.join(root, name), "rb") as handle:
                assert handle.read() == body


class TestSweep:
    def _sweep(self, capsys, out, *extra):
        return _run(capsys, "sweep", "--task", "maneuver", "--classes", "3",
                    "--train-per-class", "4", "--test-per-class", "3",
                    "--data-seed", "11", "--axis", "reservoir-size",
                    "--grid", "4,8", "--trials", "2", "--seed", "1",
                    "--out", out, *extra)

    def test_rerun_is_byte_identical(self, tmp_path, capsys):
        out = os.path.join(str(tmp_path), "sweep.csv")
        code, _, _ = self._sweep(capsys, out)
        assert code == 0
        with open(out, "rb") as handle:
            first = handle.read()
        code, _, _ = self._sweep(capsys, out)
        assert code == 0
        with open(out, "rb") as handle:
            assert handle.read() == first

    def test_jobs_do_not_change_output(self, tmp_path, capsys):
        out1 = os.path.join(str(tmp_path), "s1.csv")
        out2 = os.path.join(str(tmp_path), "s2.csv")
        assert self._sweep(capsys, out1, "--jobs", "1")[0] == 0
        assert self._sweep(capsys, out2, "--jobs", "3")[0] == 0
        with open(out1, "rb") as a, open(out2, "rb") as b:
            assert a.read() == b.read()

    def test_config_file_reproduces_run(self, tmp_path, capsys):
        out = os.path.join(str(tmp_path), "sweep.csv")
        assert self._sweep(capsys, out)[0] == 0
        with open(out, "rb") as handle:
            first = handle.read()
        with open(out + ".config", "rb") as handle:
            config_first = handle.read()
        code, _, _ = _run(capsys, "--config", out + ".config")
        assert code == 0
        with open(out, "rb") as handle:
            assert handle.read() == first
        with open(out + ".config", "rb") as handle:
            assert handle.read() == config_first

    def test_config_flags_can_be_overridden(self, tmp_path, capsys):
        out = os.path.join(str(tmp_path), "sweep.csv")
        assert self._sweep(capsys, out)[0] == 0
        code, stdout, _ = _run(capsys, "--config", out + ".config",
                               "--trials", "3")
        assert code == 0
        assert "trials=3" in stdout.splitlines()[0]

    def test_ablation_prints_deltas(self, tmp_path, capsys):
        out = os.path.join(str(tmp_path), "ab.csv")
        code, stdout, _ = _run(
            capsys, "sweep", "--task", "maneuver", "--classes", "3",
            "--train-per-class", "4", "--test-per-class", "3",
            "--data-seed", "11", "--axis", "ablation",
            "--grid", "original,linear-activation", "--trials", "2",
            "--seed", "1", "--out", out)
        assert code == 0
        assert "delta linear_activation:" in stdout
        with open(out, "r", encoding="utf-8") as handle:
            assert "delta_combined" in handle.read()

    def test_data_and_task_are_exclusive(self, tmp_path, capsys):
        out = os.path.join(str(tmp_path), "s.csv")
        code, _, err = _run(capsys, "sweep", "--data", "x", "--task",
                            "maneuver", "--axis", "reservoir-size",
                            "--grid", "4", "--out", out)
        assert code == 1
        assert "exactly one" in err

    def test_bad_ablation_cell(self, tmp_path, capsys):
        out = os.path.join(str(tmp_path), "s.csv")
        code, _, err = _run(capsys, "sweep", "--task", "maneuver",
                            "--axis", "ablation", "--grid", "original,nope",
                            "--out", out)
        assert code == 1
        assert "nope" in err


class TestFeatures:
    def _write_tone(self, path, freq=440.0, seconds=1.0, rate=8000):
        t = np.arange(int(seconds * rate)) / rate
        pcm = (0.5 * np.sin(2.0 * np.pi * freq * t) * 32767.0).astype("<i2")
        with wave.open(path, "wb") as handle:
            handle.setnchannels(1)
            handle.setsampwidth(2)
            handle.setframerate(rate)
            handle.writeframes(pcm.tobytes())

    def test_wav_to_mfcc_csv(self, tmp_path, capsys):
        wav = os.path.join(str(tmp_path), "tone.wav")
        self._write_tone(wav)
        out = os.path.join(str(tmp_path), "tone.csv")
        code, stdout, _ = _run(capsys, "features", "--wav", wav,
                               "--out", out)
        assert code == 0
        assert "features wrote 12 coefficients" in stdout
        with open(out, "r", encoding="utf-8") as handle:
            header = handle.readline().strip()
        assert header == ",".join(f"c{i}" for i in range(12))
        assert os.path.exists(out + ".config")

    def test_wav_prediction_end_to_end(self, tmp_path, capsys):
        root = str(tmp_path)
        rows = []
        for label, freq in (("low", 400.0), ("high", 1600.0)):
            for i in range(3):
                wav = os.path.join(root, f"{label}{i}.wav")
                self._write_tone(wav, freq=freq, seconds=1.0 + 0.1 * i)
                csv = os.path.join(root, f"{label}{i}.csv")
                assert _run(capsys, "features", "--wav", wav,
                            "--out", csv)[0] == 0
                rows.append(f"{label}{i}.csv,{label},train,csv")
        manifest = os.path.join(root, "manifest.txt")
        with open(manifest, "w", encoding="utf-8") as handle:
            handle.write("#schema: channels=12\npath,label,split,kind\n")
            handle.write("\n".join(rows) + "\n")
        model = os.path.join(root, "model.txt")
        code, _, _ = _run(capsys, "train", "--data", manifest,
                          "--out", model, "--reservoir-size", "8",
                          "--seed", "3", "--resample", "none")
        assert code == 0
        probe = os.path.join(root, "probe.wav")
        self._write_tone(probe, freq=1600.0, seconds=1.2)
        code, out, _ = _run(capsys, "predict", "--model", model,
                            "--input", probe)
        assert code == 0
        assert "predicted=high" in out

    def test_rejects_missing_wav(self, tmp_path, capsys):
        code, _, err = _run(capsys, "features", "--wav",
                            os.path.join(str(tmp_path), "nope.wav"),
                            "--out", os.path.join(str(tmp_path), "o.csv"))
        assert code == 2
        assert "nope.wav" in err


class TestExitCodes:
    def test_missing_subcommand(self, capsys):
        code, _, err = _run(capsys)
        assert code == 1
        assert "subcommand" in err

    def test_unknown_subcommand(self, capsys):
        code, _, err = _run(capsys, "frobnicate")
        assert code == 1
        assert "frobnicate" in err

    def test_unknown_flag(self, capsys):
        code, _, err = _run(capsys, "train", "--data", "x", "--out", "y",
                            "--bogus")
        assert code == 1
        assert "--bogus" in err

    def test_missing_required_flag(self, capsys):
        code, _, err = _run(capsys, "train", "--data", "x")
        assert code == 1
        assert "--out" in err

    def test_bad_boolean_value(self, tmp_path, capsys):
        code, _, err = _run(capsys, "train", "--data", "x", "--out", "y",
                            "--normalize", "maybe")
        assert code == 1
        assert "normalize" in err

    def test_missing_model_is_data_error(self, tmp_path, capsys):
        code, _, err = _run(capsys, "predict", "--model",
                            os.path.join(str(tmp_path), "missing.txt"),
                            "--input", "x.csv")
        assert code == 2
        assert "missing.txt" in err

    def test_missing_manifest_is_data_error(self, tmp_path, capsys):
        code, _, _ = _run(capsys, "train", "--data",
                          os.path.join(str(tmp_path), "nope.txt"),
                          "--out", os.path.join(str(tmp_path), "m.txt"))
        assert code == 2

    def test_malformed_config_is_data_error(self, tmp_path, capsys):
        bad = os.path.join(str(tmp_path), "bad.config")
        with open(bad, "w", encoding="utf-8") as handle:
            handle.write("this line has no equals sign\n")
        code, _, err = _run(capsys, "--config", bad)
        assert code == 2
        assert "line 1" in err

    def test_selftest_passes(self, capsys):
        code, out, _ = _run(capsys, "selftest")
        assert code == 0
        assert "checks ok" in out

    def test_help_exits_zero(self, capsys):
        assert main(["train", "--help"]) == 0
        assert "--reservoir-size" in capsys.readouterr().out
