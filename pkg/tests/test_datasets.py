import numpy as np
import pytest

from conceptorkit.datasets import (
    Dataset,
    MANEUVER_NAMES,
    SINUSOID_BASE_HZ,
    SINUSOID_RATE_HZ,
    SynthSpec,
    load_manifest,
    read_csv_series,
    synth_maneuver,
    synth_sinusoid,
    write_csv_series,
    write_manifest,
)
from conceptorkit.errors import (
    BadSpecError,
    EmptyDatasetError,
    MissingFileError,
    ParseError,
    SchemaMismatchError,
)
from conceptorkit.features import LabeledSeries
from conceptorkit.numerics import Rng, random_matrix


def _sin_spec(**overrides):
    base = dict(task="sinusoid", classes=4, train_per_class=3,
                test_per_class=2, noise_std=0.05, min_steps=100,
                max_steps=200, seed=5)
    base.update(overrides)
    return SynthSpec(**base)


def _man_spec(**overrides):
    base = dict(task="maneuver", classes=7, train_per_class=3,
                test_per_class=2, noise_std=0.3, min_steps=20,
                max_steps=100, seed=5)
    base.update(overrides)
    return SynthSpec(**base)


def _datasets_equal(a: Dataset, b: Dataset) -> bool:
    if a.class_names != b.class_names:
        return False
    for sa, sb in zip(a.train + a.test, b.train + b.test, strict=True):
        if sa.label != sb.label or not np.array_equal(sa.values, sb.values):
            return False
    return True


class TestSynthSinusoid:
    def test_counts_and_labels(self):
        ds = synth_sinusoid(_sin_spec())
        assert len(ds.train) == 12 and len(ds.test) == 8
        for j in range(4):
            assert sum(s.label == j for s in ds.train) == 3
            assert sum(s.label == j for s in ds.test) == 2

    def test_deterministic(self):
        assert _datasets_equal(synth_sinusoid(_sin_spec()),
                               synth_sinusoid(_sin_spec()))

    def test_split_ids_disjoint(self):
        ds = synth_sinusoid(_sin_spec())
        train_ids = {s.id for s in ds.train}
        test_ids = {s.id for s in ds.test}
        assert not train_ids & test_ids
        assert len(train_ids) == len(ds.train)

    def test_noise_free_samples_are_pure_tones(self):
        # oracle: a tone at frequency f lies in span{sin(2 pi f t),
        # cos(2 pi f t)}, so the projection residual must vanish
        ds = synth_sinusoid(_sin_spec(noise_std=0.0))
        for s in ds.train:
            freq = (s.label + 1) * SINUSOID_BASE_HZ
            t = np.arange(s.steps) / SINUSOID_RATE_HZ
            basis = np.vstack([np.sin(2 * np.pi * freq * t),
                               np.cos(2 * np.pi * freq * t)]).T
            coef, *_ = np.linalg.lstsq(basis, s.values[0], rcond=None)
            residual = np.linalg.norm(basis @ coef - s.values[0])
            assert residual < 1e-9

    def test_dominant_fft_bin(self):
        ds = synth_sinusoid(_sin_spec(noise_std=0.0))
        for s in ds.test:
            freq = (s.label + 1) * SINUSOID_BASE_HZ
            spectrum = np.abs(np.fft.rfft(s.values[0]))
            spectrum[0] = 0.0
            bin_hz = SINUSOID_RATE_HZ / s.steps
            peak = np.argmax(spectrum) * bin_hz
            assert abs(peak - freq) <= bin_hz

    def test_linear_lift_gives_rank_one(self):
        ds = synth_sinusoid(_sin_spec(channels=12, noise_std=0.0))
        s = ds.train[0]
        assert s.channels == 12
        singular = np.linalg.svd(s.values, compute_uv=False)
        assert singular[1] < 1e-9 * singular[0]

    def test_lengths_in_range(self):
        ds = synth_sinusoid(_sin_spec())
        for s in ds.train + ds.test:
            assert 100 <= s.steps <= 200

    def test_rejects_too_many_classes(self):
        with pytest.raises(BadSpecError):
            _sin_spec(classes=9)


class TestSynthManeuver:
    def test_counts_names_and_rate(self):
        ds = synth_maneuver(_man_spec())
        assert ds.class_names == list(MANEUVER_NAMES)
        assert len(ds.train) == 21 and len(ds.test) == 14
        assert all(s.sample_rate_hz == 10.0 for s in ds.train)
        assert all(s.channels == 4 for s in ds.train)

    def test_deterministic(self):
        assert _datasets_equal(synth_maneuver(_man_spec()),
                               synth_maneuver(_man_spec()))

    def test_full_braking_strong_deceleration(self):
        ds = synth_maneuver(_man_spec(noise_std=0.0))
        braking = [s for s in ds.train + ds.test
                   if ds.class_names[s.label] == "full_braking"]
        assert braking
        for s in braking:
            assert s.values[1].min() <= -6.0

    def test_full_braking_with_default_noise(self):
        ds = synth_maneuver(_man_spec())
        braking = [s for s in ds.train + ds.test
                   if ds.class_names[s.label] == "full_braking"]
        for s in braking:
            assert s.values[1].min() <= -6.0

    def test_stop_is_silent_except_gravity(self):
        ds = synth_maneuver(_man_spec(noise_std=0.0))
        stops = [s for s in ds.train if ds.class_names[s.label] == "stop"]
        for s in stops:
            np.testing.assert_array_equal(s.values[0], np.zeros(s.steps))
            np.testing.assert_array_equal(s.values[1], np.zeros(s.steps))
            np.testing.assert_array_equal(s.values[3], np.zeros(s.steps))
            np.testing.assert_array_equal(s.values[2], np.full(s.steps, 9.81))

    def test_turn_lateral_integrals_have_opposite_signs(self):
        ds = synth_maneuver(_man_spec())
        lefts = [s for s in ds.train if ds.class_names[s.label] == "left_turn"]
        rights = [s for s in ds.train if ds.class_names[s.label] == "right_turn"]
        for s in lefts:
            assert s.values[0].sum() > 0.0
        for s in rights:
            assert s.values[0].sum() < 0.0

    def test_speed_falls_under_braking(self):
        ds = synth_maneuver(_man_spec(noise_std=0.0))
        braking = [s for s in ds.train
                   if ds.class_names[s.label] == "full_braking"]
        for s in braking:
            speed = s.values[3]
            assert speed[-1] < speed[0]
            assert np.all(np.diff(speed) <= 1e-12)

    def test_rejects_too_many_classes(self):
        with pytest.raises(BadSpecError):
            _man_spec(classes=8)

    def test_rejects_bad_spec_fields(self):
        with pytest.raises(BadSpecError):
            _man_spec(train_per_class=0)
        with pytest.raises(BadSpecError):
            _man_spec(min_steps=50, max_steps=20)
        with pytest.raises(BadSpecError):
            SynthSpec(task="square", classes=2, train_per_class=1,
                      test_per_class=1)


class TestCsvSeries:
    def test_round_trip_bit_identical(self, tmp_path):
        values = random_matrix(4, 30, "standard_normal", Rng(120))
        series = LabeledSeries(values=values)
        path = str(tmp_path / "series.csv")
        write_csv_series(series, path)
        back = read_csv_series(path)
        assert back.channels == 4 and back.steps == 30
        np.testing.assert_array_equal(back.values, values)

    def test_reports_bad_cell_location(self, tmp_path):
        lines = ["c0,c1"] + [f"{i}.0,{i}.5" for i in range(10)]
        lines[6] = "5.0,oops"  # file line 7
        path = tmp_path / "bad.csv"
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(ParseError) as err:
            read_csv_series(str(path))
        assert err.value.line == 7
        assert err.value.column == 2
        assert "line 7" in str(err.value)

    def test_rejects_short_file(self, tmp_path):
        path = tmp_path / "short.csv"
        path.write_text("c0\n1.0\n")
        with pytest.raises(ParseError):
            read_csv_series(str(path))

    def test_rejects_ragged_rows(self, tmp_path):
        path = tmp_path / "ragged.csv"
        path.write_text("c0,c1\n1.0,2.0\n3.0\n")
        with pytest.raises(ParseError):
            read_csv_series(str(path))

    def test_missing_file(self, tmp_path):
        with pytest.raises(MissingFileError):
            read_csv_series(str(tmp_path / "absent.csv"))


class TestManifest:
    def test_round_trip(self, tmp_path):
        ds = synth_maneuver(_man_spec(classes=3))
        manifest = write_manifest(ds, str(tmp_path / "data"))
        back = load_manifest(manifest)
        assert back.class_names == ds.class_names
        assert len(back.train) == len(ds.train)
        assert len(back.test) == len(ds.test)
        for orig, loaded in zip(ds.train + ds.test, back.train + back.test):
            assert loaded.label == orig.label
            assert np.max(np.abs(loaded.values - orig.values)) < 1e-12

    def test_missing_series_file(self, tmp_path):
        ds = synth_sinusoid(_sin_spec(classes=2, train_per_class=1,
                                      test_per_class=1))
        manifest = write_manifest(ds, str(tmp_path / "data"))
        (tmp_path / "data" / "train_tone0_0000.csv").unlink()
        with pytest.raises(MissingFileError) as err:
            load_manifest(manifest)
        assert "train_tone0_0000.csv" in str(err.value)

    def test_empty_manifest(self, tmp_path):
        path = tmp_path / "manifest.txt"
        path.write_text("#schema: channels=1\npath,label,split,kind\n")
        with pytest.raises(EmptyDatasetError):
            load_manifest(str(path))

    def test_schema_mismatch(self, tmp_path):
        ds = synth_maneuver(_man_spec(classes=2))
        manifest = write_manifest(ds, str(tmp_path / "data"))
        text = (tmp_path / "data" / "manifest.txt").read_text()
        (tmp_path / "data" / "manifest.txt").write_text(
            text.replace("channels=4", "channels=3"))
        with pytest.raises(SchemaMismatchError):
            load_manifest(manifest)

    def test_rejects_bad_split(self, tmp_path):
        ds = synth_maneuver(_man_spec(classes=2))
        manifest = write_manifest(ds, str(tmp_path / "data"))
        text = (tmp_path / "data" / "manifest.txt").read_text()
        (tmp_path / "data" / "manifest.txt").write_text(
            text.replace(",train,", ",validation,"))
        with pytest.raises(ParseError):
            load_manifest(manifest)

    def test_loads_wav_entries(self, tmp_path):
        import wave
        root = tmp_path / "audio"
        root.mkdir()
        for name in ("a.wav", "b.wav"):
            with wave.open(str(root / name), "wb") as fh:
                fh.setnchannels(1)
                fh.setsampwidth(2)
                fh.setframerate(8000)
                fh.writeframes(np.zeros(600, dtype="<i2").tobytes())
        (root / "manifest.txt").write_text(
            "#schema: channels=1\npath,label,split,kind\n"
            "a.wav,hum,train,wav\nb.wav,buzz,test,wav\n")
        ds = load_manifest(str(root / "manifest.txt"))
        assert ds.class_names == ["hum", "buzz"]
        assert ds.train[0].sample_rate_hz == 8000.0
        assert ds.train[0].steps == 600
