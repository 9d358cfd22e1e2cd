import numpy as np
import pytest

from eegvideo.cli import main
from eegvideo.eegio import from_arrays, read_recording, standard_layout_22, write_recording
from eegvideo.evaluation import parse_table, read_epoch_csv, read_reports_csv
from eegvideo.flow import read_ppm
from eegvideo.imaging import read_pgm
from eegvideo.net import load_checkpoint

FAST_NET = ["--epochs-cnn", "1", "--epochs-rnn", "2", "--frames-per-trial", "6"]


@pytest.fixture(scope="module")
def erf(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "d.erf"
    assert main(["synth", "--seed", "7", "--classes", "4", "--per-class", "10", "--rate", "250",
                 "--dur", "2", "-o", str(path)]) == 0
    return path


@pytest.fixture(scope="module")
def static_erf(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "static.erf"
    X = np.broadcast_to(np.arange(22, dtype=np.float32)[None, :, None], (4, 22, 500))
    write_recording(from_arrays(X, [0, 1, 0, 1], standard_layout_22(), 250.0), path)
    return path


class TestSynth:
    def test_writes_40_trials(self, erf):
        rec = read_recording(erf)
        assert len(rec) == 40 and rec.X.shape == (40, 22, 500)

    def test_deterministic(self, erf, tmp_path):
        out = tmp_path / "again.erf"
        main(["synth", "--seed", "7", "--classes", "4", "--per-class", "10", "--rate", "250", "--dur", "2",
              "-o", str(out)])
        assert out.read_bytes() == erf.read_bytes()

    def test_missing_output(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["synth", "--seed", "7"])
        assert exc.value.code != 0


class TestFrames:
    @pytest.mark.parametrize("band", ["alpha", "gamma"])
    def test_twelve_frames(self, erf, tmp_path, band):
        assert main(["frames", str(erf), "--band", band, "--trial", "3", "-o", str(tmp_path)]) == 0
        names = sorted(p.name for p in tmp_path.iterdir())
        assert names == ["frame_%02d.pgm" % i for i in range(12)]
        assert read_pgm(tmp_path / "frame_00.pgm").shape == (32, 32)

    def test_fixed_range(self, static_erf, tmp_path):
        assert main(["frames", str(static_erf), "--band", "broadband", "--no-dae", "--lo", "-1", "--hi", "1",
                     "-o", str(tmp_path)]) == 0
        # a constant trial is removed by the bandpass and maps to mid-gray
        assert np.all(read_pgm(tmp_path / "frame_05.pgm") == 128)

    def test_missing_input(self, tmp_path, capsys):
        assert main(["frames", str(tmp_path / "nope.erf"), "-o", str(tmp_path)]) != 0
        assert "not found" in capsys.readouterr().err

    def test_bad_trial(self, erf, tmp_path, capsys):
        assert main(["frames", str(erf), "--trial", "40", "-o", str(tmp_path)]) != 0
        assert "trial index" in capsys.readouterr().err

    def test_bad_band(self, erf, tmp_path):
        with pytest.raises(SystemExit):
            main(["frames", str(erf), "--band", "kappa", "-o", str(tmp_path)])

    def test_gamma_needs_rate(self, tmp_path, capsys):
        path = tmp_path / "slow.erf"
        main(["synth", "--classes", "2", "--per-class", "1", "--rate", "100", "--dur", "2", "-o", str(path)])
        assert main(["frames", str(path), "--band", "gamma", "-o", str(tmp_path / "f")]) != 0
        assert not (tmp_path / "f").exists()


class TestFlow:
    def test_eleven_images(self, erf, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["flow", str(erf), "--band", "alpha", "-o", str(a)]) == 0
        main(["flow", str(erf), "--band", "alpha", "-o", str(b)])
        names = sorted(p.name for p in a.iterdir())
        assert names == ["flow_%02d.ppm" % i for i in range(11)]
        for n in names:
            assert (a / n).read_bytes() == (b / n).read_bytes()
        assert read_ppm(a / "flow_00.ppm").shape == (32, 32, 3)

    def test_static_black(self, static_erf, tmp_path):
        assert main(["flow", str(static_erf), "--band", "broadband", "-o", str(tmp_path)]) == 0
        assert all(not read_ppm(p).any() for p in tmp_path.iterdir())


class TestTrain:
    def test_gru_accuracy(self, erf, tmp_path, capsys):
        ckpt = tmp_path / "gru.ckpt"
        assert main(["train", str(erf), "--cell", "gru", "-o", str(ckpt), "--curve", str(tmp_path / "c.csv")]) == 0
        out = capsys.readouterr().out
        acc = float(out.split("training accuracy:")[1].split()[0])
        assert acc >= 0.95
        assert load_checkpoint(ckpt).config.rnn_cell == "gru"
        curve = read_epoch_csv((tmp_path / "c.csv").read_text())
        assert len(curve) == 4 + 30

    def test_deterministic(self, erf, tmp_path):
        for name in ("a", "b"):
            assert main(["train", str(erf), "--cell", "lstm", "--seed", "1", "-o", str(tmp_path / name)]
                        + FAST_NET) == 0
        assert (tmp_path / "a").read_bytes() == (tmp_path / "b").read_bytes()
        assert (tmp_path / "a.epochs.csv").exists()

    def test_bad_cell(self, erf, tmp_path):
        with pytest.raises(SystemExit):
            main(["train", str(erf), "--cell", "foo", "-o", str(tmp_path / "x")])

    def test_unbalanced(self, tmp_path, capsys):
        X = np.random.default_rng(0).standard_normal((3, 22, 200)).astype(np.float32)
        path = tmp_path / "u.erf"
        write_recording(from_arrays(X, [0, 0, 1], standard_layout_22(), 250.0), path)
        assert main(["train", str(path), "-o", str(tmp_path / "x")]) != 0
        assert "balanced" in capsys.readouterr().err
        assert not (tmp_path / "x").exists()


class TestEval:
    def test_csp_lda(self, erf, tmp_path, capsys):
        csv_path = tmp_path / "r.csv"
        assert main(["eval", str(erf), "--method", "csp-lda", "-k", "5", "--csv", str(csv_path)]) == 0
        table = parse_table(capsys.readouterr().out.split("wrote")[0])
        assert table == read_reports_csv(csv_path.read_text())
        assert table["CSP+LDA"][1] >= 85.0

    def test_jobs(self, erf, capsys):
        assert main(["eval", str(erf), "-k", "5", "--jobs", "2"]) == 0
        assert "CSP+LDA" in capsys.readouterr().out

    def test_k_too_large(self, erf, capsys):
        assert main(["eval", str(erf), "-k", "11"]) != 0
        assert "at least k=11" in capsys.readouterr().err

    def test_unknown_method(self, erf):
        with pytest.raises(SystemExit):
            main(["eval", str(erf), "--method", "svm"])
