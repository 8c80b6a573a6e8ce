import csv
import json

import numpy as np
import pytest
from click.testing import CliRunner

from hafit.cli import frequency_response_grid, main
from hafit.config import RunConfig, load_fitting
from hafit.ha_processor import ANCHOR_FREQS_HZ
from hafit.prescriptions import nal_r, standard_audiogram
from hafit.signal_core import read_wav, write_wav
from hafit.synthetic import make_utterances, speech_like


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture(scope="module")
def manifest(tmp_path_factory):
    from hafit.corpus import ingest, write_corpus

    root = tmp_path_factory.mktemp("cli")
    utts = make_utterances(4, "traffic", 5.0, 0.6, seed=31)
    write_corpus(root / "corpus", utts, ["train", "train", "val", "test"])
    ingest(root / "corpus", root / "manifest.json")
    return root / "manifest.json"


def read_response(path):
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    return np.array([float(r["frequency_hz"]) for r in rows]), np.array([float(r["gain_db"]) for r in rows])


# ---------------------------------------------------------------------------
# Single-file commands
# ---------------------------------------------------------------------------


class TestPrescribe:
    def test_prints_anchors(self, runner):
        res = runner.invoke(main, ["prescribe", "--audiogram", "N2"])
        assert res.exit_code == 0
        assert len(res.output.strip().splitlines()) == 6

    def test_save(self, runner, tmp_path):
        res = runner.invoke(main, ["prescribe", "--audiogram", "N4", "--out", str(tmp_path / "n.json")])
        assert res.exit_code == 0
        assert load_fitting(tmp_path / "n.json") == nal_r(standard_audiogram("N4"))

    def test_unknown_audiogram(self, runner):
        res = runner.invoke(main, ["prescribe", "--audiogram", "N9"])
        assert res.exit_code == 2

    def test_unsupported_severity(self, runner, tmp_path):
        p = tmp_path / "a.json"
        p.write_text(json.dumps({"name": "normal", "hl_db": [0] * 6}))
        assert runner.invoke(main, ["prescribe", "--audiogram", str(p)]).exit_code == 0
        res = runner.invoke(main, ["simulate", str(tmp_path / "x.wav"), "--audiogram", str(p), "--out", "y.wav"])
        assert res.exit_code == 2


class TestFreqResponse:
    def test_flat_fitting(self, runner, tmp_path):
        p = tmp_path / "f.json"
        p.write_text(json.dumps({"schema_version": 1, "gains_db": [10] * 6}))
        res = runner.invoke(main, ["freq-response", str(p), "--out", str(tmp_path / "r.csv")])
        assert res.exit_code == 0
        f, g = read_response(tmp_path / "r.csv")
        band = (f >= 250) & (f <= 8000)
        assert np.max(np.abs(g[band] - 10.0)) < 0.1

    def test_nal_r_hits_anchors(self, runner, tmp_path):
        a = standard_audiogram("N2")
        runner.invoke(main, ["prescribe", "--audiogram", "N2", "--out", str(tmp_path / "n.json")])
        res = runner.invoke(main, ["freq-response", str(tmp_path / "n.json"), "--out", str(tmp_path / "r.csv")])
        assert res.exit_code == 0
        f, g = read_response(tmp_path / "r.csv")
        for anchor, want in zip(ANCHOR_FREQS_HZ, nal_r(a).gains_db):
            assert g[np.argmin(np.abs(f - anchor))] == pytest.approx(want, abs=0.25)

    def test_grid_is_shared(self, runner, tmp_path):
        for name in ("N1", "N4"):
            runner.invoke(main, ["prescribe", "--audiogram", name, "--out", str(tmp_path / f"{name}.json")])
            runner.invoke(main, ["freq-response", str(tmp_path / f"{name}.json"), "--out", str(tmp_path / f"{name}.csv")])
        f1, _ = read_response(tmp_path / "N1.csv")
        f4, _ = read_response(tmp_path / "N4.csv")
        np.testing.assert_array_equal(f1, f4)
        assert set(ANCHOR_FREQS_HZ) <= set(np.round(frequency_response_grid(), 3))

    def test_missing_fitting(self, runner, tmp_path):
        res = runner.invoke(main, ["freq-response", str(tmp_path / "none.json"), "--out", str(tmp_path / "r.csv")])
        assert res.exit_code == 2


class TestSignalCommands:
    def test_simulate(self, runner, tmp_path):
        x = speech_like(0.6, seed=2)
        write_wav(x, tmp_path / "x.wav", "float32")
        res = runner.invoke(main, ["simulate", str(tmp_path / "x.wav"), "--audiogram", "N2", "--out", str(tmp_path / "y.wav")])
        assert res.exit_code == 0
        assert len(read_wav(tmp_path / "y.wav")) == len(x)

    def test_simulate_missing_input(self, runner, tmp_path):
        res = runner.invoke(main, ["simulate", str(tmp_path / "x.wav"), "--audiogram", "N2", "--out", str(tmp_path / "y.wav")])
        assert res.exit_code == 2
        assert not (tmp_path / "y.wav").exists()

    def test_enhance(self, runner, tmp_path):
        x = speech_like(0.6, seed=2)
        write_wav(x, tmp_path / "x.wav", "float32")
        res = runner.invoke(main, ["enhance", str(tmp_path / "x.wav"), "--out", str(tmp_path / "y.wav")])
        assert res.exit_code == 0
        assert len(read_wav(tmp_path / "y.wav")) == len(x)


# ---------------------------------------------------------------------------
# Corpus commands
# ---------------------------------------------------------------------------


class TestCorpusCommands:
    def test_ingest(self, runner, tmp_path):
        from hafit.corpus import write_corpus

        write_corpus(tmp_path / "c", make_utterances(2, "white", 0.0, 0.5, seed=1))
        res = runner.invoke(main, ["ingest", str(tmp_path / "c"), "--out", str(tmp_path / "m.json")])
        assert res.exit_code == 0
        assert len(json.loads((tmp_path / "m.json").read_text())["entries"]) == 2

    def test_ingest_orphan(self, runner, tmp_path):
        from hafit.corpus import write_corpus

        write_corpus(tmp_path / "c", make_utterances(1, "white", 0.0, 0.5, seed=1))
        write_wav(np.zeros(100), tmp_path / "c" / "clean" / "stray.wav", "float32")
        res = runner.invoke(main, ["ingest", str(tmp_path / "c"), "--out", str(tmp_path / "m.json")])
        assert res.exit_code == 2
        assert "stray" in res.output

    def test_optimize_then_evaluate(self, runner, manifest, tmp_path):
        cfg = RunConfig(audiogram="N4").override(train_epochs=1, train_batch_size=2)
        cfg = RunConfig.from_dict({**cfg.to_dict(), "train": {**cfg.to_dict()["train"], "train_seconds": 0.5}})
        cfg.save(tmp_path / "cfg.json")
        out = tmp_path / "run"
        res = runner.invoke(main, ["optimize", "--manifest", str(manifest), "--config", str(tmp_path / "cfg.json"),
                                   "--out", str(out)])
        assert res.exit_code == 0, res.output
        assert (out / "fitting_Cn.json").exists()
        assert len((out / "loss.csv").read_text().strip().splitlines()) == 2
        report = json.loads((out / "report.json").read_text())
        assert report["n_train"] == 2 and report["label"] == "Cn"

        runner.invoke(main, ["prescribe", "--audiogram", "N4", "--out", str(tmp_path / "n.json")])
        res = runner.invoke(main, ["evaluate", str(tmp_path / "n.json"), str(out / "fitting_Cn.json"),
                                   "--manifest", str(manifest), "--audiogram", "N4", "--out", str(tmp_path / "e.csv")])
        assert res.exit_code == 0, res.output
        rows = list(csv.DictReader(open(tmp_path / "e.csv")))
        assert [r["fitting"] for r in rows] == ["N", "Cn"]

    def test_evaluate_bad_manifest(self, runner, tmp_path):
        (tmp_path / "m.json").write_text("{}")
        runner.invoke(main, ["prescribe", "--audiogram", "N4", "--out", str(tmp_path / "n.json")])
        res = runner.invoke(main, ["evaluate", str(tmp_path / "n.json"), "--manifest", str(tmp_path / "m.json"),
                                   "--out", str(tmp_path / "e.csv")])
        assert res.exit_code == 2

    def test_optimize_missing_manifest(self, runner, tmp_path):
        res = runner.invoke(main, ["optimize", "--manifest", str(tmp_path / "none.json")])
        assert res.exit_code == 2

    def test_version(self, runner):
        assert runner.invoke(main, ["--version"]).exit_code == 0
