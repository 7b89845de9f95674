import csv
import json
import subprocess
import sys

import numpy as np
import pytest
from conftest import TINY_CONFIG
from PIL import Image

from latentspeech.dsp.wavio import read_wav
from latentspeech.pipeline import load_manifest
from latentspeech.pipeline.cli import main


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = root / "tiny.json"
    cfg.write_text(json.dumps(TINY_CONFIG))
    assert main(["make-toy", "--out", str(root / "toy"), "--n-clips", "3"]) == 0
    manifest = root / "toy" / "manifest.jsonl"
    assert main(["ae-train", "--config", str(cfg), "--manifest", str(manifest), "--out", str(root / "ae.lspk")]) == 0
    assert main([
        "tts-train", "--config", str(cfg), "--manifest", str(manifest), "--ae", str(root / "ae.lspk"),
        "--out", str(root / "full.lspk"),
    ]) == 0
    return root, cfg, manifest


def test_synth_manifest_and_wavs(trained):
    root, _, manifest = trained
    out = root / "syn"
    assert main(["synth", "--checkpoint", str(root / "full.lspk"), "--manifest", str(manifest), "--out", str(out)]) == 0
    entries = load_manifest(out / "manifest.jsonl")
    assert [e.id for e in entries] == ["toy000", "toy001", "toy002"]
    for e in entries:
        wav = read_wav(out / e.audio_path, 48000)
        assert len(wav) == 48 * 1024 and sum(e.durations) == 48


def test_synth_is_deterministic_and_order_free(trained):
    root, _, manifest = trained
    ck = str(root / "full.lspk")
    main(["synth", "--checkpoint", ck, "--manifest", str(manifest), "--out", str(root / "s1"), "--seed", "4"])
    main(["synth", "--checkpoint", ck, "--manifest", str(manifest), "--ids", "toy002", "--out", str(root / "s2"), "--seed", "4"])
    assert (root / "s1" / "toy002.wav").read_bytes() == (root / "s2" / "toy002.wav").read_bytes()


def test_synth_without_durations_fails(trained, caplog):
    root, _, _ = trained
    rc = main(["synth", "--checkpoint", str(root / "full.lspk"), "--phonemes", "b a", "--styles", "1 1", "--out", str(root / "s3")])
    assert rc == 1 and "durations" in caplog.text


def test_synth_from_token_arguments(trained):
    root, _, _ = trained
    rc = main([
        "synth", "--checkpoint", str(root / "full.lspk"), "--phonemes", "b a", "--styles", "1 1",
        "--durations", "3 5", "--id", "ba", "--out", str(root / "s4"),
    ])
    assert rc == 0 and len(read_wav(root / "s4" / "ba.wav", 48000)) == 8 * 1024


def test_eval_csv(trained):
    root, cfg, manifest = trained
    main(["synth", "--checkpoint", str(root / "full.lspk"), "--manifest", str(manifest), "--out", str(root / "e")])
    texts = {e.id: e.text for e in load_manifest(manifest)}
    texts["toy001"] = ""
    (root / "fake.json").write_text(json.dumps(texts))
    out = root / "eval.csv"
    rc = main([
        "eval", "--config", str(cfg), "--reference", str(manifest), "--synthesized", str(root / "e" / "manifest.jsonl"),
        "--asr-fake", str(root / "fake.json"), "--out", str(out),
    ])
    assert rc == 0
    rows = list(csv.DictReader(out.open()))
    assert [r["id"] for r in rows] == ["toy000", "toy001", "toy002", "mean", "std"]
    assert float(rows[0]["wer"]) == 0 and float(rows[1]["wer"]) == 1
    assert float(rows[3]["wer"]) == pytest.approx(1 / 3, abs=1e-6)
    mcds = [float(r["mcd"]) for r in rows[:3]]
    assert float(rows[3]["mcd"]) == pytest.approx(np.mean(mcds), abs=1e-5)
    assert float(rows[4]["mcd"]) == pytest.approx(np.std(mcds), abs=1e-5)


def test_schedule_dump(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["schedule-dump", "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 50 and rows[0]["t"] == "1" and rows[-1]["t"] == "50"
    assert float(rows[0]["beta"]) == pytest.approx(1e-4) and float(rows[-1]["beta"]) == pytest.approx(0.2)
    for r in rows:
        assert float(r["alpha"]) == pytest.approx(1 - float(r["beta"]))


def test_roundtrip_prints_snr(trained, capsys):
    root, _, _ = trained
    assert main(["roundtrip", str(root / "toy" / "wavs" / "toy000.wav")]) == 0
    snr = float(capsys.readouterr().out.strip().split("=")[1])
    assert snr > 40


def test_dump_embeddings(trained):
    root, _, manifest = trained
    out = root / "emb"
    assert main(["dump-embeddings", "--checkpoint", str(root / "full.lspk"), "--manifest", str(manifest),
                 "--id", "toy001", "--out", str(out)]) == 0
    for name in ("h_tts", "z_real", "z_sampled", "mel_real", "mel_sampled"):
        values = np.loadtxt(out / f"{name}.csv", delimiter=",")
        img = Image.open(out / f"{name}.png")
        assert img.mode == "L" and img.size == (values.shape[1], values.shape[0])
    assert np.loadtxt(out / "z_real.csv", delimiter=",").shape == (16, 48)


def test_errors_give_nonzero_exit(tmp_path):
    assert main(["synth", "--checkpoint", str(tmp_path / "missing.lspk"), "--out", str(tmp_path)]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text('{"ae": {"unknown": 1}}')
    assert main(["schedule-dump", "--config", str(bad), "--out", str(tmp_path / "s.csv")]) == 1


def test_console_script_help():
    res = subprocess.run([sys.executable, "-m", "latentspeech.pipeline.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for cmd in ("make-toy", "ae-train", "tts-train", "synth", "eval", "schedule-dump", "roundtrip", "dump-embeddings"):
        assert cmd in res.stdout
