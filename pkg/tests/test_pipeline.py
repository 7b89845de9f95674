import json
import struct

import numpy as np
import pytest

from latentspeech.errors import ConfigError, DimensionError, FormatError, InputError
from latentspeech.pipeline import (
    PRESETS,
    ManifestEntry,
    build_bundle,
    config_from_dict,
    entry_seed,
    load_bundle,
    load_checkpoint,
    load_config,
    load_manifest,
    preset,
    save_bundle,
    save_checkpoint,
    seed_streams,
    synthesize,
    write_manifest,
)
from latentspeech.pipeline.workflows import bundle_tensors, load_audio, make_items, steps_for, train_tts
from latentspeech.toy import make_toy_corpus, write_toy_corpus

# config ----------------------------------------------------------------------------------------


def test_default_config_values():
    cfg = load_config()
    assert (cfg.pqmf.n_bands, cfg.ae.latent_channels, cfg.diffusion.T) == (16, 16, 50)
    assert (cfg.diffusion.beta_start, cfg.diffusion.beta_end) == (1e-4, 0.2)
    assert cfg.ae.strides == [4, 4, 2, 2]


def test_all_presets_validate():
    for name in PRESETS:
        preset(name)
    with pytest.raises(ConfigError):
        preset("nope")


def test_config_file_with_preset_and_override(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"preset": "full", "train": {"lr": 1e-3}}))
    cfg = load_config(p, {"train": {"seed": 7}})
    assert (cfg.train.batch, cfg.train.epochs, cfg.train.lr, cfg.train.seed) == (64, 300, 1e-3, 7)


@pytest.mark.parametrize(
    "bad",
    [
        {"ae": {"nope": 1}},
        {"extra": 1},
        {"ae": {"batch": "8"}},
        {"ae": {"batch": 0}},
        {"ae": {"crop": 1000}},
        {"diffusion": {"beta_end": 1.5}},
        {"diffusion": {"sigma": "other"}},
        {"tts": {"d_model": 15}},
        {"eval": {"mcd_align": 1}},
    ],
)
def test_invalid_configs_rejected(bad):
    with pytest.raises(ConfigError):
        config_from_dict(bad)


def test_config_json_round_trip():
    cfg = preset("toy")
    assert config_from_dict(json.loads(cfg.to_json())) == cfg


def test_invalid_json_file(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(p)


# manifest --------------------------------------------------------------------------------------


def _write_lines(path, lines):
    path.write_text("\n".join(lines) + "\n")
    return path


def test_manifest_round_trip(tmp_path):
    entries = [
        ManifestEntry("a", "a.wav", ["b", "a"], ["1", "1"], [3, 4], "ba1"),
        ManifestEntry("b", "/abs/b.wav", ["a"], ["0"]),
    ]
    write_manifest(tmp_path / "m.jsonl", entries)
    assert load_manifest(tmp_path / "m.jsonl") == entries
    assert entries[0].resolve_audio(tmp_path) == tmp_path / "a.wav"
    assert str(entries[1].resolve_audio(tmp_path)) == "/abs/b.wav"


def test_manifest_skips_blank_lines(tmp_path):
    row = json.dumps({"id": "a", "audio_path": "a.wav", "phonemes": ["a"], "styles": ["1"]})
    assert len(load_manifest(_write_lines(tmp_path / "m.jsonl", ["", row, "  "]))) == 1


@pytest.mark.parametrize(
    "row, message",
    [
        ('{"id": "a"', "invalid JSON"),
        ("[1, 2]", "JSON object"),
        ('{"id": "a", "audio_path": "x", "phonemes": ["a"]}', "styles"),
        ('{"id": "a", "audio_path": "x", "phonemes": ["a"], "styles": []}', "styles"),
        ('{"id": "a", "audio_path": "x", "phonemes": ["a"], "styles": ["1"], "durations": [1, 2]}', "durations"),
        ('{"id": "a", "audio_path": "x", "phonemes": ["a"], "styles": ["1"], "durations": [-1]}', "non-negative"),
        ('{"id": "", "audio_path": "x", "phonemes": ["a"], "styles": ["1"]}', "id"),
    ],
)
def test_manifest_errors_carry_line_number(tmp_path, row, message):
    good = json.dumps({"id": "z", "audio_path": "z.wav", "phonemes": ["a"], "styles": ["1"]})
    with pytest.raises(InputError, match=rf"m.jsonl:2: .*{message}"):
        load_manifest(_write_lines(tmp_path / "m.jsonl", [good, row]))


def test_manifest_duplicate_id(tmp_path):
    row = json.dumps({"id": "a", "audio_path": "a.wav", "phonemes": ["a"], "styles": ["1"]})
    with pytest.raises(InputError, match="duplicate id 'a' .*line 1"):
        load_manifest(_write_lines(tmp_path / "m.jsonl", [row, row]))


# checkpoint ------------------------------------------------------------------------------------


@pytest.fixture
def tensors():
    rng = np.random.default_rng(0)
    return {"b.w": rng.standard_normal((3, 4)).astype(np.float32), "a.bias": np.arange(5, dtype=np.float32),
            "c.scalar": np.array(2.5, dtype=np.float32)}


def test_checkpoint_round_trip_bit_identical(tmp_path, tensors):
    save_checkpoint(tmp_path / "x.lspk", tensors, {"k": 1}, {"beta": [0.1]})
    back, config, schedule = load_checkpoint(tmp_path / "x.lspk")
    assert set(back) == set(tensors)
    for name, arr in tensors.items():
        assert back[name].dtype == np.float32 and back[name].shape == arr.shape
        assert back[name].tobytes() == arr.tobytes()
    assert config == {"k": 1} and schedule == {"beta": [0.1]}


def test_checkpoint_layout(tmp_path, tensors):
    save_checkpoint(tmp_path / "x.lspk", tensors)
    blob = (tmp_path / "x.lspk").read_bytes()
    magic, version, hlen = struct.unpack_from("<4sIQ", blob)
    assert (magic, version) == (b"LSPK", 1)
    index = json.loads(blob[16 : 16 + hlen])["tensors"]
    assert list(index) == sorted(tensors)
    # payload is exactly the concatenated little-endian tensors, in name order
    assert blob[16 + hlen :] == b"".join(tensors[n].astype("<f4").tobytes() for n in sorted(tensors))


@pytest.mark.parametrize("cut", [3, 10, 40, -1])
def test_truncated_checkpoint(tmp_path, tensors, cut):
    save_checkpoint(tmp_path / "x.lspk", tensors)
    blob = (tmp_path / "x.lspk").read_bytes()
    (tmp_path / "t.lspk").write_bytes(blob[:cut])
    with pytest.raises(FormatError):
        load_checkpoint(tmp_path / "t.lspk")


def test_checkpoint_bad_magic_and_version(tmp_path, tensors):
    save_checkpoint(tmp_path / "x.lspk", tensors)
    blob = bytearray((tmp_path / "x.lspk").read_bytes())
    bad_version = blob.copy()
    struct.pack_into("<I", bad_version, 4, 2)
    (tmp_path / "v.lspk").write_bytes(bytes(bad_version))
    with pytest.raises(FormatError, match="version 2"):
        load_checkpoint(tmp_path / "v.lspk")
    blob[:4] = b"NOPE"
    (tmp_path / "m.lspk").write_bytes(bytes(blob))
    with pytest.raises(FormatError, match="magic"):
        load_checkpoint(tmp_path / "m.lspk")


def _rewrite_index(path, mutate):
    blob = path.read_bytes()
    hlen = struct.unpack_from("<Q", blob, 8)[0]
    header = json.loads(blob[16 : 16 + hlen])
    mutate(header["tensors"])
    new = json.dumps(header).encode()
    path.write_bytes(struct.pack("<4sIQ", b"LSPK", 1, len(new)) + new + blob[16 + hlen :])


def test_checkpoint_overlap_and_dtype(tmp_path, tensors):
    p = tmp_path / "x.lspk"
    save_checkpoint(p, tensors)
    _rewrite_index(p, lambda idx: idx["b.w"].update(offset=0))
    with pytest.raises(FormatError, match="overlap"):
        load_checkpoint(p)
    save_checkpoint(p, tensors)
    _rewrite_index(p, lambda idx: idx["a.bias"].update(dtype="float16"))
    with pytest.raises(FormatError, match="dtype"):
        load_checkpoint(p)


def test_bundle_index_is_complete(tmp_path, tiny_config):
    bundle = build_bundle(tiny_config)
    save_bundle(tmp_path / "b.lspk", bundle)
    tensors, config, schedule = load_checkpoint(tmp_path / "b.lspk")
    expected = bundle_tensors(bundle)
    assert set(tensors) == set(expected)
    assert {"ae.latent_stats.mean", "ae.latent_stats.std"} <= set(tensors)
    assert {n.split(".", 1)[0] for n in tensors} == {"ae", "tts", "diff"}
    assert config == tiny_config.to_dict()
    np.testing.assert_array_equal(schedule["beta"], bundle.schedule.beta)


def test_load_bundle_requires_parts(tmp_path, tiny_config):
    save_bundle(tmp_path / "ae.lspk", build_bundle(tiny_config), parts=("ae",))
    load_bundle(tmp_path / "ae.lspk", require=("ae",))
    with pytest.raises(FormatError, match="tts, diff"):
        load_bundle(tmp_path / "ae.lspk")


# workflows -------------------------------------------------------------------------------------


def test_seed_streams_distinct_and_stable():
    s = seed_streams(0)
    assert len(set(s.values())) == len(s)
    assert s == seed_streams(0) and s != seed_streams(1)


def test_entry_seed_depends_on_id_not_order():
    assert entry_seed(0, "a") == entry_seed(0, "a")
    assert len({entry_seed(0, "a"), entry_seed(0, "b"), entry_seed(1, "a")}) == 3


def test_steps_for_epochs(tiny_config):
    assert steps_for(tiny_config, 10) == 3
    tiny_config.train.epochs = 2
    assert steps_for(tiny_config, 10) == 2 * 5


@pytest.fixture(scope="module")
def toy_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("toy")
    write_toy_corpus(out, make_toy_corpus(n_clips=3))
    return out


def test_make_items_checks_durations(toy_dir, tiny_config):
    bundle = build_bundle(tiny_config)
    entries = load_manifest(toy_dir / "manifest.jsonl")
    audio = load_audio(entries, toy_dir, 48000)
    items = make_items(bundle, entries, audio)
    assert all(it.z0.shape == (16, 48) for it in items)
    entries[0].durations = [d + 1 for d in entries[0].durations]
    with pytest.raises(DimensionError, match="toy000"):
        make_items(bundle, entries[:1], audio[:1])
    entries[0].durations = None
    with pytest.raises(InputError):
        make_items(bundle, entries[:1], audio[:1])


def test_save_load_resume_is_bit_identical(tmp_path, toy_dir, tiny_config):
    """Training N steps, saving and reloading gives the same synthesis as the live models."""
    bundle = build_bundle(tiny_config)
    entries = load_manifest(toy_dir / "manifest.jsonl")
    items = make_items(bundle, entries, load_audio(entries, toy_dir, 48000))
    train_tts(bundle, items, 2)
    save_bundle(tmp_path / "b.lspk", bundle)
    back = load_bundle(tmp_path / "b.lspk")
    tokens = bundle.tokens(entries[0].phonemes, entries[0].styles)
    a = synthesize(bundle, tokens, entries[0].durations, 3)
    b = synthesize(back, tokens, entries[0].durations, 3)
    assert a.waveform.samples.tobytes() == b.waveform.samples.tobytes()
    # a second save of the reloaded bundle is byte-identical too
    save_bundle(tmp_path / "c.lspk", back)
    assert (tmp_path / "b.lspk").read_bytes() == (tmp_path / "c.lspk").read_bytes()


def test_synthesize_with_predicted_durations(tiny_config):
    bundle = build_bundle(tiny_config)
    tokens = bundle.tokens(["b", "a", "m", "a"], ["1", "1", "2", "2"])
    res = synthesize(bundle, tokens, [3, 5, 2, 6], 0)
    assert res.latent.shape == (16, 16) and len(res.waveform) == 16 * 1024
    assert res.condition.shape == (16, 16)
    # a zeroed predictor head gives log-duration 0, which rounds to zero frames everywhere
    out = bundle.tts.predictor.out
    out.weight.data = np.zeros_like(out.weight.data)
    out.bias.data = np.zeros_like(out.bias.data)
    with pytest.raises(InputError, match="all durations are zero"):
        synthesize(bundle, tokens, None, 0)
