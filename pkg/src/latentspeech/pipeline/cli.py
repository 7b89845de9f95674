"""Command-line entry point: ``latentspeech <subcommand> ...``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from ..dsp.pqmf import design_pqmf, pqmf_analysis, pqmf_synthesis
from ..dsp.signals import snr_db
from ..dsp.spectral import mel_spectrogram
from ..dsp.wavio import read_wav, write_wav
from ..errors import LatentSpeechError
from ..metrics import FakeTranscriptionClient, HttpTranscriptionClient, Transcript, error_rates, mcd, mel_cepstra
from ..metrics.asr import transcribe_batch
from ..toy import make_toy_corpus, write_toy_corpus
from .config import Config, load_config
from .manifest import load_manifest, write_manifest
from .workflows import (
    ae_full_loss,
    build_bundle,
    entry_seed,
    expected_diffusion_loss,
    load_audio,
    load_bundle,
    make_items,
    save_bundle,
    synthesize,
    train_ae,
    train_tts,
)

log = logging.getLogger("latentspeech")


def _config(args) -> Config:
    overrides = {"train": {"seed": args.seed}} if getattr(args, "seed", None) is not None else None
    cfg = load_config(args.config, overrides)
    log.info("resolved config: %s", json.dumps(cfg.to_dict(), sort_keys=True))
    log.info("seed: %d", cfg.train.seed)
    return cfg


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _select(entries, ids):
    if not ids:
        return entries
    by_id = {e.id: e for e in entries}
    missing = [i for i in ids if i not in by_id]
    if missing:
        raise LatentSpeechError(f"ids not in manifest: {', '.join(missing)}")
    return [by_id[i] for i in ids]


# subcommands ---------------------------------------------------------------------------


def cmd_make_toy(args) -> int:
    clips = make_toy_corpus(n_clips=args.n_clips, seed=args.seed)
    path = write_toy_corpus(args.out, clips)
    print(path)
    return 0


def cmd_ae_train(args) -> int:
    cfg = _config(args)
    entries = load_manifest(args.manifest)
    audio = load_audio(entries, Path(args.manifest).parent, cfg.sample_rate)
    bundle = build_bundle(cfg)
    initial = ae_full_loss(bundle, audio)
    train_ae(bundle, audio, args.steps)
    final = ae_full_loss(bundle, audio)
    log.info("autoencoder loss %.4f -> %.4f (%.1f%% lower)", initial, final, 100 * (1 - final / initial))
    save_bundle(args.out, bundle, parts=("ae",))
    print(f"initial_loss={initial:.6f} final_loss={final:.6f}")
    return 0


def cmd_tts_train(args) -> int:
    cfg = _config(args)
    ae_bundle = load_bundle(args.ae, require=("ae",))
    # the autoencoder architecture comes from its checkpoint so the saved config matches the weights
    cfg.ae, cfg.pqmf, cfg.sample_rate = ae_bundle.config.ae, ae_bundle.config.pqmf, ae_bundle.config.sample_rate
    bundle = build_bundle(cfg)
    bundle.ae = ae_bundle.ae  # frozen from here on
    entries = load_manifest(args.manifest)
    audio = load_audio(entries, Path(args.manifest).parent, cfg.sample_rate)
    items = make_items(bundle, entries, audio)
    initial = expected_diffusion_loss(bundle, items)
    train_tts(bundle, items, args.steps)
    final = expected_diffusion_loss(bundle, items)
    log.info("diffusion loss %.4f -> %.4f", initial, final)
    save_bundle(args.out, bundle)
    print(f"initial_loss={initial:.6f} final_loss={final:.6f}")
    return 0


def cmd_synth(args) -> int:
    bundle = load_bundle(args.checkpoint)
    seed = bundle.config.train.seed if args.seed is None else args.seed
    log.info("seed: %d", seed)
    out = _out_dir(args.out)
    if args.manifest:
        jobs = [(e.id, e.phonemes, e.styles, e.durations, e.text) for e in _select(load_manifest(args.manifest), args.ids)]
    elif args.phonemes:
        durations = [int(d) for d in args.durations.split()] if args.durations else None
        jobs = [(args.id, args.phonemes.split(), args.styles.split(), durations, None)]
    else:
        raise LatentSpeechError("give --manifest or --phonemes/--styles")
    rows = []
    failures = 0
    for entry_id, phonemes, styles, durations, text in jobs:
        if not args.use_predicted_durations and durations is None:
            log.error("entry %s: ground-truth durations requested but none given", entry_id)
            failures += 1
            continue
        result = synthesize(
            bundle, bundle.tokens(phonemes, styles),
            None if args.use_predicted_durations else durations, entry_seed(seed, entry_id),
        )
        write_wav(out / f"{entry_id}.wav", result.waveform)
        rows.append({
            "id": entry_id, "audio_path": f"{entry_id}.wav", "phonemes": list(phonemes), "styles": list(styles),
            "durations": [int(d) for d in result.durations], "text": text,
        })
        log.info("synthesized %s: %d latent frames", entry_id, result.latent.shape[1])
    write_manifest(out / "manifest.jsonl", rows)
    return 1 if failures else 0


def _client(args, cfg: Config):
    if args.asr_fake:
        return FakeTranscriptionClient(args.asr_fake)
    return HttpTranscriptionClient(cfg.eval.asr_url, timeout=cfg.eval.asr_timeout, attempts=cfg.eval.asr_attempts)


def cmd_eval(args) -> int:
    cfg = _config(args)
    refs = {e.id: e for e in load_manifest(args.reference)}
    syn_entries = load_manifest(args.synthesized)
    syn_root = Path(args.synthesized).parent
    ref_root = Path(args.reference).parent
    metrics = [m.strip() for m in args.metrics.split(",") if m.strip()]
    rows = []
    syn_audio = {e.id: read_wav(e.resolve_audio(syn_root), cfg.sample_rate) for e in syn_entries}
    hyps = {}
    if "wer" in metrics:
        client = _client(args, cfg)
        items = [(e.id, syn_audio[e.id]) for e in syn_entries]
        hyps = dict(zip(syn_audio, transcribe_batch(client, items, cfg.eval.workers)))
    for e in syn_entries:
        if e.id not in refs:
            raise LatentSpeechError(f"synthesized id {e.id!r} missing from reference manifest")
        ref = refs[e.id]
        row = {"id": e.id}
        if "wer" in metrics:
            if not ref.text:
                raise LatentSpeechError(f"reference entry {e.id!r} has no text")
            row.update(error_rates(Transcript.from_text(ref.text), hyps[e.id]))
        if "mcd" in metrics:
            ref_audio = read_wav(ref.resolve_audio(ref_root), cfg.sample_rate)
            row["mcd"] = mcd(mel_cepstra(ref_audio), mel_cepstra(syn_audio[e.id]), align=cfg.eval.mcd_align)
        rows.append(row)
    cols = [c for c in ("wer", "wer_p", "wer_s", "mcd") if rows and c in rows[0]]
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id"] + cols)
        for row in rows:
            writer.writerow([row["id"]] + [f"{row[c]:.6f}" for c in cols])
        values = np.array([[row[c] for c in cols] for row in rows], dtype=np.float64).reshape(len(rows), len(cols))
        writer.writerow(["mean"] + [f"{v:.6f}" for v in values.mean(axis=0)])
        writer.writerow(["std"] + [f"{v:.6f}" for v in values.std(axis=0)])
    print(args.out)
    return 0


def cmd_schedule_dump(args) -> int:
    cfg = _config(args)
    sched = build_bundle(cfg).schedule
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "beta", "alpha", "alpha_hat", "beta_hat"])
        for i in range(sched.T):
            writer.writerow([i + 1] + [repr(float(getattr(sched, k)[i])) for k in ("beta", "alpha", "alpha_hat", "beta_hat")])
    print(args.out)
    return 0


def cmd_roundtrip(args) -> int:
    cfg = _config(args)
    bank = design_pqmf(cfg.pqmf.n_bands, cfg.pqmf.attenuation, cfg.pqmf.taps)
    wav = read_wav(args.wav, cfg.sample_rate)
    back = pqmf_synthesis(bank, pqmf_analysis(bank, wav))
    if args.out:
        write_wav(args.out, back)
    print(f"snr_db={snr_db(wav.samples, back.samples):.2f}")
    return 0


def _dump_matrix(out: Path, name: str, values: np.ndarray) -> None:
    from PIL import Image

    np.savetxt(out / f"{name}.csv", values, delimiter=",", fmt="%.6g")
    lo, hi = float(values.min()), float(values.max())
    scaled = np.zeros_like(values) if hi == lo else (values - lo) / (hi - lo)
    # row 0 at the bottom, as in a spectrogram plot
    Image.fromarray(np.flipud(np.round(scaled * 255)).astype(np.uint8), mode="L").save(out / f"{name}.png")


def cmd_dump_embeddings(args) -> int:
    bundle = load_bundle(args.checkpoint)
    seed = bundle.config.train.seed if args.seed is None else args.seed
    entries = load_manifest(args.manifest)
    entry = _select(entries, [args.id])[0]
    out = _out_dir(args.out)
    audio = load_audio([entry], Path(args.manifest).parent, bundle.config.sample_rate)[0]
    from ..dsp.pqmf import analysis_array

    real = bundle.ae.encode(analysis_array(bundle.bank, audio).astype(np.float32)).values
    result = synthesize(bundle, bundle.tokens(entry.phonemes, entry.styles), entry.durations, entry_seed(seed, entry.id))
    _dump_matrix(out, "h_tts", result.condition)
    _dump_matrix(out, "z_real", real)
    _dump_matrix(out, "z_sampled", result.latent)
    _dump_matrix(out, "mel_real", mel_spectrogram(audio))
    _dump_matrix(out, "mel_sampled", mel_spectrogram(result.waveform))
    print(out)
    return 0


# parser ------------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="latentspeech", description="Latent diffusion text-to-speech toolkit.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=True):
        p.add_argument("--config", help="JSON config file (defaults to the desk profile)")
        if seed:
            p.add_argument("--seed", type=int, help="global seed (overrides train.seed)")

    p = sub.add_parser("make-toy", help="write the synthetic tonal corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--n-clips", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_make_toy)

    p = sub.add_parser("ae-train", help="train the subband autoencoder")
    common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--steps", type=int)
    p.set_defaults(func=cmd_ae_train)

    p = sub.add_parser("tts-train", help="train TTS encoder and denoiser with a frozen autoencoder")
    common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--ae", required=True, help="autoencoder checkpoint")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--steps", type=int)
    p.set_defaults(func=cmd_tts_train)

    p = sub.add_parser("synth", help="synthesize speech from tokens")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest")
    p.add_argument("--ids", nargs="*", help="subset of manifest ids")
    p.add_argument("--phonemes", help="space-separated phonemes (instead of a manifest)")
    p.add_argument("--styles", help="space-separated styles")
    p.add_argument("--durations", help="space-separated frame counts")
    p.add_argument("--id", default="utt")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--use-predicted-durations", action="store_true", help="regulate with predicted durations")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("eval", help="score synthesized clips against references")
    common(p, seed=False)
    p.add_argument("--reference", required=True, help="reference manifest")
    p.add_argument("--synthesized", required=True, help="manifest written by synth")
    p.add_argument("--metrics", default="mcd,wer")
    p.add_argument("--asr-fake", help="JSON file mapping id to transcript (offline ASR)")
    p.add_argument("--out", required=True, help="CSV path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("schedule-dump", help="write the noise schedule as CSV")
    common(p, seed=False)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_schedule_dump)

    p = sub.add_parser("roundtrip", help="PQMF analysis/synthesis of a WAV, printing the SNR")
    common(p, seed=False)
    p.add_argument("wav")
    p.add_argument("--out", help="write the reconstruction here")
    p.set_defaults(func=cmd_roundtrip)

    p = sub.add_parser("dump-embeddings", help="CSV and PNG dumps of conditioning, latents and mels")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--id", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_dump_embeddings)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (LatentSpeechError, OSError) as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
