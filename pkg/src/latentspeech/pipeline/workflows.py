"""Model assembly, training loops and synthesis shared by the CLI and the demos."""

from __future__ import annotations

import logging
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ..autoencoder import AeConfig, Autoencoder, ae_loss, fit_latent_stats, train_autoencoder
from ..core import ParamStore, no_grad
from ..diffusion import (
    Denoiser,
    DenoiserConfig,
    NoiseSchedule,
    TrainItem,
    joint_train_step,
    make_schedule,
    q_sample,
    sample,
)
from ..dsp.pqmf import PqmfBank, analysis_array, design_pqmf, synthesis_array
from ..dsp.signals import Waveform, peak_normalize
from ..dsp.wavio import read_wav
from ..errors import DimensionError, FormatError, InputError
from ..tts import TokenSequence, TtsConfig, TtsEncoder, Vocabulary, durations_from_log, length_regulate
from .checkpoint import load_checkpoint, save_checkpoint
from .config import Config, config_from_dict
from .manifest import ManifestEntry

log = logging.getLogger(__name__)

SEED_STREAMS = ("ae_init", "ae_data", "tts_init", "diff_init", "diff_data", "sampler")


def seed_streams(seed: int) -> dict[str, int]:
    """One integer seed per component, all derived from the global seed."""
    children = np.random.SeedSequence(seed).spawn(len(SEED_STREAMS))
    return {name: int(child.generate_state(1)[0]) for name, child in zip(SEED_STREAMS, children)}


def entry_seed(seed: int, entry_id: str) -> int:
    """Sampler seed for one entry; independent of the order entries are processed in."""
    return int(np.random.SeedSequence([seed, zlib.crc32(entry_id.encode())]).generate_state(1)[0])


@dataclass
class Bundle:
    config: Config
    bank: PqmfBank
    ae: Autoencoder
    tts: TtsEncoder
    denoiser: Denoiser
    schedule: NoiseSchedule
    phonemes: Vocabulary
    styles: Vocabulary

    def tokens(self, phonemes: Sequence[str], styles: Sequence[str]) -> TokenSequence:
        return TokenSequence.from_tokens(phonemes, styles, self.phonemes, self.styles)


def _vocab(path: str | None, kind: str) -> Vocabulary:
    return Vocabulary.load(path) if path else Vocabulary.default(kind)


def build_bundle(config: Config, seed: int | None = None) -> Bundle:
    seeds = seed_streams(config.train.seed if seed is None else seed)
    phonemes = _vocab(config.tts.phoneme_vocab, "phonemes")
    styles = _vocab(config.tts.style_vocab, "styles")
    ae_cfg = AeConfig(
        n_bands=config.pqmf.n_bands,
        latent_channels=config.ae.latent_channels,
        strides=tuple(config.ae.strides),
        channels=tuple(config.ae.channels),
        slope=config.ae.slope,
    )
    t = config.tts
    tts_cfg = TtsConfig(
        d_model=t.d_model, ape_layers=t.ape_layers, int_layers=t.int_layers, heads=t.heads,
        ff_hidden=t.ff_hidden, kernel=t.kernel, n_lat=config.ae.latent_channels,
        n_phonemes=len(phonemes), n_styles=len(styles),
    )
    d = config.diffusion
    diff_cfg = DenoiserConfig(n_lat=config.ae.latent_channels, channels=d.channels, blocks=d.blocks, cycle=d.cycle)
    return Bundle(
        config=config,
        bank=design_pqmf(config.pqmf.n_bands, config.pqmf.attenuation, config.pqmf.taps),
        ae=Autoencoder(ae_cfg, seeds["ae_init"]),
        tts=TtsEncoder(tts_cfg, seeds["tts_init"]),
        denoiser=Denoiser(diff_cfg, seeds["diff_init"]),
        schedule=make_schedule(d.T, d.beta_start, d.beta_end),
        phonemes=phonemes,
        styles=styles,
    )


def bundle_tensors(bundle: Bundle, parts: Sequence[str] = ("ae", "tts", "diff")) -> dict[str, np.ndarray]:
    out = {}
    if "ae" in parts:
        out.update({k: v.data for k, v in bundle.ae.encoder.parameters("ae.encoder.").items()})
        out.update({k: v.data for k, v in bundle.ae.decoder.parameters("ae.decoder.").items()})
        out["ae.latent_stats.mean"] = bundle.ae.latent_mean
        out["ae.latent_stats.std"] = bundle.ae.latent_std
    if "tts" in parts:
        out.update({k: v.data for k, v in bundle.tts.parameters("tts.").items()})
    if "diff" in parts:
        out.update({k: v.data for k, v in bundle.denoiser.parameters("diff.").items()})
    return out


def save_bundle(path: str | Path, bundle: Bundle, parts: Sequence[str] = ("ae", "tts", "diff")) -> None:
    save_checkpoint(path, bundle_tensors(bundle, parts), bundle.config.to_dict(), bundle.schedule.as_dict())


def load_bundle(path: str | Path, require: Sequence[str] = ("ae", "tts", "diff")) -> Bundle:
    """Rebuild models from a checkpoint; the stored schedule is used as is."""
    tensors, config, schedule = load_checkpoint(path)
    if config is None:
        raise FormatError(f"{path}: checkpoint has no config snapshot")
    bundle = build_bundle(config_from_dict(config))
    if schedule is not None:
        bundle.schedule = NoiseSchedule.from_dict(schedule)
    present = {name.split(".", 1)[0] for name in tensors}
    missing = [p for p in require if p not in present]
    if missing:
        raise FormatError(f"{path}: checkpoint lacks {', '.join(missing)} weights")
    if "ae" in present:
        bundle.ae.encoder.load_arrays(tensors, "ae.encoder.")
        bundle.ae.decoder.load_arrays(tensors, "ae.decoder.")
        bundle.ae.latent_mean = tensors["ae.latent_stats.mean"]
        bundle.ae.latent_std = tensors["ae.latent_stats.std"]
    if "tts" in present:
        bundle.tts.load_arrays(tensors, "tts.")
    if "diff" in present:
        bundle.denoiser.load_arrays(tensors, "diff.")
    return bundle


def load_audio(entries: Sequence[ManifestEntry], root: str | Path, sample_rate: int) -> list[np.ndarray]:
    """Read and peak-normalize every entry's WAV."""
    return [peak_normalize(read_wav(e.resolve_audio(root), sample_rate).samples) for e in entries]


def steps_for(config: Config, n_items: int) -> int:
    t = config.train
    return t.epochs * -(-n_items // t.batch) if t.epochs > 0 else t.steps


def train_ae(bundle: Bundle, audio: Sequence[np.ndarray], steps: int | None = None, seed: int | None = None) -> list[float]:
    cfg = bundle.config
    seeds = seed_streams(cfg.train.seed if seed is None else seed)
    steps = cfg.ae.steps if steps is None else steps

    def report(step, loss):
        if step % 100 == 0 or step == steps - 1:
            log.info("ae step %d/%d loss %.4f", step + 1, steps, loss)

    losses = train_autoencoder(
        bundle.ae, bundle.bank, audio, steps, lr=cfg.ae.lr, batch=cfg.ae.batch, crop=cfg.ae.crop,
        seed=seeds["ae_data"], log_eps=cfg.ae.log_eps, callback=report,
    )
    fit_latent_stats(bundle.ae, bundle.bank, audio)
    return losses


def ae_full_loss(bundle: Bundle, audio: Sequence[np.ndarray]) -> float:
    """Spectral loss over whole clips, averaged."""
    total = 0.0
    with no_grad():
        for a in audio:
            bands = analysis_array(bundle.bank, a).astype(np.float32)
            total += float(ae_loss(bundle.ae, bands, log_eps=bundle.config.ae.log_eps).data)
    return total / len(audio)


def make_items(bundle: Bundle, entries: Sequence[ManifestEntry], audio: Sequence[np.ndarray]) -> list[TrainItem]:
    """Standardized latents with their tokens; durations must cover every latent frame."""
    items = []
    for e, a in zip(entries, audio):
        if e.durations is None:
            raise InputError(f"entry {e.id!r} has no durations")
        z = bundle.ae.encode(analysis_array(bundle.bank, a).astype(np.float32)).values
        if sum(e.durations) != z.shape[1]:
            raise DimensionError(f"entry {e.id!r}: durations sum to {sum(e.durations)}, latent has {z.shape[1]} frames")
        items.append(TrainItem(bundle.ae.standardize(z), bundle.tokens(e.phonemes, e.styles), e.durations))
    return items


def train_tts(bundle: Bundle, items: Sequence[TrainItem], steps: int | None = None, seed: int | None = None, callback=None):
    """Joint denoiser and TTS encoder training with the autoencoder frozen.

    Returns the per-step (diffusion, duration) losses.
    """
    cfg = bundle.config
    seeds = seed_streams(cfg.train.seed if seed is None else seed)
    steps = steps_for(cfg, len(items)) if steps is None else steps
    store = ParamStore.from_modules(diff=bundle.denoiser, tts=bundle.tts)
    rng = np.random.default_rng(seeds["diff_data"])
    history = []
    for step in range(steps):
        lr = cfg.train.lr * (cfg.train.decay if step >= cfg.train.decay_at * steps else 1.0)
        pick = rng.choice(len(items), size=min(cfg.train.batch, len(items)), replace=False)
        diff, dur = joint_train_step(
            bundle.denoiser, bundle.tts, store, bundle.schedule, [items[i] for i in pick],
            lr, rng, cfg.train.duration_weight, lr_scale={"tts.": cfg.train.tts_lr_scale},
        )
        history.append((diff, dur))
        if step % 100 == 0 or step == steps - 1:
            log.info("tts step %d/%d diffusion %.4f duration %.4f", step + 1, steps, diff, dur)
        if callback is not None:
            callback(step, diff, dur)
    return history


def expected_diffusion_loss(bundle: Bundle, items: Sequence[TrainItem], seed: int = 0) -> float:
    """Noise-prediction error averaged over every item and every step ``1..T``."""
    sched = bundle.schedule
    rng = np.random.default_rng(seed)
    steps = np.arange(1, sched.T + 1)
    total = 0.0
    with no_grad():
        for item in items:
            cond = bundle.tts.condition(item.tokens, item.durations)
            eps = rng.standard_normal((sched.T,) + item.z0.shape)
            z0 = np.repeat(item.z0[None], sched.T, axis=0)
            zt = q_sample(sched, z0, steps, eps).astype(np.float32)
            pred = bundle.denoiser(zt, steps, np.repeat(cond[None], sched.T, axis=0)).data
            total += float(np.mean((pred - eps) ** 2))
    return total / len(items)


@dataclass
class SynthResult:
    waveform: Waveform
    latent: np.ndarray  # de-standardized latent fed to the decoder
    sampled: np.ndarray  # standardized sampler output
    condition: np.ndarray
    durations: np.ndarray
    predicted_log: np.ndarray


def synthesize(bundle: Bundle, tokens: TokenSequence, durations: Sequence[int] | None, seed: int) -> SynthResult:
    """Tokens to audio; ``durations=None`` uses the predictor."""
    with no_grad():
        emb = bundle.tts.encode_acoustic(tokens)
        pred = bundle.tts.predict_durations(emb).data
        frames = np.asarray(durations if durations is not None else durations_from_log(pred), dtype=np.int64)
        cond = bundle.tts.integrate(length_regulate(emb.hidden, frames)).data
    z = sample(bundle.denoiser, bundle.schedule, cond, seed, bundle.config.diffusion.sigma)
    latent = bundle.ae.destandardize(z)
    bands = bundle.ae.decode(latent).bands
    audio = synthesis_array(bundle.bank, bands).astype(np.float32)
    return SynthResult(Waveform(audio, bundle.config.sample_rate), latent, z, cond, frames, pred)
