# %% [markdown]
# # Toy end-to-end run
#
# Trains the autoencoder, then the TTS encoder and denoiser jointly, on ten
# synthetic tonal utterances, and checks that each synthesized clip sits
# closest (in MCD) to its own reference.  Step counts are small so the
# script finishes in a few minutes; set ``LS_DEMO_FULL=1`` for the full
# 2000 + 2500 step schedule of the toy preset (about 15 minutes on one core).

# %%
import os
import tempfile
from pathlib import Path

import numpy as np

from latentspeech.dsp.signals import Waveform
from latentspeech.metrics import mcd, mel_cepstra
from latentspeech.pipeline import build_bundle, load_manifest, preset, synthesize
from latentspeech.pipeline.workflows import ae_full_loss, expected_diffusion_loss, load_audio, make_items, train_ae, train_tts
from latentspeech.toy import make_toy_corpus, write_toy_corpus

full = os.environ.get("LS_DEMO_FULL") == "1"
ae_steps, tts_steps = (None, None) if full else (300, 600)  # None: preset step counts

root = Path(tempfile.mkdtemp())
manifest = write_toy_corpus(root, make_toy_corpus(n_clips=10))
entries = load_manifest(manifest)
print(entries[0].text, entries[0].phonemes, entries[0].durations)

# %%
cfg = preset("toy")
bundle = build_bundle(cfg)
audio = load_audio(entries, root, cfg.sample_rate)
before = ae_full_loss(bundle, audio)
train_ae(bundle, audio, ae_steps)
print("AE spectral loss %.3f -> %.3f" % (before, ae_full_loss(bundle, audio)))

# %% [markdown]
# The autoencoder is frozen from here.  Latents are standardized per channel
# before diffusion training.

# %%
items = make_items(bundle, entries, audio)
before = expected_diffusion_loss(bundle, items)
train_tts(bundle, items, tts_steps)
print("noise-prediction loss %.3f -> %.3f" % (before, expected_diffusion_loss(bundle, items)))

# %% [markdown]
# Synthesize every training entry with its ground-truth durations and build
# the MCD table: rows are synthesized clips, columns references.

# %%
refs = [mel_cepstra(Waveform(a, 48000)) for a in audio]
table = np.array([
    [mcd(r, mel_cepstra(synthesize(bundle, bundle.tokens(e.phonemes, e.styles), e.durations, i).waveform)) for r in refs]
    for i, e in enumerate(entries)
])
print(np.round(table, 1))
print("own reference is closest for", int(np.sum(table.argmin(axis=1) == np.arange(len(entries)))), "of", len(entries))
