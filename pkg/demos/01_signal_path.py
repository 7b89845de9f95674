# %% [markdown]
# # From waveform to latent and back
#
# A 16-band PQMF splits 48 kHz audio into critically sampled sub-bands.  The
# convolutional encoder then downsamples by 64, so 10 s of audio becomes a
# 16 x 469 latent while an 80-band mel spectrogram needs 80 x 1872 values.

# %%
import numpy as np

from latentspeech.autoencoder import Autoencoder
from latentspeech.core import no_grad
from latentspeech.dsp.pqmf import analysis_array, design_pqmf, pqmf_analysis, pqmf_synthesis
from latentspeech.dsp.signals import Waveform, snr_db
from latentspeech.dsp.spectral import mel_spectrogram
from latentspeech.toy import make_toy_corpus

bank = design_pqmf(16, 100.0)
print("prototype taps:", bank.taps)

# %% [markdown]
# Analysis followed by synthesis is near-perfect reconstruction.

# %%
clip = make_toy_corpus(n_clips=1)[0]
sub = pqmf_analysis(bank, clip.samples)
back = pqmf_synthesis(bank, sub)
print("sub-band shape:", sub.shape, " round-trip SNR: %.1f dB" % snr_db(clip.samples, back.samples))

# %% [markdown]
# Compactness of the latent against the mel spectrogram.

# %%
audio = np.random.default_rng(0).uniform(-0.5, 0.5, 10 * 48000).astype(np.float32)
with no_grad():
    z = Autoencoder().encode(analysis_array(bank, audio).astype(np.float32)).values
mel = mel_spectrogram(Waveform(audio, 48000))
print("latent", z.shape, "mel", mel.shape, "ratio %.2f" % (mel.size / z.size))
