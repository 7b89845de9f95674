# %% [markdown]
# # Evaluation metrics
#
# MCD compares 13 mel cepstral coefficients after DTW alignment.  WER is
# computed at three granularities on tone-numbered pinyin: syllables,
# phonemes (initials and finals) and tones.

# %%
import numpy as np

from latentspeech.metrics import CepstraSequence, Transcript, error_rates, mcd, split_syllables

a = CepstraSequence(np.zeros((1, 13)))
b = np.zeros((1, 13))
b[0, 4] = 1.0
print("unit difference in one coefficient: %.3f dB" % mcd(a, CepstraSequence(b)))

# %%
print(split_syllables("zhong1 guo2 ren2"))
ref = Transcript.from_text("ni3 hao3 zhong1 guo2")
hyp = Transcript.from_text("ni2 hao3 zhong1 guo2", strict=False)
print(error_rates(ref, hyp))  # one wrong tone: one syllable error, no phoneme error
