"""
What a hearing loss does to speech
==================================

Builds the hearing-loss model for the three standard audiograms, plays the
same 65 dB SPL utterance through each, and prints how much quieter and how
far from the normal-hearing version each simulation is.

Pass an output directory to also write the simulated WAV files.
"""

import sys
from pathlib import Path

import numpy as np

from hafit.hearing_loss import Audiogram, HearingLossModel
from hafit.objective import spec_loss
from hafit.prescriptions import standard_audiogram
from hafit.signal_core import DEFAULT_CALIBRATION, measure_spl, write_wav
from hafit.synthetic import speech_like

out_dir = Path(sys.argv[1]) if len(sys.argv) > 1 else None

# %%
# A synthetic utterance at conversational level
x = speech_like(2.0, seed=1)
print(f"input level {measure_spl(x):.1f} dB SPL")

# %%
# The normal-hearing model is the reference every impaired output is
# compared against; it should leave the signal almost untouched
normal = HearingLossModel.build(Audiogram.normal())
ref = normal.simulate(x)
print(f"normal hearing: {measure_spl(ref):.1f} dB SPL, "
      f"relative error {np.sqrt(np.mean((ref - x) ** 2) / np.mean(x**2)):.3f}")

# %%
# Mild, moderate and moderate-to-severe losses. Spectral distance is the
# training loss term, in dB, between each simulation and the reference.
cal = DEFAULT_CALIBRATION.ref_rms
for name in ("N1", "N2", "N4"):
    a = standard_audiogram(name)
    m = HearingLossModel.build(a)
    y = m.simulate(x)
    print(f"{name} ({m.severity.name:15s}) HL {list(a.hl_db)}: "
          f"{measure_spl(y):5.1f} dB SPL, distance {spec_loss(y / cal, ref / cal):6.2f} dB")
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)
        write_wav(y, out_dir / f"simulated_{name}.wav", "float32")
