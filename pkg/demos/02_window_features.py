"""Window-level acoustic features: log-mel spectrograms and the 41-dim vector.

Synthesizes one 2 s window of tap-like sound (broadband 1-8 kHz noise) and
one window of mains hum, runs the full feature chain over both, prints the
descriptors that separate them, and writes grayscale PGM spectrograms next
to this script.

Run:  python demos/02_window_features.py
"""

from pathlib import Path

import numpy as np

from tapdetect.dsp import DspConfig, FEATURE_NAMES_V1, analyze_window
from tapdetect.fileformats import write_pgm
from tapdetect.seeding import named_rng
from tapdetect.synth import _band_noise
from tapdetect.wav import AudioBuffer

cfg = DspConfig()
rng = named_rng(0, "feature-demo")
n = cfg.window_samples

tap = 0.25 * _band_noise(rng, n, cfg.sample_rate_hz, 1000.0, 8000.0)
tap += 0.004 * rng.standard_normal(n)

t = np.arange(n) / cfg.sample_rate_hz
hum = 0.08 * np.sin(2 * np.pi * 50.0 * t) + 0.03 * np.sin(2 * np.pi * 100.0 * t)
hum += 0.004 * rng.standard_normal(n)

windows = {
    "tap": AudioBuffer(samples=tap, sample_rate_hz=cfg.sample_rate_hz),
    "hum": AudioBuffer(samples=hum, sample_rate_hz=cfg.sample_rate_hz),
}

print(f"analysis config: {cfg.n_fft}-point FFT, hop {cfg.hop}, {cfg.n_mels} mel bands,")
print(f"{cfg.n_mfcc} MFCCs, window {cfg.window_s} s at {cfg.sample_rate_hz} Hz")
print(f"feature vector: {len(FEATURE_NAMES_V1)} dims, layout v1\n")

out_dir = Path(__file__).resolve().parent
analyses = {}
for name, buffer in windows.items():
    analysis = analyze_window(buffer, cfg)
    analyses[name] = analysis
    lm = analysis.logmel
    print(f"--- {name} ---")
    print(f"log-mel shape: {lm.values.shape} (mel bands x frames), max {lm.values.max():.1f} dB")
    d = analysis.descriptors
    print(f"centroid  {d.centroid_hz.mean():7.0f} Hz")
    print(f"bandwidth {d.bandwidth_hz.mean():7.0f} Hz")
    print(f"rolloff   {d.rolloff_hz.mean():7.0f} Hz")
    print(f"zcr       {d.zcr.mean():7.4f} crossings/sample")
    print(f"rmse      {d.rmse.mean():7.4f}")
    image = out_dir / f"spectrogram_{name}.pgm"
    write_pgm(image, lm.values)
    print(f"wrote {image.name}\n")

print("--- the 41-dim vectors, side by side (first 8 and a few telling dims) ---")
tap_vec = analyses["tap"].feature_vector.values
hum_vec = analyses["hum"].feature_vector.values
show = list(range(8)) + [
    FEATURE_NAMES_V1.index("centroid_mean"),
    FEATURE_NAMES_V1.index("rolloff_mean"),
    FEATURE_NAMES_V1.index("zcr_mean"),
    FEATURE_NAMES_V1.index("rmse_mean"),
]
print(f"{'feature':<16} {'tap':>10} {'hum':>10}")
for i in show:
    print(f"{FEATURE_NAMES_V1[i]:<16} {tap_vec[i]:>10.2f} {hum_vec[i]:>10.2f}")

print("\nrolloff and zcr separate the two cleanly: 85% of the hum's energy sits")
print("below 100 Hz while the tap's spreads to ~7 kHz. Magnitude-weighted")
print("centroid is less telling for near-tonal sounds (the wideband noise")
print("floor drags it up), which is why the classifiers get a whole menu of")
print("descriptors rather than any single one.")
