"""Signal-processing kernel: waveform conditioning, log-STFT features,
frequency weighting, Griffin-Lim inversion and pitch shifting.

All functions are pure; nothing here holds state between calls.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import signal as sps
from scipy.io import wavfile

from .errors import InvalidArgument, InvalidAudio, ShapeError

SAMPLE_RATE = 16000
N_FFT = 2048
HOP = 256
N_BINS = 1024          # one-sided spectrum minus the Nyquist bin
N_FRAMES = 64
LOG_EPS = 1e-5
# Symmetric padding that turns a 1 s clip into exactly N_FRAMES windows:
# (N_FRAMES - 1) * HOP + N_FFT = 18176 samples total.
_PAD = ((N_FRAMES - 1) * HOP + N_FFT - SAMPLE_RATE) // 2

_WINDOW = sps.get_window("hann", N_FFT, fftbins=True)

MODE_SF = "SF"
MODE_MF = "MF"


@dataclass
class AudioClip:
    """Mono waveform at 16 kHz."""

    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE
    normalized: bool = False

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64).reshape(-1)

    def __len__(self):
        return len(self.samples)


@dataclass
class Spectrogram:
    """Log-magnitude STFT feature: log(|STFT| + eps)."""

    values: np.ndarray
    mode: str = MODE_MF

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.mode == MODE_MF and self.values.shape != (N_BINS, N_FRAMES):
            raise ShapeError(f"MF spectrogram must be {(N_BINS, N_FRAMES)}, got {self.values.shape}")
        if self.mode == MODE_SF and self.values.shape != (N_BINS,):
            raise ShapeError(f"SF spectrogram must be ({N_BINS},), got {self.values.shape}")


def load_wav(path) -> AudioClip:
    """Read a WAV file (PCM16 or float32), downmix to mono and resample to 16 kHz."""
    sr, data = wavfile.read(path)
    raw_int = np.issubdtype(data.dtype, np.integer)
    data = np.asarray(data, dtype=np.float64)
    if data.ndim == 2:
        data = data.mean(axis=1)
    if raw_int:
        data = data / 32768.0
    if sr != SAMPLE_RATE:
        frac = Fraction(SAMPLE_RATE, sr).limit_denominator(1 << 16)
        data = sps.resample_poly(data, frac.numerator, frac.denominator)
    return AudioClip(data, SAMPLE_RATE)


def save_wav(path, clip: AudioClip):
    """Write a clip as 16-bit PCM, peak-limited to avoid integer wrap."""
    x = np.asarray(clip.samples, dtype=np.float64)
    peak = np.max(np.abs(x)) if len(x) else 0.0
    if peak > 1.0:
        x = x / peak
    wavfile.write(path, clip.sample_rate, (x * 32767.0).astype(np.int16))


def normalize_and_crop(clip: AudioClip, duration_s: float = 1.0) -> AudioClip:
    """Crop/zero-pad to `duration_s` seconds and peak-normalize to [-1, 1].

    Silent input passes through unscaled so we never divide by zero.
    """
    if len(clip) == 0:
        raise InvalidAudio("empty clip")
    if clip.sample_rate != SAMPLE_RATE:
        raise InvalidAudio(f"expected {SAMPLE_RATE} Hz, got {clip.sample_rate}")
    n = int(round(duration_s * SAMPLE_RATE))
    x = clip.samples[:n]
    if len(x) < n:
        x = np.pad(x, (0, n - len(x)))
    peak = np.max(np.abs(x))
    if peak > 0:
        x = x / peak
    return AudioClip(x, SAMPLE_RATE, normalized=True)


def _stft_complex(x: np.ndarray) -> np.ndarray:
    """Full one-sided STFT (1025 bins) of an 18176-sample padded buffer."""
    frames = np.lib.stride_tricks.sliding_window_view(x, N_FFT)[::HOP]
    return np.fft.rfft(frames * _WINDOW, axis=1).T  # (1025, n_frames)


def _istft_complex(S: np.ndarray) -> np.ndarray:
    """Least-squares inverse of `_stft_complex` (windowed overlap-add)."""
    n_frames = S.shape[1]
    total = (n_frames - 1) * HOP + N_FFT
    frames = np.fft.irfft(S.T, n=N_FFT, axis=1)
    out = np.zeros(total)
    wsum = np.zeros(total)
    w2 = _WINDOW * _WINDOW
    for t in range(n_frames):
        lo = t * HOP
        out[lo:lo + N_FFT] += frames[t] * _WINDOW
        wsum[lo:lo + N_FFT] += w2
    nz = wsum > 1e-10
    out[nz] /= wsum[nz]
    return out


def stft_magnitude(clip: AudioClip) -> np.ndarray:
    """Linear STFT magnitude matrix (1024, 64) of a 1 s clip."""
    if len(clip) != SAMPLE_RATE:
        raise ShapeError(f"expected {SAMPLE_RATE} samples, got {len(clip)}")
    x = np.pad(clip.samples, (_PAD, _PAD))
    S = _stft_complex(x)
    return np.abs(S[:N_BINS])  # drop the Nyquist bin


def stft_log_magnitude(clip: AudioClip, mode: str = MODE_MF):
    """Log-magnitude feature of a 1 s clip.

    MF mode returns a single (1024, 64) Spectrogram; SF mode returns the 64
    per-frame (1024,) Spectrograms of the same matrix.
    """
    mag = stft_magnitude(clip)
    values = np.log(mag + LOG_EPS)
    if mode == MODE_MF:
        return Spectrogram(values, MODE_MF)
    if mode == MODE_SF:
        return [Spectrogram(values[:, t], MODE_SF) for t in range(values.shape[1])]
    raise InvalidArgument(f"unknown mode {mode!r}")


def frequency_weights(n_bins: int = N_BINS) -> np.ndarray:
    """Linearly decaying reconstruction weights: 10 at bin 0 down to 1 at the top bin."""
    if n_bins < 2:
        raise InvalidArgument("need at least 2 bins")
    k = np.arange(n_bins, dtype=np.float64)
    return 10.0 - 9.0 * k / (n_bins - 1)


def frames_to_matrix(frames) -> np.ndarray:
    """Stack SF frames (or accept an MF Spectrogram / raw matrix) into (1024, T)."""
    if isinstance(frames, Spectrogram):
        v = frames.values
        return v[:, None] if v.ndim == 1 else v
    if isinstance(frames, np.ndarray):
        return frames[:, None] if frames.ndim == 1 else frames
    cols = [f.values if isinstance(f, Spectrogram) else np.asarray(f) for f in frames]
    return np.stack(cols, axis=1)


def griffin_lim_invert(spec, iterations: int = 30, init_phase_seed=None,
                       track_convergence: bool = False):
    """Invert a log-magnitude spectrogram to a waveform by Griffin-Lim.

    `spec` may be an MF Spectrogram, a sequence of SF frames, or a raw
    log-magnitude matrix. Initial phase is zero unless a seed is given.
    Returns an AudioClip; with `track_convergence` also the per-iteration
    spectral-convergence errors.
    """
    if iterations < 0:
        raise InvalidArgument("iterations must be >= 0")
    logmag = frames_to_matrix(spec)
    mag = np.maximum(np.exp(logmag) - LOG_EPS, 0.0)
    n_frames = mag.shape[1]
    # re-append a zero Nyquist row for the inverse FFT
    full = np.zeros((N_BINS + 1, n_frames))
    full[:N_BINS] = mag

    if init_phase_seed is None:
        phase = np.zeros_like(full)
    else:
        rng = np.random.default_rng(init_phase_seed)
        phase = rng.uniform(-np.pi, np.pi, size=full.shape)

    errors = []
    norm = np.linalg.norm(full)
    S = full * np.exp(1j * phase)
    for _ in range(iterations):
        x = _istft_complex(S)
        S2 = _stft_complex(x)
        if track_convergence and norm > 0:
            errors.append(np.linalg.norm(np.abs(S2) - full) / norm)
        S = full * np.exp(1j * np.angle(S2))
    x = _istft_complex(S)

    # undo the symmetric analysis padding (1 s / 64 frames -> 16000 samples)
    target = n_frames * HOP + N_FFT - HOP - 2 * _PAD
    if target > 0:
        x = x[_PAD:_PAD + target]
        if len(x) < target:
            x = np.pad(x, (0, target - len(x)))
    clip = AudioClip(x, SAMPLE_RATE)
    if track_convergence:
        return clip, errors
    return clip


def _phase_vocoder(S: np.ndarray, rate: float) -> np.ndarray:
    """Time-stretch a complex STFT by `rate` (rate < 1 lengthens)."""
    n_bins, n_frames = S.shape
    steps = np.arange(0, n_frames, rate)
    omega = 2 * np.pi * HOP * np.arange(n_bins) / N_FFT
    out = np.empty((n_bins, len(steps)), dtype=complex)
    phase = np.angle(S[:, 0])
    Spad = np.concatenate([S, np.zeros((n_bins, 2), dtype=complex)], axis=1)
    for i, step in enumerate(steps):
        t = int(step)
        frac = step - t
        mag = (1 - frac) * np.abs(Spad[:, t]) + frac * np.abs(Spad[:, t + 1])
        out[:, i] = mag * np.exp(1j * phase)
        dphi = np.angle(Spad[:, t + 1]) - np.angle(Spad[:, t]) - omega
        dphi -= 2 * np.pi * np.round(dphi / (2 * np.pi))
        phase += omega + dphi
    return out


def pitch_shift(clip: AudioClip, semitones: float) -> AudioClip:
    """Shift the fundamental by `semitones` (phase vocoder + resampling), same length."""
    if abs(semitones) > 12:
        raise InvalidArgument("pitch shift limited to one octave")
    n = len(clip)
    if semitones == 0:
        return AudioClip(clip.samples.copy(), clip.sample_rate, clip.normalized)
    rate = 2.0 ** (-semitones / 12.0)
    x = np.pad(clip.samples, (_PAD, _PAD))
    S = _stft_complex(x)
    stretched = _istft_complex(_phase_vocoder(S, rate))
    frac = Fraction(rate).limit_denominator(1000)
    y = sps.resample_poly(stretched, frac.numerator, frac.denominator)
    y = y[_PAD:_PAD + n]
    if len(y) < n:
        y = np.pad(y, (0, n - len(y)))
    return AudioClip(y, clip.sample_rate, clip.normalized)


def estimate_f0(clip: AudioClip, fmin: float = 40.0, fmax: float = 4000.0) -> float:
    """Autocorrelation fundamental-frequency estimate with parabolic refinement."""
    x = clip.samples - np.mean(clip.samples)
    if np.max(np.abs(x)) < 1e-9:
        return 0.0
    n = len(x)
    ac = sps.fftconvolve(x, x[::-1])[n - 1:]
    ac /= ac[0]
    lo = max(2, int(SAMPLE_RATE / fmax))
    hi = min(n - 2, int(SAMPLE_RATE / fmin))
    if hi <= lo:
        return 0.0
    # skip the zero-lag main lobe: real period peaks lie past the first
    # zero crossing of the autocorrelation
    drop = np.where(ac[:hi] < 0.0)[0]
    if len(drop):
        lo = max(lo, int(drop[0]))
    if hi <= lo:
        return 0.0
    seg = ac[lo:hi]
    peak = lo + int(np.argmax(seg))
    # refuse octave errors: prefer the smallest lag whose peak is close to max
    best = ac[peak]
    cand = peak
    lag = lo
    while lag < peak:
        if ac[lag] > 0.8 * best and ac[lag] > ac[lag - 1] and ac[lag] > ac[lag + 1]:
            cand = lag
            break
        lag += 1
    peak = cand
    a, b, c = ac[peak - 1], ac[peak], ac[peak + 1]
    denom = a - 2 * b + c
    shift = 0.0 if abs(denom) < 1e-12 else 0.5 * (a - c) / denom
    # the refinement is only valid within one lag of the discrete peak
    shift = float(np.clip(shift, -0.5, 0.5))
    return _subharmonic_check(x, SAMPLE_RATE / (peak + shift), fmin)


def _subharmonic_check(x: np.ndarray, f: float, fmin: float) -> float:
    """Drop to a subharmonic when the waveform is dominated by an upper
    partial: if f/k carries real spectral energy and its harmonic comb
    explains more of the spectrum than f's, the fundamental is f/k."""
    spec = np.abs(np.fft.rfft(x * np.hanning(len(x))))
    df = SAMPLE_RATE / len(x)
    floor = 0.05 * np.max(spec)

    def peak_near(freq):
        lo = max(0, int((freq * 0.97) / df))
        hi = min(len(spec), int((freq * 1.03) / df) + 1)
        return float(np.max(spec[lo:hi])) if hi > lo else 0.0

    def comb_score(freq):
        return sum(peak_near(freq * (h + 1))
                   for h in range(10) if freq * (h + 1) < SAMPLE_RATE / 2)

    best_f, best_score = f, comb_score(f)
    for k in (2, 3, 4):
        cand = f / k
        if cand < fmin or peak_near(cand) < floor:
            continue      # no actual energy at the would-be fundamental
        score = comb_score(cand)
        if score > 1.05 * best_score:
            best_f, best_score = cand, score
    return best_f
