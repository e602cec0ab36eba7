"""Creative engine: latent interpolation, pitch-conditioned resynthesis,
melody rendering and time-varying timbre crossfades.

Melodies are assembled on the synthesis frame grid (one spectrogram column
per hop, 62.5 frames per second) and inverted once per phrase with
Griffin-Lim, so note boundaries share a consistent phase estimate.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import dsp, model
from .dsp import MODE_MF, MODE_SF, AudioClip
from .errors import InvalidArgument, PitchOutOfRange
from .midi import NoteEvent
from .model import ModelBundle

log = logging.getLogger(__name__)

# one decoded column per hop of synthesis audio
FRAMES_PER_SECOND = dsp.SAMPLE_RATE / dsp.HOP      # 62.5


@dataclass
class InterpolationSpec:
    """Weighted set of latents to blend. Weights are used as given; callers
    that want convex blends normalize before constructing the spec."""

    latents: list
    weights: list

    def __post_init__(self):
        if len(self.latents) < 1:
            raise InvalidArgument("need at least one latent")
        if len(self.latents) != len(self.weights):
            raise InvalidArgument("latents and weights must have equal length")
        self.latents = [np.asarray(z, dtype=np.float64).reshape(-1) for z in self.latents]
        for z in self.latents:
            if z.shape != (model.LATENT_DIM,):
                raise InvalidArgument(f"latents must be {model.LATENT_DIM}-dim")
        self.weights = [float(w) for w in self.weights]
        if not all(np.isfinite(self.weights)):
            raise InvalidArgument("weights must be finite")


def interpolate_latents(spec: InterpolationSpec) -> np.ndarray:
    """Weighted sum of the latents."""
    out = np.zeros(model.LATENT_DIM)
    for w, z in zip(spec.weights, spec.latents):
        out += w * z
    return out


def reference_latent(bundle: ModelBundle, clip: AudioClip) -> np.ndarray:
    """One latent per reference sound: MF encodes the whole matrix, SF
    averages the per-frame latents of the clip."""
    clip = dsp.normalize_and_crop(clip)
    if bundle.mode == MODE_MF:
        return model.encode(bundle, dsp.stft_log_magnitude(clip, MODE_MF))
    frames = dsp.frames_to_matrix(dsp.stft_log_magnitude(clip, MODE_SF)).T  # (64, 1024)
    return model.encode(bundle, frames).mean(axis=0)


def _fold_pitch(midi_note: int, vocab) -> int:
    """Octave-fold out-of-vocabulary notes into range, with a warning."""
    lo, hi = vocab.base_midi, vocab.base_midi + vocab.n_pitches - 1
    folded = midi_note
    while folded < lo:
        folded += 12
    while folded > hi:
        folded -= 12
    if folded < lo:
        raise PitchOutOfRange(f"MIDI {midi_note} cannot be folded into [{lo},{hi}]")
    if folded != midi_note:
        log.warning("MIDI %d outside vocabulary [%d,%d]; folded to %d",
                    midi_note, lo, hi, folded)
    return vocab.midi_to_index(folded)


def _decode_frames(bundle: ModelBundle, z: np.ndarray, pitch_idx: int,
                   n_frames: int) -> np.ndarray:
    """(1024, n_frames) log-magnitude block for one latent at one pitch."""
    y = model.one_hot_pitch(pitch_idx, bundle.cond_dim)
    if bundle.mode == MODE_SF:
        zb = np.broadcast_to(z, (n_frames, model.LATENT_DIM))
        return model.decode(bundle, np.ascontiguousarray(zb), y).T
    block = model.decode(bundle, z, y)                      # (1024, 64)
    if n_frames <= block.shape[1]:
        return block[:, :n_frames]
    reps = int(np.ceil(n_frames / block.shape[1]))
    return np.tile(block, (1, reps))[:, :n_frames]


def resynthesize(bundle: ModelBundle, clip: AudioClip, target_midi: int,
                 iterations: int = 30) -> AudioClip:
    """Encode a clip and decode it back at the requested pitch."""
    pitch_idx = bundle.pitch_vocab.midi_to_index(target_midi)
    clip = dsp.normalize_and_crop(clip)
    y = model.one_hot_pitch(pitch_idx, bundle.cond_dim)
    if bundle.mode == MODE_MF:
        z = model.encode(bundle, dsp.stft_log_magnitude(clip, MODE_MF))
        logmag = model.decode(bundle, z, y)
    else:
        frames = dsp.frames_to_matrix(dsp.stft_log_magnitude(clip, MODE_SF)).T
        z = model.encode(bundle, frames)                    # (64, 32) per-frame
        logmag = model.decode(bundle, z, y).T
    return dsp.griffin_lim_invert(logmag, iterations)


def chromatic_scale(pitch_vocab, note_duration_s: float = 1.0) -> list[NoteEvent]:
    """One note per vocabulary pitch, ascending from the lowest."""
    return [NoteEvent(pitch_vocab.base_midi + p, p * note_duration_s, note_duration_s)
            for p in range(pitch_vocab.n_pitches)]


def render_note_sequence(bundle: ModelBundle, reference, events: list[NoteEvent],
                         total_duration_s: float | None = None,
                         iterations: int = 30) -> AudioClip:
    """Render a melody from one reference timbre.

    `reference` is an AudioClip or a 32-dim latent. Events land on the
    64-frames-per-second grid; overlaps mix additively in magnitude and the
    whole phrase is inverted once.
    """
    if isinstance(reference, AudioClip):
        z = reference_latent(bundle, reference)
    else:
        z = np.asarray(reference, dtype=np.float64).reshape(-1)
    if total_duration_s is None:
        total_duration_s = max((e.onset_s + e.duration_s for e in events), default=0.0)
    n_total = int(np.ceil(total_duration_s * FRAMES_PER_SECOND))
    if not events:
        return AudioClip(np.zeros(int(round(total_duration_s * dsp.SAMPLE_RATE))))

    mag_acc = np.zeros((dsp.N_BINS, n_total))
    for e in sorted(events, key=lambda e: e.onset_s):
        pitch_idx = _fold_pitch(e.midi_note, bundle.pitch_vocab)
        f0 = int(round(e.onset_s * FRAMES_PER_SECOND))
        f1 = min(n_total, int(round((e.onset_s + e.duration_s) * FRAMES_PER_SECOND)))
        if f1 <= f0:
            continue
        logmag = _decode_frames(bundle, z, pitch_idx, f1 - f0)
        mag_acc[:, f0:f1] += np.maximum(np.exp(logmag) - dsp.LOG_EPS, 0.0)

    clip = dsp.griffin_lim_invert(np.log(mag_acc + dsp.LOG_EPS), iterations)
    target = int(round(total_duration_s * dsp.SAMPLE_RATE))
    x = clip.samples
    if len(x) < target:
        x = np.pad(x, (0, target - len(x)))
    x = x[:target]
    peak = np.max(np.abs(x))
    if peak > 0:
        # additive overlaps can exceed full scale; re-normalize the phrase
        x = x / peak * 0.95
    return AudioClip(x)


def crossfade_latents(z_a: np.ndarray, z_b: np.ndarray, n_frames: int,
                      swap: bool = False) -> np.ndarray:
    """(n_frames, 32) linear schedule from the second latent to the first.

    The mix weight runs 0 -> 1 over the frames and weights `z_a`, so the fade
    starts on `z_b`; `swap` flips the orientation.
    """
    if n_frames < 2:
        raise InvalidArgument("crossfade needs at least 2 frames")
    if swap:
        z_a, z_b = z_b, z_a
    alphas = np.arange(n_frames) / (n_frames - 1)
    return np.outer(1 - alphas, z_b) + np.outer(alphas, z_a)


def crossfade_timbres(bundle: ModelBundle, clip_a: AudioClip, clip_b: AudioClip,
                      duration_s: float, midi_note: int, swap: bool = False,
                      iterations: int = 30) -> AudioClip:
    """Fade from one reference timbre to the other at a constant pitch."""
    if duration_s <= 0:
        raise InvalidArgument("duration must be > 0")
    pitch_idx = bundle.pitch_vocab.midi_to_index(midi_note)
    z_a = reference_latent(bundle, clip_a)
    z_b = reference_latent(bundle, clip_b)
    n_frames = int(round(duration_s * FRAMES_PER_SECOND))
    zs = crossfade_latents(z_a, z_b, n_frames, swap=swap)
    y = model.one_hot_pitch(pitch_idx, bundle.cond_dim)
    if bundle.mode == MODE_SF:
        logmag = model.decode(bundle, zs.astype(np.float32), y).T
    else:
        cols = []
        blocks = model.decode(bundle, zs.astype(np.float32), y)  # (F, 1024, 64)
        for f in range(n_frames):
            col = int(round(f / (n_frames - 1) * (dsp.N_FRAMES - 1)))
            cols.append(blocks[f][:, col])
        logmag = np.stack(cols, axis=1)
    return dsp.griffin_lim_invert(logmag, iterations)
