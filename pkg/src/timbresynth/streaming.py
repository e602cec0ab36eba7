"""Frame-at-a-time synthesis for live use (single-frame bundles only).

Each frame decodes the current latent blend at the current pitch, carries
phase forward from the previous frame and emits one hop (256 samples) via
windowed overlap-add. Batch rendering runs the exact same per-frame path, so
streamed and batch output are bit-identical for identical control sequences.
"""
from __future__ import annotations

import numpy as np

from . import dsp, model
from .dsp import HOP, MODE_SF, N_FFT
from .errors import InvalidArgument, UnsupportedMode
from .model import ModelBundle

ATTACK_FRAMES = 2       # ~31 ms
RELEASE_FRAMES = 4      # ~63 ms


class StreamSynthesizer:
    """Per-session streaming state over one immutable SF bundle."""

    def __init__(self, bundle: ModelBundle):
        if bundle.mode != MODE_SF:
            raise UnsupportedMode("streaming requires a single-frame bundle")
        self.bundle = bundle
        self.latents: dict[str, np.ndarray] = {}
        self.weights: dict[str, float] = {}
        self.pitch_idx = 0
        self.gate = False
        self.gain = 0.0
        self.frame_index = 0
        # phase advance per hop for each FFT bin
        self._omega = 2 * np.pi * HOP * np.arange(dsp.N_BINS + 1) / N_FFT
        self._phase = np.zeros(dsp.N_BINS + 1)
        self._window = dsp._WINDOW
        self._ola = np.zeros(N_FFT)
        self._wsum = np.zeros(N_FFT)

    # -- controls: take effect on the next frame boundary --------------------

    def set_latent(self, name: str, z):
        z = np.asarray(z, dtype=np.float64).reshape(-1)
        if z.shape != (model.LATENT_DIM,):
            raise InvalidArgument(f"latent must be {model.LATENT_DIM}-dim")
        self.latents[name] = z

    def set_weights(self, weights: dict):
        unknown = set(weights) - set(self.latents)
        if unknown:
            raise InvalidArgument(f"weights reference unloaded latents: {sorted(unknown)}")
        self.weights = {k: float(v) for k, v in weights.items()}

    def set_pitch(self, pitch_idx: int):
        if not (0 <= pitch_idx < self.bundle.cond_dim):
            raise InvalidArgument(f"pitch index {pitch_idx} out of range")
        self.pitch_idx = int(pitch_idx)

    def note_on(self, pitch_idx: int | None = None):
        if pitch_idx is not None:
            self.set_pitch(pitch_idx)
        self.gate = True

    def note_off(self):
        self.gate = False

    def apply_control(self, msg: dict):
        """Dispatch one control message ({"type": ..., ...})."""
        kind = msg.get("type")
        if kind == "set-pitch":
            self.set_pitch(msg["pitch_idx"])
        elif kind == "set-weights":
            self.set_weights(msg["weights"])
        elif kind == "note-on":
            self.note_on(msg.get("pitch_idx"))
        elif kind == "note-off":
            self.note_off()
        else:
            raise InvalidArgument(f"unknown control message {kind!r}")

    # -- synthesis ------------------------------------------------------------

    def _current_latent(self):
        z = np.zeros(model.LATENT_DIM)
        for name, w in self.weights.items():
            z += w * self.latents[name]
        return z

    def next_frame(self) -> np.ndarray:
        """Synthesize one frame and return HOP samples."""
        target = 1.0 if self.gate else 0.0
        step = 1.0 / ATTACK_FRAMES if self.gate else 1.0 / RELEASE_FRAMES
        if self.gain < target:
            self.gain = min(target, self.gain + step)
        elif self.gain > target:
            self.gain = max(target, self.gain - step)

        if self.gain > 0 and self.weights:
            logmag = model.decode(self.bundle, self._current_latent().astype(np.float32),
                                  model.one_hot_pitch(self.pitch_idx, self.bundle.cond_dim))
            mag = np.maximum(np.exp(logmag) - dsp.LOG_EPS, 0.0) * self.gain
        else:
            mag = np.zeros(dsp.N_BINS)
        full = np.concatenate([mag, [0.0]])
        self._phase += self._omega
        frame = np.fft.irfft(full * np.exp(1j * self._phase), n=N_FFT) * self._window

        self._ola += frame
        self._wsum += self._window * self._window
        chunk = self._ola[:HOP].copy()
        wnorm = self._wsum[:HOP]
        nz = wnorm > 1e-10
        chunk[nz] /= wnorm[nz]
        self._ola = np.concatenate([self._ola[HOP:], np.zeros(HOP)])
        self._wsum = np.concatenate([self._wsum[HOP:], np.zeros(HOP)])
        self.frame_index += 1
        return chunk

    def render(self, n_frames: int) -> np.ndarray:
        """Batch render through the identical per-frame path."""
        return np.concatenate([self.next_frame() for _ in range(n_frames)])


def stream_synthesize(bundle: ModelBundle, session: StreamSynthesizer | None,
                      control_msg: dict | None = None):
    """One step of the streaming contract: apply a control message (if any)
    and produce the next frame chunk. Returns (session, chunk)."""
    if session is None:
        session = StreamSynthesizer(bundle)
    if control_msg is not None:
        session.apply_control(control_msg)
    return session, session.next_frame()
