"""Corpus handling: label vocabularies, manifest ingestion, instrument-disjoint
splits, a synthetic toy corpus and augmented batch serving.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dsp
from .dsp import MODE_MF, MODE_SF, AudioClip
from .errors import InvalidArgument, InvalidCorpus, PitchOutOfRange, SplitError

DEFAULT_BASE_MIDI = 24
N_PITCHES = 61


@dataclass(frozen=True)
class TimbreVocabulary:
    """Contiguous timbre indices: musical classes first, then environmental."""

    musical_classes: tuple
    environmental_classes: tuple

    @property
    def n_musical(self):
        return len(self.musical_classes)

    @property
    def n_total(self):
        return len(self.musical_classes) + len(self.environmental_classes)

    def index_of(self, label, environmental=False):
        if environmental:
            return self.n_musical + self.environmental_classes.index(label)
        return self.musical_classes.index(label)

    def to_dict(self):
        return {"musical": list(self.musical_classes),
                "environmental": list(self.environmental_classes)}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(tuple(m) if isinstance(m, list) else m for m in d["musical"]),
                   tuple(d["environmental"]))


@dataclass(frozen=True)
class PitchVocabulary:
    base_midi: int = DEFAULT_BASE_MIDI
    n_pitches: int = N_PITCHES

    def midi_to_index(self, midi_note: int) -> int:
        if not (self.base_midi <= midi_note < self.base_midi + self.n_pitches):
            raise PitchOutOfRange(f"MIDI {midi_note} outside [{self.base_midi}, "
                                  f"{self.base_midi + self.n_pitches})")
        return midi_note - self.base_midi

    def index_to_midi(self, idx: int) -> int:
        if not (0 <= idx < self.n_pitches):
            raise PitchOutOfRange(f"pitch index {idx} outside [0, {self.n_pitches})")
        return self.base_midi + idx

    def index_to_freq(self, idx: int) -> float:
        return midi_to_freq(self.index_to_midi(idx))

    def to_dict(self):
        return {"base_midi": self.base_midi, "n_pitches": self.n_pitches}

    @classmethod
    def from_dict(cls, d):
        return cls(d["base_midi"], d["n_pitches"])


def midi_to_freq(midi_note: float) -> float:
    return 440.0 * 2.0 ** ((midi_note - 69) / 12.0)


@dataclass
class LabeledSample:
    """Featurized sample: MF log-magnitude matrix plus labels.

    `pitch_idx` is None for environmental sounds. The source waveform is kept
    when available so environmental samples can be pitch-shift augmented.
    """

    spectrogram: np.ndarray          # (1024, 64) log magnitude
    timbre_idx: int
    pitch_idx: int | None
    instrument_id: str
    partition: str = "train"
    clip: AudioClip | None = None

    @property
    def is_musical(self):
        return self.pitch_idx is not None


def build_vocabulary(musical_labels, environmental_labels=()) -> TimbreVocabulary:
    """Assign deterministic contiguous indices (sorted, musical first)."""
    musical = sorted(set(tuple(m) if isinstance(m, (list, tuple)) else m
                         for m in musical_labels))
    environmental = sorted(set(environmental_labels))
    if not musical:
        raise InvalidCorpus("no musical timbre classes")
    return TimbreVocabulary(tuple(musical), tuple(environmental))


def pitch_to_index(midi_note: int, vocab: PitchVocabulary) -> int:
    return vocab.midi_to_index(midi_note)


def make_instrument_disjoint_splits(samples, test_fraction: float, seed: int):
    """Partition samples so no instrument_id spans both partitions."""
    instruments = sorted({s.instrument_id for s in samples})
    if len(instruments) < 2:
        raise SplitError("need at least 2 instruments to split")
    rng = np.random.default_rng(seed)
    order = list(rng.permutation(instruments))
    n_test = max(1, int(round(test_fraction * len(instruments))))
    n_test = min(n_test, len(instruments) - 1)
    test_ids = set(order[:n_test])
    for s in samples:
        s.partition = "test" if s.instrument_id in test_ids else "train"
    return samples


# ---------------------------------------------------------------------------
# Synthetic toy corpus
# ---------------------------------------------------------------------------

# toy-corpus shape knobs: intonation spread per (timbre, pitch, take) cell and
# the level of the class noise bed relative to the loudest harmonic
TOY_DETUNE_CENTS = 10.0
TOY_BED_LEVEL = 0.0

_TOY_MASKS = [
    np.ones(10),                                          # full harmonic series
    np.array([1, 0, 1, 0, 1, 0, 1, 0, 1, 0], float),      # odd harmonics only
    np.array([1, 0, 0, 1, 1, 0, 0, 1, 0, 0], float),      # sparse comb
    np.array([1, 1, 0.02, 0.02, 0.02, 0.02, 0, 0, 0, 0]), # dull low-pass
]


def _toy_recipe(timbre: int):
    """Additive-synthesis recipe for one toy timbre class.

    Classes differ in which harmonics are present (whole peaks appear or
    vanish, so log spectra are far apart), in spectral slope and in decay.
    """
    mask = _TOY_MASKS[timbre % len(_TOY_MASKS)]
    slope = 0.3 + 0.25 * (timbre // len(_TOY_MASKS))
    decay = (0.5, 1.0, 1.6, 0.75)[timbre % 4] + 0.3 * (timbre // 4)
    amps = mask * np.array([(h + 1) ** (-slope) for h in range(len(mask))])
    return amps / np.max(amps), decay


def toy_clip(timbre: int, midi_note: int, detune_cents: float = 0.0,
             amp_jitter: float = 0.0) -> AudioClip:
    """Render one 1 s additive tone for a toy timbre class.

    A deterministic class-specific noise bed (fixed per class, shaped by a
    class-specific spectral tilt and high-passed at the fundamental) sits
    under the harmonics so every class has a distinctive broadband envelope
    well above the log floor. High-passing the bed at f0 keeps the bed itself
    pitch-dependent, like the resonant body of a real instrument.
    """
    amps, decay = _toy_recipe(timbre)
    f0 = midi_to_freq(midi_note) * 2.0 ** (detune_cents / 1200.0)
    t = np.arange(dsp.SAMPLE_RATE) / dsp.SAMPLE_RATE
    x = np.zeros_like(t)
    for h, a in enumerate(amps):
        f = f0 * (h + 1)
        if f >= dsp.SAMPLE_RATE / 2 * 0.95:
            break
        x += a * (1.0 + amp_jitter) * np.sin(2 * np.pi * f * t)
    bed_rng = np.random.default_rng(1000 + timbre)
    noise = bed_rng.standard_normal(dsp.SAMPLE_RATE)
    spec = np.fft.rfft(noise)
    freqs = np.fft.rfftfreq(dsp.SAMPLE_RATE, 1 / dsp.SAMPLE_RATE)
    spec *= np.exp(-freqs / (900.0 * (timbre + 1)))
    spec /= 1.0 + np.exp(-(freqs - f0) / (0.08 * f0 + 1e-9))
    bed = np.fft.irfft(spec, n=dsp.SAMPLE_RATE)
    x += TOY_BED_LEVEL * bed / np.max(np.abs(bed))
    x *= np.exp(-t / decay)
    return dsp.normalize_and_crop(AudioClip(x))


def generate_toy_corpus(n_timbres: int, n_pitches: int, takes_per_cell: int,
                        seed: int = 0, base_midi: int = 48, keep_clips: bool = True):
    """Deterministic desk-scale corpus of additive tones.

    Returns (samples, timbre_vocab, pitch_vocab). Each (timbre, take) pair is
    treated as a distinct instrument for split purposes.
    """
    if n_timbres < 2 or n_pitches < 2:
        raise InvalidArgument("need at least 2 timbres and 2 pitches")
    rng = np.random.default_rng(seed)
    timbre_vocab = build_vocabulary([f"toy{j:02d}" for j in range(n_timbres)])
    pitch_vocab = PitchVocabulary(base_midi=base_midi, n_pitches=n_pitches)
    samples = []
    for j in range(n_timbres):
        for p in range(n_pitches):
            for k in range(takes_per_cell):
                # intonation spread: exact f0 varies within a pitch class, so
                # reconstruction rewards encoding fine pitch — which the
                # latent regularizer must then actively remove
                detune = rng.uniform(-TOY_DETUNE_CENTS, TOY_DETUNE_CENTS)
                jitter = rng.uniform(-0.05, 0.05)
                clip = toy_clip(j, base_midi + p, detune, jitter)
                spec = dsp.stft_log_magnitude(clip, MODE_MF).values
                samples.append(LabeledSample(
                    spectrogram=spec,
                    timbre_idx=j,
                    pitch_idx=p,
                    instrument_id=f"toy{j:02d}-take{k}",
                    clip=clip if keep_clips else None,
                ))
    return samples, timbre_vocab, pitch_vocab


def generate_toy_environmental(n_classes: int, takes: int, timbre_vocab: TimbreVocabulary,
                               seed: int = 0):
    """Unpitched noise-band textures standing in for environmental recordings.

    Class indices continue after the musical classes of `timbre_vocab`.
    """
    rng = np.random.default_rng(seed)
    samples = []
    t = np.arange(dsp.SAMPLE_RATE) / dsp.SAMPLE_RATE
    for j in range(n_classes):
        center = 300.0 * (j + 1)
        width = 100.0 + 60.0 * j
        for k in range(takes):
            noise = rng.standard_normal(dsp.SAMPLE_RATE)
            # band-passed noise with a class-specific amplitude modulation
            spec = np.fft.rfft(noise)
            freqs = np.fft.rfftfreq(dsp.SAMPLE_RATE, 1 / dsp.SAMPLE_RATE)
            spec *= np.exp(-0.5 * ((freqs - center) / width) ** 2)
            x = np.fft.irfft(spec, n=dsp.SAMPLE_RATE)
            x *= 1.0 + 0.5 * np.sin(2 * np.pi * (1.5 + j) * t)
            clip = dsp.normalize_and_crop(AudioClip(x))
            samples.append(LabeledSample(
                spectrogram=dsp.stft_log_magnitude(clip, MODE_MF).values,
                timbre_idx=timbre_vocab.n_musical + j,
                pitch_idx=None,
                instrument_id=f"env{j:02d}-take{k}",
                clip=clip,
            ))
    return samples


# ---------------------------------------------------------------------------
# Batching
# ---------------------------------------------------------------------------

@dataclass
class Dataset:
    """In-memory featurized dataset serving training batches."""

    samples: list
    timbre_vocab: TimbreVocabulary
    pitch_vocab: PitchVocabulary
    mode: str = MODE_MF
    seed: int = 0
    _rng: np.random.Generator = field(default=None, repr=False)

    def __post_init__(self):
        if self._rng is None:
            self._rng = np.random.default_rng(self.seed)

    def partition(self, name):
        return [s for s in self.samples if s.partition == name]

    def rng_for_step(self, step: int) -> np.random.Generator:
        """Stateless per-step generator, so training is resumable."""
        return np.random.default_rng([self.seed, step])


def next_batch(dataset: Dataset, batch_size: int = 8, augment: bool = False,
               rng: np.random.Generator | None = None, partition: str = "train"):
    """Draw a batch. Environmental samples get a 50% random pitch-shift
    (within one octave) when `augment` is on; musical samples never do.

    Returns dict with keys: spec (B,1024,64) MF or (B,1024) SF, timbre_idx,
    pitch_idx (-1 where unknown), is_musical.
    """
    pool = dataset.partition(partition) or dataset.samples
    if not pool:
        raise InvalidCorpus("empty dataset")
    rng = rng if rng is not None else dataset._rng
    idx = rng.integers(0, len(pool), size=batch_size)
    specs, timbres, pitches, musical = [], [], [], []
    for i in idx:
        s = pool[i]
        spec = s.spectrogram
        if augment and not s.is_musical and s.clip is not None and rng.random() < 0.5:
            shifted = dsp.pitch_shift(s.clip, rng.uniform(-12.0, 12.0))
            spec = dsp.stft_log_magnitude(dsp.normalize_and_crop(shifted), MODE_MF).values
        if dataset.mode == MODE_SF:
            spec = spec[:, rng.integers(0, spec.shape[1])]
        specs.append(spec)
        timbres.append(s.timbre_idx)
        pitches.append(s.pitch_idx if s.is_musical else -1)
        musical.append(s.is_musical)
    return {
        "spec": np.stack(specs).astype(np.float32),
        "timbre_idx": np.array(timbres, dtype=np.int64),
        "pitch_idx": np.array(pitches, dtype=np.int64),
        "is_musical": np.array(musical, dtype=bool),
    }


# ---------------------------------------------------------------------------
# Manifest ingestion and feature cache
# ---------------------------------------------------------------------------

def load_manifest(manifest_path, timbre_vocab: TimbreVocabulary | None = None,
                  pitch_vocab: PitchVocabulary | None = None):
    """Read a newline-delimited JSON manifest and featurize the audio.

    Each record: {"path": ..., "timbre_label": ..., "pitch_midi": int|null,
    "instrument_id": ...}. Relative paths resolve against the manifest.
    """
    manifest_path = Path(manifest_path)
    records = [json.loads(line) for line in manifest_path.read_text().splitlines() if line.strip()]
    if not records:
        raise InvalidCorpus(f"empty manifest {manifest_path}")
    if timbre_vocab is None:
        musical = [r["timbre_label"] for r in records if r.get("pitch_midi") is not None]
        environmental = [r["timbre_label"] for r in records if r.get("pitch_midi") is None]
        timbre_vocab = build_vocabulary(musical or environmental,
                                        environmental if musical else [])
    pitch_vocab = pitch_vocab or PitchVocabulary()
    samples = []
    for r in records:
        path = Path(r["path"])
        if not path.is_absolute():
            path = manifest_path.parent / path
        clip = dsp.normalize_and_crop(dsp.load_wav(path))
        musical_rec = r.get("pitch_midi") is not None
        try:
            timbre_idx = timbre_vocab.index_of(r["timbre_label"], environmental=not musical_rec)
        except ValueError:
            raise InvalidCorpus(f"label {r['timbre_label']!r} not in vocabulary")
        samples.append(LabeledSample(
            spectrogram=dsp.stft_log_magnitude(clip, MODE_MF).values,
            timbre_idx=timbre_idx,
            pitch_idx=pitch_vocab.midi_to_index(r["pitch_midi"]) if musical_rec else None,
            instrument_id=r["instrument_id"],
            clip=clip,
        ))
    return samples, timbre_vocab, pitch_vocab


_CACHE_MAGIC = b"TSFC"
_CACHE_VERSION = 1


def write_feature_cache(path, samples, timbre_vocab, pitch_vocab):
    """Versioned binary cache: header JSON then raw float32 blocks."""
    header = {
        "version": _CACHE_VERSION,
        "count": len(samples),
        "timbre_vocab": timbre_vocab.to_dict(),
        "pitch_vocab": pitch_vocab.to_dict(),
        "records": [
            {"timbre_idx": s.timbre_idx, "pitch_idx": s.pitch_idx,
             "instrument_id": s.instrument_id, "partition": s.partition,
             "shape": list(s.spectrogram.shape)}
            for s in samples
        ],
    }
    hdr = json.dumps(header).encode()
    with open(path, "wb") as f:
        f.write(_CACHE_MAGIC)
        f.write(struct.pack("<I", len(hdr)))
        f.write(hdr)
        for s in samples:
            f.write(s.spectrogram.astype("<f4").tobytes())


def read_feature_cache(path):
    with open(path, "rb") as f:
        if f.read(4) != _CACHE_MAGIC:
            raise InvalidCorpus(f"{path} is not a feature cache")
        (hlen,) = struct.unpack("<I", f.read(4))
        header = json.loads(f.read(hlen))
        if header["version"] != _CACHE_VERSION:
            raise InvalidCorpus(f"unsupported cache version {header['version']}")
        samples = []
        for rec in header["records"]:
            n = int(np.prod(rec["shape"]))
            data = np.frombuffer(f.read(n * 4), dtype="<f4").reshape(rec["shape"])
            samples.append(LabeledSample(
                spectrogram=data.astype(np.float64),
                timbre_idx=rec["timbre_idx"],
                pitch_idx=rec["pitch_idx"],
                instrument_id=rec["instrument_id"],
                partition=rec["partition"],
            ))
    return (samples, TimbreVocabulary.from_dict(header["timbre_vocab"]),
            PitchVocabulary.from_dict(header["pitch_vocab"]))
