"""Encoder/decoder/classifier networks in single-frame (FC) and multi-frame
(convolutional) variants, plus checkpoint persistence.

The decoder consumes the 32-dim timbre latent concatenated with a one-hot
pitch embedding; pitch never reaches the encoder.
"""
from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .corpus import PitchVocabulary, TimbreVocabulary
from .dsp import MODE_MF, MODE_SF, N_BINS, N_FRAMES, Spectrogram
from .errors import (ChecksumError, IncompatibleCheckpoint, InvalidArgument,
                     InvalidConditioning, ShapeError)

LATENT_DIM = 32
# fixed affine feature scaling: log-magnitude features live in roughly
# [-11.5, 6]; Tanh stacks need inputs near unit scale to avoid saturation
FEATURE_MEAN = -8.0
FEATURE_STD = 4.0
_SF_ENC_DIMS = [N_BINS, 512, 512, 256, 128, 64, LATENT_DIM]
_MF_CHANNELS = [16, 32, 64, 128, 256, 512, 512, 512, 512, 512]
_CLS_HIDDEN = 256


class SFEncoder(nn.Module):
    """6 fully-connected layers with Tanh; the latent layer itself is linear."""

    def __init__(self):
        super().__init__()
        layers = []
        for i in range(len(_SF_ENC_DIMS) - 1):
            layers.append(nn.Linear(_SF_ENC_DIMS[i], _SF_ENC_DIMS[i + 1]))
            if i < len(_SF_ENC_DIMS) - 2:
                layers.append(nn.Tanh())
        self.net = nn.Sequential(*layers)

    def forward(self, x):
        return self.net((x - FEATURE_MEAN) / FEATURE_STD)


class SFDecoder(nn.Module):
    def __init__(self, cond_dim):
        super().__init__()
        dims = [LATENT_DIM + cond_dim] + _SF_ENC_DIMS[-2::-1]
        layers = []
        for i in range(len(dims) - 1):
            layers.append(nn.Linear(dims[i], dims[i + 1]))
            if i < len(dims) - 2:
                layers.append(nn.Tanh())
        self.net = nn.Sequential(*layers)

    def forward(self, x):
        return self.net(x) * FEATURE_STD + FEATURE_MEAN


def _mf_conv_stack():
    """10 stride-2 convs: both axes halve for 6 layers, then frequency only."""
    layers = []
    in_ch = 1
    for i, out_ch in enumerate(_MF_CHANNELS):
        if i < 6:
            conv = nn.Conv2d(in_ch, out_ch, kernel_size=4, stride=2, padding=1)
        else:
            conv = nn.Conv2d(in_ch, out_ch, kernel_size=(4, 3), stride=(2, 1), padding=1)
        layers += [conv, nn.LeakyReLU(0.2), nn.BatchNorm2d(out_ch)]
        in_ch = out_ch
    return nn.Sequential(*layers)


class MFEncoder(nn.Module):
    def __init__(self):
        super().__init__()
        self.conv = _mf_conv_stack()
        self.proj = nn.Linear(_MF_CHANNELS[-1], LATENT_DIM)

    def forward(self, x):
        x = (x - FEATURE_MEAN) / FEATURE_STD
        h = self.conv(x.unsqueeze(1))          # (B, 512, 1, 1)
        return self.proj(h.flatten(1))


class MFDecoder(nn.Module):
    def __init__(self, cond_dim):
        super().__init__()
        self.proj = nn.Linear(LATENT_DIM + cond_dim, _MF_CHANNELS[-1])
        chans = _MF_CHANNELS[::-1] + [1]       # 512,...,16,1
        layers = []
        for i in range(len(chans) - 1):
            if i < 4:
                deconv = nn.ConvTranspose2d(chans[i], chans[i + 1],
                                            kernel_size=(4, 3), stride=(2, 1), padding=1)
            else:
                deconv = nn.ConvTranspose2d(chans[i], chans[i + 1],
                                            kernel_size=4, stride=2, padding=1)
            layers.append(deconv)
            if i < len(chans) - 2:
                layers += [nn.LeakyReLU(0.2), nn.BatchNorm2d(chans[i + 1])]
        self.deconv = nn.Sequential(*layers)

    def forward(self, x):
        h = self.proj(x)[:, :, None, None]
        return self.deconv(h).squeeze(1) * FEATURE_STD + FEATURE_MEAN


class LatentClassifier(nn.Module):
    """4 stacked FC layers with ReLU in between."""

    def __init__(self, n_out):
        super().__init__()
        self.net = nn.Sequential(
            nn.Linear(LATENT_DIM, _CLS_HIDDEN), nn.ReLU(),
            nn.Linear(_CLS_HIDDEN, _CLS_HIDDEN), nn.ReLU(),
            nn.Linear(_CLS_HIDDEN, _CLS_HIDDEN), nn.ReLU(),
            nn.Linear(_CLS_HIDDEN, n_out),
        )

    def forward(self, z):
        return self.net(z)


@dataclass
class ModelBundle:
    mode: str
    encoder: nn.Module
    decoder: nn.Module
    timbre_classifier: nn.Module
    pitch_classifier: nn.Module
    timbre_vocab: TimbreVocabulary
    pitch_vocab: PitchVocabulary

    @property
    def cond_dim(self):
        return self.pitch_vocab.n_pitches

    def modules(self):
        return {"encoder": self.encoder, "decoder": self.decoder,
                "timbre_classifier": self.timbre_classifier,
                "pitch_classifier": self.pitch_classifier}

    def train_mode(self):
        for m in self.modules().values():
            m.train()
        return self

    def eval_mode(self):
        for m in self.modules().values():
            m.eval()
        return self

    def parameter_hash(self) -> str:
        h = hashlib.sha256()
        for name, mod in sorted(self.modules().items()):
            for pname, p in sorted(mod.state_dict().items()):
                h.update(name.encode())
                h.update(pname.encode())
                h.update(p.detach().cpu().numpy().tobytes())
        return h.hexdigest()

    def architecture_hash(self) -> str:
        desc = {"mode": self.mode, "latent": LATENT_DIM,
                "n_timbres": self.timbre_vocab.n_total,
                "n_pitches": self.pitch_vocab.n_pitches,
                "sf_dims": _SF_ENC_DIMS, "mf_channels": _MF_CHANNELS}
        return hashlib.sha256(json.dumps(desc, sort_keys=True).encode()).hexdigest()[:16]


def build_model(mode: str, timbre_vocab: TimbreVocabulary,
                pitch_vocab: PitchVocabulary | None = None, seed: int = 0) -> ModelBundle:
    pitch_vocab = pitch_vocab or PitchVocabulary()
    torch.manual_seed(seed)
    if mode == MODE_SF:
        enc, dec = SFEncoder(), SFDecoder(pitch_vocab.n_pitches)
    elif mode == MODE_MF:
        enc, dec = MFEncoder(), MFDecoder(pitch_vocab.n_pitches)
    else:
        raise InvalidArgument(f"unknown mode {mode!r}")
    bundle = ModelBundle(mode, enc, dec,
                         LatentClassifier(timbre_vocab.n_total),
                         LatentClassifier(pitch_vocab.n_pitches),
                         timbre_vocab, pitch_vocab)
    return bundle.eval_mode()


def _as_batch(x, mode):
    if isinstance(x, Spectrogram):
        x = x.values
    x = np.asarray(x, dtype=np.float32)
    if mode == MODE_SF:
        if x.ndim == 1 and x.shape[0] == N_BINS:
            return torch.from_numpy(x[None, :]), True
        if x.ndim == 2 and x.shape[1] == N_BINS:
            return torch.from_numpy(x), False
        raise ShapeError(f"SF input must be ({N_BINS},) or (B,{N_BINS}), got {x.shape}")
    if x.ndim == 2 and x.shape == (N_BINS, N_FRAMES):
        return torch.from_numpy(x[None]), True
    if x.ndim == 3 and x.shape[1:] == (N_BINS, N_FRAMES):
        return torch.from_numpy(x), False
    raise ShapeError(f"MF input must be ({N_BINS},{N_FRAMES}) batched or not, got {x.shape}")


def encode(bundle: ModelBundle, X) -> np.ndarray:
    """Project spectrogram(s) to 32-dim latent code(s)."""
    xb, single = _as_batch(X, bundle.mode)
    with torch.no_grad():
        z = bundle.encoder(xb).cpu().numpy()
    return z[0] if single else z


def one_hot_pitch(pitch_idx: int, n_pitches: int) -> np.ndarray:
    if not (0 <= pitch_idx < n_pitches):
        raise InvalidConditioning(f"pitch index {pitch_idx} outside [0,{n_pitches})")
    y = np.zeros(n_pitches, dtype=np.float32)
    y[pitch_idx] = 1.0
    return y


def _check_conditioning(y, n_pitches, strict):
    y = np.asarray(y, dtype=np.float32)
    if y.shape[-1] != n_pitches:
        raise ShapeError(f"conditioning must have {n_pitches} dims, got {y.shape}")
    if strict:
        flat = y.reshape(-1, n_pitches)
        ok = np.all((np.sum(flat == 1.0, axis=1) == 1) & (np.sum(flat != 0.0, axis=1) == 1))
        if not ok:
            raise InvalidConditioning("conditioning must be one-hot (pass strict=False to blend)")
    return y


def decode(bundle: ModelBundle, z, y_p, strict: bool = True) -> np.ndarray:
    """Decode latent(s) under pitch conditioning. Returns (1024,) / (1024,64)
    for single inputs, batched otherwise."""
    z = np.asarray(z, dtype=np.float32)
    single = z.ndim == 1
    if z.shape[-1] != LATENT_DIM:
        raise ShapeError(f"latent must have {LATENT_DIM} dims, got {z.shape}")
    y = _check_conditioning(y_p, bundle.cond_dim, strict)
    if single:
        z, y = z[None], np.broadcast_to(y, (1, bundle.cond_dim))
    else:
        y = np.broadcast_to(y.reshape(-1, bundle.cond_dim), (z.shape[0], bundle.cond_dim))
    inp = torch.from_numpy(np.concatenate([z, y], axis=1))
    with torch.no_grad():
        out = bundle.decoder(inp).cpu().numpy()
    return out[0] if single else out


def classify_latent(bundle: ModelBundle, z):
    """Timbre and pitch logits for latent(s)."""
    z = np.asarray(z, dtype=np.float32)
    single = z.ndim == 1
    if z.shape[-1] != LATENT_DIM:
        raise ShapeError(f"latent must have {LATENT_DIM} dims, got {z.shape}")
    zb = torch.from_numpy(z[None] if single else z)
    with torch.no_grad():
        t = bundle.timbre_classifier(zb).cpu().numpy()
        p = bundle.pitch_classifier(zb).cpu().numpy()
    return (t[0], p[0]) if single else (t, p)


# ---------------------------------------------------------------------------
# Checkpoint format: magic, header JSON, named float32 blobs, sha256 trailer.
# ---------------------------------------------------------------------------

_CKPT_MAGIC = b"TSCK"
_CKPT_VERSION = 1


def save_checkpoint(bundle: ModelBundle, path, extra_arrays: dict | None = None,
                    meta: dict | None = None):
    tensors = []
    blobs = []
    for mod_name, mod in bundle.modules().items():
        for pname, p in mod.state_dict().items():
            arr = p.detach().cpu().numpy()
            blob = arr.astype("<f8" if arr.dtype == np.float64 else "<f4").tobytes() \
                if arr.dtype.kind == "f" else arr.astype("<i8").tobytes()
            dtype = {"f": "f4" if arr.dtype != np.float64 else "f8", "i": "i8",
                     "u": "i8"}[arr.dtype.kind]
            tensors.append({"name": f"{mod_name}.{pname}", "shape": list(arr.shape),
                            "dtype": dtype})
            blobs.append(blob)
    for name, arr in (extra_arrays or {}).items():
        arr = np.asarray(arr)
        dtype = "f8" if arr.dtype.kind == "f" else "i8"
        tensors.append({"name": f"extra.{name}", "shape": list(arr.shape), "dtype": dtype})
        blobs.append(arr.astype("<" + dtype).tobytes())
    header = {
        "version": _CKPT_VERSION,
        "mode": bundle.mode,
        "timbre_vocab": bundle.timbre_vocab.to_dict(),
        "pitch_vocab": bundle.pitch_vocab.to_dict(),
        "architecture": bundle.architecture_hash(),
        "tensors": tensors,
        "meta": meta or {},
    }
    hdr = json.dumps(header).encode()
    h = hashlib.sha256()
    with open(path, "wb") as f:
        for chunk in [_CKPT_MAGIC, struct.pack("<I", len(hdr)), hdr, *blobs]:
            f.write(chunk)
            h.update(chunk)
        f.write(h.digest())


def load_checkpoint(path, expect_mode: str | None = None):
    """Load a checkpoint. Returns (bundle, extra_arrays, meta)."""
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < 40 or data[:4] != _CKPT_MAGIC:
        raise ChecksumError(f"{path} is not a checkpoint")
    body, digest = data[:-32], data[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise ChecksumError(f"{path} failed checksum verification")
    (hlen,) = struct.unpack("<I", body[4:8])
    header = json.loads(body[8:8 + hlen])
    if header["version"] != _CKPT_VERSION:
        raise IncompatibleCheckpoint(f"unsupported checkpoint version {header['version']}")
    if expect_mode is not None and header["mode"] != expect_mode:
        raise IncompatibleCheckpoint(
            f"checkpoint is {header['mode']} but {expect_mode} was requested")
    bundle = build_model(header["mode"],
                         TimbreVocabulary.from_dict(header["timbre_vocab"]),
                         PitchVocabulary.from_dict(header["pitch_vocab"]))
    if header["architecture"] != bundle.architecture_hash():
        raise IncompatibleCheckpoint("architecture mismatch")
    offset = 8 + hlen
    arrays = {}
    for t in header["tensors"]:
        n = int(np.prod(t["shape"])) if t["shape"] else 1
        size = n * (8 if t["dtype"] in ("f8", "i8") else 4)
        raw = body[offset:offset + size]
        if len(raw) != size:
            raise ChecksumError(f"{path} truncated")
        arrays[t["name"]] = np.frombuffer(raw, dtype="<" + t["dtype"]).reshape(t["shape"])
        offset += size
    for mod_name, mod in bundle.modules().items():
        sd = {}
        for pname, p in mod.state_dict().items():
            arr = arrays[f"{mod_name}.{pname}"]
            sd[pname] = torch.from_numpy(arr.copy()).to(p.dtype).reshape(p.shape)
        mod.load_state_dict(sd)
    extras = {k[len("extra."):]: v for k, v in arrays.items() if k.startswith("extra.")}
    return bundle.eval_mode(), extras, header["meta"]
