"""Metric suite: reconstruction MSE, synthesis speed, latent pitch accuracy
(LPA), synthesis pitch accuracy (SPA) and latent export.

LPA trains a fresh probe on frozen latents (low is good: pitch was squeezed
out of the latent). SPA scores synthetic output with an independently trained
pitch classifier against randomly sampled conditioning (high is good: the
decoder obeys the conditioning).
"""
from __future__ import annotations

import json
import struct
import time
from dataclasses import asdict, dataclass

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from . import dsp, model
from .dsp import MODE_SF
from .errors import InvalidArgument, RefuseToScore
from .model import LatentClassifier, ModelBundle

SPA_SANITY_FLOOR = 85.0     # refuse to score with a weak pitch classifier


@dataclass
class MetricReport:
    mse: float | None = None
    speed_ms_mean: float | None = None
    speed_ms_std: float | None = None
    griffin_lim_ms: float | None = None
    lpa_percent: float | None = None
    spa_percent: float | None = None
    config_fingerprint: str = ""

    def to_json(self):
        return json.dumps({k: v for k, v in asdict(self).items() if v is not None},
                          indent=2)


def _frame_samples(samples, mode):
    """(X, timbre_idx, pitch_idx) arrays; SF mode explodes clips into frames."""
    xs, ts, ps = [], [], []
    for s in samples:
        if mode == MODE_SF:
            for t in range(s.spectrogram.shape[1]):
                xs.append(s.spectrogram[:, t])
                ts.append(s.timbre_idx)
                ps.append(-1 if s.pitch_idx is None else s.pitch_idx)
        else:
            xs.append(s.spectrogram)
            ts.append(s.timbre_idx)
            ps.append(-1 if s.pitch_idx is None else s.pitch_idx)
    return (np.stack(xs).astype(np.float32), np.array(ts), np.array(ps))


def eval_reconstruction_mse(bundle: ModelBundle, samples, decode_fn=None) -> float:
    """Unweighted MSE between input and reconstructed features under
    ground-truth pitch conditioning (pitch 0 for unpitched samples)."""
    if not samples:
        raise InvalidArgument("empty dataset")
    X, _, p = _frame_samples(samples, bundle.mode)
    cond_idx = np.where(p >= 0, p, 0)
    z = model.encode(bundle, X)
    y = np.eye(bundle.cond_dim, dtype=np.float32)[cond_idx]
    if decode_fn is None:
        X_hat = model.decode(bundle, z, y)
    else:
        X_hat = decode_fn(X, z, y)
    return float(np.mean((X - X_hat) ** 2))


def benchmark_speed(bundle: ModelBundle, n_trials: int = 20):
    """Model forward time to synthesize 1 s of audio (64 SF frames or one MF
    pass), with Griffin-Lim timed separately. Returns (mean_ms, std_ms, gl_ms)."""
    if n_trials < 1:
        raise InvalidArgument("n_trials must be >= 1")
    rng = np.random.default_rng(0)
    z = rng.standard_normal((dsp.N_FRAMES if bundle.mode == MODE_SF else 1,
                             model.LATENT_DIM)).astype(np.float32)
    y = model.one_hot_pitch(0, bundle.cond_dim)
    model.decode(bundle, z, y)      # warm-up
    times = []
    for _ in range(n_trials):
        t0 = time.perf_counter()
        out = model.decode(bundle, z, y)
        times.append((time.perf_counter() - t0) * 1000.0)
    logmag = out.T if bundle.mode == MODE_SF else out[0]
    t0 = time.perf_counter()
    dsp.griffin_lim_invert(logmag, 30)
    gl_ms = (time.perf_counter() - t0) * 1000.0
    times = np.array(times)
    std = float(np.std(times)) if n_trials > 1 else 0.0
    return float(np.mean(times)), std, gl_ms


@dataclass
class ProbeConfig:
    steps: int = 1500
    batch_size: int = 64
    learning_rate: float = 1e-3
    seed: int = 0
    patience: int = 5           # early-stopping checks on validation loss
    check_every: int = 100


def _train_classifier(net, X, y, cfg: ProbeConfig):
    """SGD loop with early stopping on a held-out slice of the training data."""
    rng = np.random.default_rng(cfg.seed)
    n = len(X)
    order = rng.permutation(n)
    n_val = max(1, n // 10)
    val_idx, tr_idx = order[:n_val], order[n_val:]
    Xt, yt = torch.from_numpy(X), torch.from_numpy(y)
    opt = torch.optim.Adam(net.parameters(), lr=cfg.learning_rate)
    best_val, best_state, bad = np.inf, None, 0
    for step in range(cfg.steps):
        idx = rng.integers(0, len(tr_idx), size=cfg.batch_size)
        sel = tr_idx[idx]
        loss = F.cross_entropy(net(Xt[sel]), yt[sel])
        opt.zero_grad()
        loss.backward()
        opt.step()
        if (step + 1) % cfg.check_every == 0:
            with torch.no_grad():
                val = F.cross_entropy(net(Xt[val_idx]), yt[val_idx]).item()
            if val < best_val - 1e-4:
                best_val, bad = val, 0
                best_state = {k: v.clone() for k, v in net.state_dict().items()}
            else:
                bad += 1
                if bad >= cfg.patience:
                    break
    if best_state is not None:
        net.load_state_dict(best_state)
    return net


def _accuracy(net, X, y):
    with torch.no_grad():
        pred = net(torch.from_numpy(X)).argmax(dim=1).numpy()
    return 100.0 * float(np.mean(pred == y))


def probe_lpa(bundle: ModelBundle, samples, probe_config: ProbeConfig | None = None) -> float:
    """Accuracy of a fresh 4-layer probe predicting pitch from frozen latents.

    The default probe budget is deliberately generous so the probe reports
    what is recoverable from the latent, not what a weak probe happens to find.
    """
    cfg = probe_config or ProbeConfig(steps=4000, learning_rate=3e-3, patience=10)
    train = [s for s in samples if s.partition == "train" and s.pitch_idx is not None]
    test = [s for s in samples if s.partition == "test" and s.pitch_idx is not None]
    if not train or not test:
        raise InvalidArgument("need pitch-labeled samples in both partitions")
    torch.manual_seed(cfg.seed)
    probe = LatentClassifier(bundle.pitch_vocab.n_pitches)
    Xtr, _, ptr = _frame_samples(train, bundle.mode)
    Xte, _, pte = _frame_samples(test, bundle.mode)
    ztr = model.encode(bundle, Xtr).astype(np.float32)
    zte = model.encode(bundle, Xte).astype(np.float32)
    _train_classifier(probe, ztr, ptr.astype(np.int64), cfg)
    return _accuracy(probe, zte, pte)


class PitchScorer(nn.Module):
    """Independent pitch classifier over spectrogram features (same family as
    the encoder), used as the SPA judge."""

    def __init__(self, mode, n_pitches):
        super().__init__()
        self.mode = mode
        if mode == MODE_SF:
            self.backbone = model.SFEncoder()
        else:
            self.backbone = model.MFEncoder()
        self.head = nn.Linear(model.LATENT_DIM, n_pitches)
        self.test_accuracy = None

    def forward(self, x):
        return self.head(self.backbone(x))


def train_spa_classifier(samples, mode, n_pitches, probe_config: ProbeConfig | None = None):
    """Train the SPA judge on real spectrograms; records its held-out accuracy."""
    cfg = probe_config or ProbeConfig(steps=3000)
    train = [s for s in samples if s.partition == "train" and s.pitch_idx is not None]
    test = [s for s in samples if s.partition == "test" and s.pitch_idx is not None]
    if not train or not test:
        raise InvalidArgument("need pitch-labeled samples in both partitions")
    torch.manual_seed(cfg.seed)
    scorer = PitchScorer(mode, n_pitches)
    Xtr, _, ptr = _frame_samples(train, mode)
    Xte, _, pte = _frame_samples(test, mode)
    scorer.train()
    _train_classifier(scorer, Xtr, ptr.astype(np.int64), cfg)
    scorer.eval()
    scorer.test_accuracy = _accuracy(scorer, Xte, pte)
    return scorer


def eval_spa(bundle: ModelBundle, scorer: PitchScorer, samples, seed: int = 0) -> float:
    """Decode real latents under uniformly random pitch conditioning and score
    whether the judge recovers the sampled pitch, per decoded unit (frame in
    per-frame mode, whole spectrogram otherwise)."""
    if scorer.test_accuracy is None or scorer.test_accuracy < SPA_SANITY_FLOOR:
        raise RefuseToScore(
            f"pitch scorer accuracy {scorer.test_accuracy} below {SPA_SANITY_FLOOR}%")
    if scorer.mode != bundle.mode:
        raise InvalidArgument("scorer mode must match bundle mode")
    rng = np.random.default_rng(seed)
    hits = total = 0
    for s in samples:
        target = int(rng.integers(0, bundle.pitch_vocab.n_pitches))
        y = model.one_hot_pitch(target, bundle.cond_dim)
        if bundle.mode == MODE_SF:
            frames = s.spectrogram.T.astype(np.float32)        # (64, 1024)
            z = model.encode(bundle, frames)
            out = model.decode(bundle, z, y)
            with torch.no_grad():
                logits = scorer(torch.from_numpy(out.astype(np.float32)))
            pred = logits.argmax(dim=1).numpy()
            hits += int((pred == target).sum())
            total += len(pred)
        else:
            z = model.encode(bundle, s.spectrogram.astype(np.float32))
            out = model.decode(bundle, z, y)
            with torch.no_grad():
                logits = scorer(torch.from_numpy(out[None].astype(np.float32)))
            hits += int(logits[0].argmax()) == target
            total += 1
    return 100.0 * hits / total


# ---------------------------------------------------------------------------
# Latent export
# ---------------------------------------------------------------------------

_LATENT_MAGIC = b"TSLX"


def export_latents(bundle: ModelBundle, samples, path):
    """Write (z_t, timbre, pitch) rows for external embedding tools.

    SF bundles export the per-clip mean latent so rows align with samples.
    """
    zs = []
    for s in samples:
        if bundle.mode == MODE_SF:
            z = model.encode(bundle, s.spectrogram.T.astype(np.float32)).mean(axis=0)
        else:
            z = model.encode(bundle, s.spectrogram.astype(np.float32))
        zs.append(z)
    zs = np.stack(zs).astype("<f4")
    header = {
        "count": len(samples),
        "dim": model.LATENT_DIM,
        "records": [{"timbre_idx": s.timbre_idx, "pitch_idx": s.pitch_idx,
                     "instrument_id": s.instrument_id} for s in samples],
    }
    hdr = json.dumps(header).encode()
    with open(path, "wb") as f:
        f.write(_LATENT_MAGIC)
        f.write(struct.pack("<I", len(hdr)))
        f.write(hdr)
        f.write(zs.tobytes())


def read_latents(path):
    with open(path, "rb") as f:
        if f.read(4) != _LATENT_MAGIC:
            raise InvalidArgument(f"{path} is not a latent export")
        (hlen,) = struct.unpack("<I", f.read(4))
        header = json.loads(f.read(hlen))
        z = np.frombuffer(f.read(), dtype="<f4").reshape(header["count"], header["dim"])
    return z.astype(np.float64), header["records"]


def latent_cluster_distances(z: np.ndarray, labels) -> tuple[float, float]:
    """(mean within-class distance, mean between-class distance)."""
    labels = np.asarray(labels)
    d = np.linalg.norm(z[:, None, :] - z[None, :, :], axis=-1)
    same = labels[:, None] == labels[None, :]
    off = ~np.eye(len(z), dtype=bool)
    return float(d[same & off].mean()), float(d[~same].mean())
