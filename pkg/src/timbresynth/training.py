"""Training: frequency-weighted reconstruction, timbre classification and the
adversarial pitch objective, with a two-phase update per batch.

Phase (a) trains the pitch classifier to find pitch in the latent; phase (b)
trains encoder/decoder/timbre-classifier while pushing pitch information out
of the latent (the encoder maximizes the pitch cross-entropy).
"""
from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F

from . import corpus as corpus_mod
from . import dsp, model
from .errors import InvalidArgument, LabelError
from .model import ModelBundle


@dataclass
class TrainConfig:
    mode: str = dsp.MODE_SF
    regime: str = "supervised"            # or "semisupervised"
    batch_size: int = 8
    learning_rate: float = 1e-4
    steps: int = 2000
    seed: int = 0
    regularization_on: bool = True
    checkpoint_interval: int = 500
    augment: bool = False
    # The pitch classifier may train on its own schedule so it can keep up
    # with the moving encoder; defaults match the shared learning rate.
    cp_learning_rate: float | None = None
    cp_updates_per_step: int = 1

    def __post_init__(self):
        if self.batch_size < 1:
            raise InvalidArgument("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise InvalidArgument("learning_rate must be > 0")
        if self.cp_learning_rate is None:
            self.cp_learning_rate = self.learning_rate
        if self.cp_learning_rate <= 0:
            raise InvalidArgument("cp_learning_rate must be > 0")
        if self.cp_updates_per_step < 1:
            raise InvalidArgument("cp_updates_per_step must be >= 1")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: v for k, v in d.items() if k in cls.__dataclass_fields__})


@dataclass
class LossReport:
    recon: float
    timbre_ce: float
    pitch_ce_adversarial: float
    total_main: float
    c_p_loss: float

    def to_dict(self):
        return asdict(self)


def _weights_tensor(n_bins=dsp.N_BINS):
    return torch.from_numpy(dsp.frequency_weights(n_bins)).float()


def _validate_labels(y_t, n_t, y_p, n_p, musical):
    y_t = np.asarray(y_t)
    y_p = np.asarray(y_p)
    if np.any((y_t < 0) | (y_t >= n_t)):
        raise LabelError(f"timbre label outside [0,{n_t})")
    if np.any(musical & ((y_p < 0) | (y_p >= n_p))):
        raise LabelError(f"pitch label outside [0,{n_p})")


def _loss_terms(X, X_hat, timbre_logits, pitch_logits, y_t, y_p, W, musical):
    """Torch loss terms. Reconstruction is the mean of W*(X - X_hat)^2 over
    every element; both CE terms are softmax cross-entropy, the pitch term
    averaged over the musical subset only."""
    diff2 = (X - X_hat) ** 2
    if diff2.dim() == 3:                  # (B, bins, frames)
        recon = (diff2 * W[None, :, None]).mean()
    else:
        recon = (diff2 * W[None, :]).mean()
    timbre_ce = F.cross_entropy(timbre_logits, y_t)
    if musical.any():
        pitch_ce = F.cross_entropy(pitch_logits[musical], y_p[musical])
    else:
        pitch_ce = torch.zeros((), dtype=recon.dtype)
    return recon, timbre_ce, pitch_ce


def compute_losses(X, X_hat, timbre_logits, pitch_logits, y_t, y_p, W=None,
                   musical=None, regularization_on=True) -> LossReport:
    """Numpy-facing loss evaluation; mirrors what a training step optimizes."""
    y_t = np.asarray(y_t, dtype=np.int64)
    y_p = np.asarray(y_p, dtype=np.int64)
    if musical is None:
        musical = y_p >= 0
    _validate_labels(y_t, timbre_logits.shape[-1], y_p, pitch_logits.shape[-1], musical)
    W_t = torch.from_numpy(np.asarray(W, dtype=np.float64)) if W is not None \
        else torch.from_numpy(dsp.frequency_weights())
    to_t = lambda a: torch.from_numpy(np.asarray(a, dtype=np.float64))
    recon, timbre_ce, pitch_ce = _loss_terms(
        to_t(X), to_t(X_hat), to_t(timbre_logits), to_t(pitch_logits),
        torch.from_numpy(y_t), torch.from_numpy(y_p), W_t,
        torch.from_numpy(np.asarray(musical, dtype=bool)))
    total = recon + timbre_ce - pitch_ce if regularization_on else recon
    return LossReport(recon.item(), timbre_ce.item(), pitch_ce.item(),
                      total.item(), pitch_ce.item())


class TrainerState:
    """Owns the two optimizers of the alternating scheme."""

    def __init__(self, bundle: ModelBundle, config: TrainConfig):
        self.config = config
        self.step = 0
        main_params = list(bundle.encoder.parameters()) + list(bundle.decoder.parameters())
        if config.regularization_on:
            main_params += list(bundle.timbre_classifier.parameters())
        self.main_opt = torch.optim.Adam(main_params, lr=config.learning_rate)
        self.cp_opt = torch.optim.Adam(bundle.pitch_classifier.parameters(),
                                       lr=config.cp_learning_rate)

    def to_arrays(self):
        arrays = {"step": np.array(self.step)}
        for name, opt in (("main", self.main_opt), ("cp", self.cp_opt)):
            for gi, group_states in enumerate(opt.state_dict()["state"].items()):
                pid, st = group_states
                arrays[f"{name}.{pid}.step"] = np.array(float(st["step"]))
                arrays[f"{name}.{pid}.exp_avg"] = st["exp_avg"].numpy().astype(np.float64)
                arrays[f"{name}.{pid}.exp_avg_sq"] = st["exp_avg_sq"].numpy().astype(np.float64)
        return arrays

    def load_arrays(self, arrays):
        self.step = int(arrays["step"])
        for name, opt in (("main", self.main_opt), ("cp", self.cp_opt)):
            sd = opt.state_dict()
            state = {}
            for pid, p in enumerate(pg for g in sd["param_groups"] for pg in g["params"]):
                key = f"{name}.{p}"
                if f"{key}.step" in arrays:
                    state[p] = {
                        "step": torch.tensor(float(arrays[f"{key}.step"])),
                        "exp_avg": torch.from_numpy(arrays[f"{key}.exp_avg"].copy()).float(),
                        "exp_avg_sq": torch.from_numpy(arrays[f"{key}.exp_avg_sq"].copy()).float(),
                    }
            sd["state"] = state
            opt.load_state_dict(sd)


def _batch_tensors(bundle: ModelBundle, batch):
    X = torch.from_numpy(batch["spec"]).float()
    y_t = torch.from_numpy(batch["timbre_idx"])
    y_p = torch.from_numpy(batch["pitch_idx"])
    musical = torch.from_numpy(batch["is_musical"])
    _validate_labels(batch["timbre_idx"], bundle.timbre_vocab.n_total,
                     batch["pitch_idx"], bundle.pitch_vocab.n_pitches,
                     batch["is_musical"])
    # environmental samples get the constant pitch-0 conditioning
    cond_idx = torch.where(musical, y_p, torch.zeros_like(y_p))
    cond = F.one_hot(cond_idx, bundle.cond_dim).float()
    return X, y_t, y_p, musical, cond


def train_step(bundle: ModelBundle, batch, config: TrainConfig,
               state: TrainerState, cp_batch_fn=None) -> LossReport:
    """One alternating update: (a) pitch classifier, (b) encoder/decoder/timbre.

    `cp_batch_fn`, when given, supplies a fresh batch for each phase-(a) inner
    update so the pitch classifier tracks the moving encoder instead of
    overfitting one batch.
    """
    bundle.train_mode()
    X, y_t, y_p, musical, cond = _batch_tensors(bundle, batch)
    W = _weights_tensor()

    cp_loss_val = 0.0
    if config.regularization_on and bool(musical.any()):
        for i in range(config.cp_updates_per_step):
            if cp_batch_fn is not None and i > 0:
                Xc, _, y_pc, musical_c, _ = _batch_tensors(bundle, cp_batch_fn())
            else:
                Xc, y_pc, musical_c = X, y_p, musical
            if not bool(musical_c.any()):
                continue
            with torch.no_grad():
                z_frozen = bundle.encoder(Xc)
            cp_logits = bundle.pitch_classifier(z_frozen[musical_c])
            cp_loss = F.cross_entropy(cp_logits, y_pc[musical_c])
            state.cp_opt.zero_grad()
            cp_loss.backward()
            state.cp_opt.step()
            cp_loss_val = cp_loss.item()

    z = bundle.encoder(X)
    X_hat = bundle.decoder(torch.cat([z, cond], dim=1))
    timbre_logits = bundle.timbre_classifier(z)
    pitch_logits = bundle.pitch_classifier(z)
    recon, timbre_ce, pitch_ce = _loss_terms(X, X_hat, timbre_logits, pitch_logits,
                                             y_t, y_p, W, musical)
    if config.regularization_on:
        total = recon + timbre_ce - pitch_ce
    else:
        total = recon
    state.main_opt.zero_grad()
    bundle.pitch_classifier.zero_grad(set_to_none=True)
    total.backward()
    state.main_opt.step()
    state.step += 1
    bundle.eval_mode()
    return LossReport(recon.item(), timbre_ce.item(), pitch_ce.item(),
                      total.item(), cp_loss_val)


def train_step_semisupervised(bundle, batch, config, state) -> LossReport:
    """Mixed musical/environmental batches; the adversarial term is masked to
    the musical subset inside `train_step`."""
    return train_step(bundle, batch, config, state)


def fit(dataset: corpus_mod.Dataset, config: TrainConfig, out_dir,
        resume_from=None, bundle: ModelBundle | None = None, log_every: int = 50):
    """Train to `config.steps`, writing periodic checkpoints and an ndjson
    metric log. Resumable from any checkpoint it wrote."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if resume_from is not None:
        bundle, extras, meta = model.load_checkpoint(resume_from)
        config = TrainConfig.from_dict(meta["config"])
        state = TrainerState(bundle, config)
        state.load_arrays(extras)
    else:
        if bundle is None:
            bundle = model.build_model(config.mode, dataset.timbre_vocab,
                                       dataset.pitch_vocab, seed=config.seed)
        state = TrainerState(bundle, config)

    log_path = out_dir / "metrics.ndjson"
    last_ckpt = None
    with open(log_path, "a") as log:
        while state.step < config.steps:
            step = state.step
            rng = dataset.rng_for_step(step)
            batch = corpus_mod.next_batch(dataset, config.batch_size,
                                          augment=config.augment, rng=rng)
            # same per-step generator → fresh-batch draws stay resumable
            cp_batch_fn = lambda: corpus_mod.next_batch(
                dataset, config.batch_size, augment=config.augment, rng=rng)
            report = train_step(bundle, batch, config, state, cp_batch_fn=cp_batch_fn)
            if step % log_every == 0 or state.step >= config.steps:
                rec = {"step": state.step, "time": time.time(), **report.to_dict()}
                log.write(json.dumps(rec) + "\n")
                log.flush()
            if state.step % config.checkpoint_interval == 0 or state.step >= config.steps:
                last_ckpt = out_dir / f"ckpt_{state.step:07d}.ts"
                model.save_checkpoint(bundle, last_ckpt, extra_arrays=state.to_arrays(),
                                      meta={"config": config.to_dict(),
                                            "step": state.step})
    if last_ckpt is None:
        last_ckpt = out_dir / f"ckpt_{state.step:07d}.ts"
        model.save_checkpoint(bundle, last_ckpt, extra_arrays=state.to_arrays(),
                              meta={"config": config.to_dict(), "step": state.step})
    return bundle, last_ckpt
