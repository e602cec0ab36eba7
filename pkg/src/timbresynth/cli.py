"""Command-line entry points: corpus preparation, training, evaluation,
rendering and the synthesis service."""
from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import corpus as corpus_mod
from . import dsp, evaluation, model, synthesis, training
from .errors import TimbreSynthError
from .midi import NoteEvent, parse_midi


def _load_corpus(path):
    samples, tv, pv = corpus_mod.read_feature_cache(path)
    return samples, tv, pv


@click.group()
def main():
    """Timbre-interpolating conditional-autoencoder synthesizer."""


@main.command("toy-corpus")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--timbres", default=4, show_default=True)
@click.option("--pitches", default=13, show_default=True)
@click.option("--takes", default=3, show_default=True)
@click.option("--base-midi", default=48, show_default=True)
@click.option("--env-classes", default=0, show_default=True,
              help="also generate unpitched environmental classes")
@click.option("--test-fraction", default=0.25, show_default=True)
@click.option("--seed", default=0, show_default=True)
def toy_corpus_cmd(out, timbres, pitches, takes, base_midi, env_classes, test_fraction, seed):
    """Generate the synthetic desk-scale corpus and write a feature cache."""
    samples, tv, pv = corpus_mod.generate_toy_corpus(timbres, pitches, takes,
                                                     seed=seed, base_midi=base_midi)
    if env_classes:
        tv = corpus_mod.TimbreVocabulary(tv.musical_classes,
                                         tuple(f"env{j:02d}" for j in range(env_classes)))
        samples += corpus_mod.generate_toy_environmental(env_classes, takes * pitches // 2,
                                                         tv, seed=seed + 1)
    corpus_mod.make_instrument_disjoint_splits(samples, test_fraction, seed)
    corpus_mod.write_feature_cache(out, samples, tv, pv)
    click.echo(f"wrote {len(samples)} samples to {out}")


@main.command()
@click.option("--manifest", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--test-fraction", default=0.2, show_default=True)
@click.option("--seed", default=0, show_default=True)
def prepare(manifest, out, test_fraction, seed):
    """Featurize a WAV manifest into a binary cache with disjoint splits."""
    try:
        samples, tv, pv = corpus_mod.load_manifest(manifest)
        corpus_mod.make_instrument_disjoint_splits(samples, test_fraction, seed)
        corpus_mod.write_feature_cache(out, samples, tv, pv)
    except TimbreSynthError as e:
        raise click.ClickException(str(e))
    click.echo(f"wrote {len(samples)} samples to {out}")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--ablation", type=click.Choice(["no-reg"]), default=None)
@click.option("--resume", type=click.Path(exists=True), default=None)
@click.option("--steps", type=int, default=None, help="override config steps")
def train(config_path, corpus_path, out_dir, ablation, resume, steps):
    """Train a model; config is a JSON TrainConfig document."""
    cfg_dict = json.loads(Path(config_path).read_text()) if config_path else {}
    if steps is not None:
        cfg_dict["steps"] = steps
    cfg = training.TrainConfig.from_dict(cfg_dict)
    if ablation == "no-reg":
        cfg.regularization_on = False
    try:
        samples, tv, pv = _load_corpus(corpus_path)
        ds = corpus_mod.Dataset(samples, tv, pv, mode=cfg.mode, seed=cfg.seed)
        _, ckpt = training.fit(ds, cfg, out_dir, resume_from=resume)
    except TimbreSynthError as e:
        raise click.ClickException(str(e))
    click.echo(f"final checkpoint: {ckpt}")


@main.command("eval")
@click.option("--checkpoint", required=True, type=click.Path(exists=True))
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--metrics", default="mse,speed", show_default=True)
@click.option("--export-latents", "latents_out", type=click.Path(dir_okay=False))
def eval_cmd(checkpoint, corpus_path, metrics, latents_out):
    """Evaluate a checkpoint; prints a metric report JSON on stdout."""
    wanted = {m.strip() for m in metrics.split(",") if m.strip()}
    try:
        bundle, _, meta = model.load_checkpoint(checkpoint)
        samples, tv, pv = _load_corpus(corpus_path)
        report = evaluation.MetricReport(config_fingerprint=bundle.architecture_hash())
        test = [s for s in samples if s.partition == "test"] or samples
        if "mse" in wanted:
            report.mse = evaluation.eval_reconstruction_mse(bundle, test)
        if "speed" in wanted:
            mean, std, gl = evaluation.benchmark_speed(bundle)
            report.speed_ms_mean, report.speed_ms_std, report.griffin_lim_ms = mean, std, gl
        if "lpa" in wanted:
            report.lpa_percent = evaluation.probe_lpa(bundle, samples)
        if "spa" in wanted:
            scorer = evaluation.train_spa_classifier(samples, bundle.mode,
                                                     pv.n_pitches)
            report.spa_percent = evaluation.eval_spa(bundle, scorer, test)
        if latents_out:
            evaluation.export_latents(bundle, samples, latents_out)
    except TimbreSynthError as e:
        raise click.ClickException(str(e))
    click.echo(report.to_json())


@main.command()
@click.option("--checkpoint", required=True, type=click.Path(exists=True))
@click.option("--input", "input_wav", required=True, type=click.Path(exists=True))
@click.option("--midi-file", type=click.Path(exists=True), default=None)
@click.option("--midi-note", type=int, default=None)
@click.option("--chromatic", is_flag=True)
@click.option("--note-duration", default=1.0, show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def render(checkpoint, input_wav, midi_file, midi_note, chromatic, note_duration, out):
    """Render audio from a reference WAV: a MIDI melody, one note, or the
    full chromatic scale."""
    try:
        bundle, _, _ = model.load_checkpoint(checkpoint)
        clip = dsp.normalize_and_crop(dsp.load_wav(input_wav))
        if midi_file:
            events = parse_midi(midi_file)
        elif chromatic:
            events = synthesis.chromatic_scale(bundle.pitch_vocab, note_duration)
        elif midi_note is not None:
            events = [NoteEvent(midi_note, 0.0, note_duration)]
        else:
            raise click.ClickException("need --midi-file, --midi-note or --chromatic")
        rendered = synthesis.render_note_sequence(bundle, clip, events)
        dsp.save_wav(out, rendered)
    except TimbreSynthError as e:
        raise click.ClickException(str(e))
    click.echo(f"wrote {out} ({len(rendered) / dsp.SAMPLE_RATE:.2f} s)")


@main.command()
@click.option("--checkpoint", required=True, type=click.Path(exists=True),
              envvar="TIMBRESYNTH_CHECKPOINT")
@click.option("--sounds", "sound_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
def serve(checkpoint, sound_dir, host, port):
    """Run the synthesis HTTP/websocket service."""
    import uvicorn

    from .service import load_app
    uvicorn.run(load_app(checkpoint, sound_dir), host=host, port=port)


if __name__ == "__main__":
    sys.exit(main())
