"""HTTP + websocket service exposing the synthesis engine.

Endpoints: GET /sounds, POST /encode, POST /synthesize, POST /render-midi and
the full-duplex /stream websocket. The CLI and the service call the same
synthesis operations; the service only adds schema validation, the sound
library and weight normalization.
"""
from __future__ import annotations

import asyncio
import base64
import io
import json
import struct
import tempfile
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from pydantic import BaseModel, Field

from . import dsp, model, synthesis
from .errors import TimbreSynthError, UnsupportedMode
from .midi import NoteEvent, parse_midi
from .streaming import StreamSynthesizer

MAX_CONTROLS_PER_FRAME = 16


class EncodeRequest(BaseModel):
    samples: list[float] | None = None
    sound_id: str | None = None


class EventIn(BaseModel):
    midi_note: int
    onset_s: float = Field(ge=0)
    duration_s: float = Field(gt=0)


class SynthesizeRequest(BaseModel):
    refs: list[str]
    weights: list[float]
    midi_note: int | None = None
    events: list[EventIn] | None = None
    duration_s: float = 1.0


class RenderMidiRequest(BaseModel):
    refs: list[str]
    weights: list[float]
    midi_base64: str


class SoundLibrary:
    """WAV directory scanned at startup; latents pre-encoded once."""

    def __init__(self, bundle):
        self.bundle = bundle
        self.sounds = {}        # id -> {"latent": z, "kind": str, "clip": AudioClip}

    def add_clip(self, sound_id, clip, kind="instrument"):
        clip = dsp.normalize_and_crop(clip)
        self.sounds[sound_id] = {
            "latent": synthesis.reference_latent(self.bundle, clip),
            "kind": kind,
            "clip": clip,
        }

    def scan_directory(self, root):
        root = Path(root)
        for path in sorted(root.rglob("*.wav")):
            kind = "environmental" if "environmental" in path.parent.parts else "instrument"
            self.add_clip(path.stem, dsp.load_wav(path), kind)

    def latent(self, sound_id):
        if sound_id not in self.sounds:
            raise KeyError(sound_id)
        return self.sounds[sound_id]["latent"]


def _normalize_weights(weights):
    total = float(sum(weights))
    if total <= 0:
        raise HTTPException(status_code=400, detail="weights must sum to a positive value")
    return [w / total for w in weights]


def _wav_bytes(clip) -> bytes:
    buf = io.BytesIO()
    dsp.save_wav(buf, clip)
    return buf.getvalue()


def create_app(bundle, sound_dir=None) -> FastAPI:
    app = FastAPI(title="timbresynth")
    library = SoundLibrary(bundle)
    if sound_dir is not None:
        library.scan_directory(sound_dir)
    app.state.bundle = bundle
    app.state.library = library
    app.state.pace = True       # real-time pacing for /stream; tests disable it

    @app.get("/sounds")
    def sounds():
        return [{"id": sid, "kind": s["kind"]} for sid, s in sorted(library.sounds.items())]

    @app.post("/encode")
    def encode(req: EncodeRequest):
        try:
            if req.sound_id is not None:
                z = library.latent(req.sound_id)
            elif req.samples:
                clip = dsp.normalize_and_crop(dsp.AudioClip(np.array(req.samples)))
                z = synthesis.reference_latent(bundle, clip)
            else:
                raise HTTPException(status_code=400, detail="need samples or sound_id")
            return {"latent": [float(v) for v in z]}
        except KeyError as e:
            raise HTTPException(status_code=404, detail=f"unknown sound id {e}")
        except TimbreSynthError as e:
            raise HTTPException(status_code=400, detail=str(e))

    def _blend(refs, weights):
        if len(refs) != len(weights):
            raise HTTPException(status_code=400, detail="refs/weights length mismatch")
        try:
            latents = [library.latent(r) for r in refs]
        except KeyError as e:
            raise HTTPException(status_code=404, detail=f"unknown sound id {e}")
        spec = synthesis.InterpolationSpec(latents, _normalize_weights(weights))
        return synthesis.interpolate_latents(spec)

    def _render_events(z, events):
        return synthesis.render_note_sequence(bundle, z, events)

    @app.post("/synthesize")
    def synthesize(req: SynthesizeRequest):
        z = _blend(req.refs, req.weights)
        try:
            if req.events:
                events = [NoteEvent(e.midi_note, e.onset_s, e.duration_s)
                          for e in req.events]
            elif req.midi_note is not None:
                events = [NoteEvent(req.midi_note, 0.0, req.duration_s)]
            else:
                raise HTTPException(status_code=400, detail="need midi_note or events")
            clip = _render_events(z, events)
        except TimbreSynthError as e:
            raise HTTPException(status_code=400, detail=str(e))
        from fastapi import Response
        return Response(content=_wav_bytes(clip), media_type="audio/wav",
                        headers={"X-Latent": json.dumps([float(v) for v in z])})

    @app.post("/render-midi")
    def render_midi(req: RenderMidiRequest):
        z = _blend(req.refs, req.weights)
        try:
            with tempfile.NamedTemporaryFile(suffix=".mid") as f:
                f.write(base64.b64decode(req.midi_base64))
                f.flush()
                events = parse_midi(f.name)
            clip = _render_events(z, events)
        except TimbreSynthError as e:
            raise HTTPException(status_code=400, detail=str(e))
        from fastapi import Response
        return Response(content=_wav_bytes(clip), media_type="audio/wav",
                        headers={"X-Latent": json.dumps([float(v) for v in z])})

    @app.websocket("/stream")
    async def stream(ws: WebSocket):
        await ws.accept()
        try:
            session = StreamSynthesizer(bundle)
        except UnsupportedMode as e:
            await ws.close(code=1003, reason=str(e))
            return
        running = False
        try:
            while True:
                handled = 0
                # drain pending control messages, bounded per frame
                while handled < MAX_CONTROLS_PER_FRAME:
                    try:
                        timeout = None if not running else 0.0005
                        raw = await asyncio.wait_for(ws.receive_text(), timeout=timeout)
                    except asyncio.TimeoutError:
                        break
                    msg = json.loads(raw)
                    handled += 1
                    if msg.get("type") == "close":
                        await ws.close()
                        return
                    if msg.get("type") == "init":
                        for name in msg.get("refs", []):
                            session.set_latent(name, library.latent(name))
                        if "weights" in msg:
                            session.set_weights(msg["weights"])
                        if "pitch_idx" in msg:
                            session.set_pitch(msg["pitch_idx"])
                        running = True
                    else:
                        session.apply_control(msg)
                chunk = session.next_frame()
                pcm = np.clip(chunk, -1.0, 1.0)
                payload = struct.pack("<I", session.frame_index - 1) + \
                    (pcm * 32767.0).astype("<i2").tobytes()
                await ws.send_bytes(payload)
                if app.state.pace:
                    await asyncio.sleep(dsp.HOP / dsp.SAMPLE_RATE * 0.5)
        except (WebSocketDisconnect, KeyError):
            return

    return app


def load_app(checkpoint_path, sound_dir=None) -> FastAPI:
    bundle, _, _ = model.load_checkpoint(checkpoint_path)
    return create_app(bundle, sound_dir)
