/**
 * Console side of the round-trip criterion: slider display matches server
 * normalization, and stream assembly is byte-preserving so streamed audio
 * under static controls equals the batch render the server produced.
 * (The server side of both halves is covered in the service's own suite,
 * against the same shared/contract.json fixture.)
 */
import { describe, expect, it } from 'vitest';
import { MixerState, normalizeWeights } from '../src/mixer.js';
import { PlaybackQueue } from '../src/playback.js';
import { SAMPLES_PER_FRAME } from '../src/types.js';

describe('console round trip', () => {
  it('sliders [1, 1] display as [0.5, 0.5] and match server normalization', () => {
    const m = new MixerState();
    m.select({ id: 'a', kind: 'instrument' }, 1.0);
    m.select({ id: 'b', kind: 'instrument' }, 1.0);
    const displayed = Object.values(m.normalizedWeights());
    expect(displayed).toEqual([0.5, 0.5]);
    // the server applies w_i / sum(w) to the raw values the client sends
    const raw = Object.values(m.rawWeights());
    expect(normalizeWeights(raw)).toEqual(displayed);
  });

  it('assembled stream bytes equal the batch reference byte-for-byte', () => {
    // deterministic pseudo-PCM standing in for a 1 s batch render
    const nFrames = 63; // ceil(62.5) frames of 256 samples
    const reference = new Int16Array(nFrames * SAMPLES_PER_FRAME);
    let state = 12345;
    for (let i = 0; i < reference.length; i++) {
      state = (state * 1103515245 + 12345) & 0x7fffffff;
      reference[i] = (state % 65536) - 32768;
    }
    // server chunks it into indexed frames; deliver slightly out of order
    const chunks: ArrayBuffer[] = [];
    for (let f = 0; f < nFrames; f++) {
      const buf = new ArrayBuffer(4 + 2 * SAMPLES_PER_FRAME);
      const view = new DataView(buf);
      view.setUint32(0, f, true);
      for (let i = 0; i < SAMPLES_PER_FRAME; i++) {
        view.setInt16(4 + 2 * i, reference[f * SAMPLES_PER_FRAME + i], true);
      }
      chunks.push(buf);
    }
    // swap neighbors to exercise the reorder window
    const order = [...chunks.keys()];
    for (let f = 0; f + 1 < nFrames; f += 4) {
      [order[f], order[f + 1]] = [order[f + 1], order[f]];
    }
    const q = new PlaybackQueue();
    for (const idx of order) q.push(chunks[idx]);
    const assembled = q.drain();
    expect(assembled.length).toBe(reference.length);
    expect(Buffer.from(assembled.buffer).equals(Buffer.from(reference.buffer))).toBe(true);
    expect(q.underruns).toBe(0);
  });
});
