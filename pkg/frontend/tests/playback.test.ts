import { describe, expect, it, vi } from 'vitest';
import { PlaybackQueue, parseFrame, REORDER_WINDOW } from '../src/playback.js';
import { SAMPLES_PER_FRAME } from '../src/types.js';
import contract from '../shared/contract.json';

function chunk(index: number, fill = index): ArrayBuffer {
  const buf = new ArrayBuffer(4 + 2 * SAMPLES_PER_FRAME);
  const view = new DataView(buf);
  view.setUint32(0, index, true);
  for (let i = 0; i < SAMPLES_PER_FRAME; i++) {
    view.setInt16(4 + 2 * i, fill, true);
  }
  return buf;
}

describe('wire format', () => {
  it('matches the shared contract', () => {
    expect(contract.frame.header_bytes).toBe(4);
    expect(contract.frame.samples_per_frame).toBe(SAMPLES_PER_FRAME);
  });

  it('parses index and samples little-endian', () => {
    const frame = parseFrame(chunk(7, -123));
    expect(frame).not.toBeNull();
    expect(frame!.index).toBe(7);
    expect(frame!.samples[0]).toBe(-123);
    expect(frame!.samples).toHaveLength(SAMPLES_PER_FRAME);
  });

  it('drops malformed chunks with a console warning', () => {
    const warn = vi.spyOn(console, 'warn').mockImplementation(() => {});
    expect(parseFrame(new ArrayBuffer(3))).toBeNull();
    expect(parseFrame(new ArrayBuffer(4 + 11))).toBeNull();
    expect(parseFrame(new ArrayBuffer(4 + 2 * 100))).toBeNull();
    expect(warn).toHaveBeenCalledTimes(3);
    warn.mockRestore();
  });
});

describe('PlaybackQueue', () => {
  it('plays in-order frames gaplessly', () => {
    const q = new PlaybackQueue();
    for (let i = 0; i < 64; i++) q.push(chunk(i));
    const out = q.drain();
    expect(out).toHaveLength(64 * SAMPLES_PER_FRAME);
    for (let i = 0; i < 64; i++) {
      expect(out[i * SAMPLES_PER_FRAME]).toBe(i);
    }
    expect(q.status).toBe('streaming');
  });

  it('reorders [1, 0, 2] into [0, 1, 2]', () => {
    const q = new PlaybackQueue();
    q.push(chunk(1));
    q.push(chunk(0));
    q.push(chunk(2));
    expect(q.pull()[0]).toBe(0);
    expect(q.pull()[0]).toBe(1);
    expect(q.pull()[0]).toBe(2);
    expect(q.underruns).toBe(0);
  });

  it('waits for a gap inside the reorder window, emitting silence', () => {
    const q = new PlaybackQueue();
    q.push(chunk(1)); // frame 0 missing
    const silent = q.pull();
    expect(silent.every((v) => v === 0)).toBe(true);
    expect(q.status).toBe('underrun');
    q.push(chunk(0)); // the gap fills in
    expect(q.pull()[0]).toBe(0);
    expect(q.pull()[0]).toBe(1);
    expect(q.status).toBe('streaming');
  });

  it('skips a frame lost beyond the reorder window', () => {
    const q = new PlaybackQueue();
    // frame 0 never arrives; frames 1..6 do (6 > window of 4)
    for (let i = 1; i <= REORDER_WINDOW + 2; i++) q.push(chunk(i));
    expect(q.pull()[0]).toBe(1);
  });

  it('an empty buffer underruns with silence and a status indicator', () => {
    const q = new PlaybackQueue();
    q.push(chunk(0));
    q.pull();
    const silent = q.pull(); // stall: nothing buffered
    expect(silent.every((v) => v === 0)).toBe(true);
    expect(q.status).toBe('underrun');
    expect(q.underruns).toBe(1);
    q.push(chunk(1)); // stream resumes
    expect(q.pull()[0]).toBe(1);
    expect(q.status).toBe('streaming');
  });

  it('ignores stale duplicates', () => {
    const q = new PlaybackQueue();
    q.push(chunk(0));
    q.pull();
    q.push(chunk(0, 99));
    const silent = q.pull();
    expect(silent.every((v) => v === 0)).toBe(true);
  });
});
