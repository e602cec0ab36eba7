/**
 * PCM frame assembly: parses binary stream chunks (uint32 LE frame index +
 * int16 LE samples), reorders within a bounded window, and feeds an audio
 * sink gaplessly. Underruns insert silence and flip the status indicator.
 */
import { SAMPLES_PER_FRAME, StreamingStatus } from './types.js';

export const REORDER_WINDOW = 4;
export const HEADER_BYTES = 4;

export interface ParsedFrame {
  index: number;
  samples: Int16Array;
}

/** Decode one wire chunk; returns null (and warns) on malformed input. */
export function parseFrame(buf: ArrayBuffer): ParsedFrame | null {
  const bytes = buf.byteLength - HEADER_BYTES;
  if (bytes < 0 || bytes % 2 !== 0) {
    console.warn(`dropping malformed stream chunk (${buf.byteLength} bytes)`);
    return null;
  }
  const view = new DataView(buf);
  const index = view.getUint32(0, true);
  const samples = new Int16Array(bytes / 2);
  for (let i = 0; i < samples.length; i++) {
    samples[i] = view.getInt16(HEADER_BYTES + 2 * i, true);
  }
  if (samples.length !== SAMPLES_PER_FRAME) {
    console.warn(`dropping stream chunk with ${samples.length} samples`);
    return null;
  }
  return { index, samples };
}

export class PlaybackQueue {
  private pending = new Map<number, Int16Array>();
  private nextIndex = 0;
  private _status: StreamingStatus = 'idle';
  private _underruns = 0;

  get status(): StreamingStatus {
    return this._status;
  }

  get underruns(): number {
    return this._underruns;
  }

  /** Accept one wire chunk; malformed chunks are dropped with a warning. */
  push(buf: ArrayBuffer): void {
    const frame = parseFrame(buf);
    if (frame === null) return;
    if (frame.index < this.nextIndex) return; // stale duplicate
    this.pending.set(frame.index, frame.samples);
    if (this._status === 'idle') this._status = 'streaming';
  }

  /**
   * Pull the next frame for the audio sink. In-order frames play as they
   * arrived; a missing frame is waited out until the reorder window fills,
   * after which it is skipped. When nothing is buffered, one frame of
   * silence is emitted and the status flips to 'underrun'.
   */
  pull(): Int16Array {
    const ready = this.pending.get(this.nextIndex);
    if (ready !== undefined) {
      this.pending.delete(this.nextIndex);
      this.nextIndex += 1;
      this._status = 'streaming';
      return ready;
    }
    // is a later frame waiting within the reorder window?
    for (let ahead = 1; ahead <= REORDER_WINDOW; ahead++) {
      if (this.pending.has(this.nextIndex + ahead)) {
        // the gap may still fill in; emit silence without skipping yet,
        // unless the window is already saturated
        if (this.bufferedBeyondWindow()) {
          this.nextIndex += 1; // give up on the missing frame
          return this.pull();
        }
        this._status = 'underrun';
        this._underruns += 1;
        return new Int16Array(SAMPLES_PER_FRAME);
      }
    }
    this._status = this.pending.size === 0 && this._status !== 'idle'
      ? 'underrun'
      : this._status;
    if (this._status === 'underrun') this._underruns += 1;
    return new Int16Array(SAMPLES_PER_FRAME);
  }

  private bufferedBeyondWindow(): boolean {
    for (const idx of this.pending.keys()) {
      if (idx > this.nextIndex + REORDER_WINDOW) return true;
    }
    return false;
  }

  /** Drain every frame currently playable in order (test/offline helper). */
  drain(): Int16Array {
    const parts: Int16Array[] = [];
    while (this.pending.has(this.nextIndex)) {
      parts.push(this.pull());
    }
    const out = new Int16Array(parts.length * SAMPLES_PER_FRAME);
    parts.forEach((p, i) => out.set(p, i * SAMPLES_PER_FRAME));
    return out;
  }

  reset(): void {
    this.pending.clear();
    this.nextIndex = 0;
    this._status = 'idle';
    this._underruns = 0;
  }
}
