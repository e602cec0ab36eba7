/**
 * Mixer state: which sounds are selected, raw slider values, and the
 * normalized weights shown next to the sliders.
 *
 * The client sends raw slider values; the server re-normalizes
 * authoritatively. Display normalization uses the identical rule (divide by
 * the sum) so what the user sees is what the server plays.
 */
import { ControlMessage, SoundInfo } from './types.js';

export const MAX_SELECTED = 4;

export class MixerError extends Error {}

export class MixerState {
  private sliders = new Map<string, number>();
  private kinds = new Map<string, SoundInfo['kind']>();

  get selectedIds(): string[] {
    return [...this.sliders.keys()];
  }

  kindOf(id: string): SoundInfo['kind'] | undefined {
    return this.kinds.get(id);
  }

  select(sound: SoundInfo, initialValue = 1.0): void {
    if (this.sliders.has(sound.id)) return;
    if (this.sliders.size >= MAX_SELECTED) {
      throw new MixerError(`at most ${MAX_SELECTED} sounds can be mixed`);
    }
    this.kinds.set(sound.id, sound.kind);
    this.setSlider(sound.id, initialValue);
  }

  deselect(id: string): void {
    this.sliders.delete(id);
    this.kinds.delete(id);
  }

  setSlider(id: string, value: number): void {
    if (!Number.isFinite(value) || value < 0 || value > 1) {
      throw new MixerError(`slider value must be in [0, 1], got ${value}`);
    }
    if (!this.kinds.has(id)) {
      throw new MixerError(`sound ${id} is not selected`);
    }
    this.sliders.set(id, value);
  }

  rawWeights(): Record<string, number> {
    return Object.fromEntries(this.sliders);
  }

  get muted(): boolean {
    let sum = 0;
    for (const v of this.sliders.values()) sum += v;
    return sum <= 0;
  }

  /**
   * Normalized weights for display; always sums to 1 when any slider is up.
   * Matches the server's rule exactly: w_i / sum(w).
   */
  normalizedWeights(): Record<string, number> {
    const out: Record<string, number> = {};
    if (this.muted) {
      for (const id of this.sliders.keys()) out[id] = 0;
      return out;
    }
    let sum = 0;
    for (const v of this.sliders.values()) sum += v;
    for (const [id, v] of this.sliders) out[id] = v / sum;
    return out;
  }

  /** Control message for the current mix: raw weights, or mute when all-zero. */
  toControlMessage(): ControlMessage {
    if (this.muted) return { type: 'set-weights', weights: {} };
    return { type: 'set-weights', weights: this.rawWeights() };
  }
}

/** Pure helper mirroring the server-side normalization for test fixtures. */
export function normalizeWeights(raw: number[]): number[] {
  const sum = raw.reduce((a, b) => a + b, 0);
  if (sum <= 0) throw new MixerError('weights must sum to a positive value');
  return raw.map((w) => w / sum);
}
