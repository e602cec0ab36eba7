import { describe, expect, it } from 'vitest';
import { MAX_SELECTED, MixerError, MixerState, normalizeWeights } from '../src/mixer.js';
import contract from '../shared/contract.json';

function mixerWith(values: number[]): MixerState {
  const m = new MixerState();
  values.forEach((v, i) => m.select({ id: `s${i}`, kind: 'instrument' }, v));
  return m;
}

describe('MixerState', () => {
  it('displays [1, 1] as [0.5, 0.5]', () => {
    const m = mixerWith([1.0, 1.0]);
    expect(Object.values(m.normalizedWeights())).toEqual([0.5, 0.5]);
  });

  it('normalized display always sums to 1 when any slider is up', () => {
    for (const values of [[0.2], [0.3, 0.9], [1, 0.5, 0.25, 0.125]]) {
      const m = mixerWith(values);
      const sum = Object.values(m.normalizedWeights()).reduce((a, b) => a + b, 0);
      expect(sum).toBeCloseTo(1.0, 12);
    }
  });

  it('all-zero sliders mean mute, never division by zero', () => {
    const m = mixerWith([0, 0]);
    expect(m.muted).toBe(true);
    expect(Object.values(m.normalizedWeights())).toEqual([0, 0]);
    expect(m.toControlMessage()).toEqual({ type: 'set-weights', weights: {} });
  });

  it('sends raw slider values, not the normalized display', () => {
    const m = mixerWith([0.8, 0.2]);
    expect(m.toControlMessage()).toEqual({
      type: 'set-weights',
      weights: { s0: 0.8, s1: 0.2 },
    });
  });

  it('caps the selection at four sounds', () => {
    const m = mixerWith([1, 1, 1, 1]);
    expect(() => m.select({ id: 'extra', kind: 'instrument' })).toThrow(MixerError);
    expect(m.selectedIds).toHaveLength(MAX_SELECTED);
  });

  it('rejects slider values outside [0, 1]', () => {
    const m = mixerWith([0.5]);
    expect(() => m.setSlider('s0', 1.5)).toThrow(MixerError);
    expect(() => m.setSlider('s0', -0.1)).toThrow(MixerError);
    expect(() => m.setSlider('ghost', 0.5)).toThrow(MixerError);
  });

  it('deselect removes the slider', () => {
    const m = mixerWith([1, 1]);
    m.deselect('s0');
    expect(m.selectedIds).toEqual(['s1']);
    expect(Object.values(m.normalizedWeights())).toEqual([1.0]);
  });

  it('tracks sound kind for the library badges', () => {
    const m = new MixerState();
    m.select({ id: 'rain', kind: 'environmental' });
    expect(m.kindOf('rain')).toBe('environmental');
  });
});

describe('normalization matches the shared server contract', () => {
  it('reproduces every fixture vector exactly', () => {
    for (const { raw, normalized } of contract.weight_normalization) {
      const got = normalizeWeights(raw);
      got.forEach((v, i) => expect(v).toBeCloseTo(normalized[i], 12));
    }
  });

  it('refuses non-positive totals like the server does', () => {
    expect(() => normalizeWeights([0, 0])).toThrow(MixerError);
  });
});
