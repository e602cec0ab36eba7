import { describe, expect, it } from 'vitest';
import { Keyboard, noteLabel } from '../src/keyboard.js';
import { BASE_MIDI, N_PITCHES } from '../src/types.js';
import contract from '../shared/contract.json';

describe('pitch vocabulary', () => {
  it('matches the shared contract', () => {
    expect(BASE_MIDI).toBe(contract.pitch.base_midi);
    expect(N_PITCHES).toBe(contract.pitch.n_pitches);
  });
});

describe('Keyboard', () => {
  it('pressing C4 emits set-pitch index 36 then note-on', () => {
    const kb = new Keyboard();
    expect(kb.noteMessages(60, true)).toEqual([
      { type: 'set-pitch', pitch_idx: 36 },
      { type: 'note-on', pitch_idx: 36 },
    ]);
  });

  it('release emits note-off', () => {
    const kb = new Keyboard();
    kb.noteMessages(60, true);
    expect(kb.noteMessages(60, false)).toEqual([{ type: 'note-off' }]);
    expect(kb.heldNote).toBeNull();
  });

  it('disabled (out-of-vocabulary) keys emit nothing', () => {
    const kb = new Keyboard();
    expect(kb.noteMessages(BASE_MIDI - 1, true)).toEqual([]);
    expect(kb.noteMessages(BASE_MIDI + N_PITCHES, true)).toEqual([]);
  });

  it('releasing a superseded key does not cut the held note (legato)', () => {
    const kb = new Keyboard();
    kb.noteMessages(60, true);
    kb.noteMessages(62, true);
    expect(kb.noteMessages(60, false)).toEqual([]);
    expect(kb.heldNote).toBe(62);
  });

  it('keys outside the vocabulary render disabled', () => {
    const kb = new Keyboard(24, BASE_MIDI - 4);
    const keys = kb.keys();
    expect(keys).toHaveLength(24);
    for (const k of keys) {
      expect(k.disabled).toBe(k.midiNote < BASE_MIDI || k.midiNote >= BASE_MIDI + N_PITCHES);
      if (!k.disabled) expect(k.pitchIndex).toBe(k.midiNote - BASE_MIDI);
    }
    expect(keys[0].disabled).toBe(true);
    expect(keys[4].disabled).toBe(false);
  });

  it('transpose shifts the window and clamps to the vocabulary overlap', () => {
    const kb = new Keyboard(12, 36);
    kb.transpose(12);
    expect(kb.windowStart).toBe(48);
    kb.transpose(1000);
    expect(kb.windowStart).toBe(BASE_MIDI + N_PITCHES - 1);
    kb.transpose(-10000);
    expect(kb.windowStart).toBe(BASE_MIDI - 12 + 1);
  });

  it('labels follow scientific pitch notation', () => {
    expect(noteLabel(60)).toBe('C4');
    expect(noteLabel(69)).toBe('A4');
    expect(noteLabel(24)).toBe('C1');
  });
});
