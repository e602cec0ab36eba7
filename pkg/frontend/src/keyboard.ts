/**
 * Keyboard widget model: a window of piano keys over the 61-pitch vocabulary.
 * Keys outside the vocabulary render disabled and never emit messages; a
 * pitch-offset control transposes the visible window.
 */
import { BASE_MIDI, ControlMessage, midiToPitchIndex, N_PITCHES } from './types.js';

export interface KeyView {
  midiNote: number;
  /** null when the key lies outside the model's pitch vocabulary */
  pitchIndex: number | null;
  disabled: boolean;
  label: string;
}

const NOTE_NAMES = ['C', 'C#', 'D', 'D#', 'E', 'F', 'F#', 'G', 'G#', 'A', 'A#', 'B'];

export function noteLabel(midiNote: number): string {
  const octave = Math.floor(midiNote / 12) - 1;
  return `${NOTE_NAMES[midiNote % 12]}${octave}`;
}

export class Keyboard {
  private offset: number;
  private held: number | null = null;

  constructor(
    public readonly visibleKeys = 24,
    initialOffset = 36, // window starts at C3 by default
  ) {
    this.offset = initialOffset;
  }

  get windowStart(): number {
    return this.offset;
  }

  /** Transpose the visible window, clamped so it always overlaps the vocabulary. */
  transpose(semitones: number): void {
    const lo = BASE_MIDI - this.visibleKeys + 1;
    const hi = BASE_MIDI + N_PITCHES - 1;
    this.offset = Math.min(hi, Math.max(lo, this.offset + semitones));
  }

  keys(): KeyView[] {
    const out: KeyView[] = [];
    for (let i = 0; i < this.visibleKeys; i++) {
      const midiNote = this.offset + i;
      const pitchIndex = midiToPitchIndex(midiNote);
      out.push({
        midiNote,
        pitchIndex,
        disabled: pitchIndex === null,
        label: noteLabel(midiNote),
      });
    }
    return out;
  }

  /**
   * Key press/release to control messages. A press emits set-pitch followed
   * by note-on; a release emits note-off; a disabled key emits nothing.
   */
  noteMessages(midiNote: number, on: boolean): ControlMessage[] {
    const pitchIndex = midiToPitchIndex(midiNote);
    if (pitchIndex === null) return [];
    if (on) {
      this.held = midiNote;
      return [
        { type: 'set-pitch', pitch_idx: pitchIndex },
        { type: 'note-on', pitch_idx: pitchIndex },
      ];
    }
    // a release of a key that is no longer the held one is a no-op (legato)
    if (this.held !== null && this.held !== midiNote) return [];
    this.held = null;
    return [{ type: 'note-off' }];
  }

  get heldNote(): number | null {
    return this.held;
  }
}
