/** Shared domain and wire types for the synthesizer console. */

export interface SoundInfo {
  id: string;
  kind: 'instrument' | 'environmental';
}

/** Control messages sent over the streaming websocket. */
export type ControlMessage =
  | { type: 'init'; refs: string[]; weights: Record<string, number>; pitch_idx?: number }
  | { type: 'set-pitch'; pitch_idx: number }
  | { type: 'set-weights'; weights: Record<string, number> }
  | { type: 'note-on'; pitch_idx?: number }
  | { type: 'note-off' }
  | { type: 'close' };

export type StreamingStatus = 'idle' | 'streaming' | 'underrun' | 'offline';

/** Pitch vocabulary the server models are conditioned on. */
export const BASE_MIDI = 24;
export const N_PITCHES = 61;
export const SAMPLE_RATE = 16000;
export const SAMPLES_PER_FRAME = 256;
/** One decoded spectrogram column per frame chunk. */
export const FRAMES_PER_SECOND = SAMPLE_RATE / SAMPLES_PER_FRAME; // 62.5

export function midiToPitchIndex(midiNote: number): number | null {
  const idx = midiNote - BASE_MIDI;
  return idx >= 0 && idx < N_PITCHES ? idx : null;
}
