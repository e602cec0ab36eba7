/**
 * Console controller: wires the mixer, keyboard and client together.
 * The UI layer binds DOM events to these methods; everything here is
 * framework-free and covered by the headless test suite.
 */
import { ConsoleClient } from './client.js';
import { FrameRateDebouncer } from './debounce.js';
import { Keyboard } from './keyboard.js';
import { MixerState } from './mixer.js';
import { ControlMessage, SoundInfo } from './types.js';

export class SynthConsole {
  readonly mixer = new MixerState();
  readonly keyboard = new Keyboard();
  private readonly mixDebouncer: FrameRateDebouncer<ControlMessage>;

  constructor(
    readonly client: ConsoleClient,
    now?: () => number,
    schedule?: (fn: () => void, delayMs: number) => void,
  ) {
    this.mixDebouncer = new FrameRateDebouncer(
      (msg) => this.client.sendControl(msg),
      now,
      schedule,
    );
  }

  async loadLibrary(): Promise<SoundInfo[]> {
    return this.client.listSounds();
  }

  selectSound(sound: SoundInfo): void {
    this.mixer.select(sound);
    if (this.client.streaming) this.emitMix();
  }

  /** Slider drag handler; emission is debounced to the stream frame rate. */
  moveSlider(id: string, value: number): void {
    this.mixer.setSlider(id, value);
    if (this.client.streaming) this.emitMix();
  }

  private emitMix(): void {
    this.mixDebouncer.push(this.mixer.toControlMessage());
  }

  /** Keyboard press/release; disabled keys emit nothing. */
  key(midiNote: number, on: boolean): void {
    if (!this.client.streaming) return;
    for (const msg of this.keyboard.noteMessages(midiNote, on)) {
      this.client.sendControl(msg);
    }
  }

  start(pitchIdx?: number): boolean {
    return this.client.openStream(
      this.mixer.selectedIds,
      this.mixer.rawWeights(),
      pitchIdx,
    );
  }

  stop(): void {
    this.client.closeStream();
  }
}
