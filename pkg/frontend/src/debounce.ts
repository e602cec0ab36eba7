/**
 * Frame-rate debouncer for control emission: at most one message per frame
 * period, with the latest value always delivered (trailing edge).
 */
import { FRAMES_PER_SECOND } from './types.js';

export const MIN_INTERVAL_MS = 1000 / FRAMES_PER_SECOND; // 16 ms

type Clock = () => number;
type Scheduler = (fn: () => void, delayMs: number) => void;

export class FrameRateDebouncer<T> {
  private lastEmit = -Infinity;
  private trailing: T | undefined;
  private timerArmed = false;

  constructor(
    private readonly emit: (value: T) => void,
    private readonly now: Clock = () => Date.now(),
    private readonly schedule: Scheduler = (fn, ms) => void setTimeout(fn, ms),
  ) {}

  push(value: T): void {
    const t = this.now();
    if (t - this.lastEmit >= MIN_INTERVAL_MS) {
      this.lastEmit = t;
      this.emit(value);
      return;
    }
    this.trailing = value;
    if (!this.timerArmed) {
      this.timerArmed = true;
      this.schedule(() => this.flush(), MIN_INTERVAL_MS - (t - this.lastEmit));
    }
  }

  /** Emit the pending trailing value once the frame period has elapsed. */
  flush(): void {
    if (this.trailing === undefined) {
      this.timerArmed = false;
      return;
    }
    const t = this.now();
    const remaining = MIN_INTERVAL_MS - (t - this.lastEmit);
    if (remaining > 0) {
      // timers can fire early; hold the line until the period really passed
      this.schedule(() => this.flush(), remaining);
      return;
    }
    this.timerArmed = false;
    this.lastEmit = t;
    this.emit(this.trailing);
    this.trailing = undefined;
  }
}
