import { describe, expect, it } from 'vitest';
import { ConsoleClient, StreamSocket, Transport } from '../src/client.js';
import { FrameRateDebouncer, MIN_INTERVAL_MS } from '../src/debounce.js';
import { SynthConsole } from '../src/console.js';
import { SAMPLES_PER_FRAME } from '../src/types.js';
import contract from '../shared/contract.json';

class FakeSocket implements StreamSocket {
  sent: string[] = [];
  closed = false;
  private binaryHandler: ((data: ArrayBuffer) => void) | null = null;

  send(text: string): void {
    this.sent.push(text);
  }
  close(): void {
    this.closed = true;
  }
  onBinary(handler: (data: ArrayBuffer) => void): void {
    this.binaryHandler = handler;
  }
  onClose(): void {}
  deliver(data: ArrayBuffer): void {
    this.binaryHandler?.(data);
  }
  messages(): unknown[] {
    return this.sent.map((s) => JSON.parse(s));
  }
}

class FakeTransport implements Transport {
  constructor(
    private readonly sounds: unknown = [],
    private readonly wav = new ArrayBuffer(8),
    private readonly latent = [0.1, 0.2],
  ) {}
  async getJson(): Promise<unknown> {
    return this.sounds;
  }
  async postRaw(): Promise<{ data: ArrayBuffer; headers: Record<string, string> }> {
    return { data: this.wav, headers: { 'x-latent': JSON.stringify(this.latent) } };
  }
}

function makeConsole(clockStart = 0) {
  const socket = new FakeSocket();
  const client = new ConsoleClient(new FakeTransport(), () => socket);
  let now = clockStart;
  const timers: Array<() => void> = [];
  const con = new SynthConsole(client, () => now, (fn) => timers.push(fn));
  return {
    con,
    socket,
    advance(ms: number) {
      now += ms;
      timers.splice(0).forEach((fn) => fn());
    },
  };
}

describe('SynthConsole', () => {
  it('init message carries refs, raw weights and pitch', () => {
    const { con, socket } = makeConsole();
    con.mixer.select({ id: 'flute', kind: 'instrument' });
    con.mixer.select({ id: 'rain', kind: 'environmental' }, 0.5);
    expect(con.start(36)).toBe(true);
    expect(socket.messages()[0]).toEqual({
      type: 'init',
      refs: ['flute', 'rain'],
      weights: { flute: 1.0, rain: 0.5 },
      pitch_idx: 36,
    });
  });

  it('every emitted message validates against the shared contract types', () => {
    const knownTypes = new Set(contract.control_messages.map((m) => m.type));
    const { con, socket, advance } = makeConsole();
    con.mixer.select({ id: 'flute', kind: 'instrument' });
    con.start();
    con.key(60, true);
    advance(MIN_INTERVAL_MS);
    con.moveSlider('flute', 0.4);
    con.key(60, false);
    con.stop();
    for (const msg of socket.messages()) {
      expect(knownTypes.has((msg as { type: string }).type)).toBe(true);
    }
  });

  it('keyboard press reaches the wire synchronously (no added latency)', () => {
    const { con, socket } = makeConsole();
    con.mixer.select({ id: 'flute', kind: 'instrument' });
    con.start();
    const before = socket.sent.length;
    con.key(60, true);
    expect(socket.messages().slice(before)).toEqual([
      { type: 'set-pitch', pitch_idx: 36 },
      { type: 'note-on', pitch_idx: 36 },
    ]);
  });

  it('a 1 s slider drag emits at most 64 messages (frame-rate debounce)', () => {
    const { con, socket, advance } = makeConsole(1000);
    con.mixer.select({ id: 'flute', kind: 'instrument' });
    con.start();
    const before = socket.sent.length;
    // 500 drag events over one second
    for (let i = 0; i < 500; i++) {
      con.moveSlider('flute', (i % 100) / 100);
      advance(2);
    }
    const emitted = socket.sent.length - before;
    expect(emitted).toBeLessThanOrEqual(64);
    expect(emitted).toBeGreaterThan(0);
  });

  it('the debounced stream always ends on the latest value', () => {
    const { con, socket, advance } = makeConsole(1000);
    con.mixer.select({ id: 'flute', kind: 'instrument' });
    con.start();
    con.moveSlider('flute', 0.9);
    con.moveSlider('flute', 0.1); // within the same frame period
    advance(MIN_INTERVAL_MS);
    const last = socket.messages().at(-1) as { weights: Record<string, number> };
    expect(last.weights.flute).toBe(0.1);
  });

  it('all sliders at zero emits the mute message', () => {
    const { con, socket } = makeConsole();
    con.mixer.select({ id: 'flute', kind: 'instrument' });
    con.start();
    con.moveSlider('flute', 0);
    expect(socket.messages().at(-1)).toEqual({ type: 'set-weights', weights: {} });
  });

  it('stop sends close and tears the socket down', () => {
    const { con, socket } = makeConsole();
    con.mixer.select({ id: 'flute', kind: 'instrument' });
    con.start();
    con.stop();
    expect(socket.messages().at(-1)).toEqual({ type: 'close' });
    expect(socket.closed).toBe(true);
    expect(con.client.streaming).toBe(false);
  });
});

describe('ConsoleClient', () => {
  it('falls back to offline when no stream is available', async () => {
    const client = new ConsoleClient(new FakeTransport(), () => null);
    expect(client.openStream(['flute'], { flute: 1 })).toBe(false);
    expect(client.status).toBe('offline');
    const { wav, latent } = await client.synthesizeNote(['flute'], [1.0], 60);
    expect(wav.byteLength).toBe(8);
    expect(latent).toEqual([0.1, 0.2]);
  });

  it('binary frames land in the playback queue', () => {
    const socket = new FakeSocket();
    const client = new ConsoleClient(new FakeTransport(), () => socket);
    client.openStream(['flute'], { flute: 1 });
    const buf = new ArrayBuffer(4 + 2 * SAMPLES_PER_FRAME);
    new DataView(buf).setUint32(0, 0, true);
    new DataView(buf).setInt16(4, 1234, true);
    socket.deliver(buf);
    expect(client.queue.pull()[0]).toBe(1234);
  });

  it('sendControl without a session throws', () => {
    const client = new ConsoleClient(new FakeTransport(), () => null);
    expect(() => client.sendControl({ type: 'note-off' })).toThrow();
  });
});
