/**
 * Service client: sound library listing, the streaming session, and the
 * offline fallback that posts /synthesize and plays the returned WAV.
 *
 * All transports are injectable so the console logic is testable headless.
 */
import { ControlMessage, SoundInfo, StreamingStatus } from './types.js';
import { PlaybackQueue } from './playback.js';

export interface Transport {
  /** GET a JSON document. */
  getJson(path: string): Promise<unknown>;
  /** POST a JSON body; resolves with the raw response body and headers. */
  postRaw(path: string, body: unknown): Promise<{ data: ArrayBuffer; headers: Record<string, string> }>;
}

export interface StreamSocket {
  send(text: string): void;
  close(): void;
  onBinary(handler: (data: ArrayBuffer) => void): void;
  onClose(handler: () => void): void;
}

export type SocketFactory = (path: string) => StreamSocket | null;

export class ConsoleClient {
  readonly queue = new PlaybackQueue();
  private socket: StreamSocket | null = null;
  private _status: StreamingStatus = 'idle';

  constructor(
    private readonly transport: Transport,
    private readonly socketFactory: SocketFactory,
  ) {}

  get status(): StreamingStatus {
    return this._status === 'streaming' ? this.queue.status : this._status;
  }

  get streaming(): boolean {
    return this.socket !== null;
  }

  async listSounds(): Promise<SoundInfo[]> {
    return (await this.transport.getJson('/sounds')) as SoundInfo[];
  }

  /**
   * Open the streaming session. Falls back to offline (batch /synthesize)
   * when the deployment has no websocket endpoint.
   */
  openStream(refs: string[], weights: Record<string, number>, pitchIdx?: number): boolean {
    const socket = this.socketFactory('/stream');
    if (socket === null) {
      this._status = 'offline';
      return false;
    }
    this.socket = socket;
    this.queue.reset();
    socket.onBinary((data) => this.queue.push(data));
    socket.onClose(() => {
      this.socket = null;
      this._status = 'idle';
    });
    const init: ControlMessage = { type: 'init', refs, weights };
    if (pitchIdx !== undefined) init.pitch_idx = pitchIdx;
    socket.send(JSON.stringify(init));
    this._status = 'streaming';
    return true;
  }

  sendControl(msg: ControlMessage): void {
    if (this.socket === null) {
      throw new Error('no open streaming session');
    }
    this.socket.send(JSON.stringify(msg));
  }

  closeStream(): void {
    if (this.socket !== null) {
      this.socket.send(JSON.stringify({ type: 'close' }));
      this.socket.close();
      this.socket = null;
      this._status = 'idle';
    }
  }

  /**
   * Offline fallback: render one note server-side and return the WAV bytes
   * plus the latent the server actually used (from the X-Latent header).
   */
  async synthesizeNote(
    refs: string[],
    weights: number[],
    midiNote: number,
    durationS = 1.0,
  ): Promise<{ wav: ArrayBuffer; latent: number[] }> {
    const { data, headers } = await this.transport.postRaw('/synthesize', {
      refs,
      weights,
      midi_note: midiNote,
      duration_s: durationS,
    });
    const latent = JSON.parse(headers['x-latent'] ?? '[]') as number[];
    return { wav: data, latent };
  }
}
