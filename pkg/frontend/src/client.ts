// Server connection: one WebSocket for the ordered event stream plus
// fetch for commands. A disconnect (or a stale-state command response)
// reconnects, which resyncs from a fresh snapshot.

import { Command, CommandResponse, isStale } from "./commands.js";
import { applyEvent, checkSequence, ClientEvent } from "./events.js";
import { ViewModel } from "./viewmodel.js";

export class ServiceClient {
  private vm: ViewModel | null = null;
  private ws: WebSocket | null = null;
  private lastSeq = 0;
  private listeners: Array<(vm: ViewModel, event: ClientEvent) => void> = [];

  constructor(private baseUrl: string = "") {}

  onUpdate(cb: (vm: ViewModel, event: ClientEvent) => void): void {
    this.listeners.push(cb);
  }

  viewModel(): ViewModel | null {
    return this.vm;
  }

  connect(): void {
    const wsUrl =
      this.baseUrl.replace(/^http/, "ws") +
      (this.baseUrl ? "" : `ws://${location.host}`) +
      "/ws";
    this.ws = new WebSocket(wsUrl);
    this.lastSeq = 0;
    this.ws.onmessage = (msg) => {
      const event = JSON.parse(msg.data as string) as ClientEvent;
      if (this.lastSeq > 0 && event.seq !== this.lastSeq + 1) {
        this.resync();
        return;
      }
      this.lastSeq = event.seq;
      this.vm = applyEvent(this.vm, event);
      for (const cb of this.listeners) cb(this.vm, event);
    };
    this.ws.onclose = () => {
      setTimeout(() => this.connect(), 1000);
    };
  }

  resync(): void {
    this.ws?.close();
  }

  async send(cmd: Command): Promise<CommandResponse> {
    const resp = await fetch(`${this.baseUrl}/command`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(cmd),
    });
    const body = (await resp.json()) as CommandResponse;
    if (isStale(body)) {
      this.resync();
    }
    return body;
  }
}

export { checkSequence };
