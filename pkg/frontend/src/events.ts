// Client event fold: a snapshot replaces the whole view model; delta and
// session events carry replacement fragments keyed by top-level field.
// This mirrors the server's own fold, so replaying a recorded log
// reproduces the server's state hash exactly.

import { Json } from "./canonical.js";
import { ViewModel } from "./viewmodel.js";

export type EventKind = "snapshot" | "delta" | "session";

export interface ClientEvent {
  seq: number;
  kind: EventKind;
  payload: { [key: string]: Json };
}

export function applyEvent(vm: ViewModel | null, event: ClientEvent): ViewModel {
  if (event.kind === "snapshot") {
    return JSON.parse(JSON.stringify(event.payload)) as ViewModel;
  }
  if (vm === null) {
    throw new Error(`received ${event.kind} event before any snapshot`);
  }
  const out = { ...vm } as unknown as { [key: string]: Json };
  for (const key of Object.keys(event.payload)) {
    out[key] = event.payload[key];
  }
  return out as unknown as ViewModel;
}

export function replayLog(events: ClientEvent[]): ViewModel {
  let vm: ViewModel | null = null;
  for (const event of events) {
    vm = applyEvent(vm, event);
  }
  if (vm === null) {
    throw new Error("event log contained no snapshot");
  }
  return vm;
}

/** Sequence numbers must be gapless and strictly increasing per connection. */
export function checkSequence(events: ClientEvent[]): boolean {
  return events.every((e, i) => i === 0 || e.seq === events[i - 1].seq + 1);
}
