import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";

import { stateHash, Json } from "../src/canonical.js";
import { applyEvent, checkSequence, ClientEvent, replayLog } from "../src/events.js";

function loadLog(name: string): ClientEvent[] {
  const text = readFileSync(new URL(`./fixtures/${name}.jsonl`, import.meta.url), "utf-8");
  return text
    .split("\n")
    .filter((l) => l.trim())
    .map((l) => JSON.parse(l) as ClientEvent);
}

function loadHash(name: string): string {
  return readFileSync(new URL(`./fixtures/${name}.hash`, import.meta.url), "utf-8").trim();
}

describe("event log replay", () => {
  it("reproduces the server state hash on the 3-update fixture", () => {
    const events = loadLog("events-3updates");
    expect(events[0].kind).toBe("snapshot");
    expect(events.filter((e) => e.kind === "delta")).toHaveLength(3);
    const vm = replayLog(events);
    expect(stateHash(vm as unknown as Json)).toBe(loadHash("events-3updates"));
  });

  it("reproduces the server state hash on the interactive fixture", () => {
    const events = loadLog("events-interactive");
    const vm = replayLog(events);
    expect(stateHash(vm as unknown as Json)).toBe(loadHash("events-interactive"));
  });

  it("folds delta fragments by replacement", () => {
    const snap: ClientEvent = {
      seq: 1,
      kind: "snapshot",
      payload: { topics: [], selection: [1], history_len: 0 } as never,
    };
    let vm = applyEvent(null, snap);
    vm = applyEvent(vm, { seq: 2, kind: "delta", payload: { history_len: 3 } as never });
    expect((vm as never as { history_len: number }).history_len).toBe(3);
    expect((vm as never as { selection: number[] }).selection).toEqual([1]);
  });

  it("rejects events before a snapshot", () => {
    expect(() => applyEvent(null, { seq: 1, kind: "delta", payload: {} })).toThrow();
  });

  it("checks gapless sequence numbers", () => {
    const events = loadLog("events-3updates").map((e, i) => ({ ...e, seq: i + 1 }));
    expect(checkSequence(events)).toBe(true);
    events[2].seq = 99;
    expect(checkSequence(events)).toBe(false);
  });
});
