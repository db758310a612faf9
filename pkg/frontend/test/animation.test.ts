import { describe, expect, it } from "vitest";

import { buildSchedule, stageAt, STAGE_BASE_MS, STAGE_PER_ITEM_MS } from "../src/animation.js";
import { TopicSummary, UpdateDelta } from "../src/viewmodel.js";

function topic(id: number, newTerms: string[] = []): TopicSummary {
  return { topic_id: id, label: ["t"], new_terms: newTerms, size: 10, timeline: [], color: id };
}

const delta: UpdateDelta = {
  flows: {
    "1": { removed: 2, retained: 5, moved_out: { "2": 3, "3": 1 } },
    "2": { removed: 0, retained: 8, moved_out: {} },
    "3": { removed: 1, retained: 4, moved_out: { "1": 2 } },
  },
  added: { "1": 0, "2": 3, "3": 0 },
  matched: { "1": 1, "2": 2, "3": 3 },
  vanished: [],
  appeared: [],
};

describe("staged delta animation", () => {
  it("visits each source topic exactly once per update", () => {
    const schedule = buildSchedule(delta, [topic(1), topic(2), topic(3)]);
    const sources = schedule.map((s) => s.sourceTopicId);
    expect(sources).toHaveLength(Object.keys(delta.flows).length);
    expect(new Set(sources).size).toBe(sources.length);
    expect([...sources].sort()).toEqual([1, 2, 3]);
  });

  it("walks sources top to bottom by display order", () => {
    const schedule = buildSchedule(delta, [topic(3), topic(1), topic(2)]);
    expect(schedule.map((s) => s.sourceTopicId)).toEqual([3, 1, 2]);
  });

  it("vanished sources come last", () => {
    const withVanished: UpdateDelta = {
      ...delta,
      flows: { ...delta.flows, "9": { removed: 4, retained: 0, moved_out: {} } },
      matched: { "1": 1, "2": 2, "3": 3 },
      vanished: [9],
    };
    const schedule = buildSchedule(withVanished, [topic(1), topic(2), topic(3)]);
    expect(schedule[schedule.length - 1].sourceTopicId).toBe(9);
  });

  it("stage duration grows with targets and new terms", () => {
    const schedule = buildSchedule(delta, [topic(1, ["fresh"]), topic(2), topic(3)]);
    const s1 = schedule.find((s) => s.sourceTopicId === 1)!;
    const s2 = schedule.find((s) => s.sourceTopicId === 2)!;
    expect(s1.durationMs).toBe(STAGE_BASE_MS + STAGE_PER_ITEM_MS * (2 + 1));
    expect(s2.durationMs).toBe(STAGE_BASE_MS);
    expect(s1.targets).toEqual([2, 3]);
  });

  it("speed toggle scales durations", () => {
    const normal = buildSchedule(delta, [topic(1), topic(2), topic(3)], 1);
    const fast = buildSchedule(delta, [topic(1), topic(2), topic(3)], 2);
    expect(fast[0].durationMs).toBeCloseTo(normal[0].durationMs / 2);
  });

  it("stageAt walks the schedule and ends", () => {
    const schedule = buildSchedule(delta, [topic(1), topic(2), topic(3)]);
    expect(stageAt(schedule, 0)).toBe(0);
    expect(stageAt(schedule, schedule[0].durationMs + 1)).toBe(1);
    const total = schedule.reduce((a, s) => a + s.durationMs, 0);
    expect(stageAt(schedule, total + 1)).toBe(-1);
  });

  it("no delta, no schedule", () => {
    expect(buildSchedule(null, [topic(1)])).toEqual([]);
  });
});
