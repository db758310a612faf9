// Staged delta animation: the update is revealed one source topic at a
// time, top to bottom, with a dark marker on the current source. Stage
// duration grows with the number of affected targets and newly appearing
// terms, scaled by the user's speed toggle.

import { TopicSummary, UpdateDelta } from "./viewmodel.js";

export const STAGE_BASE_MS = 1500;
export const STAGE_PER_ITEM_MS = 300;

export interface AnimationStage {
  sourceTopicId: number;
  targets: number[]; // topic ids receiving moved posts
  newTerms: number;
  durationMs: number;
}

/**
 * One stage per source topic (every previous-run topic in the delta),
 * ordered by the display position of its matched current topic; vanished
 * sources follow, by id. Zero-change sources get a minimal stage so the
 * marker still walks the full list.
 */
export function buildSchedule(
  delta: UpdateDelta | null,
  topics: TopicSummary[],
  speed: number = 1,
): AnimationStage[] {
  if (!delta || speed <= 0) return [];
  const displayPos = new Map(topics.map((t, i) => [t.topic_id, i]));
  const sources = Object.keys(delta.flows).map(Number);
  sources.sort((a, b) => {
    const pa = displayPos.get(delta.matched[String(a)] ?? -1);
    const pb = displayPos.get(delta.matched[String(b)] ?? -1);
    if (pa !== undefined && pb !== undefined) return pa - pb;
    if (pa !== undefined) return -1;
    if (pb !== undefined) return 1;
    return a - b;
  });
  const newTermCount = new Map(
    topics.map((t) => [t.topic_id, t.new_terms.length]),
  );
  return sources.map((src) => {
    const flow = delta.flows[String(src)];
    const targets = Object.keys(flow.moved_out).map(Number).sort((a, b) => a - b);
    const matchedTo = delta.matched[String(src)];
    const newTerms = matchedTo !== undefined ? newTermCount.get(matchedTo) ?? 0 : 0;
    return {
      sourceTopicId: src,
      targets,
      newTerms,
      durationMs: (STAGE_BASE_MS + STAGE_PER_ITEM_MS * (targets.length + newTerms)) / speed,
    };
  });
}

/** Which stage is active at `elapsedMs` into the animation, or -1 when done. */
export function stageAt(schedule: AnimationStage[], elapsedMs: number): number {
  let t = 0;
  for (let i = 0; i < schedule.length; i++) {
    t += schedule[i].durationMs;
    if (elapsedMs < t) return i;
  }
  return -1;
}
