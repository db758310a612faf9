// Pure view math. Everything here is a function of server-provided
// numbers; the server remains the single source of truth for anything a
// module on its side already defines.

import { PhraseRow, TopicFlow, UpdateDelta } from "./viewmodel.js";

export const MAX_FLOW_THICKNESS = 14;
export const MIN_FLOW_THICKNESS = 1;

/** Thickness and gray level are both proportional to sqrt(moved count). */
export function flowStyle(
  moved: number,
  maxMoved: number,
): { thickness: number; gray: number } {
  if (moved <= 0 || maxMoved <= 0) {
    return { thickness: 0, gray: 0 };
  }
  const ratio = Math.sqrt(moved) / Math.sqrt(maxMoved);
  return {
    thickness: Math.max(MIN_FLOW_THICKNESS, ratio * MAX_FLOW_THICKNESS),
    gray: ratio,
  };
}

export function barWidth(size: number, maxSize: number, fullWidth: number): number {
  if (maxSize <= 0) return 0;
  return (size / maxSize) * fullWidth;
}

/** Stacked-bar proportions for one source topic during its delta stage:
 * removed (red), moved elsewhere (magenta), newly added (dark green), and
 * remaining posts in the topic's own color. */
export function stackedSegments(
  flow: TopicFlow,
  added: number = 0,
): { removed: number; moved: number; added: number; retained: number } {
  const moved = Object.values(flow.moved_out).reduce((a, b) => a + b, 0);
  const total = flow.removed + flow.retained + moved + added;
  if (total === 0) return { removed: 0, moved: 0, added: 0, retained: 0 };
  return {
    removed: flow.removed / total,
    moved: moved / total,
    added: added / total,
    retained: flow.retained / total,
  };
}

/** Font size for a phrase scales with its importance score. */
export function phraseFontSize(score: number, maxScore: number): number {
  const base = 12;
  const extra = 10;
  if (maxScore <= 0) return base;
  return base + extra * Math.sqrt(score / maxScore);
}

/** Posts highlighted by the current phrase selection: the posts carrying
 * every selected phrase (intersection of the per-phrase post sets). */
export function highlightedPosts(phrases: PhraseRow[], selectedDisplays: string[]): string[] {
  if (selectedDisplays.length === 0) return [];
  const rows = selectedDisplays.map((d) => phrases.find((p) => p.display === d));
  if (rows.some((r) => r === undefined)) return [];
  let acc = new Set((rows[0] as PhraseRow).post_ids);
  for (const row of rows.slice(1)) {
    const ids = new Set((row as PhraseRow).post_ids);
    acc = new Set([...acc].filter((id) => ids.has(id)));
  }
  return [...acc].sort();
}

/** Total posts moving between matched topics, for scaling the flow curves. */
export function maxMovedCount(delta: UpdateDelta): number {
  let max = 0;
  for (const flow of Object.values(delta.flows)) {
    for (const count of Object.values(flow.moved_out)) {
      if (count > max) max = count;
    }
  }
  return max;
}

/** Temporal bin color ramp: dark gray (old) to blue (new). */
export function temporalBinColor(binIndex: number, binCount: number): string {
  const t = binCount <= 1 ? 1 : binIndex / (binCount - 1);
  const hue = 215;
  const sat = Math.round(10 + 70 * t);
  const light = Math.round(32 + 23 * t);
  return `hsl(${hue}, ${sat}%, ${light}%)`;
}

/** Coverage ramp: red (well covered) to blue (hardly covered), walking
 * from the top similarity bucket down. */
export function coverageBarColor(bucketFromHigh: number): string {
  const hues = [5, 15, 35, 215, 225];
  return `hsl(${hues[bucketFromHigh] ?? 225}, 75%, 52%)`;
}

/** Barcode shade: white (0) to black (1). */
export function barcodeShade(value: number): string {
  const light = Math.round(100 - 100 * Math.min(Math.max(value, 0), 1));
  return `hsl(0, 0%, ${light}%)`;
}
