// User actions map 1:1 onto service commands; a stale-state error means
// the server moved on and the client resyncs from the next snapshot.

export type Command =
  | { type: "select_topics"; ids: number[] }
  | { type: "select_phrases"; phrases: string[] }
  | { type: "dive_in" }
  | { type: "go_back" }
  | { type: "search"; query: string }
  | { type: "set_history"; index: number }
  | { type: "get_similar"; subtopic_id: number }
  | { type: "insert_new_reps" };

export interface CommandResponse {
  ok: boolean;
  data?: unknown;
  error?: string;
  detail?: string;
}

export function toggleTopic(selection: number[], topicId: number): Command {
  const set = new Set(selection);
  if (set.has(topicId)) set.delete(topicId);
  else set.add(topicId);
  return { type: "select_topics", ids: [...set].sort((a, b) => a - b) };
}

export function togglePhrase(selected: string[], display: string): Command {
  const next = selected.includes(display)
    ? selected.filter((p) => p !== display)
    : [...selected, display];
  return { type: "select_phrases", phrases: next };
}

export function isStale(resp: CommandResponse): boolean {
  return !resp.ok && resp.error === "stale-state";
}
