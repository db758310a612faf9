// View-model types mirroring the server's published state. The client
// performs no clustering; everything here arrives precomputed.

export interface TopicSummary {
  topic_id: number;
  label: string[];
  new_terms: string[];
  size: number;
  timeline: number[];
  color: number;
}

export interface TopicFlow {
  removed: number;
  retained: number;
  moved_out: { [targetTopicId: string]: number };
}

export interface UpdateDelta {
  flows: { [prevTopicId: string]: TopicFlow };
  added: { [topicId: string]: number };
  matched: { [prevTopicId: string]: number };
  vanished: number[];
  appeared: number[];
}

export interface PhraseRow {
  display: string;
  doc_freq: number;
  score: number;
  temporal: number[];
  barcode: number[];
  is_new: boolean;
  post_ids: string[];
}

export interface RepCard {
  post_id: string;
  text: string;
  subtopic_id: number;
  subtopic_terms: string[];
  topic_id: number;
  similar_count: number;
  is_new: boolean;
}

export interface SessionInfo {
  id: string;
  depth: number;
  filters: string[];
  update_count: number;
}

export interface ViewModel {
  session: SessionInfo;
  topics: TopicSummary[];
  delta: UpdateDelta | null;
  selection: number[];
  phrases: PhraseRow[];
  phrase_selection: string[];
  highlight_ids: string[];
  reps: { stream: RepCard[]; pending: RepCard[] };
  coverage: number[] | null;
  history_len: number;
}

export function emptyViewModel(): ViewModel {
  return {
    session: { id: "", depth: 0, filters: [], update_count: 0 },
    topics: [],
    delta: null,
    selection: [],
    phrases: [],
    phrase_selection: [],
    highlight_ids: [],
    reps: { stream: [], pending: [] },
    coverage: null,
    history_len: 0,
  };
}
