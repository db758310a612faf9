// HTML renderers for the three linked views. Pure functions of the view
// model plus local UI state, returning markup strings; the bootstrap
// swaps them into the page and wires clicks through data attributes.

import { buildSchedule, AnimationStage } from "./animation.js";
import { SPECIAL_COLORS, topicColor } from "./colors.js";
import {
  barWidth,
  barcodeShade,
  coverageBarColor,
  flowStyle,
  highlightedPosts,
  maxMovedCount,
  phraseFontSize,
  stackedSegments,
  temporalBinColor,
} from "./layout.js";
import { PhraseRow, RepCard, TopicSummary, ViewModel } from "./viewmodel.js";

const BAR_FULL_WIDTH = 240;

function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function sparkline(timeline: number[], width = 80, height = 18): string {
  if (timeline.length === 0) return "";
  const max = Math.max(...timeline, 1);
  const step = width / Math.max(timeline.length - 1, 1);
  const points = timeline
    .map((v, i) => `${(i * step).toFixed(1)},${(height - (v / max) * height).toFixed(1)}`)
    .join(" ");
  return (
    `<svg class="sparkline" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}">` +
    `<polyline fill="none" stroke="rgba(0,0,0,0.55)" stroke-width="1.2" points="${points}"/></svg>`
  );
}

function labelHtml(topic: TopicSummary): string {
  const fresh = new Set(topic.new_terms);
  return topic.label
    .map((term) => {
      const style = fresh.has(term) ? ` style="color:${SPECIAL_COLORS.added};font-weight:600"` : "";
      return `<span class="term"${style}>${esc(term)}</span>`;
    })
    .join(" ");
}

export interface OverviewState {
  stageIndex: number; // -1: no animation running
  selection: Set<number>;
}

export function renderTopicalOverview(vm: ViewModel, state: OverviewState): string {
  const schedule = buildSchedule(vm.delta, vm.topics);
  const stage: AnimationStage | undefined =
    state.stageIndex >= 0 ? schedule[state.stageIndex] : undefined;
  const maxSize = Math.max(...vm.topics.map((t) => t.size), 1);
  const maxMoved = vm.delta ? maxMovedCount(vm.delta) : 0;
  const rows = vm.topics.map((topic) => {
    const selected = state.selection.has(topic.topic_id);
    const color = topicColor(topic.color);
    const width = barWidth(topic.size, maxSize, BAR_FULL_WIDTH).toFixed(1);
    const isSource = stage !== undefined && vm.delta?.matched[String(stage.sourceTopicId)] === topic.topic_id;
    const movedIn =
      stage !== undefined && !isSource
        ? vm.delta?.flows[String(stage.sourceTopicId)]?.moved_out[String(topic.topic_id)] ?? 0
        : 0;
    const marker = isSource
      ? `<span class="source-marker" style="background:${SPECIAL_COLORS.marker}"></span>`
      : `<span class="source-marker source-marker-idle"></span>`;
    let bar: string;
    if (isSource && stage && vm.delta) {
      const added = vm.delta.added[String(topic.topic_id)] ?? 0;
      const seg = stackedSegments(vm.delta.flows[String(stage.sourceTopicId)], added);
      const w = (f: number) => (f * parseFloat(width)).toFixed(1);
      bar =
        `<span class="bar-seg" style="width:${w(seg.removed)}px;background:${SPECIAL_COLORS.removed}"></span>` +
        `<span class="bar-seg" style="width:${w(seg.moved)}px;background:${SPECIAL_COLORS.moved}"></span>` +
        `<span class="bar-seg" style="width:${w(seg.added)}px;background:${SPECIAL_COLORS.added}"></span>` +
        `<span class="bar-seg" style="width:${w(seg.retained)}px;background:${color}"></span>`;
    } else {
      bar = `<span class="bar-seg" style="width:${width}px;background:${color}"></span>`;
      if (movedIn > 0 && stage) {
        // posts arriving from the current source: its color, dark green top
        const sourceTopic = vm.topics.find(
          (t) => t.topic_id === vm.delta?.matched[String(stage.sourceTopicId)],
        );
        const srcColor = topicColor(sourceTopic ? sourceTopic.color : stage.sourceTopicId);
        const inWidth = barWidth(movedIn, maxSize, BAR_FULL_WIDTH).toFixed(1);
        bar += `<span class="bar-seg moved-in" style="width:${inWidth}px;background:${srcColor};border-top:2px solid ${SPECIAL_COLORS.added}"></span>`;
      }
    }
    const curves =
      isSource && stage
        ? stage.targets
            .map((target) => {
              const moved = vm.delta!.flows[String(stage.sourceTopicId)].moved_out[String(target)];
              const style = flowStyle(moved, maxMoved);
              const grayLevel = Math.round(80 - 60 * style.gray);
              return (
                `<div class="flow-curve" data-target="${target}" ` +
                `style="height:${style.thickness.toFixed(1)}px;background:hsl(0, 0%, ${grayLevel}%)">` +
                `&rarr; topic ${target} (${moved})</div>`
              );
            })
            .join("")
        : "";
    return (
      `<div class="topic-row${selected ? " selected" : ""}" data-topic="${topic.topic_id}">` +
      marker +
      `<div class="topic-main">` +
      `<div class="topic-label">${labelHtml(topic)}</div>` +
      `<div class="topic-bar">${bar}<span class="topic-size">${topic.size}</span>${sparkline(topic.timeline)}</div>` +
      curves +
      `</div></div>`
    );
  });
  return `<div class="topical-overview">${rows.join("")}</div>`;
}

export function renderPhrases(vm: ViewModel): string {
  if (vm.selection.length === 0) {
    return `<div class="phrases-empty">Select one or more topics to see frequent phrases.</div>`;
  }
  const maxScore = Math.max(...vm.phrases.map((p) => p.score), 0);
  const highlighted = new Set(
    vm.phrase_selection.length > 0 ? highlightedPosts(vm.phrases, vm.phrase_selection) : [],
  );
  const selectionSize = Math.max(...vm.phrases.map((p) => p.post_ids.length), 1);
  const rows = vm.phrases.map((p) => renderPhraseRow(p, maxScore, selectionSize, vm, highlighted));
  return `<div class="phrases-view">${rows.join("")}</div>`;
}

function renderPhraseRow(
  p: PhraseRow,
  maxScore: number,
  selectionSize: number,
  vm: ViewModel,
  highlighted: Set<string>,
): string {
  const selected = vm.phrase_selection.includes(p.display);
  const size = phraseFontSize(p.score, maxScore).toFixed(1);
  const freshClass = p.is_new ? " phrase-new" : "";
  const tempBar = p.temporal
    .map((frac, i) => {
      const w = (frac * p.doc_freq * (120 / selectionSize)).toFixed(2);
      return `<span class="temp-bin" style="width:${w}px;background:${temporalBinColor(i, p.temporal.length)}"></span>`;
    })
    .join("");
  const strip = p.barcode
    .map((shade, b) => {
      const mark = p.post_ids.some((id) => highlighted.has(id)) && shade > 0;
      const bg = highlighted.size > 0 && mark ? SPECIAL_COLORS.highlight : barcodeShade(shade);
      return `<span class="bc-bin" data-bin="${b}" style="background:${bg}"></span>`;
    })
    .join("");
  return (
    `<div class="phrase-row${selected ? " phrase-selected" : ""}${freshClass}" data-phrase="${esc(p.display)}">` +
    `<div class="phrase-head"><span class="phrase-text" style="font-size:${size}px;` +
    `${p.is_new ? `color:${SPECIAL_COLORS.added};` : ""}">${esc(p.display)}</span>` +
    `<span class="phrase-bar">${tempBar}</span>` +
    `<span class="phrase-count">${p.doc_freq}</span></div>` +
    `<div class="barcode">${strip}</div></div>`
  );
}

export function renderRepresentatives(vm: ViewModel, similarOpenFor: number | null): string {
  if (vm.selection.length === 0) {
    return `<div class="reps-empty">Select topics to stream representative posts.</div>`;
  }
  const selection = new Set(vm.selection);
  const highlighted = new Set(
    vm.phrase_selection.length > 0 ? highlightedPosts(vm.phrases, vm.phrase_selection) : [],
  );
  const visible = vm.reps.stream.filter(
    (r) =>
      selection.has(r.topic_id) &&
      (highlighted.size === 0 || highlighted.has(r.post_id)),
  );
  const pendingCount = vm.reps.pending.filter((r) => selection.has(r.topic_id)).length;
  const badge =
    pendingCount > 0
      ? `<button class="insert-badge" data-action="insert-reps">insert ${pendingCount} new post${pendingCount > 1 ? "s" : ""}</button>`
      : "";
  const coverage = vm.coverage ? renderCoverage(vm.coverage) : "";
  const cards = visible.map((r) => renderRepCard(r, similarOpenFor)).join("");
  return (
    `<div class="reps-view"><div class="reps-header">${badge}${coverage}</div>` +
    `<div class="reps-cards">${cards}</div></div>`
  );
}

function renderCoverage(buckets: number[]): string {
  const total = buckets.reduce((a, b) => a + b, 0) || 1;
  // walk buckets from most similar (red) to least (blue)
  const bars = [...buckets]
    .reverse()
    .map((count, i) => {
      const w = ((count / total) * 120).toFixed(1);
      return `<span class="cov-bar" style="width:${w}px;background:${coverageBarColor(i)}"></span>`;
    })
    .join("");
  return `<span class="coverage" title="how well the stream covers the selection">${bars}</span>`;
}

function renderRepCard(rep: RepCard, similarOpenFor: number | null): string {
  const color = topicColor(rep.topic_id % 10);
  const open = similarOpenFor === rep.subtopic_id ? " similar-open" : "";
  return (
    `<div class="rep-card${open}" data-subtopic="${rep.subtopic_id}" style="background:${color}">` +
    `<div class="rep-terms">${rep.subtopic_terms.map(esc).join(" ")}</div>` +
    `<div class="rep-text">${esc(rep.text)}</div>` +
    `<button class="similar-bar" data-action="similar" data-subtopic="${rep.subtopic_id}">` +
    `${rep.similar_count} similar</button></div>`
  );
}
