// Browser bootstrap: connect, render the three views on every event, and
// translate clicks into commands.

import { buildSchedule, stageAt } from "./animation.js";
import { ServiceClient } from "./client.js";
import { toggleTopic, togglePhrase } from "./commands.js";
import { renderPhrases, renderRepresentatives, renderTopicalOverview } from "./render.js";
import { ViewModel } from "./viewmodel.js";

const client = new ServiceClient();
let speed = 1;
let animationStart = 0;
let similarOpenFor: number | null = null;

function el(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node;
}

function render(vm: ViewModel): void {
  const schedule = buildSchedule(vm.delta, vm.topics, speed);
  const elapsed = performance.now() - animationStart;
  const stageIndex = stageAt(schedule, elapsed);
  el("overview").innerHTML = renderTopicalOverview(vm, {
    stageIndex,
    selection: new Set(vm.selection),
  });
  el("phrases").innerHTML = renderPhrases(vm);
  el("reps").innerHTML = renderRepresentatives(vm, similarOpenFor);
  el("session-info").textContent =
    `session ${vm.session.id} depth ${vm.session.depth} update ${vm.session.update_count}`;
  const slider = el("history") as HTMLInputElement;
  slider.max = String(Math.max(vm.history_len - 1, 0));
  if (stageIndex >= 0) {
    requestAnimationFrame(() => render(vm));
  }
}

client.onUpdate((vm, event) => {
  if (event.kind === "delta") {
    animationStart = performance.now();
  }
  render(vm);
});

function wire(): void {
  el("overview").addEventListener("click", (e) => {
    const row = (e.target as HTMLElement).closest("[data-topic]");
    if (!row) return;
    const vm = client.viewModel();
    if (!vm) return;
    void client.send(toggleTopic(vm.selection, Number(row.getAttribute("data-topic"))));
  });
  el("phrases").addEventListener("click", (e) => {
    const row = (e.target as HTMLElement).closest("[data-phrase]");
    if (!row) return;
    const vm = client.viewModel();
    if (!vm) return;
    void client.send(togglePhrase(vm.phrase_selection, row.getAttribute("data-phrase")!));
  });
  el("reps").addEventListener("click", (e) => {
    const target = e.target as HTMLElement;
    if (target.dataset.action === "insert-reps") {
      void client.send({ type: "insert_new_reps" });
    } else if (target.dataset.action === "similar") {
      const sid = Number(target.dataset.subtopic);
      similarOpenFor = similarOpenFor === sid ? null : sid;
      void client
        .send({ type: "get_similar", subtopic_id: sid })
        .then((resp) => {
          if (resp.ok && similarOpenFor === sid) {
            const data = resp.data as { posts: Array<{ text: string; similarity: number }> };
            el("similar-column").innerHTML = data.posts
              .map(
                (p) =>
                  `<div class="similar-post"><span>${p.similarity.toFixed(2)}</span> ${p.text}</div>`,
              )
              .join("");
          }
        });
    }
  });
  el("dive-in").addEventListener("click", () => void client.send({ type: "dive_in" }));
  el("go-back").addEventListener("click", () => void client.send({ type: "go_back" }));
  el("search-form").addEventListener("submit", (e) => {
    e.preventDefault();
    const input = el("search-box") as HTMLInputElement;
    if (input.value.trim()) {
      void client.send({ type: "search", query: input.value.trim() });
    }
  });
  el("speed").addEventListener("click", () => {
    speed = speed >= 4 ? 0.5 : speed * 2;
    el("speed").textContent = `speed x${speed}`;
  });
  el("history").addEventListener("input", (e) => {
    const index = Number((e.target as HTMLInputElement).value);
    void client.send({ type: "set_history", index });
  });
}

wire();
client.connect();
