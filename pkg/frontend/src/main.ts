/** DOM wiring for the annotator. All business rules live in the logic
 * modules; this file only renders state and forwards events. */

import { ReviewApi } from "./api.js";
import { anchorFor } from "./anchors.js";
import { saveGold, visibleEntries, type DraftEntry } from "./coding.js";
import { OfflineQueue } from "./queue.js";
import {
  confirmSupergold,
  decideResolution,
  mergeDuplicateGold,
  rejectMatch,
  type ActionResult,
} from "./review.js";
import type { Metrics, SpeechView } from "./types.js";

const coder = new URLSearchParams(location.search).get("coder") ?? "anonymous";
const api = new ReviewApi("", coder);
const queue = new OfflineQueue();

const app = document.getElementById("app") as HTMLElement;
const status = document.getElementById("status") as HTMLElement;

function note(message: string, kind: "ok" | "warn" | "err" = "ok"): void {
  status.textContent = message;
  status.dataset.kind = kind;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  ...children: Array<Node | string>
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  node.append(...children);
  return node;
}

function fmt(value: number | null, digits = 2): string {
  return value === null ? "n/a" : value.toFixed(digits);
}

function renderMetrics(metrics: Metrics): HTMLElement {
  const rows: Array<[string, string]> = [
    ["Sensitivity vs reference file (%)", fmt(metrics.sensitivity_vs_supergold, 1)],
    ["Sensitivity vs human (%)", fmt(metrics.sensitivity_vs_human, 1)],
    ["False discovery rate (%)", fmt(metrics.fdr, 1)],
    ["Mean |AI - human| sentiment", fmt(metrics.mean_abs_diff)],
    ["Mean signed difference", fmt(metrics.mean_signed_diff)],
    ["Confirmed reference entries", String(metrics.n_supergold)],
    ["Matched pairs", String(metrics.n_matched_pairs)],
  ];
  const table = el("table", { class: "metrics" });
  for (const [label, value] of rows) {
    table.append(el("tr", {}, el("td", {}, label), el("td", { class: "num" }, value)));
  }
  return el("section", { class: "panel" }, el("h2", {}, "Validation metrics"), table);
}

async function refreshMetricsPanel(): Promise<void> {
  const holder = document.getElementById("metrics-holder");
  if (!holder) return;
  try {
    const metrics = await api.metrics();
    holder.replaceChildren(renderMetrics(metrics));
  } catch {
    holder.replaceChildren(
      el("section", { class: "panel" }, el("h2", {}, "Validation metrics"),
        el("p", {}, "Not computable yet: no confirmed reference entries.")),
    );
  }
}

function handleResult(result: ActionResult, applied: string): void {
  if (result.outcome === "conflict") {
    note(`Someone else changed this item (${result.detail}). Reload and retry.`, "warn");
  } else {
    note(applied, "ok");
    const holder = document.getElementById("metrics-holder");
    if (holder) holder.replaceChildren(renderMetrics(result.metrics));
  }
}

// -- coding view ---------------------------------------------------------------

function codingView(speech: SpeechView): HTMLElement {
  const draft: DraftEntry = { speech_id: speech.speech_id, actor: "", sentiment: 0 };

  const actorInput = el("input", {
    type: "text",
    placeholder: "actor as written in the speech",
    "aria-label": "actor",
  }) as HTMLInputElement;
  const slider = el("input", {
    type: "range", min: "-5", max: "5", step: "1", value: "0",
  }) as HTMLInputElement;
  const sliderLabel = el("span", { class: "slider-label" }, "0");
  const entriesList = el("ul", { class: "entries" });
  const saveButton = el("button", {}, "Save entry (Enter)");

  slider.title = anchorFor(0);
  slider.addEventListener("input", () => {
    draft.sentiment = Number(slider.value);
    slider.title = anchorFor(draft.sentiment);
    sliderLabel.textContent = slider.value;
  });
  actorInput.addEventListener("input", () => {
    draft.actor = actorInput.value;
  });

  const speechText = el("p", { class: "speech-text" }, speech.text);
  speechText.addEventListener("mouseup", () => {
    const selected = window.getSelection()?.toString().trim();
    if (selected) {
      draft.actor = selected;
      actorInput.value = selected;
      actorInput.focus();
    }
  });

  async function refreshEntries(): Promise<void> {
    let serverRows: Awaited<ReturnType<typeof api.gold>> = [];
    try {
      serverRows = await api.gold(speech.speech_id);
    } catch {
      // offline: show queued entries only
    }
    entriesList.replaceChildren(
      ...visibleEntries(serverRows, queue, speech.speech_id).map((row) =>
        el("li", { class: row.pending ? "pending" : "" },
          `${row.actor_surface} -> ${row.sentiment}${row.pending ? " (queued)" : ""}`),
      ),
    );
  }

  async function save(): Promise<void> {
    const result = await saveGold(api, queue, { ...draft });
    if (result.outcome === "blocked") {
      note(`Not saved: ${result.reason}`, "err");
      return;
    }
    if (result.outcome === "queued") {
      note("Offline: entry queued, will sync on reconnect.", "warn");
    } else {
      note(`Saved ${result.record.actor_surface}.`, "ok");
    }
    actorInput.value = "";
    draft.actor = "";
    await refreshEntries();
    await refreshMetricsPanel();
  }

  saveButton.addEventListener("click", () => void save());
  actorInput.addEventListener("keydown", (event) => {
    if (event.key === "Enter") void save();
    if (event.key === "ArrowUp") {
      slider.value = String(Math.min(5, Number(slider.value) + 1));
      slider.dispatchEvent(new Event("input"));
      event.preventDefault();
    }
    if (event.key === "ArrowDown") {
      slider.value = String(Math.max(-5, Number(slider.value) - 1));
      slider.dispatchEvent(new Event("input"));
      event.preventDefault();
    }
  });

  void refreshEntries();
  return el(
    "section", { class: "panel" },
    el("h2", {}, `Code speech ${speech.speech_id}`),
    el("p", { class: "meta" },
      `${speech.date} | ${speech.speaker_name} (${speech.speaker_party})`),
    speechText,
    el("div", { class: "entry-row" }, actorInput, slider, sliderLabel, saveButton),
    el("h3", {}, "Entries"),
    entriesList,
  );
}

// -- match, reference-file, and resolution views --------------------------------

async function matchesView(): Promise<HTMLElement> {
  const matchset = await api.matches();
  const list = el("ul", { class: "matches" });
  for (const triple of matchset.triples.slice(0, 200)) {
    const label =
      `${triple.speech_id}: ` +
      `${triple.ai ? `AI "${triple.ai.actor_surface}" (${triple.ai.sentiment})` : "no AI"}` +
      ` vs ${triple.gold ? `gold "${triple.gold.actor_surface}" (${triple.gold.sentiment})` : "no gold"}` +
      (triple.duplicate_gold ? " [duplicate]" : "");
    const item = el("li", {}, label, " ");
    if (triple.ai && triple.gold) {
      const reject = el("button", {}, "Reject pair");
      reject.addEventListener("click", async () => {
        handleResult(
          await rejectMatch(api, triple.match_id, matchset.revision),
          "Match rejected; both findings are singletons now.",
        );
      });
      item.append(reject);
    }
    if (triple.duplicate_gold && triple.gold) {
      const merge = el("button", {}, "Drop duplicate");
      merge.addEventListener("click", async () => {
        handleResult(
          await mergeDuplicateGold(api, triple.match_id, triple.gold!.gold_id, matchset.revision),
          "Duplicate row dropped.",
        );
      });
      item.append(merge);
    }
    list.append(item);
  }
  return el("section", { class: "panel" },
    el("h2", {}, `Matches (revision ${matchset.revision})`), list);
}

async function supergoldView(): Promise<HTMLElement> {
  const records = await api.supergold();
  const list = el("ul", { class: "supergold" });
  for (const record of records.filter((r) => !r.confirmed).slice(0, 200)) {
    const item = el(
      "li", {},
      `${record.speech_id}: "${record.actor_surface}" [${record.provenance}] `,
    );
    const confirm = el("button", {}, "Confirm");
    confirm.addEventListener("click", async () => {
      handleResult(
        await confirmSupergold(api, record.supergold_id, true, record.revision),
        "Reference entry confirmed; it now counts in the denominator.",
      );
    });
    item.append(confirm);
    list.append(item);
  }
  if (!list.children.length) list.append(el("li", {}, "Nothing awaiting confirmation."));
  return el("section", { class: "panel" }, el("h2", {}, "Reference file"), list);
}

async function resolutionView(): Promise<HTMLElement> {
  const items = await api.resolutionQueue();
  const list = el("ul", { class: "resolution" });
  for (const item of items.slice(0, 200)) {
    const row = el(
      "li", {},
      `${item.actor_surface} (${item.country}, ${item.date}) suggested: ${item.suggested_class} `,
    );
    const party = el("input", { type: "text", placeholder: "party id" }) as HTMLInputElement;
    const approve = el("button", {}, "Approve");
    const reject = el("button", {}, "Reject");
    approve.addEventListener("click", async () => {
      handleResult(
        await decideResolution(api, item.mention_id, "approve", party.value.trim(), item.revision),
        "Resolution approved.",
      );
    });
    reject.addEventListener("click", async () => {
      handleResult(
        await decideResolution(api, item.mention_id, "reject", "", item.revision),
        "Resolution rejected.",
      );
    });
    row.append(party, approve, reject);
    list.append(row);
  }
  if (!list.children.length) list.append(el("li", {}, "Queue is empty."));
  return el("section", { class: "panel" }, el("h2", {}, "Resolution queue"), list);
}

// -- shell -----------------------------------------------------------------------

async function render(): Promise<void> {
  app.replaceChildren(el("p", {}, "Loading…"));
  try {
    await api.health();
  } catch {
    app.replaceChildren(
      el("p", { class: "error" },
        "Review service unreachable. Start it with: parlpol serve --config <config>"),
    );
    return;
  }

  const speeches = await api.sample();
  const tasks = await api.tasks("code-speech", "open");
  const openIds = new Set(tasks.map((t) => String(t.payload["speech_id"])));
  const next = speeches.find((s) => openIds.has(s.speech_id)) ?? speeches[0];

  const panels: HTMLElement[] = [];
  panels.push(el("div", { id: "metrics-holder" }));
  if (next) panels.push(codingView(next));
  panels.push(await matchesView());
  panels.push(await supergoldView());
  panels.push(await resolutionView());
  app.replaceChildren(...panels);
  await refreshMetricsPanel();

  window.addEventListener("online", async () => {
    const flushed = await queue.flush(api);
    if (flushed > 0) {
      note(`Back online: ${flushed} queued entries synced.`, "ok");
      await refreshMetricsPanel();
    }
  });
}

void render();
