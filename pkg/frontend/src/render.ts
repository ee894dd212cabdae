// Pure HTML-string renderers. No document access, so the same code is
// exercised verbatim by the node test run and the browser page.

import { TranscriptEntry } from "./api.js";
import { ConsoleState } from "./state.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

const KIND_LABEL: Record<TranscriptEntry["kind"], string> = {
  platform: "PLATFORM",
  tilt: "TILT",
  ended: "END",
};

export function renderEntry(entry: TranscriptEntry): string {
  const badge = `<span class="badge badge-${entry.kind}">${KIND_LABEL[entry.kind]}</span>`;
  const prompt = entry.prompt_used
    ? `<div class="prompt">prompt: ${escapeHtml(entry.prompt_used)}</div>`
    : "";
  const detail = entry.kind === "tilt" && entry.tilt
    ? renderTiltDetail(entry.tilt.candidates, entry.tilt.filtered_out)
    : "";
  return [
    `<li class="entry entry-${entry.kind}" data-seq="${entry.seq}" data-kind="${entry.kind}">`,
    badge,
    `<span class="text">${escapeHtml(entry.text)}</span>`,
    prompt,
    detail,
    `</li>`,
  ].join("");
}

export function renderTiltDetail(
  candidates: [string, number][],
  filteredOut: [string, string[]][],
): string {
  const rows = candidates
    .map(([name, distance]) =>
      `<li class="candidate" data-name="${escapeHtml(name)}">` +
      `${escapeHtml(name)} <span class="distance">${distance.toFixed(4)}</span></li>`)
    .join("");
  const dropped = filteredOut.length
    ? `<ul class="filtered">` + filteredOut
        .map(([name, words]) =>
          `<li class="filtered-trope">${escapeHtml(name)} ` +
          `<span class="shared">(${words.map(escapeHtml).join(", ")})</span></li>`)
        .join("") + `</ul>`
    : "";
  return `<div class="tilt-detail"><ul class="candidates">${rows}</ul>${dropped}</div>`;
}

export function renderTranscript(entries: TranscriptEntry[]): string {
  return `<ol class="transcript">${entries.map(renderEntry).join("")}</ol>`;
}

export function renderControls(state: ConsoleState): string {
  const noSession = state.sessionId === null;
  const busy = state.pending;
  const platformOff = noSession || busy || state.ended;
  const tiltOff = noSession || busy;
  return [
    `<button id="btn-start" ${busy ? "disabled" : ""}>new session</button>`,
    `<button id="btn-platform" ${platformOff ? "disabled" : ""}>platform</button>`,
    `<button id="btn-tilt" ${tiltOff ? "disabled" : ""}>tilt</button>`,
    `<input id="prompt" type="text" placeholder="optional prompt" ${busy ? "disabled" : ""}>`,
  ].join("\n");
}

export function renderStatus(state: ConsoleState): string {
  if (state.error) {
    return `<p class="status error">${escapeHtml(state.error)}</p>`;
  }
  if (state.pending) {
    return `<p class="status pending">working&hellip;</p>`;
  }
  if (state.sessionId === null) {
    return `<p class="status">no session</p>`;
  }
  const tail = state.ended ? " (story over, tilts still welcome)" : "";
  return `<p class="status">session ${escapeHtml(state.sessionId)}` +
    ` from ${escapeHtml(state.root ?? "?")}${tail}</p>`;
}

export function renderApp(state: ConsoleState): string {
  return [
    renderStatus(state),
    `<div class="controls">${renderControls(state)}</div>`,
    renderTranscript(state.entries),
  ].join("\n");
}
