// HTML renderers for the panels: pure string in, string out, so the render
// layer is testable without a browser. main.ts owns actual DOM writes.

import type { Turn } from "./types.js";
import { badgeFor, CacheBarModel, CsoPanelModel } from "./viewmodel.js";

export function escapeHtml(text: string): string {
  return text
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}

export function turnHtml(turn: Turn): string {
  const badge = badgeFor(turn);
  const ctx =
    turn.inputContextTokens != null
      ? `<span class="ctx" title="input context tokens">${turn.inputContextTokens} tok</span>`
      : "";
  const diag = turn.diagnostic ? `<div class="diagnostic">${escapeHtml(turn.diagnostic)}</div>` : "";
  const failed = turn.success === false ? " turn-failed" : "";
  return (
    `<div class="turn turn-${turn.role}${failed}" data-kind="${turn.kind}">` +
    `<span class="badge ${badge.cssClass}">${badge.label}</span>${ctx}` +
    `<pre class="content">${escapeHtml(turn.content)}</pre>${diag}</div>`
  );
}

export function chatHtml(turns: Turn[]): string {
  return turns.map(turnHtml).join("");
}

export function csoPanelHtml(model: CsoPanelModel): string {
  const lines = model.lines
    .map((line) => {
      const cls = line.isNew ? "cso-line cso-new" : "cso-line";
      const body = line.key
        ? `<span class="cso-key">${escapeHtml(line.key)}:</span>${escapeHtml(line.text.slice(line.key.length + 1))}`
        : escapeHtml(line.text);
      return `<div class="${cls}">${body}</div>`;
    })
    .join("");
  return (
    `<div class="cso-header">version ${model.version}` +
    (model.newCount ? ` · <span class="cso-new-count">+${model.newCount} new</span>` : "") +
    `</div>${lines || '<div class="cso-empty">log is empty</div>'}`
  );
}

export function cachePanelHtml(bars: CacheBarModel[]): string {
  return bars
    .map(
      (bar) =>
        `<div class="cache-adapter" data-adapter="${bar.adapterId}">` +
        `<div class="cache-title">${bar.adapterId}` +
        `<span class="cache-lens">perm ${bar.permanentLen} · eph ${bar.ephemeralLen}</span></div>` +
        `<div class="cache-bar">` +
        `<div class="bar-permanent" style="width:${bar.permanentPct.toFixed(1)}%"></div>` +
        `<div class="bar-ephemeral" style="width:${bar.ephemeralPct.toFixed(1)}%"></div>` +
        `</div>` +
        `<ul class="cache-events">${bar.events.map((e) => `<li>${escapeHtml(e)}</li>`).join("")}</ul>` +
        `</div>`,
    )
    .join("");
}

export function errorBannerHtml(code: string, message: string): string {
  return `<div class="banner banner-error" role="alert">${escapeHtml(code)}: ${escapeHtml(message)} <button class="retry">retry</button></div>`;
}
