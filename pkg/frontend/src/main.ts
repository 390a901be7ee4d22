// DOM shell: binds the controller to the page, polls the inspection
// endpoints once a second, and repaints the three panels.

import { ApiClient } from "./api.js";
import { renderGrowthChart } from "./chart.js";
import { InspectorController } from "./controller.js";
import { cachePanelHtml, chatHtml, csoPanelHtml, errorBannerHtml } from "./render.js";
import { cachePanelModel, csoPanelModel, overlaySeries } from "./viewmodel.js";

const POLL_INTERVAL_MS = 1000;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

async function boot() {
  const client = new ApiClient("");
  const controller = new InspectorController(client);

  const modeSelect = el<HTMLSelectElement>("mode-select");
  const registrySelect = el<HTMLSelectElement>("registry-select");
  const newSessionBtn = el<HTMLButtonElement>("new-session");
  const sessionLabel = el<HTMLSpanElement>("session-label");
  const chatLog = el<HTMLDivElement>("chat-log");
  const inputBox = el<HTMLTextAreaElement>("chat-input");
  const sendBtn = el<HTMLButtonElement>("send");
  const banner = el<HTMLDivElement>("banner");
  const csoPanel = el<HTMLDivElement>("cso-panel");
  const cachePanel = el<HTMLDivElement>("cache-panel");
  const chartPanel = el<HTMLDivElement>("chart-panel");
  const overlaySelect = el<HTMLSelectElement>("overlay-select");

  try {
    const [{ modes }, registries] = await Promise.all([client.listModes(), client.listRegistries()]);
    modeSelect.innerHTML = modes
      .map((m) => `<option value="${m}"${m === "mem" ? " selected" : ""}>${m}</option>`)
      .join("");
    registrySelect.innerHTML = registries.registries
      .map(
        (r) =>
          `<option value="${r.id}"${r.id === registries.default ? " selected" : ""}>${r.id} (${r.tools} tools)</option>`,
      )
      .join("");
  } catch (err) {
    banner.innerHTML = errorBannerHtml("connection_lost", String(err));
  }

  function paint() {
    const s = controller.state;
    sessionLabel.textContent = s.session
      ? `${s.session.id.slice(0, 8)}… · ${s.session.mode} · ${s.session.status}`
      : "no session";
    chatLog.innerHTML = chatHtml(s.turns);
    chatLog.scrollTop = chatLog.scrollHeight;
    inputBox.disabled = s.inFlight || !s.session;
    sendBtn.disabled = s.inFlight || !s.session;
    sendBtn.textContent = s.inFlight ? "…" : "send";
    banner.innerHTML = s.error ? errorBannerHtml(s.error.code, s.error.message) : "";
    const retry = banner.querySelector<HTMLButtonElement>(".retry");
    if (retry) retry.onclick = () => void controller.refresh();
    if (s.cso) csoPanel.innerHTML = csoPanelHtml(csoPanelModel(s.cso, s.previousCso));
    if (s.cache) cachePanel.innerHTML = cachePanelHtml(cachePanelModel(s.cache));
    if (s.trajectory) {
      chartPanel.innerHTML = renderGrowthChart(overlaySeries(s.trajectory, s.overlay));
    }
    // the input keeps whatever the user typed, including across failures
    if (document.activeElement !== inputBox && inputBox.value !== s.draft) {
      inputBox.value = s.draft;
    }
  }

  controller.onChange(paint);

  newSessionBtn.onclick = () =>
    void controller.createSession(modeSelect.value, registrySelect.value || undefined);
  inputBox.oninput = () => controller.setDraft(inputBox.value);
  sendBtn.onclick = () => void controller.send();
  inputBox.onkeydown = (ev) => {
    if (ev.key === "Enter" && !ev.shiftKey) {
      ev.preventDefault();
      void controller.send();
    }
  };
  overlaySelect.onchange = () => void controller.setOverlay(overlaySelect.value || null);
  overlaySelect.onfocus = async () => {
    const { sessions } = await client.listSessions();
    const current = controller.state.session?.id;
    overlaySelect.innerHTML =
      '<option value="">no overlay</option>' +
      sessions
        .filter((r) => r.id !== current)
        .map((r) => `<option value="${r.id}">${r.id.slice(0, 8)}… (${r.mode})</option>`)
        .join("");
  };

  setInterval(() => {
    if (controller.state.session && !controller.state.inFlight) void controller.refresh();
  }, POLL_INTERVAL_MS);

  paint();
}

void boot();
