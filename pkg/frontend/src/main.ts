// Entry point: wires the five views to the store and polls job status.
// The session id rides in the URL hash so a reload reconstructs the same
// workbench from the service.

import { ApiClient } from "./api.js";
import { Store } from "./state.js";
import { renderAttentionView } from "./views/attention.js";
import { renderLabelView } from "./views/labels.js";
import { renderModifyView } from "./views/modify.js";
import { renderPanelView } from "./views/panel.js";
import { renderPerformanceView } from "./views/performance.js";

export async function bootstrap(root: HTMLElement, api: ApiClient, store: Store,
                                sessionId?: string): Promise<void> {
  root.innerHTML = "";
  const sections: Record<string, HTMLElement> = {};
  for (const name of ["panel", "labels", "attention", "modify", "performance"]) {
    const section = document.createElement("section");
    section.id = `${name}-view`;
    root.appendChild(section);
    sections[name] = section;
  }

  if (sessionId) {
    await store.hydrate(sessionId);
  } else {
    const created = await api.createSession();
    store.update({ sessionId: created.session_id });
  }

  const renderAll = async () => {
    renderPanelView(sections.panel, api, store);
    await renderLabelView(sections.labels, api, store);
    await renderAttentionView(sections.attention, api, store);
    renderModifyView(sections.modify, api, store);
    await renderPerformanceView(sections.performance, api, store);
  };

  let rendering = false;
  store.subscribe(() => {
    if (rendering) return;
    rendering = true;
    void renderAll().finally(() => {
      rendering = false;
    });
  });
  await renderAll();
}

export function startJobPolling(api: ApiClient, store: Store, intervalMs = 1500): () => void {
  const timer = setInterval(async () => {
    const sid = store.current.sessionId;
    if (!sid) return;
    const job = await api.jobStatus(sid);
    const previous = store.current.job;
    if (job.state !== previous.state || job.progress !== previous.progress) {
      if (previous.state === "running" && job.state === "done") {
        await store.hydrate(sid); // a round just published; refresh everything
      } else {
        store.update({ job });
      }
    }
  }, intervalMs);
  return () => clearInterval(timer);
}

declare global {
  interface Window {
    camsteerBootstrapped?: boolean;
  }
}

if (typeof window !== "undefined" && typeof document !== "undefined" && !window.camsteerBootstrapped) {
  const root = document.getElementById("app");
  if (root) {
    window.camsteerBootstrapped = true;
    const api = new ApiClient("");
    const store = new Store(api);
    const sessionId = window.location.hash.replace(/^#/, "") || undefined;
    void bootstrap(root, api, store, sessionId).then(() => {
      const sid = store.current.sessionId;
      if (sid) {
        window.location.hash = sid;
      }
      startJobPolling(api, store);
    });
  }
}
