// Attention view: heatmap-overlaid validation images ranked by the chosen
// strategy, with correct/incorrect badges, an annotated marker, an accept
// control for reasonable explanations, and a send-to-modification control.

import { ApiClient } from "../api.js";
import { RankingModeName, Store } from "../state.js";

export async function renderAttentionView(container: HTMLElement, api: ApiClient,
                                          store: Store): Promise<void> {
  const state = store.current;
  container.innerHTML = "";
  container.classList.add("attention-view");
  if (!state.sessionId || state.currentRound === null) {
    container.textContent = "train a model to see explanations";
    return;
  }

  const modeSelect = document.createElement("select");
  modeSelect.className = "ranking-mode";
  for (const mode of ["accuracy", "concentration", "dependency"]) {
    const option = document.createElement("option");
    option.value = mode;
    option.textContent = mode;
    option.selected = mode === state.rankingMode;
    modeSelect.appendChild(option);
  }
  modeSelect.addEventListener("change", () => {
    store.update({ rankingMode: modeSelect.value as RankingModeName });
  });
  container.appendChild(modeSelect);

  const ranked = await api.rankedImages(state.sessionId, state.selectedLabel, state.rankingMode);
  const grid = document.createElement("div");
  grid.className = "attention-grid";

  for (const entry of ranked.images) {
    const cell = document.createElement("figure");
    cell.className = "attention-cell";
    cell.dataset.imageId = entry.image_id;

    const img = document.createElement("img");
    img.src = api.overlayUrl(state.sessionId, entry.image_id, state.selectedLabel);
    img.alt = entry.image_id;
    cell.appendChild(img);

    const badge = document.createElement("span");
    badge.className = entry.correct ? "badge correct" : "badge incorrect";
    badge.textContent = entry.correct ? "✓" : "✗";
    cell.appendChild(badge);

    if (entry.annotated) {
      const flag = document.createElement("span");
      flag.className = "badge annotated";
      flag.textContent = "annotated";
      cell.appendChild(flag);
    }

    const accept = document.createElement("button");
    accept.className = "accept-heatmap";
    accept.textContent = "Accept";
    accept.addEventListener("click", async () => {
      try {
        await api.acceptHeatmap(state.sessionId!, entry.image_id, state.selectedLabel);
        await renderAttentionView(container, api, store); // re-fetch to show the flag
      } catch (err) {
        badge.insertAdjacentText("afterend", ` ${String(err)}`);
      }
    });
    cell.appendChild(accept);

    const modify = document.createElement("button");
    modify.className = "send-to-modification";
    modify.textContent = "Modify";
    modify.addEventListener("click", () => store.update({ selectedImage: entry.image_id }));
    cell.appendChild(modify);

    const caption = document.createElement("figcaption");
    caption.textContent = `#${entry.rank} score ${entry.score.toFixed(4)}`;
    cell.appendChild(caption);

    grid.appendChild(cell);
  }
  container.appendChild(grid);
}
