// Performance view: per-round correct/incorrect trend, numeric metrics
// behind an expand toggle, and the side-by-side per-round heatmap strip
// with green/red borders for correct/incorrect predictions.

import { ApiClient } from "../api.js";
import { Store } from "../state.js";

const SVG_NS = "http://www.w3.org/2000/svg";

export async function renderPerformanceView(container: HTMLElement, api: ApiClient,
                                            store: Store): Promise<void> {
  const state = store.current;
  container.innerHTML = "";
  container.classList.add("performance-view");
  if (!state.sessionId || state.currentRound === null) {
    container.textContent = "no rounds yet";
    return;
  }

  const history = await api.history(state.sessionId, state.selectedLabel);
  const reports = history.reports;

  // trend chart: one point per round (preliminary included)
  const svg = document.createElementNS(SVG_NS, "svg");
  svg.setAttribute("viewBox", "0 0 320 120");
  svg.classList.add("trend-chart");
  const maxCount = Math.max(1, ...reports.map((r) => r.correct_count + r.incorrect_count));
  reports.forEach((row, i) => {
    const x = 20 + (280 * i) / Math.max(1, reports.length - 1);
    const y = 110 - (100 * row.correct_count) / maxCount;
    const point = document.createElementNS(SVG_NS, "circle");
    point.setAttribute("cx", String(x));
    point.setAttribute("cy", String(y));
    point.setAttribute("r", "4");
    point.classList.add("trend-point");
    point.dataset.roundIndex = String(row.round_index);
    point.dataset.correct = String(row.correct_count);
    svg.appendChild(point);
  });
  container.appendChild(svg);

  // numeric metrics live behind a toggle; visual trends are the default
  const expand = document.createElement("button");
  expand.className = "metrics-toggle";
  expand.textContent = "Metrics";
  const table = document.createElement("table");
  table.className = "metrics-table";
  table.hidden = true;
  const head = document.createElement("tr");
  head.innerHTML = "<th>round</th><th>precision</th><th>recall</th><th>f1</th><th>auc</th>";
  table.appendChild(head);
  const fmt = (v: number | null) => (v === null ? "--" : v.toFixed(3));
  for (const row of reports) {
    const tr = document.createElement("tr");
    tr.innerHTML = `<td>${row.round_index}</td><td>${fmt(row.precision)}</td>` +
      `<td>${fmt(row.recall)}</td><td>${fmt(row.f1)}</td><td>${fmt(row.auc)}</td>`;
    table.appendChild(tr);
  }
  expand.addEventListener("click", () => {
    table.hidden = !table.hidden;
  });
  container.append(expand, table);

  // comparison strip: one column per round for the selected image
  if (state.selectedImage) {
    const comparison = await api.comparison(state.sessionId, state.selectedImage,
                                            state.selectedLabel);
    const strip = document.createElement("div");
    strip.className = "comparison-strip";
    for (const round of comparison.rounds) {
      const cell = document.createElement("figure");
      cell.className = round.correct ? "comparison-cell correct" : "comparison-cell incorrect";
      cell.style.borderColor = round.correct ? "green" : "red";
      const img = document.createElement("img");
      img.src = api.overlayUrl(state.sessionId, state.selectedImage, state.selectedLabel,
                               round.round_index);
      img.alt = `round ${round.round_index}`;
      const caption = document.createElement("figcaption");
      caption.textContent = `round ${round.round_index} p=${round.probability.toFixed(2)}`;
      cell.append(img, caption);
      strip.appendChild(cell);
    }
    container.appendChild(strip);
  }

  const finetune = document.createElement("button");
  finetune.className = "start-finetune";
  finetune.textContent = "Start fine-tuning round";
  finetune.disabled = state.job.state === "running";
  finetune.addEventListener("click", async () => {
    try {
      await api.startFinetune(state.sessionId!, 30);
      store.update({ job: { state: "running", kind: "finetune", progress: 0, message: "" } });
    } catch (err) {
      finetune.insertAdjacentText("afterend", ` ${String(err)}`);
    }
  });
  container.appendChild(finetune);
}
