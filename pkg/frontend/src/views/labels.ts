// Label view: sortable distribution table plus the co-occurrence chord
// diagram. Clicking an arc (or a table row) selects that label for the
// attention view.

import { ApiClient } from "../api.js";
import { arcPath, chordLayout, ribbonPath } from "../chord.js";
import { Store } from "../state.js";

const SVG_NS = "http://www.w3.org/2000/svg";
const COLORS = ["#4c78a8", "#f58518", "#54a24b", "#e45756", "#72b7b2", "#b279a2",
                "#ff9da6", "#9d755d", "#bab0ac", "#d67195", "#86bcb6", "#c0cf57",
                "#f2cf5b", "#7b848f"];

export async function renderLabelView(container: HTMLElement, api: ApiClient, store: Store,
                                      sortAscending = true): Promise<void> {
  const sid = store.current.sessionId;
  container.innerHTML = "";
  container.classList.add("label-view");
  if (!sid || !store.current.datasetLoaded) {
    container.textContent = "upload a dataset to see label statistics";
    return;
  }

  const [stats, co] = await Promise.all([api.labelStats(sid), api.cooccurrence(sid)]);

  const table = document.createElement("table");
  table.className = "label-table";
  const head = document.createElement("tr");
  head.innerHTML = "<th>label</th><th>count</th><th>proportion</th>";
  table.appendChild(head);

  const order = stats.label_names.map((_, i) => i);
  order.sort((a, b) => sortAscending
    ? stats.proportions[a] - stats.proportions[b]
    : stats.proportions[b] - stats.proportions[a]);

  for (const i of order) {
    const row = document.createElement("tr");
    row.dataset.labelIndex = String(i);
    row.innerHTML =
      `<td style="color:${COLORS[i % COLORS.length]}">${stats.label_names[i]}</td>` +
      `<td>${stats.counts[i]}</td><td>${(stats.proportions[i] * 100).toFixed(1)}%</td>`;
    row.addEventListener("click", () => store.update({ selectedLabel: i }));
    table.appendChild(row);
  }

  const svg = document.createElementNS(SVG_NS, "svg");
  svg.setAttribute("viewBox", "0 0 320 320");
  svg.classList.add("chord-diagram");
  const layout = chordLayout(co.label_names, co.matrix);
  for (const ribbon of layout.ribbons) {
    const path = document.createElementNS(SVG_NS, "path");
    path.setAttribute("d", ribbonPath(ribbon, 120, 160, 160));
    path.setAttribute("fill", COLORS[ribbon.source % COLORS.length]);
    path.setAttribute("opacity", "0.45");
    path.classList.add("ribbon");
    path.dataset.weight = String(ribbon.weight);
    svg.appendChild(path);
  }
  for (const arc of layout.arcs) {
    const path = document.createElementNS(SVG_NS, "path");
    path.setAttribute("d", arcPath(arc, 140, 14, 160, 160));
    path.setAttribute("fill", COLORS[arc.index % COLORS.length]);
    path.classList.add("arc");
    path.dataset.labelIndex = String(arc.index);
    path.addEventListener("click", () => store.update({ selectedLabel: arc.index }));
    svg.appendChild(path);
  }

  container.append(table, svg);
}
