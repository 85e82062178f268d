// Panel view: dataset upload, model and parameter selection, start training.
// Defaults stay visible; the advanced form hides behind a toggle.

import { ApiClient } from "../api.js";
import { Store } from "../state.js";

export const DEFAULT_PARAMS = { batch_size: 4, epochs: 30 };

export function renderPanelView(container: HTMLElement, api: ApiClient, store: Store): void {
  container.innerHTML = "";
  container.classList.add("panel-view");
  const state = store.current;

  const form = document.createElement("form");
  form.className = "upload-form";

  const rootInput = document.createElement("input");
  rootInput.name = "dataset-root";
  rootInput.placeholder = "dataset directory (images + labels.csv)";
  form.appendChild(rootInput);

  const uploadButton = document.createElement("button");
  uploadButton.type = "submit";
  uploadButton.textContent = "Upload dataset";
  form.appendChild(uploadButton);

  const backboneSelect = document.createElement("select");
  backboneSelect.name = "backbone";
  for (const name of ["small_cnn", "densenet_like", "resnet_like"]) {
    const option = document.createElement("option");
    option.value = name;
    option.textContent = name;
    backboneSelect.appendChild(option);
  }

  const defaults = document.createElement("p");
  defaults.className = "defaults";
  defaults.textContent = `defaults: batch size ${DEFAULT_PARAMS.batch_size}, epochs ${DEFAULT_PARAMS.epochs}`;

  const advancedToggle = document.createElement("button");
  advancedToggle.type = "button";
  advancedToggle.className = "advanced-toggle";
  advancedToggle.textContent = "Advanced";

  const advanced = document.createElement("div");
  advanced.className = "advanced-params";
  advanced.hidden = true;
  const batchInput = document.createElement("input");
  batchInput.name = "batch_size";
  batchInput.type = "number";
  batchInput.value = String(DEFAULT_PARAMS.batch_size);
  const epochsInput = document.createElement("input");
  epochsInput.name = "epochs";
  epochsInput.type = "number";
  epochsInput.value = String(DEFAULT_PARAMS.epochs);
  advanced.append(batchInput, epochsInput);

  advancedToggle.addEventListener("click", () => {
    advanced.hidden = !advanced.hidden;
  });

  const startButton = document.createElement("button");
  startButton.className = "start-training";
  startButton.textContent = "Start training";
  startButton.disabled = !state.datasetLoaded || state.job.state === "running";

  const status = document.createElement("p");
  status.className = "job-status";
  status.textContent = state.job.state === "running"
    ? `${state.job.kind}: ${(state.job.progress * 100).toFixed(0)}% ${state.job.message}`
    : state.job.state;

  form.addEventListener("submit", async (event) => {
    event.preventDefault();
    const sid = store.current.sessionId;
    if (!sid || !rootInput.value) return;
    try {
      await api.uploadDataset(sid, rootInput.value, 224);
      const stats = await api.labelStats(sid);
      store.update({ datasetLoaded: true, labelNames: stats.label_names });
    } catch (err) {
      status.textContent = String(err);
    }
  });

  startButton.addEventListener("click", async () => {
    const sid = store.current.sessionId;
    if (!sid) return;
    try {
      await api.startTraining(sid, {
        backbone: backboneSelect.value,
        batch_size: Number(batchInput.value),
        epochs: Number(epochsInput.value),
      });
      store.update({ job: { state: "running", kind: "train", progress: 0, message: "" } });
    } catch (err) {
      status.textContent = String(err);
    }
  });

  container.append(form, backboneSelect, defaults, advancedToggle, advanced, startButton, status);
}
