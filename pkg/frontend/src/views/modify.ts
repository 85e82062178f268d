// Modification view: click-to-add polygon editor over the selected image,
// a per-label selector keeping one independent polygon layer per label,
// a note field, and save. Saving commits normalized coordinates.

import { ApiClient } from "../api.js";
import { PolygonEditor, Viewport } from "../polygons.js";
import { Store } from "../state.js";

export interface ModifyHandles {
  editorFor(label: number): PolygonEditor;
  save(): Promise<void>;
}

export function renderModifyView(container: HTMLElement, api: ApiClient, store: Store,
                                 displaySize = 448): ModifyHandles {
  const state = store.current;
  container.innerHTML = "";
  container.classList.add("modify-view");

  const viewport: Viewport = { width: displaySize, height: displaySize, zoom: 1, panX: 0, panY: 0 };
  const editors = new Map<number, PolygonEditor>();
  const editorFor = (label: number): PolygonEditor => {
    let editor = editors.get(label);
    if (!editor) {
      editor = new PolygonEditor(viewport);
      editors.set(label, editor);
    }
    return editor;
  };

  if (!state.sessionId || !state.selectedImage) {
    container.textContent = "pick an image in the attention view";
    return { editorFor, save: async () => undefined };
  }

  const canvas = document.createElement("canvas");
  canvas.width = displaySize;
  canvas.height = displaySize;
  canvas.className = "editor-canvas";

  const labelSelect = document.createElement("select");
  labelSelect.className = "label-select";
  state.labelNames.forEach((name, i) => {
    const option = document.createElement("option");
    option.value = String(i);
    option.textContent = name;
    option.selected = i === state.selectedLabel;
    labelSelect.appendChild(option);
  });

  let activeLabel = state.selectedLabel;
  labelSelect.addEventListener("change", () => {
    const editor = editorFor(activeLabel);
    if (editor.hasPendingVertices) {
      editor.discard(); // a ring in progress never leaks across labels
    }
    activeLabel = Number(labelSelect.value);
  });

  canvas.addEventListener("click", (event) => {
    const rect = canvas.getBoundingClientRect();
    editorFor(activeLabel).addPoint(event.clientX - rect.left, event.clientY - rect.top);
  });
  canvas.addEventListener("dblclick", () => {
    editorFor(activeLabel).close();
  });

  const note = document.createElement("textarea");
  note.className = "note-area";
  note.placeholder = "notes for this image";

  const saveButton = document.createElement("button");
  saveButton.className = "save-annotation";
  saveButton.textContent = "Save annotation";

  const status = document.createElement("p");
  status.className = "save-status";

  const save = async (): Promise<void> => {
    const editor = editorFor(activeLabel);
    if (editor.hasPendingVertices) {
      editor.close();
    }
    const polygons = editor.polygons.map((ring) => ring.map(([x, y]) => [x, y]));
    if (polygons.length === 0) {
      status.textContent = "draw at least one polygon first";
      return;
    }
    try {
      await api.putAnnotation(state.sessionId!, state.selectedImage!, activeLabel,
                              polygons, note.value);
      status.textContent = "saved";
    } catch (err) {
      status.textContent = String(err);
    }
  };
  saveButton.addEventListener("click", () => void save());

  container.append(canvas, labelSelect, note, saveButton, status);
  return { editorFor, save };
}
