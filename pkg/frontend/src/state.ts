// Single source of truth for what the user is looking at. Everything here
// is reconstructible from the service: reloading the page and re-hydrating
// from the same session id must land in an equivalent state.

import { ApiClient, JobStatus, LabelStats, SessionInfo } from "./api.js";

export type RankingModeName = "accuracy" | "concentration" | "dependency";

export interface ViewState {
  sessionId: string | null;
  currentRound: number | null;
  datasetLoaded: boolean;
  labelNames: string[];
  selectedLabel: number;
  rankingMode: RankingModeName;
  selectedImage: string | null;
  roundSelector: number | null;
  job: JobStatus;
}

export function initialState(): ViewState {
  return {
    sessionId: null,
    currentRound: null,
    datasetLoaded: false,
    labelNames: [],
    selectedLabel: 0,
    rankingMode: "accuracy",
    selectedImage: null,
    roundSelector: null,
    job: { state: "idle", kind: null, progress: 0, message: "" },
  };
}

type Listener = (state: ViewState) => void;

export class Store {
  private state: ViewState = initialState();
  private listeners: Listener[] = [];

  constructor(private api: ApiClient) {}

  get current(): ViewState {
    return { ...this.state };
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  update(patch: Partial<ViewState>): void {
    if (patch.selectedLabel !== undefined && this.state.labelNames.length > 0) {
      if (patch.selectedLabel < 0 || patch.selectedLabel >= this.state.labelNames.length) {
        throw new Error(`label index ${patch.selectedLabel} outside the session vocabulary`);
      }
    }
    this.state = { ...this.state, ...patch };
    for (const listener of this.listeners) {
      listener(this.current);
    }
  }

  // rebuild the full view state for an existing session (page reload path)
  async hydrate(sessionId: string): Promise<ViewState> {
    const info: SessionInfo = await this.api.getSession(sessionId);
    let labels: LabelStats | null = null;
    if (info.dataset_loaded) {
      labels = await this.api.labelStats(sessionId);
    }
    const job = await this.api.jobStatus(sessionId);
    this.update({
      sessionId,
      currentRound: info.current_round,
      datasetLoaded: info.dataset_loaded,
      labelNames: labels ? labels.label_names : [],
      roundSelector: info.current_round,
      job,
    });
    return this.current;
  }
}
