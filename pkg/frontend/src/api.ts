// Typed client for the workbench HTTP API. The UI owns no state the server
// does not also hold: every mutation goes through here.

export interface LabelStats {
  label_names: string[];
  counts: number[];
  proportions: number[];
}

export interface CoOccurrence {
  label_names: string[];
  matrix: number[][];
}

export interface RankedImage {
  image_id: string;
  rank: number;
  score: number;
  correct: boolean;
  annotated: boolean;
}

export interface RankedResponse {
  label_index: number;
  mode: string;
  round_index: number;
  images: RankedImage[];
}

export interface JobStatus {
  state: "idle" | "running" | "failed" | "done";
  kind: string | null;
  progress: number;
  message: string;
}

export interface HeatmapGrid {
  image_id: string;
  label_index: number;
  round_index: number;
  values: number[][];
  degenerate: boolean;
}

export interface MetricsRow {
  label_index: number;
  round_index: number;
  precision: number | null;
  recall: number | null;
  f1: number | null;
  auc: number | null;
  correct_count: number;
  incorrect_count: number;
}

export interface ComparisonRound {
  round_index: number;
  values: number[][];
  degenerate: boolean;
  probability: number;
  correct: boolean;
}

export interface SessionInfo {
  session_id: string;
  current_round: number | null;
  rounds: unknown[];
  dataset_loaded: boolean;
}

export interface TrainRequest {
  backbone?: string;
  batch_size: number;
  epochs: number;
  learning_rate?: number;
  seed?: number;
  augmentation?: boolean;
  request_id?: string;
}

export class ApiClient {
  constructor(private baseUrl: string = "") {}

  private async call<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await fetch(`${this.baseUrl}/api/v1${path}`, {
      method,
      headers: body === undefined ? undefined : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const payload = await response.json();
    if (!response.ok) {
      throw new Error(payload.error ?? `${method} ${path} failed (${response.status})`);
    }
    return payload as T;
  }

  createSession(requestId?: string): Promise<{ session_id: string }> {
    return this.call("POST", "/sessions", { request_id: requestId });
  }

  getSession(sid: string): Promise<SessionInfo> {
    return this.call("GET", `/sessions/${sid}`);
  }

  uploadDataset(sid: string, root: string, inputSize: number): Promise<unknown> {
    return this.call("POST", `/sessions/${sid}/dataset`, { root, input_size: inputSize });
  }

  labelStats(sid: string): Promise<LabelStats> {
    return this.call("GET", `/sessions/${sid}/label-stats`);
  }

  cooccurrence(sid: string): Promise<CoOccurrence> {
    return this.call("GET", `/sessions/${sid}/cooccurrence`);
  }

  startTraining(sid: string, request: TrainRequest): Promise<unknown> {
    return this.call("POST", `/sessions/${sid}/train`, request);
  }

  jobStatus(sid: string): Promise<JobStatus> {
    return this.call("GET", `/sessions/${sid}/job`);
  }

  rankedImages(sid: string, label: number, mode: string): Promise<RankedResponse> {
    return this.call("GET", `/sessions/${sid}/ranked-images?label=${label}&mode=${mode}`);
  }

  heatmap(sid: string, imageId: string, label: number, round?: number): Promise<HeatmapGrid> {
    const roundPart = round === undefined ? "" : `&round_index=${round}`;
    return this.call(
      "GET",
      `/sessions/${sid}/heatmap?image_id=${encodeURIComponent(imageId)}&label=${label}${roundPart}`,
    );
  }

  overlayUrl(sid: string, imageId: string, label: number, round?: number): string {
    const roundPart = round === undefined ? "" : `&round_index=${round}`;
    return `${this.baseUrl}/api/v1/sessions/${sid}/heatmap?image_id=${encodeURIComponent(imageId)}` +
      `&label=${label}&overlay=true${roundPart}`;
  }

  putAnnotation(sid: string, imageId: string, label: number, polygons: number[][][],
                note: string, requestId?: string): Promise<unknown> {
    return this.call("PUT", `/sessions/${sid}/annotations`, {
      image_id: imageId,
      label_index: label,
      polygons,
      note,
      request_id: requestId,
    });
  }

  acceptHeatmap(sid: string, imageId: string, label: number, requestId?: string): Promise<unknown> {
    return this.call("POST", `/sessions/${sid}/accept-heatmap`, {
      image_id: imageId,
      label_index: label,
      request_id: requestId,
    });
  }

  startFinetune(sid: string, epochs: number, requestId?: string): Promise<unknown> {
    return this.call("POST", `/sessions/${sid}/finetune`, { epochs, request_id: requestId });
  }

  history(sid: string, label: number): Promise<{ label_index: number; reports: MetricsRow[] }> {
    return this.call("GET", `/sessions/${sid}/history?label=${label}`);
  }

  comparison(sid: string, imageId: string, label: number):
      Promise<{ image_id: string; label_index: number; rounds: ComparisonRound[] }> {
    return this.call(
      "GET",
      `/sessions/${sid}/comparison?image_id=${encodeURIComponent(imageId)}&label=${label}`,
    );
  }
}
