// Polygon editor geometry. Vertices are committed in normalized image
// coordinates [0,1]^2 regardless of the viewport's zoom and pan, so the
// payload sent to the service is resolution independent.

export interface Viewport {
  width: number;   // displayed size in CSS pixels
  height: number;
  zoom: number;    // 1 = fit; >1 magnified
  panX: number;    // normalized offset of the visible window's top-left
  panY: number;
}

export type Vertex = [number, number];

export function displayToNormalized(px: number, py: number, view: Viewport): Vertex {
  const x = view.panX + px / (view.width * view.zoom);
  const y = view.panY + py / (view.height * view.zoom);
  return [clamp01(x), clamp01(y)];
}

function clamp01(v: number): number {
  return Math.min(1, Math.max(0, v));
}

export class PolygonEditor {
  private current: Vertex[] = [];
  private committed: Vertex[][] = [];

  constructor(private view: Viewport) {}

  setViewport(view: Viewport): void {
    this.view = view;
  }

  // single click adds a vertex at the clicked display position
  addPoint(px: number, py: number): Vertex {
    const vertex = displayToNormalized(px, py, this.view);
    this.current.push(vertex);
    return vertex;
  }

  get inProgress(): Vertex[] {
    return [...this.current];
  }

  // double click closes the ring; polygons need at least 3 vertices
  close(): Vertex[] | null {
    if (this.current.length < 3) {
      return null;
    }
    const done = this.current;
    this.committed.push(done);
    this.current = [];
    return [...done];
  }

  discard(): void {
    this.current = [];
  }

  get polygons(): Vertex[][] {
    return this.committed.map((ring) => ring.map((v) => [...v] as Vertex));
  }

  get hasPendingVertices(): boolean {
    return this.current.length > 0;
  }

  reset(): void {
    this.current = [];
    this.committed = [];
  }
}
