"""Expert polygon annotations: validation, rasterization, persistence,
and the reverse direction of tracing an accepted heatmap back into polygons.

Coordinates are normalized to the unit square, x rightward and y downward,
matching image row/column order. Masks are soft on boundaries: coverage is
sampled on a supersampled grid and area-averaged, so cells straddling an
edge get fractional values.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import DegenerateHeatmapError

# 16x sampling bounds the worst-case per-cell coverage error at 1/32, so
# two rasterizations (one pooled from twice the resolution) stay within the
# documented 0.05 per-cell consistency budget; 4x-8x quantize too coarsely
SUPERSAMPLE = 16


@dataclass
class Polygon:
    vertices: np.ndarray  # (n, 2) array of (x, y) in [0,1]^2
    self_intersecting: bool = False

    def __len__(self) -> int:
        return len(self.vertices)


def _segments_properly_intersect(p1, p2, p3, p4) -> bool:
    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        return 0 if abs(v) < 1e-12 else (1 if v > 0 else -1)

    o1, o2 = orient(p1, p2, p3), orient(p1, p2, p4)
    o3, o4 = orient(p3, p4, p1), orient(p3, p4, p2)
    return o1 != o2 and o3 != o4 and 0 not in (o1, o2, o3, o4)


def validate_polygon(vertices) -> Polygon:
    """Check vertex count and bounds; the ring closes implicitly.

    Self-intersection is allowed (freehand drawing) but flagged.
    """
    verts = np.asarray(vertices, dtype=float)
    if verts.ndim != 2 or verts.shape[1] != 2:
        raise ValueError("vertices must be a sequence of (x, y) pairs")
    if len(verts) < 3:
        raise ValueError(f"a polygon needs at least 3 vertices, got {len(verts)}")
    if (verts < 0).any() or (verts > 1).any():
        bad = verts[((verts < 0) | (verts > 1)).any(axis=1)][0]
        raise ValueError(f"vertex ({bad[0]:g}, {bad[1]:g}) outside the unit square")

    n = len(verts)
    edges = [(verts[i], verts[(i + 1) % n]) for i in range(n)]
    crossing = False
    for i in range(n):
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue  # adjacent through the closing edge
            if _segments_properly_intersect(*edges[i], *edges[j]):
                crossing = True
                break
        if crossing:
            break
    return Polygon(vertices=verts, self_intersecting=crossing)


@dataclass
class PolygonAnnotation:
    image_id: str
    label_index: int
    polygons: list[Polygon]
    note: str = ""
    round_index: int = 0
    accepted_from_heatmap: bool = False

    @classmethod
    def from_vertex_lists(cls, image_id: str, label_index: int, vertex_lists,
                          note: str = "", round_index: int = 0,
                          accepted_from_heatmap: bool = False) -> "PolygonAnnotation":
        return cls(
            image_id=image_id,
            label_index=label_index,
            polygons=[validate_polygon(v) for v in vertex_lists],
            note=note,
            round_index=round_index,
            accepted_from_heatmap=accepted_from_heatmap,
        )

    def to_dict(self) -> dict:
        return {
            "image_id": self.image_id,
            "label_index": self.label_index,
            "round": self.round_index,
            "accepted_from_heatmap": self.accepted_from_heatmap,
            "note": self.note,
            "polygons": [p.vertices.tolist() for p in self.polygons],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "PolygonAnnotation":
        return cls.from_vertex_lists(
            image_id=doc["image_id"],
            label_index=doc["label_index"],
            vertex_lists=doc["polygons"],
            note=doc.get("note", ""),
            round_index=doc.get("round", 0),
            accepted_from_heatmap=doc.get("accepted_from_heatmap", False),
        )


def save_annotation(annotation: PolygonAnnotation, path: str | Path) -> None:
    Path(path).write_text(json.dumps(annotation.to_dict(), indent=1), encoding="utf-8")


def load_annotation(path: str | Path) -> PolygonAnnotation:
    return PolygonAnnotation.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass
class AttentionMask:
    mask: np.ndarray  # (H, W) in [0, 1]
    source: PolygonAnnotation | None = None
    empty: bool = field(default=False)

    def __post_init__(self):
        self.mask = np.asarray(self.mask, dtype=np.float64)
        self.empty = bool(self.mask.sum() == 0)


def _points_in_polygon(px: np.ndarray, py: np.ndarray, verts: np.ndarray) -> np.ndarray:
    """Even-odd ray-casting test, vectorized over the query points."""
    inside = np.zeros(px.shape, dtype=bool)
    n = len(verts)
    for i in range(n):
        x1, y1 = verts[i]
        x2, y2 = verts[(i + 1) % n]
        crosses = (y1 > py) != (y2 > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            x_at = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
        inside ^= crosses & (px < x_at)
    return inside


def rasterize(annotation: PolygonAnnotation, resolution: int | tuple[int, int],
              supersample: int = SUPERSAMPLE) -> AttentionMask:
    """Area-coverage mask of the annotation's polygon union.

    Inside/outside is decided per polygon by the even-odd rule at a
    ``supersample``-times finer grid, unioned across polygons, then averaged
    back down to ``resolution``.
    """
    if isinstance(resolution, int):
        h = w = resolution
    else:
        h, w = resolution
    s = supersample
    ys = (np.arange(h * s) + 0.5) / (h * s)
    xs = (np.arange(w * s) + 0.5) / (w * s)
    px, py = np.meshgrid(xs, ys)

    covered = np.zeros((h * s, w * s), dtype=bool)
    for poly in annotation.polygons:
        covered |= _points_in_polygon(px, py, poly.vertices)

    mask = covered.reshape(h, s, w, s).mean(axis=(1, 3))
    return AttentionMask(mask=mask, source=annotation)


def _trace_component(cells: np.ndarray) -> np.ndarray:
    """Boundary of a 4-connected cell set as an (x, y) grid-corner polygon.

    Boundary edges are directed with the interior on the walker's right
    (screen coordinates, y down). At pinch corners two outgoing edges exist;
    taking the right-most turn hugs the interior, which folds corner-touching
    hole boundaries into one self-touching loop that even-odd filling
    reproduces. Free-standing hole loops are dropped (holes get filled).
    """
    h, w = cells.shape
    padded = np.zeros((h + 2, w + 2), dtype=bool)
    padded[1:-1, 1:-1] = cells
    edges: dict[tuple[int, int], list[tuple[int, int]]] = {}
    rs, cs = np.nonzero(cells)
    for r, c in zip(rs.tolist(), cs.tolist()):
        if not padded[r, c + 1]:       # top neighbor empty: walk east
            edges.setdefault((c, r), []).append((c + 1, r))
        if not padded[r + 1, c + 2]:   # right neighbor empty: walk south
            edges.setdefault((c + 1, r), []).append((c + 1, r + 1))
        if not padded[r + 2, c + 1]:   # bottom neighbor empty: walk west
            edges.setdefault((c + 1, r + 1), []).append((c, r + 1))
        if not padded[r + 1, c]:       # left neighbor empty: walk north
            edges.setdefault((c, r + 1), []).append((c, r))

    def take(cur, incoming):
        outs = edges[cur]
        if len(outs) == 1 or incoming is None:
            nxt = outs.pop(0)
        else:
            # right-most turn: largest cross product of incoming x outgoing
            def cross(out):
                dx, dy = out[0] - cur[0], out[1] - cur[1]
                return incoming[0] * dy - incoming[1] * dx
            nxt = max(outs, key=cross)
            outs.remove(nxt)
        if not outs:
            del edges[cur]
        return nxt

    loops = []
    while edges:
        start = next(iter(edges))
        loop = [start]
        cur = take(start, None)
        while cur != start:
            loop.append(cur)
            prev = loop[-2]
            cur = take(cur, (cur[0] - prev[0], cur[1] - prev[1]))
        loops.append(loop)

    def loop_area(loop):
        pts = np.array(loop + [loop[0]], dtype=float)
        return abs(np.sum(pts[:-1, 0] * pts[1:, 1] - pts[1:, 0] * pts[:-1, 1]) / 2)

    outer = max(loops, key=loop_area)

    # drop collinear runs (straight edges along many cells)
    simplified = []
    n = len(outer)
    for i in range(n):
        prev, cur, nxt = outer[i - 1], outer[i], outer[(i + 1) % n]
        d1 = (cur[0] - prev[0], cur[1] - prev[1])
        d2 = (nxt[0] - cur[0], nxt[1] - cur[1])
        if d1[0] * d2[1] != d1[1] * d2[0]:
            simplified.append(cur)
    return np.array(simplified, dtype=float)


def heatmap_to_polygons(heatmap, threshold: float = 0.5, *, image_id: str = "",
                        round_index: int = 0) -> PolygonAnnotation:
    """Trace the joined boundary of {values >= threshold} into polygons.

    One polygon per 4-connected component. Raises when the heatmap is
    degenerate or nothing clears the threshold, since there is no region to
    accept; the expert must annotate manually.
    """
    if not 0 < threshold < 1:
        raise ValueError("threshold must be in (0, 1)")
    label_index = 0
    values = heatmap
    if hasattr(heatmap, "values"):
        if getattr(heatmap, "degenerate", False):
            raise DegenerateHeatmapError(
                "constant heatmap has no region to accept; annotate manually"
            )
        values = heatmap.values
        label_index = getattr(heatmap, "label_index", 0)
        image_id = image_id or getattr(heatmap, "image_id", "")
        round_index = round_index or getattr(heatmap, "round_index", 0)
    values = np.asarray(values, dtype=float)
    binary = values >= threshold
    if not binary.any():
        raise DegenerateHeatmapError(
            f"no heatmap cell reaches threshold {threshold}; annotate manually"
        )

    h, w = binary.shape
    labeled, n_comp = ndimage.label(binary, structure=[[0, 1, 0], [1, 1, 1], [0, 1, 0]])
    polygons = []
    for comp in range(1, n_comp + 1):
        corners = _trace_component(labeled == comp)
        corners[:, 0] /= w
        corners[:, 1] /= h
        polygons.append(validate_polygon(corners))

    return PolygonAnnotation(
        image_id=image_id,
        label_index=label_index,
        polygons=polygons,
        round_index=round_index,
        accepted_from_heatmap=True,
    )
