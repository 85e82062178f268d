"""Polygon annotations: validation, soft rasterization, and the accept-
heatmap path that traces a thresholded attention map back into polygons."""

import numpy as np

from camsteer import (
    PolygonAnnotation,
    heatmap_to_polygons,
    rasterize,
    validate_polygon,
)


def show(mask, title):
    print(title)
    for row in mask:
        print("   " + "".join(" .:-=+*#@"[min(8, int(v * 8.999))] for v in row))


def main():
    poly = validate_polygon([(0.15, 0.2), (0.8, 0.25), (0.7, 0.8), (0.25, 0.75)])
    print(f"validated polygon with {len(poly)} vertices "
          f"(self-intersecting: {poly.self_intersecting})")

    ann = PolygonAnnotation.from_vertex_lists("demo-img", 0,
                                              [[(0.15, 0.2), (0.8, 0.25), (0.7, 0.8), (0.25, 0.75)]],
                                              note="region of interest")
    mask = rasterize(ann, 16)
    show(mask.mask, "\nsoft coverage mask at 16x16 (boundary cells fractional):")

    binary = (mask.mask >= 0.5).astype(float)
    traced = heatmap_to_polygons(binary, 0.5, image_id="demo-img")
    print(f"\ntraced back into {len(traced.polygons)} polygon(s), "
          f"{len(traced.polygons[0])} vertices, accepted_from_heatmap={traced.accepted_from_heatmap}")

    back = rasterize(traced, 16)
    agree = np.mean((back.mask >= 0.5) == (mask.mask >= 0.5))
    print(f"round-trip cell agreement at 16x16: {agree:.3f}")


if __name__ == "__main__":
    main()
