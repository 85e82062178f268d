// Chord diagram layout for the label co-occurrence matrix: one arc per
// label sized by its total co-occurrence mass, one ribbon per label pair
// with a nonzero count (zero pairs are suppressed).

export interface Arc {
  label: string;
  index: number;
  startAngle: number;
  endAngle: number;
}

export interface Ribbon {
  source: number;
  target: number;
  weight: number;
  sourceStart: number;
  sourceEnd: number;
  targetStart: number;
  targetEnd: number;
}

export interface ChordLayout {
  arcs: Arc[];
  ribbons: Ribbon[];
}

const TAU = Math.PI * 2;

export function chordLayout(labels: string[], matrix: number[][], padding = 0.05): ChordLayout {
  const k = labels.length;
  const rowSums = matrix.map((row) => row.reduce((a, b) => a + b, 0));
  const total = rowSums.reduce((a, b) => a + b, 0);
  const arcs: Arc[] = [];
  const span = TAU - padding * k;

  let angle = 0;
  for (let i = 0; i < k; i++) {
    const size = total > 0 ? (rowSums[i] / total) * span : span / k;
    arcs.push({ label: labels[i], index: i, startAngle: angle, endAngle: angle + size });
    angle += size + padding;
  }

  const ribbons: Ribbon[] = [];
  const cursor = arcs.map((a) => a.startAngle);
  for (let i = 0; i < k; i++) {
    for (let j = i + 1; j < k; j++) {
      const weight = matrix[i][j];
      if (weight <= 0) {
        continue; // zero co-occurrence pairs draw nothing
      }
      const si = total > 0 ? (weight / total) * span : 0;
      const ribbon: Ribbon = {
        source: i,
        target: j,
        weight,
        sourceStart: cursor[i],
        sourceEnd: cursor[i] + si,
        targetStart: cursor[j],
        targetEnd: cursor[j] + si,
      };
      cursor[i] += si;
      cursor[j] += si;
      ribbons.push(ribbon);
    }
  }
  return { arcs, ribbons };
}

export function arcPath(arc: Arc, radius: number, thickness: number, cx: number, cy: number): string {
  const r0 = radius - thickness;
  const p = (r: number, a: number) => `${cx + r * Math.cos(a - Math.PI / 2)},${cy + r * Math.sin(a - Math.PI / 2)}`;
  const large = arc.endAngle - arc.startAngle > Math.PI ? 1 : 0;
  return [
    `M ${p(radius, arc.startAngle)}`,
    `A ${radius} ${radius} 0 ${large} 1 ${p(radius, arc.endAngle)}`,
    `L ${p(r0, arc.endAngle)}`,
    `A ${r0} ${r0} 0 ${large} 0 ${p(r0, arc.startAngle)}`,
    "Z",
  ].join(" ");
}

export function ribbonPath(ribbon: Ribbon, radius: number, cx: number, cy: number): string {
  const p = (a: number) => `${cx + radius * Math.cos(a - Math.PI / 2)},${cy + radius * Math.sin(a - Math.PI / 2)}`;
  return [
    `M ${p(ribbon.sourceStart)}`,
    `A ${radius} ${radius} 0 0 1 ${p(ribbon.sourceEnd)}`,
    `Q ${cx},${cy} ${p(ribbon.targetStart)}`,
    `A ${radius} ${radius} 0 0 1 ${p(ribbon.targetEnd)}`,
    `Q ${cx},${cy} ${p(ribbon.sourceStart)}`,
    "Z",
  ].join(" ");
}
