/** Annotation viewer model: color-keyed span highlights over document text.
 *
 * Annotation offsets are byte offsets into the raw content; the text is
 * segmented on byte boundaries first and each segment is decoded on its
 * own, so multi-byte characters inside one segment render correctly.
 */

import type { AnnotationJson, ViewerHint } from "./api.js";

export interface TypeDeclaration {
  type: string;
  color: string;
}

export interface Highlight {
  annotationId: number;
  type: string;
  span: [number, number];
  color: string;
  summary: string;
}

export interface Segment {
  start: number;
  end: number;
  text: string;
  /** covering annotations, outermost first */
  covering: AnnotationJson[];
}

export interface LegendEntry {
  type: string;
  color: string;
}

export interface AnnotationView {
  segments: Segment[];
  highlights: Highlight[];
  legend: LegendEntry[];
}

const FALLBACK_PALETTE = [
  "#ffd8a8",
  "#b2f2bb",
  "#a5d8ff",
  "#fcc2d7",
  "#e5dbff",
  "#c3fae8",
  "#ffec99",
];

export function colorTable(
  hints: (ViewerHint | null)[],
  types: string[],
): Map<string, string> {
  const table = new Map<string, string>();
  for (const hint of hints) {
    if (hint && !table.has(hint.type)) table.set(hint.type, hint.color);
  }
  let next = 0;
  for (const type of types) {
    if (!table.has(type)) {
      table.set(type, FALLBACK_PALETTE[next % FALLBACK_PALETTE.length]);
      next += 1;
    }
  }
  return table;
}

export function attributeSummary(ann: AnnotationJson): string {
  const pairs = Object.entries(ann.attributes).map(([k, v]) => `${k}=${v}`);
  const attrs = pairs.length ? ` ${pairs.join(" ")}` : "";
  return `${ann.type} #${ann.id}${attrs}`;
}

export function buildAnnotationView(
  content: Uint8Array,
  annotations: AnnotationJson[],
  declarations: TypeDeclaration[],
): AnnotationView {
  const colors = new Map(declarations.map((d) => [d.type, d.color]));
  const fallback = colorTable(
    [],
    annotations.map((a) => a.type),
  );
  const colorOf = (type: string) => colors.get(type) ?? fallback.get(type) ?? "#dddddd";

  const visible: AnnotationJson[] = [];
  for (const ann of annotations) {
    const inBounds = ann.spans.every(([s, e]) => s >= 0 && s <= e && e <= content.length);
    if (!inBounds) {
      console.warn(`annotation ${ann.id} has out-of-bounds spans; skipped`);
      continue;
    }
    visible.push(ann);
  }

  const highlights: Highlight[] = [];
  for (const ann of visible) {
    for (const span of ann.spans) {
      highlights.push({
        annotationId: ann.id,
        type: ann.type,
        span,
        color: colorOf(ann.type),
        summary: attributeSummary(ann),
      });
    }
  }

  // legend: every visible type, in first-appearance document order
  const ordered = [...visible].sort(
    (a, b) => a.spans[0][0] - b.spans[0][0] || a.id - b.id,
  );
  const legend: LegendEntry[] = [];
  const seen = new Set<string>();
  for (const ann of ordered) {
    if (!seen.has(ann.type)) {
      seen.add(ann.type);
      legend.push({ type: ann.type, color: colorOf(ann.type) });
    }
  }

  // segment the byte range at every span boundary
  const boundaries = new Set<number>([0, content.length]);
  for (const ann of visible) {
    for (const [s, e] of ann.spans) {
      boundaries.add(s);
      boundaries.add(e);
    }
  }
  const cuts = [...boundaries].sort((a, b) => a - b);
  const decoder = new TextDecoder("utf-8", { fatal: false });
  const segments: Segment[] = [];
  for (let i = 0; i + 1 < cuts.length; i++) {
    const start = cuts[i];
    const end = cuts[i + 1];
    const covering = visible.filter((ann) =>
      ann.spans.some(([s, e]) => s <= start && end <= e && s < e),
    );
    // outermost (longest span) first; ties by id ascending
    covering.sort((a, b) => {
      const lengthOf = (ann: AnnotationJson) =>
        Math.max(...ann.spans.map(([s, e]) => e - s));
      return lengthOf(b) - lengthOf(a) || a.id - b.id;
    });
    segments.push({
      start,
      end,
      text: decoder.decode(content.slice(start, end)),
      covering,
    });
  }
  if (cuts.length === 1) {
    segments.push({ start: 0, end: 0, text: "", covering: [] });
  }
  return { segments, highlights, legend };
}
