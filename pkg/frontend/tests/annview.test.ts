import { describe, expect, it, vi } from "vitest";

import type { AnnotationJson } from "../src/api.js";
import { attributeSummary, buildAnnotationView } from "../src/annview.js";

const SARAH = new TextEncoder().encode("Sarah savored the soup.");

// the golden seven-row table over "Sarah savored the soup."
function goldenAnnotations(): AnnotationJson[] {
  const token = (id: number, s: number, e: number, pos?: string): AnnotationJson => ({
    id,
    type: "token",
    spans: [[s, e]],
    attributes: pos ? { pos } : {},
    producer: "tokenizer-0.1",
  });
  return [
    token(1, 0, 5, "NP"),
    token(2, 6, 13, "VBD"),
    token(3, 14, 17, "DT"),
    token(4, 18, 22, "NN"),
    token(5, 22, 23),
    { id: 6, type: "name", spans: [[0, 5]], attributes: { name_type: "person" }, producer: "gazetteer-0.1" },
    { id: 7, type: "sentence", spans: [[0, 23]], attributes: {}, producer: "sentencer-0.1" },
  ];
}

const DECLS = [
  { type: "token", color: "#f2c74c" },
  { type: "sentence", color: "#a9c9f5" },
  { type: "name", color: "#8fe3a1" },
];

describe("buildAnnotationView", () => {
  it("renders seven highlights and a three-entry legend for the golden table", () => {
    const view = buildAnnotationView(SARAH, goldenAnnotations(), DECLS);
    expect(view.highlights).toHaveLength(7);
    expect(view.legend).toHaveLength(3);
    expect(view.legend.map((l) => l.type)).toEqual(["token", "name", "sentence"]);
    expect(view.legend.find((l) => l.type === "name")!.color).toBe("#8fe3a1");
  });

  it("nests overlapping highlights outer-first per segment", () => {
    const view = buildAnnotationView(SARAH, goldenAnnotations(), DECLS);
    const first = view.segments.find((s) => s.start === 0 && s.end === 5)!;
    // sentence (0:23) is outermost, then token/name (0:5)
    expect(first.covering.map((a) => a.type)).toEqual(["sentence", "token", "name"]);
    const gap = view.segments.find((s) => s.start === 5 && s.end === 6)!;
    expect(gap.covering.map((a) => a.type)).toEqual(["sentence"]);
  });

  it("segment text reassembles the document", () => {
    const view = buildAnnotationView(SARAH, goldenAnnotations(), DECLS);
    expect(view.segments.map((s) => s.text).join("")).toBe("Sarah savored the soup.");
  });

  it("decodes multi-byte characters within segments", () => {
    const bytes = new TextEncoder().encode("café bar");
    const annotations: AnnotationJson[] = [
      { id: 1, type: "token", spans: [[0, 5]], attributes: {}, producer: "t-1" },
      { id: 2, type: "token", spans: [[6, 9]], attributes: {}, producer: "t-1" },
    ];
    const view = buildAnnotationView(bytes, annotations, DECLS);
    expect(view.segments.find((s) => s.start === 0)!.text).toBe("café");
  });

  it("skips out-of-bounds spans with a console warning", () => {
    const warn = vi.spyOn(console, "warn").mockImplementation(() => {});
    const annotations: AnnotationJson[] = [
      { id: 1, type: "token", spans: [[0, 99]], attributes: {}, producer: "t-1" },
      { id: 2, type: "token", spans: [[0, 5]], attributes: {}, producer: "t-1" },
    ];
    const view = buildAnnotationView(SARAH, annotations, DECLS);
    expect(view.highlights).toHaveLength(1);
    expect(warn).toHaveBeenCalledOnce();
    warn.mockRestore();
  });

  it("falls back to a palette color for undeclared types", () => {
    const annotations: AnnotationJson[] = [
      { id: 1, type: "mystery", spans: [[0, 5]], attributes: {}, producer: "m-1" },
    ];
    const view = buildAnnotationView(SARAH, annotations, []);
    expect(view.legend[0].color).toMatch(/^#/);
  });

  it("legend color always equals the highlight color of its type", () => {
    const view = buildAnnotationView(SARAH, goldenAnnotations(), DECLS);
    for (const entry of view.legend) {
      for (const highlight of view.highlights.filter((h) => h.type === entry.type)) {
        expect(highlight.color).toBe(entry.color);
      }
    }
  });

  it("summarizes attributes for hover", () => {
    expect(
      attributeSummary({
        id: 6,
        type: "name",
        spans: [[0, 5]],
        attributes: { name_type: "person" },
        producer: "g-1",
      }),
    ).toBe("name #6 name_type=person");
  });

  it("handles empty documents", () => {
    const view = buildAnnotationView(new Uint8Array(0), [], DECLS);
    expect(view.highlights).toHaveLength(0);
    expect(view.legend).toHaveLength(0);
    expect(view.segments.map((s) => s.text).join("")).toBe("");
  });
});
