import { beforeEach, describe, expect, it } from "vitest";

import { GateApi } from "../src/api.js";
import type { AnnotationJson } from "../src/api.js";
import { Console } from "../src/app.js";

const SARAH = "Sarah savored the soup.";

/** In-memory gateway with golden-pipeline semantics, served through fetch. */
class FakeGateway {
  ran = new Set<string>();
  annotations: AnnotationJson[] = [];
  runCalls: string[] = [];
  private nextId = 1;

  private state(id: string): "green" | "amber" | "red" {
    if (this.ran.has(id)) return "red";
    if (id === "tokenizer-0.1") return "green";
    return this.ran.has("tokenizer-0.1") ? "green" : "amber";
  }

  private modules() {
    const entries = [
      {
        id: "tokenizer-0.1",
        name: "tokenizer",
        version: "0.1",
        preconditions: [],
        results: ["tokens"],
        coupling: "tight",
        viewer_hint: { type: "token", color: "#f2c74c" },
      },
      {
        id: "sentencer-0.1",
        name: "sentencer",
        version: "0.1",
        preconditions: ["tokenizer-* tokens"],
        results: ["sentences"],
        coupling: "tight",
        viewer_hint: { type: "sentence", color: "#a9c9f5" },
      },
      {
        id: "gazetteer-0.1",
        name: "gazetteer",
        version: "0.1",
        preconditions: ["tokenizer-* tokens"],
        results: ["names"],
        coupling: "tight",
        viewer_hint: { type: "name", color: "#8fe3a1" },
      },
    ];
    return entries;
  }

  private statesPayload() {
    return {
      doc_id: "sarah",
      states: Object.fromEntries(this.modules().map((m) => [m.id, this.state(m.id)])),
      edges: [
        ["tokenizer-0.1", "sentencer-0.1"],
        ["tokenizer-0.1", "gazetteer-0.1"],
      ],
      modules: this.modules().map((m) => ({
        ...m,
        state: this.state(m.id),
        unmet:
          this.state(m.id) === "amber"
            ? [{ pattern: "tokenizer-* tokens", candidates: ["tokenizer-0.1"] }]
            : [],
      })),
    };
  }

  private run(moduleId: string) {
    this.runCalls.push(moduleId);
    if (this.state(moduleId) === "amber") {
      return new Response(
        JSON.stringify({
          error: {
            code: "PRECONDITION_UNSATISFIED",
            message: "unmet preconditions",
            detail: { unmet: ["tokenizer-* tokens"] },
          },
        }),
        { status: 409 },
      );
    }
    this.ran.add(moduleId);
    let added = 0;
    if (moduleId === "tokenizer-0.1") {
      const spans: [number, number][] = [
        [0, 5],
        [6, 13],
        [14, 17],
        [18, 22],
        [22, 23],
      ];
      for (const span of spans) {
        this.annotations.push({
          id: this.nextId++,
          type: "token",
          spans: [span],
          attributes: {},
          producer: "tokenizer-0.1",
        });
        added++;
      }
    } else if (moduleId === "gazetteer-0.1") {
      this.annotations.push({
        id: this.nextId++,
        type: "name",
        spans: [[0, 5]],
        attributes: { name_type: "person" },
        producer: "gazetteer-0.1",
      });
      added++;
    } else if (moduleId === "sentencer-0.1") {
      this.annotations.push({
        id: this.nextId++,
        type: "sentence",
        spans: [[0, 23]],
        attributes: {},
        producer: "sentencer-0.1",
      });
      added++;
    }
    return new Response(
      JSON.stringify({
        module: moduleId,
        doc_id: "sarah",
        annotations_added: added,
        attributes_set: 0,
        labels_recorded: ["x"],
        duration_ms: 1,
        log: "",
      }),
      { status: 200 },
    );
  }

  fetch = async (input: string, init?: RequestInit): Promise<Response> => {
    const url = new URL(input, "http://fake");
    const path = url.pathname;
    const method = init?.method ?? "GET";
    const ok = (payload: unknown) => new Response(JSON.stringify(payload), { status: 200 });
    if (path === "/collections" && method === "GET") return ok(["c1"]);
    if (path === "/collections/c1/documents" && method === "GET") return ok(["sarah"]);
    if (path === "/collections/c1/documents/sarah/states") return ok(this.statesPayload());
    if (path === "/modules") return ok(this.modules());
    if (path === "/collections/c1/documents/sarah/text") {
      return new Response(new TextEncoder().encode(SARAH), { status: 200 });
    }
    if (path === "/collections/c1/documents/sarah/annotations") {
      const producer = url.searchParams.get("producer");
      const type = url.searchParams.get("type");
      let found = this.annotations;
      if (producer) found = found.filter((a) => a.producer === producer);
      if (type) found = found.filter((a) => a.type === type);
      return ok(found);
    }
    const run = path.match(/^\/collections\/c1\/documents\/sarah\/run\/(.+)$/);
    if (run && method === "POST") return this.run(decodeURIComponent(run[1]));
    return new Response(
      JSON.stringify({ error: { code: "NOT_FOUND", message: path, detail: null } }),
      { status: 404 },
    );
  };
}

async function waitFor(check: () => boolean, timeoutMs = 3000) {
  const start = Date.now();
  while (!check()) {
    if (Date.now() - start > timeoutMs) throw new Error("timed out waiting for condition");
    await new Promise((resolve) => setTimeout(resolve, 10));
  }
}

function moduleButton(root: HTMLElement, id: string): HTMLButtonElement {
  const button = root.querySelector(`[data-module="${id}"]`);
  if (!button) throw new Error(`no button for ${id}`);
  return button as HTMLButtonElement;
}

describe("console click semantics", () => {
  let gateway: FakeGateway;
  let root: HTMLElement;
  let ui: Console;

  beforeEach(async () => {
    gateway = new FakeGateway();
    root = document.createElement("div");
    document.body.appendChild(root);
    ui = new Console(root, new GateApi("", gateway.fetch));
    await ui.init();
  });

  it("shows tokenizer green and sentencer amber on a fresh document", () => {
    expect(moduleButton(root, "tokenizer-0.1").dataset.state).toBe("green");
    expect(moduleButton(root, "sentencer-0.1").dataset.state).toBe("amber");
  });

  it("clicking green runs the module and refreshes to red/green", async () => {
    moduleButton(root, "tokenizer-0.1").click();
    await waitFor(() => moduleButton(root, "tokenizer-0.1").dataset.state === "red");
    expect(gateway.runCalls).toEqual(["tokenizer-0.1"]);
    expect(moduleButton(root, "sentencer-0.1").dataset.state).toBe("green");
  });

  it("clicking amber opens a menu of satisfying modules; selection runs it", async () => {
    moduleButton(root, "sentencer-0.1").click();
    const menu = ui.q("menu");
    await waitFor(() => !menu.classList.contains("hidden"));
    const items = [...menu.querySelectorAll(".menu-item")].map((b) => b.textContent);
    expect(items).toEqual(["run tokenizer-0.1 (satisfies tokenizer-* tokens)"]);
    (menu.querySelector(".menu-item") as HTMLButtonElement).click();
    await waitFor(() => moduleButton(root, "tokenizer-0.1").dataset.state === "red");
    expect(gateway.runCalls).toEqual(["tokenizer-0.1"]);
  });

  it("clicking red opens a result menu leading to the filtered viewer", async () => {
    await ui.runAndRefresh("tokenizer-0.1");
    moduleButton(root, "tokenizer-0.1").click();
    const menu = ui.q("menu");
    await waitFor(() => !menu.classList.contains("hidden"));
    const items = [...menu.querySelectorAll(".menu-item")].map((b) => b.textContent);
    expect(items).toContain("view tokens");
    const viewItem = [...menu.querySelectorAll(".menu-item")].find(
      (b) => b.textContent === "view tokens",
    ) as HTMLButtonElement;
    viewItem.click();
    await waitFor(() => !ui.q("viewer").classList.contains("hidden"));
    expect(ui.q("viewer").dataset.highlightCount).toBe("5");
    const legendTypes = [...ui.q("legend").children].map(
      (chip) => (chip as HTMLElement).dataset.type,
    );
    expect(legendTypes).toEqual(["token"]);
  });

  it("renders the golden document with 7 highlights and a 3-entry legend", async () => {
    for (const id of ["tokenizer-0.1", "gazetteer-0.1", "sentencer-0.1"]) {
      await ui.runAndRefresh(id);
    }
    await ui.openViewer({});
    expect(ui.q("viewer").dataset.highlightCount).toBe("7");
    const legendTypes = [...ui.q("legend").children].map(
      (chip) => (chip as HTMLElement).dataset.type,
    );
    expect(legendTypes).toEqual(["token", "name", "sentence"]);
  });

  it("disables buttons while a run is pending", async () => {
    const promise = ui.runAndRefresh("tokenizer-0.1");
    expect(ui.pending).toBe(true);
    await promise;
    expect(ui.pending).toBe(false);
    expect(moduleButton(root, "tokenizer-0.1").disabled).toBe(false);
  });

  it("surfaces run failures in a modal", async () => {
    await ui.runAndRefresh("sentencer-0.1"); // amber server-side -> 409
    expect(ui.q("modal").classList.contains("hidden")).toBe(false);
    expect(ui.q("modal-title").textContent).toContain("PRECONDITION_UNSATISFIED");
  });

  it("nested name highlight sits above the sentence underlay", async () => {
    for (const id of ["tokenizer-0.1", "gazetteer-0.1", "sentencer-0.1"]) {
      await ui.runAndRefresh(id);
    }
    await ui.openViewer({});
    const segment = [...ui.q("text").querySelectorAll("span")].find((s) =>
      s.dataset.annotations?.split(",").includes("6"),
    ) as HTMLElement;
    // innermost (name) paints the background; outer spans underlay as stripes
    expect(segment.style.backgroundColor).not.toBe("");
    expect(segment.style.boxShadow).toContain("inset");
    expect(segment.title).toContain("name #6 name_type=person");
    expect(segment.title).toContain("sentence #7");
  });
});
