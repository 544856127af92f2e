/** Single-page console: collection/document browser, module-graph canvas
 * with click-to-run buttons, chain highlighting, and the annotation viewer.
 *
 * All module states come from the server's /states response; after every
 * run the canvas re-renders from a fresh payload.  At most one run is in
 * flight per open document; buttons are disabled while it lasts.
 */

import { ApiError, GateApi } from "./api.js";
import type { StatesModuleEntry, StatesPayload } from "./api.js";
import { layoutGraph } from "./graph.js";
import type { GraphViewModel } from "./graph.js";
import { buildAnnotationView } from "./annview.js";
import type { TypeDeclaration } from "./annview.js";

interface MenuItem {
  label: string;
  action: () => void | Promise<void>;
}

export class Console {
  readonly api: GateApi;
  readonly root: HTMLElement;
  collection: string | null = null;
  docId: string | null = null;
  chain: string[] = [];
  pending = false;
  lastStates: StatesPayload | null = null;
  lastGraph: GraphViewModel | null = null;

  private readonly doc: Document;

  constructor(root: HTMLElement, api: GateApi) {
    this.root = root;
    this.api = api;
    this.doc = root.ownerDocument;
    this.buildSkeleton();
  }

  // -- static skeleton --

  private buildSkeleton() {
    this.root.innerHTML = `
      <header class="toolbar">
        <label>collection <select data-testid="collection-select"></select></label>
        <button data-testid="new-collection">new collection</button>
        <label>document <select data-testid="document-select"></select></label>
        <button data-testid="add-document">add document</button>
        <button data-testid="refresh">refresh</button>
        <label>chain <input data-testid="chain-input" size="42"
          placeholder="tokenizer-0.1,tagger-0.1,..."></label>
        <button data-testid="highlight-chain">highlight</button>
        <button data-testid="run-chain">run chain</button>
        <button data-testid="view-annotations">view annotations</button>
      </header>
      <div class="canvas-wrap">
        <svg data-testid="arcs" class="arcs"></svg>
        <div data-testid="canvas" class="canvas"></div>
        <p data-testid="canvas-hint" class="hint hidden"></p>
      </div>
      <div data-testid="menu" class="popup hidden"></div>
      <section data-testid="viewer" class="viewer hidden">
        <div data-testid="legend" class="legend"></div>
        <pre data-testid="text" class="doc-text"></pre>
      </section>
      <div data-testid="modal" class="modal hidden">
        <h3 data-testid="modal-title"></h3>
        <pre data-testid="modal-body"></pre>
        <button data-testid="modal-close">close</button>
      </div>
      <p data-testid="status" class="status"></p>
    `;
    this.q("modal-close").addEventListener("click", () => this.hide("modal"));
    this.q("refresh").addEventListener("click", () => void this.refresh());
    this.q("highlight-chain").addEventListener("click", () => {
      this.chain = this.chainInput();
      this.renderGraph();
    });
    this.q("run-chain").addEventListener("click", () => void this.runChainFromInput());
    this.q("view-annotations").addEventListener("click", () => void this.openViewer({}));
    this.q("collection-select").addEventListener("change", () => {
      const value = (this.q("collection-select") as HTMLSelectElement).value;
      void this.openCollection(value);
    });
    this.q("document-select").addEventListener("change", () => {
      const value = (this.q("document-select") as HTMLSelectElement).value;
      void this.openDocument(value);
    });
    this.q("new-collection").addEventListener("click", () => void this.createCollectionPrompt());
    this.q("add-document").addEventListener("click", () => void this.addDocumentPrompt());
  }

  q(testId: string): HTMLElement {
    const found = this.root.querySelector(`[data-testid="${testId}"]`);
    if (!found) throw new Error(`missing element ${testId}`);
    return found as HTMLElement;
  }

  private hide(testId: string) {
    this.q(testId).classList.add("hidden");
  }

  private show(testId: string) {
    this.q(testId).classList.remove("hidden");
  }

  private status(message: string) {
    this.q("status").textContent = message;
  }

  // -- browser --

  async init() {
    const names = await this.api.listCollections();
    const select = this.q("collection-select") as HTMLSelectElement;
    select.innerHTML = "";
    for (const name of names) {
      const option = this.doc.createElement("option");
      option.value = name;
      option.textContent = name;
      select.appendChild(option);
    }
    if (names.length) {
      select.value = names[0];
      await this.openCollection(names[0]);
    } else {
      this.canvasHint("create a collection to begin");
    }
  }

  async openCollection(name: string) {
    this.collection = name;
    const docs = await this.api.listDocuments(name);
    const select = this.q("document-select") as HTMLSelectElement;
    select.innerHTML = "";
    for (const docId of docs) {
      const option = this.doc.createElement("option");
      option.value = docId;
      option.textContent = docId;
      select.appendChild(option);
    }
    if (docs.length) {
      select.value = docs[0];
      await this.openDocument(docs[0]);
    } else {
      this.docId = null;
      this.lastStates = null;
      this.renderGraph();
      this.canvasHint("add a document to this collection");
    }
  }

  async openDocument(docId: string) {
    this.docId = docId;
    this.hide("viewer");
    await this.refresh();
  }

  async refresh() {
    if (!this.collection || !this.docId) return;
    this.lastStates = await this.api.states(this.collection, this.docId);
    this.renderGraph();
  }

  private async createCollectionPrompt() {
    const name = this.promptText("collection name");
    if (!name) return;
    await this.api.createCollection(name);
    await this.init();
    (this.q("collection-select") as HTMLSelectElement).value = name;
    await this.openCollection(name);
  }

  private async addDocumentPrompt() {
    if (!this.collection) return;
    const docId = this.promptText("document id");
    if (!docId) return;
    const content = this.promptText("content") ?? "";
    await this.api.uploadDocument(this.collection, docId, content);
    await this.openCollection(this.collection);
    (this.q("document-select") as HTMLSelectElement).value = docId;
    await this.openDocument(docId);
  }

  /** Overridable prompt hook (window.prompt is unavailable in tests). */
  promptText(label: string): string | null {
    const w = this.doc.defaultView as (Window & typeof globalThis) | null;
    return w && typeof w.prompt === "function" ? w.prompt(label) : null;
  }

  // -- graph --

  private canvasHint(message: string | null) {
    const hint = this.q("canvas-hint");
    if (message) {
      hint.textContent = message;
      hint.classList.remove("hidden");
    } else {
      hint.classList.add("hidden");
    }
  }

  private chainInput(): string[] {
    const raw = (this.q("chain-input") as HTMLInputElement).value;
    return raw
      .split(",")
      .map((s) => s.trim())
      .filter((s) => s.length > 0);
  }

  renderGraph() {
    const canvas = this.q("canvas");
    const arcs = this.q("arcs");
    canvas.innerHTML = "";
    arcs.innerHTML = "";
    if (!this.lastStates) {
      this.lastGraph = null;
      return;
    }
    if (this.lastStates.modules.length === 0) {
      this.canvasHint("no modules registered");
      this.lastGraph = null;
      return;
    }
    this.canvasHint(null);
    const graph = layoutGraph(this.lastStates, this.chain);
    this.lastGraph = graph;
    arcs.setAttribute("width", String(graph.width));
    arcs.setAttribute("height", String(graph.height));
    const byId = new Map(graph.nodes.map((n) => [n.id, n]));
    const svgNs = "http://www.w3.org/2000/svg";
    for (const edge of graph.edges) {
      const from = byId.get(edge.from);
      const to = byId.get(edge.to);
      if (!from || !to) continue;
      const line = this.doc.createElementNS(svgNs, "line");
      line.setAttribute("x1", String(from.x + 70));
      line.setAttribute("y1", String(from.y + 20));
      line.setAttribute("x2", String(to.x));
      line.setAttribute("y2", String(to.y + 20));
      line.setAttribute("class", edge.highlighted ? "arc highlighted" : "arc");
      line.setAttribute("data-edge", `${edge.from}->${edge.to}`);
      arcs.appendChild(line);
    }
    const states = this.lastStates;
    for (const node of graph.nodes) {
      const button = this.doc.createElement("button");
      button.className = `module-button state-${node.state}`;
      button.style.left = `${node.x}px`;
      button.style.top = `${node.y}px`;
      button.style.backgroundColor = node.color;
      button.textContent = node.label;
      button.dataset.module = node.id;
      button.dataset.state = node.state;
      button.disabled = this.pending;
      const entry = states.modules.find((m) => m.id === node.id)!;
      button.addEventListener("click", (event) => {
        void this.onModuleClick(entry, event.target as HTMLElement);
      });
      canvas.appendChild(button);
    }
  }

  // -- click semantics --

  async onModuleClick(module: StatesModuleEntry, anchor: HTMLElement) {
    if (this.pending) return;
    if (module.state === "green") {
      await this.runAndRefresh(module.id);
    } else if (module.state === "amber") {
      const items: MenuItem[] = [];
      for (const unmet of module.unmet) {
        for (const candidate of unmet.candidates) {
          items.push({
            label: `run ${candidate} (satisfies ${unmet.pattern})`,
            action: () => this.runAndRefresh(candidate),
          });
        }
        if (unmet.candidates.length === 0) {
          items.push({ label: `no registered module satisfies ${unmet.pattern}`, action: () => {} });
        }
      }
      this.openMenu(items, anchor);
    } else {
      const items: MenuItem[] = module.results.map((label) => ({
        label: `view ${label}`,
        action: () => this.openViewer({ producer: module.id }),
      }));
      items.push({ label: "re-run module", action: () => this.runAndRefresh(module.id) });
      this.openMenu(items, anchor);
    }
  }

  async runAndRefresh(moduleId: string) {
    if (!this.collection || !this.docId || this.pending) return;
    this.pending = true;
    this.renderGraph();
    try {
      const result = await this.api.runModule(this.collection, this.docId, moduleId);
      this.status(
        `${result.module}: +${result.annotations_added} annotations, ` +
          `${result.attributes_set} attributes (${result.duration_ms} ms)`,
      );
      if (result.log) this.showModal(`${moduleId} output`, result.log);
    } catch (error) {
      if (error instanceof ApiError) {
        const log =
          typeof error.detail === "object" && error.detail && "log" in error.detail
            ? String((error.detail as { log?: string }).log ?? "")
            : "";
        this.showModal(`${moduleId} failed [${error.code}]`, `${error.message}\n${log}`);
      } else {
        throw error;
      }
    } finally {
      this.pending = false;
      await this.refresh();
    }
  }

  async runChainFromInput() {
    if (!this.collection || !this.docId || this.pending) return;
    const chain = this.chainInput();
    if (chain.length === 0) return;
    this.chain = chain;
    this.pending = true;
    this.renderGraph();
    try {
      const results = await this.api.runChain(this.collection, this.docId, chain, chain[0]);
      this.status(`chain ran ${results.length} modules`);
    } catch (error) {
      if (error instanceof ApiError) {
        this.showModal(`chain failed [${error.code}]`, error.message);
      } else {
        throw error;
      }
    } finally {
      this.pending = false;
      await this.refresh();
    }
  }

  // -- menu and modal --

  openMenu(items: MenuItem[], anchor: HTMLElement) {
    const menu = this.q("menu");
    menu.innerHTML = "";
    for (const item of items) {
      const entry = this.doc.createElement("button");
      entry.className = "menu-item";
      entry.textContent = item.label;
      entry.addEventListener("click", () => {
        this.hide("menu");
        void item.action();
      });
      menu.appendChild(entry);
    }
    const rect = anchor.getBoundingClientRect
      ? anchor.getBoundingClientRect()
      : { left: 0, bottom: 0 };
    (menu as HTMLElement).style.left = `${rect.left}px`;
    (menu as HTMLElement).style.top = `${rect.bottom}px`;
    this.show("menu");
  }

  showModal(title: string, body: string) {
    this.q("modal-title").textContent = title;
    this.q("modal-body").textContent = body;
    this.show("modal");
  }

  // -- annotation viewer --

  async openViewer(selector: { type?: string; producer?: string }) {
    if (!this.collection || !this.docId) return;
    const [content, annotations, modules] = await Promise.all([
      this.api.documentText(this.collection, this.docId),
      this.api.annotations(this.collection, this.docId, selector),
      this.api.modules(),
    ]);
    const declarations: TypeDeclaration[] = [];
    for (const module of modules) {
      if (module.viewer_hint) {
        declarations.push({ type: module.viewer_hint.type, color: module.viewer_hint.color });
      }
    }
    const view = buildAnnotationView(content, annotations, declarations);

    const legend = this.q("legend");
    legend.innerHTML = "";
    for (const entry of view.legend) {
      const chip = this.doc.createElement("span");
      chip.className = "legend-entry";
      chip.textContent = entry.type;
      chip.style.backgroundColor = entry.color;
      chip.dataset.type = entry.type;
      legend.appendChild(chip);
    }

    const text = this.q("text");
    text.innerHTML = "";
    for (const segment of view.segments) {
      const span = this.doc.createElement("span");
      span.textContent = segment.text;
      if (segment.covering.length > 0) {
        const innermost = segment.covering[segment.covering.length - 1];
        const innerColor =
          view.highlights.find((h) => h.annotationId === innermost.id)?.color ?? "#dddddd";
        span.className = "annotated";
        span.style.backgroundColor = innerColor;
        // outer spans underlay as stacked bottom stripes
        const stripes = segment.covering
          .slice(0, -1)
          .map(
            (ann, index) =>
              `inset 0 -${3 * (index + 1)}px 0 0 ${
                view.highlights.find((h) => h.annotationId === ann.id)?.color ?? "#bbbbbb"
              }`,
          );
        if (stripes.length) span.style.boxShadow = stripes.join(", ");
        span.title = segment.covering
          .map((ann) => view.highlights.find((h) => h.annotationId === ann.id)?.summary ?? "")
          .join("\n");
        span.dataset.annotations = segment.covering.map((a) => a.id).join(",");
      }
      text.appendChild(span);
    }
    this.q("viewer").dataset.highlightCount = String(view.highlights.length);
    this.show("viewer");
  }
}

export function mountConsole(root: HTMLElement, api: GateApi): Console {
  return new Console(root, api);
}
