/** Typed client for the gateway HTTP API. Only documented endpoints. */

export interface ViewerHint {
  type: string;
  color: string;
}

export interface ModuleEntry {
  id: string;
  name: string;
  version: string;
  preconditions: string[];
  results: string[];
  coupling: string;
  viewer_hint: ViewerHint | null;
}

export interface UnmetPrecondition {
  pattern: string;
  candidates: string[];
}

export type ModuleState = "green" | "amber" | "red";

export interface StatesModuleEntry extends ModuleEntry {
  state: ModuleState;
  unmet: UnmetPrecondition[];
}

export interface StatesPayload {
  doc_id: string;
  states: Record<string, ModuleState>;
  edges: [string, string][];
  modules: StatesModuleEntry[];
}

export interface AnnotationJson {
  id: number;
  type: string;
  spans: [number, number][];
  attributes: Record<string, string>;
  producer: string;
}

export interface RunResultJson {
  module: string;
  doc_id: string;
  annotations_added: number;
  attributes_set: number;
  labels_recorded: string[];
  duration_ms: number;
  log: string;
}

export interface ApiErrorBody {
  error: { code: string; message: string; detail: unknown };
}

export class ApiError extends Error {
  code: string;
  detail: unknown;
  status: number;

  constructor(status: number, body: ApiErrorBody["error"]) {
    super(body.message);
    this.status = status;
    this.code = body.code;
    this.detail = body.detail;
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class GateApi {
  constructor(
    private readonly base: string = "",
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request(path: string, init?: RequestInit): Promise<Response> {
    const response = await this.fetchImpl(this.base + path, init);
    if (!response.ok) {
      let body: ApiErrorBody | null = null;
      try {
        body = (await response.json()) as ApiErrorBody;
      } catch {
        body = null;
      }
      throw new ApiError(
        response.status,
        body?.error ?? { code: "HTTP_" + response.status, message: response.statusText, detail: null },
      );
    }
    return response;
  }

  private async json<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.request(path, init);
    return (await response.json()) as T;
  }

  listCollections(): Promise<string[]> {
    return this.json("/collections");
  }

  createCollection(name: string): Promise<unknown> {
    return this.json("/collections", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ name }),
    });
  }

  listDocuments(collection: string): Promise<string[]> {
    return this.json(`/collections/${encodeURIComponent(collection)}/documents`);
  }

  async uploadDocument(
    collection: string,
    docId: string,
    content: BodyInit,
    sgml = false,
  ): Promise<unknown> {
    const format = sgml ? "&format=sgml" : "";
    return this.json(
      `/collections/${encodeURIComponent(collection)}/documents?id=${encodeURIComponent(docId)}${format}`,
      { method: "POST", body: content },
    );
  }

  async documentText(collection: string, docId: string): Promise<Uint8Array> {
    const response = await this.request(
      `/collections/${encodeURIComponent(collection)}/documents/${encodeURIComponent(docId)}/text`,
    );
    return new Uint8Array(await response.arrayBuffer());
  }

  states(collection: string, docId: string): Promise<StatesPayload> {
    return this.json(
      `/collections/${encodeURIComponent(collection)}/documents/${encodeURIComponent(docId)}/states`,
    );
  }

  modules(): Promise<ModuleEntry[]> {
    return this.json("/modules");
  }

  annotations(
    collection: string,
    docId: string,
    selector: { type?: string; producer?: string } = {},
  ): Promise<AnnotationJson[]> {
    const params = new URLSearchParams();
    if (selector.type !== undefined) params.set("type", selector.type);
    if (selector.producer !== undefined) params.set("producer", selector.producer);
    const query = params.toString() ? `?${params.toString()}` : "";
    return this.json(
      `/collections/${encodeURIComponent(collection)}/documents/${encodeURIComponent(docId)}/annotations${query}`,
    );
  }

  runModule(collection: string, docId: string, moduleId: string): Promise<RunResultJson> {
    return this.json(
      `/collections/${encodeURIComponent(collection)}/documents/${encodeURIComponent(docId)}/run/${encodeURIComponent(moduleId)}`,
      { method: "POST" },
    );
  }

  runChain(
    collection: string,
    docId: string,
    chain: string[],
    start: string,
  ): Promise<RunResultJson[]> {
    return this.json(
      `/collections/${encodeURIComponent(collection)}/documents/${encodeURIComponent(docId)}/run-chain`,
      {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ chain, start }),
      },
    );
  }
}
