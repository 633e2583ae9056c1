// Typed client for the local daemon. Every method maps 1:1 onto one
// endpoint; no request shaping or response reinterpretation happens here.

export type RosterEntry = { user: string; online: boolean; sharing: boolean };

export type FeatureRef = { id: string; version: string };

export type RectDoc = { x: number; y: number; w: number; h: number };

export type AnnotationDoc = {
  rect: RectDoc;
  part: string;
  feature: string;
  display_name: string;
};

export type CompositionSummary = {
  id: string;
  name: string;
  created_at: number;
  features: number;
};

export type CompositionList = {
  cached: boolean;
  fetched_at: number;
  compositions: CompositionSummary[];
};

export type CompositionDoc = {
  format: number;
  id: string;
  name: string;
  owner: string;
  created_at: number;
  feature_refs: FeatureRef[];
  placements: { part: string; feature: string; rect: RectDoc }[];
  screenshot: string; // sha-256 digest; bytes come from the screenshot endpoint
};

export type VersionMismatch = { id: string; local: string; required: string };

export type PlanDoc = {
  already_present: FeatureRef[];
  missing: FeatureRef[];
  version_mismatch: VersionMismatch[];
  install_order: FeatureRef[];
  include_composition: boolean;
  selected: string[];
};

export type InstallEventDoc = { id: string; version: string; source: string };

export type EventDoc =
  | { type: "presence"; user: string; online: boolean; sharing: boolean }
  | { type: "chat"; sender: string; text: string; sent_at: number }
  | { type: "install"; feature: string; version: string; source: string }
  | { type: "session"; state: string }
  | { type: "error"; code: string; detail: string };

export class ApiError extends Error {
  constructor(public status: number, detail: string) {
    super(detail);
  }
}

async function asError(response: Response): Promise<ApiError> {
  let detail = response.statusText;
  try {
    const body = await response.json();
    if (typeof body.detail === "string") detail = body.detail;
  } catch {
    // non-JSON error body; keep the status text
  }
  return new ApiError(response.status, detail);
}

export class Api {
  constructor(private base: string = "") {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await fetch(this.base + path, init);
    if (!response.ok) throw await asError(response);
    return (await response.json()) as T;
  }

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  contacts(): Promise<RosterEntry[]> {
    return this.request("/contacts");
  }

  compositions(user: string): Promise<CompositionList> {
    return this.request(`/contacts/${encodeURIComponent(user)}/compositions`);
  }

  composition(id: string): Promise<CompositionDoc> {
    return this.request(`/compositions/${id}`);
  }

  screenshotUrl(id: string): string {
    return `${this.base}/compositions/${id}/screenshot`;
  }

  annotations(id: string): Promise<AnnotationDoc[]> {
    return this.request(`/compositions/${id}/annotations`);
  }

  plan(user: string, compId: string, select: string[] | null): Promise<PlanDoc> {
    return this.post("/plan", { user, comp_id: compId, select });
  }

  install(
    user: string,
    compId: string,
    select: string[] | null,
    withComposition: boolean,
    force: boolean,
  ): Promise<{ events: InstallEventDoc[] }> {
    return this.post("/install", {
      user,
      comp_id: compId,
      select,
      with_composition: withComposition,
      force,
    });
  }

  share(enabled: boolean): Promise<{ enabled: boolean }> {
    return this.post("/share", { enabled });
  }

  chat(to: string, text: string): Promise<{ to: string; sent_at: number }> {
    return this.post("/chat", { to, text });
  }

  eventsUrl(): string {
    const url = new URL(this.base + "/events", window.location.href);
    url.protocol = url.protocol.replace("http", "ws");
    return url.href;
  }
}
