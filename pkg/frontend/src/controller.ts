// Chat/session state machine, kept free of DOM so the send/retry/draft
// rules are unit-testable. main.ts subscribes and paints.

import { ApiClient, ApiError } from "./api.js";
import type { CacheView, CsoView, SessionRecord, TrajectoryView, Turn } from "./types.js";

export interface InspectorState {
  session: SessionRecord | null;
  turns: Turn[];
  cso: CsoView | null;
  previousCso: CsoView | null;
  cache: CacheView | null;
  trajectory: TrajectoryView | null;
  overlay: TrajectoryView | null;
  inFlight: boolean;
  draft: string;
  error: { code: string; message: string } | null;
}

export function initialState(): InspectorState {
  return {
    session: null,
    turns: [],
    cso: null,
    previousCso: null,
    cache: null,
    trajectory: null,
    overlay: null,
    inFlight: false,
    draft: "",
    error: null,
  };
}

export class InspectorController {
  state: InspectorState = initialState();
  private listeners: (() => void)[] = [];

  constructor(
    private client: ApiClient,
    private overlayClientFor: (sessionId: string) => Promise<TrajectoryView> = (id) =>
      client.getTrajectory(id),
  ) {}

  onChange(listener: () => void): void {
    this.listeners.push(listener);
  }

  private emit(): void {
    for (const l of this.listeners) l();
  }

  private fail(err: unknown): void {
    if (err instanceof ApiError) {
      this.state.error = { code: err.code, message: err.message };
    } else {
      this.state.error = { code: "connection_lost", message: String(err) };
    }
    this.emit();
  }

  async createSession(mode: string, registryId?: string): Promise<void> {
    try {
      this.state = { ...initialState(), draft: this.state.draft };
      this.state.session = await this.client.createSession(mode, registryId);
      await this.refresh();
    } catch (err) {
      this.fail(err);
    }
  }

  setDraft(text: string): void {
    this.state.draft = text;
  }

  /** Send the draft. Empty drafts never hit the network; a failed send keeps
   * the draft intact so nothing the user typed is lost. */
  async send(): Promise<void> {
    const text = this.state.draft.trim();
    if (!text || !this.state.session || this.state.inFlight) return;
    this.state.inFlight = true;
    this.state.error = null;
    this.emit();
    try {
      const { turns } = await this.client.postMessage(this.state.session.id, text);
      this.state.turns = this.state.turns.concat(turns);
      this.state.draft = "";
      this.state.inFlight = false;
      await this.refresh();
    } catch (err) {
      this.state.inFlight = false;
      this.fail(err); // draft untouched
    }
  }

  /** Pull every inspection facet; previous cso snapshot is kept for the
   * new-line highlight diff. */
  async refresh(): Promise<void> {
    if (!this.state.session) return;
    const id = this.state.session.id;
    try {
      const [cso, cache, trajectory] = await Promise.all([
        this.client.getCso(id),
        this.client.getCache(id),
        this.client.getTrajectory(id),
      ]);
      this.state.previousCso = this.state.cso;
      this.state.cso = cso;
      this.state.cache = cache;
      this.state.trajectory = trajectory;
      this.state.turns = trajectory.turns;
      this.state.error = null;
      this.emit();
    } catch (err) {
      this.fail(err);
    }
  }

  async setOverlay(sessionId: string | null): Promise<void> {
    if (!sessionId) {
      this.state.overlay = null;
      this.emit();
      return;
    }
    try {
      this.state.overlay = await this.overlayClientFor(sessionId);
      this.emit();
    } catch (err) {
      this.fail(err);
    }
  }
}
