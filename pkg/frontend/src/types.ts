// Wire types for the agent service JSON API. Field names mirror the server
// exactly; everything the UI shows comes straight from these payloads.

export interface SessionRecord {
  id: string;
  mode: string;
  createdAt: string;
  registryId: string;
  status: "active" | "closed";
}

export interface Turn {
  sessionId: string;
  turnIndex: number;
  role: "user" | "assistant" | "tool" | "tracker";
  kind: string;
  content: string;
  inputContextTokens: number | null;
  assistantTurn?: number;
  toolName?: string;
  arguments?: Record<string, unknown>;
  success?: boolean;
  malformed?: boolean;
  diagnostic?: string;
}

export interface CsoLine {
  rawLine: string;
  key: string | null;
  value: string | null;
  turnIndex: number;
}

export interface CsoView {
  text: string;
  version: number;
  lines: CsoLine[];
}

export interface CacheEvent {
  kind: "prime" | "extend_ephemeral" | "rewind" | "commit_delta";
  deltaTokens: number;
  turnIndex: number;
}

export interface CacheSnapshot {
  adapterId: "executor" | "tracker";
  permanentLen: number;
  ephemeralLen: number;
  history: CacheEvent[];
}

export interface CacheView {
  executor: CacheSnapshot;
  tracker: CacheSnapshot;
}

export interface TrajectoryView {
  meta: { sessionId: string; mode: string; registryId: string };
  turns: Turn[];
  contextSeries: [number, number][];
}

export interface RegistryInfo {
  id: string;
  tools: number;
  cloudToolId: string;
}
