// Pure projections of service JSON into render-ready models. No fetching,
// no DOM, no arithmetic beyond layout scaling: every number shown to the
// user is a number the service sent.

import type { CacheEvent, CacheSnapshot, CacheView, CsoView, TrajectoryView, Turn } from "./types.js";

export interface Badge {
  label: string;
  cssClass: string;
}

const BADGES: Record<string, Badge> = {
  user: { label: "User", cssClass: "badge-user" },
  direct_response: { label: "Direct Response", cssClass: "badge-response" },
  tool_select: { label: "Tool Select", cssClass: "badge-select" },
  tool_call: { label: "Tool Call", cssClass: "badge-call" },
  cloud_delegate: { label: "Cloud Delegate", cssClass: "badge-cloud" },
  observation: { label: "Observation", cssClass: "badge-observation" },
  schema_injection: { label: "Schema", cssClass: "badge-schema" },
  cso_update: { label: "State Update", cssClass: "badge-state" },
};

export function badgeFor(turn: Turn): Badge {
  return BADGES[turn.kind] ?? { label: turn.kind, cssClass: "badge-other" };
}

export interface CsoLineModel {
  text: string;
  key: string | null;
  isNew: boolean;
}

export interface CsoPanelModel {
  version: number;
  lines: CsoLineModel[];
  newCount: number;
}

/** Lines present now but not in the previous snapshot are highlighted.
 * The log is append-only, so a length diff identifies exactly the lines the
 * latest turn added; after a no-update turn nothing is highlighted. */
export function csoPanelModel(current: CsoView, previous: CsoView | null): CsoPanelModel {
  const priorCount = previous ? previous.lines.length : 0;
  const lines = current.lines.map((line, i) => ({
    text: line.rawLine,
    key: line.key,
    isNew: i >= priorCount,
  }));
  return { version: current.version, lines, newCount: lines.filter((l) => l.isNew).length };
}

export interface CacheBarModel {
  adapterId: string;
  permanentLen: number;
  ephemeralLen: number;
  permanentPct: number;
  ephemeralPct: number;
  events: string[];
}

const EVENT_LABELS: Record<CacheEvent["kind"], string> = {
  prime: "prime",
  extend_ephemeral: "extend",
  rewind: "rewind",
  commit_delta: "commit",
};

export function describeEvent(event: CacheEvent): string {
  const sign = event.kind === "rewind" ? "-" : "+";
  return `${EVENT_LABELS[event.kind]} ${sign}${event.deltaTokens} tok @ turn ${event.turnIndex}`;
}

function barModel(snapshot: CacheSnapshot, scaleMax: number, eventLimit: number): CacheBarModel {
  return {
    adapterId: snapshot.adapterId,
    permanentLen: snapshot.permanentLen,
    ephemeralLen: snapshot.ephemeralLen,
    permanentPct: scaleMax > 0 ? (snapshot.permanentLen / scaleMax) * 100 : 0,
    ephemeralPct: scaleMax > 0 ? (snapshot.ephemeralLen / scaleMax) * 100 : 0,
    events: snapshot.history.slice(-eventLimit).reverse().map(describeEvent),
  };
}

/** Both adapters share one scale so the bars are visually comparable. */
export function cachePanelModel(cache: CacheView, eventLimit = 12): CacheBarModel[] {
  const scaleMax = Math.max(
    cache.executor.permanentLen + cache.executor.ephemeralLen,
    cache.tracker.permanentLen + cache.tracker.ephemeralLen,
    1,
  );
  return [barModel(cache.executor, scaleMax, eventLimit), barModel(cache.tracker, scaleMax, eventLimit)];
}

export function hasRewind(cache: CacheView): boolean {
  return cache.executor.history.some((e) => e.kind === "rewind");
}

export interface GrowthSeries {
  label: string;
  points: [number, number][];
}

/** Chart input comes verbatim from the trajectory's contextSeries. */
export function growthSeries(trajectory: TrajectoryView, label?: string): GrowthSeries {
  return {
    label: label ?? `${trajectory.meta.sessionId.slice(0, 6)} (${trajectory.meta.mode})`,
    points: trajectory.contextSeries.map(([turn, tokens]) => [turn, tokens]),
  };
}

/** Optional second-session overlay for mode comparison. */
export function overlaySeries(
  primary: TrajectoryView,
  overlay: TrajectoryView | null,
): GrowthSeries[] {
  const series = [growthSeries(primary)];
  if (overlay) series.push(growthSeries(overlay));
  return series;
}
