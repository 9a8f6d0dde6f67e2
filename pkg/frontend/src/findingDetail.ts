// Per-finding page model: triage controls, history timeline, enrichment
// notes and the processing-transparency panel. Writes are optimistic but
// always reconciled against a fresh server read, so the displayed value
// is never a locally invented state.

import type { ApiClient } from './api.js';
import { ApiError } from './api.js';
import type { FindingDetail, Status } from './types.js';

/** Statuses a user may assign; Disappeared is system-only and excluded. */
export const STATUS_OPTIONS: Status[] = [
  'Open',
  'InWork',
  'FalsePositive',
  'Invalid',
  'Accepted',
  'Solved',
  'OnHold',
];

export const PRIORITY_SLIDER = { min: 0, max: 10, step: 0.5 };

export interface TimelineEntry {
  at: string;
  kind: 'occurrence' | 'status';
  label: string;
}

export interface TraceStep {
  stage: string;
  detail: string;
}

export interface DetailModel {
  detail: FindingDetail;
  statusOptions: Status[];
  currentStatus: string;
  suggestedPriority: number | null;
  effectivePriority: number;
  timeline: TimelineEntry[];
  trace: TraceStep[];
  pendingWrite: boolean;
  writeError: string | null;
}

export function buildTimeline(detail: FindingDetail): TimelineEntry[] {
  const entries: TimelineEntry[] = [];
  for (const member of detail.members) {
    for (const reportId of member.report_ids) {
      entries.push({
        at: member.last_seen,
        kind: 'occurrence',
        label: `seen in report ${reportId} (${member.location.path})`,
      });
    }
  }
  for (const change of detail.audit) {
    entries.push({
      at: change.changed_at,
      kind: 'status',
      label: `${change.old ?? 'created'} → ${change.new} by ${change.actor}`,
    });
  }
  return entries.sort((a, b) => a.at.localeCompare(b.at));
}

/** Processing-transparency panel: how this finding came to be. */
export function buildTrace(detail: FindingDetail): TraceStep[] {
  const reportIds = new Set(detail.members.flatMap((m) => m.report_ids));
  return [
    { stage: 'parse', detail: `${reportIds.size} report(s) parsed into raw findings` },
    {
      stage: 'cluster',
      detail: `${detail.n_members} location(s) grouped into ${detail.agg_id}`,
    },
    {
      stage: 'enrich',
      detail: `${detail.enrichment_notes.length} note(s): ${detail.enrichment_notes
        .map((n) => n.title)
        .join('; ')}`,
    },
    {
      stage: 'score',
      detail: detail.severity
        ? `${detail.severity.band} ${detail.severity.score}, suggested priority ${detail.suggested_priority}`
        : 'not yet scored',
    },
  ];
}

function summarizeStatus(detail: FindingDetail): string {
  const present = Object.entries(detail.status_counts).filter(([, n]) => n > 0);
  return present.length === 1 ? present[0][0] : 'Mixed';
}

export function toModel(detail: FindingDetail): DetailModel {
  return {
    detail,
    statusOptions: STATUS_OPTIONS,
    currentStatus: summarizeStatus(detail),
    suggestedPriority: detail.suggested_priority,
    effectivePriority: detail.effective_priority,
    timeline: buildTimeline(detail),
    trace: buildTrace(detail),
    pendingWrite: false,
    writeError: null,
  };
}

export async function loadDetail(
  client: ApiClient,
  project: string,
  aggId: string,
): Promise<DetailModel> {
  return toModel(await client.findingDetail(project, aggId));
}

/** Optimistic status change, reconciled with a fresh read after the ack. */
export async function applyStatus(
  client: ApiClient,
  project: string,
  model: DetailModel,
  status: Status,
  actor?: string,
): Promise<DetailModel> {
  const optimistic: DetailModel = { ...model, currentStatus: status, pendingWrite: true };
  try {
    await client.setStatus(project, model.detail.agg_id, status, actor);
  } catch (err) {
    const message = err instanceof ApiError ? String(err.detail) : String(err);
    return { ...model, pendingWrite: false, writeError: message };
  }
  const reconciled = await loadDetail(client, project, optimistic.detail.agg_id);
  return { ...reconciled, writeError: null };
}

/** Optimistic priority change with the same reconcile cycle. */
export async function applyPriority(
  client: ApiClient,
  project: string,
  model: DetailModel,
  value: number,
  actor?: string,
): Promise<DetailModel> {
  try {
    await client.setPriority(project, model.detail.agg_id, value, actor);
  } catch (err) {
    const message = err instanceof ApiError ? String(err.detail) : String(err);
    return { ...model, pendingWrite: false, writeError: message };
  }
  const reconciled = await loadDetail(client, project, model.detail.agg_id);
  return { ...reconciled, writeError: null };
}

/** Bulk accept is destructive-ish: callers must confirm before invoking. */
export async function bulkAccept(
  client: ApiClient,
  project: string,
  severityAtMost: string,
  confirmed: boolean,
): Promise<number> {
  if (!confirmed) {
    throw new Error('bulk accept requires explicit confirmation');
  }
  const result = await client.bulkStatus(project, severityAtMost, 'Accepted');
  return result.changed_locations;
}
