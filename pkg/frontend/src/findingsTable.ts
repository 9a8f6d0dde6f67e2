// Server-side sorted/filtered findings table. The table holds no local
// ordering logic beyond rendering what the server returned.

import type { ApiClient } from './api.js';
import { ApiError } from './api.js';
import type { FindingSummary } from './types.js';
import type { ViewState } from './viewState.js';
import { toQueryParams } from './viewState.js';

export interface TableRow {
  aggId: string;
  title: string;
  severity: string;
  effectivePriority: number;
  status: string;
  tools: string;
  firstSeen: string;
  lastSeen: string;
  newBadge: boolean;
}

export interface TableModel {
  rows: TableRow[];
  nextCursor: string | null;
  asOf: string | null;
  empty: boolean;
  error: string | null;
}

export function toRow(item: FindingSummary): TableRow {
  const statuses = Object.entries(item.status_counts)
    .filter(([, count]) => count > 0)
    .map(([status, count]) => (item.n_members > 1 ? `${status} (${count})` : status));
  return {
    aggId: item.agg_id,
    title: item.title,
    severity: item.severity ? `${item.severity.band} ${item.severity.score.toFixed(1)}` : '-',
    effectivePriority: item.effective_priority,
    status: statuses.join(', '),
    tools: item.tools.join(', '),
    firstSeen: item.first_seen,
    lastSeen: item.last_seen,
    newBadge: item.new_7d,
  };
}

export async function loadTable(
  client: ApiClient,
  project: string,
  state: ViewState,
): Promise<TableModel> {
  try {
    const page = await client.listFindings(project, toQueryParams(state));
    return {
      rows: page.items.map(toRow),
      nextCursor: page.next_cursor,
      asOf: page.as_of,
      empty: page.items.length === 0 && !state.cursor,
      error: null,
    };
  } catch (err) {
    // invalid filter combinations surface inline instead of crashing the view
    const message = err instanceof ApiError ? String(err.detail) : String(err);
    return { rows: [], nextCursor: null, asOf: null, empty: false, error: message };
  }
}
