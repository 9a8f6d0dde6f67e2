// Table/view state, fully reproducible from the URL so every view is
// deep-linkable. Serialization and the server query parameters are both
// derived from the same state object.

import type { Role, SeverityBand, Status } from './types.js';

export type SortField = 'severity' | 'priority' | 'first_seen' | 'last_seen';
export type SortOrder = 'asc' | 'desc';

export interface ViewState {
  role: Role;
  status?: Status;
  severity?: SeverityBand;
  tool?: string;
  newSince?: string;
  sort: SortField;
  order: SortOrder;
  cursor?: string;
  pageSize: number;
}

export const DEFAULT_VIEW_STATE: ViewState = {
  role: 'developer',
  sort: 'severity',
  order: 'desc',
  pageSize: 50,
};

const SORT_FIELDS: SortField[] = ['severity', 'priority', 'first_seen', 'last_seen'];
const ROLES: Role[] = ['developer', 'manager', 'security'];

export function serializeViewState(state: ViewState): string {
  const params = new URLSearchParams();
  params.set('role', state.role);
  if (state.status) params.set('status', state.status);
  if (state.severity) params.set('severity', state.severity);
  if (state.tool) params.set('tool', state.tool);
  if (state.newSince) params.set('new_since', state.newSince);
  params.set('sort', state.sort);
  params.set('order', state.order);
  if (state.cursor) params.set('cursor', state.cursor);
  if (state.pageSize !== DEFAULT_VIEW_STATE.pageSize) {
    params.set('page_size', String(state.pageSize));
  }
  return params.toString();
}

export function parseViewState(query: string): ViewState {
  const params = new URLSearchParams(query);
  const state: ViewState = { ...DEFAULT_VIEW_STATE };
  const role = params.get('role');
  if (role && (ROLES as string[]).includes(role)) state.role = role as Role;
  const sort = params.get('sort');
  if (sort && (SORT_FIELDS as string[]).includes(sort)) state.sort = sort as SortField;
  const order = params.get('order');
  if (order === 'asc' || order === 'desc') state.order = order;
  const status = params.get('status');
  if (status) state.status = status as Status;
  const severity = params.get('severity');
  if (severity) state.severity = severity as SeverityBand;
  const tool = params.get('tool');
  if (tool) state.tool = tool;
  const newSince = params.get('new_since');
  if (newSince) state.newSince = newSince;
  const cursor = params.get('cursor');
  if (cursor) state.cursor = cursor;
  const pageSize = params.get('page_size');
  if (pageSize && Number.isFinite(Number(pageSize))) state.pageSize = Number(pageSize);
  return state;
}

/** Query parameters for GET /projects/{p}/findings, derived from the state. */
export function toQueryParams(state: ViewState): Record<string, string> {
  const params: Record<string, string> = {
    sort: state.sort,
    order: state.order,
    page_size: String(state.pageSize),
  };
  if (state.status) params.status = state.status;
  if (state.severity) params.severity = state.severity;
  if (state.tool) params.tool = state.tool;
  if (state.newSince) params.new_since = state.newSince;
  if (state.cursor) params.cursor = state.cursor;
  return params;
}
