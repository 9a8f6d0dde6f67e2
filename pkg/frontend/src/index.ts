export { ApiClient, ApiError } from './api.js';
export * from './types.js';
export {
  DEFAULT_VIEW_STATE,
  parseViewState,
  serializeViewState,
  toQueryParams,
} from './viewState.js';
export type { SortField, SortOrder, ViewState } from './viewState.js';
export { loadTable, toRow } from './findingsTable.js';
export type { TableModel, TableRow } from './findingsTable.js';
export {
  PRIORITY_SLIDER,
  STATUS_OPTIONS,
  applyPriority,
  applyStatus,
  buildTimeline,
  buildTrace,
  bulkAccept,
  loadDetail,
  toModel,
} from './findingDetail.js';
export type { DetailModel, TimelineEntry, TraceStep } from './findingDetail.js';
export { dashboardView, widgetTypes } from './dashboard.js';
export type { DashboardModel } from './dashboard.js';
export { DEFAULT_POLL_INTERVAL_MS, Poller } from './poller.js';
