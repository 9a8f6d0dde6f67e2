// Shapes of the documents returned by the HTTP API.

export type Role = 'developer' | 'manager' | 'security';

export type Status =
  | 'Open'
  | 'InWork'
  | 'FalsePositive'
  | 'Invalid'
  | 'Accepted'
  | 'Solved'
  | 'OnHold'
  | 'Disappeared';

export type SeverityBand = 'Info' | 'Low' | 'Medium' | 'High' | 'Critical';

export interface Severity {
  band: SeverityBand;
  score: number;
  flags: string[];
}

export interface FindingSummary {
  agg_id: string;
  title: string;
  severity: Severity | null;
  effective_priority: number;
  priority: number | null;
  suggested_priority: number | null;
  status_counts: Record<string, number>;
  tools: string[];
  tool_category: string;
  n_members: number;
  first_seen: string;
  last_seen: string;
  new_7d: boolean;
}

export interface FindingsPage {
  items: FindingSummary[];
  next_cursor: string | null;
  as_of: string;
}

export interface EnrichmentNote {
  rule: string;
  title: string;
  text: string;
}

export interface RawMember {
  raw_id: string;
  tool: { name: string; version: string; category: string };
  rule_id: string;
  title: string;
  location: { path: string; line: number | null };
  status: Status;
  first_seen: string;
  last_seen: string;
  occurrence_count: number;
  report_ids: string[];
}

export interface AuditEntry {
  change_id: string;
  raw_id: string;
  old: Status | null;
  new: Status;
  actor: string;
  changed_at: string;
}

export interface FindingDetail extends FindingSummary {
  description: string;
  enrichment_notes: EnrichmentNote[];
  members: RawMember[];
  audit: AuditEntry[];
  provenance: string[];
}

export interface WeeklySnapshot {
  project_id: string;
  as_of: string;
  n_activities: number;
  n_tools: number;
  n_reports_cum: number;
  n_raw_cum: number;
  n_agg_cum: number;
  n_new_7d: number;
  status_counts: Record<string, number>;
  severity_counts: Record<string, number>;
  n_user_inputs_7d: number;
}

export interface DashboardWidget {
  type: string;
  [key: string]: unknown;
}

export interface DashboardResponse {
  role: string;
  widgets: DashboardWidget[];
}

export interface TopPriorityEntry {
  agg_id: string;
  title: string;
  severity: Severity | null;
  effective_priority: number;
}
