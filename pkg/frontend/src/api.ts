// Thin typed client for the findings service. The UI never mutates state
// locally: every write goes through these calls and the views re-read.

import type {
  DashboardResponse,
  FindingDetail,
  FindingsPage,
  Role,
  Status,
  TopPriorityEntry,
  WeeklySnapshot,
} from './types.js';

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly detail: unknown,
  ) {
    super(typeof detail === 'string' ? detail : JSON.stringify(detail));
    this.name = 'ApiError';
  }
}

async function parseResponse<T>(response: Response): Promise<T> {
  if (!response.ok) {
    let detail: unknown = response.statusText;
    try {
      detail = (await response.json()).detail;
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new ApiError(response.status, detail);
  }
  return (await response.json()) as T;
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly token: string,
  ) {}

  private async request<T>(
    method: string,
    path: string,
    params?: Record<string, string>,
    body?: unknown,
  ): Promise<T> {
    const url = new URL(this.baseUrl + path);
    for (const [key, value] of Object.entries(params ?? {})) {
      url.searchParams.set(key, value);
    }
    const response = await fetch(url, {
      method,
      headers: {
        Authorization: `Bearer ${this.token}`,
        ...(body !== undefined ? { 'Content-Type': 'application/json' } : {}),
      },
      body: body !== undefined ? JSON.stringify(body) : undefined,
    });
    return parseResponse<T>(response);
  }

  healthz(): Promise<{ status: string }> {
    return this.request('GET', '/healthz');
  }

  listFindings(project: string, params: Record<string, string>): Promise<FindingsPage> {
    return this.request('GET', `/projects/${project}/findings`, params);
  }

  findingDetail(project: string, aggId: string): Promise<FindingDetail> {
    return this.request('GET', `/projects/${project}/findings/${aggId}`);
  }

  setStatus(project: string, aggId: string, status: Status, actor?: string) {
    return this.request<{ agg_id: string; status: string; changed_locations: number }>(
      'PATCH',
      `/projects/${project}/findings/${aggId}/status`,
      undefined,
      { status, ...(actor ? { actor } : {}) },
    );
  }

  setPriority(project: string, aggId: string, value: number, actor?: string) {
    return this.request<{ agg_id: string; priority: number }>(
      'PATCH',
      `/projects/${project}/findings/${aggId}/priority`,
      undefined,
      { value, ...(actor ? { actor } : {}) },
    );
  }

  bulkStatus(project: string, severityAtMost: string, status: Status) {
    return this.request<{ changed_locations: number }>(
      'POST',
      `/projects/${project}/findings/bulk-status`,
      undefined,
      { severity_at_most: severityAtMost, status },
    );
  }

  query<T>(project: string, name: string, params?: Record<string, string>): Promise<T> {
    return this.request<{ query: string; result: T }>(
      'GET',
      `/projects/${project}/queries/${name}`,
      params,
    ).then((r) => r.result);
  }

  topPriority(project: string, n = 10): Promise<TopPriorityEntry[]> {
    return this.query(project, 'top_priority', { n: String(n) });
  }

  weeklyMetrics(project: string, asOf?: string): Promise<WeeklySnapshot> {
    return this.request('GET', `/projects/${project}/metrics/weekly`,
      asOf ? { as_of: asOf } : undefined);
  }

  dashboard(project: string, role: Role | string): Promise<DashboardResponse> {
    return this.request('GET', `/projects/${project}/dashboard`, { role: String(role) });
  }

  uploadReport(
    project: string,
    document: string,
    params: Record<string, string> = {},
  ): Promise<{ report_id: string; new_raw: number; new_agg: number }> {
    const url = new URL(`${this.baseUrl}/projects/${project}/reports`);
    for (const [key, value] of Object.entries(params)) {
      url.searchParams.set(key, value);
    }
    return fetch(url, {
      method: 'POST',
      headers: { Authorization: `Bearer ${this.token}` },
      body: document,
    }).then((r) => parseResponse(r));
  }
}
