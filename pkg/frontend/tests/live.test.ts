// Round-trip tests against the real backend service.

import { afterAll, beforeAll, describe, expect, it } from 'vitest';

import { ApiClient } from '../src/api.js';
import { dashboardView, widgetTypes } from '../src/dashboard.js';
import { applyPriority, applyStatus, loadDetail } from '../src/findingDetail.js';
import { loadTable } from '../src/findingsTable.js';
import { DEFAULT_VIEW_STATE, type ViewState } from '../src/viewState.js';
import { nativeFinding, nativeReport, startServer, type LiveServer } from './server.js';

let server: LiveServer;
let ci: ApiClient;
let user: ApiClient;

const PROJECT = 'proj';

const tableState: ViewState = { ...DEFAULT_VIEW_STATE };

beforeAll(async () => {
  server = await startServer();
  ci = new ApiClient(server.baseUrl, 'ci-token');
  user = new ApiClient(server.baseUrl, 'user-token');
  const titles: Array<[string, string]> = [
    ['R1', 'sql injection in checkout form'],
    ['R2', 'cleartext secret committed to repository'],
    ['R3', 'outdated dependency with known overflow'],
    ['R4', 'missing security headers on api responses'],
  ];
  const severities = ['critical', 'high', 'medium', 'low'];
  await ci.uploadReport(
    PROJECT,
    nativeReport(
      titles.map(([rule, title], i) =>
        nativeFinding(rule, `src/f${i}.py`, title, severities[i]),
      ),
    ),
    { received_at: '2023-01-02T12:00:00+00:00' },
  );
  // second report re-observes the first finding (occurrence history)
  await ci.uploadReport(
    PROJECT,
    nativeReport([nativeFinding('R1', 'src/f0.py', 'sql injection in checkout form', 'critical')],
      'scanny', '2023-01-09T12:00:00+00:00'),
    { received_at: '2023-01-09T12:00:00+00:00' },
  );
}, 30_000);

afterAll(() => {
  server?.stop();
});

describe('findings table against the live API', () => {
  it('renders server-sorted rows with the documented columns', async () => {
    const table = await loadTable(user, PROJECT, tableState);
    expect(table.error).toBeNull();
    expect(table.rows.length).toBeGreaterThanOrEqual(3);
    const top = table.rows[0];
    expect(top.severity).toContain('Critical');
    expect(top.tools).toContain('scanny');
    expect(typeof top.firstSeen).toBe('string');
  });

  it('priority sort order matches the top_priority query for n=10', async () => {
    const table = await loadTable(user, PROJECT, {
      ...tableState,
      sort: 'priority',
      order: 'desc',
      pageSize: 10,
    });
    const expected = await user.topPriority(PROJECT, 10);
    expect(table.rows.map((r) => r.aggId)).toEqual(expected.map((e) => e.agg_id));
    expect(table.rows.map((r) => r.effectivePriority)).toEqual(
      expected.map((e) => e.effective_priority),
    );
  });

  it('status=Open filter count matches the open_count query', async () => {
    const table = await loadTable(user, PROJECT, { ...tableState, status: 'Open' });
    const openLocations = await user.query<number>(PROJECT, 'open_count');
    const shownLocations = table.rows.reduce(
      (n, row) => n + (row.status.includes('Open') ? 1 : 0),
      0,
    );
    expect(shownLocations).toBeGreaterThan(0);
    expect(openLocations).toBeGreaterThanOrEqual(shownLocations);
  });

  it('invalid filter is surfaced inline', async () => {
    const table = await loadTable(user, PROJECT, { ...tableState, status: 'Fixed' as never });
    expect(table.error).toMatch(/unknown status/);
  });
});

describe('detail page round trip', () => {
  it('status change appears in a fresh read and in the audit log', async () => {
    const table = await loadTable(user, PROJECT, tableState);
    const aggId = table.rows[table.rows.length - 1].aggId;
    const model = await loadDetail(user, PROJECT, aggId);
    const updated = await applyStatus(user, PROJECT, model, 'InWork', 'alice');
    expect(updated.writeError).toBeNull();
    expect(updated.currentStatus).toBe('InWork');
    // fresh read, no reuse of the optimistic model
    const fresh = await loadDetail(user, PROJECT, aggId);
    expect(fresh.currentStatus).toBe('InWork');
    const lastChange = fresh.detail.audit[fresh.detail.audit.length - 1];
    expect(lastChange.new).toBe('InWork');
    expect(lastChange.actor).toBe('alice');
  });

  it('priority slider write reconciles to the server value', async () => {
    const table = await loadTable(user, PROJECT, tableState);
    const model = await loadDetail(user, PROJECT, table.rows[0].aggId);
    const updated = await applyPriority(user, PROJECT, model, 8.5, 'alice');
    expect(updated.writeError).toBeNull();
    expect(updated.effectivePriority).toBe(8.5);
  });

  it('server rejection of a Disappeared write is rendered, state unchanged', async () => {
    const table = await loadTable(user, PROJECT, tableState);
    const model = await loadDetail(user, PROJECT, table.rows[0].aggId);
    const rejected = await applyStatus(user, PROJECT, model, 'Disappeared' as never);
    expect(rejected.writeError).toMatch(/Disappeared/);
    expect(rejected.currentStatus).toBe(model.currentStatus);
  });

  it('timeline marks two occurrences for a finding seen in two reports', async () => {
    const table = await loadTable(user, PROJECT, {
      ...tableState,
      sort: 'severity',
      order: 'desc',
    });
    const model = await loadDetail(user, PROJECT, table.rows[0].aggId);
    const marks = model.timeline.filter((e) => e.kind === 'occurrence');
    expect(marks.length).toBe(2);
    expect(model.trace.map((s) => s.stage)).toEqual(['parse', 'cluster', 'enrich', 'score']);
  });
});

describe('dashboards per role', () => {
  it('developer view is solution focused', async () => {
    const model = await dashboardView(user, PROJECT, 'developer');
    expect(model.errorBanner).toBeNull();
    expect(widgetTypes(model)).toContain('newest_findings');
    expect(widgetTypes(model)).toContain('top_priority');
  });

  it('manager view shows the weekly snapshot trend', async () => {
    const model = await dashboardView(user, PROJECT, 'manager');
    expect(widgetTypes(model)).toContain('weekly_trend');
  });

  it('security view shows severity and status distributions', async () => {
    const model = await dashboardView(user, PROJECT, 'security');
    expect(widgetTypes(model)).toEqual(
      expect.arrayContaining(['severity_distribution', 'status_breakdown']),
    );
  });

  it('unknown role degrades to the read-only summary view', async () => {
    const model = await dashboardView(user, PROJECT, 'wizard');
    expect(model.errorBanner).toBeNull();
    expect(model.role).toBe('security');
  });
});
