// Role-based dashboard view model. All widget data comes from the
// server's /dashboard endpoint; an unknown role degrades to a read-only
// summary and an unreachable API yields an error banner instead of
// silently rendering stale data.

import type { ApiClient } from './api.js';
import { ApiError } from './api.js';
import type { DashboardWidget, Role } from './types.js';

export interface DashboardModel {
  role: string;
  widgets: DashboardWidget[];
  errorBanner: string | null;
  stale: boolean;
}

const KNOWN_ROLES: Role[] = ['developer', 'manager', 'security'];

export async function dashboardView(
  client: ApiClient,
  project: string,
  role: string,
  previous?: DashboardModel,
): Promise<DashboardModel> {
  const effectiveRole = (KNOWN_ROLES as string[]).includes(role) ? role : 'security';
  try {
    const data = await client.dashboard(project, effectiveRole);
    return { role: data.role, widgets: data.widgets, errorBanner: null, stale: false };
  } catch (err) {
    const message =
      err instanceof ApiError ? `API error ${err.status}: ${err.detail}` : `API unreachable: ${err}`;
    if (previous) {
      // keep last data on screen but badge it as stale
      return { ...previous, errorBanner: message, stale: true };
    }
    return { role: effectiveRole, widgets: [], errorBanner: message, stale: false };
  }
}

export function widgetTypes(model: DashboardModel): string[] {
  return model.widgets.map((w) => w.type);
}
