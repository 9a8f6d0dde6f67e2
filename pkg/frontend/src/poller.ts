// Pull-based refresh: the service has no push channel, so views poll.

export const DEFAULT_POLL_INTERVAL_MS = 30_000;

export class Poller {
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(
    private readonly refresh: () => Promise<void>,
    readonly intervalMs: number = DEFAULT_POLL_INTERVAL_MS,
  ) {}

  start(): void {
    if (this.timer !== null) return;
    this.timer = setInterval(() => {
      void this.refresh().catch(() => {
        // the view model carries its own error banner; polling keeps going
      });
    }, this.intervalMs);
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }

  get running(): boolean {
    return this.timer !== null;
  }
}
