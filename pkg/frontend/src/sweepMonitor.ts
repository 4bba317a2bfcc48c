/**
 * Sweep progress view: polls the job endpoint at a fixed interval and keeps a
 * render-ready snapshot (progress fraction, flagged grid, export payload).
 */

import { ApiClient, ApiError, FlaggedItem, SweepStatus } from './api';

export interface SweepView {
  phase: 'running' | 'done' | 'error';
  fraction: number;
  scanned: number;
  flagged: FlaggedItem[];
  spinner: boolean;
  error: string | null;
}

export function sweepView(status: SweepStatus): SweepView {
  if (status.error) {
    return {
      phase: 'error',
      fraction: status.fraction,
      scanned: status.scanned,
      flagged: status.flagged,
      spinner: false,
      error: status.error,
    };
  }
  return {
    phase: status.done ? 'done' : 'running',
    fraction: status.fraction,
    scanned: status.scanned,
    flagged: status.flagged,
    spinner: !status.done,
    error: null,
  };
}

/** Completed sweeps export the flagged list verbatim. */
export function exportFlagged(view: SweepView): { flagged: FlaggedItem[] } {
  if (view.phase !== 'done') {
    throw new Error('sweep still running; nothing to export yet');
  }
  return { flagged: view.flagged };
}

export class SweepMonitor {
  view: SweepView = {
    phase: 'running',
    fraction: 0,
    scanned: 0,
    flagged: [],
    spinner: true,
    error: null,
  };
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(
    private api: ApiClient,
    private jobId: string,
    private onChange: (view: SweepView) => void = () => {},
    private intervalMs = 1000,
  ) {}

  start(): void {
    this.timer = setInterval(() => void this.poll(), this.intervalMs);
    void this.poll();
  }

  stop(): void {
    if (this.timer !== null) clearInterval(this.timer);
    this.timer = null;
  }

  private async poll(): Promise<void> {
    try {
      const status = await this.api.getSweep(this.jobId);
      this.view = sweepView(status);
      if (this.view.phase !== 'running') this.stop();
    } catch (err) {
      // a missing job is terminal; render a dismissible error
      this.view = {
        ...this.view,
        phase: 'error',
        spinner: false,
        error: err instanceof ApiError ? err.message : String(err),
      };
      this.stop();
    }
    this.onChange(this.view);
  }
}
