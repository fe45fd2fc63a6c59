// Monotone progress for job polling: out-of-order poll responses never move
// the bar backwards (the client keeps the max it has seen).

import type { JobHandle } from "./types.js";

export class MonotoneProgress {
  private best = 0;

  update(progress: number): number {
    if (Number.isFinite(progress) && progress > this.best) {
      this.best = Math.min(1, progress);
    }
    return this.best;
  }

  get value(): number {
    return this.best;
  }
}

export interface PollOptions {
  intervalMs?: number;
  jitterMs?: number;
  onProgress: (fraction: number, snapshot: JobHandle) => void;
  onDone: (snapshot: JobHandle) => void;
  onFailed: (snapshot: JobHandle) => void;
}

const TERMINAL = new Set(["done", "failed", "cancelled"]);

export function pollJob(
  fetchSnapshot: () => Promise<JobHandle>,
  options: PollOptions,
): { stop: () => void } {
  const progress = new MonotoneProgress();
  const interval = options.intervalMs ?? 750;
  const jitter = options.jitterMs ?? 150;
  let stopped = false;

  const tick = async () => {
    if (stopped) return;
    let snapshot: JobHandle;
    try {
      snapshot = await fetchSnapshot();
    } catch {
      schedule();
      return;
    }
    options.onProgress(progress.update(snapshot.progress), snapshot);
    if (TERMINAL.has(snapshot.state)) {
      stopped = true;
      if (snapshot.state === "done") options.onDone(snapshot);
      else options.onFailed(snapshot);
      return;
    }
    schedule();
  };

  const schedule = () => {
    if (!stopped) {
      setTimeout(tick, interval + Math.random() * jitter);
    }
  };

  void tick();
  return {
    stop: () => {
      stopped = true;
    },
  };
}
