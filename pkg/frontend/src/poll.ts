// Event-driven refresh: long-poll the events endpoint and tell the app
// which parts of the view are stale. Falls back to a plain interval if
// the long poll errors (engine restarting, network blips).

import type { EngineClient } from "./api.js";

export type UpdateKinds = Set<"progress" | "warning-diff" | "stats-updated">;

export class EventLoop {
  private since = 0;
  private stopped = false;

  constructor(
    private client: EngineClient,
    private runId: string,
    private onUpdate: (kinds: UpdateKinds) => Promise<void> | void,
    private waitSeconds = 20,
    private retryMs = 1000,
  ) {}

  /** One long-poll round; returns the kinds that changed (for tests). */
  async tick(): Promise<UpdateKinds> {
    const payload = await this.client.events(this.runId, this.since, this.waitSeconds);
    this.since = payload.next_since;
    const kinds: UpdateKinds = new Set();
    for (const ev of payload.events) kinds.add(ev.kind);
    if (kinds.size > 0) await this.onUpdate(kinds);
    return kinds;
  }

  async run(): Promise<void> {
    this.stopped = false;
    while (!this.stopped) {
      try {
        await this.tick();
      } catch {
        await new Promise((resolve) => setTimeout(resolve, this.retryMs));
      }
    }
  }

  stop(): void {
    this.stopped = true;
  }

  get cursor(): number {
    return this.since;
  }
}
