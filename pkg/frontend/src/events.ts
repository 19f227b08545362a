/** Polling cursor over GET /events?since= - the console's only push channel. */

import type { ApiClient } from "./api.js";
import type { LedgerEvent } from "./types.js";

export class EventPoller {
  private cursor = 0;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private stopped = false;

  constructor(
    private readonly client: ApiClient,
    private readonly onEvents: (events: LedgerEvent[]) => void,
    private readonly intervalMs = 1000,
  ) {}

  /** One poll step; exposed so tests can drive the cursor without timers. */
  async pollOnce(): Promise<LedgerEvent[]> {
    const batch = await this.client.events(this.cursor);
    this.cursor = batch.next;
    if (batch.events.length > 0) {
      this.onEvents(batch.events);
    }
    return batch.events;
  }

  start(): void {
    this.stopped = false;
    const loop = async () => {
      if (this.stopped) return;
      try {
        await this.pollOnce();
      } catch {
        // transient failures: keep polling
      }
      this.timer = setTimeout(loop, this.intervalMs);
    };
    void loop();
  }

  stop(): void {
    this.stopped = true;
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
  }
}
