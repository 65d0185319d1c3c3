/** Periodic fetch with last-response-wins rendering: a stale response that
 * resolves after a newer one never overwrites the newer render. */

export interface Poller {
  start(): void;
  stop(): void;
  tick(): Promise<void>;
}

export function createPoller<T>(
  fetchOnce: () => Promise<T>,
  intervalMs: number,
  render: (value: T) => void,
  onError: (error: unknown) => void = () => {},
): Poller {
  let timer: ReturnType<typeof setInterval> | undefined;
  let issued = 0;
  let rendered = 0;

  async function tick(): Promise<void> {
    issued += 1;
    const ticket = issued;
    try {
      const value = await fetchOnce();
      if (ticket > rendered) {
        rendered = ticket;
        render(value);
      }
    } catch (error) {
      if (ticket > rendered) {
        rendered = ticket;
        onError(error);
      }
    }
  }

  return {
    start() {
      if (timer !== undefined) return;
      void tick();
      timer = setInterval(() => void tick(), intervalMs);
    },
    stop() {
      if (timer !== undefined) {
        clearInterval(timer);
        timer = undefined;
      }
    },
    tick,
  };
}
