export interface Debounced<A extends unknown[]> {
  call(...args: A): void;
  cancel(): void;
  flush(): void;
}

/**
 * Trailing-edge debounce: rapid calls collapse into one invocation `ms`
 * after the burst ends. Keeps drag interactions from flooding the service.
 */
export function debounce<A extends unknown[]>(
  fn: (...args: A) => void,
  ms: number,
): Debounced<A> {
  let timer: ReturnType<typeof setTimeout> | null = null;
  let pending: A | null = null;

  const fire = () => {
    timer = null;
    if (pending) {
      const args = pending;
      pending = null;
      fn(...args);
    }
  };

  return {
    call(...args: A) {
      pending = args;
      if (timer !== null) clearTimeout(timer);
      timer = setTimeout(fire, ms);
    },
    cancel() {
      if (timer !== null) clearTimeout(timer);
      timer = null;
      pending = null;
    },
    flush() {
      if (timer !== null) clearTimeout(timer);
      fire();
    },
  };
}

/** Latest-wins gate: resolves only for the most recently started run. */
export class LatestWins<T> {
  private counter = 0;

  async run(task: () => Promise<T>): Promise<T | undefined> {
    const ticket = ++this.counter;
    const result = await task();
    return ticket === this.counter ? result : undefined;
  }
}
