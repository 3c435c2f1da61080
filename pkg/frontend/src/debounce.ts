/** Trailing-edge debounce for the auto-synthesize-on-pen-up toggle. */

export function debounce<A extends unknown[]>(
  fn: (...args: A) => void,
  delayMs: number,
): { call: (...args: A) => void; cancel: () => void; flush: () => void } {
  let timer: ReturnType<typeof setTimeout> | null = null;
  let pending: A | null = null;
  const call = (...args: A) => {
    pending = args;
    if (timer) clearTimeout(timer);
    timer = setTimeout(() => {
      timer = null;
      const args2 = pending as A;
      pending = null;
      fn(...args2);
    }, delayMs);
  };
  const cancel = () => {
    if (timer) clearTimeout(timer);
    timer = null;
    pending = null;
  };
  const flush = () => {
    if (timer && pending) {
      clearTimeout(timer);
      timer = null;
      const args = pending;
      pending = null;
      fn(...args);
    }
  };
  return { call, cancel, flush };
}
