/** Shared bits for the UI tests. */

import type { FetchLike, HttpResponse } from "../src/api.js";

/** Poll until the condition holds; fails loudly instead of hanging. */
export async function until(cond: () => boolean, timeoutMs = 3000): Promise<void> {
  const start = Date.now();
  while (!cond()) {
    if (Date.now() - start > timeoutMs) {
      throw new Error("condition was not met in time");
    }
    await new Promise((resolve) => setTimeout(resolve, 5));
  }
}

/** Isolated in-memory Storage so tests do not share session records. */
export function memoryStorage(): Storage {
  const map = new Map<string, string>();
  return {
    getItem: (key: string) => map.get(key) ?? null,
    setItem: (key: string, value: string) => void map.set(key, String(value)),
    removeItem: (key: string) => void map.delete(key),
    clear: () => map.clear(),
    key: (index: number) => [...map.keys()][index] ?? null,
    get length() {
      return map.size;
    },
  } as Storage;
}

export interface LoggedCall {
  url: string;
  method: string;
  body: unknown;
}

export type RouteResult = { status: number; body: unknown };
export type Responder = (call: LoggedCall) => RouteResult | Promise<RouteResult>;

/** Programmable fetch stand-in that records every request. */
export class FakeHttp {
  calls: LoggedCall[] = [];
  respond: Responder = () => ({ status: 500, body: { error: "no responder installed" } });

  readonly fetch: FetchLike = async (url, init) => {
    const call: LoggedCall = {
      url,
      method: init?.method ?? "GET",
      body: init?.body ? JSON.parse(String(init.body)) : undefined,
    };
    this.calls.push(call);
    const result = await this.respond(call);
    const response: HttpResponse = {
      ok: result.status >= 200 && result.status < 300,
      status: result.status,
      json: async () => result.body,
    };
    return response;
  };

  answersPosted(): LoggedCall[] {
    return this.calls.filter((c) => c.method === "POST" && c.url.includes("/answer"));
  }
}

export function submitLoginForm(root: HTMLElement, name: string): void {
  const input = root.querySelector("input") as HTMLInputElement;
  const form = root.querySelector("form") as HTMLFormElement;
  input.value = name;
  form.dispatchEvent(new Event("submit", { bubbles: true, cancelable: true }));
}

export function pairIdShown(root: HTMLElement): string | undefined {
  return root.querySelector<HTMLElement>(".pair-screen")?.dataset.pairId;
}

export function clickAnswer(root: HTMLElement, verdict: "yes" | "no"): void {
  const button = root.querySelector<HTMLButtonElement>(`.answer-${verdict}`);
  if (!button) throw new Error("answer button not rendered");
  button.click();
}
