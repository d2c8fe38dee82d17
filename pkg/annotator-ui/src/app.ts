/** Application controller: wires the API client, state transitions and
 * rendering, and owns persistence of the session across page reloads.
 */

import { ApiClient, ApiError, isDone } from "./api.js";
import type { FetchLike, Verdict } from "./api.js";
import * as transitions from "./state.js";
import type { UiState } from "./state.js";
import {
  renderBanner,
  renderDone,
  renderLogin,
  renderNotice,
  renderPair,
} from "./render.js";

const STORAGE_KEY = "fidelity-study.session";

interface StoredSession {
  session_id: string;
  total_pairs: number;
  answered_count: number;
}

export interface AppOptions {
  root: HTMLElement;
  /** Origin prefix for API calls; empty string means same origin. */
  apiBase?: string;
  fetchImpl?: FetchLike;
  storage?: Storage;
  /** Millisecond clock used for latency measurement. */
  now?: () => number;
  /** Delay between automatic resends after a network failure. */
  retryDelayMs?: number;
}

function describe(error: unknown): string {
  return error instanceof Error ? error.message : String(error);
}

function delay(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

export class App {
  state: UiState = transitions.initialState();

  private readonly api: ApiClient;
  private readonly root: HTMLElement;
  private readonly storage: Storage | null;
  private readonly now: () => number;
  private readonly retryDelayMs: number;
  private renderedAt = 0;

  constructor(options: AppOptions) {
    this.root = options.root;
    this.api = new ApiClient(options.apiBase ?? "", options.fetchImpl);
    this.storage = options.storage ?? (typeof sessionStorage !== "undefined" ? sessionStorage : null);
    this.now = options.now ?? (() => performance.now());
    this.retryDelayMs = options.retryDelayMs ?? 1500;
  }

  /** Entry point: resume a stored session or show the login screen. */
  async start(): Promise<void> {
    const stored = this.readStored();
    if (stored) {
      this.state = transitions.sessionResumed(
        this.state,
        stored.session_id,
        stored.total_pairs,
        stored.answered_count,
      );
      await this.loadNext();
      return;
    }
    this.renderCurrent();
  }

  async login(name: string): Promise<void> {
    const trimmed = name.trim();
    if (!trimmed) {
      renderLogin(this.root, this.loginHandlers(), "Please enter your name.", name);
      return;
    }
    try {
      const info = await this.api.openSession(trimmed);
      this.state = transitions.sessionOpened(this.state, info.session_id, info.total_pairs);
      this.persist();
    } catch (error) {
      renderLogin(this.root, this.loginHandlers(), undefined, trimmed);
      renderBanner(this.root, `Could not start the session: ${describe(error)}`, () => {
        void this.login(trimmed);
      });
      return;
    }
    await this.loadNext();
  }

  async submit(verdict: Verdict): Promise<void> {
    if (this.state.submitting || !this.state.pair || !this.state.session_id) {
      return;
    }
    const pairId = this.state.pair.pair_id;
    const latencyMs = Math.max(0, Math.round(this.now() - this.renderedAt));
    this.state = transitions.submitStarted(this.state);
    this.renderCurrent();
    await this.sendAnswer(pairId, verdict, latencyMs);
  }

  /** Send one answer; resends the identical payload after network
   * failures, so a retry that races an already-recorded answer lands on
   * the 409 resync path instead of producing a duplicate event. */
  private async sendAnswer(pairId: string, verdict: Verdict, latencyMs: number): Promise<void> {
    const sessionId = this.state.session_id as string;
    try {
      const ack = await this.api.submitAnswer(sessionId, pairId, verdict, latencyMs);
      this.state = transitions.answerAccepted(this.state, ack.remaining);
      this.persist();
      await this.loadNext();
    } catch (error) {
      if (error instanceof ApiError && error.status === 409) {
        // Head moved (or this answer already landed); resync from the server.
        this.state = transitions.submitFailed(this.state);
        await this.loadNext();
      } else if (error instanceof ApiError && error.status === 404) {
        this.forgetSession();
      } else if (error instanceof ApiError) {
        this.state = transitions.submitFailed(this.state);
        this.renderCurrent();
        renderBanner(this.root, `Answer was rejected: ${describe(error)}`, () => {
          void this.resend(pairId, verdict, latencyMs);
        });
      } else {
        renderNotice(this.root, "Connection lost; retrying automatically.");
        await delay(this.retryDelayMs);
        await this.sendAnswer(pairId, verdict, latencyMs);
      }
    }
  }

  private async resend(pairId: string, verdict: Verdict, latencyMs: number): Promise<void> {
    if (this.state.submitting) {
      return;
    }
    this.state = transitions.submitStarted(this.state);
    this.renderCurrent();
    await this.sendAnswer(pairId, verdict, latencyMs);
  }

  private async loadNext(): Promise<void> {
    const sessionId = this.state.session_id;
    if (!sessionId) {
      this.renderCurrent();
      return;
    }
    try {
      const next = await this.api.nextPair(sessionId);
      if (isDone(next)) {
        this.state = transitions.sessionDone(this.state);
        this.persist();
      } else {
        this.state = transitions.pairLoaded(this.state, next);
      }
      this.renderCurrent();
    } catch (error) {
      if (error instanceof ApiError && error.status === 404) {
        // The server no longer knows this session (restart); start over.
        this.forgetSession();
        return;
      }
      this.renderCurrent();
      renderBanner(this.root, `Could not load the next pair: ${describe(error)}`, () => {
        void this.loadNext();
      });
    }
  }

  private forgetSession(): void {
    this.clearStored();
    this.state = transitions.initialState();
    this.renderCurrent();
  }

  private loginHandlers() {
    return { onLogin: (name: string) => void this.login(name) };
  }

  private renderCurrent(): void {
    if (this.state.screen === "login") {
      renderLogin(this.root, this.loginHandlers());
    } else if (this.state.screen === "done") {
      renderDone(this.root, this.state);
    } else if (this.state.pair) {
      const wasShowing =
        this.root.querySelector<HTMLElement>(".pair-screen")?.dataset.pairId;
      renderPair(this.root, this.state, {
        onAnswer: (verdict: Verdict) => void this.submit(verdict),
      });
      // The latency clock starts when a pair first appears, not on
      // re-renders of the same pair (e.g. the disabled-buttons repaint).
      if (wasShowing !== this.state.pair.pair_id) {
        this.renderedAt = this.now();
      }
    } else {
      renderNotice(this.root, "Loading the next pair...");
    }
  }

  private persist(): void {
    if (!this.storage || !this.state.session_id) return;
    const record: StoredSession = {
      session_id: this.state.session_id,
      total_pairs: this.state.total_pairs,
      answered_count: this.state.answered_count,
    };
    try {
      this.storage.setItem(STORAGE_KEY, JSON.stringify(record));
    } catch {
      // Storage may be unavailable; resuming is then best-effort.
    }
  }

  private readStored(): StoredSession | null {
    if (!this.storage) return null;
    let raw: string | null = null;
    try {
      raw = this.storage.getItem(STORAGE_KEY);
    } catch {
      return null;
    }
    if (!raw) return null;
    try {
      const doc = JSON.parse(raw) as Partial<StoredSession>;
      if (typeof doc.session_id !== "string" || !doc.session_id) return null;
      return {
        session_id: doc.session_id,
        total_pairs: typeof doc.total_pairs === "number" ? doc.total_pairs : 0,
        answered_count: typeof doc.answered_count === "number" ? doc.answered_count : 0,
      };
    } catch {
      return null;
    }
  }

  private clearStored(): void {
    try {
      this.storage?.removeItem(STORAGE_KEY);
    } catch {
      // Ignore; worst case the stale session 404s again next load.
    }
  }
}
