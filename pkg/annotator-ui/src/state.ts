/** UI session state and its transitions.
 *
 * All transitions return a new state object; answered_count never
 * decreases, which keeps the progress display monotone even when a
 * conflict forces a resync against the server queue.
 */

import type { PairPayload } from "./api.js";

export type Screen = "login" | "pair" | "done";

export interface UiState {
  screen: Screen;
  session_id: string | null;
  pair: PairPayload | null;
  answered_count: number;
  total_pairs: number;
  submitting: boolean;
}

export function initialState(): UiState {
  return {
    screen: "login",
    session_id: null,
    pair: null,
    answered_count: 0,
    total_pairs: 0,
    submitting: false,
  };
}

export function sessionOpened(state: UiState, sessionId: string, totalPairs: number): UiState {
  return {
    ...state,
    screen: "pair",
    session_id: sessionId,
    pair: null,
    answered_count: 0,
    total_pairs: totalPairs,
    submitting: false,
  };
}

/** A session restored from storage; counts are refined as acks arrive. */
export function sessionResumed(
  state: UiState,
  sessionId: string,
  totalPairs: number,
  answered: number,
): UiState {
  return {
    ...state,
    screen: "pair",
    session_id: sessionId,
    pair: null,
    answered_count: Math.max(state.answered_count, answered),
    total_pairs: totalPairs,
    submitting: false,
  };
}

export function pairLoaded(state: UiState, pair: PairPayload): UiState {
  return { ...state, screen: "pair", pair, submitting: false };
}

export function submitStarted(state: UiState): UiState {
  if (state.submitting) {
    throw new Error("already submitting");
  }
  return { ...state, submitting: true };
}

/**
 * Server acknowledged the answer. `remaining` is the queue length after
 * the pop; counting from the far end corrects any undercount after a
 * concurrent-session conflict while staying monotone.
 */
export function answerAccepted(state: UiState, remaining: number): UiState {
  const fromServer = state.total_pairs - remaining;
  return {
    ...state,
    answered_count: Math.max(state.answered_count + 1, fromServer),
    submitting: false,
  };
}

export function submitFailed(state: UiState): UiState {
  return { ...state, submitting: false };
}

export function sessionDone(state: UiState): UiState {
  return {
    ...state,
    screen: "done",
    pair: null,
    answered_count: state.total_pairs > 0
      ? Math.max(state.answered_count, state.total_pairs)
      : state.answered_count,
    submitting: false,
  };
}
