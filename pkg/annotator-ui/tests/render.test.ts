import { beforeEach, describe, expect, it } from "vitest";

import { fnv1a32 } from "../src/hash.js";
import {
  QUESTION_TEXT,
  renderBanner,
  renderDone,
  renderLogin,
  renderNotice,
  renderPair,
} from "../src/render.js";
import { initialState, pairLoaded, sessionOpened, submitStarted } from "../src/state.js";
import type { UiState } from "../src/state.js";

const CANDIDATES = ["p000", "p001", "p002", "p003", "p004", "p005"];
const EVEN_ID = CANDIDATES.find((id) => fnv1a32(id) % 2 === 0) as string;
const ODD_ID = CANDIDATES.find((id) => fnv1a32(id) % 2 === 1) as string;

function pairState(pairId: string, submitting = false): UiState {
  let state = sessionOpened(initialState(), "s1", 3);
  state = pairLoaded(state, {
    pair_id: pairId,
    gt_url: `/images/${pairId}/gt`,
    sr_url: `/images/${pairId}/sr`,
  });
  return submitting ? submitStarted(state) : state;
}

let root: HTMLElement;

beforeEach(() => {
  document.body.innerHTML = '<div id="app"></div>';
  root = document.getElementById("app") as HTMLElement;
});

describe("renderLogin", () => {
  it("shows a name field and a start button", () => {
    renderLogin(root, { onLogin: () => undefined });
    expect(root.querySelector("input")).not.toBeNull();
    expect(root.querySelector("button")?.textContent).toBe("Start");
    expect(root.querySelector(".validation")).toBeNull();
  });

  it("surfaces a local validation message when asked", () => {
    renderLogin(root, { onLogin: () => undefined }, "Please enter your name.");
    expect(root.querySelector(".validation")?.textContent).toBe("Please enter your name.");
  });

  it("passes the typed name to the handler on submit", () => {
    const seen: string[] = [];
    renderLogin(root, { onLogin: (name) => seen.push(name) });
    const input = root.querySelector("input") as HTMLInputElement;
    input.value = "jo";
    const form = root.querySelector("form") as HTMLFormElement;
    form.dispatchEvent(new Event("submit", { bubbles: true, cancelable: true }));
    expect(seen).toEqual(["jo"]);
  });
});

describe("renderPair", () => {
  it("renders two images, one question and Yes/No buttons", () => {
    renderPair(root, pairState(EVEN_ID), { onAnswer: () => undefined });
    expect(root.querySelectorAll("img")).toHaveLength(2);
    expect(root.querySelectorAll(".question")).toHaveLength(1);
    const buttons = [...root.querySelectorAll(".answers button")].map((b) => b.textContent);
    expect(buttons).toEqual(["Yes", "No"]);
  });

  it("asks the exact study question", () => {
    renderPair(root, pairState(EVEN_ID), { onAnswer: () => undefined });
    expect(root.querySelector(".question")?.textContent).toBe(
      "Does the high-level semantic fidelity change between the two images",
    );
    expect(QUESTION_TEXT).toBe(
      "Does the high-level semantic fidelity change between the two images",
    );
  });

  it("puts GT left for even pair-id hashes and right for odd", () => {
    renderPair(root, pairState(EVEN_ID), { onAnswer: () => undefined });
    let images = root.querySelectorAll("img");
    expect(images[0].getAttribute("src")).toContain("/gt");
    expect(images[1].getAttribute("src")).toContain("/sr");

    renderPair(root, pairState(ODD_ID), { onAnswer: () => undefined });
    images = root.querySelectorAll("img");
    expect(images[0].getAttribute("src")).toContain("/sr");
    expect(images[1].getAttribute("src")).toContain("/gt");
  });

  it("gives both image slots the same display box", () => {
    renderPair(root, pairState(EVEN_ID), { onAnswer: () => undefined });
    const slots = root.querySelectorAll(".image-slot");
    expect(slots).toHaveLength(2);
    expect(slots[0].className).toBe(slots[1].className);
  });

  it("disables the answer buttons while submitting", () => {
    renderPair(root, pairState(EVEN_ID, true), { onAnswer: () => undefined });
    const buttons = root.querySelectorAll<HTMLButtonElement>(".answers button");
    expect(buttons[0].disabled).toBe(true);
    expect(buttons[1].disabled).toBe(true);
  });

  it("reports clicks with the chosen verdict", () => {
    const seen: string[] = [];
    renderPair(root, pairState(EVEN_ID), { onAnswer: (v) => seen.push(v) });
    root.querySelector<HTMLButtonElement>(".answer-yes")?.click();
    root.querySelector<HTMLButtonElement>(".answer-no")?.click();
    expect(seen).toEqual(["yes", "no"]);
  });

  it("offers a retry control when an image fails to load", () => {
    renderPair(root, pairState(EVEN_ID), { onAnswer: () => undefined });
    const img = root.querySelector("img") as HTMLImageElement;
    const originalSrc = img.getAttribute("src") as string;
    img.dispatchEvent(new Event("error"));
    const retry = root.querySelector<HTMLButtonElement>(".retry-image");
    expect(retry).not.toBeNull();
    retry?.click();
    const replacement = root.querySelector("img") as HTMLImageElement;
    expect(replacement.getAttribute("src")).toContain(originalSrc);
    expect(replacement.getAttribute("src")).toContain("retry=1");
  });

  it("shows progress and tags the shown pair id", () => {
    renderPair(root, pairState(EVEN_ID), { onAnswer: () => undefined });
    expect(root.querySelector(".progress")?.textContent).toBe("0 of 3 answered");
    expect(root.querySelector<HTMLElement>(".pair-screen")?.dataset.pairId).toBe(EVEN_ID);
  });
});

describe("banners and completion", () => {
  it("renderBanner retries through its button and then clears", () => {
    let retried = 0;
    renderBanner(root, "Could not start the session", () => {
      retried += 1;
    });
    expect(root.querySelector(".banner")?.textContent).toContain("Could not start");
    root.querySelector<HTMLButtonElement>(".banner button")?.click();
    expect(retried).toBe(1);
    expect(root.querySelector(".banner")).toBeNull();
  });

  it("renderNotice keeps a single status line", () => {
    renderNotice(root, "Loading the next pair...");
    renderNotice(root, "Connection lost; retrying automatically.");
    const notices = root.querySelectorAll(".notice");
    expect(notices).toHaveLength(1);
    expect(notices[0].textContent).toBe("Connection lost; retrying automatically.");
  });

  it("renderDone reports the answered total", () => {
    let state = pairState(EVEN_ID);
    state = { ...state, screen: "done", answered_count: 3, pair: null };
    renderDone(root, state);
    expect(root.querySelector(".done")?.textContent).toContain("3 of 3");
  });
});
