import { describe, expect, it } from "vitest";

import { fnv1a32, gtOnLeft } from "../src/hash.js";

describe("fnv1a32", () => {
  it("matches the published 32-bit FNV-1a vectors", () => {
    // Reference values from the FNV authors' test suite.
    expect(fnv1a32("")).toBe(0x811c9dc5);
    expect(fnv1a32("a")).toBe(0xe40c292c);
    expect(fnv1a32("b")).toBe(0xe70c2de5);
    expect(fnv1a32("foobar")).toBe(0xbf9cf968);
  });

  it("hashes UTF-8 bytes, not UTF-16 code units", () => {
    // "é" is 0xc3 0xa9 in UTF-8; fold the two bytes by hand.
    let hash = 0x811c9dc5;
    for (const byte of [0xc3, 0xa9]) {
      hash ^= byte;
      hash = Math.imul(hash, 0x01000193) >>> 0;
    }
    expect(fnv1a32("é")).toBe(hash);
  });

  it("stays within unsigned 32-bit range", () => {
    for (const text of ["p000", "p001", "trap-17", "x".repeat(300)]) {
      const value = fnv1a32(text);
      expect(Number.isInteger(value)).toBe(true);
      expect(value).toBeGreaterThanOrEqual(0);
      expect(value).toBeLessThanOrEqual(0xffffffff);
    }
  });
});

describe("gtOnLeft", () => {
  it("follows hash parity: even left, odd right", () => {
    const ids = ["p000", "p001", "p002", "pair-a", "pair-b", "t0"];
    for (const id of ids) {
      expect(gtOnLeft(id)).toBe(fnv1a32(id) % 2 === 0);
    }
  });

  it("is deterministic per pair id", () => {
    for (let i = 0; i < 50; i++) {
      const id = `pair-${i}`;
      expect(gtOnLeft(id)).toBe(gtOnLeft(id));
    }
  });

  it("uses both sides across a realistic id population", () => {
    const sides = new Set<boolean>();
    for (let i = 0; i < 40; i++) {
      sides.add(gtOnLeft(`p${String(i).padStart(3, "0")}`));
    }
    expect(sides.size).toBe(2);
  });
});
