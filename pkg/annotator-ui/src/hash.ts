/** Deterministic pair-id hashing for left/right side assignment. */

/** 32-bit FNV-1a over the UTF-8 bytes of the input. */
export function fnv1a32(text: string): number {
  let hash = 0x811c9dc5;
  for (const byte of new TextEncoder().encode(text)) {
    hash ^= byte;
    hash = Math.imul(hash, 0x01000193) >>> 0;
  }
  return hash >>> 0;
}

/**
 * Which side shows the ground-truth image for this pair.
 *
 * Even hash puts GT on the left, odd on the right, so the side varies
 * across pairs but is reproducible for any given pair_id.
 */
export function gtOnLeft(pairId: string): boolean {
  return fnv1a32(pairId) % 2 === 0;
}
